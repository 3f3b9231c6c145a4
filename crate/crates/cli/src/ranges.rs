//! List flags: comma-separated items, each a value or an inclusive `start:step:stop` range.

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [a, h, b] => out.extend(expand(num(a)?, num(h)?, num(b)?)?),
            _ => return Err(format!("cannot parse '{item}', expected value or start:step:stop")),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    parse_f64_list(s)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("{v} is not a nonnegative integer"))
            }
        })
        .collect()
}

/// Alphas where `uncut` (or `none`) stands for the mesh without a cut.
pub fn parse_alpha_list(s: &str) -> Result<Vec<Option<f64>>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if matches!(item, "uncut" | "none") {
            out.push(None);
        } else {
            out.extend(parse_f64_list(item)?.into_iter().map(Some));
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

fn num(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("'{s}' is not a number"))
}

fn expand(a: f64, h: f64, b: f64) -> Result<Vec<f64>, String> {
    if !(h > 0.0) || b < a {
        return Err(format!("range {a}:{h}:{b} needs step > 0 and stop >= start"));
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(format!("range {a}:{h}:{b} has too many points"));
    }
    // k·h instead of accumulation keeps 0.01:0.01:0.49 free of drift
    Ok((0..=n).map(|k| round(a + k as f64 * h)).collect())
}

fn round(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}
