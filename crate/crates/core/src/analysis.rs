//! Parameter studies: operator-norm sweeps, the min–max choice of `λ_c`, and
//! sharp-CFL bisection.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::CutMesh;
use crate::norms::{global_operator_norm_with, NormOptions};
use crate::operator::{AdvectionConfig, GlobalOperator, PenaltyConfig};
use crate::quadrature::{NodeKind, QuadratureRule};
use crate::timestepping::{evolve, RKMethod};

/// Optimized `λ_c` for `p = 0..=11` on the default layout, as produced by
/// `dodlab optimize-lambda --p 0:1:11`.
pub const OPTIMIZED_LAMBDA_GL: [f64; 12] = [
    1.0, 0.78927, 0.44358, 0.28021, 0.19631, 0.15000, 0.11737, 0.09725, 0.08033, 0.06878, 0.05817, 0.05086,
];
pub const OPTIMIZED_LAMBDA_GLL: [f64; 12] = [
    1.0, 0.87703, 0.54068, 0.31957, 0.22404, 0.16093, 0.12866, 0.10237, 0.08547, 0.07164, 0.06176, 0.05435,
];

/// Shipped optimized `λ_c`, if tabulated for this degree.
pub fn optimized_lambda(kind: NodeKind, p: usize) -> Option<f64> {
    let table = match kind {
        NodeKind::GaussLegendre => &OPTIMIZED_LAMBDA_GL,
        NodeKind::GaussLobattoLegendre => &OPTIMIZED_LAMBDA_GLL,
    };
    table.get(p).copied()
}

/// How `λ_c` is chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaChoice {
    Fixed(f64),
    /// Look up the shipped optimized table.
    Optimized,
    /// No stabilization.
    Off,
}

impl LambdaChoice {
    pub fn penalty(&self, kind: NodeKind, p: usize) -> Result<PenaltyConfig> {
        match *self {
            LambdaChoice::Fixed(l) => PenaltyConfig::new(l),
            LambdaChoice::Optimized => {
                let l = optimized_lambda(kind, p).ok_or_else(|| {
                    Error::InvalidArgument(format!("no optimized lambda_c tabulated for {kind} p={p}"))
                })?;
                PenaltyConfig::new(l)
            }
            LambdaChoice::Off => Ok(PenaltyConfig::disabled()),
        }
    }
}

impl fmt::Display for LambdaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaChoice::Fixed(l) => write!(f, "{l}"),
            LambdaChoice::Optimized => f.write_str("optimized"),
            LambdaChoice::Off => f.write_str("off"),
        }
    }
}

impl FromStr for LambdaChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "optimized" | "opt" => Ok(LambdaChoice::Optimized),
            "off" | "none" => Ok(LambdaChoice::Off),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|l| *l > 0.0 && l.is_finite())
                .map(LambdaChoice::Fixed)
                .ok_or_else(|| Error::InvalidArgument(format!("invalid lambda_c '{s}'"))),
        }
    }
}

/// Mesh layout shared by the studies: `n_background` cells on `(0, 1)` with
/// background cell `cut_cell` (1-based) split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshLayout {
    pub n_background: usize,
    pub cut_cell: usize,
    pub speed: f64,
}

impl Default for MeshLayout {
    /// `Δx = 1/50` with the cut between cells 25 and 26 of the resulting 51.
    fn default() -> Self {
        Self {
            n_background: 50,
            cut_cell: 25,
            speed: 1.0,
        }
    }
}

impl MeshLayout {
    pub fn dx(&self) -> f64 {
        1.0 / self.n_background as f64
    }

    pub fn mesh(&self, alpha: f64) -> Result<CutMesh> {
        CutMesh::new((0.0, 1.0), self.n_background, self.cut_cell, alpha)
    }

    pub fn advection(&self) -> Result<AdvectionConfig> {
        AdvectionConfig::new(self.speed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: NodeKind,
    pub degrees: Vec<usize>,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub layout: MeshLayout,
    pub norm: NormOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.degrees.is_empty() || self.alphas.is_empty() || self.lambdas.is_empty() {
            return Err(Error::InvalidArgument("sweep lists must be nonempty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a <= 0.5)) {
            return Err(Error::InvalidArgument(format!("alpha {a} outside (0, 1/2]")));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("lambda_c {l} must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: NodeKind,
    pub p: usize,
    pub lambda_c: f64,
    pub alpha: f64,
    pub norm_dod: Option<f64>,
    /// Unstabilized operator on the same cut mesh.
    pub norm_background: Option<f64>,
    pub quotient: Option<f64>,
    pub error: Option<String>,
}

/// `‖L‖_M` for one configuration.
pub fn operator_norm_at(
    kind: NodeKind,
    p: usize,
    alpha: f64,
    penalty: PenaltyConfig,
    layout: &MeshLayout,
    norm: &NormOptions,
) -> Result<f64> {
    let rule = QuadratureRule::for_scheme(kind, p)?;
    let op = GlobalOperator::assemble(&layout.mesh(alpha)?, &rule, layout.advection()?, penalty)?;
    global_operator_norm_with(&op, norm)
}

/// One stabilized and one unstabilized norm per grid point, in grid order
/// (degree, then `λ_c`, then `α`). Failed points carry the error message.
pub fn opnorm_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let bg_keys: Vec<(usize, f64)> = spec
        .degrees
        .iter()
        .flat_map(|&p| spec.alphas.iter().map(move |&a| (p, a)))
        .collect();
    let background: Vec<Result<f64>> = bg_keys
        .par_iter()
        .map(|&(p, a)| operator_norm_at(spec.kind, p, a, PenaltyConfig::disabled(), &spec.layout, &spec.norm))
        .collect();
    let bg_map: HashMap<(usize, u64), Result<f64>> = bg_keys
        .iter()
        .map(|&(p, a)| (p, a.to_bits()))
        .zip(background)
        .collect();

    let points: Vec<(usize, f64, f64)> = spec
        .degrees
        .iter()
        .flat_map(|&p| {
            spec.lambdas
                .iter()
                .flat_map(move |&l| spec.alphas.iter().map(move |&a| (p, l, a)))
        })
        .collect();
    let rows = points
        .par_iter()
        .map(|&(p, l, a)| {
            let bg = &bg_map[&(p, a.to_bits())];
            let dod = PenaltyConfig::new(l)
                .and_then(|pen| operator_norm_at(spec.kind, p, a, pen, &spec.layout, &spec.norm));
            let error = match (&dod, bg) {
                (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
                _ => None,
            };
            let norm_dod = dod.ok();
            let norm_background = bg.as_ref().ok().copied();
            SweepRow {
                kind: spec.kind,
                p,
                lambda_c: l,
                alpha: a,
                norm_dod,
                norm_background,
                quotient: norm_dod.zip(norm_background).map(|(d, b)| d / b),
                error,
            }
        })
        .collect();
    Ok(rows)
}

/// `n` equispaced points on `[a, b]`, both ends included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerGrid {
    pub n_lambda: usize,
    pub n_alpha: usize,
    pub lambda_range: (f64, f64),
    pub alpha_range: (f64, f64),
    /// Golden-section stops once the `λ_c` bracket is narrower than this.
    pub bracket_tol: f64,
    pub layout: MeshLayout,
    pub norm: NormOptions,
}

impl Default for OptimizerGrid {
    fn default() -> Self {
        Self {
            n_lambda: 51,
            n_alpha: 51,
            lambda_range: (0.001, 1.0),
            alpha_range: (0.01, 0.5),
            bracket_tol: 1e-4,
            layout: MeshLayout::default(),
            norm: NormOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    pub kind: NodeKind,
    pub p: usize,
    pub lambda_star: f64,
    pub worst_alpha: f64,
    pub minmax_norm: f64,
    /// Min–max value on the coarse grid alone.
    pub coarse_lambda: f64,
    pub coarse_minmax: f64,
    pub refinement_evaluations: usize,
    pub grid: OptimizerGrid,
}

struct MaxNorm {
    value: f64,
    alpha: f64,
}

/// Evaluates `max_α ‖L(λ_c, α)‖_M` over the α grid, reusing the
/// unstabilized norms wherever `η_c = 0`.
struct Objective<'a> {
    kind: NodeKind,
    p: usize,
    alphas: &'a [f64],
    unstabilized: Vec<f64>,
    grid: &'a OptimizerGrid,
}

impl Objective<'_> {
    fn norm(&self, lambda: f64, j: usize) -> Result<f64> {
        let pen = PenaltyConfig::new(lambda)?;
        if pen.eta(self.alphas[j]) == 0.0 {
            return Ok(self.unstabilized[j]);
        }
        operator_norm_at(self.kind, self.p, self.alphas[j], pen, &self.grid.layout, &self.grid.norm)
    }

    fn reduce(&self, norms: Vec<f64>) -> MaxNorm {
        // first maximiser, so ties resolve deterministically
        let mut best = MaxNorm {
            value: f64::MIN,
            alpha: self.alphas[0],
        };
        for (j, v) in norms.into_iter().enumerate() {
            if v > best.value {
                best = MaxNorm {
                    value: v,
                    alpha: self.alphas[j],
                };
            }
        }
        best
    }

    fn eval(&self, lambda: f64) -> Result<MaxNorm> {
        let norms = (0..self.alphas.len())
            .into_par_iter()
            .map(|j| self.norm(lambda, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.reduce(norms))
    }
}

/// Min–max choice of `λ_c`: coarse grid search, then golden-section refinement
/// around the coarse minimiser.
pub fn optimize_lambda(kind: NodeKind, p: usize, grid: &OptimizerGrid) -> Result<OptimizerResult> {
    if grid.n_lambda < 2 || grid.n_alpha < 1 {
        return Err(Error::InvalidArgument("optimizer grids need at least 2 lambdas and 1 alpha".into()));
    }
    let (l0, l1) = grid.lambda_range;
    let (a0, a1) = grid.alpha_range;
    if !(l0 > 0.0 && l1 > l0) || !(a0 > 0.0 && a1 >= a0 && a1 <= 0.5) {
        return Err(Error::InvalidArgument("invalid optimizer search ranges".into()));
    }
    let lambdas = linspace(l0, l1, grid.n_lambda);
    let alphas = linspace(a0, a1, grid.n_alpha);

    let unstabilized = alphas
        .par_iter()
        .map(|&a| operator_norm_at(kind, p, a, PenaltyConfig::disabled(), &grid.layout, &grid.norm))
        .collect::<Result<Vec<_>>>()?;
    let obj = Objective {
        kind,
        p,
        alphas: &alphas,
        unstabilized,
        grid,
    };

    let pairs: Vec<(usize, usize)> = (0..lambdas.len())
        .flat_map(|k| (0..alphas.len()).map(move |j| (k, j)))
        .collect();
    let flat = pairs
        .par_iter()
        .map(|&(k, j)| obj.norm(lambdas[k], j))
        .collect::<Result<Vec<_>>>()?;
    let coarse: Vec<MaxNorm> = flat
        .chunks(alphas.len())
        .map(|row| obj.reduce(row.to_vec()))
        .collect();
    let (k_best, coarse_best) = coarse
        .iter()
        .enumerate()
        .fold((0, &coarse[0]), |acc, (k, m)| if m.value < acc.1.value { (k, m) } else { acc });

    let mut best = (lambdas[k_best], coarse_best.value, coarse_best.alpha);
    let coarse_result = best;
    let mut lo = lambdas[k_best.saturating_sub(1)];
    let mut hi = lambdas[(k_best + 1).min(lambdas.len() - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = obj.eval(x1)?;
    let mut f2 = obj.eval(x2)?;
    let mut evaluations = 2;
    let consider = |x: f64, f: &MaxNorm, best: &mut (f64, f64, f64)| {
        // refinement must strictly improve on the coarse minimum to replace it
        if f.value < best.1 {
            *best = (x, f.value, f.alpha);
        }
    };
    consider(x1, &f1, &mut best);
    consider(x2, &f2, &mut best);
    while hi - lo > grid.bracket_tol {
        if f1.value <= f2.value {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = obj.eval(x1)?;
            consider(x1, &f1, &mut best);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = obj.eval(x2)?;
            consider(x2, &f2, &mut best);
        }
        evaluations += 1;
    }

    Ok(OptimizerResult {
        kind,
        p,
        lambda_star: best.0,
        worst_alpha: best.2,
        minmax_norm: best.1,
        coarse_lambda: coarse_result.0,
        coarse_minmax: coarse_result.1,
        refinement_evaluations: evaluations,
        grid: *grid,
    })
}

/// Long-time energy criterion for one Courant number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityState {
    Stable,
    /// Finite, but the late-window energy exceeds the initial energy.
    EnergyGrowth,
    /// Non-finite state or blow-up.
    Diverged,
}

impl StabilityState {
    pub fn is_stable(self) -> bool {
        self == StabilityState::Stable
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StabilityState::Stable => "stable",
            StabilityState::EnergyGrowth => "energy growth",
            StabilityState::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CflSearch {
    pub method: RKMethod,
    pub kind: NodeKind,
    pub p: usize,
    pub alpha: f64,
    pub lambda: LambdaChoice,
    pub t_final: f64,
    pub bracket: (f64, f64),
    pub rel_tol: f64,
    /// Allowed relative energy excess over the initial energy.
    pub energy_tol: f64,
    /// Trailing fraction of the steps in which the energy criterion is checked.
    pub window: f64,
    pub layout: MeshLayout,
}

impl CflSearch {
    pub fn new(method: RKMethod, kind: NodeKind, p: usize, alpha: f64, lambda: LambdaChoice) -> Self {
        Self {
            method,
            kind,
            p,
            alpha,
            lambda,
            t_final: 100.0,
            bracket: (0.01, 2.0),
            rel_tol: 1e-3,
            energy_tol: 1e-10,
            window: 0.25,
            layout: MeshLayout::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CflResult {
    pub method: String,
    pub kind: NodeKind,
    pub p: usize,
    pub alpha: f64,
    pub lambda_mode: String,
    pub lambda_c: Option<f64>,
    /// Largest Courant number verified stable.
    pub sharp_cfl: f64,
    /// Smallest Courant number verified unstable.
    pub unstable_cfl: f64,
    pub bracket_width: f64,
    pub runs: usize,
}

/// Prepared operator and initial data for repeated stability runs.
pub struct CflProblem {
    search: CflSearch,
    op: GlobalOperator,
    u0: crate::mesh::StateVector,
}

impl CflProblem {
    pub fn new(search: &CflSearch) -> Result<Self> {
        if !(search.t_final > 0.0) || !(search.rel_tol > 0.0) || !(search.window > 0.0 && search.window <= 1.0) {
            return Err(Error::InvalidArgument("invalid CFL search settings".into()));
        }
        let rule = QuadratureRule::for_scheme(search.kind, search.p)?;
        let mesh = search.layout.mesh(search.alpha)?;
        let penalty = search.lambda.penalty(search.kind, search.p)?;
        let op = GlobalOperator::assemble(&mesh, &rule, search.layout.advection()?, penalty)?;
        let u0 = mesh.project(&rule, |x| (2.0 * std::f64::consts::PI * x).sin());
        Ok(Self {
            search: search.clone(),
            op,
            u0,
        })
    }

    pub fn operator(&self) -> &GlobalOperator {
        &self.op
    }

    /// Runs to `t_final` at Courant number `nu = aΔt/Δx` (background `Δx`).
    pub fn classify(&self, nu: f64) -> Result<StabilityState> {
        let s = &self.search;
        let dt = nu * s.layout.dx() / s.layout.speed;
        match evolve(&s.method, &self.op, &self.u0, dt, s.t_final, 1) {
            Ok(tr) => {
                let e0 = tr.initial_energy();
                let n = tr.energies.len();
                let start = ((1.0 - s.window) * (n - 1) as f64).floor() as usize;
                let late = tr.energies[start.max(1)..].iter().cloned().fold(0.0, f64::max);
                Ok(if late <= (1.0 + s.energy_tol) * e0 {
                    StabilityState::Stable
                } else {
                    StabilityState::EnergyGrowth
                })
            }
            Err(Error::Unstable { .. }) => Ok(StabilityState::Diverged),
            Err(e) => Err(e),
        }
    }
}

/// Bisection for the largest stable Courant number inside `search.bracket`.
pub fn sharp_cfl_search(search: &CflSearch) -> Result<CflResult> {
    let (mut lo, mut hi) = search.bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("invalid CFL bracket ({lo}, {hi})")));
    }
    let problem = CflProblem::new(search)?;
    let lo_state = problem.classify(lo)?;
    let hi_state = problem.classify(hi)?;
    if !lo_state.is_stable() || hi_state.is_stable() {
        return Err(Error::InvalidBracket {
            lo,
            hi,
            lo_state: lo_state.as_str(),
            hi_state: hi_state.as_str(),
        });
    }
    let mut runs = 2;
    while hi - lo > search.rel_tol * lo {
        let mid = 0.5 * (lo + hi);
        if problem.classify(mid)?.is_stable() {
            lo = mid;
        } else {
            hi = mid;
        }
        runs += 1;
    }
    let penalty = problem.op.penalty();
    Ok(CflResult {
        method: search.method.name().to_string(),
        kind: search.kind,
        p: search.p,
        alpha: search.alpha,
        lambda_mode: search.lambda.to_string(),
        lambda_c: penalty.enabled().then(|| penalty.lambda_c()),
        sharp_cfl: lo,
        unstable_cfl: hi,
        bracket_width: hi - lo,
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual in `ln y`.
    pub residual: f64,
}

/// Least-squares fit of `y ≈ C x^k` in log–log coordinates.
pub fn scaling_fit(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Degenerate("scaling fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let k = sxy / sxx;
    let b = my - k * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - b - k * x).powi(2)).sum();
    Ok(ScalingFit {
        exponent: k,
        prefactor: b.exp(),
        residual: (rss / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_exact_powers() {
        let xs = [0.1, 0.2, 0.5, 1.0, 3.0];
        let f1 = scaling_fit(&xs, &xs).unwrap();
        assert!((f1.exponent - 1.0).abs() < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|x| 4.0 * x * x).collect();
        let f2 = scaling_fit(&xs, &ys).unwrap();
        assert!((f2.exponent - 2.0).abs() < 1e-12);
        assert!((f2.prefactor - 4.0).abs() < 1e-12);
        assert!(scaling_fit(&xs[..2], &xs[..2]).is_err());
        assert!(scaling_fit(&[1.0, 2.0, -1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn lambda_choice_parsing() {
        assert_eq!("optimized".parse::<LambdaChoice>().unwrap(), LambdaChoice::Optimized);
        assert_eq!("0.5".parse::<LambdaChoice>().unwrap(), LambdaChoice::Fixed(0.5));
        assert!("-1".parse::<LambdaChoice>().is_err());
        assert!(LambdaChoice::Off.penalty(NodeKind::GaussLegendre, 3).unwrap().eta(0.1) == 0.0);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.001, 1.0, 51);
        assert_eq!(v.len(), 51);
        assert_eq!(v[0], 0.001);
        assert_eq!(v[50], 1.0);
    }

    #[test]
    fn sweep_rejects_empty_alphas() {
        let spec = SweepSpec {
            kind: NodeKind::GaussLegendre,
            degrees: vec![1],
            alphas: vec![],
            lambdas: vec![1.0],
            layout: MeshLayout::default(),
            norm: NormOptions::default(),
        };
        assert!(opnorm_sweep(&spec).is_err());
    }
}
