//! Explicit SSP Runge–Kutta methods in Shu–Osher form.
//!
//! Stage `i` is `y_i = Σ_{j<i} (α_ij y_j + Δt β_ij L y_j)` with `y_0 = u^n` and
//! `u^{n+1} = y_s`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::StateVector;
use crate::operator::GlobalOperator;

/// States whose M-norm exceeds this multiple of the initial norm count as blown up.
pub const BLOWUP_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RKMethod {
    name: String,
    order: usize,
    /// `alpha[i-1][j]`, `j < i`, for stages `i = 1..=s`.
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    monotonicity_cfl: Option<f64>,
}

impl RKMethod {
    /// Builds a method from Shu–Osher coefficients and checks the convex-weight invariants.
    pub fn new(
        name: impl Into<String>,
        order: usize,
        alpha: Vec<Vec<f64>>,
        beta: Vec<Vec<f64>>,
        monotonicity_cfl: Option<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if alpha.is_empty() || alpha.len() != beta.len() || order == 0 {
            return Err(Error::InvalidArgument(format!("{name}: malformed tableau")));
        }
        for (i, (a, b)) in alpha.iter().zip(&beta).enumerate() {
            if a.len() != i + 1 || b.len() != i + 1 {
                return Err(Error::InvalidArgument(format!("{name}: stage {} has wrong length", i + 1)));
            }
            if a.iter().chain(b).any(|v| *v < 0.0) {
                return Err(Error::InvalidArgument(format!("{name}: negative coefficient in stage {}", i + 1)));
            }
            let sum: f64 = a.iter().sum();
            if (sum - 1.0).abs() > 1e-14 {
                return Err(Error::InvalidArgument(format!(
                    "{name}: stage {} weights sum to {sum}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            name,
            order,
            alpha,
            beta,
            monotonicity_cfl,
        })
    }

    pub fn euler() -> Self {
        Self::new("euler", 1, vec![vec![1.0]], vec![vec![1.0]], None).expect("valid tableau")
    }

    pub fn ssprk22() -> Self {
        Self::new(
            "ssprk22",
            2,
            vec![vec![1.0], vec![0.5, 0.5]],
            vec![vec![1.0], vec![0.0, 0.5]],
            None,
        )
        .expect("valid tableau")
    }

    pub fn ssprk33() -> Self {
        Self::new(
            "ssprk33",
            3,
            vec![vec![1.0], vec![0.75, 0.25], vec![1.0 / 3.0, 0.0, 2.0 / 3.0]],
            vec![vec![1.0], vec![0.0, 0.25], vec![0.0, 0.0, 2.0 / 3.0]],
            Some(1.0),
        )
        .expect("valid tableau")
    }

    /// Ketcheson's ten-stage fourth-order method.
    pub fn ssprk104() -> Self {
        let s = 10;
        let mut alpha = Vec::with_capacity(s);
        let mut beta = Vec::with_capacity(s);
        for i in 1..=s {
            let mut a = vec![0.0; i];
            let mut b = vec![0.0; i];
            match i {
                5 => {
                    a[0] = 3.0 / 5.0;
                    a[4] = 2.0 / 5.0;
                    b[4] = 1.0 / 15.0;
                }
                10 => {
                    a[0] = 1.0 / 25.0;
                    a[4] = 9.0 / 25.0;
                    a[9] = 3.0 / 5.0;
                    b[4] = 3.0 / 50.0;
                    b[9] = 1.0 / 10.0;
                }
                _ => {
                    a[i - 1] = 1.0;
                    b[i - 1] = 1.0 / 6.0;
                }
            }
            alpha.push(a);
            beta.push(b);
        }
        Self::new("ssprk104", 4, alpha, beta, Some(0.67493)).expect("valid tableau")
    }

    pub fn all() -> Vec<RKMethod> {
        vec![Self::euler(), Self::ssprk22(), Self::ssprk33(), Self::ssprk104()]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.alpha.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Step-size constant `C` with `‖u^{n+1}‖_M ≤ ‖u^n‖_M` for `Δt‖L‖_M ≤ C`, when known.
    pub fn monotonicity_cfl(&self) -> Option<f64> {
        self.monotonicity_cfl
    }

    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    /// Coefficients of `P(z)` with `u^{n+1} = P(ΔtL) u^n`, lowest degree first.
    pub fn stability_polynomial(&self) -> Vec<f64> {
        let s = self.stages();
        let mut stages: Vec<Vec<f64>> = vec![vec![1.0]];
        for i in 0..s {
            let mut y = vec![0.0; i + 2];
            for j in 0..=i {
                let (a, b) = (self.alpha[i][j], self.beta[i][j]);
                for (k, c) in stages[j].iter().enumerate() {
                    y[k] += a * c;
                    y[k + 1] += b * c;
                }
            }
            stages.push(y);
        }
        let mut p = stages.pop().unwrap();
        while p.len() > 1 && *p.last().unwrap() == 0.0 {
            p.pop();
        }
        p
    }
}

impl fmt::Display for RKMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for RKMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['(', ')', ',', '-', '_'], "").as_str() {
            "euler" | "ee" => Ok(Self::euler()),
            "ssprk22" => Ok(Self::ssprk22()),
            "ssprk33" => Ok(Self::ssprk33()),
            "ssprk104" => Ok(Self::ssprk104()),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method '{s}', expected euler, ssprk22, ssprk33 or ssprk104"
            ))),
        }
    }
}

/// Reusable stage storage for one method and problem size.
#[derive(Debug, Clone)]
pub struct Stepper {
    method: RKMethod,
    stages: Vec<Vec<f64>>,
    rhs: Vec<Vec<f64>>,
    needs_rhs: Vec<bool>,
}

impl Stepper {
    pub fn new(method: &RKMethod, n: usize) -> Self {
        let s = method.stages();
        let needs_rhs = (0..s)
            .map(|j| method.beta[j..].iter().any(|b| b[j] != 0.0))
            .collect();
        Self {
            method: method.clone(),
            stages: vec![vec![0.0; n]; s],
            rhs: vec![vec![0.0; n]; s],
            needs_rhs,
        }
    }

    pub fn method(&self) -> &RKMethod {
        &self.method
    }

    /// Advances `u` in place by one step of size `dt`.
    pub fn step_in_place(&mut self, op: &GlobalOperator, u: &mut [f64], dt: f64) -> Result<()> {
        let n = u.len();
        if self.stages.first().map_or(0, Vec::len) != n {
            return Err(Error::DimensionMismatch {
                expected: self.stages.first().map_or(0, Vec::len),
                found: n,
            });
        }
        let s = self.method.stages();
        self.stages[0].copy_from_slice(u);
        for i in 0..s {
            if self.needs_rhs[i] {
                op.apply_into(&self.stages[i], &mut self.rhs[i])?;
            }
            // the last stage is written straight into `u`
            let (a, b) = (&self.method.alpha[i], &self.method.beta[i]);
            if i + 1 == s {
                combine(u, &self.stages, &self.rhs, a, b, dt);
            } else {
                let mut next = std::mem::take(&mut self.stages[i + 1]);
                combine(&mut next, &self.stages, &self.rhs, a, b, dt);
                self.stages[i + 1] = next;
            }
        }
        Ok(())
    }
}

fn combine(out: &mut [f64], stages: &[Vec<f64>], rhs: &[Vec<f64>], a: &[f64], b: &[f64], dt: f64) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..a.len() {
        if a[j] != 0.0 {
            for (o, y) in out.iter_mut().zip(&stages[j]) {
                *o += a[j] * y;
            }
        }
        if b[j] != 0.0 {
            let f = dt * b[j];
            for (o, r) in out.iter_mut().zip(&rhs[j]) {
                *o += f * r;
            }
        }
    }
}

/// One step `u ↦ P(ΔtL)u`.
pub fn step(method: &RKMethod, op: &GlobalOperator, u: &StateVector, dt: f64) -> Result<StateVector> {
    check_dt(dt)?;
    let mut out = u.clone().into_vec();
    Stepper::new(method, u.len()).step_in_place(op, &mut out, dt)?;
    Ok(out.into())
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `‖u‖_M` at each recorded time.
    pub energies: Vec<f64>,
    pub final_state: StateVector,
    pub steps: usize,
}

impl Trajectory {
    pub fn initial_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.iter().cloned().fold(f64::MIN, f64::max)
    }
}

/// Number of steps of size `dt` needed to reach `t_final`; a remainder below
/// `1e-9·dt` is absorbed instead of producing a sliver step.
pub fn step_count(dt: f64, t_final: f64) -> usize {
    let r = t_final / dt;
    let n = r.ceil();
    let n = if r - r.floor() < 1e-9 { r.floor() } else { n };
    (n as usize).max(1)
}

/// Integrates to `t_final`, recording the M-norm every `record_every` steps and at the end.
pub fn evolve(
    method: &RKMethod,
    op: &GlobalOperator,
    u0: &StateVector,
    dt: f64,
    t_final: f64,
    record_every: usize,
) -> Result<Trajectory> {
    check_dt(dt)?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be positive, got {t_final}")));
    }
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be at least 1".into()));
    }
    if u0.len() != op.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: op.n_dofs(),
            found: u0.len(),
        });
    }
    let mass = op.mass();
    let energy = |u: &[f64]| -> f64 { u.iter().zip(mass).map(|(v, w)| w * v * v).sum::<f64>().sqrt() };
    let mut u = u0.clone().into_vec();
    let e0 = energy(&u);
    let n_steps = step_count(dt, t_final);
    let mut times = vec![0.0];
    let mut energies = vec![e0];
    let mut stepper = Stepper::new(method, u.len());
    for k in 0..n_steps {
        let last = k + 1 == n_steps;
        let h = if last { t_final - k as f64 * dt } else { dt };
        stepper.step_in_place(op, &mut u, h)?;
        let t = if last { t_final } else { (k + 1) as f64 * dt };
        let e = energy(&u);
        if !e.is_finite() || e > BLOWUP_FACTOR * e0.max(f64::MIN_POSITIVE) {
            return Err(Error::Unstable {
                step: k + 1,
                time: t,
                energy_ratio: e / e0,
            });
        }
        if last || (k + 1) % record_every == 0 {
            times.push(t);
            energies.push(e);
        }
    }
    Ok(Trajectory {
        times,
        energies,
        final_state: u.into(),
        steps: n_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CutMesh;
    use crate::operator::{AdvectionConfig, PenaltyConfig};
    use crate::quadrature::{NodeKind, QuadratureRule};

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|v| v as f64).product()
    }

    #[test]
    fn polynomials_match_taylor_through_order() {
        for m in RKMethod::all() {
            let p = m.stability_polynomial();
            assert_eq!(p.len(), m.stages().max(m.order()) + 1, "{}", m.name());
            for k in 0..=m.order() {
                assert!((p[k] - 1.0 / factorial(k)).abs() < 1e-14, "{} coeff {k}", m.name());
            }
        }
        // s = q for the low-order methods, so the polynomial is exactly the Taylor one
        assert_eq!(RKMethod::ssprk33().stability_polynomial().len(), 4);
    }

    #[test]
    fn parse_names() {
        assert_eq!("SSPRK(10,4)".parse::<RKMethod>().unwrap().stages(), 10);
        assert_eq!("euler".parse::<RKMethod>().unwrap().order(), 1);
        assert!("rk4".parse::<RKMethod>().is_err());
    }

    #[test]
    fn rejects_negative_weights() {
        assert!(RKMethod::new("x", 1, vec![vec![1.0]], vec![vec![-1.0]], None).is_err());
        assert!(RKMethod::new("x", 1, vec![vec![0.9]], vec![vec![1.0]], None).is_err());
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(0.1, 1.0), 10);
        assert_eq!(step_count(0.3, 1.0), 4);
        assert_eq!(step_count(2.0, 1.0), 1);
    }

    #[test]
    fn free_stream_and_truncated_last_step() {
        let rule = QuadratureRule::new(NodeKind::GaussLegendre, 2).unwrap();
        let mesh = CutMesh::new((0.0, 1.0), 8, 4, 0.1).unwrap();
        let op = GlobalOperator::assemble(&mesh, &rule, AdvectionConfig::default(), PenaltyConfig::new(1.0).unwrap())
            .unwrap();
        let u0 = mesh.project(&rule, |_| 1.0);
        for m in RKMethod::all() {
            let tr = evolve(&m, &op, &u0, 0.003, 0.1, 1).unwrap();
            assert_eq!(*tr.times.last().unwrap(), 0.1);
            assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
            for e in &tr.energies {
                assert!((e - tr.energies[0]).abs() < 1e-11);
            }
        }
    }
}
