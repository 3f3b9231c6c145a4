//! Convergence and work-precision studies for `u_t + a u_x = 0` on `(0, 1)`
//! with periodic boundaries and exact solution `u0(x − aT)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{scaling_fit, LambdaChoice};
use crate::error::{Error, Result};
use crate::mesh::CutMesh;
use crate::norms::{global_operator_norm_with, NormOptions};
use crate::operator::{AdvectionConfig, GlobalOperator};
use crate::quadrature::{NodeKind, QuadratureRule};
use crate::timestepping::{evolve, step_count, RKMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// `sin(2πx)`
    Sine,
    Constant(f64),
}

impl InitialCondition {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialCondition::Sine => (2.0 * PI * x).sin(),
            InitialCondition::Constant(c) => c,
        }
    }
}

/// How the time step is chosen for each run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// `Δt = safety · ν Δx / a` with the background `Δx`.
    Courant(f64),
    /// `Δt = safety · C / ‖L‖_M`.
    NormBound(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub kind: NodeKind,
    pub p: usize,
    pub method: RKMethod,
    /// Background cell counts.
    pub resolutions: Vec<usize>,
    /// Cut-cell factors; `None` runs the uncut mesh.
    pub alphas: Vec<Option<f64>>,
    pub lambda: LambdaChoice,
    pub step_rule: StepRule,
    pub safety: f64,
    pub t_final: f64,
    pub speed: f64,
    pub initial: InitialCondition,
    pub norm: NormOptions,
}

impl StudySpec {
    pub fn new(kind: NodeKind, p: usize, method: RKMethod) -> Self {
        Self {
            kind,
            p,
            method,
            resolutions: vec![10, 20, 40, 80],
            alphas: vec![None, Some(1e-3), Some(0.1), Some(0.25), Some(0.49)],
            lambda: LambdaChoice::Optimized,
            step_rule: StepRule::NormBound(1.0),
            safety: 0.95,
            t_final: 1.0,
            speed: 1.0,
            initial: InitialCondition::Sine,
            norm: NormOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() || self.alphas.is_empty() {
            return Err(Error::InvalidArgument("resolution and alpha lists must be nonempty".into()));
        }
        if !(self.safety > 0.0 && self.t_final > 0.0 && self.speed > 0.0) {
            return Err(Error::InvalidArgument("safety, final time and speed must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub series: String,
    pub alpha: Option<f64>,
    pub n_background: usize,
    pub dx: f64,
    pub dofs: usize,
    pub dt: f64,
    pub steps: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub series: String,
    pub alpha: Option<f64>,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub orders: Vec<OrderFit>,
}

/// Builds the mesh for one resolution: the cut sits in background cell `n/2`.
pub fn study_mesh(n_background: usize, alpha: Option<f64>) -> Result<CutMesh> {
    match alpha {
        Some(a) => CutMesh::new((0.0, 1.0), n_background, n_background / 2, a),
        None => CutMesh::uniform((0.0, 1.0), n_background),
    }
}

/// One run to `t_final`; returns the M-norm error against the exact solution at the nodes.
fn run(spec: &StudySpec, series: &str, lambda: LambdaChoice, n: usize, alpha: Option<f64>) -> Result<StudyRow> {
    let rule = QuadratureRule::for_scheme(spec.kind, spec.p)?;
    let mesh = study_mesh(n, alpha)?;
    let op = GlobalOperator::assemble(
        &mesh,
        &rule,
        AdvectionConfig::new(spec.speed)?,
        lambda.penalty(spec.kind, spec.p)?,
    )?;
    let dt = match spec.step_rule {
        StepRule::Courant(nu) => spec.safety * nu * mesh.dx() / spec.speed,
        StepRule::NormBound(c) => spec.safety * c / global_operator_norm_with(&op, &spec.norm)?,
    };
    let u0 = mesh.project(&rule, |x| spec.initial.eval(x));
    let tr = evolve(&spec.method, &op, &u0, dt, spec.t_final, usize::MAX)?;
    let shift = spec.speed * spec.t_final;
    let exact = mesh.project(&rule, |x| spec.initial.eval(x - shift));
    let error = tr
        .final_state
        .iter()
        .zip(exact.iter())
        .zip(op.mass())
        .map(|((u, e), w)| w * (u - e).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(StudyRow {
        series: series.to_string(),
        alpha,
        n_background: n,
        dx: mesh.dx(),
        dofs: op.n_dofs(),
        dt,
        steps: step_count(dt, spec.t_final),
        error,
    })
}

fn run_all(spec: &StudySpec, jobs: &[(String, LambdaChoice, usize, Option<f64>)]) -> Result<Vec<StudyRow>> {
    jobs.par_iter()
        .map(|(s, l, n, a)| run(spec, s, *l, *n, *a))
        .collect()
}

fn fit_orders(rows: &[StudyRow]) -> Vec<OrderFit> {
    let mut out: Vec<OrderFit> = Vec::new();
    for r in rows {
        if out.iter().any(|o| o.series == r.series && o.alpha == r.alpha) {
            continue;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|q| q.series == r.series && q.alpha == r.alpha)
            .map(|q| (q.dx, q.error))
            .unzip();
        let order = scaling_fit(&xs, &ys).map(|f| f.exponent).unwrap_or(f64::NAN);
        out.push(OrderFit {
            series: r.series.clone(),
            alpha: r.alpha,
            order,
        });
    }
    out
}

/// Errors at `t_final` for every `(α, resolution)` pair plus the fitted order per `α`.
pub fn convergence_study(spec: &StudySpec) -> Result<StudyResult> {
    spec.validate()?;
    let series = spec.lambda.to_string();
    let jobs: Vec<_> = spec
        .alphas
        .iter()
        .flat_map(|&a| spec.resolutions.iter().map(move |&n| (n, a)))
        .map(|(n, a)| (series.clone(), spec.lambda, n, a))
        .collect();
    let rows = run_all(spec, &jobs)?;
    let orders = fit_orders(&rows);
    Ok(StudyResult { rows, orders })
}

/// Steps against error for the optimized `λ_c`, `λ_c = 1` and the uncut baseline.
///
/// `spec.lambda` is ignored; every cut `α` in `spec.alphas` gets both
/// stabilized series and the uncut mesh is added once.
pub fn work_precision_study(spec: &StudySpec) -> Result<StudyResult> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &n in &spec.resolutions {
        jobs.push(("uncut".to_string(), LambdaChoice::Off, n, None));
    }
    for &a in spec.alphas.iter().flatten() {
        for (name, l) in [("optimized", LambdaChoice::Optimized), ("classic", LambdaChoice::Fixed(1.0))] {
            for &n in &spec.resolutions {
                jobs.push((name.to_string(), l, n, Some(a)));
            }
        }
    }
    let rows = run_all(spec, &jobs)?;
    let orders = fit_orders(&rows);
    Ok(StudyResult { rows, orders })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_is_preserved() {
        let mut spec = StudySpec::new(NodeKind::GaussLegendre, 2, RKMethod::ssprk33());
        spec.resolutions = vec![8, 16];
        spec.alphas = vec![None, Some(1e-3)];
        spec.initial = InitialCondition::Constant(1.0);
        let res = convergence_study(&spec).unwrap();
        assert_eq!(res.rows.len(), 4);
        for r in &res.rows {
            assert!(r.error < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn courant_rule_doubles_steps() {
        let mut spec = StudySpec::new(NodeKind::GaussLegendre, 0, RKMethod::euler());
        spec.resolutions = vec![10, 20];
        spec.alphas = vec![Some(0.3)];
        spec.step_rule = StepRule::Courant(0.5);
        spec.safety = 1.0;
        let res = work_precision_study(&spec).unwrap();
        let uncut: Vec<_> = res.rows.iter().filter(|r| r.series == "uncut").collect();
        assert_eq!(uncut[1].steps, 2 * uncut[0].steps);
        assert_eq!(res.rows.len(), 6);
    }
}
