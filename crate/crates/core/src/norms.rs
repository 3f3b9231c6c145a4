//! Mass-weighted vector and operator norms.
//!
//! For a diagonal mass `M`, the induced norm of `A` is the largest singular
//! value of `M^{1/2} A M^{-1/2}`. Small matrices go through a dense SVD; the
//! global operator is normally handled by a Lanczos iteration on the Gram
//! operator `M^{-1/2} Lᵀ M L M^{-1/2}` using block-sparse products only.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrange::LagrangeOperators;
use crate::operator::{GlobalOperator, StabilizedBlock, DENSE_LIMIT};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNorm {
    diag: Vec<f64>,
}

impl WeightedNorm {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if let Some(w) = diag.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("weights must be positive, found {w}")));
        }
        Ok(Self { diag })
    }

    /// Unit weights.
    pub fn euclidean(n: usize) -> Self {
        Self { diag: vec![1.0; n] }
    }

    /// Reference mass `M_R` of a quadrature rule.
    pub fn reference(rule: &QuadratureRule) -> Self {
        Self {
            diag: rule.weights().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.diag
    }

    /// `√(Σ w_k u_k²)`.
    pub fn norm(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.len(),
            });
        }
        Ok(self.norm_unchecked(u))
    }

    pub(crate) fn norm_unchecked(&self, u: &[f64]) -> f64 {
        self.diag
            .iter()
            .zip(u)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `M^{1/2} A M^{-1/2}`.
    fn similarity(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if a.nrows() != n { a.nrows() } else { a.ncols() },
            });
        }
        let sqrt: Vec<f64> = self.diag.iter().map(|w| w.sqrt()).collect();
        Ok(DMatrix::from_fn(n, n, |i, j| sqrt[i] * a[(i, j)] / sqrt[j]))
    }

    /// Induced operator norm `max_u ‖Au‖ / ‖u‖`.
    pub fn operator_norm(&self, a: &DMatrix<f64>) -> Result<f64> {
        let b = self.similarity(a)?;
        Ok(largest_singular_value(b))
    }

    /// `(‖A‖, ‖M⁻¹AᵀM‖)`; the second matrix is the adjoint of `A` in this inner product.
    pub fn adjoint_norm_check(&self, a: &DMatrix<f64>) -> Result<(f64, f64)> {
        let direct = self.operator_norm(a)?;
        let n = self.dim();
        let adj = DMatrix::from_fn(n, n, |i, j| a[(j, i)] * self.diag[j] / self.diag[i]);
        Ok((direct, self.operator_norm(&adj)?))
    }
}

fn largest_singular_value(b: DMatrix<f64>) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    b.singular_values().iter().cloned().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormMethod {
    /// Dense SVD up to `dense_cutoff` unknowns, Lanczos above.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    pub method: NormMethod,
    pub dense_cutoff: usize,
    /// Relative residual tolerance on the Gram eigenvalue.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            method: NormMethod::Auto,
            dense_cutoff: 48,
            tol: 1e-10,
            max_iter: 10_000,
            seed: 0x5eed,
        }
    }
}

/// `‖L‖_M` with default options.
pub fn global_operator_norm(op: &GlobalOperator) -> Result<f64> {
    global_operator_norm_with(op, &NormOptions::default())
}

pub fn global_operator_norm_with(op: &GlobalOperator, opts: &NormOptions) -> Result<f64> {
    let n = op.n_dofs();
    let dense = match opts.method {
        NormMethod::Dense => true,
        NormMethod::Lanczos => false,
        NormMethod::Auto => n <= opts.dense_cutoff,
    };
    if dense {
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                size: n,
                limit: DENSE_LIMIT,
            });
        }
        let w = WeightedNorm::new(op.mass().to_vec())?;
        return w.operator_norm(&op.dense()?);
    }
    lanczos_norm(op, opts)
}

fn lanczos_norm(op: &GlobalOperator, opts: &NormOptions) -> Result<f64> {
    let n = op.n_dofs();
    let sqrt_m: Vec<f64> = op.mass().iter().map(|w| w.sqrt()).collect();
    let mut tmp = vec![0.0; n];
    let mut lv = vec![0.0; n];
    // Gram operator of B = M^{1/2} L M^{-1/2}: BᵀB v = M^{-1/2} Lᵀ M L M^{-1/2} v
    let mut gram = |v: &[f64], out: &mut [f64]| -> Result<()> {
        for k in 0..n {
            tmp[k] = v[k] / sqrt_m[k];
        }
        op.apply_into(&tmp, &mut lv)?;
        for k in 0..n {
            lv[k] *= sqrt_m[k] * sqrt_m[k];
        }
        op.apply_transpose_into(&lv, out)?;
        for k in 0..n {
            out[k] /= sqrt_m[k];
        }
        Ok(())
    };
    let lambda = lanczos_largest(n, &mut gram, opts)?;
    Ok(lambda.max(0.0).sqrt())
}

/// Largest eigenvalue of a symmetric operator by Lanczos with full reorthogonalisation.
fn lanczos_largest<F>(n: usize, apply: &mut F, opts: &NormOptions) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut q);
    let max_steps = n.min(opts.max_iter).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_steps.min(256));
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last = (0.0, f64::INFINITY);

    for k in 0..max_steps {
        apply(&q, &mut w)?;
        let a = dot(&q, &w);
        for (wi, qi) in w.iter_mut().zip(&q) {
            *wi -= a * qi;
        }
        if let (Some(prev), Some(&b)) = (basis.last(), betas.last()) {
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= b * pi;
            }
        }
        basis.push(q.clone());
        alphas.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for v in &basis {
                let h = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= h * vi;
                }
            }
        }
        let beta = dot(&w, &w).sqrt();
        let steps = k + 1;
        let check = steps == max_steps || steps % 8 == 0 || beta == 0.0 || steps < 8;
        if check {
            let (theta, last_component) = tridiagonal_top(&alphas, &betas);
            let residual = beta * last_component.abs();
            last = (theta, residual);
            let scale = theta.abs().max(f64::MIN_POSITIVE);
            if residual <= opts.tol * scale || steps == n || beta <= 1e-300 {
                return Ok(theta);
            }
        }
        if steps == max_steps {
            break;
        }
        betas.push(beta);
        q.iter_mut().zip(&w).for_each(|(qi, wi)| *qi = wi / beta);
    }
    Err(Error::NotConverged {
        iterations: max_steps,
        residual: last.1,
    })
}

/// Largest eigenvalue of the Lanczos tridiagonal and the last entry of its eigenvector.
fn tridiagonal_top(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, theta) = eig
        .eigenvalues
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    (theta, eig.eigenvectors[(k - 1, idx)])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let s = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Named `M_R`-weighted block norms around the cut cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockNormReport {
    pub entries: Vec<(String, f64)>,
}

impl BlockNormReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

pub const STAR_LABEL: &str = "(*)";
pub const BACKGROUND_LABEL: &str = "L_n";

/// Norms of the eight stabilized blocks, a background block `L_n` and the
/// extrapolation term `(*) = S_{c−1}M⁻¹η_c𝕀ᵀDᵀM𝕀`.
pub fn block_norm_report(op: &GlobalOperator) -> Result<BlockNormReport> {
    let cut = op
        .mesh()
        .cut()
        .ok_or_else(|| Error::InvalidArgument("block report needs a cut mesh".into()))?;
    let w = WeightedNorm::reference(op.rule());
    let mut entries = Vec::with_capacity(10);
    for b in StabilizedBlock::ALL {
        let block = op.stabilized_block(b).expect("cut mesh has all stabilized blocks");
        entries.push((b.label().to_string(), w.operator_norm(block)?));
    }
    let far = (cut.index + 3) % op.mesh().n_cells();
    let background = op.block(far, far).expect("diagonal block present");
    entries.push((BACKGROUND_LABEL.to_string(), w.operator_norm(background)?));
    let star = op.extrapolation_term().expect("cut mesh has extrapolation term");
    entries.push((STAR_LABEL.to_string(), w.operator_norm(&star)?));
    Ok(BlockNormReport { entries })
}

/// `‖𝕀‖` in the `M_R` norm.
pub fn interpolation_norm(rule: &QuadratureRule, alpha: f64) -> Result<f64> {
    let ops = LagrangeOperators::new(rule);
    let ci = ops.cut_interpolation(alpha)?;
    WeightedNorm::reference(rule).operator_norm(&ci.interp)
}

/// `‖D𝕀‖` in the `M_R` norm.
pub fn derivative_interpolation_norm(rule: &QuadratureRule, alpha: f64) -> Result<f64> {
    let ops = LagrangeOperators::new(rule);
    let ci = ops.cut_interpolation(alpha)?;
    WeightedNorm::reference(rule).operator_norm(&(&ops.d * &ci.interp))
}

/// `‖L̂ᵀB_J‖` in the `M_R` norm.
pub fn outflow_extrapolation_norm(rule: &QuadratureRule, alpha: f64) -> Result<f64> {
    let ops = LagrangeOperators::new(rule);
    let ci = ops.cut_interpolation(alpha)?;
    WeightedNorm::reference(rule).operator_norm(&(&ops.l_hat * ci.b_j.transpose()))
}

/// Energy production of the semidiscretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Semiboundedness {
    /// Largest eigenvalue of `ML + LᵀM`.
    pub max_eigenvalue: f64,
    /// Spectral norm of `ML`.
    pub scale: f64,
}

impl Semiboundedness {
    pub fn relative(&self) -> f64 {
        self.max_eigenvalue / self.scale
    }
}

pub fn semiboundedness(op: &GlobalOperator) -> Result<Semiboundedness> {
    let l = op.dense()?;
    let m = DVector::from_column_slice(op.mass());
    let ml = DMatrix::from_fn(l.nrows(), l.ncols(), |i, j| m[i] * l[(i, j)]);
    let sym = &ml + ml.transpose();
    let max_eigenvalue = sym
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::MIN, f64::max);
    Ok(Semiboundedness {
        max_eigenvalue,
        scale: largest_singular_value(ml),
    })
}
