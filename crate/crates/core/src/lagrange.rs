//! Reference-element matrices of the nodal Lagrange basis.
//!
//! All evaluations use the second (barycentric) form of the Lagrange
//! interpolant, which stays well conditioned for clustered nodes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Barycentric weights `w_j = 1 / prod_{m != j} (x_j - x_m)`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != j)
                .map(|(_, &xm)| xj - xm)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Values of every basis function `l_k` at `t`.
///
/// When `t` hits a node the unit row is returned instead of evaluating the
/// (then singular) barycentric quotient.
pub fn basis_values(nodes: &[f64], bary: &[f64], t: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut out = vec![0.0; n];
    if n == 1 {
        out[0] = 1.0;
        return out;
    }
    if let Some(k) = nodes.iter().position(|&x| t == x) {
        out[k] = 1.0;
        return out;
    }
    let mut denom = 0.0;
    for k in 0..n {
        let q = bary[k] / (t - nodes[k]);
        out[k] = q;
        denom += q;
    }
    for v in &mut out {
        *v /= denom;
    }
    out
}

/// Evaluates the interpolant through `(nodes, values)` at `t`.
pub fn interpolate(nodes: &[f64], bary: &[f64], values: &[f64], t: f64) -> f64 {
    basis_values(nodes, bary, t)
        .iter()
        .zip(values)
        .map(|(l, v)| l * v)
        .sum()
}

/// Derivative matrix `D_{lj} = l_j'(x_l)`.
///
/// Off-diagonal entries come from the barycentric formula; the diagonal is the
/// negative row sum so that constants lie exactly in the null space.
pub fn derivative_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let w = barycentric_weights(nodes);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// Reference-element operators of one node family and degree.
#[derive(Debug, Clone)]
pub struct LagrangeOperators {
    rule: QuadratureRule,
    bary: Vec<f64>,
    /// Derivative matrix `D`.
    pub d: DMatrix<f64>,
    /// Right boundary extrapolation row `R̂` (basis values at `x = 1`).
    pub r_hat: DVector<f64>,
    /// Left boundary extrapolation row `L̂` (basis values at `x = -1`).
    pub l_hat: DVector<f64>,
}

impl LagrangeOperators {
    pub fn new(rule: &QuadratureRule) -> Self {
        let nodes = rule.nodes();
        let bary = barycentric_weights(nodes);
        let d = derivative_matrix(nodes);
        let r_hat = DVector::from_vec(basis_values(nodes, &bary, 1.0));
        let l_hat = DVector::from_vec(basis_values(nodes, &bary, -1.0));
        Self {
            rule: rule.clone(),
            bary,
            d,
            r_hat,
            l_hat,
        }
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn size(&self) -> usize {
        self.rule.len()
    }

    pub fn barycentric(&self) -> &[f64] {
        &self.bary
    }

    /// Diagonal of the reference mass matrix `M_R` (the quadrature weights).
    pub fn mass(&self) -> &[f64] {
        self.rule.weights()
    }

    pub fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(self.rule.weights()))
    }

    pub fn inverse_mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.size(),
            self.rule.weights().iter().map(|w| 1.0 / w),
        ))
    }

    /// `B̂_R = R̂ᵀ R̂`.
    pub fn b_right(&self) -> DMatrix<f64> {
        &self.r_hat * self.r_hat.transpose()
    }

    /// `B̂_L = L̂ᵀ R̂`: couples the inflow neighbour's right trace to the left test trace.
    pub fn b_left(&self) -> DMatrix<f64> {
        &self.l_hat * self.r_hat.transpose()
    }

    /// Basis values at an arbitrary reference coordinate.
    pub fn evaluate_basis(&self, t: f64) -> Vec<f64> {
        basis_values(self.rule.nodes(), &self.bary, t)
    }

    pub fn cut_interpolation(&self, alpha: f64) -> Result<CutInterpolation> {
        CutInterpolation::new(self, alpha)
    }
}

/// Extension of the inflow cell's polynomial onto the reference cut cell `[1, 1 + 2α]`.
#[derive(Debug, Clone)]
pub struct CutInterpolation {
    pub alpha: f64,
    /// Images `ξ_l = 1 + α(1 + x̃_l)` of the rule's nodes.
    pub image_nodes: Vec<f64>,
    /// `𝕀_{lk} = l̃_k(ξ_l)`.
    pub interp: DMatrix<f64>,
    /// `B_J,k = l̃_k(1 + 2α)`, the extrapolation to the cut cell's outflow point.
    pub b_j: DVector<f64>,
}

impl CutInterpolation {
    pub fn new(ops: &LagrangeOperators, alpha: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "cut-cell factor {alpha} outside [0, 1/2]"
            )));
        }
        let nodes = ops.rule().nodes();
        let n = nodes.len();
        let image_nodes: Vec<f64> = nodes.iter().map(|&x| 1.0 + alpha * (1.0 + x)).collect();
        let mut interp = DMatrix::zeros(n, n);
        for (l, &xi) in image_nodes.iter().enumerate() {
            let row = basis_values(nodes, ops.barycentric(), xi);
            for (k, v) in row.into_iter().enumerate() {
                interp[(l, k)] = v;
            }
        }
        let b_j = DVector::from_vec(basis_values(nodes, ops.barycentric(), 1.0 + 2.0 * alpha));
        Ok(Self {
            alpha,
            image_nodes,
            interp,
            b_j,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::NodeKind;
    use approx::assert_abs_diff_eq;

    fn ops(kind: NodeKind, p: usize) -> LagrangeOperators {
        LagrangeOperators::new(&QuadratureRule::new(kind, p).unwrap())
    }

    #[test]
    fn linear_lobatto_derivative() {
        let o = ops(NodeKind::GaussLobattoLegendre, 1);
        let expected = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, -0.5, 0.5]);
        assert_abs_diff_eq!(o.d, expected, epsilon = 1e-15);
    }

    #[test]
    fn lobatto_boundary_rows_are_selectors() {
        for p in 1..=8 {
            let o = ops(NodeKind::GaussLobattoLegendre, p);
            for k in 0..=p {
                assert_eq!(o.r_hat[k], if k == p { 1.0 } else { 0.0 });
                assert_eq!(o.l_hat[k], if k == 0 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn derivative_rows_annihilate_constants() {
        for kind in NodeKind::ALL {
            for p in 1..=12 {
                let o = ops(kind, p);
                for i in 0..=p {
                    let s: f64 = o.d.row(i).iter().sum();
                    assert!(s.abs() < 1e-12);
                }
                assert_abs_diff_eq!(o.r_hat.sum(), 1.0, epsilon = 1e-13);
                assert_abs_diff_eq!(o.l_hat.sum(), 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gauss_derivative_matches_central_differences() {
        let o = ops(NodeKind::GaussLegendre, 3);
        let nodes = o.rule().nodes().to_vec();
        let h = 1e-5;
        for j in 0..4 {
            // product-form basis function, independent of the barycentric path
            let lj = |t: f64| -> f64 {
                (0..4)
                    .filter(|&m| m != j)
                    .map(|m| (t - nodes[m]) / (nodes[j] - nodes[m]))
                    .product()
            };
            for l in 0..4 {
                let fd = (lj(nodes[l] + h) - lj(nodes[l] - h)) / (2.0 * h);
                assert!((o.d[(l, j)] - fd).abs() < 1e-6, "D[{l},{j}]");
            }
        }
    }

    #[test]
    fn degenerate_cut_rows_equal_right_extrapolation() {
        for kind in NodeKind::ALL {
            let o = ops(kind, 4);
            let ci = o.cut_interpolation(0.0).unwrap();
            for l in 0..5 {
                for k in 0..5 {
                    assert_abs_diff_eq!(ci.interp[(l, k)], o.r_hat[k], epsilon = 1e-14);
                }
            }
            for k in 0..5 {
                assert_abs_diff_eq!(ci.b_j[k], o.r_hat[k], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn cut_interpolation_reproduces_quadratic() {
        let o = ops(NodeKind::GaussLegendre, 2);
        let ci = o.cut_interpolation(0.25).unwrap();
        let u = DVector::from_iterator(3, o.rule().nodes().iter().map(|x| x * x));
        let out = &ci.interp * &u;
        for (l, &xi) in ci.image_nodes.iter().enumerate() {
            assert_abs_diff_eq!(out[l], xi * xi, epsilon = 1e-12);
        }
        let ones = DVector::from_element(3, 1.0);
        let c = &ci.interp * ones;
        for v in c.iter() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_alpha() {
        let o = ops(NodeKind::GaussLegendre, 2);
        assert!(o.cut_interpolation(-0.1).is_err());
        assert!(o.cut_interpolation(0.6).is_err());
        assert!(o.cut_interpolation(0.5).is_ok());
    }

    #[test]
    fn exact_node_hit_returns_unit_row() {
        let o = ops(NodeKind::GaussLobattoLegendre, 3);
        let v = o.evaluate_basis(1.0);
        assert_eq!(v, vec![0.0, 0.0, 0.0, 1.0]);
    }
}
