//! Periodic 1D meshes with at most one split background cell.
//!
//! Cells are numbered `1..=N` in the public constructors (matching the usual
//! `E_1, …, E_N` labelling) and indexed from zero everywhere else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// The split background cell: cell `index` has width `αΔx`, cell `index + 1` has `(1-α)Δx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub index: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutMesh {
    x_left: f64,
    x_right: f64,
    n_background: usize,
    dx: f64,
    cut: Option<Cut>,
    widths: Vec<f64>,
    vertices: Vec<f64>,
}

impl CutMesh {
    /// Mesh of `n_background` background cells where background cell `cut_cell`
    /// (1-based) is split into a small cell of width `αΔx` and its right
    /// neighbour of width `(1-α)Δx`. The result has `n_background + 1` cells.
    pub fn new(domain: (f64, f64), n_background: usize, cut_cell: usize, alpha: f64) -> Result<Self> {
        let (x_left, x_right) = check_domain(domain)?;
        if n_background < 4 {
            return Err(Error::InvalidMesh(format!(
                "need at least 4 background cells, got {n_background}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::InvalidMesh(format!(
                "cut-cell factor {alpha} outside (0, 1/2]"
            )));
        }
        let n_cells = n_background + 1;
        if cut_cell < 2 || cut_cell + 2 > n_cells {
            return Err(Error::InvalidMesh(format!(
                "cut cell {cut_cell} must satisfy 2 <= c <= N-2 = {}",
                n_cells.saturating_sub(2)
            )));
        }
        let dx = (x_right - x_left) / n_background as f64;
        let index = cut_cell - 1;
        let mut widths = vec![dx; n_cells];
        widths[index] = alpha * dx;
        widths[index + 1] = (1.0 - alpha) * dx;
        Ok(Self::from_widths(
            x_left,
            x_right,
            n_background,
            dx,
            Some(Cut { index, alpha }),
            widths,
        ))
    }

    /// Equidistant mesh without a cut.
    pub fn uniform(domain: (f64, f64), n_cells: usize) -> Result<Self> {
        let (x_left, x_right) = check_domain(domain)?;
        if n_cells < 2 {
            return Err(Error::InvalidMesh("need at least 2 cells".into()));
        }
        let dx = (x_right - x_left) / n_cells as f64;
        Ok(Self::from_widths(x_left, x_right, n_cells, dx, None, vec![dx; n_cells]))
    }

    fn from_widths(
        x_left: f64,
        x_right: f64,
        n_background: usize,
        dx: f64,
        cut: Option<Cut>,
        widths: Vec<f64>,
    ) -> Self {
        let mut vertices = Vec::with_capacity(widths.len() + 1);
        vertices.push(x_left);
        let mut x = x_left;
        for w in &widths {
            x += w;
            vertices.push(x);
        }
        // pin the last vertex; prefix sums drift by a few ulps
        *vertices.last_mut().unwrap() = x_right;
        Self {
            x_left,
            x_right,
            n_background,
            dx,
            cut,
            widths,
            vertices,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x_left, self.x_right)
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn n_background(&self) -> usize {
        self.n_background
    }

    pub fn n_cells(&self) -> usize {
        self.widths.len()
    }

    /// Background cell size `Δx`.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn cut(&self) -> Option<Cut> {
        self.cut
    }

    pub fn alpha(&self) -> Option<f64> {
        self.cut.map(|c| c.alpha)
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn vertices(&self) -> &[f64] {
        &self.vertices
    }

    /// Periodic inflow neighbour (for `a > 0`).
    pub fn left_neighbor(&self, i: usize) -> usize {
        (i + self.n_cells() - 1) % self.n_cells()
    }

    /// Physical coordinates of every collocation node, cell-major.
    pub fn mapped_nodes(&self, rule: &QuadratureRule) -> Vec<f64> {
        let mut out = Vec::with_capacity(rule.len() * self.n_cells());
        for i in 0..self.n_cells() {
            let (a, b) = (self.vertices[i], self.vertices[i + 1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * self.widths[i];
            out.extend(rule.nodes().iter().map(|&g| mid + g * half));
        }
        out
    }

    /// Global diagonal mass matrix `ω_j Δx_i / 2`, cell-major.
    pub fn mass_diagonal(&self, rule: &QuadratureRule) -> Vec<f64> {
        let mut out = Vec::with_capacity(rule.len() * self.n_cells());
        for &w in &self.widths {
            out.extend(rule.weights().iter().map(|&om| om * w / 2.0));
        }
        out
    }

    /// Nodal interpolation of `f`.
    pub fn project<F: Fn(f64) -> f64>(&self, rule: &QuadratureRule, f: F) -> StateVector {
        StateVector::from(self.mapped_nodes(rule).into_iter().map(f).collect::<Vec<_>>())
    }
}

fn check_domain((a, b): (f64, f64)) -> Result<(f64, f64)> {
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::InvalidMesh(format!("invalid domain ({a}, {b})")));
    }
    Ok((a, b))
}

/// Nodal values `u = (u_1, …, u_N)`, each `u_i` holding `p+1` values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Values of cell `i` for `n_local = p + 1` nodes per cell.
    pub fn cell(&self, i: usize, n_local: usize) -> &[f64] {
        &self.0[i * n_local..(i + 1) * n_local]
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}
