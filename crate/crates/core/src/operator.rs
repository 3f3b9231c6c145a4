//! Assembly of the semidiscrete right-hand side `∂_t u = L u`.
//!
//! Every cell row carries the background upwind DG blocks
//! `L_i = S_i M⁻¹(DᵀM − B̂_R)` and `L_iL = S_i M⁻¹ B̂_L` with `S_i = 2a/Δx_i`.
//! Around the small cut cell `c` the domain-of-dependence penalty rewrites rows
//! `c−1`, `c` and `c+1`; see [`StabilizedBlock`] for the eight affected blocks.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrange::{CutInterpolation, LagrangeOperators};
use crate::mesh::CutMesh;
use crate::quadrature::QuadratureRule;

/// Dense materialisation limit.
pub const DENSE_LIMIT: usize = 20_000;

/// Cut cells below this factor are rejected by [`GlobalOperator::assemble`].
pub const MIN_ASSEMBLY_ALPHA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    lambda_c: f64,
    enabled: bool,
}

impl PenaltyConfig {
    pub fn new(lambda_c: f64) -> Result<Self> {
        if !(lambda_c > 0.0 && lambda_c.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda_c must be positive, got {lambda_c}")));
        }
        Ok(Self {
            lambda_c,
            enabled: true,
        })
    }

    /// Stabilization switched off (`η_c = 0`), i.e. the plain upwind DG scheme.
    pub fn disabled() -> Self {
        Self {
            lambda_c: 1.0,
            enabled: false,
        }
    }

    pub fn lambda_c(&self) -> f64 {
        self.lambda_c
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    /// Penalty strength `η_c = 1 − min(1, α/λ_c)`, or zero when disabled.
    pub fn eta(&self, alpha: f64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        1.0 - (alpha / self.lambda_c).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvectionConfig {
    speed: f64,
}

impl AdvectionConfig {
    pub fn new(speed: f64) -> Result<Self> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::InvalidArgument(format!("advection speed must be positive, got {speed}")));
        }
        Ok(Self { speed })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }
}

impl Default for AdvectionConfig {
    fn default() -> Self {
        Self { speed: 1.0 }
    }
}

/// The blocks of `L` touched by the stabilization of cut cell `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StabilizedBlock {
    /// `L_{c−1}`
    InflowDiagonal,
    /// `L_{(c−1)R}`
    InflowRight,
    /// `L_{(c−1)L}`
    InflowLeft,
    /// `L_{cL}`
    CutLeft,
    /// `L_c`
    CutDiagonal,
    /// `L_{(c+1)LL}`
    OutflowLeftLeft,
    /// `L_{(c+1)L}`
    OutflowLeft,
    /// `L_{c+1}`
    OutflowDiagonal,
}

impl StabilizedBlock {
    pub const ALL: [StabilizedBlock; 8] = [
        StabilizedBlock::InflowDiagonal,
        StabilizedBlock::InflowRight,
        StabilizedBlock::InflowLeft,
        StabilizedBlock::CutLeft,
        StabilizedBlock::CutDiagonal,
        StabilizedBlock::OutflowLeftLeft,
        StabilizedBlock::OutflowLeft,
        StabilizedBlock::OutflowDiagonal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StabilizedBlock::InflowDiagonal => "L_{c-1}",
            StabilizedBlock::InflowRight => "L_{(c-1)R}",
            StabilizedBlock::InflowLeft => "L_{(c-1)L}",
            StabilizedBlock::CutLeft => "L_{cL}",
            StabilizedBlock::CutDiagonal => "L_c",
            StabilizedBlock::OutflowLeftLeft => "L_{(c+1)LL}",
            StabilizedBlock::OutflowLeft => "L_{(c+1)L}",
            StabilizedBlock::OutflowDiagonal => "L_{c+1}",
        }
    }

    /// (row, column) offsets relative to the cut cell.
    fn offsets(self) -> (isize, isize) {
        match self {
            StabilizedBlock::InflowDiagonal => (-1, -1),
            StabilizedBlock::InflowRight => (-1, 0),
            StabilizedBlock::InflowLeft => (-1, -2),
            StabilizedBlock::CutLeft => (0, -1),
            StabilizedBlock::CutDiagonal => (0, 0),
            StabilizedBlock::OutflowLeftLeft => (1, -1),
            StabilizedBlock::OutflowLeft => (1, 0),
            StabilizedBlock::OutflowDiagonal => (1, 1),
        }
    }
}

impl fmt::Display for StabilizedBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Block-sparse semidiscrete operator.
#[derive(Debug, Clone)]
pub struct GlobalOperator {
    mesh: CutMesh,
    ops: LagrangeOperators,
    advection: AdvectionConfig,
    penalty: PenaltyConfig,
    eta: f64,
    /// Per block row: `(column cell, block)` sorted by column.
    rows: Vec<Vec<(usize, DMatrix<f64>)>>,
    mass: Vec<f64>,
    cut_interp: Option<CutInterpolation>,
}

impl GlobalOperator {
    pub fn assemble(
        mesh: &CutMesh,
        rule: &QuadratureRule,
        advection: AdvectionConfig,
        penalty: PenaltyConfig,
    ) -> Result<Self> {
        Self::assemble_with(mesh, &LagrangeOperators::new(rule), advection, penalty)
    }

    /// Same as [`assemble`](Self::assemble) but reuses precomputed reference operators.
    pub fn assemble_with(
        mesh: &CutMesh,
        ops: &LagrangeOperators,
        advection: AdvectionConfig,
        penalty: PenaltyConfig,
    ) -> Result<Self> {
        let n_cells = mesh.n_cells();
        let a = advection.speed();
        let mass_r = ops.mass_matrix();
        let inv_mass = ops.inverse_mass_matrix();
        let dt_m = ops.d.transpose() * &mass_r;
        let b_r = ops.b_right();
        let b_l = ops.b_left();

        let volume_flux = &inv_mass * (&dt_m - &b_r);
        let inflow = &inv_mass * &b_l;
        let scale = |i: usize| 2.0 * a / mesh.widths()[i];

        let mut rows: Vec<Vec<(usize, DMatrix<f64>)>> = (0..n_cells)
            .map(|i| {
                let s = scale(i);
                let mut row = vec![
                    (i, &volume_flux * s),
                    (mesh.left_neighbor(i), &inflow * s),
                ];
                row.sort_by_key(|(j, _)| *j);
                row
            })
            .collect();

        let mut eta = 0.0;
        let mut cut_interp = None;
        if let Some(cut) = mesh.cut() {
            if cut.alpha < MIN_ASSEMBLY_ALPHA {
                return Err(Error::InvalidArgument(format!(
                    "cut-cell factor {} below assembly threshold {MIN_ASSEMBLY_ALPHA:e}",
                    cut.alpha
                )));
            }
            let c = cut.index;
            eta = penalty.eta(cut.alpha);
            let ci = ops.cut_interpolation(cut.alpha)?;
            let interp = &ci.interp;
            let b_j1 = &ops.r_hat * ci.b_j.transpose();
            let b_j2 = &ops.l_hat * ci.b_j.transpose();
            let it_dt_m = interp.transpose() * &dt_m;

            let (s_in, s_cut, s_out) = (scale(c - 1), scale(c), scale(c + 1));
            let blocks = [
                (
                    c - 1,
                    c - 1,
                    &inv_mass * (&dt_m - &b_r - &it_dt_m * interp * eta) * s_in,
                ),
                (c - 1, c, &inv_mass * &it_dt_m * (eta * s_in)),
                (
                    c,
                    c - 1,
                    &inv_mass * ((&dt_m * interp) * eta + &b_l - &b_j1 * eta) * s_cut,
                ),
                (
                    c,
                    c,
                    &inv_mass * (&dt_m * (1.0 - eta) - &b_r * (1.0 - eta)) * s_cut,
                ),
                (c + 1, c - 1, &inv_mass * &b_j2 * (eta * s_out)),
                (c + 1, c, &inv_mass * &b_l * ((1.0 - eta) * s_out)),
            ];
            for (i, j, block) in blocks {
                let row = &mut rows[i];
                match row.iter_mut().find(|(col, _)| *col == j) {
                    Some(entry) => entry.1 = block,
                    None => {
                        row.push((j, block));
                        row.sort_by_key(|(col, _)| *col);
                    }
                }
            }
            cut_interp = Some(ci);
        }

        Ok(Self {
            mesh: mesh.clone(),
            ops: ops.clone(),
            advection,
            penalty,
            eta,
            rows,
            mass: mesh.mass_diagonal(ops.rule()),
            cut_interp,
        })
    }

    pub fn mesh(&self) -> &CutMesh {
        &self.mesh
    }

    pub fn rule(&self) -> &QuadratureRule {
        self.ops.rule()
    }

    pub fn reference(&self) -> &LagrangeOperators {
        &self.ops
    }

    pub fn advection(&self) -> AdvectionConfig {
        self.advection
    }

    pub fn penalty(&self) -> PenaltyConfig {
        self.penalty
    }

    /// Penalty strength used in the assembly (zero without a cut).
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn cut_interpolation(&self) -> Option<&CutInterpolation> {
        self.cut_interp.as_ref()
    }

    /// Nodes per cell.
    pub fn local_size(&self) -> usize {
        self.ops.size()
    }

    pub fn n_dofs(&self) -> usize {
        self.local_size() * self.mesh.n_cells()
    }

    /// Global diagonal mass matrix.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn block(&self, row: usize, col: usize) -> Option<&DMatrix<f64>> {
        self.rows
            .get(row)?
            .iter()
            .find(|(j, _)| *j == col)
            .map(|(_, b)| b)
    }

    /// All stored `(row, column)` block positions in row-major order.
    pub fn block_positions(&self) -> Vec<(usize, usize)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |(j, _)| (i, *j)))
            .collect()
    }

    /// One of the eight blocks around the cut cell; `None` on an uncut mesh.
    pub fn stabilized_block(&self, which: StabilizedBlock) -> Option<&DMatrix<f64>> {
        let c = self.mesh.cut()?.index as isize;
        let (dr, dc) = which.offsets();
        let n = self.mesh.n_cells() as isize;
        let row = (c + dr).rem_euclid(n) as usize;
        let col = (c + dc).rem_euclid(n) as usize;
        self.block(row, col)
    }

    /// The extrapolation part `S_{c−1} M⁻¹ η_c 𝕀ᵀDᵀM𝕀` of `L_{c−1}`.
    pub fn extrapolation_term(&self) -> Option<DMatrix<f64>> {
        let cut = self.mesh.cut()?;
        let ci = self.cut_interp.as_ref()?;
        let s = 2.0 * self.advection.speed() / self.mesh.widths()[cut.index - 1];
        let dt_m = self.ops.d.transpose() * self.ops.mass_matrix();
        Some(
            self.ops.inverse_mass_matrix() * ci.interp.transpose() * dt_m * &ci.interp * (s * self.eta),
        )
    }

    /// `out = L u`.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n_dofs();
        check_len(n, u.len())?;
        check_len(n, out.len())?;
        let m = self.local_size();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let target = &mut out[i * m..(i + 1) * m];
            for (j, block) in row {
                let src = &u[j * m..(j + 1) * m];
                let data = block.as_slice();
                for (k, &uk) in src.iter().enumerate() {
                    let col = &data[k * m..(k + 1) * m];
                    for (t, &b) in target.iter_mut().zip(col) {
                        *t += b * uk;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_dofs()];
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    /// `out = Lᵀ u`.
    pub fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n_dofs();
        check_len(n, u.len())?;
        check_len(n, out.len())?;
        let m = self.local_size();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let src = &u[i * m..(i + 1) * m];
            for (j, block) in row {
                let data = block.as_slice();
                let target = &mut out[j * m..(j + 1) * m];
                for (k, t) in target.iter_mut().enumerate() {
                    let col = &data[k * m..(k + 1) * m];
                    *t += col.iter().zip(src).map(|(b, s)| b * s).sum::<f64>();
                }
            }
        }
        Ok(())
    }

    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n = self.n_dofs();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                size: n,
                limit: DENSE_LIMIT,
            });
        }
        let m = self.local_size();
        let mut out = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, block) in row {
                out.view_mut((i * m, j * m), (m, m)).copy_from(block);
            }
        }
        Ok(out)
    }

    /// Writes the nonzero entries as `row col value` lines (zero-based indices).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let m = self.local_size();
        let n = self.n_dofs();
        let nnz: usize = self
            .rows
            .iter()
            .flatten()
            .map(|(_, b)| b.iter().filter(|v| **v != 0.0).count())
            .sum();
        writeln!(w, "# {n} {n} {nnz}")?;
        for (i, row) in self.rows.iter().enumerate() {
            for l in 0..m {
                for (j, block) in row {
                    for k in 0..m {
                        let v = block[(l, k)];
                        if v != 0.0 {
                            writeln!(w, "{} {} {:.17e}", i * m + l, j * m + k, v)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::NodeKind;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eta_values() {
        let p = PenaltyConfig::new(1.0).unwrap();
        assert_abs_diff_eq!(p.eta(0.3), 0.7, epsilon = 1e-15);
        assert_eq!(p.eta(0.0), 1.0);
        assert_eq!(PenaltyConfig::new(0.2).unwrap().eta(0.3), 0.0);
        assert_eq!(PenaltyConfig::disabled().eta(0.01), 0.0);
        assert!(PenaltyConfig::new(0.0).is_err());
        assert!(AdvectionConfig::new(-1.0).is_err());
    }

    #[test]
    fn first_order_cut_row_is_redistributed_upwind() {
        let rule = QuadratureRule::new(NodeKind::GaussLegendre, 0).unwrap();
        let alpha = 0.3;
        let dx = 1.0 / 20.0;
        let mesh = CutMesh::new((0.0, 1.0), 20, 10, alpha).unwrap();
        let op = GlobalOperator::assemble(
            &mesh,
            &rule,
            AdvectionConfig::default(),
            PenaltyConfig::new(1.0).unwrap(),
        )
        .unwrap();
        let eta = 1.0 - alpha;
        let redistributed = (1.0 - eta) / (alpha * dx);
        let cut_left = op.stabilized_block(StabilizedBlock::CutLeft).unwrap()[(0, 0)];
        let cut_diag = op.stabilized_block(StabilizedBlock::CutDiagonal).unwrap()[(0, 0)];
        assert_abs_diff_eq!(cut_left, redistributed, epsilon = 1e-10);
        assert_abs_diff_eq!(cut_diag, -redistributed, epsilon = 1e-10);
        let ll = op.stabilized_block(StabilizedBlock::OutflowLeftLeft).unwrap()[(0, 0)];
        assert_abs_diff_eq!(ll, eta / ((1.0 - alpha) * dx), epsilon = 1e-10);
        let ir = op.stabilized_block(StabilizedBlock::InflowRight).unwrap()[(0, 0)];
        assert_eq!(ir, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let rule = QuadratureRule::new(NodeKind::GaussLegendre, 1).unwrap();
        let mesh = CutMesh::uniform((0.0, 1.0), 4).unwrap();
        let op = GlobalOperator::assemble(&mesh, &rule, AdvectionConfig::default(), PenaltyConfig::disabled())
            .unwrap();
        assert_eq!(
            op.apply(&[1.0; 3]),
            Err(Error::DimensionMismatch { expected: 8, found: 3 })
        );
    }

    #[test]
    fn tiny_alpha_rejected_at_assembly() {
        let rule = QuadratureRule::new(NodeKind::GaussLegendre, 1).unwrap();
        let mesh = CutMesh::new((0.0, 1.0), 10, 5, 1e-13).unwrap();
        assert!(GlobalOperator::assemble(
            &mesh,
            &rule,
            AdvectionConfig::default(),
            PenaltyConfig::new(1.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn triplet_dump_lists_nonzeros() {
        let rule = QuadratureRule::new(NodeKind::GaussLegendre, 0).unwrap();
        let mesh = CutMesh::uniform((0.0, 1.0), 4).unwrap();
        let op = GlobalOperator::assemble(&mesh, &rule, AdvectionConfig::default(), PenaltyConfig::disabled())
            .unwrap();
        let mut buf = Vec::new();
        op.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# 4 4 8");
        assert_eq!(lines.len(), 9);
        assert!(lines[1].starts_with("0 0 "));
    }
}
