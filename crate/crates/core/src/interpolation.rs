//! Quasi-interpolation from the fine FE space onto the coarse space, and the
//! prolongation going the other way.
//!
//! The interpolation is the composition of an elementwise L2 projection onto
//! discontinuous Q1 per coarse cell with vertex averaging over adjacent
//! cells. It is projective and local: the value at a coarse node depends
//! only on fine dofs inside the cells touching that node. Dirichlet vertices
//! are forced to zero by keeping only rows for free coarse nodes.

use rayon::prelude::*;

use crate::linalg::c64;
use crate::mesh::{ElementPatch, Grid, MeshHierarchy, MeshLevel, NodeSet};
use crate::quadrature::{shape, GAUSS_2};

/// Sparse real map from fine free dofs to coarse free dofs.
pub struct InterpolationOperator {
    /// One row per coarse free dof: (fine dof, weight), sorted by fine dof.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub n_fine: usize,
}

/// Coarse-to-fine embedding: fine nodal values of a coarse FE function.
pub struct Prolongation {
    /// One column per coarse free dof: (fine dof, weight), sorted.
    pub cols: Vec<Vec<(usize, f64)>>,
    pub n_fine: usize,
}

/// Constraints whose kernel within a patch is the localized fine-scale space.
pub struct ConstraintSet {
    /// One row per retained coarse dof: (coarse dof, entries over
    /// patch-local indices).
    pub rows: Vec<(usize, Vec<(usize, f64)>)>,
}

/// Arithmetic mean of per-cell vertex values at every node of the grid.
///
/// `cellwise[c][r]` is the value the function on cell `c` takes at its
/// local corner `r`. Exposed so the averaging step can be checked directly.
pub fn vertex_average(grid: &Grid, cellwise: &[[f64; 4]]) -> Vec<f64> {
    let mut sums = vec![0.0f64; grid.n_nodes()];
    let mut counts = vec![0u32; grid.n_nodes()];
    for cell in 0..grid.n_cells() {
        let nodes = grid.cell_nodes(cell);
        for r in 0..4 {
            sums[nodes[r]] += cellwise[cell][r];
            counts[nodes[r]] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect()
}

fn adjacent_cell_count(grid: &Grid, ix: usize, iy: usize) -> usize {
    let cx = if ix == 0 || ix == grid.nx { 1 } else { 2 };
    let cy = if iy == 0 || iy == grid.ny { 1 } else { 2 };
    cx * cy
}

/// Invert the 4x4 Q1 mass matrix on a coarse cell of size hx x hy.
fn local_mass_inverse(hx: f64, hy: f64) -> [[f64; 4]; 4] {
    // tensor product of the inverse 1D Q1 mass matrix [[4, -2], [-2, 4]]
    // (per unit length), local order lexicographic: index = 2*ix + iy
    let inv1 = [[4.0, -2.0], [-2.0, 4.0]];
    let mut out = [[0.0; 4]; 4];
    for rx in 0..2 {
        for ry in 0..2 {
            for sx in 0..2 {
                for sy in 0..2 {
                    out[2 * rx + ry][2 * sx + sy] = inv1[rx][sx] * inv1[ry][sy] / (hx * hy);
                }
            }
        }
    }
    out
}

/// Build the quasi-interpolation operator for a hierarchy.
pub fn build_interpolation(hier: &MeshHierarchy) -> InterpolationOperator {
    let coarse = hier.coarse();
    let fine = hier.fine();
    let coarse_nodes = hier.free_nodes(MeshLevel::Coarse);
    let fine_nodes = hier.free_nodes(MeshLevel::Fine);
    let minv = local_mass_inverse(coarse.hx(), coarse.hy());

    // per coarse cell: the four rows of (M_loc^-1 B), columns indexed by
    // global fine dofs
    let blocks: Vec<[Vec<(usize, f64)>; 4]> = (0..coarse.n_cells())
        .into_par_iter()
        .map(|t| {
            let o = coarse.cell_origin(t);
            let (hx, hy) = (coarse.hx(), coarse.hy());
            let fine_cells = hier.fine_cells_of_coarse(t);
            // moments b[r][fine node] = integral of phi_node * Lambda_r
            let mut moments: Vec<std::collections::HashMap<usize, f64>> =
                vec![Default::default(); 4];
            let det = fine.hx() * fine.hy();
            for &fc in &fine_cells {
                let fo = fine.cell_origin(fc);
                let fnodes = fine.cell_nodes(fc);
                for &(qx, wx) in GAUSS_2.iter() {
                    for &(qy, wy) in GAUSS_2.iter() {
                        let x = fo[0] + qx * fine.hx();
                        let y = fo[1] + qy * fine.hy();
                        let lam = shape((x - o[0]) / hx, (y - o[1]) / hy);
                        let phi = shape(qx, qy);
                        let w = wx * wy * det;
                        for r in 0..4 {
                            for s in 0..4 {
                                *moments[r].entry(fnodes[s]).or_insert(0.0) +=
                                    w * lam[r] * phi[s];
                            }
                        }
                    }
                }
            }
            std::array::from_fn(|r| {
                let mut acc: std::collections::HashMap<usize, f64> = Default::default();
                for s in 0..4 {
                    for (&node, &v) in &moments[s] {
                        let Some(d) = fine_nodes.node_to_dof[node] else { continue };
                        *acc.entry(d).or_insert(0.0) += minv[r][s] * v;
                    }
                }
                let mut row: Vec<(usize, f64)> = acc.into_iter().collect();
                row.sort_unstable_by_key(|&(d, _)| d);
                row
            })
        })
        .collect();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); coarse_nodes.n_dofs()];
    for t in 0..coarse.n_cells() {
        let cn = coarse.cell_nodes(t);
        for r in 0..4 {
            let Some(j) = coarse_nodes.node_to_dof[cn[r]] else { continue };
            let (ix, iy) = (cn[r] / (coarse.ny + 1), cn[r] % (coarse.ny + 1));
            let weight = 1.0 / adjacent_cell_count(coarse, ix, iy) as f64;
            for &(d, v) in &blocks[t][r] {
                rows[j].push((d, weight * v));
            }
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|&(d, _)| d);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for &(d, v) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == d => last.1 += v,
                _ => merged.push((d, v)),
            }
        }
        // drop cancellation noise so sparsity patterns stay exact
        let peak = merged.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
        merged.retain(|&(_, v)| v.abs() > 1e-13 * peak);
        *row = merged;
    }
    InterpolationOperator { rows, n_fine: fine_nodes.n_dofs() }
}

impl InterpolationOperator {
    pub fn n_coarse(&self) -> usize {
        self.rows.len()
    }

    /// Apply to a fine dof vector, producing coarse dof values.
    pub fn apply(&self, u: &[c64]) -> Vec<c64> {
        assert_eq!(u.len(), self.n_fine);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(d, w)| u[d] * w).sum())
            .collect()
    }

    /// Restrict to the fine dofs of a patch and prune empty rows.
    ///
    /// `patch_dofs` lists the admissible global fine dofs of the patch in
    /// ascending order (as produced by the patch assembly); constraint
    /// columns are patch-local positions in that list.
    pub fn constraint_set(&self, patch_dofs: &[usize]) -> ConstraintSet {
        let mut rows = Vec::new();
        for (j, row) in self.rows.iter().enumerate() {
            let mut local = Vec::new();
            for &(d, w) in row {
                if let Ok(loc) = patch_dofs.binary_search(&d) {
                    local.push((loc, w));
                }
            }
            if !local.is_empty() {
                rows.push((j, local));
            }
        }
        ConstraintSet { rows }
    }
}

impl ConstraintSet {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Build the coarse-to-fine prolongation (bilinear interpolation).
pub fn build_prolongation(hier: &MeshHierarchy) -> Prolongation {
    let coarse = hier.coarse();
    let fine = hier.fine();
    let coarse_nodes = hier.free_nodes(MeshLevel::Coarse);
    let fine_nodes = hier.free_nodes(MeshLevel::Fine);
    let r = hier.refinement_ratio();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); coarse_nodes.n_dofs()];
    for (fd, &node) in fine_nodes.dof_to_node.iter().enumerate() {
        let (ix, iy) = (node / (fine.ny + 1), node % (fine.ny + 1));
        let cx = (ix / r).min(coarse.nx - 1);
        let cy = (iy / r).min(coarse.ny - 1);
        let xi = (ix - cx * r) as f64 / r as f64;
        let eta = (iy - cy * r) as f64 / r as f64;
        let lam = shape(xi, eta);
        let cn = coarse.cell_nodes(coarse.cell_id(cx, cy));
        for s in 0..4 {
            if lam[s] == 0.0 {
                continue;
            }
            if let Some(cd) = coarse_nodes.node_to_dof[cn[s]] {
                cols[cd].push((fd, lam[s]));
            }
        }
    }
    for col in &mut cols {
        col.sort_unstable_by_key(|&(d, _)| d);
    }
    Prolongation { cols, n_fine: fine_nodes.n_dofs() }
}

impl Prolongation {
    pub fn n_coarse(&self) -> usize {
        self.cols.len()
    }

    /// Embed a coarse dof vector into the fine space.
    pub fn apply(&self, c: &[c64]) -> Vec<c64> {
        assert_eq!(c.len(), self.cols.len());
        let mut out = vec![c64::ZERO; self.n_fine];
        for (j, col) in self.cols.iter().enumerate() {
            if c[j] == c64::ZERO {
                continue;
            }
            for &(d, w) in col {
                out[d] += c[j] * w;
            }
        }
        out
    }

    /// Sparse fine representation of one coarse basis function.
    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }
}

/// Convenience: keep only constraints meeting a patch; free-function form.
pub fn constraint_set(
    op: &InterpolationOperator,
    hier: &MeshHierarchy,
    fine_nodes: &NodeSet,
    patch: &ElementPatch,
) -> (Vec<usize>, ConstraintSet) {
    let dofs: Vec<usize> = hier
        .patch_interior_fine_nodes(patch)
        .into_iter()
        .filter_map(|node| fine_nodes.node_to_dof[node])
        .collect();
    let cs = op.constraint_set(&dofs);
    (dofs, cs)
}
