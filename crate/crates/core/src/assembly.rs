//! Assembly of the complex sesquilinear Helmholtz form, load functionals,
//! localized patch/element forms, and the weighted norms.
//!
//! Convention: the second argument of the form is conjugated,
//! a(u, v) = (A grad u, grad v) - (k^2 V^2 u, v) - (i k beta u, v)_{Gamma_R},
//! and matrices are row-indexed by test functions:
//! M[i][j] = a(phi_j, phi_i), so a(u, v) = v^H M u in coefficients.
//!
//! Quadrature is 3x3 Gauss per cell and 2-point Gauss per boundary edge.
//! Element contributions are accumulated in ascending cell order, so
//! assembled matrices are bit-reproducible.

use num_complex::Complex64;

use crate::coefficients::{CoefficientSet, ComplexField};
use crate::error::Result;
use crate::linalg::{c64, ComplexSparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryFace, BoundaryTag, ElementPatch, Grid, MeshHierarchy, MeshLevel, NodeSet};
use crate::quadrature::{shape, shape_grad, GAUSS_2, GAUSS_3};

pub type DofVector = Vec<c64>;

/// Which norm `fe_norm` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// sqrt(||k V u||^2 + ||A^(1/2) grad u||^2)
    V,
    L2,
    H1Semi,
}

/// 4x4 volume kernel of one cell: e[r][s] = a_cell(phi_s, phi_r).
fn cell_kernel(g: &Grid, cell: usize, coeffs: &CoefficientSet) -> Result<[[c64; 4]; 4]> {
    let (hx, hy) = (g.hx(), g.hy());
    let o = g.cell_origin(cell);
    let k = coeffs.wavenumber;
    let det = hx * hy;
    let mut e = [[c64::ZERO; 4]; 4];
    for &(qx, wx) in GAUSS_3.iter() {
        for &(qy, wy) in GAUSS_3.iter() {
            let (x, y) = (o[0] + qx * hx, o[1] + qy * hy);
            let a = coeffs.diffusion_a.eval_checked(x, y)?;
            let v2 = coeffs.refraction_v2.eval_checked(x, y)?;
            let w = wx * wy * det;
            let phi = shape(qx, qy);
            let gref = shape_grad(qx, qy);
            let mut gphys = [[0.0f64; 2]; 4];
            for i in 0..4 {
                gphys[i] = [gref[i][0] / hx, gref[i][1] / hy];
            }
            for r in 0..4 {
                for s in 0..4 {
                    let stiff = a * (gphys[s][0] * gphys[r][0] + gphys[s][1] * gphys[r][1]);
                    let mass = k * k * v2 * phi[s] * phi[r];
                    e[r][s] += c64::new(w * (stiff - mass), 0.0);
                }
            }
        }
    }
    Ok(e)
}

/// 2x2 Robin edge kernel: e[r][s] = -(i k beta phi_s, phi_r) on the face.
fn face_kernel(face: &BoundaryFace, g: &Grid, coeffs: &CoefficientSet) -> Result<[[c64; 2]; 2]> {
    let k = coeffs.wavenumber;
    let a = g.node_coords(face.nodes[0]);
    let b = g.node_coords(face.nodes[1]);
    let mut e = [[c64::ZERO; 2]; 2];
    for &(t, w) in GAUSS_2.iter() {
        let x = a[0] + t * (b[0] - a[0]);
        let y = a[1] + t * (b[1] - a[1]);
        let beta = coeffs.impedance_beta.eval_checked(x, y)?;
        let phi = [1.0 - t, t];
        let factor = c64::new(0.0, -k * beta) * (w * face.length);
        for r in 0..2 {
            for s in 0..2 {
                e[r][s] += factor * phi[s] * phi[r];
            }
        }
    }
    Ok(e)
}

fn robin_faces_of(hier: &MeshHierarchy, level: MeshLevel) -> Vec<BoundaryFace> {
    hier.boundary_faces(level)
        .into_iter()
        .filter(|f| f.tag == BoundaryTag::Robin)
        .collect()
}

fn accumulate_cells(
    builder: &mut TripletBuilder,
    g: &Grid,
    coeffs: &CoefficientSet,
    cells: &[usize],
    dof_of_node: &dyn Fn(usize) -> Option<usize>,
) -> Result<()> {
    for &cell in cells {
        let e = cell_kernel(g, cell, coeffs)?;
        let nodes = g.cell_nodes(cell);
        for r in 0..4 {
            let Some(i) = dof_of_node(nodes[r]) else { continue };
            for s in 0..4 {
                let Some(j) = dof_of_node(nodes[s]) else { continue };
                builder.push(i, j, e[r][s]);
            }
        }
    }
    Ok(())
}

fn accumulate_faces(
    builder: &mut TripletBuilder,
    g: &Grid,
    coeffs: &CoefficientSet,
    faces: &[BoundaryFace],
    dof_of_node: &dyn Fn(usize) -> Option<usize>,
) -> Result<()> {
    for face in faces {
        let e = face_kernel(face, g, coeffs)?;
        for r in 0..2 {
            let Some(i) = dof_of_node(face.nodes[r]) else { continue };
            for s in 0..2 {
                let Some(j) = dof_of_node(face.nodes[s]) else { continue };
                builder.push(i, j, e[r][s]);
            }
        }
    }
    Ok(())
}

/// Global Galerkin matrix of the form at a level, over the free dofs.
pub fn assemble_form(
    hier: &MeshHierarchy,
    level: MeshLevel,
    coeffs: &CoefficientSet,
) -> Result<ComplexSparseMatrix> {
    let g = hier.grid(level);
    let nodes = hier.free_nodes(level);
    let n = nodes.n_dofs();
    let mut b = TripletBuilder::new(n, n);
    let cells: Vec<usize> = (0..g.n_cells()).collect();
    let dof = |node: usize| nodes.node_to_dof[node];
    accumulate_cells(&mut b, g, coeffs, &cells, &dof)?;
    accumulate_faces(&mut b, g, coeffs, &robin_faces_of(hier, level), &dof)?;
    Ok(b.build())
}

/// Gram matrix of the V inner product over the free dofs:
/// G[i][j] = (k^2 V^2 phi_j, phi_i) + (A grad phi_j, grad phi_i).
pub fn assemble_v_gram(
    hier: &MeshHierarchy,
    level: MeshLevel,
    coeffs: &CoefficientSet,
) -> Result<ComplexSparseMatrix> {
    let g = hier.grid(level);
    let nodes = hier.free_nodes(level);
    let n = nodes.n_dofs();
    let mut b = TripletBuilder::new(n, n);
    let (hx, hy) = (g.hx(), g.hy());
    let det = hx * hy;
    let k = coeffs.wavenumber;
    for cell in 0..g.n_cells() {
        let o = g.cell_origin(cell);
        let cn = g.cell_nodes(cell);
        for &(qx, wx) in GAUSS_3.iter() {
            for &(qy, wy) in GAUSS_3.iter() {
                let (x, y) = (o[0] + qx * hx, o[1] + qy * hy);
                let a = coeffs.diffusion_a.eval_checked(x, y)?;
                let v2 = coeffs.refraction_v2.eval_checked(x, y)?;
                let w = wx * wy * det;
                let phi = shape(qx, qy);
                let gref = shape_grad(qx, qy);
                for r in 0..4 {
                    let Some(i) = nodes.node_to_dof[cn[r]] else { continue };
                    for s in 0..4 {
                        let Some(j) = nodes.node_to_dof[cn[s]] else { continue };
                        let stiff = a
                            * (gref[s][0] * gref[r][0] / (hx * hx)
                                + gref[s][1] * gref[r][1] / (hy * hy));
                        let mass = k * k * v2 * phi[s] * phi[r];
                        b.push(i, j, c64::new(w * (stiff + mass), 0.0));
                    }
                }
            }
        }
    }
    Ok(b.build())
}

/// Load vector b[i] = (f, phi_i) + (g, phi_i)_{Gamma_R} over the free dofs.
pub fn assemble_load(
    hier: &MeshHierarchy,
    level: MeshLevel,
    coeffs: &CoefficientSet,
) -> Result<DofVector> {
    let g = hier.grid(level);
    let nodes = hier.free_nodes(level);
    let mut out = vec![c64::ZERO; nodes.n_dofs()];
    let (hx, hy) = (g.hx(), g.hy());
    let det = hx * hy;
    for cell in 0..g.n_cells() {
        let o = g.cell_origin(cell);
        let cn = g.cell_nodes(cell);
        for &(qx, wx) in GAUSS_3.iter() {
            for &(qy, wy) in GAUSS_3.iter() {
                let (x, y) = (o[0] + qx * hx, o[1] + qy * hy);
                let f = coeffs.volume_forcing.eval(x, y);
                if f == Complex64::ZERO {
                    continue;
                }
                let w = wx * wy * det;
                let phi = shape(qx, qy);
                for r in 0..4 {
                    if let Some(i) = nodes.node_to_dof[cn[r]] {
                        out[i] += f * (w * phi[r]);
                    }
                }
            }
        }
    }
    for face in robin_faces_of(hier, level) {
        let a = g.node_coords(face.nodes[0]);
        let b = g.node_coords(face.nodes[1]);
        for &(t, w) in GAUSS_2.iter() {
            let x = a[0] + t * (b[0] - a[0]);
            let y = a[1] + t * (b[1] - a[1]);
            let gval = coeffs.robin_data.eval(x, y);
            if gval == Complex64::ZERO {
                continue;
            }
            let phi = [1.0 - t, t];
            for r in 0..2 {
                if let Some(i) = nodes.node_to_dof[face.nodes[r]] {
                    out[i] += gval * (w * face.length * phi[r]);
                }
            }
        }
    }
    Ok(out)
}

/// Localized form over a patch: dofs are the fine free nodes admissible in
/// V_h(Omega_T), integration runs over the fine cells of the patch, and the
/// Robin term only over Gamma_R intersected with the physical boundary.
pub struct PatchForm {
    /// Global fine dof id per patch-local index, ascending.
    pub dofs: Vec<usize>,
    /// Patch-local matrix M[i][j] = a_patch(phi_j, phi_i).
    pub matrix: ComplexSparseMatrix,
}

pub fn assemble_patch_form(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    fine_nodes: &NodeSet,
    patch: &ElementPatch,
) -> Result<PatchForm> {
    let g = hier.fine();
    let dofs: Vec<usize> = hier
        .patch_interior_fine_nodes(patch)
        .into_iter()
        .filter_map(|node| fine_nodes.node_to_dof[node])
        .collect();
    let mut local_of_dof = vec![usize::MAX; fine_nodes.n_dofs()];
    for (loc, &d) in dofs.iter().enumerate() {
        local_of_dof[d] = loc;
    }
    let cells = hier.fine_cells_of_patch(patch);
    let faces: Vec<BoundaryFace> = robin_faces_of(hier, MeshLevel::Fine)
        .into_iter()
        .filter(|f| cells.binary_search(&f.cell).is_ok())
        .collect();
    let dof = |node: usize| {
        fine_nodes.node_to_dof[node].and_then(|d| {
            let loc = local_of_dof[d];
            (loc != usize::MAX).then_some(loc)
        })
    };
    let n = dofs.len();
    let mut b = TripletBuilder::new(n, n);
    accumulate_cells(&mut b, g, coeffs, &cells, &dof)?;
    accumulate_faces(&mut b, g, coeffs, &faces, &dof)?;
    Ok(PatchForm { dofs, matrix: b.build() })
}

/// Element form a_T of one coarse element over the global fine free dofs
/// (only entries coupling nodes of T are present).
pub fn assemble_element_form(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    fine_nodes: &NodeSet,
    coarse_cell: usize,
) -> Result<ComplexSparseMatrix> {
    let g = hier.fine();
    let cells = hier.fine_cells_of_coarse(coarse_cell);
    let faces: Vec<BoundaryFace> = robin_faces_of(hier, MeshLevel::Fine)
        .into_iter()
        .filter(|f| cells.binary_search(&f.cell).is_ok())
        .collect();
    let n = fine_nodes.n_dofs();
    let mut b = TripletBuilder::new(n, n);
    let dof = |node: usize| fine_nodes.node_to_dof[node];
    accumulate_cells(&mut b, g, coeffs, &cells, &dof)?;
    accumulate_faces(&mut b, g, coeffs, &faces, &dof)?;
    Ok(b.build())
}

/// Evaluate a weighted norm of the FE function given by `vec` at a level.
pub fn fe_norm(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    nodes: &NodeSet,
    vec: &[c64],
    kind: NormKind,
) -> f64 {
    let all: Vec<usize> = (0..hier.grid(nodes.level).n_cells()).collect();
    fe_norm_on_cells(hier, coeffs, nodes, vec, kind, &all)
}

/// Same as `fe_norm`, restricted to a subset of cells at the vector's level.
pub fn fe_norm_on_cells(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    nodes: &NodeSet,
    vec: &[c64],
    kind: NormKind,
    cells: &[usize],
) -> f64 {
    let g = hier.grid(nodes.level);
    assert_eq!(vec.len(), nodes.n_dofs());
    let (hx, hy) = (g.hx(), g.hy());
    let det = hx * hy;
    let k = coeffs.wavenumber;
    let mut acc = 0.0f64;
    for &cell in cells {
        let o = g.cell_origin(cell);
        let cn = g.cell_nodes(cell);
        let local: [c64; 4] =
            std::array::from_fn(|r| nodes.node_to_dof[cn[r]].map_or(c64::ZERO, |d| vec[d]));
        for &(qx, wx) in GAUSS_3.iter() {
            for &(qy, wy) in GAUSS_3.iter() {
                let w = wx * wy * det;
                let phi = shape(qx, qy);
                let gref = shape_grad(qx, qy);
                let mut u = c64::ZERO;
                let mut ux = c64::ZERO;
                let mut uy = c64::ZERO;
                for r in 0..4 {
                    u += local[r] * phi[r];
                    ux += local[r] * (gref[r][0] / hx);
                    uy += local[r] * (gref[r][1] / hy);
                }
                let (x, y) = (o[0] + qx * hx, o[1] + qy * hy);
                acc += match kind {
                    NormKind::L2 => w * u.norm_sqr(),
                    NormKind::H1Semi => w * (ux.norm_sqr() + uy.norm_sqr()),
                    NormKind::V => {
                        let a = coeffs.diffusion_a.eval(x, y);
                        let v2 = coeffs.refraction_v2.eval(x, y);
                        w * (k * k * v2 * u.norm_sqr() + a * (ux.norm_sqr() + uy.norm_sqr()))
                    }
                };
            }
        }
    }
    acc.sqrt()
}

/// H1 seminorm of the difference of two fine functions restricted to cells.
pub fn h1_semi_diff(
    hier: &MeshHierarchy,
    nodes: &NodeSet,
    a: &[c64],
    b: &[c64],
) -> f64 {
    let diff: Vec<c64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let dummy = crate::coefficients::CoefficientSet {
        diffusion_a: crate::coefficients::ScalarField::constant(1.0),
        refraction_v2: crate::coefficients::ScalarField::constant(1.0),
        impedance_beta: crate::coefficients::ScalarField::constant(1.0),
        volume_forcing: ComplexField::zero(),
        robin_data: ComplexField::zero(),
        wavenumber: 1.0,
    };
    fe_norm(hier, &dummy, nodes, &diff, NormKind::H1Semi)
}

/// sqrt of the integral of beta |u|^2 over the Robin boundary.
pub fn robin_weighted_l2(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    nodes: &NodeSet,
    vec: &[c64],
) -> f64 {
    let g = hier.grid(nodes.level);
    let mut acc = 0.0;
    for face in robin_faces_of(hier, nodes.level) {
        let ua = nodes.node_to_dof[face.nodes[0]].map_or(c64::ZERO, |d| vec[d]);
        let ub = nodes.node_to_dof[face.nodes[1]].map_or(c64::ZERO, |d| vec[d]);
        let a = g.node_coords(face.nodes[0]);
        let b = g.node_coords(face.nodes[1]);
        for &(t, w) in GAUSS_2.iter() {
            let x = a[0] + t * (b[0] - a[0]);
            let y = a[1] + t * (b[1] - a[1]);
            let beta = coeffs.impedance_beta.eval(x, y);
            let u = ua * (1.0 - t) + ub * t;
            acc += w * face.length * beta * u.norm_sqr();
        }
    }
    acc.sqrt()
}

/// L2 norm of a complex field over the domain (fine-level quadrature).
pub fn field_l2(hier: &MeshHierarchy, field: &ComplexField) -> f64 {
    let g = hier.fine();
    let (hx, hy) = (g.hx(), g.hy());
    let det = hx * hy;
    let mut acc = 0.0;
    for cell in 0..g.n_cells() {
        let o = g.cell_origin(cell);
        for &(qx, wx) in GAUSS_3.iter() {
            for &(qy, wy) in GAUSS_3.iter() {
                let v = field.eval(o[0] + qx * hx, o[1] + qy * hy);
                acc += wx * wy * det * v.norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// L2 norm of a complex boundary field over the Robin boundary.
pub fn robin_field_l2(hier: &MeshHierarchy, field: &ComplexField) -> f64 {
    let g = hier.fine();
    let mut acc = 0.0;
    for face in robin_faces_of(hier, MeshLevel::Fine) {
        let a = g.node_coords(face.nodes[0]);
        let b = g.node_coords(face.nodes[1]);
        for &(t, w) in GAUSS_2.iter() {
            let v = field.eval(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]));
            acc += w * face.length * v.norm_sqr();
        }
    }
    acc.sqrt()
}
