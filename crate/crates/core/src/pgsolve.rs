//! The coarse Petrov-Galerkin system with multiscale test functions, the
//! standard FEM solves used as reference, and error diagnostics.
//!
//! Trial functions are plain coarse hats; test functions subtract the
//! element correctors. The coarse matrix is B[i][j] = a(Lambda_j,
//! corrected Lambda_i), evaluated through the global fine form matrix so
//! there is a single quadrature path. Rows are local: entries vanish once
//! the corrected test support and the trial support no longer overlap.

use rayon::prelude::*;

use crate::assembly::{
    assemble_form, assemble_load, assemble_v_gram, fe_norm, NormKind,
};
use crate::coefficients::CoefficientSet;
use crate::corrector::CorrectorBasis;
use crate::error::Result;
use crate::interpolation::{build_prolongation, InterpolationOperator, Prolongation};
use crate::linalg::{c64, dense_solve, norm2, ComplexSparseMatrix};
use crate::mesh::{MeshHierarchy, MeshLevel, NodeSet};

/// Dense coarse Petrov-Galerkin system.
pub struct PGSystem {
    /// B[i][j] = a(Lambda_j, corrected Lambda_i); rows are test dofs.
    pub matrix: faer::Mat<c64>,
    /// r[i] = (f, corrected Lambda_i) + (g, corrected Lambda_i) on Gamma_R.
    pub rhs: Vec<c64>,
    /// Oversampling order of the basis the system was built from.
    pub m: usize,
}

/// Error diagnostics of one coarse solve against the fine reference.
pub struct SolveReport {
    pub error_v: f64,
    pub error_l2: f64,
    /// Computable best-approximation surrogate, the V-norm of (1 - I_H)u_h.
    pub best_approx_v: f64,
    /// error_v / best_approx_v (quasi-optimality).
    pub quasi_opt_ratio: f64,
}

fn coarse_indices(nodes: &NodeSet, grid_ny: usize, dof: usize) -> (usize, usize) {
    let node = nodes.dof_to_node[dof];
    (node / (grid_ny + 1), node % (grid_ny + 1))
}

/// Corrected test function as a sparse fine vector: hat minus corrector.
fn corrected_test(prol: &Prolongation, basis: &CorrectorBasis, i: usize) -> Vec<(usize, c64)> {
    let hat = prol.column(i);
    let lam = &basis.lambda[i];
    let mut out = Vec::with_capacity(hat.len() + lam.len());
    let (mut a, mut b) = (0usize, 0usize);
    while a < hat.len() || b < lam.len() {
        match (hat.get(a), lam.get(b)) {
            (Some(&(da, w)), Some(&(db, v))) if da == db => {
                out.push((da, c64::new(w, 0.0) - v));
                a += 1;
                b += 1;
            }
            (Some(&(da, w)), Some(&(db, _))) if da < db => {
                out.push((da, c64::new(w, 0.0)));
                a += 1;
            }
            (Some(_), Some(&(db, v))) => {
                out.push((db, -v));
                b += 1;
            }
            (Some(&(da, w)), None) => {
                out.push((da, c64::new(w, 0.0)));
                a += 1;
            }
            (None, Some(&(db, v))) => {
                out.push((db, -v));
                b += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Assemble the coarse system from a corrector basis.
///
/// `window` bounds the coarse index distance of computed entries; `None`
/// uses the support-overlap bound 2m + 4 (entries beyond it are exact
/// zeros).
pub fn assemble_pg_system(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    basis: &CorrectorBasis,
    window: Option<usize>,
) -> Result<PGSystem> {
    let fine_form = assemble_form(hier, MeshLevel::Fine, coeffs)?;
    let load = assemble_load(hier, MeshLevel::Fine, coeffs)?;
    let prol = build_prolongation(hier);
    let coarse_nodes = hier.free_nodes(MeshLevel::Coarse);
    let n = coarse_nodes.n_dofs();
    let ny = hier.coarse().ny;
    let window = window.unwrap_or(2 * basis.m + 4);

    let rows: Vec<(Vec<c64>, c64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let test = corrected_test(&prol, basis, i);
            // s = (fine form)^H applied to the test function; the form is
            // complex symmetric so the adjoint is the entrywise conjugate
            let conj_test: Vec<(usize, c64)> =
                test.iter().map(|&(d, v)| (d, v.conj())).collect();
            let mut s = fine_form.matvec_sparse(&conj_test);
            for v in &mut s {
                *v = v.conj();
            }
            let (ix, iy) = coarse_indices(&coarse_nodes, ny, i);
            let mut row = vec![c64::ZERO; n];
            for j in 0..n {
                let (jx, jy) = coarse_indices(&coarse_nodes, ny, j);
                let dist = ix.abs_diff(jx).max(iy.abs_diff(jy));
                if dist > window {
                    continue;
                }
                let mut acc = c64::ZERO;
                for &(d, w) in prol.column(j) {
                    acc += s[d].conj() * w;
                }
                row[j] = acc;
            }
            let mut r = c64::ZERO;
            for &(d, v) in &test {
                r += v.conj() * load[d];
            }
            (row, r)
        })
        .collect();

    let matrix = faer::Mat::from_fn(n, n, |i, j| rows[i].0[j]);
    let rhs = rows.iter().map(|(_, r)| *r).collect();
    Ok(PGSystem { matrix, rhs, m: basis.m })
}

/// Direct dense solve of the coarse system, residual-verified.
pub fn solve_mspgfem(system: &PGSystem) -> Result<Vec<c64>> {
    if norm2(&system.rhs) == 0.0 {
        return Ok(vec![c64::ZERO; system.rhs.len()]);
    }
    dense_solve(&system.matrix, &system.rhs)
}

/// Standard Galerkin solve at a level of the hierarchy.
pub fn solve_standard_fem(
    hier: &MeshHierarchy,
    level: MeshLevel,
    coeffs: &CoefficientSet,
) -> Result<Vec<c64>> {
    let form = assemble_form(hier, level, coeffs)?;
    let load = assemble_load(hier, level, coeffs)?;
    if norm2(&load) == 0.0 {
        return Ok(vec![c64::ZERO; load.len()]);
    }
    form.factorize()?.solve(&load)
}

/// Full multiscale pipeline: correctors, coarse system, coarse solution.
pub struct MsPgSolution {
    pub basis_m: usize,
    pub u_coarse: Vec<c64>,
    pub resolution_warning: Option<String>,
}

pub fn solve_pipeline(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    op: &InterpolationOperator,
    m: usize,
) -> Result<MsPgSolution> {
    let basis = crate::corrector::build_test_basis(hier, coeffs, op, m)?;
    let system = assemble_pg_system(hier, coeffs, &basis, None)?;
    let u_coarse = solve_mspgfem(&system)?;
    Ok(MsPgSolution {
        basis_m: m,
        u_coarse,
        resolution_warning: basis.resolution_warning,
    })
}

/// Errors of a coarse solution against the fine reference.
pub fn diagnostics(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    op: &InterpolationOperator,
    u_coarse: &[c64],
    u_fine: &[c64],
) -> SolveReport {
    let prol = build_prolongation(hier);
    let fine_nodes = hier.free_nodes(MeshLevel::Fine);
    let embedded = prol.apply(u_coarse);
    let diff: Vec<c64> = u_fine.iter().zip(&embedded).map(|(a, b)| a - b).collect();
    let error_v = fe_norm(hier, coeffs, &fine_nodes, &diff, NormKind::V);
    let error_l2 = fe_norm(hier, coeffs, &fine_nodes, &diff, NormKind::L2);
    let coarse_part = prol.apply(&op.apply(u_fine));
    let resid: Vec<c64> = u_fine.iter().zip(&coarse_part).map(|(a, b)| a - b).collect();
    let best_approx_v = fe_norm(hier, coeffs, &fine_nodes, &resid, NormKind::V);
    let quasi_opt_ratio = if best_approx_v > 0.0 { error_v / best_approx_v } else { 0.0 };
    SolveReport { error_v, error_l2, best_approx_v, quasi_opt_ratio }
}

/// True V-norm best approximation of a fine function from the coarse
/// space: solve the normal equations with the V Gram matrix.
pub fn best_approximation_v(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    u_fine: &[c64],
) -> Result<f64> {
    let gram = assemble_v_gram(hier, MeshLevel::Fine, coeffs)?;
    let prol = build_prolongation(hier);
    let fine_nodes = hier.free_nodes(MeshLevel::Fine);
    let n = prol.n_coarse();
    // columns of G P, kept dense one at a time
    let gp: Vec<Vec<c64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let col: Vec<(usize, c64)> = prol
                .column(j)
                .iter()
                .map(|&(d, w)| (d, c64::new(w, 0.0)))
                .collect();
            gram.matvec_sparse(&col)
        })
        .collect();
    let a = faer::Mat::from_fn(n, n, |i, j| {
        let mut acc = c64::ZERO;
        for &(d, w) in prol.column(i) {
            acc += gp[j][d] * w;
        }
        acc
    });
    // rhs[i] = (P e_i)^H G u; the prolongation weights are real
    let gu = gram.matvec(u_fine);
    let rhs: Vec<c64> = (0..n)
        .map(|i| {
            let mut acc = c64::ZERO;
            for &(d, w) in prol.column(i) {
                acc += gu[d] * w;
            }
            acc
        })
        .collect();
    let c = dense_solve(&a, &rhs)?;
    let embedded = prol.apply(&c);
    let diff: Vec<c64> = u_fine.iter().zip(&embedded).map(|(x, y)| x - y).collect();
    Ok(fe_norm(hier, coeffs, &fine_nodes, &diff, NormKind::V))
}

/// Smallest V-normalized singular value of the fine form matrix (discrete
/// inf-sup surrogate). Dense computation, intended for small grids.
pub fn fine_infsup_surrogate(hier: &MeshHierarchy, coeffs: &CoefficientSet) -> Result<f64> {
    let form = assemble_form(hier, MeshLevel::Fine, coeffs)?.to_dense();
    let gram = assemble_v_gram(hier, MeshLevel::Fine, coeffs)?.to_dense();
    crate::linalg::normalized_min_singular_value(&form, &gram)
}

/// The standard coarse Galerkin matrix, for degeneracy checks.
pub fn coarse_galerkin_matrix(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
) -> Result<ComplexSparseMatrix> {
    assemble_form(hier, MeshLevel::Coarse, coeffs)
}
