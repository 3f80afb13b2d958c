//! Truncated element corrector problems, the multiscale test basis built
//! from them, idealized (full-domain) correctors, and decay measurement.
//!
//! For a coarse element T and a coarse node z of T, the corrector solves
//! a_patch(w, lambda) = a_T(w, Lambda_z) for all w in the localized
//! fine-scale space of the patch. The unknown sits in the conjugated slot
//! of the form, so the linear system is the conjugate transpose of the
//! assembled patch matrix; constraints are enforced with Lagrange
//! multipliers, one sparse factorization per element, reused for the up to
//! four nodes sharing it.

use rayon::prelude::*;

use crate::assembly::{assemble_element_form, assemble_patch_form};
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::interpolation::{build_prolongation, InterpolationOperator, Prolongation};
use crate::linalg::{c64, ComplexSparseMatrix, TripletBuilder};
use crate::mesh::{MeshHierarchy, MeshLevel, NodeSet};

/// Multiscale test-space correctors, one per coarse free dof.
pub struct CorrectorBasis {
    /// Oversampling order used for every element patch.
    pub m: usize,
    /// Per coarse free dof: sparse fine vector, sorted by fine dof.
    pub lambda: Vec<Vec<(usize, c64)>>,
    /// Number of element corrector solves performed.
    pub n_solves: usize,
    /// Set when the oversampling order is below the resolution guideline.
    pub resolution_warning: Option<String>,
}

/// Distance of a truncated corrector from its full-domain counterpart.
pub struct DecayProfile {
    /// Coarse free dof the profile belongs to.
    pub node: usize,
    /// (m, H1-seminorm deviation from the ideal corrector).
    pub deviations: Vec<(usize, f64)>,
    /// Geometric-mean ratio of successive deviations.
    pub rate: f64,
}

/// Factorized saddle-point system of one element patch.
struct PatchSystem {
    /// Global fine dofs of the patch, ascending.
    dofs: Vec<usize>,
    lu: crate::linalg::SparseLu,
    n: usize,
    n_constraints: usize,
}

fn build_patch_system(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    op: &InterpolationOperator,
    fine_nodes: &NodeSet,
    t: usize,
    m: usize,
) -> Result<PatchSystem> {
    let patch = hier.patch(t, m);
    let pf = assemble_patch_form(hier, coeffs, fine_nodes, &patch)?;
    let cs = op.constraint_set(&pf.dofs);
    let n = pf.dofs.len();
    let c = cs.n_rows();
    let mut b = TripletBuilder::new(n + c, n + c);
    // conjugate transpose of the patch form in the leading block
    pf.matrix.for_each_entry(|i, j, v| b.push(j, i, v.conj()));
    for (r, (_, row)) in cs.rows.iter().enumerate() {
        for &(loc, w) in row {
            let wv = c64::new(w, 0.0);
            b.push(n + r, loc, wv);
            b.push(loc, n + r, wv);
        }
    }
    let lu = b.build().factorize().map_err(|_| Error::SingularCorrector {
        node: hier.coarse().cell_nodes(t)[0],
        element: t,
        m,
    })?;
    Ok(PatchSystem { dofs: pf.dofs, lu, n, n_constraints: c })
}

/// Right side conj(a_T(phi_p, Lambda_z)) over the patch-local dofs.
fn corrector_rhs(
    element_form: &ComplexSparseMatrix,
    lambda_z: &[c64],
    system: &PatchSystem,
) -> Vec<c64> {
    let y = element_form.matvec_transpose(lambda_z);
    let mut rhs = vec![c64::ZERO; system.n + system.n_constraints];
    for (loc, &d) in system.dofs.iter().enumerate() {
        rhs[loc] = y[d].conj();
    }
    rhs
}

/// Dense fine embedding of the coarse basis function for dof `z`.
fn coarse_hat_fine(prol: &Prolongation, z: usize) -> Vec<c64> {
    let mut out = vec![c64::ZERO; prol.n_fine];
    for &(d, w) in prol.column(z) {
        out[d] = c64::new(w, 0.0);
    }
    out
}

/// All corrector contributions of one element: (coarse dof, sparse fine
/// vector), in ascending coarse dof order.
fn element_correctors(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    op: &InterpolationOperator,
    prol: &Prolongation,
    fine_nodes: &NodeSet,
    coarse_nodes: &NodeSet,
    t: usize,
    m: usize,
) -> Result<Vec<(usize, Vec<(usize, c64)>)>> {
    let system = build_patch_system(hier, coeffs, op, fine_nodes, t, m)?;
    if system.n == 0 || system.n_constraints == system.n {
        // trivial fine-scale space (h = H): all correctors vanish
        return Ok(Vec::new());
    }
    let element_form = assemble_element_form(hier, coeffs, fine_nodes, t)?;
    let mut zs: Vec<usize> = hier
        .coarse()
        .cell_nodes(t)
        .into_iter()
        .filter_map(|node| coarse_nodes.node_to_dof[node])
        .collect();
    zs.sort_unstable();
    let mut out = Vec::with_capacity(zs.len());
    for z in zs {
        let lam = coarse_hat_fine(prol, z);
        let rhs = corrector_rhs(&element_form, &lam, &system);
        let sol = system.lu.solve(&rhs).map_err(|_| Error::SingularCorrector {
            node: coarse_nodes.dof_to_node[z],
            element: t,
            m,
        })?;
        let sparse: Vec<(usize, c64)> = system
            .dofs
            .iter()
            .enumerate()
            .filter_map(|(loc, &d)| (sol[loc] != c64::ZERO).then_some((d, sol[loc])))
            .collect();
        out.push((z, sparse));
    }
    Ok(out)
}

/// Solve one truncated element corrector, returned as a dense global fine
/// vector (zero outside the patch).
pub fn solve_element_corrector(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    op: &InterpolationOperator,
    z: usize,
    t: usize,
    m: usize,
) -> Result<Vec<c64>> {
    let fine_nodes = hier.free_nodes(MeshLevel::Fine);
    let coarse_nodes = hier.free_nodes(MeshLevel::Coarse);
    let prol = build_prolongation(hier);
    let mut out = vec![c64::ZERO; fine_nodes.n_dofs()];
    // a node outside T contributes a zero right side
    let touches = hier
        .coarse()
        .cell_nodes(t)
        .into_iter()
        .any(|node| coarse_nodes.node_to_dof[node] == Some(z));
    if !touches {
        return Ok(out);
    }
    for (zj, sparse) in
        element_correctors(hier, coeffs, op, &prol, &fine_nodes, &coarse_nodes, t, m)?
    {
        if zj == z {
            for (d, v) in sparse {
                out[d] = v;
            }
        }
    }
    Ok(out)
}

/// Oversampling guideline m >= log2(k): below it the truncation error may
/// dominate.
fn resolution_note(k: f64, m: usize) -> Option<String> {
    let needed = k.log2();
    if (m as f64) < needed - 1.0 {
        Some(format!(
            "oversampling m = {m} below the guideline log2(k) = {needed:.1} for k = {k}"
        ))
    } else {
        None
    }
}

/// Solve all element correctors and accumulate the per-node test basis.
pub fn build_test_basis(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    op: &InterpolationOperator,
    m: usize,
) -> Result<CorrectorBasis> {
    let fine_nodes = hier.free_nodes(MeshLevel::Fine);
    let coarse_nodes = hier.free_nodes(MeshLevel::Coarse);
    let prol = build_prolongation(hier);
    let per_element: Vec<Result<Vec<(usize, Vec<(usize, c64)>)>>> = (0..hier
        .coarse()
        .n_cells())
        .into_par_iter()
        .map(|t| element_correctors(hier, coeffs, op, &prol, &fine_nodes, &coarse_nodes, t, m))
        .collect();
    let mut lambda: Vec<Vec<(usize, c64)>> = vec![Vec::new(); coarse_nodes.n_dofs()];
    let mut n_solves = 0usize;
    for res in per_element {
        for (z, sparse) in res? {
            n_solves += 1;
            merge_sparse(&mut lambda[z], &sparse);
        }
    }
    Ok(CorrectorBasis {
        m,
        lambda,
        n_solves,
        resolution_warning: resolution_note(coeffs.wavenumber, m),
    })
}

fn merge_sparse(acc: &mut Vec<(usize, c64)>, add: &[(usize, c64)]) {
    let mut merged = Vec::with_capacity(acc.len() + add.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < acc.len() || j < add.len() {
        match (acc.get(i), add.get(j)) {
            (Some(&(da, va)), Some(&(db, vb))) if da == db => {
                merged.push((da, va + vb));
                i += 1;
                j += 1;
            }
            (Some(&(da, va)), Some(&(db, _))) if da < db => {
                merged.push((da, va));
                i += 1;
            }
            (Some(_), Some(&(db, vb))) => {
                merged.push((db, vb));
                j += 1;
            }
            (Some(&(da, va)), None) => {
                merged.push((da, va));
                i += 1;
            }
            (None, Some(&(db, vb))) => {
                merged.push((db, vb));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    *acc = merged;
}

impl CorrectorBasis {
    /// Dense fine vector of one corrector.
    pub fn dense(&self, z: usize, n_fine: usize) -> Vec<c64> {
        let mut out = vec![c64::ZERO; n_fine];
        for &(d, v) in &self.lambda[z] {
            out[d] = v;
        }
        out
    }

    /// Write all correctors as `coarse_dof,fine_dof,re,im` lines.
    pub fn dump_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "coarse_dof,fine_dof,re,im")?;
        for (z, row) in self.lambda.iter().enumerate() {
            for &(d, v) in row {
                writeln!(w, "{z},{d},{:.17e},{:.17e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Oversampling order whose patches cover the whole domain from any seed.
pub fn full_cover_m(hier: &MeshHierarchy) -> usize {
    hier.coarse().nx.max(hier.coarse().ny)
}

/// Full-domain (idealized) corrector for one coarse free dof.
pub fn solve_ideal_corrector(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    op: &InterpolationOperator,
    z: usize,
) -> Result<Vec<c64>> {
    truncated_corrector(hier, coeffs, op, z, full_cover_m(hier))
}

/// Corrector of one node at a given oversampling order, summed over the
/// elements containing the node.
pub fn truncated_corrector(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    op: &InterpolationOperator,
    z: usize,
    m: usize,
) -> Result<Vec<c64>> {
    let fine_nodes = hier.free_nodes(MeshLevel::Fine);
    let coarse_nodes = hier.free_nodes(MeshLevel::Coarse);
    let prol = build_prolongation(hier);
    let node = coarse_nodes.dof_to_node[z];
    let coarse = hier.coarse();
    let mut out = vec![c64::ZERO; fine_nodes.n_dofs()];
    for t in 0..coarse.n_cells() {
        if !coarse.cell_nodes(t).contains(&node) {
            continue;
        }
        for (zj, sparse) in
            element_correctors(hier, coeffs, op, &prol, &fine_nodes, &coarse_nodes, t, m)?
        {
            if zj == z {
                for (d, v) in sparse {
                    out[d] += v;
                }
            }
        }
    }
    Ok(out)
}

/// Measure the distance of truncated correctors from the ideal one.
pub fn decay_profile(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    op: &InterpolationOperator,
    z: usize,
    m_list: &[usize],
) -> Result<DecayProfile> {
    let fine_nodes = hier.free_nodes(MeshLevel::Fine);
    let ideal = solve_ideal_corrector(hier, coeffs, op, z)?;
    let mut deviations = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let lam = truncated_corrector(hier, coeffs, op, z, m)?;
        let e = crate::assembly::h1_semi_diff(hier, &fine_nodes, &ideal, &lam);
        deviations.push((m, e));
    }
    let mut ratios = Vec::new();
    for w in deviations.windows(2) {
        if w[0].1 > 0.0 && w[1].1 > 0.0 {
            ratios.push(w[1].1 / w[0].1);
        }
    }
    let rate = if ratios.is_empty() {
        0.0
    } else {
        (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp()
    };
    Ok(DecayProfile { node: z, deviations, rate })
}
