//! Auditor for the coefficient stability hypotheses: boundary geometry
//! relative to a star center, the radial divergence function S, the two
//! sign conditions built from it, and empirical stability and inf-sup
//! probes on the discrete problem.
//!
//! S(x) = div((V^2/A)(x - x0)) = d * (V^2/A) + grad(V^2/A) . (x - x0)
//! with d = 2. Gradients are analytic when the coefficient family carries
//! them, otherwise central finite differences; piecewise-constant families
//! are rejected.

use crate::assembly::{fe_norm, field_l2, robin_field_l2, NormKind};
use crate::coefficients::{field_bounds, CoefficientSet, Smoothness};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, MeshHierarchy, MeshLevel};

/// Verdicts and measured quantities of the coefficient audit.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// Sampled minimum of S over the audit grid.
    pub s_min: f64,
    /// S_min > 0.
    pub condition1_ok: bool,
    /// S_min - ((d-2) + C_G ||grad A / A||) V2_max / A_min.
    pub condition2_lhs: f64,
    pub condition2_ok: bool,
    pub c_g_used: f64,
    pub grad_log_a_sup: f64,
    pub sample_count: usize,
    pub geometry_ok: bool,
    /// Minimum of (x - x0) . nu over Robin faces.
    pub eta: f64,
    /// Set when the audit grid has fewer than 10 samples per oscillation
    /// period.
    pub under_resolved: bool,
    pub x0: [f64; 2],
}

/// Boundary geometry relative to the star center.
#[derive(Debug, Clone)]
pub struct GeomReport {
    pub x0: [f64; 2],
    /// None when the boundary has no faces of that tag.
    pub min_dot_dirichlet: Option<f64>,
    pub max_abs_dot_neumann: Option<f64>,
    pub min_dot_robin: Option<f64>,
}

impl GeomReport {
    /// Dirichlet faces need dot <= 0, Neumann dot = 0, Robin dot >= eta > 0.
    pub fn ok(&self) -> bool {
        self.min_dot_dirichlet.is_none_or(|v| v <= 1e-12)
            && self.max_abs_dot_neumann.is_none_or(|v| v <= 1e-12)
            && self.min_dot_robin.is_none_or(|v| v > 0.0)
    }

    pub fn eta(&self) -> f64 {
        self.min_dot_robin.unwrap_or(0.0)
    }
}

fn ratio_and_gradient(
    coeffs: &CoefficientSet,
    x: f64,
    y: f64,
    fd_step: f64,
) -> Result<(f64, [f64; 2])> {
    let a = &coeffs.diffusion_a;
    let v2 = &coeffs.refraction_v2;
    if a.smoothness == Smoothness::PiecewiseConstant
        || v2.smoothness == Smoothness::PiecewiseConstant
    {
        return Err(Error::UnsupportedFamily);
    }
    let q = |x: f64, y: f64| v2.eval(x, y) / a.eval(x, y);
    let qv = q(x, y);
    let grad = match (a.gradient(x, y), v2.gradient(x, y)) {
        (Some(ga), Some(gv)) => {
            let av = a.eval(x, y);
            let vv = v2.eval(x, y);
            [
                (gv[0] * av - vv * ga[0]) / (av * av),
                (gv[1] * av - vv * ga[1]) / (av * av),
            ]
        }
        _ => {
            let h = fd_step;
            [
                (q(x + h, y) - q(x - h, y)) / (2.0 * h),
                (q(x, y + h) - q(x, y - h)) / (2.0 * h),
            ]
        }
    };
    Ok((qv, grad))
}

/// Evaluate S at a list of points.
pub fn s_function(
    coeffs: &CoefficientSet,
    x0: [f64; 2],
    points: &[[f64; 2]],
    fd_step: f64,
) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|&[x, y]| {
            let (q, grad) = ratio_and_gradient(coeffs, x, y, fd_step)?;
            Ok(2.0 * q + grad[0] * (x - x0[0]) + grad[1] * (y - x0[1]))
        })
        .collect()
}

fn grad_log_a(coeffs: &CoefficientSet, x: f64, y: f64, fd_step: f64) -> f64 {
    let a = &coeffs.diffusion_a;
    let av = a.eval(x, y);
    let g = a.gradient(x, y).unwrap_or_else(|| {
        let h = fd_step;
        [
            (a.eval(x + h, y) - a.eval(x - h, y)) / (2.0 * h),
            (a.eval(x, y + h) - a.eval(x, y - h)) / (2.0 * h),
        ]
    });
    (g[0] * g[0] + g[1] * g[1]).sqrt() / av
}

/// Uniform audit grid including the domain boundary, so refined grids are
/// supersets of coarser ones (with compatible subdivision counts).
fn sample_grid(hier: &MeshHierarchy, per_axis: usize) -> Vec<[f64; 2]> {
    let g = hier.coarse();
    let mut pts = Vec::with_capacity((per_axis + 1) * (per_axis + 1));
    for i in 0..=per_axis {
        for j in 0..=per_axis {
            pts.push([
                g.origin[0] + g.extent[0] * i as f64 / per_axis as f64,
                g.origin[1] + g.extent[1] * j as f64 / per_axis as f64,
            ]);
        }
    }
    pts
}

/// Audit the sign conditions on a sampling grid.
///
/// `c_g` overrides the gradient constant; the default 2 matches radial
/// coefficient families. `oscillation_scale` is the declared period of the
/// fastest coefficient oscillation, used only for the resolution flag.
pub fn check_conditions(
    coeffs: &CoefficientSet,
    hier: &MeshHierarchy,
    x0: [f64; 2],
    samples_per_axis: usize,
    c_g: Option<f64>,
    oscillation_scale: Option<f64>,
) -> Result<StabilityReport> {
    let g = hier.coarse();
    let diam = (g.extent[0] * g.extent[0] + g.extent[1] * g.extent[1]).sqrt();
    let fd_step = 1e-6 * diam;
    let pts = sample_grid(hier, samples_per_axis);
    let s = s_function(coeffs, x0, &pts, fd_step)?;
    let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let grad_log_a_sup = pts
        .iter()
        .map(|&[x, y]| grad_log_a(coeffs, x, y, fd_step))
        .fold(0.0f64, f64::max);
    let (a_min, _) = field_bounds(&coeffs.diffusion_a, hier)?;
    let (_, v2_max) = field_bounds(&coeffs.refraction_v2, hier)?;
    let c_g_used = c_g.unwrap_or(2.0);
    // d = 2: the (d - 2) term vanishes
    let condition2_lhs = s_min - c_g_used * grad_log_a_sup * v2_max / a_min;
    let geom = check_geometry(hier, x0);
    let spacing = (g.extent[0] / samples_per_axis as f64)
        .max(g.extent[1] / samples_per_axis as f64);
    let under_resolved = oscillation_scale.is_some_and(|eps| spacing > eps / 10.0);
    Ok(StabilityReport {
        s_min,
        condition1_ok: s_min > 0.0,
        condition2_lhs,
        condition2_ok: condition2_lhs > 0.0,
        c_g_used,
        grad_log_a_sup,
        sample_count: pts.len(),
        geometry_ok: geom.ok(),
        eta: geom.eta(),
        under_resolved,
        x0,
    })
}

/// Dot products (x - x0) . nu at all boundary face midpoints, per tag.
pub fn check_geometry(hier: &MeshHierarchy, x0: [f64; 2]) -> GeomReport {
    let mut dirichlet: Option<f64> = None;
    let mut neumann: Option<f64> = None;
    let mut robin: Option<f64> = None;
    for face in hier.boundary_faces(MeshLevel::Fine) {
        let dot = (face.midpoint[0] - x0[0]) * face.outward_normal[0]
            + (face.midpoint[1] - x0[1]) * face.outward_normal[1];
        match face.tag {
            BoundaryTag::Dirichlet => {
                dirichlet = Some(dirichlet.map_or(dot, |v| v.max(dot)));
            }
            BoundaryTag::Neumann => {
                neumann = Some(neumann.map_or(dot.abs(), |v: f64| v.max(dot.abs())));
            }
            BoundaryTag::Robin => {
                robin = Some(robin.map_or(dot, |v| v.min(dot)));
            }
        }
    }
    GeomReport {
        x0,
        min_dot_dirichlet: dirichlet,
        max_abs_dot_neumann: neumann,
        min_dot_robin: robin,
    }
}

/// Solve the fine problem for each k and record the stability quotient
/// ||u||_V / (||f|| + ||g||); None when the data vanish.
pub fn empirical_stability_sweep(
    hier: &MeshHierarchy,
    coeffs: &CoefficientSet,
    k_list: &[f64],
) -> Result<Vec<(f64, Option<f64>)>> {
    let fine_nodes = hier.free_nodes(MeshLevel::Fine);
    let mut out = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let ck = coeffs.clone().with_wavenumber(k);
        let data = field_l2(hier, &ck.volume_forcing) + robin_field_l2(hier, &ck.robin_data);
        if data == 0.0 {
            out.push((k, None));
            continue;
        }
        let u = crate::pgsolve::solve_standard_fem(hier, MeshLevel::Fine, &ck)?;
        let ratio = fe_norm(hier, &ck, &fine_nodes, &u, NormKind::V) / data;
        out.push((k, Some(ratio)));
    }
    Ok(out)
}
