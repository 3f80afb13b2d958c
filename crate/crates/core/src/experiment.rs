//! Convergence experiment harness: configurations, presets, the
//! multiscale-versus-standard-FEM comparison table, plot series emission,
//! the audit entry point, decay runs and wavenumber sweeps.
//!
//! All table output is deterministic: fixed row ordering and fixed float
//! formatting, so repeated runs of the same configuration produce
//! byte-identical CSV files. Timings go to the JSON report only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::assembly::{fe_norm, NormKind};
use crate::coefficients::{
    builtin_example, bump_forcing, CoefficientSet, ExampleId, ExampleParams,
};
use crate::corrector::DecayProfile;
use crate::error::{Error, Result};
use crate::interpolation::{build_interpolation, build_prolongation};
use crate::linalg::c64;
use crate::mesh::{build_hierarchy, BoundaryTags, MeshHierarchy, MeshLevel};
use crate::pgsolve::{diagnostics, solve_standard_fem};
use crate::stability::{check_conditions, check_geometry, GeomReport, StabilityReport};

pub const CSV_SCHEMA: &str = "convergence-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MsPgFem,
    StandardFem,
    BestApproximation,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::MsPgFem => "mspgfem",
            Method::StandardFem => "fem",
            Method::BestApproximation => "best",
        }
    }
}

/// One experiment configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub example: ExampleId,
    pub params: ExampleParams,
    pub k: f64,
    /// Coarse mesh sizes 2^-e, exponents strictly increasing (H decreasing).
    pub coarse_exponents: Vec<u32>,
    /// Fine mesh size 2^-e.
    pub h_exponent: u32,
    pub m_list: Vec<usize>,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Refusal threshold on the number of fine dofs.
    pub dof_cap: usize,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Preset for the reference experiment setup on (-1,1)^2 with an
    /// impedance (Robin) boundary, zero boundary data and a compactly
    /// supported bump forcing at the origin.
    pub fn preset(example: ExampleId, paper_scale: bool) -> RunConfig {
        let params = ExampleParams::default();
        let (k, h_exponent, coarse_exponents) = if paper_scale {
            (32.0, 8, vec![3, 4, 5, 6])
        } else {
            (16.0, 7, vec![3, 4, 5])
        };
        RunConfig {
            example,
            params,
            k,
            coarse_exponents,
            h_exponent,
            m_list: vec![1, 2, 3],
            methods: vec![Method::MsPgFem, Method::StandardFem, Method::BestApproximation],
            seed: 0,
            dof_cap: 1 << 21,
            out_dir: None,
        }
    }

    pub fn cells_per_axis(&self, exponent: u32) -> Result<usize> {
        let cells = self.params.domain_extent[0] * (1u64 << exponent) as f64;
        if (cells - cells.round()).abs() > 1e-9 || cells < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "mesh size 2^-{exponent} does not tile the domain extent {}",
                self.params.domain_extent[0]
            )));
        }
        Ok(cells.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k <= 0.0 {
            return Err(Error::InvalidConfig("wavenumber must be positive".into()));
        }
        if self.coarse_exponents.is_empty() {
            return Err(Error::InvalidConfig("no coarse mesh sizes requested".into()));
        }
        if !self.coarse_exponents.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "coarse mesh sizes must be strictly decreasing".into(),
            ));
        }
        let max_coarse = *self.coarse_exponents.last().unwrap();
        if self.h_exponent < max_coarse {
            return Err(Error::InvalidConfig(
                "fine mesh size must not exceed the smallest coarse size".into(),
            ));
        }
        let h = 0.5f64.powi(self.h_exponent as i32);
        if self.k * h > 2.0 {
            return Err(Error::InvalidConfig(format!(
                "fine mesh under-resolves the wave: k*h = {} > 2 (the fine scale must satisfy k^a h <= 1)",
                self.k * h
            )));
        }
        if self.m_list.is_empty() && self.methods.contains(&Method::MsPgFem) {
            return Err(Error::InvalidConfig("no oversampling orders requested".into()));
        }
        for &e in &self.coarse_exponents {
            self.cells_per_axis(e)?;
        }
        self.cells_per_axis(self.h_exponent)?;
        Ok(())
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let mut c = builtin_example(self.example, &self.params)?.with_wavenumber(self.k);
        c.volume_forcing = bump_forcing(self.params.center, 1.0 / 20.0);
        Ok(c)
    }

    pub fn hierarchy(&self, coarse_exponent: u32) -> Result<MeshHierarchy> {
        let cells = self.cells_per_axis(coarse_exponent)?;
        let levels = self.h_exponent - coarse_exponent;
        let hier = build_hierarchy(
            self.params.domain_origin,
            self.params.domain_extent,
            (cells, cells),
            levels,
            BoundaryTags::all_robin(),
        )?;
        let dofs = hier.free_nodes(MeshLevel::Fine).n_dofs();
        if dofs > self.dof_cap {
            return Err(Error::TooLarge { dofs, cap: self.dof_cap });
        }
        Ok(hier)
    }
}

/// One table row; `status` is "ok" or the error message of a failed solve.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub k: f64,
    pub coarse_exponent: u32,
    pub h_exponent: u32,
    pub m: usize,
    pub method: String,
    pub error_v: f64,
    pub error_l2: f64,
    pub quasi_opt_ratio: f64,
    pub corrector_solves: usize,
    pub status: String,
}

#[derive(Debug, Default, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

/// Phase timings, reported separately so the CSV stays deterministic.
#[derive(Debug, Default, Serialize)]
pub struct RunReport {
    pub phase_seconds: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema={CSV_SCHEMA}");
        let _ = writeln!(
            out,
            "k,H_exponent,h_exponent,m,method,error_v,error_l2,quasi_opt_ratio,corrector_solves,status"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_f(r.k),
                r.coarse_exponent,
                r.h_exponent,
                r.m,
                r.method,
                fmt_f(r.error_v),
                fmt_f(r.error_l2),
                fmt_f(r.quasi_opt_ratio),
                r.corrector_solves,
                r.status
            );
        }
        out
    }

    /// (H, relative V error) series of one method (and m for the
    /// multiscale method), skipping failed rows.
    pub fn series(&self, method: Method, m: usize, which: NormKind) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| {
                r.method == method.name()
                    && (method != Method::MsPgFem || r.m == m)
                    && r.status == "ok"
            })
            .map(|r| {
                let h = 0.5f64.powi(r.coarse_exponent as i32);
                let e = match which {
                    NormKind::L2 => r.error_l2,
                    _ => r.error_v,
                };
                (h, e)
            })
            .collect()
    }
}

fn fmt_f(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.12e}")
    }
}

/// Least-squares slope of log(err) against log(h).
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Run the full comparison for one configuration.
pub fn run_experiment(config: &RunConfig) -> Result<(ConvergenceTable, RunReport)> {
    config.validate()?;
    let coeffs = config.coefficients()?;
    let mut table = ConvergenceTable::default();
    let mut report = RunReport::default();
    for &he in &config.coarse_exponents {
        let t0 = Instant::now();
        let hier = config.hierarchy(he)?;
        let op = build_interpolation(&hier);
        let fine_nodes = hier.free_nodes(MeshLevel::Fine);
        let u_fine = solve_standard_fem(&hier, MeshLevel::Fine, &coeffs)?;
        let scale = fe_norm(&hier, &coeffs, &fine_nodes, &u_fine, NormKind::V);
        let scale_l2 = fe_norm(&hier, &coeffs, &fine_nodes, &u_fine, NormKind::L2);
        report
            .phase_seconds
            .push((format!("overkill_H_exp_{he}"), t0.elapsed().as_secs_f64()));

        let mut push = |m: usize, method: Method, res: Result<(f64, f64, f64, usize)>| {
            let row = match res {
                Ok((ev, el2, ratio, solves)) => ConvergenceRow {
                    k: config.k,
                    coarse_exponent: he,
                    h_exponent: config.h_exponent,
                    m,
                    method: method.name().into(),
                    error_v: ev / scale,
                    error_l2: el2 / scale_l2,
                    quasi_opt_ratio: ratio,
                    corrector_solves: solves,
                    status: "ok".into(),
                },
                Err(e) => ConvergenceRow {
                    k: config.k,
                    coarse_exponent: he,
                    h_exponent: config.h_exponent,
                    m,
                    method: method.name().into(),
                    error_v: f64::NAN,
                    error_l2: f64::NAN,
                    quasi_opt_ratio: f64::NAN,
                    corrector_solves: 0,
                    status: e.to_string().replace(',', ";"),
                },
            };
            table.rows.push(row);
        };

        for method in &config.methods {
            match method {
                Method::MsPgFem => {
                    for &m in &config.m_list {
                        let t1 = Instant::now();
                        let res = (|| {
                            let basis =
                                crate::corrector::build_test_basis(&hier, &coeffs, &op, m)?;
                            if let Some(w) = &basis.resolution_warning {
                                report.warnings.push(format!("H exp {he}: {w}"));
                            }
                            let system =
                                crate::pgsolve::assemble_pg_system(&hier, &coeffs, &basis, None)?;
                            let u = crate::pgsolve::solve_mspgfem(&system)?;
                            let d = diagnostics(&hier, &coeffs, &op, &u, &u_fine);
                            Ok((d.error_v, d.error_l2, d.quasi_opt_ratio, basis.n_solves))
                        })();
                        push(m, Method::MsPgFem, res);
                        report.phase_seconds.push((
                            format!("mspgfem_H_exp_{he}_m_{m}"),
                            t1.elapsed().as_secs_f64(),
                        ));
                    }
                }
                Method::StandardFem => {
                    let t1 = Instant::now();
                    let res = (|| {
                        let u = solve_standard_fem(&hier, MeshLevel::Coarse, &coeffs)?;
                        let d = diagnostics(&hier, &coeffs, &op, &u, &u_fine);
                        Ok((d.error_v, d.error_l2, d.quasi_opt_ratio, 0))
                    })();
                    push(0, Method::StandardFem, res);
                    report
                        .phase_seconds
                        .push((format!("fem_H_exp_{he}"), t1.elapsed().as_secs_f64()));
                }
                Method::BestApproximation => {
                    let prol = build_prolongation(&hier);
                    let coarse_part = prol.apply(&op.apply(&u_fine));
                    let resid: Vec<c64> =
                        u_fine.iter().zip(&coarse_part).map(|(a, b)| a - b).collect();
                    let ev = fe_norm(&hier, &coeffs, &fine_nodes, &resid, NormKind::V);
                    let el2 = fe_norm(&hier, &coeffs, &fine_nodes, &resid, NormKind::L2);
                    push(0, Method::BestApproximation, Ok((ev, el2, 1.0, 0)));
                }
            }
        }
    }
    if let Some(dir) = &config.out_dir {
        write_outputs(dir, &table, &report)?;
    }
    Ok((table, report))
}

fn write_outputs(dir: &Path, table: &ConvergenceTable, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("convergence.csv"), table.to_csv())?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidConfig(format!("report serialization failed: {e}")))?;
    std::fs::write(dir.join("report.json"), json)?;
    Ok(())
}

/// Emit per-method log-log series files next to the convergence table.
pub fn emit_plot_data(
    dir: &Path,
    table: &ConvergenceTable,
    methods: &[Method],
    m_list: &[usize],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: String, series: Vec<(f64, f64)>| -> Result<()> {
        if series.is_empty() {
            return Ok(());
        }
        let mut out = String::new();
        let _ = writeln!(out, "# schema={CSV_SCHEMA}");
        let _ = writeln!(out, "H,error");
        for (h, e) in &series {
            let _ = writeln!(out, "{},{}", fmt_f(*h), fmt_f(*e));
        }
        let path = dir.join(name);
        std::fs::write(&path, out)?;
        written.push(path);
        Ok(())
    };
    for method in methods {
        match method {
            Method::MsPgFem => {
                for &m in m_list {
                    for (norm, tag) in [(NormKind::V, "V"), (NormKind::L2, "L2")] {
                        emit(
                            format!("series_{}_{}_m{}.csv", tag, method.name(), m),
                            table.series(*method, m, norm),
                        )?;
                    }
                }
            }
            _ => {
                for (norm, tag) in [(NormKind::V, "V"), (NormKind::L2, "L2")] {
                    emit(
                        format!("series_{}_{}.csv", tag, method.name()),
                        table.series(*method, 0, norm),
                    )?;
                }
            }
        }
    }
    Ok(written)
}

/// Combined audit outcome; `stability` is absent for coefficient families
/// without derivative data (the geometry is still checked).
#[derive(Debug)]
pub struct AuditOutcome {
    pub stability: Option<StabilityReport>,
    pub geometry: GeomReport,
    pub s_supported: bool,
}

impl AuditOutcome {
    pub fn verdict(&self) -> &'static str {
        match &self.stability {
            Some(r) if r.condition1_ok && r.condition2_ok && r.geometry_ok => "pass",
            Some(_) => "fail",
            None => {
                if self.geometry.ok() {
                    "geometry-only-pass"
                } else {
                    "fail"
                }
            }
        }
    }
}

/// Audit a coefficient preset on its natural domain.
pub fn audit(
    example: ExampleId,
    params: &ExampleParams,
    samples_per_axis: usize,
    c_g: Option<f64>,
) -> Result<AuditOutcome> {
    let coeffs = builtin_example(example, params)?.with_wavenumber(1.0);
    let cells = (params.domain_extent[0] * 8.0).round().max(4.0) as usize;
    let hier = build_hierarchy(
        params.domain_origin,
        params.domain_extent,
        (cells, cells),
        2,
        BoundaryTags::all_robin(),
    )?;
    let x0 = params.center;
    let geometry = check_geometry(&hier, x0);
    let oscillation = match example {
        ExampleId::Example1 | ExampleId::Example2 => Some(params.epsilon),
        _ => None,
    };
    match check_conditions(&coeffs, &hier, x0, samples_per_axis, c_g, oscillation) {
        Ok(report) => Ok(AuditOutcome { stability: Some(report), geometry, s_supported: true }),
        Err(Error::UnsupportedFamily) => {
            Ok(AuditOutcome { stability: None, geometry, s_supported: false })
        }
        Err(e) => Err(e),
    }
}

/// Decay experiment at the coarse node nearest the domain center.
pub fn decay_experiment(config: &RunConfig, m_list: &[usize]) -> Result<DecayProfile> {
    config.validate()?;
    let he = *config.coarse_exponents.first().unwrap();
    let hier = config.hierarchy(he)?;
    let coeffs = config.coefficients()?;
    let op = build_interpolation(&hier);
    let coarse = hier.coarse();
    let coarse_nodes = hier.free_nodes(MeshLevel::Coarse);
    let center = coarse.node_id(coarse.nx / 2, coarse.ny / 2);
    let z = coarse_nodes.node_to_dof[center]
        .ok_or_else(|| Error::InvalidConfig("center node is constrained".into()))?;
    crate::corrector::decay_profile(&hier, &coeffs, &op, z, m_list)
}

/// Wavenumber sweep of the empirical stability quotient on the finest
/// requested mesh.
pub fn sweep_k(config: &RunConfig, k_list: &[f64]) -> Result<Vec<(f64, Option<f64>)>> {
    config.validate()?;
    let he = *config.coarse_exponents.last().unwrap();
    let hier = config.hierarchy(he)?;
    let coeffs = config.coefficients()?;
    crate::stability::empirical_stability_sweep(&hier, &coeffs, k_list)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> RunConfig {
        let mut c = RunConfig::preset(ExampleId::Constant, false);
        c.k = 4.0;
        c.coarse_exponents = vec![2, 3];
        c.h_exponent = 4;
        c.m_list = vec![1];
        c
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut c = tiny_config();
        c.coarse_exponents = vec![3, 2];
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));

        let mut c = tiny_config();
        c.h_exponent = 1;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));

        let mut c = tiny_config();
        c.k = -1.0;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));

        let mut c = tiny_config();
        c.k = 100.0;
        c.h_exponent = 4;
        // k h = 100/16 > 2
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));

        let mut c = tiny_config();
        c.dof_cap = 10;
        assert!(matches!(c.hierarchy(2), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn degenerate_run_matches_fem() {
        let mut c = tiny_config();
        c.coarse_exponents = vec![4];
        c.h_exponent = 4;
        let (table, _) = run_experiment(&c).unwrap();
        let ms: Vec<_> = table.rows.iter().filter(|r| r.method == "mspgfem").collect();
        let fem: Vec<_> = table.rows.iter().filter(|r| r.method == "fem").collect();
        assert_eq!(ms.len(), 1);
        assert_eq!(fem.len(), 1);
        // fem coincides with the overkill solve here, so both relative
        // errors must vanish up to solver noise
        assert!(ms[0].error_v <= 1e-9, "mspgfem error {}", ms[0].error_v);
        assert!(fem[0].error_v <= 1e-9, "fem error {}", fem[0].error_v);
    }

    #[test]
    fn deterministic_csv() {
        let c = tiny_config();
        let (t1, _) = run_experiment(&c).unwrap();
        let (t2, _) = run_experiment(&c).unwrap();
        assert_eq!(t1.to_csv(), t2.to_csv());
        assert!(t1.to_csv().starts_with(&format!("# schema={CSV_SCHEMA}\n")));
    }

    #[test]
    fn row_counts_and_series() {
        let c = tiny_config();
        let (table, _) = run_experiment(&c).unwrap();
        // 2 coarse sizes x (1 multiscale + 1 fem + 1 best)
        assert_eq!(table.rows.len(), 6);
        assert!(table.rows.iter().all(|r| r.status == "ok"));
        let s = table.series(Method::MsPgFem, 1, NormKind::V);
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|&(_, e)| e.is_finite() && e > 0.0));
    }

    #[test]
    fn slope_fit_matches_line_oracle() {
        // exact power law e = 3 h^1.37
        let pts: Vec<(f64, f64)> =
            [0.5, 0.25, 0.125, 0.0625].iter().map(|&h: &f64| (h, 3.0 * h.powf(1.37))).collect();
        assert!((loglog_slope(&pts) - 1.37).abs() < 1e-8);
    }

    #[test]
    fn plot_series_files() {
        let c = tiny_config();
        let (table, _) = run_experiment(&c).unwrap();
        let dir = std::env::temp_dir().join("helmlod_series_test");
        let _ = std::fs::remove_dir_all(&dir);
        let files = emit_plot_data(
            &dir,
            &table,
            &[Method::MsPgFem, Method::StandardFem, Method::BestApproximation],
            &[1],
        )
        .unwrap();
        assert_eq!(files.len(), 6);
        let body = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(body.lines().count(), 2 + 2);

        let none = emit_plot_data(&dir, &table, &[], &[]).unwrap();
        assert!(none.is_empty());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn audit_outcomes() {
        let p1 = ExampleParams { epsilon: 1.0, ..Default::default() };
        let a = audit(ExampleId::Example1, &p1, 128, None).unwrap();
        assert_eq!(a.verdict(), "pass");

        let p2 = ExampleParams { epsilon: 0.1, ..Default::default() };
        let b = audit(ExampleId::Example1, &p2, 256, None).unwrap();
        assert_eq!(b.verdict(), "fail");

        let c = audit(ExampleId::Example3, &ExampleParams::default(), 64, None).unwrap();
        assert!(!c.s_supported);
        assert_eq!(c.verdict(), "geometry-only-pass");
    }

    #[test]
    fn decay_and_sweep_smoke() {
        let mut c = tiny_config();
        c.coarse_exponents = vec![2];
        c.h_exponent = 4;
        let profile = decay_experiment(&c, &[1, 2]).unwrap();
        assert_eq!(profile.deviations.len(), 2);

        let sweep = sweep_k(&c, &[2.0, 4.0]).unwrap();
        assert_eq!(sweep.len(), 2);
        assert!(sweep.iter().all(|&(_, r)| r.is_some()));
    }
}
