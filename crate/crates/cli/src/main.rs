//! Command-line front end: convergence runs, coefficient audits, corrector
//! decay studies and wavenumber sweeps.

mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{FileConfig, Overrides};
use helmlod::experiment::{
    self, audit, decay_experiment, emit_plot_data, run_experiment, sweep_k, RunConfig,
};

#[derive(Parser)]
#[command(name = "helmlod", about = "Multiscale Petrov-Galerkin Helmholtz solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Coefficient preset: example1, example2, example3 or constant.
    #[arg(long)]
    preset: Option<String>,
    /// Wavenumber k.
    #[arg(long)]
    k: Option<f64>,
    /// Oversampling orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Coarse mesh size exponents e (H = 2^-e), comma separated.
    #[arg(long = "H-list", value_delimiter = ',')]
    h_list: Option<Vec<u32>>,
    /// Fine mesh size exponent e (h = 2^-e).
    #[arg(long = "h-level")]
    h_level: Option<u32>,
    /// Directory for CSV and JSON outputs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Use the published experiment scale (k = 32, h = 2^-8).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the convergence comparison and write the table.
    Run(CommonFlags),
    /// Audit the stability conditions of a coefficient preset.
    Audit(CommonFlags),
    /// Measure corrector truncation decay against the oversampling order.
    Decay(CommonFlags),
    /// Sweep the empirical stability quotient over wavenumbers.
    SweepK {
        #[command(flatten)]
        common: CommonFlags,
        /// Wavenumbers to sweep, comma separated.
        #[arg(long = "k-list", value_delimiter = ',', default_value = "4,8,16,32")]
        k_list: Vec<f64>,
    },
}

fn resolve(common: &CommonFlags) -> Result<RunConfig> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        preset: common.preset.clone(),
        k: common.k,
        m: common.m.clone(),
        h_list: common.h_list.clone(),
        h_level: common.h_level,
        out_dir: common.out_dir.clone(),
        paper_scale: common.paper_scale,
    };
    config::resolve(&file, &flags)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(common) => {
            let cfg = resolve(&common)?;
            let (table, report) = run_experiment(&cfg).context("experiment failed")?;
            print!("{}", table.to_csv());
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(dir) = &cfg.out_dir {
                emit_plot_data(dir, &table, &cfg.methods, &cfg.m_list)?;
                eprintln!("wrote {}", dir.join("convergence.csv").display());
            }
        }
        Command::Audit(common) => {
            let cfg = resolve(&common)?;
            let outcome = audit(cfg.example, &cfg.params, 256, None)?;
            println!("verdict: {}", outcome.verdict());
            let g = &outcome.geometry;
            println!(
                "geometry: ok={} min_robin_dot={:.6} eta={:.6}",
                g.ok(),
                g.min_dot_robin.unwrap_or(f64::NAN),
                g.eta()
            );
            match &outcome.stability {
                Some(r) => {
                    println!(
                        "s_min={:.6} condition1_ok={} condition2_lhs={:.6} condition2_ok={} c_g={} samples={} under_resolved={}",
                        r.s_min,
                        r.condition1_ok,
                        r.condition2_lhs,
                        r.condition2_ok,
                        r.c_g_used,
                        r.sample_count,
                        r.under_resolved
                    );
                }
                None => println!(
                    "stability function unavailable for this coefficient family; geometry checked only"
                ),
            }
        }
        Command::Decay(common) => {
            let cfg = resolve(&common)?;
            let m_list =
                if cfg.m_list.is_empty() { vec![1, 2, 3] } else { cfg.m_list.clone() };
            let profile = decay_experiment(&cfg, &m_list)?;
            println!("m,deviation");
            for (m, e) in &profile.deviations {
                println!("{m},{e:.12e}");
            }
            println!("# geometric mean ratio: {:.6}", profile.rate);
            if let Some(dir) = &cfg.out_dir {
                std::fs::create_dir_all(dir)?;
                let mut out = String::from("# schema=decay-v1\nm,deviation\n");
                for (m, e) in &profile.deviations {
                    out.push_str(&format!("{m},{e:.12e}\n"));
                }
                std::fs::write(dir.join("decay.csv"), out)?;
            }
        }
        Command::SweepK { common, k_list } => {
            let cfg = resolve(&common)?;
            let rows = sweep_k(&cfg, &k_list)?;
            println!("# schema={}", experiment::CSV_SCHEMA);
            println!("k,stability_quotient");
            for (k, q) in &rows {
                match q {
                    Some(q) => println!("{k},{q:.12e}"),
                    None => println!("{k},failed"),
                }
            }
        }
    }
    Ok(())
}
