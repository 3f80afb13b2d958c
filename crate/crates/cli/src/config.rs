//! Flat key=value configuration files and their merge with command-line
//! flags. Precedence is preset defaults, then file entries, then flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use helmlod::coefficients::ExampleId;
use helmlod::experiment::{Method, RunConfig};

/// Parsed key=value file: dotted lowercase keys, `#` comments, blank lines
/// ignored.
#[derive(Debug, Default)]
pub struct FileConfig {
    pub entries: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value, got {raw:?}", lineno + 1))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                bail!("line {}: empty key", lineno + 1);
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { entries })
    }

    pub fn load(path: &std::path::Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key {key}={v}: {e}")),
        }
    }

    fn get_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| anyhow!("config key {key}={v}: {e}")))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

pub fn parse_example(name: &str) -> Result<ExampleId> {
    match name.to_ascii_lowercase().as_str() {
        "example1" => Ok(ExampleId::Example1),
        "example2" => Ok(ExampleId::Example2),
        "example3" => Ok(ExampleId::Example3),
        "constant" => Ok(ExampleId::Constant),
        other => bail!("unknown preset {other:?} (expected example1, example2, example3 or constant)"),
    }
}

fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    spec.split(',')
        .map(|s| match s.trim() {
            "mspgfem" => Ok(Method::MsPgFem),
            "fem" => Ok(Method::StandardFem),
            "best" => Ok(Method::BestApproximation),
            other => Err(anyhow!("unknown method {other:?}")),
        })
        .collect()
}

/// Command-line overrides shared by every subcommand.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub preset: Option<String>,
    pub k: Option<f64>,
    pub m: Option<Vec<usize>>,
    pub h_list: Option<Vec<u32>>,
    pub h_level: Option<u32>,
    pub out_dir: Option<PathBuf>,
    pub paper_scale: bool,
}

/// Build the effective configuration from preset defaults, then the file,
/// then the flags.
pub fn resolve(file: &FileConfig, flags: &Overrides) -> Result<RunConfig> {
    let preset_name = flags
        .preset
        .clone()
        .or_else(|| file.entries.get("preset").cloned())
        .unwrap_or_else(|| "example1".into());
    let paper_scale =
        flags.paper_scale || file.get::<bool>("paper_scale")?.unwrap_or(false);
    let mut config = RunConfig::preset(parse_example(&preset_name)?, paper_scale);

    if let Some(v) = file.get("k")? {
        config.k = v;
    }
    if let Some(v) = file.get_list("h_list")? {
        config.coarse_exponents = v;
    }
    if let Some(v) = file.get("h_level")? {
        config.h_exponent = v;
    }
    if let Some(v) = file.get_list("m_list")? {
        config.m_list = v;
    }
    if let Some(v) = file.entries.get("methods") {
        config.methods = parse_methods(v)?;
    }
    if let Some(v) = file.get("seed")? {
        config.seed = v;
    }
    if let Some(v) = file.get("dof_cap")? {
        config.dof_cap = v;
    }
    if let Some(v) = file.entries.get("out_dir") {
        config.out_dir = Some(PathBuf::from(v));
    }
    if let Some(v) = file.get("params.epsilon")? {
        config.params.epsilon = v;
    }
    if let Some(v) = file.get("params.alpha")? {
        config.params.alpha = v;
    }
    if let Some(v) = file.get("params.delta")? {
        config.params.delta = v;
    }
    if let Some(v) = file.get("params.blocks_per_axis")? {
        config.params.blocks_per_axis = v;
    }
    if let Some(v) = file.get("params.block_area_fraction")? {
        config.params.block_area_fraction = v;
    }

    if let Some(v) = flags.k {
        config.k = v;
    }
    if let Some(v) = &flags.h_list {
        config.coarse_exponents = v.clone();
    }
    if let Some(v) = flags.h_level {
        config.h_exponent = v;
    }
    if let Some(v) = &flags.m {
        config.m_list = v.clone();
    }
    if let Some(v) = &flags.out_dir {
        config.out_dir = Some(v.clone());
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let f = FileConfig::parse(
            "# convergence study\npreset = example2\nk = 8  # override\n\nparams.epsilon=0.25\n",
        )
        .unwrap();
        assert_eq!(f.entries.len(), 3);
        assert_eq!(f.entries["preset"], "example2");
        assert_eq!(f.entries["k"], "8");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(FileConfig::parse("just words\n").is_err());
        assert!(FileConfig::parse("= 3\n").is_err());
    }

    #[test]
    fn flags_override_file_overrides_preset() {
        let file = FileConfig::parse("preset=example2\nk=8\nh_list=3,4\nparams.epsilon=0.5\n")
            .unwrap();
        let cfg = resolve(&file, &Overrides::default()).unwrap();
        assert_eq!(cfg.example, ExampleId::Example2);
        assert_eq!(cfg.k, 8.0);
        assert_eq!(cfg.coarse_exponents, vec![3, 4]);
        assert_eq!(cfg.params.epsilon, 0.5);

        let flags = Overrides { k: Some(12.0), h_list: Some(vec![2]), ..Default::default() };
        let cfg = resolve(&file, &flags).unwrap();
        assert_eq!(cfg.k, 12.0);
        assert_eq!(cfg.coarse_exponents, vec![2]);
        // untouched keys keep the file values
        assert_eq!(cfg.params.epsilon, 0.5);
    }

    #[test]
    fn paper_scale_changes_defaults() {
        let file = FileConfig::default();
        let small = resolve(&file, &Overrides::default()).unwrap();
        assert_eq!((small.k, small.h_exponent), (16.0, 7));
        let flags = Overrides { paper_scale: true, ..Default::default() };
        let big = resolve(&file, &flags).unwrap();
        assert_eq!((big.k, big.h_exponent), (32.0, 8));
        assert_eq!(big.coarse_exponents, vec![3, 4, 5, 6]);
    }
}
