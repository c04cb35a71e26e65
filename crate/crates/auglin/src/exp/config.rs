//! Line-oriented experiment configuration: `[section]` headers with
//! `key = value` entries, plus `key=value` overrides from the command line.
//!
//! ```text
//! [experiment]
//! trials = 50
//! seed = 7
//! metrics = bias, variance, approx, mse
//! solvers = aerm
//!
//! [data]
//! p = 128
//! n = 64            # comma list sweeps n
//! spectrum = geometric 0.95
//! signal = isotropic
//! sigma_eps = 0.5
//!
//! [augmentation]
//! family = mask_unbiased
//! beta = 0.1,0.2,0.3   # comma list marks the swept parameter
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{LatentDistribution, Spectrum};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

impl ConfigError {
    pub fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumSpec {
    Isotropic,
    Geometric { gamma: f64 },
    /// Geometric with λ_p/λ_1 pinned to `ratio`.
    Ratio { ratio: f64 },
    Bilevel { a: f64, b: f64, split: usize },
    Explicit(Vec<f64>),
}

impl SpectrumSpec {
    pub fn build(&self, p: usize) -> Result<Spectrum, ConfigError> {
        let map_err = |e: crate::model::ModelError| ConfigError::at("data.spectrum", e.to_string());
        match self {
            SpectrumSpec::Isotropic => Spectrum::isotropic(p).map_err(map_err),
            SpectrumSpec::Geometric { gamma } => Spectrum::geometric(*gamma, p).map_err(map_err),
            SpectrumSpec::Ratio { ratio } => Spectrum::geometric_with_ratio(*ratio, p).map_err(map_err),
            SpectrumSpec::Bilevel { a, b, split } => Spectrum::bilevel(*a, *b, *split, p).map_err(map_err),
            SpectrumSpec::Explicit(v) => {
                if v.len() != p {
                    return Err(ConfigError::at(
                        "data.spectrum",
                        format!("explicit spectrum has {} entries, expected p = {p}", v.len()),
                    ));
                }
                Spectrum::explicit(v.clone()).map_err(map_err)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    IsotropicRandom,
    Sparse { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Mse,
    Bias,
    Variance,
    Approx,
    Su,
    Cn,
    Poe,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Mse => "mse",
            MetricKind::Bias => "bias",
            MetricKind::Variance => "variance",
            MetricKind::Approx => "approx",
            MetricKind::Su => "su",
            MetricKind::Cn => "cn",
            MetricKind::Poe => "poe",
        }
    }

    pub fn needs_classification(&self) -> bool {
        matches!(self, MetricKind::Su | MetricKind::Cn | MetricKind::Poe)
    }

    fn parse(s: &str) -> Result<Self, String> {
        Ok(match s {
            "mse" => MetricKind::Mse,
            "bias" => MetricKind::Bias,
            "variance" => MetricKind::Variance,
            "approx" => MetricKind::Approx,
            "su" => MetricKind::Su,
            "cn" => MetricKind::Cn,
            "poe" => MetricKind::Poe,
            other => return Err(format!("unknown metric '{other}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverKind {
    Aerm,
    Deterministic,
    MinNorm,
    Ridge { lambda: f64 },
    Precomputed { copies: usize },
}

impl SolverKind {
    pub fn name(&self) -> String {
        match self {
            SolverKind::Aerm => "aerm".into(),
            SolverKind::Deterministic => "deterministic".into(),
            SolverKind::MinNorm => "lse".into(),
            SolverKind::Ridge { lambda } => format!("ridge_{lambda}"),
            SolverKind::Precomputed { copies } => format!("pre{copies}"),
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        if let Some(rest) = s.strip_prefix("ridge:") {
            let lambda: f64 = rest.parse().map_err(|_| format!("bad ridge intensity '{rest}'"))?;
            return Ok(SolverKind::Ridge { lambda });
        }
        if let Some(rest) = s.strip_prefix("precomputed:") {
            let copies: usize = rest.parse().map_err(|_| format!("bad copy count '{rest}'"))?;
            return Ok(SolverKind::Precomputed { copies });
        }
        Ok(match s {
            "aerm" => SolverKind::Aerm,
            "deterministic" => SolverKind::Deterministic,
            "lse" | "min_norm" => SolverKind::MinNorm,
            other => return Err(format!("unknown solver '{other}'")),
        })
    }
}

/// One augmentation block; at most one parameter may carry a value list,
/// which becomes the swept grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AugConfig {
    pub family: String,
    pub params: BTreeMap<String, Vec<f64>>,
}

impl AugConfig {
    pub fn fixed(family: &str, params: &[(&str, f64)]) -> Self {
        Self {
            family: family.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), vec![*v])).collect(),
        }
    }

    /// The swept parameter (name, values), if any.
    pub fn sweep_axis(&self) -> Option<(&str, &[f64])> {
        self.params.iter().find(|(_, v)| v.len() > 1).map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn scalar(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(|v| if v.len() == 1 { Some(v[0]) } else { None })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub p: usize,
    pub n_grid: Vec<usize>,
    pub spectrum: SpectrumSpec,
    pub signal: SignalSpec,
    pub sigma_eps: f64,
    pub nu_star: f64,
    pub latent: LatentDistribution,
}

impl Default for DataConfig {
    fn default() -> Self {
        // Desk-scale defaults shared by the presets.
        Self {
            p: 128,
            n_grid: vec![64],
            spectrum: SpectrumSpec::Geometric { gamma: 0.95 },
            signal: SignalSpec::IsotropicRandom,
            sigma_eps: 0.5,
            nu_star: 0.1,
            latent: LatentDistribution::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub trials: usize,
    pub seed: u64,
    pub data: DataConfig,
    pub augmentations: Vec<AugConfig>,
    pub metrics: Vec<MetricKind>,
    pub solvers: Vec<SolverKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: None,
            trials: 10,
            seed: 0,
            data: DataConfig::default(),
            augmentations: Vec::new(),
            metrics: vec![MetricKind::Mse],
            solvers: vec![SolverKind::Aerm],
        }
    }
}

fn parse_f64_list(value: &str, path: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| ConfigError::at(path, format!("bad number '{s}'"))))
        .collect()
}

fn parse_usize_list(value: &str, path: &str) -> Result<Vec<usize>, ConfigError> {
    value
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| ConfigError::at(path, format!("bad integer '{s}'"))))
        .collect()
}

/// Parse a config file body. Later `overrides` (dotted `section.key=value`
/// pairs) replace file values.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut section = String::new();
    let mut aug_index: isize = -1;

    let apply = |cfg: &mut ExperimentConfig,
                     section: &str,
                     aug_index: &mut isize,
                     key: &str,
                     value: &str|
     -> Result<(), ConfigError> {
        let path = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        match (section, key) {
            ("experiment", "preset") => cfg.preset = Some(value.to_string()),
            ("experiment", "trials") => {
                cfg.trials = value.parse().map_err(|_| ConfigError::at(&path, "expected a positive integer"))?
            }
            ("experiment", "seed") => {
                cfg.seed = value.parse().map_err(|_| ConfigError::at(&path, "expected an unsigned integer"))?
            }
            ("experiment", "metrics") => {
                cfg.metrics = value
                    .split(',')
                    .map(|s| MetricKind::parse(s.trim()).map_err(|m| ConfigError::at(&path, m)))
                    .collect::<Result<_, _>>()?
            }
            ("experiment", "solvers") => {
                cfg.solvers = value
                    .split(',')
                    .map(|s| SolverKind::parse(s.trim()).map_err(|m| ConfigError::at(&path, m)))
                    .collect::<Result<_, _>>()?
            }
            ("data", "p") => {
                cfg.data.p = value.parse().map_err(|_| ConfigError::at(&path, "expected a positive integer"))?
            }
            ("data", "n") => cfg.data.n_grid = parse_usize_list(value, &path)?,
            ("data", "sigma_eps") => {
                cfg.data.sigma_eps =
                    value.parse().map_err(|_| ConfigError::at(&path, "expected a number"))?
            }
            ("data", "nu_star") => {
                cfg.data.nu_star = value.parse().map_err(|_| ConfigError::at(&path, "expected a number"))?
            }
            ("data", "latent") => {
                cfg.data.latent = match value {
                    "gaussian" => LatentDistribution::Gaussian,
                    "rademacher" => LatentDistribution::Rademacher,
                    "uniform" => LatentDistribution::UniformScaled,
                    other => return Err(ConfigError::at(&path, format!("unknown latent family '{other}'"))),
                }
            }
            ("data", "spectrum") => {
                let mut parts = value.split_whitespace();
                let kind = parts.next().unwrap_or("");
                cfg.data.spectrum = match kind {
                    "isotropic" => SpectrumSpec::Isotropic,
                    "geometric" => {
                        let gamma: f64 = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| ConfigError::at(&path, "usage: geometric <gamma>"))?;
                        SpectrumSpec::Geometric { gamma }
                    }
                    "ratio" => {
                        let ratio: f64 = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| ConfigError::at(&path, "usage: ratio <lambda_p/lambda_1>"))?;
                        SpectrumSpec::Ratio { ratio }
                    }
                    "bilevel" => {
                        let nums: Vec<f64> = parts.filter_map(|s| s.parse().ok()).collect();
                        if nums.len() != 3 {
                            return Err(ConfigError::at(&path, "usage: bilevel <a> <b> <split>"));
                        }
                        SpectrumSpec::Bilevel { a: nums[0], b: nums[1], split: nums[2] as usize }
                    }
                    "explicit" => {
                        let list = parts.next().unwrap_or("");
                        SpectrumSpec::Explicit(parse_f64_list(list, &path)?)
                    }
                    other => return Err(ConfigError::at(&path, format!("unknown spectrum kind '{other}'"))),
                }
            }
            ("data", "signal") => {
                let mut parts = value.split_whitespace();
                cfg.data.signal = match parts.next().unwrap_or("") {
                    "isotropic" => SignalSpec::IsotropicRandom,
                    "sparse" => {
                        let index: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| ConfigError::at(&path, "usage: sparse <index>"))?;
                        SignalSpec::Sparse { index }
                    }
                    other => return Err(ConfigError::at(&path, format!("unknown signal kind '{other}'"))),
                }
            }
            ("augmentation", "family") => {
                cfg.augmentations.push(AugConfig { family: value.to_string(), params: BTreeMap::new() });
                *aug_index = cfg.augmentations.len() as isize - 1;
            }
            ("augmentation", param) => {
                if *aug_index < 0 {
                    return Err(ConfigError::at(&path, "set 'family' before augmentation parameters"));
                }
                let values = parse_f64_list(value, &path)?;
                cfg.augmentations[*aug_index as usize].params.insert(param.to_string(), values);
            }
            _ => {
                return Err(ConfigError::at(&path, "unknown key"));
            }
        }
        Ok(())
    };

    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(&section, format!("expected 'key = value', got '{line}'")));
        };
        apply(&mut cfg, &section, &mut aug_index, key.trim(), value.trim())?;
    }

    for (key, value) in overrides {
        let (section, key) = key.split_once('.').unwrap_or(("experiment", key.as_str()));
        apply(&mut cfg, section, &mut aug_index, key, value)?;
    }

    validate(&cfg)?;
    Ok(cfg)
}

/// Structural validation with field paths.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    if cfg.trials < 1 {
        return Err(ConfigError::at("experiment.trials", "must be >= 1"));
    }
    if cfg.data.p < 1 {
        return Err(ConfigError::at("data.p", "must be >= 1"));
    }
    if cfg.data.n_grid.is_empty() {
        return Err(ConfigError::at("data.n", "grid must be non-empty"));
    }
    if cfg.data.n_grid.contains(&0) {
        return Err(ConfigError::at("data.n", "sample counts must be >= 1"));
    }
    if cfg.metrics.is_empty() {
        return Err(ConfigError::at("experiment.metrics", "must request at least one metric"));
    }
    if cfg.solvers.is_empty() {
        return Err(ConfigError::at("experiment.solvers", "must request at least one solver"));
    }
    cfg.data.spectrum.build(cfg.data.p)?;
    if let SignalSpec::Sparse { index } = cfg.data.signal {
        if index >= cfg.data.p {
            return Err(ConfigError::at("data.signal", format!("sparse index {index} out of range")));
        }
    }
    if cfg.metrics.iter().any(|m| m.needs_classification())
        && !matches!(cfg.data.signal, SignalSpec::Sparse { .. })
    {
        return Err(ConfigError::at(
            "experiment.metrics",
            "classification metrics (su/cn/poe) need a 1-sparse signal (data.signal = sparse <index>)",
        ));
    }
    for (i, aug) in cfg.augmentations.iter().enumerate() {
        let path = format!("augmentation[{i}]");
        let sweeps = aug.params.values().filter(|v| v.len() > 1).count();
        if sweeps > 1 {
            return Err(ConfigError::at(&path, "at most one parameter may carry a value list"));
        }
        super::sweep::build_augmentation(aug, None, cfg)
            .map_err(|e| ConfigError::at(&path, e.to_string()))?;
    }
    if cfg.preset.is_none() && cfg.augmentations.is_empty() {
        return Err(ConfigError::at("augmentation", "custom sweeps need at least one [augmentation] block"));
    }
    Ok(())
}
