//! Versioned TOML experiment configuration.
//!
//! ```toml
//! version = 1
//! seed = 0
//! output_dir = "runs/ff"
//! methods = ["mgd", "cebm", "ls_cebm", "pcebm"]
//! etas = [1e-4, 1e-2, 1.0, 10.0, 40.0]
//! steps = [100, 200, 300, 400]
//! noise_kinds = ["gaussian"]
//! chains = 128
//!
//! [problem]
//! id = "fonseca-fleming"
//! dim = 3
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{Alphabet, NoiseKind, SimplexWeights};
use crate::error::{Error, Result};
use crate::metrics::ReferencePoint;
use crate::samplers::{InitDistribution, Method};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Required by `sweep`; `improve` ignores it.
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub etas: Vec<f64>,
    #[serde(default)]
    pub steps: Vec<usize>,
    #[serde(default = "default_noise_kinds")]
    pub noise_kinds: Vec<NoiseKind>,
    #[serde(default)]
    pub chains: usize,
    /// Symbols of sequence files (seeds, training sets); defaults to the 20 amino acids.
    #[serde(default)]
    pub alphabet: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 means one per available core. Never affects results.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub sampler: SamplerOptions,
    #[serde(default)]
    pub init: InitDistribution,
    #[serde(default)]
    pub metrics: MetricOptions,
    #[serde(default)]
    pub improve: Option<ImproveOptions>,
}

/// Problem selection. `models` and `training_sets` only apply to `sequence-energies`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub id: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub models: Vec<PathBuf>,
    /// Sequence files the models were trained on, for edit-distance reporting.
    #[serde(default)]
    pub training_sets: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerOptions {
    /// pcEBM noise constant; defaults to `eta / 2` per cell.
    pub alpha: Option<f64>,
    /// Langevin noise scale for cEBM and ls-cEBM; defaults to `sqrt(eta)` per cell.
    pub sigma: Option<f64>,
    pub record_every: Option<usize>,
    pub grad_tol: Option<f64>,
    /// ls-cEBM weights; uniform when absent.
    pub ls_lambda: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricOptions {
    /// Defaults to all ones.
    #[serde(default)]
    pub reference_point: Option<Vec<f64>>,
    #[serde(default)]
    pub normalization: NormalizationPolicy,
    /// Monte-Carlo samples for hypervolume with more than three objectives.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            reference_point: None,
            normalization: NormalizationPolicy::default(),
            mc_samples: default_mc_samples(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationPolicy {
    /// Min-max bounds pooled over every final point of the sweep.
    #[default]
    Pooled,
}

impl NormalizationPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormalizationPolicy::Pooled => "pooled",
        }
    }
}

/// Settings for the seed-improvement workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImproveOptions {
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    pub eta: f64,
    pub steps: usize,
    #[serde(default = "default_noise")]
    pub noise_kind: NoiseKind,
    #[serde(default = "one")]
    pub chains_per_seed: usize,
    #[serde(default = "default_on")]
    pub on_value: f64,
    #[serde(default)]
    pub off_value: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_noise_kinds() -> Vec<NoiseKind> {
    vec![NoiseKind::Gaussian]
}

fn default_noise() -> NoiseKind {
    NoiseKind::Gaussian
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("pcebm-out")
}

fn default_mc_samples() -> usize {
    100_000
}

fn one() -> usize {
    1
}

fn default_on() -> f64 {
    1.0
}

fn check_grid<T>(name: &str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("`{name}` must not be empty")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// A config with the given problem and grids; every other field takes its default.
    pub fn new(problem: &str, methods: Vec<Method>, etas: Vec<f64>, steps: Vec<usize>, chains: usize) -> Self {
        Self {
            version: CONFIG_VERSION,
            problem: Some(ProblemSpec {
                id: problem.to_string(),
                dim: None,
                models: Vec::new(),
                training_sets: Vec::new(),
            }),
            methods,
            etas,
            steps,
            noise_kinds: default_noise_kinds(),
            chains,
            alphabet: None,
            seed: 0,
            output_dir: default_output_dir(),
            workers: 0,
            sampler: SamplerOptions::default(),
            init: InitDistribution::default(),
            metrics: MetricOptions::default(),
            improve: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "config".into());
            Error::Parse {
                location,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.check_paths()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(problem) = self.problem.as_mut() {
            problem.models.iter_mut().for_each(fix);
            problem.training_sets.iter_mut().for_each(fix);
        }
        if let Some(out) = self.improve.as_mut().and_then(|i| i.output.as_mut()) {
            fix(out);
        }
    }

    /// Checks that every model and training file exists.
    pub fn check_paths(&self) -> Result<()> {
        let Some(problem) = &self.problem else {
            return Ok(());
        };
        for p in problem.models.iter().chain(&problem.training_sets) {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        check_grid("methods", &self.methods)?;
        check_grid("noise_kinds", &self.noise_kinds)?;
        if let Some(eta) = self.etas.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("eta must be finite and > 0, got {eta}")));
        }
        if self.steps.contains(&0) {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        for (name, v) in [("alpha", self.sampler.alpha), ("sigma", self.sampler.sigma)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("sampler.{name} must be >= 0, got {v}")));
                }
            }
        }
        if self.sampler.record_every == Some(0) {
            return Err(Error::Config("sampler.record_every must be >= 1".into()));
        }
        if let Some(l) = &self.sampler.ls_lambda {
            SimplexWeights::new(l.clone())?;
        }
        if let Some(symbols) = &self.alphabet {
            Alphabet::new(symbols)?;
        }
        if let Some(r) = &self.metrics.reference_point {
            ReferencePoint::new(r.clone())?;
        }
        if self.metrics.mc_samples < 1 {
            return Err(Error::Config("metrics.mc_samples must be >= 1".into()));
        }
        if let Some(imp) = &self.improve {
            check_grid("improve.methods", &imp.methods)?;
            if !(imp.eta > 0.0 && imp.eta.is_finite()) {
                return Err(Error::Config(format!("improve.eta must be > 0, got {}", imp.eta)));
            }
            if imp.chains_per_seed < 1 {
                return Err(Error::Config("improve.chains_per_seed must be >= 1".into()));
            }
            if !(imp.on_value > imp.off_value) {
                return Err(Error::Config("improve.on_value must exceed off_value".into()));
            }
        }
        Ok(())
    }

    /// Checks what `sweep` needs beyond [`ExperimentConfig::validate`]: a problem and
    /// non-empty grids.
    pub fn validate_sweep(&self) -> Result<&ProblemSpec> {
        self.validate()?;
        let problem = self
            .problem
            .as_ref()
            .ok_or_else(|| Error::Config("sweep needs a [problem] table".into()))?;
        check_grid("etas", &self.etas)?;
        check_grid("steps", &self.steps)?;
        if self.chains < 1 {
            return Err(Error::Config("`chains` must be >= 1".into()));
        }
        Ok(problem)
    }

    /// The configured alphabet, or the amino-acid default.
    pub fn alphabet(&self) -> Result<Alphabet> {
        match &self.alphabet {
            Some(symbols) => Alphabet::new(symbols),
            None => Ok(Alphabet::default()),
        }
    }

    pub fn improve_options(&self) -> Result<&ImproveOptions> {
        self.improve
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [improve] table".into()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
etas = [0.01]
steps = [10]
chains = 2

[problem]
id = "opposing-quadratics"
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.methods, Method::ALL.to_vec());
        assert_eq!(cfg.noise_kinds, vec![NoiseKind::Gaussian]);
        assert_eq!(cfg.init, InitDistribution::default());
        assert_eq!(cfg.metrics.normalization, NormalizationPolicy::Pooled);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.sampler.alpha = Some(1e-4);
        cfg.init = InitDistribution::Uniform { low: -1.0, high: 1.0 };
        cfg.improve = Some(ImproveOptions {
            methods: vec![Method::Mgd],
            eta: 0.1,
            steps: 5,
            noise_kind: NoiseKind::None,
            chains_per_seed: 1,
            on_value: 1.0,
            off_value: 0.0,
            output: None,
        });
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_fail_with_location() {
        let text = format!("{MINIMAL}\nbogus = 3\n");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Parse { location, message }) => {
                assert!(location.starts_with("line"), "{location}");
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let bad = [
            MINIMAL.replace("etas = [0.01]", "etas = []"),
            MINIMAL.replace("chains = 2", "chains = 0"),
            MINIMAL.replace("version = 1", "version = 2"),
            MINIMAL.replace("etas = [0.01]", "etas = [-1.0]"),
            MINIMAL.replace("steps = [10]", "steps = [0]"),
        ];
        for text in bad {
            let res = ExperimentConfig::from_toml(&text).and_then(|c| c.validate_sweep().map(|_| ()));
            assert!(matches!(res, Err(Error::Config(_))), "{text}");
        }
        let no_problem = MINIMAL.replace("[problem]\nid = \"opposing-quadratics\"", "");
        let cfg = ExperimentConfig::from_toml(&no_problem).unwrap();
        assert!(cfg.validate_sweep().is_err());
    }

    #[test]
    fn missing_model_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        let text = MINIMAL.replace("opposing-quadratics\"", "sequence-energies\"\nmodels = [\"nope.model\"]");
        fs::write(&path, text).unwrap();
        match ExperimentConfig::load(&path) {
            Err(Error::Io { path, .. }) => assert!(path.ends_with("nope.model")),
            other => panic!("expected io error, got {other:?}"),
        }
    }
}
