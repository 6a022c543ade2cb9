//! Training configuration for the `train` command.
//!
//! ```toml
//! version = 1
//! model = "pwm"        # or "mlp"
//! hidden = 16          # mlp only
//! init_scale = 0.1     # mlp only
//!
//! [cd]
//! cd_steps = 5
//! lr = 0.05
//! epochs = 20
//! batch_size = 100
//! l2 = 0.1
//! seed = 0
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Alphabet, DiscreteSequence, Shape};
use crate::energy::{cd_train, CdTrainConfig, MlpEnergy, PwmEnergy, TrainOutcome, TrainableModel};
use crate::error::{Error, Result};
use crate::rng::chain_rng;

use super::config::CONFIG_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pwm,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub version: u32,
    pub model: ModelKind,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub alphabet: Option<String>,
    #[serde(default)]
    pub cd: CdTrainConfig,
}

fn default_hidden() -> usize {
    16
}

fn default_scale() -> f64 {
    0.1
}

impl TrainConfig {
    pub fn from_toml(text: &str, source: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            location: e
                .span()
                .map(|s| format!("{source}: line {}", text[..s.start].matches('\n').count() + 1))
                .unwrap_or_else(|| source.to_string()),
            message: e.message().to_string(),
        })?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        if cfg.model == ModelKind::Mlp && cfg.hidden == 0 {
            return Err(Error::Config("hidden must be >= 1".into()));
        }
        cfg.cd.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        match &self.alphabet {
            Some(s) => Alphabet::new(s),
            None => Ok(Alphabet::default()),
        }
    }
}

/// Builds the initial model for `data` and trains it.
pub fn train(data: &[DiscreteSequence], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let first = data.first().ok_or(Error::Empty("training data"))?;
    let (len, alphabet) = (first.len(), first.alphabet_size());
    let init = match cfg.model {
        ModelKind::Pwm => TrainableModel::Pwm(PwmEnergy::zeros(len, alphabet)?),
        ModelKind::Mlp => {
            // the init stream is separate from the training stream of the same seed
            let mut rng = chain_rng(cfg.cd.seed, u64::MAX);
            TrainableModel::Mlp(MlpEnergy::random(
                Shape::Sequence { len, alphabet },
                cfg.hidden,
                cfg.init_scale,
                &mut rng,
            )?)
        }
    };
    cd_train(init, data, &cfg.cd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_defaults() {
        let cfg = TrainConfig::from_toml("version = 1\nmodel = \"mlp\"\n", "t").unwrap();
        assert_eq!(cfg.hidden, 16);
        assert_eq!(cfg.cd, CdTrainConfig::default());
        let err = TrainConfig::from_toml("version = 1\nmodel = \"cnn\"\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = TrainConfig::from_toml("version = 1\nmodel = \"pwm\"\n[cd]\nepochs = 0\ncd_steps = 1\nlr = 0.1\nbatch_size = 1\nl2 = 0.0\nseed = 0\n", "t").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
