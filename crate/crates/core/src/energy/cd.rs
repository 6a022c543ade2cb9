use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{relax, DiscreteSequence, Shape};
use crate::error::{Error, Result};
use crate::rng::{chain_rng, standard_normal};

use super::{EnergyModel, TrainableModel};

/// Where the negative-phase Langevin chains start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeInit {
    /// Relaxed uniform-random sequences.
    Noise,
    /// The positive batch itself (CD-k in the narrow sense).
    Data,
}

/// Contrastive-divergence training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdTrainConfig {
    /// Langevin steps per negative chain.
    pub cd_steps: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
    /// Step size of the negative-phase Langevin update `x - step/2 * grad + noise * w`.
    #[serde(default = "default_langevin_step")]
    pub langevin_step: f64,
    #[serde(default = "default_langevin_noise")]
    pub langevin_noise: f64,
    #[serde(default = "default_negative_init")]
    pub negative_init: NegativeInit,
    #[serde(default = "default_on")]
    pub on_value: f64,
    #[serde(default)]
    pub off_value: f64,
}

fn default_langevin_step() -> f64 {
    0.01
}

fn default_langevin_noise() -> f64 {
    0.01
}

fn default_negative_init() -> NegativeInit {
    NegativeInit::Noise
}

fn default_on() -> f64 {
    1.0
}

impl Default for CdTrainConfig {
    fn default() -> Self {
        Self {
            cd_steps: 5,
            lr: 0.05,
            epochs: 20,
            batch_size: 100,
            l2: 0.1,
            seed: 0,
            langevin_step: default_langevin_step(),
            langevin_noise: default_langevin_noise(),
            negative_init: default_negative_init(),
            on_value: 1.0,
            off_value: 0.0,
        }
    }
}

impl CdTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("cd training: {what}")));
        if self.cd_steps < 1 {
            return bad("cd_steps must be >= 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and >= 0");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be finite and >= 0");
        }
        if !(self.langevin_step > 0.0 && self.langevin_step.is_finite()) {
            return bad("langevin_step must be > 0");
        }
        if !(self.langevin_noise >= 0.0 && self.langevin_noise.is_finite()) {
            return bad("langevin_noise must be >= 0");
        }
        if !(self.on_value > self.off_value) {
            return bad("on_value must exceed off_value");
        }
        Ok(())
    }
}

/// Trained model and per-epoch mean energy gap `E(pos) - E(neg)`.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainableModel,
    pub loss_history: Vec<f64>,
}

/// Trains a sequence energy by contrastive divergence with Langevin negatives.
///
/// Each batch draws negatives, runs `cd_steps` Langevin updates on them in logit space and
/// then takes one gradient step on `mean E(pos) - mean E(neg) + l2/2 |theta|^2`.
pub fn cd_train(
    model: TrainableModel,
    data: &[DiscreteSequence],
    cfg: &CdTrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    let Shape::Sequence { len, alphabet } = model.shape() else {
        return Err(Error::WrongKind {
            expected: "sequence-logits",
            got: "raw",
        });
    };
    if let Some((i, s)) = data
        .iter()
        .enumerate()
        .find(|(_, s)| s.len() != len || s.alphabet_size() != alphabet)
    {
        return Err(Error::shape(
            format!("sequences of length {len} over {alphabet} symbols"),
            format!(
                "sequence {i} of length {} over {} symbols",
                s.len(),
                s.alphabet_size()
            ),
        ));
    }

    let positives: Vec<Vec<f64>> = data
        .iter()
        .map(|s| relax(s, cfg.on_value, cfg.off_value).map(|p| p.into_coords()))
        .collect::<Result<_>>()?;

    let mut model = model;
    let mut rng = chain_rng(cfg.seed, 0);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let n_params = model.num_params();
    let mut grad = vec![0.0; n_params];
    let mut scratch = vec![0.0; n_params];
    let mut history = Vec::with_capacity(cfg.epochs);
    let half_step = cfg.langevin_step / 2.0;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_gap = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut negatives: Vec<Vec<f64>> = match cfg.negative_init {
                NegativeInit::Data => batch.iter().map(|&i| positives[i].clone()).collect(),
                NegativeInit::Noise => batch
                    .iter()
                    .map(|_| random_relaxed(len, alphabet, cfg, &mut rng))
                    .collect(),
            };
            for x in negatives.iter_mut() {
                for _ in 0..cfg.cd_steps {
                    let (_, g) = model.energy_and_grad(x);
                    for (xi, gi) in x.iter_mut().zip(&g) {
                        *xi -= half_step * gi;
                        if cfg.langevin_noise > 0.0 {
                            *xi += cfg.langevin_noise * standard_normal(&mut rng);
                        }
                    }
                }
            }

            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut pos_energy = 0.0;
            let mut neg_energy = 0.0;
            for (&i, neg) in batch.iter().zip(&negatives) {
                let pos = &positives[i];
                pos_energy += model.energy(pos);
                neg_energy += model.energy(neg);
                model.accumulate_param_gradient(pos, scale, &mut grad, &mut scratch);
                model.accumulate_param_gradient(neg, -scale, &mut grad, &mut scratch);
            }
            epoch_gap += (pos_energy - neg_energy) * scale;
            batches += 1;

            let mut params = model.params();
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.lr * (g + cfg.l2 * *p);
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite("parameters diverged during CD training".into()));
            }
            model.set_params(&params);
        }
        history.push(epoch_gap / batches as f64);
    }

    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

fn random_relaxed<R: Rng + ?Sized>(len: usize, alphabet: usize, cfg: &CdTrainConfig, rng: &mut R) -> Vec<f64> {
    let mut x = vec![cfg.off_value; len * alphabet];
    for l in 0..len {
        x[l * alphabet + rng.random_range(0..alphabet)] = cfg.on_value;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{MlpEnergy, PwmEnergy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planted(len: usize, alphabet: usize, seed: u64) -> PwmEnergy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..len * alphabet).map(|_| 1.5 * standard_normal(&mut rng)).collect();
        PwmEnergy::new(len, alphabet, w).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let truth = planted(4, 5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = truth.sample_sequences(50, &mut rng);
        let init = TrainableModel::Pwm(planted(4, 5, 9));
        let cfg = CdTrainConfig {
            lr: 0.0,
            epochs: 3,
            batch_size: 8,
            ..Default::default()
        };
        let out = cd_train(init.clone(), &data, &cfg).unwrap();
        assert_eq!(out.model, init);

        let mlp = TrainableModel::Mlp(
            MlpEnergy::random(truth.shape(), 3, 1.0, &mut rng).unwrap(),
        );
        let out = cd_train(mlp.clone(), &data, &cfg).unwrap();
        assert_eq!(out.model, mlp);
    }

    #[test]
    fn training_is_deterministic() {
        let truth = planted(6, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = truth.sample_sequences(200, &mut rng);
        let cfg = CdTrainConfig {
            epochs: 5,
            batch_size: 32,
            seed: 17,
            ..Default::default()
        };
        let init = TrainableModel::Pwm(PwmEnergy::zeros(6, 4).unwrap());
        let a = cd_train(init.clone(), &data, &cfg).unwrap();
        let b = cd_train(init, &data, &cfg).unwrap();
        let bits = |h: &[f64]| h.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.loss_history), bits(&b.loss_history));
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn trained_pwm_separates_data_from_noise() {
        let truth = planted(8, 6, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = truth.sample_sequences(1000, &mut rng);
        let held_out = truth.sample_sequences(300, &mut rng);
        let cfg = CdTrainConfig::default();
        let out = cd_train(
            TrainableModel::Pwm(PwmEnergy::zeros(8, 6).unwrap()),
            &data,
            &cfg,
        )
        .unwrap();
        let TrainableModel::Pwm(trained) = out.model else {
            unreachable!()
        };
        let pos: f64 = held_out.iter().map(|s| trained.sequence_energy(s)).sum::<f64>() / 300.0;
        let random: Vec<DiscreteSequence> = (0..300)
            .map(|_| {
                DiscreteSequence::new((0..8).map(|_| rng.random_range(0..6)).collect(), 6).unwrap()
            })
            .collect();
        let neg: f64 = random.iter().map(|s| trained.sequence_energy(s)).sum::<f64>() / 300.0;
        assert!(pos < neg - 1.0, "held-out {pos} vs random {neg}");
        assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
    }

    #[test]
    fn mlp_training_runs_and_lowers_data_energy() {
        let truth = planted(5, 4, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let data = truth.sample_sequences(400, &mut rng);
        let mlp = MlpEnergy::random(truth.shape(), 8, 0.5, &mut rng).unwrap();
        let cfg = CdTrainConfig {
            epochs: 30,
            batch_size: 50,
            l2: 0.01,
            ..Default::default()
        };
        let out = cd_train(TrainableModel::Mlp(mlp), &data, &cfg).unwrap();
        assert!(out.loss_history.last().unwrap() < &-0.1, "{:?}", out.loss_history);
    }

    #[test]
    fn rejects_bad_inputs() {
        let init = TrainableModel::Pwm(PwmEnergy::zeros(3, 4).unwrap());
        let cfg = CdTrainConfig::default();
        assert!(matches!(cd_train(init.clone(), &[], &cfg), Err(Error::Empty(_))));
        let short = DiscreteSequence::new(vec![0, 1], 4).unwrap();
        assert!(matches!(
            cd_train(init, &[short], &cfg),
            Err(Error::Shape { .. })
        ));
    }
}
