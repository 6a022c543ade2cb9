//! Seed improvement: relax existing sequences, run them through each sampler against a
//! scorer, decode, and compare scores.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{decode, relax, DiscreteSequence, NoiseKind, Shape};
use crate::energy::{EnergyModel, ObjectiveSet};
use crate::error::{Error, Result};
use crate::metrics::edit_distance;
use crate::samplers::{run_population, ChainInit, ChainSpec, Method};

use super::config::ExperimentConfig;
use super::sweep::sampler_config;

/// Outcome of one (seed, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed_index: usize,
    pub seed: String,
    pub method: String,
    pub before: f64,
    /// Scorer value of each chain's decoded sequence.
    pub after: Vec<f64>,
    pub edit_distance: Vec<usize>,
    pub samples: Vec<String>,
    /// Every chain ended strictly below `before`.
    pub improved: bool,
    pub failed_chains: usize,
}

/// Score distribution of one method over all seeds, ready for violin plots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub improved_seeds: usize,
    pub improved_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementReport {
    pub eta: f64,
    pub steps: usize,
    pub noise_kind: String,
    pub chains_per_seed: usize,
    pub seed: u64,
    pub results: Vec<SeedResult>,
    pub methods: Vec<MethodSummary>,
}

/// Runs every configured method from every seed and scores the decoded outputs.
///
/// Chain `c` of seed `s` uses random stream `s * chains_per_seed + c` for every method, so
/// methods see the same noise. With `steps = 0` no chain runs and outputs equal the seeds.
pub fn improve_seeds(
    cfg: &ExperimentConfig,
    seeds: &[DiscreteSequence],
    scorer: Arc<dyn EnergyModel>,
) -> Result<ImprovementReport> {
    cfg.validate()?;
    let opts = cfg.improve_options()?;
    if seeds.is_empty() {
        return Err(Error::Empty("seed sequences"));
    }
    let Shape::Sequence { len, alphabet } = scorer.shape() else {
        return Err(Error::WrongKind {
            expected: "sequence-logits",
            got: "raw",
        });
    };
    for (i, s) in seeds.iter().enumerate() {
        if s.len() != len || s.alphabet_size() != alphabet {
            return Err(Error::shape(
                format!("seeds of length {len} over {alphabet} symbols"),
                format!("seed {i} of length {} over {} symbols", s.len(), s.alphabet_size()),
            ));
        }
    }
    let symbols = cfg.alphabet()?;
    let render = |s: &DiscreteSequence| {
        if symbols.size() == alphabet {
            symbols.render(s)
        } else {
            s.tokens().iter().map(|t| t.to_string()).collect::<Vec<_>>().join("-")
        }
    };
    let score = |s: &DiscreteSequence| -> Result<f64> {
        Ok(scorer.energy(relax(s, opts.on_value, opts.off_value)?.coords()))
    };
    let objs = ObjectiveSet::with_names(vec![scorer.clone()], vec!["score".into()])?;
    let before: Vec<f64> = seeds.iter().map(score).collect::<Result<_>>()?;
    let per = opts.chains_per_seed;
    let workers = if cfg.workers > 0 {
        cfg.workers
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    };

    let mut results = Vec::new();
    let mut methods = Vec::new();
    for &method in &opts.methods {
        let outputs: Vec<Result<DiscreteSequence>> = if opts.steps == 0 {
            seeds
                .iter()
                .flat_map(|s| std::iter::repeat_n(s, per))
                .map(|s| Ok(s.clone()))
                .collect()
        } else {
            let noise = if method == Method::Mgd {
                NoiseKind::None
            } else {
                opts.noise_kind
            };
            let config = sampler_config(cfg, opts.eta, opts.steps, noise);
            let mut specs = Vec::with_capacity(seeds.len() * per);
            for s in seeds {
                let start = relax(s, opts.on_value, opts.off_value)?;
                let mut spec = ChainSpec::new(method, config.clone(), ChainInit::Point(start));
                if method == Method::LsCebm {
                    spec = spec.with_lambda(crate::domain::SimplexWeights::uniform(1));
                }
                specs.extend(std::iter::repeat_n(spec, per));
            }
            run_population(&objs, &specs, workers)
                .into_iter()
                .map(|r| match r {
                    Ok(t) => decode(t.final_point().ok_or(Error::Empty("trajectory"))?),
                    Err(f) => Err(f.error),
                })
                .collect()
        };

        let mut summary = MethodSummary {
            method: method.to_string(),
            before: before.clone(),
            after: Vec::new(),
            improved_seeds: 0,
            improved_fraction: 0.0,
        };
        for (si, seed) in seeds.iter().enumerate() {
            let mut entry = SeedResult {
                seed_index: si,
                seed: render(seed),
                method: method.to_string(),
                before: before[si],
                after: Vec::new(),
                edit_distance: Vec::new(),
                samples: Vec::new(),
                improved: false,
                failed_chains: 0,
            };
            for out in &outputs[si * per..(si + 1) * per] {
                match out {
                    Ok(seq) => {
                        entry.after.push(score(seq)?);
                        entry.edit_distance.push(edit_distance(seed, seq));
                        entry.samples.push(render(seq));
                    }
                    Err(e) => {
                        log::warn!("seed {si}, {method}: chain failed: {e}");
                        entry.failed_chains += 1;
                    }
                }
            }
            entry.improved = entry.failed_chains == 0 && entry.after.iter().all(|a| *a < entry.before);
            if entry.improved {
                summary.improved_seeds += 1;
            }
            summary.after.extend(entry.after.iter().copied());
            results.push(entry);
        }
        summary.improved_fraction = summary.improved_seeds as f64 / seeds.len() as f64;
        methods.push(summary);
    }

    Ok(ImprovementReport {
        eta: opts.eta,
        steps: opts.steps,
        noise_kind: opts.noise_kind.to_string(),
        chains_per_seed: per,
        seed: cfg.seed,
        results,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::PwmEnergy;
    use crate::harness::config::ImproveOptions;
    use crate::rng::standard_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn planted(len: usize, a: usize, seed: u64) -> PwmEnergy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..len * a).map(|_| standard_normal(&mut rng)).collect();
        PwmEnergy::new(len, a, w).unwrap()
    }

    fn cfg(steps: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new("opposing-quadratics", Method::ALL.to_vec(), vec![0.1], vec![1], 1);
        cfg.workers = 2;
        cfg.improve = Some(ImproveOptions {
            methods: Method::ALL.to_vec(),
            eta: 0.1,
            steps,
            noise_kind: NoiseKind::Gaussian,
            chains_per_seed: 2,
            on_value: 1.0,
            off_value: 0.0,
            output: None,
        });
        cfg
    }

    fn worst(pwm: &PwmEnergy) -> DiscreteSequence {
        let a = pwm.alphabet();
        let tokens = (0..pwm.len())
            .map(|l| (0..a).max_by(|&i, &j| pwm.weight(l, i).total_cmp(&pwm.weight(l, j))).unwrap())
            .collect();
        DiscreteSequence::new(tokens, a).unwrap()
    }

    #[test]
    fn zero_steps_is_a_no_op() {
        let pwm = planted(6, 20, 1);
        let seeds = vec![worst(&pwm)];
        let report = improve_seeds(&cfg(0), &seeds, Arc::new(pwm)).unwrap();
        for r in &report.results {
            assert!(r.after.iter().all(|a| *a == r.before));
            assert!(r.edit_distance.iter().all(|d| *d == 0));
            assert!(!r.improved);
        }
    }

    #[test]
    fn every_pair_listed_once_and_improved() {
        let pwm = planted(8, 20, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seeds = vec![worst(&pwm)];
        seeds.extend(PwmEnergy::zeros(8, 20).unwrap().sample_sequences(3, &mut rng));
        let report = improve_seeds(&cfg(100), &seeds, Arc::new(pwm)).unwrap();
        assert_eq!(report.results.len(), seeds.len() * 4);
        for m in Method::ALL {
            for s in 0..seeds.len() {
                let n = report
                    .results
                    .iter()
                    .filter(|r| r.method == m.as_str() && r.seed_index == s)
                    .count();
                assert_eq!(n, 1);
            }
        }
        assert!(report.methods.iter().all(|m| m.improved_fraction == 1.0), "{:?}", report.methods);
    }

    #[test]
    fn rejects_mismatched_seeds() {
        let pwm = planted(6, 20, 1);
        let short = DiscreteSequence::new(vec![0; 5], 20).unwrap();
        assert!(matches!(
            improve_seeds(&cfg(10), &[short], Arc::new(pwm)),
            Err(Error::Shape { .. })
        ));
    }
}
