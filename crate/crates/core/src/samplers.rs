//! The four chain samplers: MGD, cEBM, ls-cEBM and pcEBM.
//!
//! All chains share one loop. At every step the drift direction is evaluated at the current
//! point, the state is recorded (at the configured stride), and the point moves by
//! `x <- x - c * direction + noise`, where
//!
//! | method  | direction            | c      | noise                         |
//! |---------|----------------------|--------|-------------------------------|
//! | MGD     | min-norm `g(x)`      | eta    | none                          |
//! | cEBM    | `sum_i grad f_i`     | eta/2  | `sigma * w`                   |
//! | ls-cEBM | `sum_i l_i grad f_i` | eta/2  | `sigma * w`                   |
//! | pcEBM   | min-norm `g(x)`      | eta    | `sqrt(2 alpha) * w`           |
//!
//! Noiseless MGD-style chains stop once `|g| < grad_tol`.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    DesignPoint, NoiseKind, ObjectiveVector, SamplerConfig, Shape, SimplexWeights, Trajectory,
    TrajectoryRecord,
};
use crate::energy::ObjectiveSet;
use crate::error::{Error, Result};
use crate::moo::min_norm;
use crate::rng::{chain_rng, standard_normal, unit_noise, ChainRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mgd,
    Cebm,
    LsCebm,
    Pcebm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mgd, Method::Cebm, Method::LsCebm, Method::Pcebm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mgd => "mgd",
            Method::Cebm => "cebm",
            Method::LsCebm => "ls_cebm",
            Method::Pcebm => "pcebm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Distribution of random chain starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "lowercase")]
pub enum InitDistribution {
    /// `N(mean, std^2)` per coordinate.
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl Default for InitDistribution {
    fn default() -> Self {
        InitDistribution::Normal {
            mean: 0.0,
            std: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainInit {
    Point(DesignPoint),
    Random {
        distribution: InitDistribution,
        shape: Shape,
    },
}

impl ChainInit {
    fn shape(&self) -> Shape {
        match self {
            ChainInit::Point(p) => p.shape(),
            ChainInit::Random { shape, .. } => *shape,
        }
    }

    fn draw(&self, rng: &mut ChainRng) -> Result<Vec<f64>> {
        match self {
            ChainInit::Point(p) => Ok(p.coords().to_vec()),
            ChainInit::Random {
                distribution,
                shape,
            } => {
                let d = shape.dim();
                let coords = match *distribution {
                    InitDistribution::Normal { mean, std } => {
                        (0..d).map(|_| mean + std * standard_normal(rng)).collect()
                    }
                    InitDistribution::Uniform { low, high } => {
                        if !(low < high) {
                            return Err(Error::Config(format!(
                                "uniform init needs low < high, got [{low}, {high}]"
                            )));
                        }
                        (0..d).map(|_| rng.random_range(low..high)).collect()
                    }
                };
                Ok(coords)
            }
        }
    }
}

/// Everything needed to run one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub method: Method,
    /// Preference weights; required by ls-cEBM and rejected elsewhere.
    pub fixed_lambda: Option<SimplexWeights>,
    pub config: SamplerConfig,
    pub init: ChainInit,
}

impl ChainSpec {
    pub fn new(method: Method, config: SamplerConfig, init: ChainInit) -> Self {
        Self {
            method,
            fixed_lambda: None,
            config,
            init,
        }
    }

    pub fn with_lambda(mut self, lambda: SimplexWeights) -> Self {
        self.fixed_lambda = Some(lambda);
        self
    }

    fn validate(&self, objs: &ObjectiveSet) -> Result<()> {
        self.config.validate()?;
        match (&self.fixed_lambda, self.method) {
            (None, Method::LsCebm) => {
                return Err(Error::Config("ls_cebm requires fixed_lambda".into()))
            }
            (Some(l), Method::LsCebm) if l.len() != objs.len() => {
                return Err(Error::shape(format!("{} weights", objs.len()), l.len()))
            }
            (Some(_), m) if m != Method::LsCebm => {
                return Err(Error::Config(format!("{m} does not take fixed_lambda")))
            }
            _ => {}
        }
        if self.method == Method::Mgd && self.config.noise_kind != NoiseKind::None {
            return Err(Error::Config(format!(
                "mgd is noiseless; noise_kind must be none, got {}",
                self.config.noise_kind
            )));
        }
        let shape = self.init.shape();
        if shape != objs.shape() {
            return Err(Error::shape(objs.shape(), shape));
        }
        Ok(())
    }
}

fn expect_method(spec: &ChainSpec, method: Method) -> Result<()> {
    if spec.method != method {
        return Err(Error::Config(format!(
            "spec is tagged {} but was passed to the {method} sampler",
            spec.method
        )));
    }
    Ok(())
}

pub fn run_mgd(objs: &ObjectiveSet, spec: &ChainSpec) -> Result<Trajectory> {
    expect_method(spec, Method::Mgd)?;
    run_chain(objs, spec, 0)
}

pub fn run_cebm(objs: &ObjectiveSet, spec: &ChainSpec) -> Result<Trajectory> {
    expect_method(spec, Method::Cebm)?;
    run_chain(objs, spec, 0)
}

pub fn run_ls_cebm(objs: &ObjectiveSet, spec: &ChainSpec) -> Result<Trajectory> {
    expect_method(spec, Method::LsCebm)?;
    run_chain(objs, spec, 0)
}

pub fn run_pcebm(objs: &ObjectiveSet, spec: &ChainSpec) -> Result<Trajectory> {
    expect_method(spec, Method::Pcebm)?;
    run_chain(objs, spec, 0)
}

struct Drift {
    direction: Vec<f64>,
    weights: SimplexWeights,
    norm: f64,
}

fn weighted_sum(grads: &[Vec<f64>], weights: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![0.0; grads[0].len()];
    for (i, g) in grads.iter().enumerate() {
        match weights {
            Some(w) => {
                for (o, gi) in out.iter_mut().zip(g) {
                    *o += w[i] * gi;
                }
            }
            None => {
                for (o, gi) in out.iter_mut().zip(g) {
                    *o += gi;
                }
            }
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs one chain on random stream `stream` of `spec.config.seed`.
pub fn run_chain(objs: &ObjectiveSet, spec: &ChainSpec, stream: u64) -> Result<Trajectory> {
    spec.validate(objs)?;
    let cfg = &spec.config;
    let m = objs.len();
    let shape = objs.shape();
    let mut rng = chain_rng(cfg.seed, stream);
    let mut x = spec.init.draw(&mut rng)?;

    let (coefficient, noise_scale) = match spec.method {
        Method::Mgd => (cfg.eta, 0.0),
        Method::Pcebm => (cfg.eta, (2.0 * cfg.alpha()).sqrt()),
        Method::Cebm | Method::LsCebm => (cfg.eta / 2.0, cfg.sigma()),
    };
    let noisy = noise_scale > 0.0 && cfg.noise_kind != NoiseKind::None;
    let may_terminate = matches!(spec.method, Method::Mgd | Method::Pcebm) && !noisy;
    let uniform = SimplexWeights::uniform(m);

    let mut traj = Trajectory::default();
    for step in 0..=cfg.steps {
        let (values, grads) = objs.eval_all(&x);
        let objectives =
            ObjectiveVector::new(values).map_err(|_| Error::Diverged { step })?;
        let drift = match spec.method {
            Method::Mgd | Method::Pcebm => {
                let r = min_norm(&grads)?;
                Drift {
                    direction: r.direction,
                    weights: r.lambda,
                    norm: r.norm,
                }
            }
            Method::Cebm => {
                let direction = weighted_sum(&grads, None);
                Drift {
                    norm: norm(&direction),
                    direction,
                    weights: uniform.clone(),
                }
            }
            Method::LsCebm => {
                let lambda = spec.fixed_lambda.clone().expect("validated");
                let direction = weighted_sum(&grads, Some(lambda.values()));
                Drift {
                    norm: norm(&direction),
                    direction,
                    weights: lambda,
                }
            }
        };
        if !drift.norm.is_finite() {
            return Err(Error::Diverged { step });
        }

        let stop = may_terminate && drift.norm < cfg.grad_tol;
        if step % cfg.record_every == 0 || step == cfg.steps || stop {
            traj.records.push(TrajectoryRecord {
                step,
                point: DesignPoint::new(x.clone(), shape).map_err(|_| Error::Diverged { step })?,
                objectives,
                weights: drift.weights,
                grad_norm: drift.norm,
            });
        }
        if stop {
            traj.terminated_early = true;
            traj.termination_step = Some(step);
            break;
        }
        if step == cfg.steps {
            break;
        }

        for (xi, di) in x.iter_mut().zip(&drift.direction) {
            *xi -= coefficient * di;
        }
        if noisy {
            for xi in x.iter_mut() {
                *xi += noise_scale * unit_noise(&mut rng, cfg.noise_kind);
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step: step + 1 });
        }
    }
    Ok(traj)
}

/// A chain failure inside a population run.
#[derive(Debug)]
pub struct ChainFailure {
    pub index: usize,
    pub error: Error,
}

impl fmt::Display for ChainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chain {}: {}", self.index, self.error)
    }
}

/// Runs every spec as chain `i` on stream `i` of its seed. Results keep input order and do
/// not depend on `parallelism`.
pub fn run_population(
    objs: &ObjectiveSet,
    specs: &[ChainSpec],
    parallelism: usize,
) -> Vec<std::result::Result<Trajectory, ChainFailure>> {
    let run = |(index, spec): (usize, &ChainSpec)| {
        run_chain(objs, spec, index as u64).map_err(|error| ChainFailure { index, error })
    };
    if parallelism <= 1 {
        return specs.iter().enumerate().map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(|| specs.par_iter().enumerate().map(run).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running population serially");
            specs.iter().enumerate().map(run).collect()
        }
    }
}

/// Writes trajectories as CSV: `chain_id,step,<objective names>,lambda_1..m,grad_norm`.
pub fn write_trajectories<W: Write>(
    out: &mut W,
    names: &[String],
    chains: &[(usize, &Trajectory)],
) -> io::Result<()> {
    let mut header = vec!["chain_id".to_string(), "step".to_string()];
    header.extend(names.iter().cloned());
    header.extend((1..=names.len()).map(|i| format!("lambda_{i}")));
    header.push("grad_norm".into());
    writeln!(out, "{}", header.join(","))?;
    for (id, traj) in chains {
        for r in &traj.records {
            write!(out, "{id},{}", r.step)?;
            for v in r.objectives.values().iter().chain(r.weights.values()) {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", r.grad_norm)?;
        }
    }
    Ok(())
}
