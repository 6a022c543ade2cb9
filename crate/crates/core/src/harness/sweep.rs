//! Grid sweeps over (method, eta, k, noise) cells.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! cells/<cell>/trajectories.csv   chain_id, step, objectives, lambdas, grad_norm
//! cells/<cell>/final_points.csv   chain_id, objectives, design coordinates
//! cells/<cell>/failures.csv       chain_id, kind, message
//! cells/<cell>/report.json        metric report
//! cells/<cell>/front.csv          normalized objectives, label, non-dominated flag
//! fronts.csv                      every cell's normalized final points
//! hv_table.csv                    one row per cell
//! summary.json                    sweep-level summary and failure records
//! ```
//!
//! Chains are written into a private `.tmp-<cell>` directory that is renamed into place once
//! complete, so a cell directory on disk is always whole and is skipped on rerun. Metrics
//! are then recomputed from the files on disk with one normalization pooled over all cells.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::domain::{decode, DesignPoint, DiscreteSequence, NoiseKind, ObjectiveVector, SamplerConfig, SimplexWeights};
use crate::error::{Error, Result};
use crate::metrics::{
    hypervolume, normalize, project, summarize_edist, MetricReport, NormalizationMap, PairHypervolume,
    ReferencePoint,
};
use crate::samplers::{run_population, write_trajectories, ChainInit, ChainSpec, Method};

use super::config::ExperimentConfig;
use super::io::{emit_front, fmt_f64, read_sequences, render_front, write_atomic};
use super::registry::{Problem, ProblemRegistry};

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub eta: f64,
    pub steps: usize,
    pub noise_kind: NoiseKind,
}

impl Cell {
    /// Directory name, e.g. `pcebm_eta0.01_k400_gaussian`.
    pub fn name(&self) -> String {
        format!(
            "{}_eta{}_k{}_{}",
            self.method,
            fmt_f64(self.eta),
            self.steps,
            self.noise_kind
        )
    }
}

/// Cells in output order: method, noise kind, eta, k. MGD is noiseless and appears once
/// per (eta, k) with noise kind `none`.
pub fn grid(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells: Vec<Cell> = Vec::new();
    for &method in &cfg.methods {
        let noises: Vec<NoiseKind> = if method == Method::Mgd {
            vec![NoiseKind::None]
        } else {
            cfg.noise_kinds.clone()
        };
        for noise_kind in noises {
            for &eta in &cfg.etas {
                for &steps in &cfg.steps {
                    let cell = Cell {
                        method,
                        eta,
                        steps,
                        noise_kind,
                    };
                    if !cells.iter().any(|c| c.name() == cell.name()) {
                        cells.push(cell);
                    }
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: String,
    pub method: String,
    pub eta: f64,
    pub steps: usize,
    pub noise_kind: String,
    /// `ok` or `failed`.
    pub status: String,
    pub hv_all: Option<f64>,
    pub chains_ok: usize,
    pub failed_chains: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub problem: String,
    pub objectives: Vec<String>,
    pub known_front: Option<String>,
    pub seed: u64,
    pub chains: usize,
    pub reference_point: Vec<f64>,
    pub normalization_policy: String,
    pub normalization: Option<NormalizationMap>,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub output_dir: PathBuf,
    pub summary: SweepSummary,
    /// Metric reports of the successful cells, in grid order.
    pub reports: Vec<MetricReport>,
    /// Cells computed by this run (the rest were found on disk).
    pub computed: Vec<String>,
}

fn resolve_workers(workers: usize) -> usize {
    if workers > 0 {
        workers
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

pub(crate) fn sampler_config(cfg: &ExperimentConfig, eta: f64, steps: usize, noise: NoiseKind) -> SamplerConfig {
    let mut sc = SamplerConfig::new(eta, steps, noise, cfg.seed);
    if let Some(a) = cfg.sampler.alpha {
        sc = sc.with_alpha(a);
    }
    if let Some(s) = cfg.sampler.sigma {
        sc = sc.with_sigma(s);
    }
    if let Some(r) = cfg.sampler.record_every {
        sc = sc.with_record_every(r);
    }
    if let Some(t) = cfg.sampler.grad_tol {
        sc = sc.with_grad_tol(t);
    }
    sc
}

pub(crate) fn ls_lambda(cfg: &ExperimentConfig, m: usize) -> Result<SimplexWeights> {
    match &cfg.sampler.ls_lambda {
        Some(l) if l.len() != m => Err(Error::shape(format!("ls_lambda of length {m}"), l.len())),
        Some(l) => SimplexWeights::new(l.clone()),
        None => Ok(SimplexWeights::uniform(m)),
    }
}

fn clean_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Runs every chain of one cell and writes its raw files into `dir`.
fn run_cell(cfg: &ExperimentConfig, problem: &Problem, cell: &Cell, workers: usize, dir: &Path) -> Result<()> {
    let objs = &problem.objectives;
    let config = sampler_config(cfg, cell.eta, cell.steps, cell.noise_kind);
    let init = ChainInit::Random {
        distribution: cfg.init,
        shape: objs.shape(),
    };
    let mut spec = ChainSpec::new(cell.method, config, init);
    if cell.method == Method::LsCebm {
        spec = spec.with_lambda(ls_lambda(cfg, objs.len())?);
    }
    let specs = vec![spec; cfg.chains];
    let results = run_population(objs, &specs, workers);

    let io = |path: &Path, e: std::io::Error| Error::io(path, e);
    let mut ok = Vec::new();
    let mut failures = String::from("chain_id,kind,message\n");
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(t) => ok.push((i, t)),
            Err(f) => {
                if i == 0 && matches!(f.error, Error::Config(_) | Error::Shape { .. }) {
                    // a spec-level problem fails every chain alike
                    return Err(Error::Config(format!("cell {}: {}", cell.name(), f.error)));
                }
                failures.push_str(&format!("{i},{},{}\n", f.error.kind(), clean_field(&f.error.to_string())));
            }
        }
    }

    let path = dir.join("trajectories.csv");
    let mut buf = Vec::new();
    write_trajectories(&mut buf, objs.names(), &ok).map_err(|e| io(&path, e))?;
    fs::write(&path, buf).map_err(|e| io(&path, e))?;

    let d = objs.shape().dim();
    let mut header = vec!["chain_id".to_string()];
    header.extend(objs.names().iter().cloned());
    header.extend((1..=d).map(|i| format!("x_{i}")));
    let mut finals = header.join(",");
    finals.push('\n');
    for (i, t) in &ok {
        let last = t.last().ok_or(Error::Empty("trajectory"))?;
        finals.push_str(&i.to_string());
        for v in last.objectives.values().iter().chain(last.point.coords()) {
            finals.push(',');
            finals.push_str(&fmt_f64(*v));
        }
        finals.push('\n');
    }
    let path = dir.join("final_points.csv");
    fs::write(&path, finals).map_err(|e| io(&path, e))?;
    let path = dir.join("failures.csv");
    fs::write(&path, failures).map_err(|e| io(&path, e))?;
    Ok(())
}

struct CellData {
    points: Vec<ObjectiveVector>,
    coords: Vec<Vec<f64>>,
    failed: usize,
}

fn parse_err(path: &Path, line: usize, message: impl ToString) -> Error {
    Error::Parse {
        location: format!("{}:{line}", path.display()),
        message: message.to_string(),
    }
}

fn read_cell(dir: &Path, m: usize, d: usize) -> Result<CellData> {
    let path = dir.join("final_points.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut points = Vec::new();
    let mut coords = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let values = line
            .split(',')
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(&path, i + 1, e)))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != m + d {
            return Err(parse_err(&path, i + 1, format!("expected {} values, found {}", m + d, values.len())));
        }
        points.push(ObjectiveVector::new(values[..m].to_vec()).map_err(|e| parse_err(&path, i + 1, e))?);
        coords.push(values[m..].to_vec());
    }
    let path = dir.join("failures.csv");
    let failed = fs::read_to_string(&path)
        .map_err(|e| Error::io(&path, e))?
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .count();
    Ok(CellData { points, coords, failed })
}

fn load_training(cfg: &ExperimentConfig, problem: &Problem) -> Result<Option<Vec<DiscreteSequence>>> {
    let Some(spec) = &cfg.problem else {
        return Ok(None);
    };
    if spec.training_sets.is_empty() {
        return Ok(None);
    }
    let alphabet = cfg.alphabet()?;
    let mut all = Vec::new();
    for p in &spec.training_sets {
        all.extend(read_sequences(p, &alphabet)?);
    }
    if let Some(s) = all.first() {
        let shape = problem.shape();
        let expected = crate::domain::Shape::Sequence {
            len: s.len(),
            alphabet: s.alphabet_size(),
        };
        if shape != expected {
            return Err(Error::shape(shape, expected));
        }
    }
    Ok(Some(all))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Runs (or resumes) a sweep and writes its report bundle.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    let spec = cfg.validate_sweep()?;
    cfg.check_paths()?;
    let problem = ProblemRegistry::build(spec)?;
    let objs = &problem.objectives;
    let m = objs.len();
    let d = objs.shape().dim();
    let reference = match &cfg.metrics.reference_point {
        Some(r) if r.len() != m => return Err(Error::shape(format!("reference point of length {m}"), r.len())),
        Some(r) => ReferencePoint::new(r.clone())?,
        None => ReferencePoint::ones(m),
    };
    if cfg.methods.contains(&Method::LsCebm) {
        ls_lambda(cfg, m)?;
    }
    let training = load_training(cfg, &problem)?;

    let out = &cfg.output_dir;
    let cells_dir = out.join("cells");
    fs::create_dir_all(&cells_dir).map_err(|e| Error::io(&cells_dir, e))?;
    let workers = resolve_workers(cfg.workers);
    let cells = grid(cfg);

    let mut computed = Vec::new();
    let mut errors: Vec<Option<String>> = vec![None; cells.len()];
    for (ci, cell) in cells.iter().enumerate() {
        let name = cell.name();
        let final_dir = cells_dir.join(&name);
        if final_dir.join("final_points.csv").is_file() {
            log::info!("cell {name}: on disk, skipped");
            continue;
        }
        let tmp = cells_dir.join(format!(".tmp-{name}"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        }
        fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        log::info!("cell {name}: running {} chains", cfg.chains);
        match run_cell(cfg, &problem, cell, workers, &tmp) {
            Ok(()) => {
                if final_dir.exists() {
                    fs::remove_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
                }
                fs::rename(&tmp, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
                computed.push(name);
            }
            Err(e) => {
                log::error!("cell {name} failed: {e}");
                let _ = fs::remove_dir_all(&tmp);
                errors[ci] = Some(e.to_string());
            }
        }
    }

    // aggregation, single-threaded, from disk
    let mut data: Vec<Option<CellData>> = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        if errors[ci].is_some() {
            data.push(None);
            continue;
        }
        match read_cell(&cells_dir.join(cell.name()), m, d) {
            Ok(c) => data.push(Some(c)),
            Err(e) => {
                log::error!("cell {}: unreadable: {e}", cell.name());
                errors[ci] = Some(e.to_string());
                data.push(None);
            }
        }
    }
    let pooled: Vec<ObjectiveVector> = data
        .iter()
        .flatten()
        .flat_map(|c| c.points.iter().cloned())
        .collect();
    let map = if pooled.is_empty() {
        None
    } else {
        Some(NormalizationMap::from_population(&pooled)?)
    };

    let pairs: Vec<[usize; 2]> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| [i, j]))
        .collect();
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    let mut all_points = Vec::new();
    let mut all_labels = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        let name = cell.name();
        let base = CellSummary {
            cell: name.clone(),
            method: cell.method.to_string(),
            eta: cell.eta,
            steps: cell.steps,
            noise_kind: cell.noise_kind.to_string(),
            status: "failed".into(),
            hv_all: None,
            chains_ok: 0,
            failed_chains: 0,
            error: errors[ci].clone(),
        };
        let Some(c) = &data[ci] else {
            summaries.push(base);
            continue;
        };
        if c.points.is_empty() {
            summaries.push(CellSummary {
                failed_chains: c.failed,
                error: Some(format!("all {} chains failed", c.failed)),
                ..base
            });
            continue;
        }
        let map = map.as_ref().expect("pooled population is non-empty");
        let normalized = normalize(&c.points, map)?;
        let hv_all = hypervolume(&normalized, &reference, cfg.metrics.mc_samples, cfg.seed)?;
        let hv_pairwise = if m > 2 {
            pairs
                .iter()
                .map(|&[i, j]| {
                    let proj = project(&normalized, &[i, j])?;
                    Ok(PairHypervolume {
                        objectives: [objs.names()[i].clone(), objs.names()[j].clone()],
                        hv: hypervolume(&proj, &reference.project(&[i, j]), cfg.metrics.mc_samples, cfg.seed)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else if m == 2 {
            vec![PairHypervolume {
                objectives: [objs.names()[0].clone(), objs.names()[1].clone()],
                hv: hv_all,
            }]
        } else {
            Vec::new()
        };
        let (edist_mean, edist_std) = match (&training, c.coords.is_empty()) {
            (Some(train), false) => {
                let samples = c
                    .coords
                    .iter()
                    .map(|x| decode(&DesignPoint::new(x.clone(), objs.shape())?))
                    .collect::<Result<Vec<_>>>()?;
                let (mean, std) = summarize_edist(&samples, train)?;
                (Some(mean), Some(std))
            }
            _ => (None, None),
        };
        let report = MetricReport {
            method: cell.method.to_string(),
            eta: cell.eta,
            steps: cell.steps,
            noise_kind: cell.noise_kind.to_string(),
            seed: cfg.seed,
            chains: cfg.chains,
            failed_chains: c.failed,
            hv_all,
            hv_pairwise,
            edist_mean,
            edist_std,
            reference_point: reference.values().to_vec(),
            normalization: map.clone(),
            normalization_policy: cfg.metrics.normalization.as_str().into(),
        };
        let dir = cells_dir.join(&name);
        write_atomic(&dir.join("report.json"), &to_json(&report)?)?;
        let labels = vec![cell.method.to_string(); normalized.len()];
        emit_front(&normalized, &labels, objs.names(), dir.join("front.csv"))?;
        all_labels.extend(std::iter::repeat_n(name.clone(), normalized.len()));
        all_points.extend(normalized);
        summaries.push(CellSummary {
            status: "ok".into(),
            hv_all: Some(hv_all),
            chains_ok: c.points.len(),
            failed_chains: c.failed,
            ..base
        });
        reports.push(report);
    }

    let fronts = render_front(&all_points, &all_labels, objs.names())?;
    write_atomic(&out.join("fronts.csv"), fronts.as_bytes())?;

    let mut table = Vec::new();
    let _ = writeln!(table, "cell,method,noise_kind,eta,steps,hv_all,chains_ok,failed_chains,status");
    for s in &summaries {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{},{}",
            s.cell,
            s.method,
            s.noise_kind,
            fmt_f64(s.eta),
            s.steps,
            s.hv_all.map(fmt_f64).unwrap_or_default(),
            s.chains_ok,
            s.failed_chains,
            s.status
        );
    }
    write_atomic(&out.join("hv_table.csv"), &table)?;

    let summary = SweepSummary {
        problem: problem.id.clone(),
        objectives: objs.names().to_vec(),
        known_front: problem.known_front().map(str::to_string),
        seed: cfg.seed,
        chains: cfg.chains,
        reference_point: reference.values().to_vec(),
        normalization_policy: cfg.metrics.normalization.as_str().into(),
        normalization: map,
        cells: summaries,
    };
    write_atomic(&out.join("summary.json"), &to_json(&summary)?)?;
    Ok(SweepOutcome {
        output_dir: out.clone(),
        summary,
        reports,
        computed,
    })
}
