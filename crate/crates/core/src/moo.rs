//! Pareto dominance, linear scalarization and the min-norm direction solvers behind MGD
//! and pcEBM.

use std::cmp::Ordering;
use std::sync::Arc;

use crate::domain::{DesignPoint, ObjectiveVector, Shape, SimplexWeights};
use crate::energy::{EnergyModel, ObjectiveSet};
use crate::error::{Error, Result};

/// Frank-Wolfe iteration cap used by [`mgd_direction`].
pub const FW_MAX_ITERS: usize = 100;
/// Frank-Wolfe tolerance on the duality gap of `|sum lambda_i g_i|^2`.
pub const FW_TOL: f64 = 1e-6;

/// Strict Pareto dominance for minimization: `a <= b` everywhere and `a < b` somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len()));
    }
    Ok(dominates_unchecked(a.values(), b.values()))
}

pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Indices (ascending) of the points not dominated by any other input point.
///
/// Points are visited in lexicographic order; a dominator always precedes what it
/// dominates, so each point only needs checking against the non-dominated archive built so
/// far.
pub fn pareto_filter(points: &[ObjectiveVector]) -> Result<Vec<usize>> {
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    let m = first.len();
    if let Some(bad) = points.iter().find(|p| p.len() != m) {
        return Err(Error::shape(m, bad.len()));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(points[i].values(), points[j].values()).then(i.cmp(&j)));
    let mut archive: Vec<usize> = Vec::new();
    for i in order {
        let p = points[i].values();
        if !archive
            .iter()
            .any(|&a| dominates_unchecked(points[a].values(), p))
        {
            archive.push(i);
        }
    }
    archive.sort_unstable();
    Ok(archive)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Weighted-sum composite `f_lambda = sum_i lambda_i f_i`.
#[derive(Debug, Clone)]
pub struct Scalarized {
    models: Vec<Arc<dyn EnergyModel>>,
    weights: SimplexWeights,
}

impl Scalarized {
    pub fn weights(&self) -> &SimplexWeights {
        &self.weights
    }
}

impl EnergyModel for Scalarized {
    fn shape(&self) -> Shape {
        self.models[0].shape()
    }

    fn energy_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; x.len()];
        for (model, &w) in self.models.iter().zip(self.weights.values()) {
            let (v, g) = model.energy_and_grad(x);
            value += w * v;
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += w * gi;
            }
        }
        (value, grad)
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.models
            .iter()
            .zip(self.weights.values())
            .map(|(m, w)| w * m.energy(x))
            .sum()
    }
}

pub fn scalarize(objs: &ObjectiveSet, lambda: &SimplexWeights) -> Result<Scalarized> {
    if lambda.len() != objs.len() {
        return Err(Error::shape(
            format!("{} weights", objs.len()),
            lambda.len(),
        ));
    }
    Ok(Scalarized {
        models: objs.models().to_vec(),
        weights: lambda.clone(),
    })
}

/// Per-objective gradients at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    grads: Vec<Vec<f64>>,
}

impl GradientBundle {
    pub fn new(grads: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = grads.first() else {
            return Err(Error::Empty("gradient bundle"));
        };
        let d = first.len();
        if let Some(bad) = grads.iter().find(|g| g.len() != d) {
            return Err(Error::shape(d, bad.len()));
        }
        Ok(Self { grads })
    }

    pub fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.grads[0].len()
    }
}

/// Solution of `min_{lambda in simplex} |sum_i lambda_i g_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinNormResult {
    pub lambda: SimplexWeights,
    /// `sum_i lambda_i g_i`.
    pub direction: Vec<f64>,
    pub norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(grads: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grads[0].len()];
    for (g, &l) in grads.iter().zip(lambda) {
        for (o, gi) in out.iter_mut().zip(g) {
            *o += l * gi;
        }
    }
    out
}

fn finish(grads: &[Vec<f64>], lambda: Vec<f64>, converged: bool, iterations: usize) -> MinNormResult {
    let lambda = SimplexWeights::from_solver(lambda);
    let direction = combine(grads, lambda.values());
    let norm = dot(&direction, &direction).sqrt();
    MinNormResult {
        lambda,
        direction,
        norm,
        converged,
        iterations,
    }
}

/// Weight on `v1` of the min-norm point of the segment `[v1, v2]`, from inner products.
fn segment_weight(v1v1: f64, v1v2: f64, v2v2: f64) -> f64 {
    let denom = v1v1 - 2.0 * v1v2 + v2v2;
    if denom <= 0.0 {
        return 0.5;
    }
    ((v2v2 - v1v2) / denom).clamp(0.0, 1.0)
}

/// Closed-form min-norm point of the segment between two gradients.
pub fn min_norm_2(g1: &[f64], g2: &[f64]) -> Result<MinNormResult> {
    if g1.len() != g2.len() {
        return Err(Error::shape(g1.len(), g2.len()));
    }
    let l1 = if g1 == g2 {
        0.5
    } else {
        segment_weight(dot(g1, g1), dot(g1, g2), dot(g2, g2))
    };
    let grads = [g1.to_vec(), g2.to_vec()];
    Ok(finish(&grads, vec![l1, 1.0 - l1], true, 0))
}

/// Frank-Wolfe on the simplex for `m >= 2` gradients, with exact line search and away
/// steps.
///
/// Each iteration compares the classic toward-vertex step (vertex minimizing `<g, g_i>`)
/// with an away step from the active vertex maximizing `<g, g_i>` and takes the one with
/// the larger gap. Away steps let weight leave a vertex entirely, which keeps convergence
/// linear when the solution lies on a face of the simplex. Stops once the duality gap
/// `2 (|g|^2 - min_i <g, g_i>)` drops to `tol`, which bounds the remaining decrease of
/// `|g|^2`.
pub fn min_norm_fw(bundle: &GradientBundle, max_iters: usize, tol: f64) -> Result<MinNormResult> {
    let m = bundle.len();
    if m < 2 {
        return Err(Error::Config(format!(
            "Frank-Wolfe min-norm needs m >= 2 gradients, got {m}"
        )));
    }
    let grads = bundle.grads();
    let gram: Vec<Vec<f64>> = grads
        .iter()
        .map(|a| grads.iter().map(|b| dot(a, b)).collect())
        .collect();
    let mut lambda = vec![1.0 / m as f64; m];
    let mut converged = false;
    let mut iterations = 0;
    loop {
        // <g, g_i> for every vertex, and |g|^2
        let inner: Vec<f64> = gram.iter().map(|row| dot(row, &lambda)).collect();
        let sq_norm = dot(&lambda, &inner);
        let mut toward = 0;
        for i in 1..m {
            if inner[i] < inner[toward] {
                toward = i;
            }
        }
        let fw_gap = sq_norm - inner[toward];
        if 2.0 * fw_gap <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }
        let away = (0..m)
            .filter(|&j| lambda[j] > 0.0)
            .max_by(|&a, &b| inner[a].total_cmp(&inner[b]).then(b.cmp(&a)))
            .expect("simplex has an active vertex");
        let away_gap = inner[away] - sq_norm;

        if fw_gap >= away_gap {
            let keep = segment_weight(sq_norm, inner[toward], gram[toward][toward]);
            for l in lambda.iter_mut() {
                *l *= keep;
            }
            lambda[toward] += 1.0 - keep;
        } else {
            // lambda <- lambda + gamma (lambda - e_away), gamma in [0, l_a / (1 - l_a)]
            let la = lambda[away];
            let max_gamma = if la < 1.0 { la / (1.0 - la) } else { f64::INFINITY };
            let curvature = sq_norm - 2.0 * inner[away] + gram[away][away];
            let gamma = if curvature > 0.0 {
                (away_gap / curvature).min(max_gamma)
            } else {
                max_gamma
            };
            if !gamma.is_finite() {
                break;
            }
            for l in lambda.iter_mut() {
                *l *= 1.0 + gamma;
            }
            if gamma >= max_gamma {
                lambda[away] = 0.0;
            } else {
                lambda[away] -= gamma;
            }
        }
        iterations += 1;
    }
    Ok(finish(grads, lambda, converged, iterations))
}

/// Min-norm direction for any `m >= 1` gradients: the plain gradient for one objective,
/// the closed form for two, Frank-Wolfe beyond.
pub fn min_norm(grads: &[Vec<f64>]) -> Result<MinNormResult> {
    match grads.len() {
        0 => Err(Error::Empty("gradient bundle")),
        1 => Ok(finish(grads, vec![1.0], true, 0)),
        2 => min_norm_2(&grads[0], &grads[1]),
        _ => min_norm_fw(&GradientBundle::new(grads.to_vec())?, FW_MAX_ITERS, FW_TOL),
    }
}

/// MGD common-descent direction at `p`.
pub fn mgd_direction(objs: &ObjectiveSet, p: &DesignPoint) -> Result<MinNormResult> {
    objs.check_point(p)?;
    let (_, grads) = objs.eval_all(p.coords());
    min_norm(&grads)
}
