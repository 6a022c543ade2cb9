//! Evaluation metrics: normalization, hypervolume, edit distance and convergence traces.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DiscreteSequence, ObjectiveVector, Trajectory};
use crate::error::{Error, Result};
use crate::moo::dominates_unchecked;
use crate::rng::chain_rng;

/// Upper corner of the hypervolume box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ReferencePoint(Vec<f64>);

impl ReferencePoint {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::Empty("reference point"));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reference point".into()));
        }
        Ok(Self(r))
    }

    /// `(1, ..., 1)`, the natural reference for min-max normalized objectives.
    pub fn ones(m: usize) -> Self {
        Self(vec![1.0; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Restriction to a subset of objectives.
    pub fn project(&self, axes: &[usize]) -> Self {
        Self(axes.iter().map(|&i| self.0[i]).collect())
    }
}

impl TryFrom<Vec<f64>> for ReferencePoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ReferencePoint> for Vec<f64> {
    fn from(r: ReferencePoint) -> Self {
        r.0
    }
}

/// Per-objective `(min, max)` bounds of a reference population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationMap {
    pub bounds: Vec<(f64, f64)>,
}

impl NormalizationMap {
    pub fn from_population(points: &[ObjectiveVector]) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("normalization population"))?;
        let m = first.len();
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
        for p in points {
            if p.len() != m {
                return Err(Error::shape(m, p.len()));
            }
            for (b, &v) in bounds.iter_mut().zip(p.values()) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        Ok(Self { bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    /// Objectives whose bounds collapse (`max <= min`); these map to 0.5.
    pub fn degenerate(&self) -> Vec<usize> {
        (0..self.bounds.len())
            .filter(|&i| !(self.bounds[i].1 > self.bounds[i].0))
            .collect()
    }
}

/// Maps each objective to `clip((v - min) / (max - min), 0, 1)`.
pub fn normalize(points: &[ObjectiveVector], map: &NormalizationMap) -> Result<Vec<ObjectiveVector>> {
    points
        .iter()
        .map(|p| {
            if p.len() != map.len() {
                return Err(Error::shape(map.len(), p.len()));
            }
            let values = p
                .values()
                .iter()
                .zip(&map.bounds)
                .map(|(&v, &(lo, hi))| {
                    if hi > lo {
                        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                    } else {
                        0.5
                    }
                })
                .collect();
            ObjectiveVector::new(values)
        })
        .collect()
}

fn clipped(points: &[ObjectiveVector], r: &ReferencePoint) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .map(|p| {
            if p.len() != r.len() {
                return Err(Error::shape(r.len(), p.len()));
            }
            Ok(p.values().iter().zip(r.values()).map(|(v, ri)| v.min(*ri)).collect())
        })
        .collect()
}

/// Drops dominated points and duplicates, keeping input order, so that the sweeps below
/// give exactly the same sum for any set with the same front.
fn non_dominated(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut keep: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let beaten = points.iter().enumerate().any(|(j, q)| {
            dominates_unchecked(q, p) || (j < i && q == p)
        });
        if !beaten {
            keep.push(p.clone());
        }
    }
    keep
}

/// Area dominated by 2-D points inside the box bounded by `(rx, ry)`.
fn hv2(points: &mut [[f64; 2]], rx: f64, ry: f64) -> f64 {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut floor = ry;
    for p in points.iter() {
        if p[1] < floor {
            area += (rx - p[0]) * (floor - p[1]);
            floor = p[1];
        }
    }
    area
}

/// Exact hypervolume for `m <= 3`. Points beyond the reference are clipped onto it.
pub fn hypervolume_exact(points: &[ObjectiveVector], r: &ReferencePoint) -> Result<f64> {
    let m = r.len();
    if m > 3 {
        return Err(Error::Config(format!(
            "exact hypervolume supports m <= 3 (got {m}); use hypervolume_mc"
        )));
    }
    let pts = non_dominated(clipped(points, r)?);
    if pts.is_empty() {
        return Ok(0.0);
    }
    let rv = r.values();
    let hv = match m {
        1 => rv[0] - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => {
            let mut flat: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
            hv2(&mut flat, rv[0], rv[1])
        }
        _ => {
            // sweep along the third objective, integrating 2-D slices
            let mut by_z = pts;
            by_z.sort_by(|a, b| a[2].total_cmp(&b[2]));
            let mut slice: Vec<[f64; 2]> = Vec::with_capacity(by_z.len());
            let mut volume = 0.0;
            for i in 0..by_z.len() {
                slice.push([by_z[i][0], by_z[i][1]]);
                let top = by_z.get(i + 1).map_or(rv[2], |p| p[2]);
                let height = top - by_z[i][2];
                if height > 0.0 {
                    volume += hv2(&mut slice, rv[0], rv[1]) * height;
                }
            }
            volume
        }
    };
    Ok(hv.max(0.0))
}

const MC_CHUNK: usize = 1 << 15;

/// Monte-Carlo hypervolume over the box `[min of points, r]`; returns
/// `(estimate, standard error)`.
pub fn hypervolume_mc(
    points: &[ObjectiveVector],
    r: &ReferencePoint,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::Config("Monte-Carlo hypervolume needs samples >= 1".into()));
    }
    let pts = clipped(points, r)?;
    if pts.is_empty() {
        return Ok((0.0, 0.0));
    }
    let front = non_dominated(pts);
    let m = r.len();
    let rv = r.values();
    let lo: Vec<f64> = (0..m)
        .map(|i| front.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let volume: f64 = lo.iter().zip(rv).map(|(l, h)| h - l).product();
    if !(volume > 0.0) {
        return Ok((0.0, 0.0));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut rng = chain_rng(seed, c as u64);
            let mut q = vec![0.0; m];
            let mut hits = 0usize;
            for _ in 0..n {
                for i in 0..m {
                    q[i] = lo[i] + (rv[i] - lo[i]) * rng.random::<f64>();
                }
                if front.iter().any(|p| p.iter().zip(&q).all(|(a, b)| a <= b)) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let frac = hits as f64 / samples as f64;
    let se = volume * (frac * (1.0 - frac) / samples as f64).sqrt();
    Ok((volume * frac, se))
}

/// Exact hypervolume for `m <= 3`, Monte-Carlo (`mc_samples`, `seed`) above.
pub fn hypervolume(
    points: &[ObjectiveVector],
    r: &ReferencePoint,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    if r.len() <= 3 {
        hypervolume_exact(points, r)
    } else {
        hypervolume_mc(points, r, mc_samples, seed).map(|(v, _)| v)
    }
}

/// Projects objective vectors onto the given axes.
pub fn project(points: &[ObjectiveVector], axes: &[usize]) -> Result<Vec<ObjectiveVector>> {
    points
        .iter()
        .map(|p| {
            if let Some(&bad) = axes.iter().find(|&&a| a >= p.len()) {
                return Err(Error::shape(format!("axis < {}", p.len()), bad));
            }
            ObjectiveVector::new(axes.iter().map(|&a| p.values()[a]).collect())
        })
        .collect()
}

/// Levenshtein distance with unit insertion, deletion and substitution costs.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn edit_distance(a: &DiscreteSequence, b: &DiscreteSequence) -> usize {
    levenshtein(a.tokens(), b.tokens())
}

/// Smallest edit distance from `x` to the set, with the lowest index among ties.
pub fn min_edit_to_set(x: &DiscreteSequence, training: &[DiscreteSequence]) -> Result<(usize, usize)> {
    if training.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let best = training
        .par_iter()
        .enumerate()
        .map(|(i, t)| (edit_distance(x, t), i))
        .min()
        .expect("non-empty");
    Ok(best)
}

/// Mean and population standard deviation of per-sample [`min_edit_to_set`].
pub fn summarize_edist(samples: &[DiscreteSequence], training: &[DiscreteSequence]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let dists = samples
        .iter()
        .map(|s| min_edit_to_set(s, training).map(|(d, _)| d as f64))
        .collect::<Result<Vec<_>>>()?;
    let n = dists.len() as f64;
    let mean = dists.iter().sum::<f64>() / n;
    let var = dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Recorded values of one objective along a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSeries {
    pub steps: Vec<usize>,
    pub values: Vec<f64>,
    /// First recorded step from which every later value stays within
    /// `eps * |final|` of the final value.
    pub steps_to_eps: usize,
}

pub const DEFAULT_CONVERGENCE_EPS: f64 = 0.05;

pub fn convergence_stats(t: &Trajectory, eps: f64) -> Result<Vec<ObjectiveSeries>> {
    let m = t.num_objectives().ok_or(Error::Empty("trajectory"))?;
    if !(eps >= 0.0) {
        return Err(Error::Config(format!("eps must be >= 0, got {eps}")));
    }
    let steps: Vec<usize> = t.records.iter().map(|r| r.step).collect();
    (0..m)
        .map(|i| {
            let values: Vec<f64> = t
                .records
                .iter()
                .map(|r| {
                    r.objectives
                        .values()
                        .get(i)
                        .copied()
                        .ok_or_else(|| Error::shape(m, r.objectives.len()))
                })
                .collect::<Result<_>>()?;
            let last = *values.last().expect("non-empty");
            let band = eps * last.abs();
            let mut first = values.len() - 1;
            while first > 0 && (values[first - 1] - last).abs() <= band {
                first -= 1;
            }
            Ok(ObjectiveSeries {
                steps_to_eps: steps[first],
                steps: steps.clone(),
                values,
            })
        })
        .collect()
}

/// Hypervolume of one objective pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairHypervolume {
    pub objectives: [String; 2],
    pub hv: f64,
}

/// Machine-readable metrics for one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub eta: f64,
    pub steps: usize,
    pub noise_kind: String,
    pub seed: u64,
    pub chains: usize,
    pub failed_chains: usize,
    pub hv_all: f64,
    pub hv_pairwise: Vec<PairHypervolume>,
    pub edist_mean: Option<f64>,
    pub edist_std: Option<f64>,
    pub reference_point: Vec<f64>,
    pub normalization: NormalizationMap,
    pub normalization_policy: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DesignPoint, SimplexWeights, TrajectoryRecord};
    use crate::moo::pareto_filter;
    use proptest::prelude::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    fn seq(tokens: &[usize]) -> DiscreteSequence {
        DiscreteSequence::new(tokens.to_vec(), 26).unwrap()
    }

    fn letters(s: &str) -> DiscreteSequence {
        seq(&s.bytes().map(|b| (b - b'a') as usize).collect::<Vec<_>>())
    }

    fn dp_oracle(a: &[usize], b: &[usize]) -> usize {
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in t.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            t[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                t[i][j] = (t[i - 1][j] + 1)
                    .min(t[i][j - 1] + 1)
                    .min(t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]));
            }
        }
        t[a.len()][b.len()]
    }

    #[test]
    fn normalize_examples() {
        let map = NormalizationMap {
            bounds: vec![(1.0, 3.0), (2.0, 2.0)],
        };
        let out = normalize(&[ov(&[1.0, 5.0]), ov(&[3.0, 2.0]), ov(&[4.0, -1.0])], &map).unwrap();
        assert_eq!(out[0].values(), &[0.0, 0.5]);
        assert_eq!(out[1].values(), &[1.0, 0.5]);
        assert_eq!(out[2].values(), &[1.0, 0.5]);
        assert_eq!(map.degenerate(), vec![1]);
        assert!(normalize(&[ov(&[1.0])], &map).is_err());
    }

    #[test]
    fn normalization_map_from_population() {
        let map = NormalizationMap::from_population(&[ov(&[1.0, 4.0]), ov(&[-2.0, 5.0])]).unwrap();
        assert_eq!(map.bounds, vec![(-2.0, 1.0), (4.0, 5.0)]);
        assert!(NormalizationMap::from_population(&[]).is_err());
    }

    #[test]
    fn exact_hv_examples() {
        let r = ReferencePoint::ones(2);
        assert_eq!(hypervolume_exact(&[ov(&[1.0, 1.0])], &r).unwrap(), 0.0);
        assert_eq!(hypervolume_exact(&[ov(&[0.5, 0.5])], &r).unwrap(), 0.25);
        let two = hypervolume_exact(&[ov(&[0.2, 0.8]), ov(&[0.8, 0.2])], &r).unwrap();
        assert!((two - 0.28).abs() < 1e-12);
        assert_eq!(hypervolume_exact(&[], &r).unwrap(), 0.0);
        assert_eq!(
            hypervolume_exact(&[ov(&[0.25])], &ReferencePoint::ones(1)).unwrap(),
            0.75
        );
        assert!(hypervolume_exact(&[ov(&[0.0; 4])], &ReferencePoint::ones(4)).is_err());
    }

    #[test]
    fn exact_hv_3d_inclusion_exclusion() {
        // two boxes [0.5,1]^3-ish: 0.125 + 0.125 - overlap
        let r = ReferencePoint::ones(3);
        let a = ov(&[0.5, 0.5, 0.5]);
        let b = ov(&[0.0, 0.75, 0.75]);
        let va = 0.125;
        let vb = 1.0 * 0.25 * 0.25;
        let overlap = 0.5 * 0.25 * 0.25;
        let hv = hypervolume_exact(&[a, b], &r).unwrap();
        assert!((hv - (va + vb - overlap)).abs() < 1e-12);
    }

    #[test]
    fn points_beyond_reference_are_clipped() {
        let r = ReferencePoint::ones(2);
        let hv = hypervolume_exact(&[ov(&[0.5, 3.0]), ov(&[0.5, 0.5])], &r).unwrap();
        assert_eq!(hv, 0.25);
    }

    #[test]
    fn mc_hv_examples() {
        let r = ReferencePoint::ones(3);
        assert_eq!(
            hypervolume_mc(&[ov(&[0.0, 0.0, 0.0])], &r, 1_000_000, 1).unwrap(),
            (1.0, 0.0)
        );
        assert_eq!(hypervolume_mc(&[], &r, 10, 1).unwrap(), (0.0, 0.0));
        assert_eq!(hypervolume_mc(&[ov(&[1.0, 0.0, 0.0])], &r, 10, 1).unwrap(), (0.0, 0.0));
        let pts = [ov(&[0.2, 0.8]), ov(&[0.8, 0.2])];
        let (est, se) = hypervolume_mc(&pts, &ReferencePoint::ones(2), 200_000, 3).unwrap();
        assert!((est - 0.28).abs() <= 3.0 * se, "{est} +- {se}");
    }

    #[test]
    fn mc_hv_is_seed_deterministic() {
        let pts = [ov(&[0.1, 0.5, 0.7]), ov(&[0.6, 0.2, 0.3])];
        let r = ReferencePoint::ones(3);
        assert_eq!(
            hypervolume_mc(&pts, &r, 100_000, 9).unwrap(),
            hypervolume_mc(&pts, &r, 100_000, 9).unwrap()
        );
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance(&letters("abc"), &letters("abc")), 0);
        assert_eq!(levenshtein::<usize>(&[], &[1, 2]), 2);
        assert_eq!(edit_distance(&letters("kitten"), &letters("sitting")), 3);
        assert_eq!(edit_distance(&letters("sitting"), &letters("kitten")), 3);
    }

    #[test]
    fn min_edit_examples() {
        let training = vec![letters("abcd"), letters("abce"), letters("zzzz")];
        assert_eq!(min_edit_to_set(&letters("abce"), &training).unwrap(), (0, 1));
        assert_eq!(min_edit_to_set(&letters("abcf"), &training).unwrap(), (1, 0));
        assert_eq!(
            min_edit_to_set(&letters("qq"), &training[2..]).unwrap(),
            (edit_distance(&letters("qq"), &training[2]), 0)
        );
        assert!(min_edit_to_set(&letters("a"), &[]).is_err());
    }

    #[test]
    fn summarize_edist_examples() {
        let training = vec![letters("abcd"), letters("wxyz")];
        assert_eq!(summarize_edist(&training, &training).unwrap(), (0.0, 0.0));
        assert_eq!(summarize_edist(&[letters("abzz")], &training).unwrap(), (2.0, 0.0));
        // distances 0, 1, 2 -> mean 1, population std sqrt(2/3)
        let samples = vec![letters("abcd"), letters("abcx"), letters("abxx")];
        let (mean, std) = summarize_edist(&samples, &training).unwrap();
        assert_eq!(mean, 1.0);
        assert!((std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(summarize_edist(&[], &training).is_err());
    }

    fn trajectory(values: &[f64]) -> Trajectory {
        Trajectory {
            records: values
                .iter()
                .enumerate()
                .map(|(i, &v)| TrajectoryRecord {
                    step: i,
                    point: DesignPoint::raw(vec![0.0]).unwrap(),
                    objectives: ov(&[v]),
                    weights: SimplexWeights::uniform(1),
                    grad_norm: 0.0,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn convergence_examples() {
        let s = convergence_stats(&trajectory(&[2.0; 6]), 0.05).unwrap();
        assert_eq!(s[0].steps_to_eps, 0);

        let s = convergence_stats(&trajectory(&[5.0, 4.0, 3.0, 3.0, 3.0]), 0.0).unwrap();
        assert_eq!(s[0].steps_to_eps, 2);

        // f_k = 0.9^k, k = 0..=100: need 0.9^k <= 1.05 * 0.9^100, i.e. k >= 100 + ln(1.05)/ln(0.9)
        let series: Vec<f64> = (0..=100).map(|k| 0.9f64.powi(k)).collect();
        let s = convergence_stats(&trajectory(&series), 0.05).unwrap();
        let expected = (100.0 + 1.05f64.ln() / 0.9f64.ln()).ceil() as usize;
        assert_eq!(s[0].steps_to_eps, expected);

        assert!(convergence_stats(&Trajectory::default(), 0.05).is_err());
    }

    proptest! {
        #[test]
        fn hv_monotone_and_dominance_invariant(
            raw in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..30),
            extra in prop::collection::vec(0.0f64..1.0, 3),
            m in 2usize..=3,
        ) {
            let pts: Vec<ObjectiveVector> = raw.iter().map(|v| ov(&v[..m])).collect();
            let r = ReferencePoint::ones(m);
            let base = hypervolume_exact(&pts, &r).unwrap();
            let mut more = pts.clone();
            more.push(ov(&extra[..m]));
            prop_assert!(hypervolume_exact(&more, &r).unwrap() >= base - 1e-15);
            prop_assert!((0.0..=1.0).contains(&base));

            let front = pareto_filter(&pts).unwrap();
            let reduced: Vec<ObjectiveVector> = front.iter().map(|&i| pts[i].clone()).collect();
            prop_assert_eq!(hypervolume_exact(&reduced, &r).unwrap(), base);
        }

        #[test]
        fn levenshtein_matches_oracle_and_axioms(
            a in prop::collection::vec(0usize..4, 0..20),
            b in prop::collection::vec(0usize..4, 0..20),
            c in prop::collection::vec(0usize..4, 0..20),
        ) {
            let ab = levenshtein(&a, &b);
            prop_assert_eq!(ab, dp_oracle(&a, &b));
            prop_assert_eq!(ab, levenshtein(&b, &a));
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
        }
    }
}
