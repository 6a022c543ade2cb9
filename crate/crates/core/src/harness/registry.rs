//! Named benchmark problems.
//!
//! | id                    | m | default d | Pareto set                                                 |
//! |-----------------------|---|-----------|------------------------------------------------------------|
//! | `opposing-quadratics` | 2 | 2         | segment `x1 in [-1, 1]`, other coordinates 0 (convex front) |
//! | `fonseca-fleming`     | 2 | 3         | diagonal `x_i = t`, `t in [-1/sqrt(n), 1/sqrt(n)]` (non-convex front) |
//! | `zdt3-like`           | 2 | 5         | `x_i = 0` for `i >= 1`, `x0` on the disconnected pieces of `f2 = 1 - sqrt(f1) - f1 sin(10 pi f1)` |
//! | `tri-quadratic`       | 3 | 2         | unit-circumradius triangle spanned by the three centers     |
//! | `sequence-energies`   | m | `L x A`   | unknown; `m` model files loaded from disk                  |

use std::f64::consts::PI;
use std::sync::Arc;

use crate::domain::Shape;
use crate::energy::{load_model, AnalyticObjective, EnergyModel, ObjectiveSet, Zdt3Branch};
use crate::error::{Error, Result};

use super::config::ProblemSpec;

pub const PROBLEM_IDS: [&str; 5] = [
    "opposing-quadratics",
    "fonseca-fleming",
    "zdt3-like",
    "tri-quadratic",
    "sequence-energies",
];

/// A resolved problem: its objectives plus what is known about its Pareto set.
#[derive(Debug, Clone)]
pub struct Problem {
    pub id: String,
    pub objectives: ObjectiveSet,
    kind: Known,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Known {
    Segment,
    Diagonal { n: usize },
    Zdt3,
    Triangle,
    Unknown,
}

pub struct ProblemRegistry;

impl ProblemRegistry {
    pub fn ids() -> &'static [&'static str] {
        &PROBLEM_IDS
    }

    pub fn build(spec: &ProblemSpec) -> Result<Problem> {
        let id = spec.id.as_str();
        let dim = |default: usize, min: usize| -> Result<usize> {
            let d = spec.dim.unwrap_or(default);
            if d < min {
                return Err(Error::Config(format!("problem {id} needs dim >= {min}, got {d}")));
            }
            Ok(d)
        };
        if id != "sequence-energies" && !spec.models.is_empty() {
            return Err(Error::Config(format!("problem {id} does not take model files")));
        }
        let analytic = |objs: Vec<AnalyticObjective>, names: &[&str]| {
            ObjectiveSet::with_names(
                objs.into_iter().map(|o| Arc::new(o) as Arc<dyn EnergyModel>).collect(),
                names.iter().map(|s| s.to_string()).collect(),
            )
        };
        let (objectives, kind) = match id {
            "opposing-quadratics" => {
                let d = dim(2, 1)?;
                let mut c1 = vec![0.0; d];
                c1[0] = 1.0;
                let mut c2 = vec![0.0; d];
                c2[0] = -1.0;
                let objs = vec![
                    AnalyticObjective::shifted_quadratic(c1),
                    AnalyticObjective::shifted_quadratic(c2),
                ];
                (analytic(objs, &["f1", "f2"])?, Known::Segment)
            }
            "fonseca-fleming" => {
                let n = dim(3, 1)?;
                let objs = vec![
                    AnalyticObjective::fonseca_fleming(1.0, n),
                    AnalyticObjective::fonseca_fleming(-1.0, n),
                ];
                (analytic(objs, &["f1", "f2"])?, Known::Diagonal { n })
            }
            "zdt3-like" => {
                let n = dim(5, 2)?;
                let objs = vec![
                    AnalyticObjective::zdt3(Zdt3Branch::First, n),
                    AnalyticObjective::zdt3(Zdt3Branch::Second, n),
                ];
                (analytic(objs, &["f1", "f2"])?, Known::Zdt3)
            }
            "tri-quadratic" => {
                let d = dim(2, 2)?;
                let objs = triangle_centers(d)
                    .into_iter()
                    .map(AnalyticObjective::shifted_quadratic)
                    .collect();
                (analytic(objs, &["f1", "f2", "f3"])?, Known::Triangle)
            }
            "sequence-energies" => {
                if spec.models.is_empty() {
                    return Err(Error::Config(
                        "sequence-energies needs at least one model file".into(),
                    ));
                }
                let models = spec
                    .models
                    .iter()
                    .map(|p| load_model(p).map(|m| Arc::new(m) as Arc<dyn EnergyModel>))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(d) = spec.dim {
                    if models[0].dim() != d {
                        return Err(Error::shape(d, models[0].dim()));
                    }
                }
                let names = spec
                    .models
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        p.file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_else(|| format!("f{}", i + 1))
                    })
                    .collect();
                (ObjectiveSet::with_names(models, names)?, Known::Unknown)
            }
            other => return Err(Error::UnknownProblem(other.to_string())),
        };
        Ok(Problem {
            id: spec.id.clone(),
            objectives,
            kind,
        })
    }
}

/// Centers of the three quadratics: vertices of a unit-circumradius triangle in the
/// first two coordinates.
pub fn triangle_centers(d: usize) -> Vec<Vec<f64>> {
    (0..3)
        .map(|i| {
            let angle = PI / 2.0 + 2.0 * PI * i as f64 / 3.0;
            let mut c = vec![0.0; d];
            c[0] = angle.cos();
            c[1] = angle.sin();
            c
        })
        .collect()
}

fn dist_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
    ((ap[0] - t * ab[0]).powi(2) + (ap[1] - t * ab[1]).powi(2)).sqrt()
}

impl Problem {
    pub fn shape(&self) -> Shape {
        self.objectives.shape()
    }

    /// Euclidean distance from `x` to the known Pareto set, when it is known in closed form.
    pub fn pareto_set_distance(&self, x: &[f64]) -> Option<f64> {
        if x.len() != self.shape().dim() {
            return None;
        }
        let tail = |from: usize| x[from..].iter().map(|v| v * v).sum::<f64>();
        match self.kind {
            Known::Segment => {
                let over = (x[0].abs() - 1.0).max(0.0);
                Some((over * over + tail(1)).sqrt())
            }
            Known::Diagonal { n } => {
                let bound = 1.0 / (n as f64).sqrt();
                let t = (x.iter().sum::<f64>() / n as f64).clamp(-bound, bound);
                Some(x.iter().map(|v| (v - t).powi(2)).sum::<f64>().sqrt())
            }
            Known::Triangle => {
                let c = triangle_centers(2);
                let v = |i: usize| [c[i][0], c[i][1]];
                let p = [x[0], x[1]];
                let cross = |a: [f64; 2], b: [f64; 2]| {
                    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
                };
                let signs = [cross(v(0), v(1)), cross(v(1), v(2)), cross(v(2), v(0))];
                let inside = signs.iter().all(|s| *s >= 0.0) || signs.iter().all(|s| *s <= 0.0);
                let planar = if inside {
                    0.0
                } else {
                    (0..3)
                        .map(|i| dist_to_segment(p, v(i), v((i + 1) % 3)))
                        .fold(f64::INFINITY, f64::min)
                };
                Some((planar * planar + tail(2)).sqrt())
            }
            Known::Zdt3 | Known::Unknown => None,
        }
    }

    /// One-line description of the known Pareto set, for reports.
    pub fn known_front(&self) -> Option<&'static str> {
        match self.kind {
            Known::Segment => Some("x1 in [-1, 1], other coordinates 0; convex front"),
            Known::Diagonal { .. } => Some("x_i = t, t in [-1/sqrt(n), 1/sqrt(n)]; non-convex front"),
            Known::Zdt3 => Some("x_i = 0 for i >= 1, disconnected front f2 = 1 - sqrt(f1) - f1 sin(10 pi f1)"),
            Known::Triangle => Some("triangle spanned by the three centers"),
            Known::Unknown => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moo::mgd_direction;
    use crate::domain::DesignPoint;

    fn spec(id: &str) -> ProblemSpec {
        ProblemSpec {
            id: id.into(),
            dim: None,
            models: vec![],
            training_sets: vec![],
        }
    }

    #[test]
    fn analytic_problems_have_documented_sizes() {
        for (id, m, d) in [
            ("opposing-quadratics", 2, 2),
            ("fonseca-fleming", 2, 3),
            ("zdt3-like", 2, 5),
            ("tri-quadratic", 3, 2),
        ] {
            let p = ProblemRegistry::build(&spec(id)).unwrap();
            assert_eq!(p.objectives.len(), m, "{id}");
            assert_eq!(p.shape().dim(), d, "{id}");
        }
    }

    #[test]
    fn unknown_id_is_named() {
        match ProblemRegistry::build(&spec("nope")) {
            Err(e @ Error::UnknownProblem(_)) => assert!(e.to_string().contains("nope")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn known_pareto_sets_are_stationary() {
        // points on the documented Pareto set have a zero min-norm direction
        let cases: Vec<(&str, Vec<f64>)> = vec![
            ("opposing-quadratics", vec![0.3, 0.0]),
            ("fonseca-fleming", vec![0.2; 3]),
            ("tri-quadratic", vec![0.1, 0.2]),
        ];
        for (id, x) in cases {
            let p = ProblemRegistry::build(&spec(id)).unwrap();
            assert!(p.pareto_set_distance(&x).unwrap() < 1e-12, "{id}");
            let g = mgd_direction(&p.objectives, &DesignPoint::raw(x).unwrap()).unwrap();
            assert!(g.norm < 1e-6, "{id}: {}", g.norm);
        }
    }

    #[test]
    fn off_set_points_have_positive_distance() {
        let p = ProblemRegistry::build(&spec("opposing-quadratics")).unwrap();
        assert!((p.pareto_set_distance(&[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let p = ProblemRegistry::build(&spec("tri-quadratic")).unwrap();
        assert!((p.pareto_set_distance(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
    }
}
