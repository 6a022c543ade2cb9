use std::f64::consts::PI;

use crate::domain::Shape;

use super::EnergyModel;

/// Which objective of the ZDT3-like pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zdt3Branch {
    First,
    Second,
}

/// Closed-form benchmark objectives on raw points.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticObjective {
    /// `|x - center|^2`.
    ShiftedQuadratic { center: Vec<f64> },
    /// `1 - exp(-sum_i (x_i - sign / sqrt(n))^2)`.
    FonsecaFleming { sign: f64, n: usize },
    /// ZDT3 on unconstrained coordinates: `f1 = logistic(x_0)`,
    /// `g = 1 + 9/(n-1) * sum_{i>=1} x_i^2`, `f2 = g - sqrt(f1 g) - f1 sin(10 pi f1)`.
    Zdt3 { branch: Zdt3Branch, n: usize },
}

impl AnalyticObjective {
    pub fn shifted_quadratic(center: Vec<f64>) -> Self {
        assert!(!center.is_empty(), "quadratic center must be non-empty");
        AnalyticObjective::ShiftedQuadratic { center }
    }

    /// `sign` is +1 for the first objective and -1 for the second.
    pub fn fonseca_fleming(sign: f64, n: usize) -> Self {
        assert!(n >= 1, "Fonseca-Fleming needs n >= 1");
        assert!(sign == 1.0 || sign == -1.0, "sign must be +1 or -1");
        AnalyticObjective::FonsecaFleming { sign, n }
    }

    pub fn zdt3(branch: Zdt3Branch, n: usize) -> Self {
        assert!(n >= 2, "ZDT3 needs n >= 2");
        AnalyticObjective::Zdt3 { branch, n }
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl EnergyModel for AnalyticObjective {
    fn shape(&self) -> Shape {
        let dim = match self {
            AnalyticObjective::ShiftedQuadratic { center } => center.len(),
            AnalyticObjective::FonsecaFleming { n, .. } | AnalyticObjective::Zdt3 { n, .. } => *n,
        };
        Shape::Raw { dim }
    }

    fn energy_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self {
            AnalyticObjective::ShiftedQuadratic { center } => {
                let diff: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let value = diff.iter().map(|d| d * d).sum();
                (value, diff.iter().map(|d| 2.0 * d).collect())
            }
            AnalyticObjective::FonsecaFleming { sign, n } => {
                let shift = sign / (*n as f64).sqrt();
                let diff: Vec<f64> = x.iter().map(|a| a - shift).collect();
                let e = (-diff.iter().map(|d| d * d).sum::<f64>()).exp();
                (1.0 - e, diff.iter().map(|d| 2.0 * d * e).collect())
            }
            AnalyticObjective::Zdt3 { branch, n } => {
                let f1 = logistic(x[0]);
                let df1 = f1 * (1.0 - f1);
                let mut grad = vec![0.0; *n];
                match branch {
                    Zdt3Branch::First => {
                        grad[0] = df1;
                        (f1, grad)
                    }
                    Zdt3Branch::Second => {
                        let scale = 9.0 / (*n as f64 - 1.0);
                        let g = 1.0 + scale * x[1..].iter().map(|v| v * v).sum::<f64>();
                        let root = (f1 * g).sqrt();
                        let wave = 10.0 * PI * f1;
                        let value = g - root - f1 * wave.sin();
                        let d_f1 = -0.5 * (g / f1).sqrt() - wave.sin() - wave * wave.cos();
                        let d_g = 1.0 - 0.5 * (f1 / g).sqrt();
                        grad[0] = d_f1 * df1;
                        for (gi, xi) in grad[1..].iter_mut().zip(&x[1..]) {
                            *gi = d_g * 2.0 * scale * xi;
                        }
                        (value, grad)
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::testing::{central_difference, relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_minimum() {
        let q = AnalyticObjective::shifted_quadratic(vec![1.0, 0.0]);
        assert_eq!(q.energy_and_grad(&[1.0, 0.0]), (0.0, vec![0.0, 0.0]));
    }

    #[test]
    fn fonseca_fleming_closed_form() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = [s, s];
        let f1 = AnalyticObjective::fonseca_fleming(1.0, 2).energy(&x);
        let f2 = AnalyticObjective::fonseca_fleming(-1.0, 2).energy(&x);
        assert!(f1.abs() < 1e-15);
        // |x + c|^2 = |2c|^2 = 4
        let reference = 1.0 - (-4.0f64).exp();
        assert!((f2 - reference).abs() < 1e-15);
    }

    #[test]
    fn zdt3_matches_textbook_form() {
        // with x_1.. = 0, g = 1 and f2 = 1 - sqrt(f1) - f1 sin(10 pi f1)
        let n = 3;
        let z = 0.3;
        let x = [z, 0.0, 0.0];
        let f1 = AnalyticObjective::zdt3(Zdt3Branch::First, n).energy(&x);
        let f2 = AnalyticObjective::zdt3(Zdt3Branch::Second, n).energy(&x);
        let t = 1.0 / (1.0 + (-z).exp());
        assert!((f1 - t).abs() < 1e-15);
        let expected = 1.0 - t.sqrt() - t * (10.0 * PI * t).sin();
        assert!((f2 - expected).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let models = [
                AnalyticObjective::shifted_quadratic(
                    (0..4).map(|_| rng.random_range(-2.0..2.0)).collect(),
                ),
                AnalyticObjective::fonseca_fleming(1.0, 4),
                AnalyticObjective::fonseca_fleming(-1.0, 4),
                AnalyticObjective::zdt3(Zdt3Branch::First, 4),
                AnalyticObjective::zdt3(Zdt3Branch::Second, 4),
            ];
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
            for m in &models {
                let (_, g) = m.energy_and_grad(&x);
                let fd = central_difference(m, &x, 1e-5);
                let err = relative_error(&g, &fd);
                assert!(err < 1e-5, "{m:?} at {x:?}: rel err {err}");
            }
        }
    }
}
