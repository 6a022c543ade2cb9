use rand::Rng;

use crate::domain::{DiscreteSequence, Shape};
use crate::error::{Error, Result};

use super::EnergyModel;

/// Position weight matrix energy: `E(x) = sum_{l,a} W[l,a] x[l*A + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwmEnergy {
    len: usize,
    alphabet: usize,
    weights: Vec<f64>,
}

impl PwmEnergy {
    /// `weights` is the L x A matrix in row-major order.
    pub fn new(len: usize, alphabet: usize, weights: Vec<f64>) -> Result<Self> {
        if len == 0 || alphabet == 0 {
            return Err(Error::Config("PWM needs L > 0 and A > 0".into()));
        }
        if weights.len() != len * alphabet {
            return Err(Error::shape(format!("{} PWM weights", len * alphabet), weights.len()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("PWM weight".into()));
        }
        Ok(Self {
            len,
            alphabet,
            weights,
        })
    }

    pub fn zeros(len: usize, alphabet: usize) -> Result<Self> {
        Self::new(len, alphabet, vec![0.0; len * alphabet])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, position: usize, token: usize) -> f64 {
        self.weights[position * self.alphabet + token]
    }

    /// Energy of a sequence under its one-hot relaxation.
    pub fn sequence_energy(&self, seq: &DiscreteSequence) -> f64 {
        seq.tokens()
            .iter()
            .enumerate()
            .map(|(l, &t)| self.weight(l, t))
            .sum()
    }

    /// Draws sequences from the independent-site Boltzmann distribution
    /// `p(a | l) ∝ exp(-W[l, a])`.
    pub fn sample_sequences<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<DiscreteSequence> {
        let probs: Vec<Vec<f64>> = (0..self.len)
            .map(|l| {
                let row = &self.weights[l * self.alphabet..(l + 1) * self.alphabet];
                let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
                let unnorm: Vec<f64> = row.iter().map(|w| (lo - w).exp()).collect();
                let z: f64 = unnorm.iter().sum();
                unnorm.into_iter().map(|u| u / z).collect()
            })
            .collect();
        (0..n)
            .map(|_| {
                let tokens = probs
                    .iter()
                    .map(|p| {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        for (a, pa) in p.iter().enumerate() {
                            acc += pa;
                            if u < acc {
                                return a;
                            }
                        }
                        p.len() - 1
                    })
                    .collect();
                DiscreteSequence::new(tokens, self.alphabet).expect("tokens drawn in range")
            })
            .collect()
    }
}

impl EnergyModel for PwmEnergy {
    fn shape(&self) -> Shape {
        Shape::Sequence {
            len: self.len,
            alphabet: self.alphabet,
        }
    }

    fn energy_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.energy(x), self.weights.clone())
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }
}

/// One-hidden-layer tanh network: `E(x) = w2 . tanh(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpEnergy {
    shape: Shape,
    hidden: usize,
    /// H x d, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl MlpEnergy {
    pub fn new(shape: Shape, w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> Result<Self> {
        let hidden = b1.len();
        let d = shape.dim();
        if hidden == 0 || d == 0 {
            return Err(Error::Config("MLP needs H > 0 and d > 0".into()));
        }
        if w1.len() != hidden * d {
            return Err(Error::shape(format!("{} entries in W1", hidden * d), w1.len()));
        }
        if w2.len() != hidden {
            return Err(Error::shape(format!("{hidden} entries in w2"), w2.len()));
        }
        if w1.iter().chain(&b1).chain(&w2).any(|v| !v.is_finite()) || !b2.is_finite() {
            return Err(Error::NonFinite("MLP parameter".into()));
        }
        Ok(Self {
            shape,
            hidden,
            w1,
            b1,
            w2,
            b2,
        })
    }

    /// Gaussian init with std `scale / sqrt(fan_in)` per layer; biases zero.
    pub fn random<R: Rng + ?Sized>(shape: Shape, hidden: usize, scale: f64, rng: &mut R) -> Result<Self> {
        let d = shape.dim();
        let s1 = scale / (d.max(1) as f64).sqrt();
        let s2 = scale / (hidden.max(1) as f64).sqrt();
        let w1 = (0..hidden * d)
            .map(|_| s1 * crate::rng::standard_normal(rng))
            .collect();
        let w2 = (0..hidden)
            .map(|_| s2 * crate::rng::standard_normal(rng))
            .collect();
        Self::new(shape, w1, vec![0.0; hidden], w2, 0.0)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    fn activations(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        self.w1
            .chunks_exact(d)
            .zip(&self.b1)
            .map(|(row, b)| (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b).tanh())
            .collect()
    }

    /// Gradient of the energy with respect to the parameters, in file order
    /// (W1, w2, b1, b2).
    pub(crate) fn param_gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let h = self.activations(x);
        let (gw1, rest) = out.split_at_mut(self.hidden * d);
        let (gw2, rest) = rest.split_at_mut(self.hidden);
        let (gb1, gb2) = rest.split_at_mut(self.hidden);
        for j in 0..self.hidden {
            let delta = self.w2[j] * (1.0 - h[j] * h[j]);
            gw2[j] = h[j];
            gb1[j] = delta;
            for (g, v) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                *g = delta * v;
            }
        }
        gb2[0] = 1.0;
    }
}

impl EnergyModel for MlpEnergy {
    fn shape(&self) -> Shape {
        self.shape
    }

    fn energy_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = x.len();
        let h = self.activations(x);
        let value = h.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2;
        let mut grad = vec![0.0; d];
        for (j, row) in self.w1.chunks_exact(d).enumerate() {
            let delta = self.w2[j] * (1.0 - h[j] * h[j]);
            for (g, w) in grad.iter_mut().zip(row) {
                *g += delta * w;
            }
        }
        (value, grad)
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let h = self.activations(x);
        h.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2
    }
}

/// Sequence energies that can be trained and persisted.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainableModel {
    Pwm(PwmEnergy),
    Mlp(MlpEnergy),
}

impl TrainableModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainableModel::Pwm(_) => "pwm",
            TrainableModel::Mlp(_) => "mlp",
        }
    }

    /// All parameters in file order.
    pub fn params(&self) -> Vec<f64> {
        match self {
            TrainableModel::Pwm(m) => m.weights.clone(),
            TrainableModel::Mlp(m) => {
                let mut p = Vec::with_capacity(m.w1.len() + 2 * m.hidden + 1);
                p.extend_from_slice(&m.w1);
                p.extend_from_slice(&m.w2);
                p.extend_from_slice(&m.b1);
                p.push(m.b2);
                p
            }
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            TrainableModel::Pwm(m) => m.weights.len(),
            TrainableModel::Mlp(m) => m.w1.len() + 2 * m.hidden + 1,
        }
    }

    pub(crate) fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params());
        match self {
            TrainableModel::Pwm(m) => m.weights.copy_from_slice(params),
            TrainableModel::Mlp(m) => {
                let (w1, rest) = params.split_at(m.w1.len());
                let (w2, rest) = rest.split_at(m.hidden);
                let (b1, b2) = rest.split_at(m.hidden);
                m.w1.copy_from_slice(w1);
                m.w2.copy_from_slice(w2);
                m.b1.copy_from_slice(b1);
                m.b2 = b2[0];
            }
        }
    }

    /// Accumulates `scale * dE/dtheta` at `x` into `acc`.
    pub(crate) fn accumulate_param_gradient(&self, x: &[f64], scale: f64, acc: &mut [f64], scratch: &mut [f64]) {
        match self {
            TrainableModel::Pwm(_) => {
                for (a, v) in acc.iter_mut().zip(x) {
                    *a += scale * v;
                }
            }
            TrainableModel::Mlp(m) => {
                m.param_gradient(x, scratch);
                for (a, g) in acc.iter_mut().zip(scratch.iter()) {
                    *a += scale * g;
                }
            }
        }
    }

    fn inner(&self) -> &dyn EnergyModel {
        match self {
            TrainableModel::Pwm(m) => m,
            TrainableModel::Mlp(m) => m,
        }
    }
}

impl EnergyModel for TrainableModel {
    fn shape(&self) -> Shape {
        self.inner().shape()
    }

    fn energy_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.inner().energy_and_grad(x)
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.inner().energy(x)
    }
}

impl From<PwmEnergy> for TrainableModel {
    fn from(m: PwmEnergy) -> Self {
        TrainableModel::Pwm(m)
    }
}

impl From<MlpEnergy> for TrainableModel {
    fn from(m: MlpEnergy) -> Self {
        TrainableModel::Mlp(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::testing::{central_difference, relative_error};
    use crate::energy::value_and_gradient;
    use crate::domain::DesignPoint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pwm_linear_form() {
        let pwm = PwmEnergy::new(1, 2, vec![1.0, 2.0]).unwrap();
        let p = DesignPoint::new(vec![1.0, 0.0], pwm.shape()).unwrap();
        assert_eq!(value_and_gradient(&pwm, &p).unwrap(), (1.0, vec![1.0, 2.0]));
    }

    #[test]
    fn pwm_gradient_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pwm = PwmEnergy::new(3, 4, w.clone()).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert_eq!(pwm.energy_and_grad(&x).1, w);
        }
    }

    #[test]
    fn pwm_rejects_bad_shapes() {
        assert!(PwmEnergy::new(2, 2, vec![0.0; 3]).is_err());
        assert!(PwmEnergy::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = Shape::Sequence { len: 3, alphabet: 4 };
        for _ in 0..100 {
            let mlp = MlpEnergy::random(shape, 6, 1.5, &mut rng).unwrap();
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, g) = mlp.energy_and_grad(&x);
            let fd = central_difference(&mlp, &x, 1e-5);
            assert!(relative_error(&g, &fd) < 1e-5);
        }
    }

    #[test]
    fn mlp_param_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let shape = Shape::Raw { dim: 3 };
        let mlp = MlpEnergy::random(shape, 4, 1.0, &mut rng).unwrap();
        let mut model = TrainableModel::Mlp(mlp.clone());
        let x = [0.3, -0.7, 1.1];
        let mut analytic = vec![0.0; model.num_params()];
        mlp.param_gradient(&x, &mut analytic);
        let base = model.params();
        let h = 1e-5;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            model.set_params(&p);
            let up = model.energy(&x);
            p[i] -= 2.0 * h;
            model.set_params(&p);
            let down = model.energy(&x);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - analytic[i]).abs() < 1e-8, "param {i}: {fd} vs {}", analytic[i]);
        }
    }

    #[test]
    fn boltzmann_sampling_prefers_low_energy() {
        let pwm = PwmEnergy::new(1, 3, vec![0.0, 3.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = pwm.sample_sequences(2000, &mut rng);
        let zeros = draws.iter().filter(|s| s.tokens()[0] == 0).count();
        // p(0) = 1 / (1 + 2 e^-3) ~ 0.909
        assert!((zeros as f64 / 2000.0 - 0.909).abs() < 0.03);
    }
}
