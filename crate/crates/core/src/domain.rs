//! Domain types shared by the samplers, metrics and harness.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical amino-acid alphabet in index order.
pub const AMINO_ACIDS: &str = "ACDEFGHIKLMNPQRSTVWY";

/// Tolerance on the simplex sum constraint.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Input layout accepted by an energy model and carried by a [`DesignPoint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// Plain real vector of dimension `dim`.
    Raw { dim: usize },
    /// `len` positions of `alphabet` logits each, laid out row-major.
    Sequence { len: usize, alphabet: usize },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match *self {
            Shape::Raw { dim } => dim,
            Shape::Sequence { len, alphabet } => len * alphabet,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Raw { .. } => "raw",
            Shape::Sequence { .. } => "sequence-logits",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Raw { dim } => write!(f, "raw(d={dim})"),
            Shape::Sequence { len, alphabet } => write!(f, "sequence(L={len}, A={alphabet})"),
        }
    }
}

/// A point in the continuous search space.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    coords: Vec<f64>,
    shape: Shape,
}

impl DesignPoint {
    pub fn new(coords: Vec<f64>, shape: Shape) -> Result<Self> {
        if let Shape::Sequence { len, alphabet } = shape {
            if len == 0 || alphabet == 0 {
                return Err(Error::InvalidSequence(
                    "sequence shape needs L > 0 and A > 0".into(),
                ));
            }
        }
        if coords.len() != shape.dim() {
            return Err(Error::shape(
                format!("{} coordinates for {shape}", shape.dim()),
                coords.len(),
            ));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {i} is {}", coords[i])));
        }
        Ok(Self { coords, shape })
    }

    pub fn raw(coords: Vec<f64>) -> Result<Self> {
        let dim = coords.len();
        Self::new(coords, Shape::Raw { dim })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// A token string over an alphabet of size `alphabet`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscreteSequence {
    tokens: Vec<usize>,
    alphabet: usize,
}

impl DiscreteSequence {
    pub fn new(tokens: Vec<usize>, alphabet: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidSequence("empty sequence".into()));
        }
        if let Some(pos) = tokens.iter().position(|&t| t >= alphabet) {
            return Err(Error::InvalidSequence(format!(
                "token {} at position {pos} outside alphabet of size {alphabet}",
                tokens[pos]
            )));
        }
        Ok(Self { tokens, alphabet })
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }
}

/// Character rendering of token indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Default for Alphabet {
    fn default() -> Self {
        Self {
            symbols: AMINO_ACIDS.chars().collect(),
        }
    }
}

impl Alphabet {
    pub fn new(symbols: &str) -> Result<Self> {
        let symbols: Vec<char> = symbols.chars().collect();
        if symbols.is_empty() {
            return Err(Error::Config("alphabet must not be empty".into()));
        }
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(Error::Config(format!("duplicate alphabet symbol `{c}`")));
            }
        }
        Ok(Self { symbols })
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    pub fn parse(&self, text: &str) -> Result<DiscreteSequence> {
        let tokens = text
            .chars()
            .enumerate()
            .map(|(i, c)| {
                self.index_of(c).ok_or_else(|| {
                    Error::InvalidSequence(format!("symbol `{c}` at column {} not in alphabet", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DiscreteSequence::new(tokens, self.size())
    }

    pub fn render(&self, seq: &DiscreteSequence) -> String {
        seq.tokens().iter().map(|&t| self.symbols[t]).collect()
    }
}

/// One-hot style relaxation of a sequence into per-position logits.
pub fn relax(seq: &DiscreteSequence, on_value: f64, off_value: f64) -> Result<DesignPoint> {
    if !(on_value > off_value) {
        return Err(Error::Config(format!(
            "relaxation needs on_value > off_value, got {on_value} <= {off_value}"
        )));
    }
    let a = seq.alphabet_size();
    let mut coords = vec![off_value; seq.len() * a];
    for (l, &t) in seq.tokens().iter().enumerate() {
        coords[l * a + t] = on_value;
    }
    DesignPoint::new(
        coords,
        Shape::Sequence {
            len: seq.len(),
            alphabet: a,
        },
    )
}

/// Per-position argmax decode; ties go to the lowest token index.
pub fn decode(p: &DesignPoint) -> Result<DiscreteSequence> {
    let Shape::Sequence { len, alphabet } = p.shape() else {
        return Err(Error::WrongKind {
            expected: "sequence-logits",
            got: "raw",
        });
    };
    let tokens = (0..len)
        .map(|l| {
            let row = &p.coords()[l * alphabet..(l + 1) * alphabet];
            let mut best = 0;
            for (a, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    DiscreteSequence::new(tokens, alphabet)
}

/// The m objective values at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("objective vector"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("objective {i} is {}", values[i])));
        }
        Ok(Self(values))
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
}

/// Convex-combination weights on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    /// Validates without renormalizing.
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidSimplex("no weights".into()));
        }
        if let Some(i) = lambda.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidSimplex(format!(
                "weight {i} is {} (must be finite and non-negative)",
                lambda[i]
            )));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidSimplex(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(lambda))
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "simplex over zero objectives");
        Self(vec![1.0 / m as f64; m])
    }

    pub fn vertex(m: usize, i: usize) -> Self {
        assert!(i < m, "vertex {i} out of range for m={m}");
        let mut w = vec![0.0; m];
        w[i] = 1.0;
        Self(w)
    }

    /// Accepts solver output that may carry rounding drift off the simplex.
    pub(crate) fn from_solver(mut lambda: Vec<f64>) -> Self {
        for l in &mut lambda {
            if *l < 0.0 {
                *l = 0.0;
            }
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            for l in &mut lambda {
                *l /= sum;
            }
        }
        Self(lambda)
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
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

/// Per-step noise distribution of the Langevin variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    /// Variance-matched uniform noise on `[-sqrt(3), sqrt(3)]` per coordinate.
    Uniform,
    None,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
            NoiseKind::None => "none",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Step size, length and noise settings of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub eta: f64,
    pub steps: usize,
    pub noise_kind: NoiseKind,
    /// Noise std of the Langevin variants; defaults to `sqrt(eta)`.
    pub sigma: Option<f64>,
    /// Noise scale of pcEBM; defaults to `eta / 2`.
    pub alpha: Option<f64>,
    pub seed: u64,
    pub grad_tol: f64,
    pub record_every: usize,
}

impl SamplerConfig {
    pub fn new(eta: f64, steps: usize, noise_kind: NoiseKind, seed: u64) -> Self {
        Self {
            eta,
            steps,
            noise_kind,
            sigma: None,
            alpha: None,
            seed,
            grad_tol: 1e-6,
            record_every: 1,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_record_every(mut self, stride: usize) -> Self {
        self.record_every = stride;
        self
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or_else(|| self.eta.sqrt())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(self.eta / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.steps < 1 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        let sigma = self.sigma();
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
        }
        let alpha = self.alpha();
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::Config("grad_tol must be >= 0".into()));
        }
        if self.record_every < 1 {
            return Err(Error::Config("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// One recorded chain state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub point: DesignPoint,
    pub objectives: ObjectiveVector,
    pub weights: SimplexWeights,
    /// Norm of the drift direction evaluated at `point`.
    pub grad_norm: f64,
}

/// Recorded history of a sampling chain. The first record is always step 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub terminated_early: bool,
    pub termination_step: Option<usize>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    pub fn final_point(&self) -> Option<&DesignPoint> {
        self.records.last().map(|r| &r.point)
    }

    pub fn final_objectives(&self) -> Option<&ObjectiveVector> {
        self.records.last().map(|r| &r.objectives)
    }

    pub fn num_objectives(&self) -> Option<usize> {
        self.records.first().map(|r| r.objectives.len())
    }
}
