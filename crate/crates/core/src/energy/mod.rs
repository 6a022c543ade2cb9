//! Differentiable energies: the model interface, analytic benchmarks, sequence energies,
//! contrastive-divergence training and model persistence.

use std::fmt;
use std::sync::Arc;

use crate::domain::{DesignPoint, ObjectiveVector, Shape};
use crate::error::{Error, Result};

mod analytic;
mod cd;
mod persist;
mod sequence;

pub use analytic::{AnalyticObjective, Zdt3Branch};
pub use cd::{cd_train, CdTrainConfig, NegativeInit, TrainOutcome};
pub use persist::{load_model, read_model, save_model, write_model, FORMAT_VERSION};
pub use sequence::{MlpEnergy, PwmEnergy, TrainableModel};

/// A scalar energy with an analytic input gradient.
///
/// Implementations may assume `x.len() == self.shape().dim()`; the checked entry points
/// ([`value_and_gradient`], [`evaluate_all`]) enforce it.
pub trait EnergyModel: Send + Sync + fmt::Debug {
    fn shape(&self) -> Shape;

    /// Energy and gradient from a single evaluation.
    fn energy_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>);

    fn energy(&self, x: &[f64]) -> f64 {
        self.energy_and_grad(x).0
    }

    fn dim(&self) -> usize {
        self.shape().dim()
    }
}

impl<T: EnergyModel + ?Sized> EnergyModel for Arc<T> {
    fn shape(&self) -> Shape {
        (**self).shape()
    }

    fn energy_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (**self).energy_and_grad(x)
    }

    fn energy(&self, x: &[f64]) -> f64 {
        (**self).energy(x)
    }
}

pub(crate) fn check_shape(expected: Shape, p: &DesignPoint) -> Result<()> {
    if p.shape() != expected {
        return Err(Error::shape(expected, p.shape()));
    }
    Ok(())
}

pub fn value_and_gradient(model: &dyn EnergyModel, p: &DesignPoint) -> Result<(f64, Vec<f64>)> {
    check_shape(model.shape(), p)?;
    Ok(model.energy_and_grad(p.coords()))
}

pub fn value(model: &dyn EnergyModel, p: &DesignPoint) -> Result<f64> {
    check_shape(model.shape(), p)?;
    Ok(model.energy(p.coords()))
}

/// Ordered list of m objectives sharing one input shape.
#[derive(Debug, Clone)]
pub struct ObjectiveSet {
    models: Vec<Arc<dyn EnergyModel>>,
    names: Vec<String>,
}

impl ObjectiveSet {
    pub fn new(models: Vec<Arc<dyn EnergyModel>>) -> Result<Self> {
        let names = (1..=models.len()).map(|i| format!("f{i}")).collect();
        Self::with_names(models, names)
    }

    pub fn with_names(models: Vec<Arc<dyn EnergyModel>>, names: Vec<String>) -> Result<Self> {
        let Some(first) = models.first() else {
            return Err(Error::Empty("objective set"));
        };
        if names.len() != models.len() {
            return Err(Error::shape(
                format!("{} objective names", models.len()),
                names.len(),
            ));
        }
        let shape = first.shape();
        if let Some(bad) = models.iter().find(|m| m.shape() != shape) {
            return Err(Error::shape(shape, bad.shape()));
        }
        Ok(Self { models, names })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn shape(&self) -> Shape {
        self.models[0].shape()
    }

    pub fn models(&self) -> &[Arc<dyn EnergyModel>] {
        &self.models
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn check_point(&self, p: &DesignPoint) -> Result<()> {
        check_shape(self.shape(), p)
    }

    /// Values and gradients of every objective at raw coordinates.
    pub(crate) fn eval_all(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        self.models.iter().map(|m| m.energy_and_grad(x)).unzip()
    }
}

pub fn evaluate_all(objs: &ObjectiveSet, p: &DesignPoint) -> Result<ObjectiveVector> {
    objs.check_point(p)?;
    let values = objs.models().iter().map(|m| m.energy(p.coords())).collect();
    ObjectiveVector::new(values)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::EnergyModel;

    /// Central finite differences with step `h`.
    pub fn central_difference(model: &dyn EnergyModel, x: &[f64], h: f64) -> Vec<f64> {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|i| {
                probe[i] = x[i] + h;
                let up = model.energy(&probe);
                probe[i] = x[i] - h;
                let down = model.energy(&probe);
                probe[i] = x[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / na.max(nb).max(1e-8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(c: &[f64]) -> Arc<dyn EnergyModel> {
        Arc::new(AnalyticObjective::shifted_quadratic(c.to_vec()))
    }

    #[test]
    fn opposing_quadratics_at_origin() {
        let objs = ObjectiveSet::new(vec![quad(&[1.0, 0.0]), quad(&[-1.0, 0.0])]).unwrap();
        let p = DesignPoint::raw(vec![0.0, 0.0]).unwrap();
        assert_eq!(evaluate_all(&objs, &p).unwrap().values(), &[1.0, 1.0]);
    }

    #[test]
    fn singleton_set_matches_value() {
        let model = quad(&[0.3, -0.2]);
        let objs = ObjectiveSet::new(vec![model.clone()]).unwrap();
        let p = DesignPoint::raw(vec![1.0, 2.0]).unwrap();
        let v = value(model.as_ref(), &p).unwrap();
        assert_eq!(evaluate_all(&objs, &p).unwrap().values(), &[v]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let model = quad(&[1.0, 0.0]);
        let p = DesignPoint::raw(vec![0.0; 3]).unwrap();
        assert!(matches!(
            value_and_gradient(model.as_ref(), &p),
            Err(Error::Shape { .. })
        ));
        assert!(ObjectiveSet::new(vec![quad(&[1.0]), quad(&[1.0, 2.0])]).is_err());
        assert!(ObjectiveSet::new(vec![]).is_err());
    }
}
