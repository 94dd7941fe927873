use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// Learning-rate group. The encoder side stands in for the language model
/// (input projection); everything else is the graph module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamGroup {
    Encoder,
    Graph,
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamGroup::Encoder => "encoder",
            ParamGroup::Graph => "graph",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub group: ParamGroup,
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, group: ParamGroup, value: Matrix<T>) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Parameter {
            name: name.into(),
            group,
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill_zero();
    }
}

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Ordered parameter collection. Insertion order is iteration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, group: ParamGroup, value: Matrix<T>) -> Result<ParamId> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::Validation(format!("duplicate parameter name `{name}`")));
        }
        self.params.push(Parameter::new(name, group, value));
        Ok(ParamId(self.params.len() - 1))
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &Matrix<T> {
        &self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    /// Zeroed gradient buffers aligned with the store, for per-example backward passes.
    pub fn grad_buffers(&self) -> Vec<Matrix<T>> {
        self.params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect()
    }

    /// Adds buffers into the stored gradients in parameter order.
    pub fn accumulate(&mut self, grads: &[Matrix<T>]) -> Result<()> {
        for (p, g) in self.params.iter_mut().zip(grads) {
            p.grad.add_assign(g)?;
        }
        Ok(())
    }

    pub fn scale_grads(&mut self, s: T) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }

    pub fn grad_norm(&self) -> T {
        self.params.iter().fold(T::zero(), |acc, p| acc + p.grad.sum_squares()).sqrt()
    }

    /// Rescales gradients so their global L2 norm is at most `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: T) -> T {
        let norm = self.grad_norm();
        if norm > max_norm {
            self.scale_grads(max_norm / norm);
        }
        norm
    }

    /// Same names, shapes, groups and order.
    pub fn same_layout(&self, other: &ParamStore<T>) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.group == b.group && a.value.shape() == b.value.shape())
    }
}

/// Uniform Glorot initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<T> {
    let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
    let data = (0..rows * cols).map(|_| T::of(rng.random_range(-bound..=bound))).collect();
    Matrix::from_vec(rows, cols, data).expect("glorot values are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut store = ParamStore::<f32>::new();
        store.add("w", ParamGroup::Graph, Matrix::zeros(2, 2)).unwrap();
        assert!(store.add("w", ParamGroup::Encoder, Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn zero_grad_resets() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", ParamGroup::Graph, Matrix::zeros(2, 2)).unwrap();
        store.get_mut(id).grad = Matrix::filled(2, 2, 3.0);
        store.zero_grad();
        assert_eq!(store.get(id).grad.max_abs(), 0.0);
        assert_eq!(store.get(id).grad.shape(), store.get(id).value.shape());
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut store = ParamStore::<f64>::new();
        let a = store.add("a", ParamGroup::Graph, Matrix::zeros(1, 2)).unwrap();
        store.get_mut(a).grad = Matrix::from_f64(1, 2, &[3.0, 4.0]).unwrap();
        assert_eq!(store.clip_grad_norm(1.0), 5.0);
        assert!((store.grad_norm() - 1.0).abs() < 1e-15);
    }
}
