//! Named parameter storage and its binding onto a tape.

use std::ops::Index;

use ndarray::Array2;

use super::tape::{Tape, Var};

/// Index of a matrix inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Ordered collection of named learnable matrices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        self.values.iter_mut()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    /// Registers every matrix as a trainable leaf of `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound(self.values.iter().map(|v| tape.param(v.clone())).collect())
    }
}

/// Tape handles for a bound [`ParamSet`], indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    /// Gradients after a backward pass; zeros for parameters the loss did not touch.
    pub fn grads(&self, tape: &Tape) -> Vec<Array2<f64>> {
        self.0
            .iter()
            .map(|&v| {
                tape.grad(v)
                    .cloned()
                    .unwrap_or_else(|| Array2::zeros(tape.shape(v)))
            })
            .collect()
    }
}

impl Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}
