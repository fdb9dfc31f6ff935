use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{xavier_init, Bound, ParamId, ParamSet, Tape, Var, LEAKY_SLOPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Tanh,
    None,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::LeakyRelu => tape.leaky_relu(x, LEAKY_SLOPE),
            Activation::Tanh => tape.tanh(x),
            Activation::None => x,
        }
    }
}

/// Layer widths `[in, h1, ..., out]` and one activation per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    /// LeakyReLU between layers, linear output.
    pub fn hidden_leaky(layer_dims: Vec<usize>) -> Self {
        let layers = layer_dims.len().saturating_sub(1);
        let mut activations = vec![Activation::LeakyRelu; layers];
        if let Some(last) = activations.last_mut() {
            *last = Activation::None;
        }
        Self { layer_dims, activations }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        if self.activations.len() != self.layer_dims.len() - 1 {
            return Err(Error::Config(format!(
                "{} activations for {} layers",
                self.activations.len(),
                self.layer_dims.len() - 1
            )));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::Config("MLP widths must be positive".into()));
        }
        Ok(())
    }
}

/// Bias-free multilayer perceptron: `H = act(... act(X W1ᵀ) W2ᵀ ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    weights: Vec<ParamId>,
    activations: Vec<Activation>,
    in_dim: usize,
    out_dim: usize,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(spec: &MlpSpec, name: &str, params: &mut ParamSet, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let weights = spec
            .layer_dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| params.add(format!("{name}.w{l}"), xavier_init(w[1], w[0], rng)))
            .collect();
        Ok(Self {
            weights,
            activations: spec.activations.clone(),
            in_dim: spec.layer_dims[0],
            out_dim: *spec.layer_dims.last().expect("validated"),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[ParamId] {
        &self.weights
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        for (&w, &act) in self.weights.iter().zip(&self.activations) {
            h = tape.matmul_nt(h, bound[w])?;
            h = act.apply(tape, h);
        }
        Ok(h)
    }
}
