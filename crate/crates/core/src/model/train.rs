use serde::{Deserialize, Serialize};

use super::{ForwardArtifacts, G3adConfig, G3adModel, ModelInputs};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{AdamState, Tape};
use crate::par::Execution;

/// Loss components recorded at one epoch, before that epoch's update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub attr: f64,
    pub topo: f64,
    pub cons: f64,
    pub cc: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub exec: Execution,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 5e-3,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: G3adModel,
    /// Final forward pass after the last update; carries the scores.
    pub artifacts: ForwardArtifacts,
    pub history: Vec<EpochLosses>,
}

/// Full-batch Adam training from a fresh initialization.
pub fn train(g: &Graph, cfg: &G3adConfig, opts: &TrainOptions) -> Result<TrainOutcome> {
    if !(opts.learning_rate > 0.0 && opts.learning_rate.is_finite()) {
        return Err(Error::Config(format!("learning rate {} must be positive", opts.learning_rate)));
    }
    let model = G3adModel::new(cfg, g.n(), g.d(), opts.seed)?;
    let inputs = ModelInputs::new(g, cfg)?;
    train_model(model, &inputs, opts)
}

/// Continues training `model` on prepared inputs.
pub fn train_model(mut model: G3adModel, inputs: &ModelInputs, opts: &TrainOptions) -> Result<TrainOutcome> {
    let mut adam = AdamState::new(model.params(), opts.learning_rate);
    let mut history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let mut tape = Tape::with_execution(opts.exec);
        let bound = model.params().bind(&mut tape);
        let vars = model.forward(&mut tape, &bound, inputs)?;
        let scalar = |v: Option<_>| v.map_or(0.0, |v| tape.scalar(v));
        let record = EpochLosses {
            epoch,
            attr: scalar(vars.l_attr),
            topo: scalar(vars.l_topo),
            cons: scalar(vars.l_cons),
            cc: scalar(vars.l_cc),
            total: tape.scalar(vars.total),
        };
        history.push(record);
        if !record.total.is_finite() {
            return Err(Error::Diverged { epoch, history });
        }
        tape.backward(vars.total)?;
        let grads = bound.grads(&tape);
        match adam.step(model.params_mut(), &grads) {
            Ok(()) => {}
            Err(Error::NonFiniteGradient { .. }) => return Err(Error::Diverged { epoch, history }),
            Err(e) => return Err(e),
        }
        log::debug!("epoch {epoch}: loss {:.6}", record.total);
    }
    let artifacts = model.evaluate_inputs(inputs, opts.exec)?;
    if !artifacts.losses.total.is_finite() || artifacts.scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Diverged {
            epoch: opts.epochs,
            history,
        });
    }
    Ok(TrainOutcome {
        model,
        artifacts,
        history,
    })
}
