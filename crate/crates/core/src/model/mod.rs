//! The guarded detector: three encoders, correlation constraint, adaptive
//! caching, two decoders, global consistency alignment, and scoring.

mod checkpoint;
pub mod config;
pub mod losses;
mod train;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{build_encoder, BoundOperators, Encoder, GcnLayer, GraphOperators, Mlp, MlpSpec};
use crate::numerics::{seeded_rng, Bound, ParamSet, Tape, Var};
use crate::par::Execution;

pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{Ablations, Architecture, CorrelationReduction, G3adConfig, Readout};
pub use losses::{anomaly_scores, LossBreakdown, ScoreInputs};
pub use train::{train, train_model, EpochLosses, TrainOptions, TrainOutcome};

/// Constant per-graph tensors shared by every epoch.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub x: Array2<f64>,
    pub ops: GraphOperators,
}

impl ModelInputs {
    pub fn new(g: &Graph, cfg: &G3adConfig) -> Result<Self> {
        let self_loops = cfg.attention_self_loops || cfg.backbone != crate::nn::BackboneKind::Gat;
        Ok(Self {
            x: g.attributes().clone(),
            ops: GraphOperators::new(g, self_loops)?,
        })
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.ops.adjacency
    }
}

struct BoundInputs {
    x: Var,
    adjacency: Var,
    ops: BoundOperators,
}

/// Tape handles produced by one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub h_a: Option<Var>,
    pub h_t: Option<Var>,
    pub h_c: Option<Var>,
    pub z_a: Option<Var>,
    pub z_t: Option<Var>,
    pub x_hat: Option<Var>,
    pub a_hat: Option<Var>,
    pub e_g: Option<Var>,
    pub l_attr: Option<Var>,
    pub l_topo: Option<Var>,
    pub l_cons: Option<Var>,
    pub l_cc: Option<Var>,
    pub total: Var,
}

/// Values of one forward pass plus the resulting scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardArtifacts {
    pub h_a: Option<Array2<f64>>,
    pub h_t: Option<Array2<f64>>,
    pub h_c: Option<Array2<f64>>,
    pub z_a: Option<Array2<f64>>,
    pub z_t: Option<Array2<f64>>,
    pub x_hat: Option<Array2<f64>>,
    pub a_hat: Option<Array2<f64>>,
    pub e_g: Option<Array2<f64>>,
    pub losses: LossBreakdown,
    pub scores: Array1<f64>,
}

/// Learnable components. Every component is always allocated so that
/// variants of the same seed start from identical weights; the
/// configuration decides which ones a forward pass touches.
#[derive(Debug, Clone, PartialEq)]
pub struct G3adModel {
    cfg: G3adConfig,
    n: usize,
    d: usize,
    params: ParamSet,
    encoder: Encoder,
    attr_encoder: Mlp,
    topo_encoder: Mlp,
    tau_attr: Mlp,
    tau_topo: Mlp,
    decoder: [GcnLayer; 2],
    readout_scorer: Mlp,
}

impl G3adModel {
    /// Xavier-initialized model for graphs with `n` nodes and `d` attributes.
    pub fn new(cfg: &G3adConfig, n: usize, d: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if n == 0 || d == 0 {
            return Err(Error::Config("graph must have nodes and attributes".into()));
        }
        let mut rng = seeded_rng(seed);
        Self::with_rng(cfg, n, d, &mut rng)
    }

    fn with_rng<R: Rng + ?Sized>(cfg: &G3adConfig, n: usize, d: usize, rng: &mut R) -> Result<Self> {
        let e = cfg.embed_dim;
        let mut params = ParamSet::new();
        let encoder = build_encoder(cfg.backbone, d, e, e, &mut params, rng)?;
        let attr_encoder = Mlp::new(&MlpSpec::hidden_leaky(vec![d, e, e]), "attr_encoder", &mut params, rng)?;
        let topo_encoder = Mlp::new(&MlpSpec::hidden_leaky(vec![n, e, e]), "topo_encoder", &mut params, rng)?;
        let tau_attr = Mlp::new(&MlpSpec::hidden_leaky(vec![2 * e, e, 2]), "tau_attr", &mut params, rng)?;
        let tau_topo = Mlp::new(&MlpSpec::hidden_leaky(vec![2 * e, e, 2]), "tau_topo", &mut params, rng)?;
        let decoder = [
            GcnLayer::new("attr_decoder.gcn0", e, e, &mut params, rng),
            GcnLayer::new("attr_decoder.gcn1", e, d, &mut params, rng),
        ];
        let readout_scorer = Mlp::new(&MlpSpec::hidden_leaky(vec![e, 1]), "readout", &mut params, rng)?;
        Ok(Self {
            cfg: cfg.clone(),
            n,
            d,
            params,
            encoder,
            attr_encoder,
            topo_encoder,
            tau_attr,
            tau_topo,
            decoder,
            readout_scorer,
        })
    }

    pub fn config(&self) -> &G3adConfig {
        &self.cfg
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check_graph(&self, inputs: &ModelInputs) -> Result<()> {
        if inputs.x.dim() != (self.n, self.d) {
            return Err(Error::Shape {
                op: "model input",
                lhs: (self.n, self.d),
                rhs: inputs.x.dim(),
            });
        }
        Ok(())
    }

    /// Records the full objective on `tape`.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, inputs: &ModelInputs) -> Result<ForwardVars> {
        self.check_graph(inputs)?;
        let cfg = &self.cfg;
        let gi = BoundInputs {
            x: tape.constant(inputs.x.clone()),
            adjacency: tape.constant(inputs.ops.adjacency.clone()),
            ops: inputs.ops.bind(tape),
        };

        let (h_a, h_t, h_c) = match cfg.arch {
            Architecture::Full => {
                let h_a = self.attr_encoder.forward(tape, bound, gi.x)?;
                let h_t = self.topo_encoder.forward(tape, bound, gi.adjacency)?;
                let h_c = self.encoder.forward(tape, bound, gi.x, &gi.ops)?;
                (h_a, h_t, Some(h_c))
            }
            Architecture::Shared => {
                let h_c = self.encoder.forward(tape, bound, gi.x, &gi.ops)?;
                (h_c, h_c, Some(h_c))
            }
            Architecture::Separated => {
                let h_a = self.attr_encoder.forward(tape, bound, gi.x)?;
                let h_t = self.topo_encoder.forward(tape, bound, gi.adjacency)?;
                (h_a, h_t, None)
            }
        };

        let l_cc = if cfg.uses_correlation() {
            Some(match h_c {
                Some(h_c) => losses::correlation_constraint(tape, h_a, h_t, h_c, cfg.correlation_reduction)?,
                None => losses::a_cor(tape, h_a, h_t, cfg.correlation_reduction)?,
            })
        } else {
            None
        };

        let cache = |tape: &mut Tape, tau: &Mlp, aux: Var| -> Result<Var> {
            match h_c {
                Some(h_c) => Ok(losses::adaptive_cache(tape, bound, tau, aux, h_c)?.0),
                None => Ok(aux),
            }
        };

        let (mut z_a, mut x_hat, mut l_attr) = (None, None, None);
        if cfg.uses_attr() {
            let z = cache(tape, &self.tau_attr, h_a)?;
            let (xh, l) = losses::reconstruct_attributes(tape, bound, &self.decoder, z, gi.ops.norm_adj, gi.x)?;
            (z_a, x_hat, l_attr) = (Some(z), Some(xh), Some(l));
        }

        let (mut z_t, mut a_hat, mut l_topo) = (None, None, None);
        if cfg.uses_topo() {
            let z = cache(tape, &self.tau_topo, h_t)?;
            let (ah, l) = losses::reconstruct_topology(tape, z, gi.adjacency)?;
            (z_t, a_hat, l_topo) = (Some(z), Some(ah), Some(l));
        }

        let (mut e_g, mut l_cons) = (None, None);
        if cfg.uses_cons() {
            let h_c = h_c.expect("consistency branch exists");
            let (e, l) = losses::consistency_alignment(
                tape,
                bound,
                h_c,
                cfg.readout,
                Some(&self.readout_scorer),
                cfg.cons_floor,
            )?;
            (e_g, l_cons) = (Some(e), Some(l));
        }

        let mut terms = Vec::with_capacity(4);
        if let Some(l) = l_attr {
            terms.push(tape.scale(l, cfg.lambda1));
        }
        if let Some(l) = l_topo {
            terms.push(tape.scale(l, 1.0 - cfg.lambda1));
        }
        if let Some(l) = l_cons {
            terms.push(tape.scale(l, cfg.lambda2));
        }
        if let Some(l) = l_cc {
            terms.push(l);
        }
        let mut total = terms[0];
        for &t in &terms[1..] {
            total = tape.add(total, t)?;
        }

        Ok(ForwardVars {
            h_a: Some(h_a),
            h_t: Some(h_t),
            h_c,
            z_a,
            z_t,
            x_hat,
            a_hat,
            e_g,
            l_attr,
            l_topo,
            l_cons,
            l_cc,
            total,
        })
    }

    /// Extracts values from `vars` and computes per-node scores.
    pub fn artifacts(&self, tape: &Tape, vars: &ForwardVars, inputs: &ModelInputs) -> Result<ForwardArtifacts> {
        let get = |v: Option<Var>| v.map(|v| tape.value(v).clone());
        let scalar = |v: Option<Var>| v.map_or(0.0, |v| tape.scalar(v));
        let x_hat = get(vars.x_hat);
        let a_hat = get(vars.a_hat);
        let h_c = get(vars.h_c);
        let e_g = get(vars.e_g);
        let scores = anomaly_scores(
            &ScoreInputs {
                x: &inputs.x,
                x_hat: x_hat.as_ref(),
                adjacency: inputs.adjacency(),
                a_hat: a_hat.as_ref(),
                h_c: h_c.as_ref(),
                e_g: e_g.as_ref(),
            },
            &self.cfg,
        )?;
        Ok(ForwardArtifacts {
            h_a: get(vars.h_a),
            h_t: get(vars.h_t),
            h_c,
            z_a: get(vars.z_a),
            z_t: get(vars.z_t),
            x_hat,
            a_hat,
            e_g,
            losses: LossBreakdown {
                attr: scalar(vars.l_attr),
                topo: scalar(vars.l_topo),
                cons: scalar(vars.l_cons),
                cc: scalar(vars.l_cc),
                total: tape.scalar(vars.total),
            },
            scores,
        })
    }

    /// Forward pass without gradients.
    pub fn evaluate(&self, g: &Graph, exec: Execution) -> Result<ForwardArtifacts> {
        let inputs = ModelInputs::new(g, &self.cfg)?;
        self.evaluate_inputs(&inputs, exec)
    }

    pub fn evaluate_inputs(&self, inputs: &ModelInputs, exec: Execution) -> Result<ForwardArtifacts> {
        let mut tape = Tape::with_execution(exec);
        let bound = self.params.bind(&mut tape);
        let vars = self.forward(&mut tape, &bound, inputs)?;
        self.artifacts(&tape, &vars, inputs)
    }

    /// Scores of `g` under the current weights.
    pub fn score(&self, g: &Graph, exec: Execution) -> Result<Array1<f64>> {
        Ok(self.evaluate(g, exec)?.scores)
    }

    /// The same model for a graph relabeled by `perm` (node `i` becomes
    /// `perm[i]`). Only the topology encoder's input weights depend on node
    /// identity; their columns move with the nodes.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Contract("permutation length differs from node count".into()));
        }
        let mut out = self.clone();
        let first = self.topo_encoder.weights()[0];
        let w = self.params.get(first);
        let target = out.params.get_mut(first);
        for (i, &p) in perm.iter().enumerate() {
            target.column_mut(p).assign(&w.column(i));
        }
        Ok(out)
    }
}
