//! Neural layers over the tape: MLPs and the four message-passing
//! backbones (GAT, GCN, SAGE, GIN) behind one encoder type.

mod layers;
mod mlp;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph};
use crate::numerics::{Tape, Var};

pub use layers::{build_encoder, BackboneLayer, Encoder, GatLayer, GcnLayer, GinLayer, SageLayer};
pub use mlp::{Activation, Mlp, MlpSpec};

/// Message-passing operator used by the consistency encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    #[default]
    Gat,
    Gcn,
    Sage,
    Gin,
}

impl BackboneKind {
    pub const ALL: [BackboneKind; 4] = [BackboneKind::Gcn, BackboneKind::Gat, BackboneKind::Sage, BackboneKind::Gin];

    pub fn name(self) -> &'static str {
        match self {
            BackboneKind::Gat => "gat",
            BackboneKind::Gcn => "gcn",
            BackboneKind::Sage => "sage",
            BackboneKind::Gin => "gin",
        }
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gat" => Ok(BackboneKind::Gat),
            "gcn" => Ok(BackboneKind::Gcn),
            "sage" => Ok(BackboneKind::Sage),
            "gin" => Ok(BackboneKind::Gin),
            other => Err(Error::Config(format!("unknown backbone `{other}`"))),
        }
    }
}

/// Graph-derived constant operators, computed once per graph.
#[derive(Debug, Clone)]
pub struct GraphOperators {
    /// Dense binary adjacency `A`.
    pub adjacency: Array2<f64>,
    /// `D^-1/2 (A + I) D^-1/2`.
    pub norm_adj: Array2<f64>,
    /// Attention support: `A`, plus the diagonal when self-loops are on.
    pub attention_mask: Arc<Array2<bool>>,
    /// Row-normalized `A`; isolated rows are zero.
    pub mean_agg: Array2<f64>,
    /// `A + (1 + eps) I` with `eps = 0`.
    pub sum_agg: Array2<f64>,
}

impl GraphOperators {
    /// `attention_self_loops = false` fails on graphs with isolated nodes,
    /// whose attention neighborhood would be empty.
    pub fn new(g: &Graph, attention_self_loops: bool) -> Result<Self> {
        let n = g.n();
        if !attention_self_loops {
            if let Some(i) = (0..n).find(|&i| g.degree(i) == 0) {
                return Err(Error::Config(format!(
                    "node {i} is isolated and attention self-loops are disabled"
                )));
            }
        }
        let adjacency = g.adjacency();
        let mut mask = adjacency.mapv(|v| v != 0.0);
        let mut mean_agg = Array2::zeros((n, n));
        let mut sum_agg = adjacency.clone();
        for i in 0..n {
            if attention_self_loops {
                mask[[i, i]] = true;
            }
            sum_agg[[i, i]] += 1.0;
            let deg = g.degree(i);
            for &j in g.neighbors(i) {
                mean_agg[[i, j]] = 1.0 / deg as f64;
            }
        }
        Ok(Self {
            norm_adj: normalized_adjacency(g),
            adjacency,
            attention_mask: Arc::new(mask),
            mean_agg,
            sum_agg,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Pushes the operators a backbone needs onto `tape` as constants.
    pub fn bind(&self, tape: &mut Tape) -> BoundOperators {
        BoundOperators {
            norm_adj: tape.constant(self.norm_adj.clone()),
            mean_agg: tape.constant(self.mean_agg.clone()),
            sum_agg: tape.constant(self.sum_agg.clone()),
            attention_mask: Arc::clone(&self.attention_mask),
        }
    }
}

/// [`GraphOperators`] living on a specific tape.
#[derive(Debug, Clone)]
pub struct BoundOperators {
    pub norm_adj: Var,
    pub mean_agg: Var,
    pub sum_agg: Var,
    pub attention_mask: Arc<Array2<bool>>,
}
