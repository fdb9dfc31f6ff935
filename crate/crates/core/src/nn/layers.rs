use rand::Rng;

use super::mlp::{Activation, Mlp, MlpSpec};
use super::{BackboneKind, BoundOperators};
use crate::error::{Error, Result};
use crate::numerics::{xavier_init, Bound, ParamId, ParamSet, Tape, Var, LEAKY_SLOPE};

/// Single-head graph attention.
///
/// `e_ij = LeakyReLU(aᵀ [W x_i ‖ W x_j])`, normalized by a softmax over the
/// attention neighborhood of `i`, then `h_i = Σ_j α_ij W x_j`. The vector
/// `a` is stored as its two halves, one scoring the center node and one
/// scoring the neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub w: ParamId,
    pub att_self: ParamId,
    pub att_neigh: ParamId,
}

impl GatLayer {
    pub fn new<R: Rng + ?Sized>(name: &str, in_dim: usize, out_dim: usize, params: &mut ParamSet, rng: &mut R) -> Self {
        Self {
            w: params.add(format!("{name}.w"), xavier_init(out_dim, in_dim, rng)),
            att_self: params.add(format!("{name}.att_self"), xavier_init(out_dim, 1, rng)),
            att_neigh: params.add(format!("{name}.att_neigh"), xavier_init(out_dim, 1, rng)),
        }
    }

    /// Output and the attention matrix `α`.
    pub fn forward_with_attention(&self, tape: &mut Tape, bound: &Bound, x: Var, ops: &BoundOperators) -> Result<(Var, Var)> {
        let wx = tape.matmul_nt(x, bound[self.w])?;
        let s_self = tape.matmul(wx, bound[self.att_self])?;
        let s_neigh = tape.matmul(wx, bound[self.att_neigh])?;
        let e = tape.pairwise_sum(s_self, s_neigh)?;
        let e = tape.leaky_relu(e, LEAKY_SLOPE);
        let alpha = tape.row_softmax_over_neighbors(e, &ops.attention_mask)?;
        Ok((tape.matmul(alpha, wx)?, alpha))
    }
}

/// `act(Ã H Wᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub w: ParamId,
}

impl GcnLayer {
    pub fn new<R: Rng + ?Sized>(name: &str, in_dim: usize, out_dim: usize, params: &mut ParamSet, rng: &mut R) -> Self {
        Self {
            w: params.add(format!("{name}.w"), xavier_init(out_dim, in_dim, rng)),
        }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, norm_adj: Var, h: Var, act: Activation) -> Result<Var> {
        let hw = tape.matmul_nt(h, bound[self.w])?;
        let out = tape.matmul(norm_adj, hw)?;
        Ok(act.apply(tape, out))
    }
}

/// GraphSAGE with mean aggregation: `act(W [x_i ‖ mean_{j∈N_i} x_j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayer {
    pub w: ParamId,
}

impl SageLayer {
    pub fn new<R: Rng + ?Sized>(name: &str, in_dim: usize, out_dim: usize, params: &mut ParamSet, rng: &mut R) -> Self {
        Self {
            w: params.add(format!("{name}.w"), xavier_init(out_dim, 2 * in_dim, rng)),
        }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var, ops: &BoundOperators, act: Activation) -> Result<Var> {
        let neigh = tape.matmul(ops.mean_agg, x)?;
        let cat = tape.concat_cols(&[x, neigh])?;
        let out = tape.matmul_nt(cat, bound[self.w])?;
        Ok(act.apply(tape, out))
    }
}

/// GIN with `eps = 0`: `act(MLP(x_i + Σ_{j∈N_i} x_j))`, inner MLP with one
/// hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    pub mlp: Mlp,
}

impl GinLayer {
    pub fn new<R: Rng + ?Sized>(name: &str, in_dim: usize, out_dim: usize, params: &mut ParamSet, rng: &mut R) -> Result<Self> {
        let spec = MlpSpec::hidden_leaky(vec![in_dim, out_dim, out_dim]);
        Ok(Self {
            mlp: Mlp::new(&spec, name, params, rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var, ops: &BoundOperators, act: Activation) -> Result<Var> {
        let agg = tape.matmul(ops.sum_agg, x)?;
        let out = self.mlp.forward(tape, bound, agg)?;
        Ok(act.apply(tape, out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackboneLayer {
    Gat(GatLayer),
    Gcn(GcnLayer),
    Sage(SageLayer),
    Gin(GinLayer),
}

impl BackboneLayer {
    pub fn new<R: Rng + ?Sized>(
        kind: BackboneKind,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        params: &mut ParamSet,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match kind {
            BackboneKind::Gat => BackboneLayer::Gat(GatLayer::new(name, in_dim, out_dim, params, rng)),
            BackboneKind::Gcn => BackboneLayer::Gcn(GcnLayer::new(name, in_dim, out_dim, params, rng)),
            BackboneKind::Sage => BackboneLayer::Sage(SageLayer::new(name, in_dim, out_dim, params, rng)),
            BackboneKind::Gin => BackboneLayer::Gin(GinLayer::new(name, in_dim, out_dim, params, rng)?),
        })
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var, ops: &BoundOperators, act: Activation) -> Result<Var> {
        match self {
            BackboneLayer::Gat(l) => {
                let (h, _) = l.forward_with_attention(tape, bound, x, ops)?;
                Ok(act.apply(tape, h))
            }
            BackboneLayer::Gcn(l) => l.forward(tape, bound, ops.norm_adj, x, act),
            BackboneLayer::Sage(l) => l.forward(tape, bound, x, ops, act),
            BackboneLayer::Gin(l) => l.forward(tape, bound, x, ops, act),
        }
    }
}

/// Two stacked backbone layers with LeakyReLU in between and a linear
/// output.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    kind: BackboneKind,
    layers: [BackboneLayer; 2],
    out_dim: usize,
}

impl Encoder {
    pub fn kind(&self) -> BackboneKind {
        self.kind
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn layers(&self) -> &[BackboneLayer; 2] {
        &self.layers
    }

    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var, ops: &BoundOperators) -> Result<Var> {
        let h = self.layers[0].forward(tape, bound, x, ops, Activation::LeakyRelu)?;
        self.layers[1].forward(tape, bound, h, ops, Activation::None)
    }
}

/// A two-layer encoder of the given kind producing `n × out_dim` embeddings.
pub fn build_encoder<R: Rng + ?Sized>(
    kind: BackboneKind,
    in_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    params: &mut ParamSet,
    rng: &mut R,
) -> Result<Encoder> {
    if in_dim == 0 || hidden_dim == 0 || out_dim == 0 {
        return Err(Error::Config("encoder dimensions must be positive".into()));
    }
    let first = BackboneLayer::new(kind, &format!("encoder.{kind}0"), in_dim, hidden_dim, params, rng)?;
    let second = BackboneLayer::new(kind, &format!("encoder.{kind}1"), hidden_dim, out_dim, params, rng)?;
    Ok(Encoder {
        kind,
        layers: [first, second],
        out_dim,
    })
}
