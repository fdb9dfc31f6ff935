//! Objective terms and the per-node anomaly score.

use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};

use super::config::{CorrelationReduction, G3adConfig, Readout};
use crate::error::{Error, Result};
use crate::nn::{Activation, GcnLayer, Mlp};
use crate::numerics::{Bound, Tape, Var};

/// Added under the square root of the variance product so constant inputs
/// give a zero coefficient instead of NaN.
pub const CORR_EPS: f64 = 1e-12;

/// Absolute Pearson correlation between two equally shaped matrices.
pub fn a_cor(tape: &mut Tape, p: Var, q: Var, reduction: CorrelationReduction) -> Result<Var> {
    let (ps, qs) = (tape.shape(p), tape.shape(q));
    if ps != qs {
        return Err(Error::Shape {
            op: "a_cor",
            lhs: ps,
            rhs: qs,
        });
    }
    if ps.0 * ps.1 < 2 {
        return Err(Error::Contract("a_cor needs at least two entries".into()));
    }
    let (pc, qc) = match reduction {
        CorrelationReduction::Flatten => {
            let mp = tape.mean_all(p);
            let mq = tape.mean_all(q);
            (tape.sub(p, mp)?, tape.sub(q, mq)?)
        }
        CorrelationReduction::ColumnMean => {
            let mp = tape.mean_rows(p);
            let mq = tape.mean_rows(q);
            (tape.sub(p, mp)?, tape.sub(q, mq)?)
        }
    };
    let cross = tape.mul(pc, qc)?;
    let p2 = tape.square(pc);
    let q2 = tape.square(qc);
    let (cov, vp, vq) = match reduction {
        CorrelationReduction::Flatten => (tape.mean_all(cross), tape.mean_all(p2), tape.mean_all(q2)),
        CorrelationReduction::ColumnMean => (tape.mean_rows(cross), tape.mean_rows(p2), tape.mean_rows(q2)),
    };
    let vv = tape.mul(vp, vq)?;
    let vv = tape.add_scalar(vv, CORR_EPS);
    let denom = tape.sqrt(vv);
    let r = tape.div(cov, denom)?;
    let r = tape.abs(r);
    Ok(match reduction {
        CorrelationReduction::Flatten => r,
        CorrelationReduction::ColumnMean => tape.mean_all(r),
    })
}

/// `aCor(Ha, Hc) + aCor(Ht, Hc) + aCor(Ha, Ht)`.
pub fn correlation_constraint(
    tape: &mut Tape,
    h_a: Var,
    h_t: Var,
    h_c: Var,
    reduction: CorrelationReduction,
) -> Result<Var> {
    let ac = a_cor(tape, h_a, h_c, reduction)?;
    let tc = a_cor(tape, h_t, h_c, reduction)?;
    let at = a_cor(tape, h_a, h_t, reduction)?;
    let s = tape.add(ac, tc)?;
    tape.add(s, at)
}

/// Row-gated blend of two sources: `w = tanh(τ([h1 ‖ h2]))` gives two
/// scalars per node and `z_i = w_i0 · h1_i + w_i1 · h2_i`.
///
/// Returns `(z, w)`.
pub fn adaptive_cache(tape: &mut Tape, bound: &Bound, tau: &Mlp, h1: Var, h2: Var) -> Result<(Var, Var)> {
    if tape.shape(h1) != tape.shape(h2) {
        return Err(Error::Shape {
            op: "adaptive_cache",
            lhs: tape.shape(h1),
            rhs: tape.shape(h2),
        });
    }
    if tau.out_dim() != 2 {
        return Err(Error::Config("the caching MLP must emit two gates per node".into()));
    }
    let cat = tape.concat_cols(&[h1, h2])?;
    let logits = tau.forward(tape, bound, cat)?;
    let gates = tape.tanh(logits);
    let g1 = tape.slice_cols(gates, 0, 1)?;
    let g2 = tape.slice_cols(gates, 1, 2)?;
    let a = tape.mul(h1, g1)?;
    let b = tape.mul(h2, g2)?;
    Ok((tape.add(a, b)?, gates))
}

/// Two-layer GCN decoder followed by the squared Frobenius error against
/// the constant `x`. Returns `(x_hat, loss)`.
pub fn reconstruct_attributes(
    tape: &mut Tape,
    bound: &Bound,
    decoder: &[GcnLayer; 2],
    z_a: Var,
    norm_adj: Var,
    x: Var,
) -> Result<(Var, Var)> {
    let r = decoder[0].forward(tape, bound, norm_adj, z_a, Activation::LeakyRelu)?;
    let x_hat = decoder[1].forward(tape, bound, norm_adj, r, Activation::None)?;
    if tape.shape(x_hat) != tape.shape(x) {
        return Err(Error::Shape {
            op: "reconstruct_attributes",
            lhs: tape.shape(x_hat),
            rhs: tape.shape(x),
        });
    }
    let diff = tape.sub(x, x_hat)?;
    let sq = tape.square(diff);
    Ok((x_hat, tape.sum_all(sq)))
}

/// Inner-product decoder `Â = Z Zᵀ` and `‖A − Â‖²_F`. Returns `(a_hat, loss)`.
pub fn reconstruct_topology(tape: &mut Tape, z_t: Var, adjacency: Var) -> Result<(Var, Var)> {
    let a_hat = tape.matmul_nt(z_t, z_t)?;
    let diff = tape.sub(adjacency, a_hat)?;
    let sq = tape.square(diff);
    Ok((a_hat, tape.sum_all(sq)))
}

/// Graph summary `E_g = Readout(H_c)` and
/// `L_cons = ln(sqrt(Σ_i ‖h_i − E_g‖²) + floor)`. Returns `(e_g, loss)`.
pub fn consistency_alignment(
    tape: &mut Tape,
    bound: &Bound,
    h_c: Var,
    readout: Readout,
    scorer: Option<&Mlp>,
    floor: f64,
) -> Result<(Var, Var)> {
    let e_g = match readout {
        Readout::Mean => tape.mean_rows(h_c),
        Readout::Max => tape.max_rows(h_c),
        Readout::Min => tape.min_rows(h_c),
        Readout::Attention => {
            let scorer = scorer.ok_or_else(|| Error::Config("attention readout needs a scorer".into()))?;
            let logits = scorer.forward(tape, bound, h_c)?;
            let row = tape.transpose(logits);
            let mask = Arc::new(Array2::from_elem(tape.shape(row), true));
            let weights = tape.row_softmax_over_neighbors(row, &mask)?;
            tape.matmul(weights, h_c)?
        }
    };
    let diff = tape.sub(h_c, e_g)?;
    let sq = tape.square(diff);
    let total = tape.sum_all(sq);
    let root = tape.sqrt(total);
    let shifted = tape.add_scalar(root, floor);
    Ok((e_g, tape.log(shifted)))
}

/// Component losses of one forward pass. Disabled terms are exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub attr: f64,
    pub topo: f64,
    pub cons: f64,
    pub cc: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `λ1·L_attr + (1 − λ1)·L_topo + λ2·L_cons + L_cc`.
    pub fn combine(attr: f64, topo: f64, cons: f64, cc: f64, cfg: &G3adConfig) -> f64 {
        cfg.lambda1 * attr + (1.0 - cfg.lambda1) * topo + cfg.lambda2 * cons + cc
    }
}

/// Inputs to the per-node score. Absent parts score zero.
#[derive(Debug, Clone, Copy)]
pub struct ScoreInputs<'a> {
    pub x: &'a Array2<f64>,
    pub x_hat: Option<&'a Array2<f64>>,
    pub adjacency: &'a Array2<f64>,
    pub a_hat: Option<&'a Array2<f64>>,
    pub h_c: Option<&'a Array2<f64>>,
    pub e_g: Option<&'a Array2<f64>>,
}

/// `s_i = λ1‖x_i − x̂_i‖² + (1 − λ1)‖a_i − â_i‖² + λ2 ln(‖h_i − E_g‖ + floor)`.
pub fn anomaly_scores(inputs: &ScoreInputs<'_>, cfg: &G3adConfig) -> Result<Array1<f64>> {
    let n = inputs.x.nrows();
    let mut s = Array1::<f64>::zeros(n);
    let row_sq = |a: &Array2<f64>, b: &Array2<f64>| -> Result<Array1<f64>> {
        if a.dim() != b.dim() {
            return Err(Error::Shape {
                op: "anomaly_scores",
                lhs: a.dim(),
                rhs: b.dim(),
            });
        }
        Ok((a - b).mapv(|v| v * v).sum_axis(Axis(1)))
    };
    if cfg.uses_attr() {
        if let Some(x_hat) = inputs.x_hat {
            s += &(row_sq(inputs.x, x_hat)? * cfg.lambda1);
        }
    }
    if cfg.uses_topo() {
        if let Some(a_hat) = inputs.a_hat {
            s += &(row_sq(inputs.adjacency, a_hat)? * (1.0 - cfg.lambda1));
        }
    }
    if cfg.uses_cons() {
        if let (Some(h), Some(e)) = (inputs.h_c, inputs.e_g) {
            let e_b = e.broadcast(h.dim()).ok_or(Error::Shape {
                op: "anomaly_scores",
                lhs: h.dim(),
                rhs: e.dim(),
            })?;
            let dist = row_sq(h, &e_b.to_owned())?;
            s += &(dist.mapv(|d| (d.sqrt() + cfg.cons_floor).ln()) * cfg.lambda2);
        }
    }
    Ok(s)
}
