//! Multi-head scaled-dot-product self-attention as an adjacency builder.
//!
//! Instead of projecting values, the attention weight matrices themselves
//! become graph edges: per head softmax((H·W_Q)(H·W_K)ᵀ / √d_k), averaged
//! over heads and symmetrized. The spatial form runs per time step over
//! pedestrians; the temporal form runs per pedestrian over time steps.

use crate::error::{Error, Result};
use crate::layout;
use crate::rng::SeedStream;
use crate::tape::{Tape, Tensor, TensorId};

/// Learnable projections for one attention module. Inputs of width `d_in`
/// are lifted to `d_model` before the per-head query/key projections.
///
/// `w_v` and `w_o` are the conventional value/output projections; adjacency
/// construction never consumes them, so they stay out of the trainable
/// registry and exist only for variants that reinstate value mixing.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub heads: usize,
    pub d_model: usize,
    pub d_k: usize,
    pub lift: Tensor,
    pub w_q: Vec<Tensor>,
    pub w_k: Vec<Tensor>,
    pub w_v: Vec<Tensor>,
    pub w_o: Tensor,
}

impl AttentionParams {
    pub fn new(d_in: usize, d_model: usize, heads: usize, stream: &SeedStream) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(Error::Config(format!(
                "attention width {d_model} is not divisible by {heads} heads"
            )));
        }
        let d_k = d_model / heads;
        let lift_bound = (1.0 / d_in as f64).sqrt();
        let proj_bound = (1.0 / d_model as f64).sqrt();
        let head_tensors = |tag: &str| -> Vec<Tensor> {
            (0..heads)
                .map(|i| {
                    Tensor::rand_param(
                        vec![d_model, d_k],
                        proj_bound,
                        &stream.fork_idx(tag, i as u64),
                    )
                })
                .collect()
        };
        Ok(AttentionParams {
            heads,
            d_model,
            d_k,
            lift: Tensor::rand_param(vec![d_in, d_model], lift_bound, &stream.fork("lift")),
            w_q: head_tensors("wq"),
            w_k: head_tensors("wk"),
            w_v: head_tensors("wv"),
            w_o: Tensor::rand_param(vec![d_model, d_model], proj_bound, &stream.fork("wo")),
        })
    }

    /// Records the active projections on a tape and registers their names
    /// for gradient harvesting and checkpointing.
    pub fn bind(
        &self,
        tape: &mut Tape,
        prefix: &str,
        registry: &mut Vec<(String, TensorId)>,
    ) -> BoundAttention {
        let lift = tape.leaf(&self.lift);
        registry.push((format!("{prefix}.lift"), lift));
        let mut w_q = Vec::with_capacity(self.heads);
        let mut w_k = Vec::with_capacity(self.heads);
        for i in 0..self.heads {
            let q = tape.leaf(&self.w_q[i]);
            registry.push((format!("{prefix}.wq{i}"), q));
            w_q.push(q);
            let k = tape.leaf(&self.w_k[i]);
            registry.push((format!("{prefix}.wk{i}"), k));
            w_k.push(k);
        }
        BoundAttention {
            heads: self.heads,
            d_model: self.d_model,
            d_k: self.d_k,
            lift,
            w_q,
            w_k,
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.lift"), &self.lift));
        for i in 0..self.heads {
            out.push((format!("{prefix}.wq{i}"), &self.w_q[i]));
            out.push((format!("{prefix}.wk{i}"), &self.w_k[i]));
        }
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.lift"), &mut self.lift));
        for (i, (q, k)) in self.w_q.iter_mut().zip(self.w_k.iter_mut()).enumerate() {
            out.push((format!("{prefix}.wq{i}"), q));
            out.push((format!("{prefix}.wk{i}"), k));
        }
    }
}

/// Tape-resident handles to one attention module's active projections.
#[derive(Debug, Clone)]
pub struct BoundAttention {
    pub heads: usize,
    pub d_model: usize,
    pub d_k: usize,
    pub lift: TensorId,
    pub w_q: Vec<TensorId>,
    pub w_k: Vec<TensorId>,
}

/// Which axis an adjacency stack spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Spatial,
    Temporal,
}

/// Per-slice symmetric adjacency matrices recorded on a tape: T matrices of
/// N×N for the spatial axis, N matrices of T×T for the temporal axis.
#[derive(Debug, Clone)]
pub struct AdjacencyStack {
    pub axis: Axis,
    pub size: usize,
    pub mats: Vec<TensorId>,
}

/// Per-head attention weights for pre-lifted features H (n×d_model),
/// stacked to (heads × n × n). Every row of every head sums to 1.
pub fn attention_weights(tape: &mut Tape, h: TensorId, attn: &BoundAttention) -> Result<TensorId> {
    let shape = tape.shape(h).to_vec();
    if shape.len() != 2 || shape[1] != attn.d_model {
        return Err(Error::shape("attention_weights", &shape, &[0, attn.d_model]));
    }
    let n = shape[0];
    let inv_sqrt_dk = 1.0 / (attn.d_k as f64).sqrt();
    let mut per_head = Vec::with_capacity(attn.heads);
    for i in 0..attn.heads {
        let q = tape.matmul(h, attn.w_q[i])?;
        let k = tape.matmul(h, attn.w_k[i])?;
        let (t_idx, t_shape) = layout::transpose2(n, attn.d_k);
        let kt = tape.gather(k, t_idx, t_shape)?;
        let scores = tape.matmul(q, kt)?;
        let scaled = tape.scale(scores, inv_sqrt_dk);
        per_head.push(tape.softmax_lastdim(scaled)?);
    }
    tape.stack(&per_head)
}

/// One symmetric adjacency matrix from raw slice features (n × d_in): lift,
/// per-head attention, head average, then (M + Mᵀ)/2.
pub fn adjacency_from_features(
    tape: &mut Tape,
    feats: TensorId,
    attn: &BoundAttention,
) -> Result<TensorId> {
    let h = tape.matmul(feats, attn.lift)?;
    let n = tape.shape(h)[0];
    let weights = attention_weights(tape, h, attn)?;
    let mean = mean_over_heads(tape, weights)?;
    let (t_idx, t_shape) = layout::transpose2(n, n);
    let mt = tape.gather(mean, t_idx, t_shape)?;
    let sum = tape.add(mean, mt)?;
    Ok(tape.scale(sum, 0.5))
}

/// Head-mean of an (h × n × n) weight stack, as an (n × n) matrix.
pub fn mean_over_heads(tape: &mut Tape, weights: TensorId) -> Result<TensorId> {
    let shape = tape.shape(weights).to_vec();
    let (h, n) = (shape[0], shape[1]);
    let flat = tape.reshape(weights, vec![h, n * n])?;
    let ones = tape.constant(vec![1.0 / h as f64; h], vec![1, h])?;
    let mean = tape.matmul(ones, flat)?;
    tape.reshape(mean, vec![n, n])
}

/// Spatial adjacency stack: one matrix per time step, from per-step
/// pedestrian feature matrices (N × d_in).
pub fn build_spatial_adjacency(
    tape: &mut Tape,
    per_step_features: &[TensorId],
    attn: &BoundAttention,
) -> Result<AdjacencyStack> {
    let mats = per_step_features
        .iter()
        .map(|f| adjacency_from_features(tape, *f, attn))
        .collect::<Result<Vec<_>>>()?;
    let size = mats.first().map(|m| tape.shape(*m)[0]).unwrap_or(0);
    Ok(AdjacencyStack {
        axis: Axis::Spatial,
        size,
        mats,
    })
}

/// Temporal adjacency stack: one matrix per pedestrian, from per-pedestrian
/// time feature matrices (T × d_in).
pub fn build_temporal_adjacency(
    tape: &mut Tape,
    per_ped_features: &[TensorId],
    attn: &BoundAttention,
) -> Result<AdjacencyStack> {
    let mats = per_ped_features
        .iter()
        .map(|f| adjacency_from_features(tape, *f, attn))
        .collect::<Result<Vec<_>>>()?;
    let size = mats.first().map(|m| tape.shape(*m)[0]).unwrap_or(0);
    Ok(AdjacencyStack {
        axis: Axis::Temporal,
        size,
        mats,
    })
}
