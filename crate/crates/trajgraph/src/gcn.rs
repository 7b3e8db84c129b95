//! Degree-normalized graph convolutions over both graph axes, and the
//! combined spatial→temporal block.
//!
//! Each convolution computes PReLU(norm(A)·X·W) where norm adds self-loops
//! and rescales symmetrically: out_ij = Â_ij / sqrt(deg_i · deg_j) with
//! Â = A + I. The spatial form runs per time step over pedestrian nodes,
//! the temporal form per pedestrian over time-step nodes.

use std::fmt;
use std::str::FromStr;

use crate::attention::{
    build_spatial_adjacency, build_temporal_adjacency, AdjacencyStack, AttentionParams,
    BoundAttention,
};
use crate::error::{Error, Result};
use crate::layout;
use crate::nn::{BoundConv, ConvParams};
use crate::rng::SeedStream;
use crate::tape::{Tape, Tensor, TensorId};

/// Which graph axes the block applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Spatial graph convolution only.
    S,
    /// Temporal graph convolution only.
    T,
    /// Spatial followed by temporal (the full block).
    ST,
}

impl Variant {
    pub fn has_spatial(self) -> bool {
        matches!(self, Variant::S | Variant::ST)
    }

    pub fn has_temporal(self) -> bool {
        matches!(self, Variant::T | Variant::ST)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::S => "S",
            Variant::T => "T",
            Variant::ST => "ST",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(Variant::S),
            "T" => Ok(Variant::T),
            "ST" => Ok(Variant::ST),
            other => Err(Error::Config(format!(
                "unknown variant {other:?}; expected S, T, or ST"
            ))),
        }
    }
}

/// Trainable weights for one spatial + one temporal graph convolution.
#[derive(Debug, Clone)]
pub struct GcnLayerParams {
    pub w_t: Tensor,
    pub w_n: Tensor,
    pub prelu_slope_spatial: Tensor,
    pub prelu_slope_temporal: Tensor,
}

impl GcnLayerParams {
    pub fn new(d_spatial: usize, d_temporal: usize, stream: &SeedStream) -> Self {
        GcnLayerParams {
            w_t: Tensor::rand_param(
                vec![d_spatial, d_spatial],
                (1.0 / d_spatial as f64).sqrt(),
                &stream.fork("w_t"),
            ),
            w_n: Tensor::rand_param(
                vec![d_temporal, d_temporal],
                (1.0 / d_temporal as f64).sqrt(),
                &stream.fork("w_n"),
            ),
            prelu_slope_spatial: Tensor::scalar_param(0.25),
            prelu_slope_temporal: Tensor::scalar_param(0.25),
        }
    }

    pub fn bind(
        &self,
        tape: &mut Tape,
        prefix: &str,
        registry: &mut Vec<(String, TensorId)>,
    ) -> BoundGcn {
        let w_t = tape.leaf(&self.w_t);
        registry.push((format!("{prefix}.w_t"), w_t));
        let slope_spatial = tape.leaf(&self.prelu_slope_spatial);
        registry.push((format!("{prefix}.slope_spatial"), slope_spatial));
        let w_n = tape.leaf(&self.w_n);
        registry.push((format!("{prefix}.w_n"), w_n));
        let slope_temporal = tape.leaf(&self.prelu_slope_temporal);
        registry.push((format!("{prefix}.slope_temporal"), slope_temporal));
        BoundGcn {
            w_t,
            w_n,
            slope_spatial,
            slope_temporal,
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.w_t"), &self.w_t));
        out.push((format!("{prefix}.slope_spatial"), &self.prelu_slope_spatial));
        out.push((format!("{prefix}.w_n"), &self.w_n));
        out.push((format!("{prefix}.slope_temporal"), &self.prelu_slope_temporal));
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.w_t"), &mut self.w_t));
        out.push((
            format!("{prefix}.slope_spatial"),
            &mut self.prelu_slope_spatial,
        ));
        out.push((format!("{prefix}.w_n"), &mut self.w_n));
        out.push((
            format!("{prefix}.slope_temporal"),
            &mut self.prelu_slope_temporal,
        ));
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundGcn {
    pub w_t: TensorId,
    pub w_n: TensorId,
    pub slope_spatial: TensorId,
    pub slope_temporal: TensorId,
}

/// Plain-matrix symmetric normalization: out_ij = Â_ij / sqrt(deg_i · deg_j)
/// with Â = A + I and deg the row sums of Â. Degrees never vanish because
/// Â_ii ≥ 1.
pub fn normalize_adjacency(a: &[f64], n: usize) -> Result<Vec<f64>> {
    validate_adjacency(a, n)?;
    let mut hat = a.to_vec();
    for i in 0..n {
        hat[i * n + i] += 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| hat[i * n..(i + 1) * n].iter().sum()).collect();
    let mut out = hat;
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    Ok(out)
}

fn validate_adjacency(a: &[f64], n: usize) -> Result<()> {
    if a.len() != n * n {
        return Err(Error::shape("normalize_adjacency", &[a.len()], &[n, n]));
    }
    for i in 0..n {
        for j in 0..n {
            if a[i * n + j] < 0.0 {
                return Err(Error::Contract(format!(
                    "adjacency entry ({i},{j}) is negative"
                )));
            }
            if a[i * n + j] != a[j * n + i] {
                return Err(Error::Contract(format!(
                    "adjacency is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Tape-resident normalization with the same arithmetic as
/// [`normalize_adjacency`]: the divisor is sqrt of the degree outer product,
/// so cases with exact square degrees stay exact, and gradients flow through
/// the degrees into the attention that produced A.
pub fn normalize_on_tape(tape: &mut Tape, a: TensorId) -> Result<TensorId> {
    let shape = tape.shape(a).to_vec();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::shape("normalize_adjacency", &shape, &shape));
    }
    let n = shape[0];
    validate_adjacency(tape.value(a), n)?;
    let mut eye = vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    let eye = tape.constant(eye, vec![n, n])?;
    let hat = tape.add(a, eye)?;
    let ones = tape.constant(vec![1.0; n], vec![n, 1])?;
    let deg = tape.matmul(hat, ones)?;
    let (t_idx, t_shape) = layout::transpose2(n, 1);
    let deg_row = tape.gather(deg, t_idx, t_shape)?;
    let outer = tape.matmul(deg, deg_row)?;
    let scale = tape.sqrt(outer)?;
    tape.div(hat, scale)
}

/// Graph convolution over one axis: per slice, PReLU(norm(A)·X·W). Slices
/// are (nodes × d_in) matrices paired with same-order adjacency matrices.
fn graph_conv(
    tape: &mut Tape,
    slices: &[TensorId],
    stack: &AdjacencyStack,
    w: TensorId,
    slope: TensorId,
) -> Result<Vec<TensorId>> {
    if slices.len() != stack.mats.len() {
        return Err(Error::Contract(format!(
            "{} feature slices but {} adjacency matrices",
            slices.len(),
            stack.mats.len()
        )));
    }
    let d_in = tape.shape(w)[0];
    let mut out = Vec::with_capacity(slices.len());
    for (x, a) in slices.iter().zip(&stack.mats) {
        let sx = tape.shape(*x).to_vec();
        if sx.len() != 2 || sx[1] != d_in || sx[0] != tape.shape(*a)[0] {
            return Err(Error::shape("graph_conv", &sx, tape.shape(*a)));
        }
        let norm = normalize_on_tape(tape, *a)?;
        let mixed = tape.matmul(norm, *x)?;
        let projected = tape.matmul(mixed, w)?;
        out.push(tape.prelu(projected, slope)?);
    }
    Ok(out)
}

/// Spatial graph convolution: per time step t, PReLU(norm(A_t)·X_t·W_t).
pub fn spatial_graph_conv(
    tape: &mut Tape,
    per_step: &[TensorId],
    stack: &AdjacencyStack,
    gcn: &BoundGcn,
) -> Result<Vec<TensorId>> {
    graph_conv(tape, per_step, stack, gcn.w_t, gcn.slope_spatial)
}

/// Temporal graph convolution: per pedestrian n, PReLU(norm(A_n)·X_n·W_n).
pub fn temporal_graph_conv(
    tape: &mut Tape,
    per_ped: &[TensorId],
    stack: &AdjacencyStack,
    gcn: &BoundGcn,
) -> Result<Vec<TensorId>> {
    graph_conv(tape, per_ped, stack, gcn.w_n, gcn.slope_temporal)
}

/// Every parameter of the spatial+temporal block: two attention modules,
/// the two graph-convolution weights, and the 1-wide convolution that maps
/// spatial output width to the temporal feature width.
#[derive(Debug, Clone)]
pub struct StBlockParams {
    pub attn_spatial: AttentionParams,
    pub attn_temporal: AttentionParams,
    pub gcn: GcnLayerParams,
    pub inter: ConvParams,
}

/// Feature width at block entry (matches the bivariate-Gaussian parameter
/// count so the decoder entry width equals the block entry width).
pub const D_LIFT: usize = 5;

impl StBlockParams {
    pub fn new(d_model: usize, heads: usize, stream: &SeedStream) -> Result<Self> {
        Ok(StBlockParams {
            attn_spatial: AttentionParams::new(D_LIFT, d_model, heads, &stream.fork("attn_s"))?,
            attn_temporal: AttentionParams::new(d_model, d_model, heads, &stream.fork("attn_t"))?,
            gcn: GcnLayerParams::new(D_LIFT, d_model, &stream.fork("gcn")),
            inter: ConvParams::new(D_LIFT, d_model, 1, &stream.fork("inter")),
        })
    }

    pub fn bind(
        &self,
        tape: &mut Tape,
        registry: &mut Vec<(String, TensorId)>,
    ) -> BoundStBlock {
        BoundStBlock {
            attn_spatial: self.attn_spatial.bind(tape, "attn_s", registry),
            attn_temporal: self.attn_temporal.bind(tape, "attn_t", registry),
            gcn: self.gcn.bind(tape, "gcn", registry),
            inter: self.inter.bind(tape, "inter", registry),
        }
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        self.attn_spatial.visit("attn_s", out);
        self.attn_temporal.visit("attn_t", out);
        self.gcn.visit("gcn", out);
        self.inter.visit("inter", out);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.attn_spatial.visit_mut("attn_s", out);
        self.attn_temporal.visit_mut("attn_t", out);
        self.gcn.visit_mut("gcn", out);
        self.inter.visit_mut("inter", out);
    }
}

#[derive(Debug, Clone)]
pub struct BoundStBlock {
    pub attn_spatial: BoundAttention,
    pub attn_temporal: BoundAttention,
    pub gcn: BoundGcn,
    pub inter: BoundConv,
}

/// Full block: spatial attention+convolution per time step, a 1-wide
/// feature convolution, then temporal attention+convolution per pedestrian.
/// Variant S skips the temporal convolution, variant T the spatial one; the
/// output shape (d_model × T × N) is the same for all variants.
pub fn st_block_forward(
    tape: &mut Tape,
    x: TensorId,
    block: &BoundStBlock,
    variant: Variant,
) -> Result<TensorId> {
    let shape = tape.shape(x).to_vec();
    if shape.len() != 3 || shape[0] != D_LIFT {
        return Err(Error::shape("st_block_forward", &shape, &[D_LIFT, 0, 0]));
    }
    let (t_len, n_len) = (shape[1], shape[2]);

    let spat = if variant.has_spatial() {
        let per_t: Vec<TensorId> = (0..t_len)
            .map(|t| {
                let (idx, s) = layout::time_slice_rows(D_LIFT, t_len, n_len, t);
                tape.gather(x, idx, s)
            })
            .collect::<Result<_>>()?;
        let adj = build_spatial_adjacency(tape, &per_t, &block.attn_spatial)?;
        let convolved = spatial_graph_conv(tape, &per_t, &adj, &block.gcn)?;
        let stacked = tape.stack(&convolved)?;
        let (idx, s) = layout::permute3([t_len, n_len, D_LIFT], [2, 0, 1]);
        tape.gather(stacked, idx, s)?
    } else {
        x
    };

    let xn = block.inter.apply(tape, spat)?;
    let d_model = tape.shape(xn)[0];

    if variant.has_temporal() {
        let per_n: Vec<TensorId> = (0..n_len)
            .map(|n| {
                let (idx, s) = layout::node_slice_rows(d_model, t_len, n_len, n);
                tape.gather(xn, idx, s)
            })
            .collect::<Result<_>>()?;
        let adj = build_temporal_adjacency(tape, &per_n, &block.attn_temporal)?;
        let convolved = temporal_graph_conv(tape, &per_n, &adj, &block.gcn)?;
        let stacked = tape.stack(&convolved)?;
        let (idx, s) = layout::permute3([n_len, t_len, d_model], [2, 1, 0]);
        tape.gather(stacked, idx, s)
    } else {
        Ok(xn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::grad_check;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalize_single_isolated_node() {
        assert_eq!(normalize_adjacency(&[0.0], 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn normalize_two_node_ring_is_exactly_half() {
        let out = normalize_adjacency(&[0.0, 1.0, 1.0, 0.0], 2).unwrap();
        assert_eq!(out, vec![0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn normalize_zeros_is_exactly_identity() {
        let out = normalize_adjacency(&vec![0.0; 9], 3).unwrap();
        let mut eye = vec![0.0; 9];
        (0..3).for_each(|i| eye[i * 3 + i] = 1.0);
        assert_eq!(out, eye);
    }

    #[test]
    fn normalize_rejects_asymmetry_and_negatives() {
        assert!(matches!(
            normalize_adjacency(&[0.0, 1.0, 0.5, 0.0], 2),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            normalize_adjacency(&[0.0, -1.0, -1.0, 0.0], 2),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn tape_normalization_matches_plain_version() {
        let n = 4;
        let mut raw = vec![0.0; n * n];
        SeedStream::from_seed(3).fill_uniform(&mut raw, 0.5);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = (raw[i * n + j] + raw[j * n + i]).abs();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let want = normalize_adjacency(&a, n).unwrap();
        let mut tape = Tape::new();
        let ta = tape.constant(a, vec![n, n]).unwrap();
        let norm = normalize_on_tape(&mut tape, ta).unwrap();
        for (got, want) in tape.value(norm).iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        // The exact cases carry over to the tape path.
        let two = tape.constant(vec![0.0, 1.0, 1.0, 0.0], vec![2, 2]).unwrap();
        let norm = normalize_on_tape(&mut tape, two).unwrap();
        assert_eq!(tape.value(norm), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn normalized_spectral_radius_is_at_most_one() {
        for n in [2usize, 5, 9, 16] {
            let mut raw = vec![0.0; n * n];
            SeedStream::from_seed(n as u64).fill_uniform(&mut raw, 1.0);
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = (raw[i * n + j]).abs();
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            let m = normalize_adjacency(&a, n).unwrap();
            // Power iteration for the dominant absolute eigenvalue.
            let mut v = vec![1.0; n];
            let mut radius = 0.0;
            for _ in 0..200 {
                let mut next = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        next[i] += m[i * n + j] * v[j];
                    }
                }
                radius = next.iter().map(|x| x * x).sum::<f64>().sqrt()
                    / v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
                v = next.iter().map(|x| x / norm).collect();
            }
            assert!(radius <= 1.0 + 1e-9, "n={n}: spectral radius {radius}");
        }
    }

    fn dense_oracle_conv(a: &[f64], x: &[f64], w: &[f64], slope: f64, n: usize, d: usize) -> Vec<f64> {
        let norm = normalize_adjacency(a, n).unwrap();
        let mut mixed = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..n {
                for f in 0..d {
                    mixed[i * d + f] += norm[i * n + j] * x[j * d + f];
                }
            }
        }
        let mut proj = vec![0.0; n * d];
        for i in 0..n {
            for f in 0..d {
                for g in 0..d {
                    proj[i * d + f] += mixed[i * d + g] * w[g * d + f];
                }
            }
        }
        proj.iter()
            .map(|v| if *v > 0.0 { *v } else { slope * v })
            .collect()
    }

    #[test]
    fn spatial_conv_single_node_reduces_to_projection() {
        // N=1: the normalized factor is the 1×1 identity, so the output is
        // PReLU(x·W).
        let d = D_LIFT;
        let mut x = vec![0.0; d];
        SeedStream::from_seed(41).fill_uniform(&mut x, 1.0);
        let mut w = vec![0.0; d * d];
        SeedStream::from_seed(42).fill_uniform(&mut w, 1.0);

        let mut tape = Tape::new();
        let tx = tape.constant(x.clone(), vec![1, d]).unwrap();
        let ta = tape.constant(vec![0.7], vec![1, 1]).unwrap();
        let tw = tape.constant(w.clone(), vec![d, d]).unwrap();
        let slope = tape.scalar(0.25);
        let gcn = BoundGcn {
            w_t: tw,
            w_n: tw,
            slope_spatial: slope,
            slope_temporal: slope,
        };
        let stack = AdjacencyStack {
            axis: crate::attention::Axis::Spatial,
            size: 1,
            mats: vec![ta],
        };
        let out = spatial_graph_conv(&mut tape, &[tx], &stack, &gcn).unwrap();
        let want = dense_oracle_conv(&[0.7], &x, &w, 0.25, 1, d);
        for (got, want) in tape.value(out[0]).iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_configuration_passes_features_through() {
        // W = I, zero adjacency (so norm(Â) = I), positive features: the
        // convolution is the identity.
        let (n, d) = (3, D_LIFT);
        let mut eye = vec![0.0; d * d];
        (0..d).for_each(|i| eye[i * d + i] = 1.0);
        let x: Vec<f64> = (0..n * d).map(|i| 0.1 + i as f64 * 0.05).collect();

        let mut tape = Tape::new();
        let tx = tape.constant(x.clone(), vec![n, d]).unwrap();
        let ta = tape.constant(vec![0.0; n * n], vec![n, n]).unwrap();
        let tw = tape.constant(eye, vec![d, d]).unwrap();
        let slope = tape.scalar(0.25);
        let gcn = BoundGcn {
            w_t: tw,
            w_n: tw,
            slope_spatial: slope,
            slope_temporal: slope,
        };
        let stack = AdjacencyStack {
            axis: crate::attention::Axis::Spatial,
            size: n,
            mats: vec![ta],
        };
        let out = spatial_graph_conv(&mut tape, &[tx], &stack, &gcn).unwrap();
        assert_eq!(tape.value(out[0]), &x[..]);
    }

    #[test]
    fn spatial_conv_matches_dense_oracle() {
        let (n, d) = (3, D_LIFT);
        let mut x = vec![0.0; n * d];
        SeedStream::from_seed(51).fill_uniform(&mut x, 1.0);
        let mut w = vec![0.0; d * d];
        SeedStream::from_seed(52).fill_uniform(&mut w, 1.0);
        let mut raw = vec![0.0; n * n];
        SeedStream::from_seed(53).fill_uniform(&mut raw, 0.5);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = raw[i * n + j].abs();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }

        let mut tape = Tape::new();
        let tx = tape.constant(x.clone(), vec![n, d]).unwrap();
        let ta = tape.constant(a.clone(), vec![n, n]).unwrap();
        let tw = tape.constant(w.clone(), vec![d, d]).unwrap();
        let slope = tape.scalar(0.25);
        let gcn = BoundGcn {
            w_t: tw,
            w_n: tw,
            slope_spatial: slope,
            slope_temporal: slope,
        };
        let stack = AdjacencyStack {
            axis: crate::attention::Axis::Spatial,
            size: n,
            mats: vec![ta],
        };
        let out = spatial_graph_conv(&mut tape, &[tx], &stack, &gcn).unwrap();
        let want = dense_oracle_conv(&a, &x, &w, 0.25, n, d);
        for (got, want) in tape.value(out[0]).iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn spatial_conv_is_permutation_equivariant() {
        let (n, d) = (4, D_LIFT);
        let mut x = vec![0.0; n * d];
        SeedStream::from_seed(61).fill_uniform(&mut x, 1.0);
        let mut w = vec![0.0; d * d];
        SeedStream::from_seed(62).fill_uniform(&mut w, 1.0);
        let mut raw = vec![0.0; n * n];
        SeedStream::from_seed(63).fill_uniform(&mut raw, 0.5);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = raw[i * n + j].abs();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let perm = [3usize, 1, 0, 2];
        let mut xp = vec![0.0; n * d];
        let mut ap = vec![0.0; n * n];
        for i in 0..n {
            xp[i * d..(i + 1) * d].copy_from_slice(&x[perm[i] * d..(perm[i] + 1) * d]);
            for j in 0..n {
                ap[i * n + j] = a[perm[i] * n + perm[j]];
            }
        }

        let run = |x: Vec<f64>, a: Vec<f64>| -> Vec<f64> {
            let mut tape = Tape::new();
            let tx = tape.constant(x, vec![n, d]).unwrap();
            let ta = tape.constant(a, vec![n, n]).unwrap();
            let tw = tape.constant(w.clone(), vec![d, d]).unwrap();
            let slope = tape.scalar(0.25);
            let gcn = BoundGcn {
                w_t: tw,
                w_n: tw,
                slope_spatial: slope,
                slope_temporal: slope,
            };
            let stack = AdjacencyStack {
                axis: crate::attention::Axis::Spatial,
                size: n,
                mats: vec![ta],
            };
            let out = spatial_graph_conv(&mut tape, &[tx], &stack, &gcn).unwrap();
            tape.value(out[0]).to_vec()
        };
        let base = run(x, a);
        let shuffled = run(xp, ap);
        for i in 0..n {
            for f in 0..d {
                assert_abs_diff_eq!(
                    shuffled[i * d + f],
                    base[perm[i] * d + f],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("s".parse::<Variant>().unwrap(), Variant::S);
        assert_eq!("ST".parse::<Variant>().unwrap(), Variant::ST);
        assert!(matches!("x".parse::<Variant>(), Err(Error::Config(_))));
    }

    fn block_fixture(seed: u64) -> StBlockParams {
        StBlockParams::new(16, 4, &SeedStream::from_seed(seed)).unwrap()
    }

    fn lifted_input(tape: &mut Tape, t_len: usize, n_len: usize, seed: u64) -> TensorId {
        let mut data = vec![0.0; D_LIFT * t_len * n_len];
        SeedStream::from_seed(seed).fill_uniform(&mut data, 1.0);
        tape.constant(data, vec![D_LIFT, t_len, n_len]).unwrap()
    }

    #[test]
    fn block_output_shape_is_variant_independent() {
        let (t_len, n_len) = (8, 2);
        let block = block_fixture(71);
        for variant in [Variant::S, Variant::T, Variant::ST] {
            let mut tape = Tape::new();
            let mut reg = Vec::new();
            let bound = block.bind(&mut tape, &mut reg);
            let x = lifted_input(&mut tape, t_len, n_len, 72);
            let y = st_block_forward(&mut tape, x, &bound, variant).unwrap();
            assert_eq!(tape.shape(y), &[16, t_len, n_len], "variant {variant}");
        }
    }

    #[test]
    fn disabled_paths_have_exactly_zero_gradients() {
        let (t_len, n_len) = (8, 3);
        let block = block_fixture(73);
        for (variant, dead_prefixes, live_prefix) in [
            (Variant::S, vec!["attn_t.", "gcn.w_n", "gcn.slope_temporal"], "attn_s."),
            (Variant::T, vec!["attn_s.", "gcn.w_t", "gcn.slope_spatial"], "attn_t."),
        ] {
            let mut tape = Tape::new();
            let mut reg = Vec::new();
            let bound = block.bind(&mut tape, &mut reg);
            let x = lifted_input(&mut tape, t_len, n_len, 74);
            let y = st_block_forward(&mut tape, x, &bound, variant).unwrap();
            let sq = tape.mul(y, y).unwrap();
            let loss = tape.sum_all(sq);
            tape.backward(loss).unwrap();
            for (name, id) in &reg {
                let all_zero = tape.grad(*id).iter().all(|g| *g == 0.0);
                if dead_prefixes.iter().any(|p| name.starts_with(p)) {
                    assert!(all_zero, "variant {variant}: {name} should be dead");
                } else if name.starts_with(live_prefix) {
                    assert!(!all_zero, "variant {variant}: {name} should be live");
                }
            }
        }
        // The full block leaves no parameter without gradient.
        let mut tape = Tape::new();
        let mut reg = Vec::new();
        let bound = block.bind(&mut tape, &mut reg);
        let x = lifted_input(&mut tape, t_len, n_len, 75);
        let y = st_block_forward(&mut tape, x, &bound, Variant::ST).unwrap();
        let sq = tape.mul(y, y).unwrap();
        let loss = tape.sum_all(sq);
        tape.backward(loss).unwrap();
        for (name, id) in &reg {
            assert!(
                tape.grad(*id).iter().any(|g| *g != 0.0),
                "{name} has zero gradient under the full block"
            );
        }
    }

    #[test]
    fn block_gradient_matches_finite_differences() {
        // Gradient w.r.t. the raw block input on an 8-step, 2-pedestrian
        // fixture, through all variants' shared path.
        let (t_len, n_len) = (8, 2);
        let block = block_fixture(77);
        let mut data = vec![0.0; D_LIFT * t_len * n_len];
        SeedStream::from_seed(78).fill_uniform(&mut data, 1.0);
        let err = grad_check(&data, &[D_LIFT, t_len, n_len], 1e-6, |tape, x| {
            let mut reg = Vec::new();
            let bound = block.bind(tape, &mut reg);
            let y = st_block_forward(tape, x, &bound, Variant::ST)?;
            let sq = tape.mul(y, y)?;
            Ok(tape.sum_all(sq))
        })
        .unwrap();
        assert!(err < 1e-5, "st block input grad err {err}");
    }
}
