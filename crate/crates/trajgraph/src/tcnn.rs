//! Time-extrapolator convolutional decoder.
//!
//! The decoder treats the 8 observed time steps as channels of a
//! convolution over the 5-wide feature axis, expanding them to 12 predicted
//! steps in one shot (no autoregression). Refinement layers keep 12
//! channels, with PReLU between convolutions and a residual add around each
//! refinement. A final channel mapping turns the raw field into bivariate
//! Gaussian parameters (μx, μy, σx, σy, ρ) per pedestrian per step.

use crate::data::CoordMode;
use crate::error::{Error, Result};
use crate::layout;
use crate::nn::{BoundConv, ConvParams};
use crate::rng::SeedStream;
use crate::tape::{Tape, Tensor, TensorId};

/// Observed steps entering the decoder (as channels).
pub const DECODER_T_IN: usize = 8;
/// Predicted steps leaving the decoder.
pub const DECODER_T_OUT: usize = 12;
/// Feature width at decoder entry: one slot per Gaussian parameter.
pub const GAUSS_PARAMS: usize = 5;

/// Keeps σ = exp(s) strictly positive even when s underflows exp.
const SIGMA_FLOOR: f64 = f64::MIN_POSITIVE;
/// tanh alone rounds to ±1 in double precision beyond |r| ≈ 19; shrinking
/// by 1e-9 keeps the correlation strictly inside the open interval.
const RHO_SHRINK: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone)]
pub struct TcnnParams {
    pub layer0: ConvParams,
    pub refine: Vec<ConvParams>,
    /// One learnable PReLU slope preceding each refinement convolution.
    pub slopes: Vec<Tensor>,
    pub k: usize,
}

impl TcnnParams {
    pub fn new(k: usize, refine_layers: usize, stream: &SeedStream) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::Config(format!(
                "decoder kernel width must be odd, got {k}"
            )));
        }
        Ok(TcnnParams {
            layer0: ConvParams::new(DECODER_T_IN, DECODER_T_OUT, k, &stream.fork("layer0")),
            refine: (0..refine_layers)
                .map(|i| {
                    ConvParams::new(
                        DECODER_T_OUT,
                        DECODER_T_OUT,
                        k,
                        &stream.fork_idx("refine", i as u64),
                    )
                })
                .collect(),
            slopes: (0..refine_layers).map(|_| Tensor::scalar_param(0.25)).collect(),
            k,
        })
    }

    pub fn bind(
        &self,
        tape: &mut Tape,
        registry: &mut Vec<(String, TensorId)>,
    ) -> BoundTcnn {
        let layer0 = self.layer0.bind(tape, "tcnn.layer0", registry);
        let refine = self
            .refine
            .iter()
            .enumerate()
            .map(|(i, c)| c.bind(tape, &format!("tcnn.refine{i}"), registry))
            .collect();
        let slopes = self
            .slopes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let id = tape.leaf(s);
                registry.push((format!("tcnn.slope{i}"), id));
                id
            })
            .collect();
        BoundTcnn {
            layer0,
            refine,
            slopes,
        }
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        self.layer0.visit("tcnn.layer0", out);
        for (i, c) in self.refine.iter().enumerate() {
            c.visit(&format!("tcnn.refine{i}"), out);
        }
        for (i, s) in self.slopes.iter().enumerate() {
            out.push((format!("tcnn.slope{i}"), s));
        }
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.layer0.visit_mut("tcnn.layer0", out);
        for (i, c) in self.refine.iter_mut().enumerate() {
            c.visit_mut(&format!("tcnn.refine{i}"), out);
        }
        for (i, s) in self.slopes.iter_mut().enumerate() {
            out.push((format!("tcnn.slope{i}"), s));
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundTcnn {
    pub layer0: BoundConv,
    pub refine: Vec<BoundConv>,
    pub slopes: Vec<TensorId>,
}

/// Maps (5×8×N) graph features to the raw parameter field (12×5×N): time
/// steps become channels, one convolution expands 8 of them to 12, and each
/// refinement layer adds a PReLU-gated residual correction.
pub fn tcnn_forward(tape: &mut Tape, x: TensorId, tcnn: &BoundTcnn) -> Result<TensorId> {
    let shape = tape.shape(x).to_vec();
    if shape.len() != 3 || shape[0] != GAUSS_PARAMS || shape[1] != DECODER_T_IN {
        return Err(Error::shape(
            "tcnn_forward",
            &shape,
            &[GAUSS_PARAMS, DECODER_T_IN, 0],
        ));
    }
    let n_len = shape[2];
    let (idx, s) = layout::permute3([GAUSS_PARAMS, DECODER_T_IN, n_len], [1, 0, 2]);
    let time_as_channels = tape.gather(x, idx, s)?;
    let mut y = tcnn.layer0.apply(tape, time_as_channels)?;
    for (conv, slope) in tcnn.refine.iter().zip(&tcnn.slopes) {
        let activated = tape.prelu(y, *slope)?;
        let corrected = conv.apply(tape, activated)?;
        y = tape.add(y, corrected)?;
    }
    Ok(y)
}

/// Reorders the decoder output (12×5×N) into parameter-major (5×12×N) for
/// the distribution mapping.
pub fn decoder_to_field_layout(tape: &mut Tape, y: TensorId) -> Result<TensorId> {
    let shape = tape.shape(y).to_vec();
    if shape.len() != 3 || shape[0] != DECODER_T_OUT || shape[1] != GAUSS_PARAMS {
        return Err(Error::shape(
            "decoder_to_field_layout",
            &shape,
            &[DECODER_T_OUT, GAUSS_PARAMS, 0],
        ));
    }
    let (idx, s) = layout::permute3([DECODER_T_OUT, GAUSS_PARAMS, shape[2]], [1, 0, 2]);
    tape.gather(y, idx, s)
}

/// Tape handles to one predicted field's distribution parameters, each of
/// shape (12 × N). Raw log-scales are kept alongside σ so the likelihood
/// can use log σ without re-deriving it.
#[derive(Debug, Clone, Copy)]
pub struct FieldIds {
    pub t_pred: usize,
    pub n: usize,
    pub mu_x: TensorId,
    pub mu_y: TensorId,
    pub log_sig_x: TensorId,
    pub log_sig_y: TensorId,
    pub sig_x: TensorId,
    pub sig_y: TensorId,
    pub rho: TensorId,
}

/// Splits a raw (5×12×N) field into distribution parameters: μ verbatim,
/// σ = exp(s), ρ = tanh(r) shrunk to the open interval. Total map: any raw
/// values give a valid distribution.
pub fn to_gaussian_field(tape: &mut Tape, raw: TensorId) -> Result<FieldIds> {
    let shape = tape.shape(raw).to_vec();
    if shape.len() != 3 || shape[0] != GAUSS_PARAMS {
        return Err(Error::shape("to_gaussian_field", &shape, &[GAUSS_PARAMS, 0, 0]));
    }
    let (t_pred, n) = (shape[1], shape[2]);
    let mut channel = |c: usize| -> Result<TensorId> {
        let (idx, s) = layout::channel_plane(GAUSS_PARAMS, t_pred, n, c);
        tape.gather(raw, idx, s)
    };
    let mu_x = channel(0)?;
    let mu_y = channel(1)?;
    let log_sig_x = channel(2)?;
    let log_sig_y = channel(3)?;
    let r = channel(4)?;
    let ex = tape.exp(log_sig_x);
    let sig_x = tape.add_scalar(ex, SIGMA_FLOOR);
    let ey = tape.exp(log_sig_y);
    let sig_y = tape.add_scalar(ey, SIGMA_FLOOR);
    let th = tape.tanh(r);
    let rho = tape.scale(th, RHO_SHRINK);
    Ok(FieldIds {
        t_pred,
        n,
        mu_x,
        mu_y,
        log_sig_x,
        log_sig_y,
        sig_x,
        sig_y,
        rho,
    })
}

/// Predicted bivariate Gaussian parameters per pedestrian per future step,
/// detached from any tape. μ and σ are laid out (t, n, xy), ρ is (t, n).
/// Construction guarantees σ > 0 and |ρ| < 1.
#[derive(Debug, Clone)]
pub struct GaussianField {
    pub t_pred: usize,
    pub n: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub coord_mode: CoordMode,
}

impl GaussianField {
    pub fn mu(&self, t: usize, n: usize) -> (f64, f64) {
        let i = (t * self.n + n) * 2;
        (self.mu[i], self.mu[i + 1])
    }

    pub fn sigma(&self, t: usize, n: usize) -> (f64, f64) {
        let i = (t * self.n + n) * 2;
        (self.sigma[i], self.sigma[i + 1])
    }

    pub fn rho(&self, t: usize, n: usize) -> f64 {
        self.rho[t * self.n + n]
    }
}

/// Materializes the field values currently on the tape.
pub fn field_from_tape(tape: &Tape, ids: &FieldIds, coord_mode: CoordMode) -> GaussianField {
    let (t_pred, n) = (ids.t_pred, ids.n);
    let mut mu = vec![0.0; t_pred * n * 2];
    let mut sigma = vec![0.0; t_pred * n * 2];
    for (i, (mx, my)) in tape
        .value(ids.mu_x)
        .iter()
        .zip(tape.value(ids.mu_y))
        .enumerate()
    {
        mu[i * 2] = *mx;
        mu[i * 2 + 1] = *my;
    }
    for (i, (sx, sy)) in tape
        .value(ids.sig_x)
        .iter()
        .zip(tape.value(ids.sig_y))
        .enumerate()
    {
        sigma[i * 2] = *sx;
        sigma[i * 2 + 1] = *sy;
    }
    GaussianField {
        t_pred,
        n,
        mu,
        sigma,
        rho: tape.value(ids.rho).to_vec(),
        coord_mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::grad_check;
    use approx::assert_abs_diff_eq;

    fn bound_fixture(tape: &mut Tape, k: usize, refines: usize, seed: u64) -> BoundTcnn {
        let params = TcnnParams::new(k, refines, &SeedStream::from_seed(seed)).unwrap();
        let mut reg = Vec::new();
        params.bind(tape, &mut reg)
    }

    /// Fixed-weight decoder: every kernel entry `w`, PReLU slopes 1 so the
    /// whole stack is linear.
    fn averaging_bound(tape: &mut Tape, w0: f64, wr: f64, refines: usize) -> BoundTcnn {
        let k0 = tape
            .constant(vec![w0; 12 * 8], vec![12, 8, 1])
            .unwrap();
        let b0 = tape.constant(vec![0.0; 12], vec![12]).unwrap();
        let layer0 = BoundConv {
            kernels: k0,
            bias: b0,
        };
        let mut refine = Vec::new();
        let mut slopes = Vec::new();
        for _ in 0..refines {
            let kr = tape.constant(vec![wr; 12 * 12], vec![12, 12, 1]).unwrap();
            let br = tape.constant(vec![0.0; 12], vec![12]).unwrap();
            refine.push(BoundConv {
                kernels: kr,
                bias: br,
            });
            slopes.push(tape.scalar(1.0));
        }
        BoundTcnn {
            layer0,
            refine,
            slopes,
        }
    }

    #[test]
    fn zero_input_and_zero_biases_give_zero_field() {
        let mut tape = Tape::new();
        let tcnn = bound_fixture(&mut tape, 3, 1, 5);
        let x = tape.constant(vec![0.0; 5 * 8 * 3], vec![5, 8, 3]).unwrap();
        let y = tcnn_forward(&mut tape, x, &tcnn).unwrap();
        assert!(tape.value(y).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn averaging_kernels_average_the_input_steps() {
        // k=1, layer0 weights all 1/8, no refinement: every output step of
        // feature f equals the mean over the 8 input steps of feature f.
        let mut tape = Tape::new();
        let tcnn = averaging_bound(&mut tape, 1.0 / 8.0, 0.0, 0);
        let data: Vec<f64> = (0..5 * 8).map(|i| i as f64 * 0.25 - 3.0).collect();
        let x = tape.constant(data.clone(), vec![5, 8, 1]).unwrap();
        let y = tcnn_forward(&mut tape, x, &tcnn).unwrap();
        assert_eq!(tape.shape(y), &[12, 5, 1]);
        for f in 0..5 {
            let mean: f64 = (0..8).map(|t| data[f * 8 + t]).sum::<f64>() / 8.0;
            for step in 0..12 {
                assert_abs_diff_eq!(tape.value(y)[step * 5 + f], mean, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn output_shape_is_twelve_by_five_by_n() {
        for n in [1usize, 2, 7] {
            let mut tape = Tape::new();
            let tcnn = bound_fixture(&mut tape, 3, 2, 6);
            let x = tape
                .constant(vec![0.25; 5 * 8 * n], vec![5, 8, n])
                .unwrap();
            let y = tcnn_forward(&mut tape, x, &tcnn).unwrap();
            assert_eq!(tape.shape(y), &[12, 5, n]);
        }
    }

    #[test]
    fn wrong_time_length_is_a_shape_error() {
        let mut tape = Tape::new();
        let tcnn = bound_fixture(&mut tape, 3, 1, 7);
        let x = tape.constant(vec![0.0; 5 * 7 * 2], vec![5, 7, 2]).unwrap();
        assert!(matches!(
            tcnn_forward(&mut tape, x, &tcnn),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn constant_shift_produces_constant_output_shift() {
        // Averaging kernels, zero bias, PReLU slopes 1 (linear): adding c to
        // every input feature adds the same constant everywhere per layer.
        let c = 0.75;
        let mut data = vec![0.0; 5 * 8 * 2];
        SeedStream::from_seed(8).fill_uniform(&mut data, 1.0);
        let shifted: Vec<f64> = data.iter().map(|v| v + c).collect();

        let mut tape = Tape::new();
        let tcnn = averaging_bound(&mut tape, 1.0 / 8.0, 1.0 / 12.0, 1);
        let x1 = tape.constant(data, vec![5, 8, 2]).unwrap();
        let y1 = tcnn_forward(&mut tape, x1, &tcnn).unwrap();
        let x2 = tape.constant(shifted, vec![5, 8, 2]).unwrap();
        let y2 = tcnn_forward(&mut tape, x2, &tcnn).unwrap();
        let diff0 = tape.value(y2)[0] - tape.value(y1)[0];
        for (a, b) in tape.value(y1).iter().zip(tape.value(y2)) {
            assert_abs_diff_eq!(b - a, diff0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_map_reference_points() {
        let mut tape = Tape::new();
        // Raw field with sx = 0 and r = 0 in known slots.
        let mut raw = vec![0.0; 5 * 12 * 1];
        raw[2 * 12] = 0.0; // sx(t=0) = 0 → σx = 1
        raw[4 * 12] = 0.0; // r(t=0) = 0 → ρ = 0
        raw[4 * 12 + 1] = 20.0; // r(t=1) = 20 → ρ < 1 strictly
        let x = tape.constant(raw, vec![5, 12, 1]).unwrap();
        let field = to_gaussian_field(&mut tape, x).unwrap();
        assert_eq!(tape.value(field.sig_x)[0], 1.0);
        assert_eq!(tape.value(field.rho)[0], 0.0);
        let saturated = tape.value(field.rho)[1];
        assert!(saturated < 1.0, "saturated ρ = {saturated}");
        assert!(saturated > 0.999999);
    }

    #[test]
    fn gaussian_map_is_total_at_extremes() {
        let mut tape = Tape::new();
        let mut raw = Vec::new();
        for c in 0..5 {
            for _ in 0..12 {
                raw.push(if c % 2 == 0 { 1e6 } else { -1e6 });
            }
        }
        let x = tape.constant(raw, vec![5, 12, 1]).unwrap();
        let ids = to_gaussian_field(&mut tape, x).unwrap();
        let field = field_from_tape(&tape, &ids, CoordMode::Relative);
        for t in 0..12 {
            let (sx, sy) = field.sigma(t, 0);
            assert!(sx > 0.0 && sy > 0.0, "σ at extreme: ({sx}, {sy})");
            assert!(field.rho(t, 0).abs() < 1.0);
        }
    }

    #[test]
    fn decoder_and_gaussian_map_pass_gradient_check() {
        let mut data = vec![0.0; 5 * 8 * 2];
        SeedStream::from_seed(9).fill_uniform(&mut data, 1.0);
        let err = grad_check(&data, &[5, 8, 2], 1e-6, |tape, x| {
            let tcnn = bound_fixture(tape, 3, 1, 10);
            let y = tcnn_forward(tape, x, &tcnn)?;
            let raw = decoder_to_field_layout(tape, y)?;
            let f = to_gaussian_field(tape, raw)?;
            // Touch every parameter family in the scalar.
            let mx2 = tape.mul(f.mu_x, f.mu_x)?;
            let my2 = tape.mul(f.mu_y, f.mu_y)?;
            let r2 = tape.mul(f.rho, f.rho)?;
            let s1 = tape.sum_all(mx2);
            let s2 = tape.sum_all(my2);
            let s3 = tape.sum_all(f.sig_x);
            let s4 = tape.sum_all(f.sig_y);
            let s5 = tape.sum_all(r2);
            let a = tape.add(s1, s2)?;
            let b = tape.add(s3, s4)?;
            let c = tape.add(a, b)?;
            tape.add(c, s5)
        })
        .unwrap();
        assert!(err < 1e-5, "decoder grad err {err}");
    }
}
