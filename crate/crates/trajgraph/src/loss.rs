//! Hybrid training loss and trajectory sampling.
//!
//! The loss has two parts: the negative log-likelihood of ground-truth
//! points under the predicted per-step bivariate Gaussians, and a kernel
//! maximum-mean-discrepancy term comparing ground-truth displacement
//! vectors with reparameterized draws from the predicted field. The MMD
//! draws use fixed noise from a seed stream so every loss evaluation is
//! reproducible, and the reparameterization keeps gradients flowing into
//! μ, σ and ρ.

use crate::data::{cumulative_positions, CoordMode};
use crate::error::{Error, Result};
use crate::layout;
use crate::rng::SeedStream;
use crate::tape::{Tape, TensorId};
use crate::tcnn::{FieldIds, GaussianField};
use rand_distr::{Distribution, StandardNormal};

/// Multi-kernel RBF bandwidths used when none are configured explicitly.
pub const DEFAULT_MMD_BANDWIDTHS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Weighting and sampling knobs for the combined loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Weight of the discrepancy term; 0 reduces the loss to pure NLL.
    pub alpha: f64,
    pub mmd_bandwidths: Vec<f64>,
    /// Reparameterized draws per node-step feeding the discrepancy term.
    pub mmd_sample_count: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.3,
            mmd_bandwidths: DEFAULT_MMD_BANDWIDTHS.to_vec(),
            mmd_sample_count: 1,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!(
                "loss weight alpha must be ≥ 0, got {}",
                self.alpha
            )));
        }
        if self.mmd_bandwidths.is_empty() {
            return Err(Error::Config("at least one MMD bandwidth required".into()));
        }
        if let Some(b) = self.mmd_bandwidths.iter().find(|b| !(**b > 0.0)) {
            return Err(Error::Config(format!("MMD bandwidth must be > 0, got {b}")));
        }
        if self.mmd_sample_count == 0 {
            return Err(Error::Config("mmd_sample_count must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Bivariate Gaussian density at `point`.
pub fn bigauss_density(
    point: (f64, f64),
    mu: (f64, f64),
    sigma: (f64, f64),
    rho: f64,
) -> Result<f64> {
    if !(sigma.0 > 0.0) || !(sigma.1 > 0.0) {
        return Err(Error::Domain(format!(
            "density needs σ > 0 componentwise, got ({}, {})",
            sigma.0, sigma.1
        )));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("density needs |ρ| < 1, got {rho}")));
    }
    let dx = (point.0 - mu.0) / sigma.0;
    let dy = (point.1 - mu.1) / sigma.1;
    let om = 1.0 - rho * rho;
    let z = dx * dx - 2.0 * rho * dx * dy + dy * dy;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma.0 * sigma.1 * om.sqrt());
    Ok(norm * (-z / (2.0 * om)).exp())
}

/// Negative log-likelihood of `gt` (t × n × 2, same coordinate mode as the
/// field) under the field: summed over time steps, mean-reduced over
/// pedestrians. Computed in log space so small densities do not underflow.
pub fn nll_loss(field: &GaussianField, gt: &[f64]) -> Result<f64> {
    let want = field.t_pred * field.n * 2;
    if gt.len() != want {
        return Err(Error::shape("nll_loss", &[gt.len()], &[want]));
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    for t in 0..field.t_pred {
        for j in 0..field.n {
            let i = (t * field.n + j) * 2;
            let (mx, my) = field.mu(t, j);
            let (sx, sy) = field.sigma(t, j);
            let rho = field.rho(t, j);
            if !(rho.abs() < 1.0) {
                return Err(Error::Domain(format!("NLL needs |ρ| < 1, got {rho}")));
            }
            let dx = (gt[i] - mx) / sx;
            let dy = (gt[i + 1] - my) / sy;
            let om = 1.0 - rho * rho;
            let z = dx * dx - 2.0 * rho * dx * dy + dy * dy;
            total += ln_2pi + sx.ln() + sy.ln() + 0.5 * om.ln() + z / (2.0 * om);
        }
    }
    Ok(total / field.n as f64)
}

/// Tape form of [`nll_loss`]: `gt` must be a (t × n × 2) tensor in the
/// field's coordinate mode. Uses the raw log-scales directly, so the
/// quadratic term is assembled from exp(−s) factors rather than divisions.
pub fn nll_on_tape(tape: &mut Tape, field: &FieldIds, gt: TensorId) -> Result<TensorId> {
    let (t_pred, n) = (field.t_pred, field.n);
    let shape = tape.shape(gt).to_vec();
    if shape != [t_pred, n, 2] {
        return Err(Error::shape("nll_on_tape", &shape, &[t_pred, n, 2]));
    }
    let count = t_pred * n;
    let idx_x: Vec<usize> = (0..count).map(|i| i * 2).collect();
    let idx_y: Vec<usize> = (0..count).map(|i| i * 2 + 1).collect();
    let tx = tape.gather(gt, idx_x, vec![t_pred, n])?;
    let ty = tape.gather(gt, idx_y, vec![t_pred, n])?;

    let dx = tape.sub(tx, field.mu_x)?;
    let dy = tape.sub(ty, field.mu_y)?;
    let neg2sx = tape.scale(field.log_sig_x, -2.0);
    let e2x = tape.exp(neg2sx);
    let neg2sy = tape.scale(field.log_sig_y, -2.0);
    let e2y = tape.exp(neg2sy);
    let ssum = tape.add(field.log_sig_x, field.log_sig_y)?;
    let nsum = tape.scale(ssum, -1.0);
    let exy = tape.exp(nsum);

    let dx2 = tape.mul(dx, dx)?;
    let t1 = tape.mul(dx2, e2x)?;
    let dy2 = tape.mul(dy, dy)?;
    let t3 = tape.mul(dy2, e2y)?;
    let dxdy = tape.mul(dx, dy)?;
    let t2a = tape.mul(dxdy, exy)?;
    let t2b = tape.mul(t2a, field.rho)?;
    let t2 = tape.scale(t2b, -2.0);
    let z12 = tape.add(t1, t2)?;
    let z = tape.add(z12, t3)?;

    let rho2 = tape.mul(field.rho, field.rho)?;
    let neg_rho2 = tape.scale(rho2, -1.0);
    let om = tape.add_scalar(neg_rho2, 1.0);
    let ln_om = tape.ln(om)?;
    let half_ln = tape.scale(ln_om, 0.5);
    let denom = tape.scale(om, 2.0);
    let quad = tape.div(z, denom)?;

    let logs = tape.add(field.log_sig_x, field.log_sig_y)?;
    let a = tape.add(logs, half_ln)?;
    let b = tape.add(a, quad)?;
    let per = tape.add_scalar(b, (2.0 * std::f64::consts::PI).ln());
    let total = tape.sum_all(per);
    Ok(tape.scale(total, 1.0 / n as f64))
}

/// Shared pairwise-kernel block: Σ over all pairs of Σ_σ exp(−‖a−b‖²/(2σ²)).
/// `rows_*` are the precomputed per-row squared norms as (len × 1) tensors.
fn kernel_block_sum(
    tape: &mut Tape,
    a: TensorId,
    b: TensorId,
    rows_a: TensorId,
    rows_b: TensorId,
    bandwidths: &[f64],
) -> Result<TensorId> {
    let (p, d) = (tape.shape(a)[0], tape.shape(a)[1]);
    let q = tape.shape(b)[0];
    let (t_idx, t_shape) = layout::transpose2(q, d);
    let bt = tape.gather(b, t_idx, t_shape)?;
    let cross = tape.matmul(a, bt)?;
    let (ca, sa) = layout::broadcast_col(p, q);
    let ra = tape.gather(rows_a, ca, sa)?;
    let (cb, sb) = layout::broadcast_row(p, q);
    let rb = tape.gather(rows_b, cb, sb)?;
    let rsum = tape.add(ra, rb)?;
    let neg2 = tape.scale(cross, -2.0);
    let sqd = tape.add(rsum, neg2)?;
    let mut acc: Option<TensorId> = None;
    for bw in bandwidths {
        let scaled = tape.scale(sqd, -1.0 / (2.0 * bw * bw));
        let k = tape.exp(scaled);
        acc = Some(match acc {
            None => k,
            Some(prev) => tape.add(prev, k)?,
        });
    }
    Ok(tape.sum_all(acc.expect("validated nonempty bandwidths")))
}

/// Biased empirical squared MMD between row sets `x` (m × d) and `y`
/// (l × d) under a sum of RBF kernels: (1/m²)Σk(x,x′) + (1/l²)Σk(y,y′)
/// − (2/ml)Σk(x,y). Diagonal terms are included, so identical sample sets
/// give exactly zero and the estimate is never negative beyond roundoff.
pub fn mmd_loss(
    tape: &mut Tape,
    x: TensorId,
    y: TensorId,
    bandwidths: &[f64],
) -> Result<TensorId> {
    let sx = tape.shape(x).to_vec();
    let sy = tape.shape(y).to_vec();
    if sx.len() != 2 || sy.len() != 2 || sx[1] != sy[1] {
        return Err(Error::shape("mmd_loss", &sx, &sy));
    }
    if sx[0] == 0 || sy[0] == 0 {
        return Err(Error::Contract("mmd_loss needs nonempty sample sets".into()));
    }
    if bandwidths.is_empty() || bandwidths.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Config(format!(
            "mmd_loss needs positive bandwidths, got {bandwidths:?}"
        )));
    }
    let (m, l, d) = (sx[0], sy[0], sx[1]);
    let ones = tape.constant(vec![1.0; d], vec![d, 1])?;
    let xx = tape.mul(x, x)?;
    let rx = tape.matmul(xx, ones)?;
    let yy = tape.mul(y, y)?;
    let ry = tape.matmul(yy, ones)?;
    let sum_xx = kernel_block_sum(tape, x, x, rx, rx, bandwidths)?;
    let sum_yy = kernel_block_sum(tape, y, y, ry, ry, bandwidths)?;
    let sum_xy = kernel_block_sum(tape, x, y, rx, ry, bandwidths)?;
    let t_xx = tape.scale(sum_xx, 1.0 / (m * m) as f64);
    let t_yy = tape.scale(sum_yy, 1.0 / (l * l) as f64);
    let t_xy = tape.scale(sum_xy, -2.0 / (m * l) as f64);
    let partial = tape.add(t_xx, t_yy)?;
    tape.add(partial, t_xy)
}

/// Plain-value MMD over flat row-major samples, for oracles and reporting.
pub fn mmd_value(x: &[f64], y: &[f64], d: usize, bandwidths: &[f64]) -> Result<f64> {
    if d == 0 || x.len() % d != 0 || y.len() % d != 0 {
        return Err(Error::shape("mmd_value", &[x.len()], &[y.len()]));
    }
    let (m, l) = (x.len() / d, y.len() / d);
    if m == 0 || l == 0 {
        return Err(Error::Contract("mmd_value needs nonempty sample sets".into()));
    }
    let kernel = |a: &[f64], b: &[f64]| -> f64 {
        let sqd: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
        bandwidths
            .iter()
            .map(|bw| (-sqd / (2.0 * bw * bw)).exp())
            .sum()
    };
    let mut t_xx = 0.0;
    for i in 0..m {
        for j in 0..m {
            t_xx += kernel(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
        }
    }
    let mut t_yy = 0.0;
    for i in 0..l {
        for j in 0..l {
            t_yy += kernel(&y[i * d..(i + 1) * d], &y[j * d..(j + 1) * d]);
        }
    }
    let mut t_xy = 0.0;
    for i in 0..m {
        for j in 0..l {
            t_xy += kernel(&x[i * d..(i + 1) * d], &y[j * d..(j + 1) * d]);
        }
    }
    Ok(t_xx / (m * m) as f64 + t_yy / (l * l) as f64 - 2.0 * t_xy / (m * l) as f64)
}

/// Handles to the assembled loss and its two components.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: TensorId,
    pub nll: TensorId,
    pub mmd: TensorId,
}

/// Reparameterized draws from the field as a (draws·t·n × 2) row tensor.
/// Noise enters as constants, so gradients reach μ, σ and ρ but not the
/// noise itself; draw s uses the stream fork ("mmd", s), independent of
/// every other consumer of the parent stream.
fn reparameterized_rows(
    tape: &mut Tape,
    field: &FieldIds,
    draws: usize,
    noise: &SeedStream,
) -> Result<TensorId> {
    let (t_pred, n) = (field.t_pred, field.n);
    let count = t_pred * n;
    let rho2 = tape.mul(field.rho, field.rho)?;
    let neg = tape.scale(rho2, -1.0);
    let om = tape.add_scalar(neg, 1.0);
    let sqrt_om = tape.sqrt(om)?;
    let mut planes = Vec::with_capacity(draws * 2);
    for s in 0..draws {
        let mut rng = noise.fork_idx("mmd", s as u64).rng();
        let mut xi1 = vec![0.0; count];
        let mut xi2 = vec![0.0; count];
        for i in 0..count {
            xi1[i] = StandardNormal.sample(&mut rng);
            xi2[i] = StandardNormal.sample(&mut rng);
        }
        let xi1 = tape.constant(xi1, vec![t_pred, n])?;
        let xi2 = tape.constant(xi2, vec![t_pred, n])?;
        let dx_noise = tape.mul(field.sig_x, xi1)?;
        let draw_x = tape.add(field.mu_x, dx_noise)?;
        let rsy = tape.mul(field.rho, field.sig_y)?;
        let along = tape.mul(rsy, xi1)?;
        let osy = tape.mul(field.sig_y, sqrt_om)?;
        let across = tape.mul(osy, xi2)?;
        let partial = tape.add(field.mu_y, along)?;
        let draw_y = tape.add(partial, across)?;
        planes.push(draw_x);
        planes.push(draw_y);
    }
    // Each (x, y) plane pair becomes interleaved rows; draws concatenate.
    let mut blocks = Vec::with_capacity(draws);
    for pair in planes.chunks(2) {
        let st = tape.stack(&[pair[0], pair[1]])?;
        let flat = tape.reshape(st, vec![2 * count])?;
        let (idx, shape) = layout::interleave_pairs(count);
        blocks.push(tape.gather(flat, idx, shape)?);
    }
    if blocks.len() == 1 {
        Ok(blocks[0])
    } else {
        let st = tape.stack(&blocks)?;
        tape.reshape(st, vec![draws * count, 2])
    }
}

/// Combined loss: NLL + α · MMD. The MMD compares ground-truth vectors
/// (displacements in relative mode) against reparameterized field draws;
/// its noise comes from `noise` alone, so a fixed stream makes the whole
/// loss deterministic and the gap (total − nll) exactly linear in α.
pub fn total_loss(
    tape: &mut Tape,
    field: &FieldIds,
    gt: TensorId,
    config: &LossConfig,
    noise: &SeedStream,
) -> Result<LossParts> {
    config.validate()?;
    let nll = nll_on_tape(tape, field, gt)?;
    let count = field.t_pred * field.n;
    let gt_rows = tape.reshape(gt, vec![count, 2])?;
    let sample_rows = reparameterized_rows(tape, field, config.mmd_sample_count, noise)?;
    let mmd = mmd_loss(tape, gt_rows, sample_rows, &config.mmd_bandwidths)?;
    let weighted = tape.scale(mmd, config.alpha);
    let total = tape.add(nll, weighted)?;
    Ok(LossParts { total, nll, mmd })
}

/// Draws K trajectories from the field, returned as absolute positions
/// (K × t_pred × n × 2). Each per-step draw applies the Cholesky factor
/// [[σx, 0], [ρσy, σy√(1−ρ²)]] to two standard normals. Relative-mode
/// fields are cumulative-summed from `last_obs` (n × 2); absolute-mode
/// fields are returned as drawn. Sample k uses the stream fork
/// ("sample", k), so the first K draws of a larger request are identical
/// to a smaller one.
pub fn sample_trajectories(
    field: &GaussianField,
    k: usize,
    stream: &SeedStream,
    last_obs: &[f64],
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Contract("sample_trajectories needs K ≥ 1".into()));
    }
    if last_obs.len() != field.n * 2 {
        return Err(Error::shape(
            "sample_trajectories",
            &[last_obs.len()],
            &[field.n * 2],
        ));
    }
    let (t_pred, n) = (field.t_pred, field.n);
    let mut out = Vec::with_capacity(k * t_pred * n * 2);
    for s in 0..k {
        let mut rng = stream.fork_idx("sample", s as u64).rng();
        let mut draw = vec![0.0; t_pred * n * 2];
        for t in 0..t_pred {
            for j in 0..n {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let (mx, my) = field.mu(t, j);
                let (sx, sy) = field.sigma(t, j);
                let rho = field.rho(t, j);
                let i = (t * n + j) * 2;
                draw[i] = mx + sx * z1;
                draw[i + 1] = my + rho * sy * z1 + sy * (1.0 - rho * rho).sqrt() * z2;
            }
        }
        match field.coord_mode {
            CoordMode::Relative => {
                out.extend(cumulative_positions(&draw, t_pred, n, last_obs))
            }
            CoordMode::Absolute => out.extend(draw),
        }
    }
    Ok(out)
}
