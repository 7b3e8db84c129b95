//! Trajectory accuracy metrics and best-of-K evaluation.
//!
//! All metrics work on absolute positions laid out (t × n × 2). ADE is the
//! mean L2 error over every point, FDE the mean final-step error, and
//! var_ade the root mean squared deviation of per-point errors around the
//! ADE. The latter makes var_ade² + ade² equal the mean squared error, a
//! useful cross-check the tests pin down.

use crate::error::{Error, Result};
use crate::loss::sample_trajectories;
use crate::rng::SeedStream;
use crate::tcnn::GaussianField;
use std::collections::BTreeMap;

/// L2 error of every (t, n) point; layout t-major like the inputs.
pub fn point_errors(pred: &[f64], gt: &[f64], t_len: usize, n_len: usize) -> Result<Vec<f64>> {
    let want = t_len * n_len * 2;
    if pred.len() != want || gt.len() != want {
        return Err(Error::shape("point_errors", &[pred.len()], &[gt.len()]));
    }
    Ok((0..t_len * n_len)
        .map(|i| {
            let dx = pred[i * 2] - gt[i * 2];
            let dy = pred[i * 2 + 1] - gt[i * 2 + 1];
            (dx * dx + dy * dy).sqrt()
        })
        .collect())
}

pub fn ade(pred: &[f64], gt: &[f64], t_len: usize, n_len: usize) -> Result<f64> {
    let errors = point_errors(pred, gt, t_len, n_len)?;
    Ok(mean(&errors))
}

/// Mean L2 error over pedestrians at the final predicted step.
pub fn fde(pred: &[f64], gt: &[f64], t_len: usize, n_len: usize) -> Result<f64> {
    if t_len == 0 {
        return Err(Error::Contract("fde needs at least one step".into()));
    }
    let errors = point_errors(pred, gt, t_len, n_len)?;
    Ok(mean(&errors[(t_len - 1) * n_len..]))
}

/// Spread of per-point errors around the ADE, with the square root applied.
pub fn var_ade(pred: &[f64], gt: &[f64], t_len: usize, n_len: usize) -> Result<f64> {
    let errors = point_errors(pred, gt, t_len, n_len)?;
    let a = mean(&errors);
    Ok(mean(&errors.iter().map(|e| (e - a) * (e - a)).collect::<Vec<_>>()).sqrt())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Draws K trajectories and keeps the one with the lowest ADE (first on
/// ties). Returns the winning sample's absolute positions.
pub fn best_of_k_sample(
    field: &GaussianField,
    gt_abs: &[f64],
    k: usize,
    stream: &SeedStream,
    last_obs: &[f64],
) -> Result<Vec<f64>> {
    let (t_len, n_len) = (field.t_pred, field.n);
    let samples = sample_trajectories(field, k, stream, last_obs)?;
    let stride = t_len * n_len * 2;
    let mut best = (f64::INFINITY, 0usize);
    for s in 0..k {
        let a = ade(&samples[s * stride..(s + 1) * stride], gt_abs, t_len, n_len)?;
        if a < best.0 {
            best = (a, s);
        }
    }
    Ok(samples[best.1 * stride..(best.1 + 1) * stride].to_vec())
}

/// Best-of-K ADE/FDE/var_ade for one window.
pub fn best_of_k_metrics(
    field: &GaussianField,
    gt_abs: &[f64],
    k: usize,
    stream: &SeedStream,
    last_obs: &[f64],
) -> Result<(f64, f64, f64)> {
    let (t_len, n_len) = (field.t_pred, field.n);
    let chosen = best_of_k_sample(field, gt_abs, k, stream, last_obs)?;
    Ok((
        ade(&chosen, gt_abs, t_len, n_len)?,
        fde(&chosen, gt_abs, t_len, n_len)?,
        var_ade(&chosen, gt_abs, t_len, n_len)?,
    ))
}

/// One scene's (or one pooled set's) metric triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneMetrics {
    pub ade: f64,
    pub fde: f64,
    pub var_ade: f64,
}

/// Per-point errors pooled across evaluation windows of one scene. Scene
/// ADE/var_ade come from the pooled point errors, FDE from the pooled
/// final-step errors, so windows with more pedestrians weigh more.
#[derive(Debug, Clone, Default)]
pub struct PooledErrors {
    pub point: Vec<f64>,
    pub final_step: Vec<f64>,
}

impl PooledErrors {
    pub fn absorb(&mut self, pred: &[f64], gt: &[f64], t_len: usize, n_len: usize) -> Result<()> {
        let errors = point_errors(pred, gt, t_len, n_len)?;
        self.final_step
            .extend_from_slice(&errors[(t_len - 1) * n_len..]);
        self.point.extend(errors);
        Ok(())
    }

    pub fn metrics(&self) -> Result<SceneMetrics> {
        if self.point.is_empty() {
            return Err(Error::Contract("no errors pooled".into()));
        }
        let a = mean(&self.point);
        let spread =
            mean(&self.point.iter().map(|e| (e - a) * (e - a)).collect::<Vec<_>>()).sqrt();
        Ok(SceneMetrics {
            ade: a,
            fde: mean(&self.final_step),
            var_ade: spread,
        })
    }
}

/// Scene rows plus the cross-scene summary: `avg` holds column means and
/// `cross_scene_var` the population variance of each column across scenes.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub per_scene: BTreeMap<String, SceneMetrics>,
    pub avg: SceneMetrics,
    pub cross_scene_var: SceneMetrics,
}

impl MetricsReport {
    pub fn from_scenes(per_scene: BTreeMap<String, SceneMetrics>) -> Result<Self> {
        if per_scene.is_empty() {
            return Err(Error::Contract("metrics report needs at least one scene".into()));
        }
        let column = |f: fn(&SceneMetrics) -> f64| -> (f64, f64) {
            let vals: Vec<f64> = per_scene.values().map(f).collect();
            let m = mean(&vals);
            let var = mean(&vals.iter().map(|v| (v - m) * (v - m)).collect::<Vec<_>>());
            (m, var)
        };
        let (avg_ade, var_of_ade) = column(|s| s.ade);
        let (avg_fde, var_of_fde) = column(|s| s.fde);
        let (avg_var_ade, var_of_var_ade) = column(|s| s.var_ade);
        Ok(MetricsReport {
            per_scene,
            avg: SceneMetrics {
                ade: avg_ade,
                fde: avg_fde,
                var_ade: avg_var_ade,
            },
            cross_scene_var: SceneMetrics {
                ade: var_of_ade,
                fde: var_of_fde,
                var_ade: var_of_var_ade,
            },
        })
    }
}
