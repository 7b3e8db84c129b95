//! Run configuration and the train/eval/ablate/sample/synth commands.
//!
//! Everything here is callable as a library; the binary is a thin argument
//! parser over these functions. All randomness flows from one root seed
//! through named stream forks, so every command is bit-reproducible given
//! the same seed, and a resumed training run replays the exact loss
//! sequence of an uninterrupted one.

use crate::data::{
    leave_one_out_split, load_dataset_dir, to_graph_tensor, window_sequences, GraphTensor,
    SequenceSample, TrajectoryScene, T_OBS, T_PRED,
};
use crate::error::{Error, Result};
use crate::gcn::Variant;
use crate::loss::{nll_loss, sample_trajectories, total_loss, LossConfig};
use crate::metrics::{best_of_k_sample, MetricsReport, PooledErrors, SceneMetrics};
use crate::model::{
    forward, harvest_grads, load_checkpoint, save_checkpoint, Checkpoint, Model, ModelConfig,
    SgdMomentum,
};
use crate::rng::SeedStream;
use crate::synth::{write_dataset, SynthKind};
use crate::tape::Tape;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// SGD momentum used by every training command.
pub const MOMENTUM: f64 = 0.9;

/// Global L2 cap on the accumulated gradient before each optimizer step.
/// The likelihood surface gets extremely steep as predicted scales shrink
/// toward their floor, where raw SGD at the documented learning rates
/// diverges; rescaling the whole gradient preserves its direction and
/// keeps every run deterministic.
pub const GRAD_CLIP_NORM: f64 = 5.0;

/// Everything a run needs, whatever the command. Defaults reproduce the
/// full training protocol; the `desk` profile shrinks it for fast
/// experiments and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    /// Held-out scene; when absent the alphabetically first scene is used.
    pub test_scene: Option<String>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_after: f64,
    /// Last epoch (1-based) that still uses `lr_initial`.
    pub lr_switch_epoch: usize,
    pub alpha: f64,
    pub eval_k: usize,
    pub seed: u64,
    pub variant: Variant,
    pub output_dir: PathBuf,
    /// Fraction of training windows held out for best-checkpoint selection.
    pub val_fraction: f64,
    /// Continue training from this checkpoint instead of a fresh model.
    pub resume: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_dir: PathBuf::from("data"),
            test_scene: None,
            epochs: 250,
            batch_size: 128,
            lr_initial: 0.01,
            lr_after: 0.002,
            lr_switch_epoch: 150,
            alpha: 0.3,
            eval_k: 20,
            seed: 1,
            variant: Variant::ST,
            output_dir: PathBuf::from("out"),
            val_fraction: 0.0,
            resume: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if !(self.lr_initial > 0.0) || !(self.lr_after > 0.0) {
            return Err(Error::Config(format!(
                "learning rates must be > 0, got {} and {}",
                self.lr_initial, self.lr_after
            )));
        }
        if self.lr_switch_epoch >= self.epochs {
            return Err(Error::Config(format!(
                "lr_switch_epoch {} must be below epochs {}",
                self.lr_switch_epoch, self.epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if self.eval_k == 0 {
            return Err(Error::Config("eval_k must be ≥ 1".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be ≥ 0, got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction must be in [0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }

    /// Applies one named settings bundle. `paper` restores the full
    /// protocol; `desk` shrinks epochs/batch (and the schedule switch,
    /// which must stay below the epoch count) for fast runs.
    pub fn apply_profile(&mut self, name: &str) -> Result<()> {
        match name {
            "paper" => {
                self.epochs = 250;
                self.batch_size = 128;
                self.lr_initial = 0.01;
                self.lr_after = 0.002;
                self.lr_switch_epoch = 150;
                self.alpha = 0.3;
                self.eval_k = 20;
            }
            "desk" => {
                self.epochs = 20;
                self.batch_size = 16;
                self.lr_switch_epoch = 15;
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown profile {other:?}, expected desk|paper"
                )))
            }
        }
        Ok(())
    }

    /// Applies one `key=value` setting; used by config files, with CLI
    /// flags layered on top by the binary.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset_dir" => self.dataset_dir = PathBuf::from(value),
            "test_scene" => {
                self.test_scene = if value.is_empty() {
                    None
                } else {
                    Some(value.to_string())
                }
            }
            "epochs" => self.epochs = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "lr_initial" => self.lr_initial = parse_num(key, value)?,
            "lr_after" => self.lr_after = parse_num(key, value)?,
            "lr_switch_epoch" => self.lr_switch_epoch = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "eval_k" => self.eval_k = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "variant" => self.variant = value.parse()?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "val_fraction" => self.val_fraction = parse_num(key, value)?,
            "resume" => {
                self.resume = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "profile" => self.apply_profile(value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Loads a flat key=value config file (# comments and blank lines
    /// allowed) over the current values.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (key, value) in parse_config_text(&text)? {
            self.set_key(&key, &value)?;
        }
        Ok(())
    }

    fn model_config(&self) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            loss: LossConfig {
                alpha: self.alpha,
                ..LossConfig::default()
            },
            ..ModelConfig::default()
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("config key {key} got unparsable value {value:?}")))
}

/// Key=value pairs from config text, in file order.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::Parse {
            line: i + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Two-phase schedule: `lr_initial` through `lr_switch_epoch`, then
/// `lr_after`. Epochs are 1-based.
pub fn lr_for_epoch(config: &RunConfig, epoch: usize) -> f64 {
    if epoch <= config.lr_switch_epoch {
        config.lr_initial
    } else {
        config.lr_after
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub nll: f64,
    pub mmd: f64,
    pub total: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub test_scene: String,
    pub rows: Vec<EpochRow>,
    /// Accumulated sample count behind each optimizer step, in step order.
    pub flush_sizes: Vec<usize>,
    pub log_path: PathBuf,
    pub final_path: PathBuf,
    pub best_path: PathBuf,
}

/// (t × n × 2) view of a future graph block, the layout the loss wants.
fn future_to_tn(g: &GraphTensor) -> Vec<f64> {
    let mut out = vec![0.0; g.t * g.n * 2];
    for c in 0..2 {
        for t in 0..g.t {
            for j in 0..g.n {
                out[(t * g.n + j) * 2 + c] = g.values[(c * g.t + t) * g.n + j];
            }
        }
    }
    out
}

fn training_windows(train: &[TrajectoryScene]) -> Result<Vec<SequenceSample>> {
    let mut out = Vec::new();
    for scene in train {
        out.extend(window_sequences(scene, T_OBS, T_PRED, 1)?);
    }
    if out.is_empty() {
        return Err(Error::Startup(
            "training scenes yield no complete windows".into(),
        ));
    }
    Ok(out)
}

/// Leave-one-out training with gradient accumulation. Writes
/// `train_log.csv`, `final.ckpt` and `best.ckpt` into the output directory
/// and returns the per-epoch rows. With `resume` set, training continues
/// from the checkpoint's epoch using the checkpoint's seed, reproducing
/// the loss sequence an uninterrupted run would have logged.
pub fn cmd_train(config: &RunConfig) -> Result<TrainReport> {
    config.validate()?;
    let scenes = load_dataset_dir(&config.dataset_dir)?;
    let test_name = match &config.test_scene {
        Some(name) => name.clone(),
        None => scenes[0].name.clone(),
    };
    let (train_scenes, _test) = leave_one_out_split(scenes, &test_name)?;
    let samples = training_windows(&train_scenes)?;

    let model_config = config.model_config();
    let (mut model, mut opt, start_epoch, seed) = match &config.resume {
        Some(path) => {
            let (model, opt, epoch, seed) = load_checkpoint(path, MOMENTUM)?;
            if model.config != model_config {
                return Err(Error::Incompatible(format!(
                    "checkpoint at {} was trained with a different configuration",
                    path.display()
                )));
            }
            if epoch as usize >= config.epochs {
                return Err(Error::Config(format!(
                    "checkpoint is already at epoch {epoch}, nothing to resume"
                )));
            }
            (model, opt, epoch as usize, seed)
        }
        None => {
            let root = SeedStream::from_seed(config.seed);
            (
                Model::new(model_config, &root.fork("init"))?,
                SgdMomentum::new(MOMENTUM),
                0,
                config.seed,
            )
        }
    };
    let root = SeedStream::from_seed(seed);

    // Validation split is a deterministic function of the root seed, so a
    // resumed run holds out the same windows.
    let mut indices: Vec<usize> = (0..samples.len()).collect();
    let val_count = (samples.len() as f64 * config.val_fraction).floor() as usize;
    let val_indices: Vec<usize> = if val_count > 0 {
        let mut rng = root.fork("val-split").rng();
        indices.shuffle(&mut rng);
        indices.split_off(samples.len() - val_count)
    } else {
        Vec::new()
    };
    if indices.is_empty() {
        return Err(Error::Config(
            "validation fraction leaves no training windows".into(),
        ));
    }

    std::fs::create_dir_all(&config.output_dir)?;
    let mut rows = Vec::new();
    let mut flush_sizes = Vec::new();
    let mut best_metric = f64::INFINITY;
    let mut best_snapshot: Option<Checkpoint> = None;

    for epoch in (start_epoch + 1)..=config.epochs {
        let lr = lr_for_epoch(config, epoch);
        let epoch_stream = root.fork_idx("epoch", epoch as u64);
        let mut order = indices.clone();
        order.shuffle(&mut epoch_stream.fork("shuffle").rng());

        let mut accum: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut pending = 0usize;
        let (mut sum_nll, mut sum_mmd, mut sum_total) = (0.0, 0.0, 0.0);

        for (pos, &si) in order.iter().enumerate() {
            let sample = &samples[si];
            let (obs_g, fut_g) = to_graph_tensor(sample, model.config.coord_mode);
            let gt_tn = future_to_tn(&fut_g);
            let mut tape = Tape::new();
            let bindings = model.bind(&mut tape);
            let shape = obs_g.shape();
            let x = tape.constant(obs_g.values, shape)?;
            let field = forward(&mut tape, &bindings, x)?;
            let gt = tape.constant(gt_tn, vec![T_PRED, sample.n(), 2])?;
            let parts = total_loss(
                &mut tape,
                &field,
                gt,
                &model.config.loss,
                &epoch_stream.fork_idx("noise", pos as u64),
            )?;
            tape.backward(parts.total)?;
            harvest_grads(&tape, &bindings, &mut accum);
            sum_nll += tape.value(parts.nll)[0];
            sum_mmd += tape.value(parts.mmd)[0];
            sum_total += tape.value(parts.total)[0];
            pending += 1;
            if pending == config.batch_size {
                flush_step(&mut model, &mut opt, &mut accum, pending, lr)?;
                flush_sizes.push(pending);
                pending = 0;
            }
        }
        if pending > 0 {
            flush_step(&mut model, &mut opt, &mut accum, pending, lr)?;
            flush_sizes.push(pending);
        }

        let count = order.len() as f64;
        let row = EpochRow {
            epoch,
            nll: sum_nll / count,
            mmd: sum_mmd / count,
            total: sum_total / count,
            lr,
        };
        rows.push(row);

        let metric = if val_indices.is_empty() {
            row.total
        } else {
            validation_nll(&model, &samples, &val_indices)?
        };
        if metric < best_metric {
            best_metric = metric;
            best_snapshot = Some(Checkpoint::capture(&model, &opt, epoch as u32, seed));
        }
    }

    let log_path = config.output_dir.join("train_log.csv");
    let mut log = String::from("epoch,nll,mmd,total,lr\n");
    for r in &rows {
        log.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.nll, r.mmd, r.total, r.lr
        ));
    }
    std::fs::write(&log_path, log)?;

    let final_path = config.output_dir.join("final.ckpt");
    save_checkpoint(&model, &opt, config.epochs as u32, seed, &final_path)?;
    let best_path = config.output_dir.join("best.ckpt");
    match best_snapshot {
        Some(ckpt) => ckpt.save(&best_path)?,
        None => save_checkpoint(&model, &opt, config.epochs as u32, seed, &best_path)?,
    }

    Ok(TrainReport {
        test_scene: test_name,
        rows,
        flush_sizes,
        log_path,
        final_path,
        best_path,
    })
}

/// Mean-reduces the accumulated gradients, clips their global norm, and
/// takes one optimizer step.
fn flush_step(
    model: &mut Model,
    opt: &mut SgdMomentum,
    accum: &mut BTreeMap<String, Vec<f64>>,
    count: usize,
    lr: f64,
) -> Result<()> {
    let scale = 1.0 / count as f64;
    for g in accum.values_mut() {
        g.iter_mut().for_each(|v| *v *= scale);
    }
    let norm = accum
        .values()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > GRAD_CLIP_NORM {
        let shrink = GRAD_CLIP_NORM / norm;
        for g in accum.values_mut() {
            g.iter_mut().for_each(|v| *v *= shrink);
        }
    }
    opt.step(model, accum, lr)?;
    accum.clear();
    Ok(())
}

fn validation_nll(model: &Model, samples: &[SequenceSample], val: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &si in val {
        let sample = &samples[si];
        let (obs_g, fut_g) = to_graph_tensor(sample, model.config.coord_mode);
        let field = model.model_forward(&obs_g)?;
        total += nll_loss(&field, &future_to_tn(&fut_g))?;
    }
    Ok(total / val.len() as f64)
}

/// Best-of-K evaluation. With a test scene named, only that scene is
/// scored; otherwise every scene in the directory gets a row. Per window,
/// the sample with the lowest ADE is kept and its per-point errors pool
/// into the scene's metrics. Writes `metrics.csv` when given an output
/// directory.
pub fn cmd_eval(
    checkpoint: &Path,
    dataset_dir: &Path,
    test_scene: Option<&str>,
    k: usize,
    seed: u64,
    output_dir: Option<&Path>,
) -> Result<MetricsReport> {
    if k == 0 {
        return Err(Error::Config("eval needs K ≥ 1".into()));
    }
    let (model, _opt, _epoch, _seed) = load_checkpoint(checkpoint, MOMENTUM)?;
    let mut scenes = load_dataset_dir(dataset_dir)?;
    if let Some(name) = test_scene {
        let found = scenes.iter().position(|s| s.name == name).ok_or_else(|| {
            let known: Vec<&str> = scenes.iter().map(|s| s.name.as_str()).collect();
            Error::Lookup(format!(
                "scene {name:?} not found; known scenes: {}",
                known.join(", ")
            ))
        })?;
        scenes = vec![scenes.swap_remove(found)];
    }
    let root = SeedStream::from_seed(seed).fork("eval");
    let mut per_scene = BTreeMap::new();
    for scene in &scenes {
        let windows = window_sequences(scene, T_OBS, T_PRED, 1)?;
        if windows.is_empty() {
            return Err(Error::Contract(format!(
                "scene {} yields no complete evaluation windows",
                scene.name
            )));
        }
        let scene_stream = root.fork(&scene.name);
        let mut pool = PooledErrors::default();
        for (i, sample) in windows.iter().enumerate() {
            let (obs_g, _fut) = to_graph_tensor(sample, model.config.coord_mode);
            let field = model.model_forward(&obs_g)?;
            let gt_abs = sample.fut_tn();
            let best = best_of_k_sample(
                &field,
                &gt_abs,
                k,
                &scene_stream.fork_idx("window", i as u64),
                &sample.last_obs(),
            )?;
            pool.absorb(&best, &gt_abs, T_PRED, sample.n())?;
        }
        per_scene.insert(scene.name.clone(), pool.metrics()?);
    }
    let report = MetricsReport::from_scenes(per_scene)?;
    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), render_metrics_csv(&report))?;
    }
    Ok(report)
}

pub fn render_metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("scene,ade,fde,var_ade\n");
    let mut row = |name: &str, m: &SceneMetrics| {
        out.push_str(&format!("{},{},{},{}\n", name, m.ade, m.fde, m.var_ade));
    };
    for (name, m) in &report.per_scene {
        row(name, m);
    }
    row("AVG", &report.avg);
    row("Var", &report.cross_scene_var);
    out
}

pub fn render_metrics_table(report: &MetricsReport) -> String {
    let mut out = format!(
        "{:<14} {:>10} {:>10} {:>10}\n",
        "scene", "ade", "fde", "var_ade"
    );
    let mut row = |name: &str, m: &SceneMetrics| {
        out.push_str(&format!(
            "{:<14} {:>10.4} {:>10.4} {:>10.4}\n",
            name, m.ade, m.fde, m.var_ade
        ));
    };
    for (name, m) in &report.per_scene {
        row(name, m);
    }
    row("AVG", &report.avg);
    row("Var", &report.cross_scene_var);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblateAxis {
    Alpha,
    Variant,
}

impl fmt::Display for AblateAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblateAxis::Alpha => "alpha",
            AblateAxis::Variant => "variant",
        })
    }
}

impl FromStr for AblateAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(AblateAxis::Alpha),
            "variant" => Ok(AblateAxis::Variant),
            other => Err(Error::Config(format!(
                "unknown ablation axis {other:?}, expected alpha|variant"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AblateRow {
    pub label: String,
    pub metrics: SceneMetrics,
    /// For the variant axis: how many parameter tensors received exactly
    /// zero gradient everywhere (the disabled path).
    pub dead_params: Option<usize>,
}

/// Parameter tensors whose gradients are identically zero on one
/// training window; the structural signature of a disabled model path.
pub fn dead_parameter_count(model: &Model, sample: &SequenceSample) -> Result<usize> {
    let (obs_g, fut_g) = to_graph_tensor(sample, model.config.coord_mode);
    let gt_tn = future_to_tn(&fut_g);
    let mut tape = Tape::new();
    let bindings = model.bind(&mut tape);
    let shape = obs_g.shape();
    let x = tape.constant(obs_g.values, shape)?;
    let field = forward(&mut tape, &bindings, x)?;
    let gt = tape.constant(gt_tn, vec![T_PRED, sample.n(), 2])?;
    let parts = total_loss(
        &mut tape,
        &field,
        gt,
        &model.config.loss,
        &SeedStream::from_seed(0),
    )?;
    tape.backward(parts.total)?;
    let mut grads = BTreeMap::new();
    harvest_grads(&tape, &bindings, &mut grads);
    Ok(grads
        .values()
        .filter(|g| g.iter().all(|v| *v == 0.0))
        .count())
}

/// Trains and evaluates once per value of the chosen axis. Each value gets
/// its own output subdirectory; the comparison lands in
/// `ablate_{axis}.csv` under the base output directory.
pub fn cmd_ablate(base: &RunConfig, axis: AblateAxis, values: &[String]) -> Result<Vec<AblateRow>> {
    if values.is_empty() {
        return Err(Error::Config(format!(
            "ablate over {axis} needs at least one value"
        )));
    }
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut config = base.clone();
        match axis {
            AblateAxis::Alpha => config.alpha = parse_num("alpha", value)?,
            AblateAxis::Variant => config.variant = value.parse()?,
        }
        config.output_dir = base.output_dir.join(format!("ablate_{axis}_{value}"));
        let train = cmd_train(&config)?;
        let report = cmd_eval(
            &train.final_path,
            &config.dataset_dir,
            Some(&train.test_scene),
            config.eval_k,
            config.seed,
            None,
        )?;
        let metrics = report.per_scene[&train.test_scene];
        let dead_params = match axis {
            AblateAxis::Alpha => None,
            AblateAxis::Variant => {
                let (model, _, _, _) = load_checkpoint(&train.final_path, MOMENTUM)?;
                let scenes = load_dataset_dir(&config.dataset_dir)?;
                let (train_scenes, _) = leave_one_out_split(scenes, &train.test_scene)?;
                let probe = training_windows(&train_scenes)?;
                Some(dead_parameter_count(&model, &probe[0])?)
            }
        };
        rows.push(AblateRow {
            label: value.clone(),
            metrics,
            dead_params,
        });
    }
    std::fs::create_dir_all(&base.output_dir)?;
    let mut csv = match axis {
        AblateAxis::Alpha => String::from("alpha,ade,fde,var_ade\n"),
        AblateAxis::Variant => String::from("variant,ade,fde,var_ade,dead_params\n"),
    };
    for row in &rows {
        match row.dead_params {
            None => csv.push_str(&format!(
                "{},{},{},{}\n",
                row.label, row.metrics.ade, row.metrics.fde, row.metrics.var_ade
            )),
            Some(d) => csv.push_str(&format!(
                "{},{},{},{},{}\n",
                row.label, row.metrics.ade, row.metrics.fde, row.metrics.var_ade, d
            )),
        }
    }
    std::fs::write(base.output_dir.join(format!("ablate_{axis}.csv")), csv)?;
    Ok(rows)
}

/// Exports the observed path, ground-truth future, and K sampled futures
/// of one window as `samples.csv` (`sample_id,t,ped_id,x,y`). Observed
/// steps use t 0..7 with sample_id `obs`; futures use t 8..19 with
/// sample_id `gt` or the draw index.
pub fn cmd_sample(
    checkpoint: &Path,
    dataset_dir: &Path,
    scene_name: &str,
    window_index: usize,
    k: usize,
    seed: u64,
    output_dir: &Path,
) -> Result<PathBuf> {
    let (model, _opt, _epoch, _seed) = load_checkpoint(checkpoint, MOMENTUM)?;
    let scenes = load_dataset_dir(dataset_dir)?;
    let scene = scenes
        .iter()
        .find(|s| s.name == scene_name)
        .ok_or_else(|| {
            let known: Vec<&str> = scenes.iter().map(|s| s.name.as_str()).collect();
            Error::Lookup(format!(
                "scene {scene_name:?} not found; known scenes: {}",
                known.join(", ")
            ))
        })?;
    let windows = window_sequences(scene, T_OBS, T_PRED, 1)?;
    if window_index >= windows.len() {
        return Err(Error::Index(format!(
            "window {window_index} out of range, scene {scene_name} has {}",
            windows.len()
        )));
    }
    let sample = &windows[window_index];
    let (obs_g, _fut) = to_graph_tensor(sample, model.config.coord_mode);
    let field = model.model_forward(&obs_g)?;
    let cloud = sample_trajectories(
        &field,
        k,
        &SeedStream::from_seed(seed).fork("sample-cloud"),
        &sample.last_obs(),
    )?;

    let n = sample.n();
    let mut csv = String::from("sample_id,t,ped_id,x,y\n");
    for t in 0..T_OBS {
        for (j, ped) in sample.ped_ids.iter().enumerate() {
            let (x, y) = sample.obs_pos(j, t);
            csv.push_str(&format!("obs,{t},{ped},{x},{y}\n"));
        }
    }
    for t in 0..T_PRED {
        for (j, ped) in sample.ped_ids.iter().enumerate() {
            let (x, y) = sample.fut_pos(j, t);
            csv.push_str(&format!("gt,{},{ped},{x},{y}\n", t + T_OBS));
        }
    }
    for s in 0..k {
        for t in 0..T_PRED {
            for (j, ped) in sample.ped_ids.iter().enumerate() {
                let i = ((s * T_PRED + t) * n + j) * 2;
                csv.push_str(&format!(
                    "{s},{},{ped},{},{}\n",
                    t + T_OBS,
                    cloud[i],
                    cloud[i + 1]
                ));
            }
        }
    }
    std::fs::create_dir_all(output_dir)?;
    let path = output_dir.join("samples.csv");
    std::fs::write(&path, csv)?;
    Ok(path)
}

/// Writes a synthetic dataset; a thin, validated wrapper over the
/// generator so the CLI and tests share one entry point.
pub fn cmd_synth(
    out_dir: &Path,
    kind: SynthKind,
    n_scenes: usize,
    ped_count: usize,
    frame_count: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    write_dataset(out_dir, kind, n_scenes, ped_count, frame_count, seed)
}
