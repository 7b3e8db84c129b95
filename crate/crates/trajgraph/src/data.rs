//! Trajectory dataset loading, windowing, and graph tensor assembly.
//!
//! Scene files are plain text, one record per line, whitespace separated:
//! `frame_id ped_id x y`. Records are windowed into samples of 8 observed
//! plus 12 future frames; a pedestrian joins a window only when present in
//! all 20 frames so every sample is a dense fixed-N block.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Observed steps per sample (3.2 s at the 0.4 s frame interval).
pub const T_OBS: usize = 8;
/// Predicted steps per sample (4.8 s).
pub const T_PRED: usize = 12;
/// Seconds between consecutive frames.
pub const FRAME_INTERVAL: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub frame_id: i64,
    pub ped_id: i64,
    pub x: f64,
    pub y: f64,
}

/// One scene: every (frame, pedestrian) observation, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryScene {
    pub name: String,
    pub frames: Vec<Record>,
    pub frame_interval: f64,
}

impl TrajectoryScene {
    /// Sorted list of distinct frame ids.
    pub fn unique_frames(&self) -> Vec<i64> {
        let mut out: Vec<i64> = self.frames.iter().map(|r| r.frame_id).collect();
        out.dedup();
        out
    }

    pub fn pedestrian_count(&self) -> usize {
        self.frames
            .iter()
            .map(|r| r.ped_id)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// Integer field that tolerates a trailing `.0` (as found in the published
/// trajectory files).
fn parse_int_like(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    let f = s.parse::<f64>().ok()?;
    if f.is_finite() && f.fract() == 0.0 && f.abs() <= i64::MAX as f64 {
        Some(f as i64)
    } else {
        None
    }
}

/// Parses a scene file. The scene name is the uppercased file stem.
pub fn load_scene(path: &Path) -> Result<TrajectoryScene> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_uppercase())
        .unwrap_or_default();
    let text = std::fs::read_to_string(path)?;
    parse_scene(&text, name)
}

/// Parses scene text. Split out from file handling so round-trip tests can
/// work on in-memory buffers.
pub fn parse_scene(text: &str, name: String) -> Result<TrajectoryScene> {
    let mut frames = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let frame_id = parse_int_like(fields[0])
            .ok_or_else(|| err(format!("bad frame_id {:?}", fields[0])))?;
        let ped_id = parse_int_like(fields[1])
            .ok_or_else(|| err(format!("bad ped_id {:?}", fields[1])))?;
        let x: f64 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad x {:?}", fields[2])))?;
        let y: f64 = fields[3]
            .parse()
            .map_err(|_| err(format!("bad y {:?}", fields[3])))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(err("non-finite coordinate".into()));
        }
        frames.push(Record {
            frame_id,
            ped_id,
            x,
            y,
        });
    }
    frames.sort_by_key(|r| (r.frame_id, r.ped_id));
    for pair in frames.windows(2) {
        if pair[0].frame_id == pair[1].frame_id && pair[0].ped_id == pair[1].ped_id {
            return Err(Error::Integrity(format!(
                "duplicate record for frame {} pedestrian {}",
                pair[0].frame_id, pair[0].ped_id
            )));
        }
    }
    Ok(TrajectoryScene {
        name,
        frames,
        frame_interval: FRAME_INTERVAL,
    })
}

/// Writes a scene back to the text format (f64 values are printed with
/// shortest-round-trip formatting, so reloading recovers them exactly).
pub fn save_scene(scene: &TrajectoryScene, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in &scene.frames {
        writeln!(out, "{} {} {} {}", r.frame_id, r.ped_id, r.x, r.y)?;
    }
    out.flush()?;
    Ok(())
}

/// One training/evaluation sample: N pedestrians over 8 observed and 12
/// future frames, absolute coordinates, laid out (n, t, xy).
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub ped_ids: Vec<i64>,
    pub obs: Vec<f64>,
    pub fut: Vec<f64>,
}

impl SequenceSample {
    pub fn n(&self) -> usize {
        self.ped_ids.len()
    }

    pub fn obs_pos(&self, n: usize, t: usize) -> (f64, f64) {
        let i = (n * T_OBS + t) * 2;
        (self.obs[i], self.obs[i + 1])
    }

    pub fn fut_pos(&self, n: usize, t: usize) -> (f64, f64) {
        let i = (n * T_PRED + t) * 2;
        (self.fut[i], self.fut[i + 1])
    }

    /// Final observed position per pedestrian, laid out (n, xy); the anchor
    /// that relative predictions are accumulated from.
    pub fn last_obs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n() * 2);
        for n in 0..self.n() {
            let (x, y) = self.obs_pos(n, T_OBS - 1);
            out.push(x);
            out.push(y);
        }
        out
    }

    /// Ground-truth future in (t, n, xy) layout, the shape the metrics take.
    pub fn fut_tn(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(T_PRED * self.n() * 2);
        for t in 0..T_PRED {
            for n in 0..self.n() {
                let (x, y) = self.fut_pos(n, t);
                out.push(x);
                out.push(y);
            }
        }
        out
    }
}

/// Slides a (t_obs + t_pred)-frame window over the scene's unique-frame
/// list, advancing `stride` frames each step. A pedestrian joins a window's
/// sample only when present in every one of its frames; windows with no
/// qualifying pedestrian are dropped.
pub fn window_sequences(
    scene: &TrajectoryScene,
    t_obs: usize,
    t_pred: usize,
    stride: usize,
) -> Result<Vec<SequenceSample>> {
    if stride == 0 {
        return Err(Error::Contract("window stride must be at least 1".into()));
    }
    let span = t_obs + t_pred;
    let frames = scene.unique_frames();
    let mut by_frame: BTreeMap<i64, BTreeMap<i64, (f64, f64)>> = BTreeMap::new();
    for r in &scene.frames {
        by_frame
            .entry(r.frame_id)
            .or_default()
            .insert(r.ped_id, (r.x, r.y));
    }
    let mut samples = Vec::new();
    let mut start = 0;
    while start + span <= frames.len() {
        let window = &frames[start..start + span];
        let mut peds: BTreeSet<i64> = by_frame[&window[0]].keys().cloned().collect();
        for f in &window[1..] {
            peds.retain(|p| by_frame[f].contains_key(p));
            if peds.is_empty() {
                break;
            }
        }
        if !peds.is_empty() {
            let ped_ids: Vec<i64> = peds.into_iter().collect();
            let mut obs = Vec::with_capacity(ped_ids.len() * t_obs * 2);
            let mut fut = Vec::with_capacity(ped_ids.len() * t_pred * 2);
            for p in &ped_ids {
                for f in &window[..t_obs] {
                    let (x, y) = by_frame[f][p];
                    obs.push(x);
                    obs.push(y);
                }
                for f in &window[t_obs..] {
                    let (x, y) = by_frame[f][p];
                    fut.push(x);
                    fut.push(y);
                }
            }
            samples.push(SequenceSample { ped_ids, obs, fut });
        }
        start += stride;
    }
    Ok(samples)
}

/// Whether node features hold raw positions or per-frame displacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordMode {
    Absolute,
    Relative,
}

impl fmt::Display for CoordMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoordMode::Absolute => "absolute",
            CoordMode::Relative => "relative",
        })
    }
}

impl FromStr for CoordMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(CoordMode::Absolute),
            "relative" => Ok(CoordMode::Relative),
            other => Err(Error::Config(format!("unknown coord mode {other:?}"))),
        }
    }
}

/// Dense feature block of shape (D × T × N), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTensor {
    pub values: Vec<f64>,
    pub d: usize,
    pub t: usize,
    pub n: usize,
    pub coord_mode: CoordMode,
}

impl GraphTensor {
    pub fn shape(&self) -> Vec<usize> {
        vec![self.d, self.t, self.n]
    }

    pub fn at(&self, c: usize, t: usize, n: usize) -> f64 {
        self.values[(c * self.t + t) * self.n + n]
    }
}

/// Converts a sample into observed (2×8×N) and future (2×12×N) blocks. In
/// relative mode features are per-frame displacements: the first observed
/// displacement is zero and the first future displacement is taken against
/// the last observed position.
pub fn to_graph_tensor(sample: &SequenceSample, mode: CoordMode) -> (GraphTensor, GraphTensor) {
    let n_len = sample.n();
    let mut obs = vec![0.0; 2 * T_OBS * n_len];
    let mut fut = vec![0.0; 2 * T_PRED * n_len];
    for n in 0..n_len {
        for t in 0..T_OBS {
            let (x, y) = sample.obs_pos(n, t);
            let (vx, vy) = match mode {
                CoordMode::Absolute => (x, y),
                CoordMode::Relative => {
                    if t == 0 {
                        (0.0, 0.0)
                    } else {
                        let (px, py) = sample.obs_pos(n, t - 1);
                        (x - px, y - py)
                    }
                }
            };
            obs[t * n_len + n] = vx;
            obs[(T_OBS + t) * n_len + n] = vy;
        }
        for t in 0..T_PRED {
            let (x, y) = sample.fut_pos(n, t);
            let (vx, vy) = match mode {
                CoordMode::Absolute => (x, y),
                CoordMode::Relative => {
                    let (px, py) = if t == 0 {
                        sample.obs_pos(n, T_OBS - 1)
                    } else {
                        sample.fut_pos(n, t - 1)
                    };
                    (x - px, y - py)
                }
            };
            fut[t * n_len + n] = vx;
            fut[(T_PRED + t) * n_len + n] = vy;
        }
    }
    (
        GraphTensor {
            values: obs,
            d: 2,
            t: T_OBS,
            n: n_len,
            coord_mode: mode,
        },
        GraphTensor {
            values: fut,
            d: 2,
            t: T_PRED,
            n: n_len,
            coord_mode: mode,
        },
    )
}

/// Accumulates a (t, n, xy) displacement block into absolute positions,
/// starting from `start` laid out (n, xy).
pub fn cumulative_positions(displacements: &[f64], t_len: usize, n_len: usize, start: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t_len * n_len * 2];
    for n in 0..n_len {
        let mut x = start[n * 2];
        let mut y = start[n * 2 + 1];
        for t in 0..t_len {
            x += displacements[(t * n_len + n) * 2];
            y += displacements[(t * n_len + n) * 2 + 1];
            out[(t * n_len + n) * 2] = x;
            out[(t * n_len + n) * 2 + 1] = y;
        }
    }
    out
}

/// Deterministic leave-one-out partition: the named scene becomes the test
/// set, the rest train, ordered by name.
pub fn leave_one_out_split(
    scenes: Vec<TrajectoryScene>,
    test_name: &str,
) -> Result<(Vec<TrajectoryScene>, TrajectoryScene)> {
    let mut train: Vec<TrajectoryScene> = Vec::new();
    let mut test = None;
    for scene in scenes {
        if scene.name == test_name {
            test = Some(scene);
        } else {
            train.push(scene);
        }
    }
    let test = test.ok_or_else(|| {
        let mut known: Vec<String> = train.iter().map(|s| s.name.clone()).collect();
        known.sort();
        Error::Lookup(format!(
            "test scene {test_name:?} not found; known scenes: {}",
            known.join(", ")
        ))
    })?;
    train.sort_by(|a, b| a.name.cmp(&b.name));
    Ok((train, test))
}

/// Loads every `.txt` scene in a directory, sorted by scene name.
pub fn load_dataset_dir(dir: &Path) -> Result<Vec<TrajectoryScene>> {
    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "txt").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Startup(format!(
            "no .txt scene files found in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| load_scene(p)).collect()
}
