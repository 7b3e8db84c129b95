//! Synthetic scene generators with known dynamics.
//!
//! Three families cover the behaviors the model should capture: `linear`
//! walkers with constant per-frame displacement (so a good predictor can
//! reach near-zero error), `crossing` pairs whose straight paths intersect
//! mid-scene, and `group` walkers moving in parallel with a shared
//! velocity. Output uses the same text format as recorded scenes, so
//! everything downstream treats synthetic data identically.

use crate::data::{save_scene, Record, TrajectoryScene, FRAME_INTERVAL};
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Linear,
    Crossing,
    Group,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Linear => "linear",
            SynthKind::Crossing => "crossing",
            SynthKind::Group => "group",
        })
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(SynthKind::Linear),
            "crossing" => Ok(SynthKind::Crossing),
            "group" => Ok(SynthKind::Group),
            other => Err(Error::Config(format!(
                "unknown synthetic kind {other:?}, expected linear|crossing|group"
            ))),
        }
    }
}

/// Uniform draw in [lo, hi) from the stream's RNG-backed sampler.
fn uniform(stream: &SeedStream, lo: f64, hi: f64) -> f64 {
    let mut v = [0.0];
    stream.fill_uniform(&mut v, 1.0);
    lo + (v[0] + 1.0) / 2.0 * (hi - lo)
}

/// One scene of `frame_count` frames and `ped_count` pedestrians, all
/// present in every frame. Speeds sit in 0.2–0.6 m per frame (0.5–1.5 m/s
/// at the 0.4 s frame interval), matching pedestrian walking pace.
pub fn generate_scene(
    kind: SynthKind,
    name: &str,
    ped_count: usize,
    frame_count: usize,
    stream: &SeedStream,
) -> Result<TrajectoryScene> {
    if ped_count == 0 || frame_count == 0 {
        return Err(Error::Config(format!(
            "scene needs pedestrians and frames, got {ped_count} and {frame_count}"
        )));
    }
    // Per-pedestrian start position and per-frame velocity.
    let mut starts = Vec::with_capacity(ped_count);
    let mut velocities = Vec::with_capacity(ped_count);
    match kind {
        SynthKind::Linear => {
            for p in 0..ped_count {
                let s = stream.fork_idx("ped", p as u64);
                let angle = uniform(&s.fork("angle"), 0.0, std::f64::consts::TAU);
                let speed = uniform(&s.fork("speed"), 0.2, 0.6);
                starts.push((
                    uniform(&s.fork("x0"), -5.0, 5.0),
                    uniform(&s.fork("y0"), -5.0, 5.0),
                ));
                velocities.push((speed * angle.cos(), speed * angle.sin()));
            }
        }
        SynthKind::Crossing => {
            // First two pedestrians meet at the origin at the middle frame;
            // any further ones are ordinary linear walkers.
            let mid = (frame_count / 2) as f64;
            let sa = uniform(&stream.fork("speed_a"), 0.2, 0.6);
            let sb = uniform(&stream.fork("speed_b"), 0.2, 0.6);
            starts.push((-mid * sa, 0.0));
            velocities.push((sa, 0.0));
            if ped_count > 1 {
                starts.push((0.0, -mid * sb));
                velocities.push((0.0, sb));
            }
            for p in 2..ped_count {
                let s = stream.fork_idx("extra", p as u64);
                let angle = uniform(&s.fork("angle"), 0.0, std::f64::consts::TAU);
                let speed = uniform(&s.fork("speed"), 0.2, 0.6);
                starts.push((
                    uniform(&s.fork("x0"), -5.0, 5.0),
                    uniform(&s.fork("y0"), -5.0, 5.0),
                ));
                velocities.push((speed * angle.cos(), speed * angle.sin()));
            }
        }
        SynthKind::Group => {
            // One shared velocity, lateral offsets of 0.8 m between members.
            let angle = uniform(&stream.fork("angle"), 0.0, std::f64::consts::TAU);
            let speed = uniform(&stream.fork("speed"), 0.2, 0.6);
            let v = (speed * angle.cos(), speed * angle.sin());
            let perp = (-angle.sin(), angle.cos());
            let base = (
                uniform(&stream.fork("x0"), -3.0, 3.0),
                uniform(&stream.fork("y0"), -3.0, 3.0),
            );
            for p in 0..ped_count {
                let offset = p as f64 * 0.8;
                starts.push((base.0 + offset * perp.0, base.1 + offset * perp.1));
                velocities.push(v);
            }
        }
    }
    let mut frames = Vec::with_capacity(frame_count * ped_count);
    for f in 0..frame_count {
        for p in 0..ped_count {
            frames.push(Record {
                frame_id: f as i64,
                ped_id: p as i64 + 1,
                x: starts[p].0 + f as f64 * velocities[p].0,
                y: starts[p].1 + f as f64 * velocities[p].1,
            });
        }
    }
    Ok(TrajectoryScene {
        name: name.to_uppercase(),
        frames,
        frame_interval: FRAME_INTERVAL,
    })
}

/// Writes `n_scenes` scene files named `{kind}_{i}.txt` into `out_dir`,
/// creating it if needed. Returns the written paths in order.
pub fn write_dataset(
    out_dir: &Path,
    kind: SynthKind,
    n_scenes: usize,
    ped_count: usize,
    frame_count: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    if n_scenes == 0 {
        return Err(Error::Config("need at least one scene".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let root = SeedStream::from_seed(seed);
    let mut paths = Vec::with_capacity(n_scenes);
    for i in 0..n_scenes {
        let name = format!("{kind}_{i}");
        let scene = generate_scene(
            kind,
            &name,
            ped_count,
            frame_count,
            &root.fork_idx("scene", i as u64),
        )?;
        let path = out_dir.join(format!("{name}.txt"));
        save_scene(&scene, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
