//! Generates a synthetic scene file, slides the 8-observed + 12-future
//! window over it, and shows the graph tensors a window becomes under both
//! coordinate modes.
//!
//! Run with `cargo run --example dataset_windows`.

use trajgraph::data::{load_scene, to_graph_tensor, window_sequences, CoordMode, T_OBS, T_PRED};
use trajgraph::synth::{write_dataset, SynthKind};
use trajgraph::Result;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("trajgraph_dataset_windows");
    let files = write_dataset(&dir, SynthKind::Crossing, 1, 3, 28, 42)?;
    println!("wrote {}", files[0].display());

    let scene = load_scene(&files[0])?;
    println!(
        "scene {}: {} records, {} pedestrians, {} frames",
        scene.name,
        scene.frames.len(),
        scene.pedestrian_count(),
        scene.unique_frames().len()
    );

    // Every window covers 20 consecutive frames; a pedestrian joins a
    // window only when present in all of them. 28 frames at stride 1
    // leave 28 - 20 + 1 = 9 windows.
    let windows = window_sequences(&scene, T_OBS, T_PRED, 1)?;
    println!("windows at stride 1: {}", windows.len());

    let sample = &windows[0];
    println!(
        "\nfirst window: pedestrians {:?}, observed span {} steps, future span {} steps",
        sample.ped_ids, T_OBS, T_PRED
    );
    for j in 0..sample.n() {
        let (x0, y0) = sample.obs_pos(j, 0);
        let (x7, y7) = sample.obs_pos(j, T_OBS - 1);
        let (xf, yf) = sample.fut_pos(j, T_PRED - 1);
        println!(
            "  ped {}: obs ({x0:6.2}, {y0:6.2}) -> ({x7:6.2}, {y7:6.2}), final gt ({xf:6.2}, {yf:6.2})",
            sample.ped_ids[j]
        );
    }

    // Absolute mode carries raw positions; relative mode carries per-frame
    // displacements with a zero first step, which is what the model trains
    // on (translation invariance for free).
    for mode in [CoordMode::Absolute, CoordMode::Relative] {
        let (obs, fut) = to_graph_tensor(sample, mode);
        println!(
            "\n{mode:?} graph tensors: obs (d={}, t={}, n={}), fut (d={}, t={}, n={})",
            obs.d, obs.t, obs.n, fut.d, fut.t, fut.n
        );
        let j = 0;
        let row: Vec<String> = (0..T_OBS).map(|t| format!("{:6.2}", obs.at(0, t, j))).collect();
        println!("  ped {} x-channel: [{}]", sample.ped_ids[j], row.join(", "));
    }
    Ok(())
}
