//! Walks through the evaluation metrics on hand-built trajectories where
//! every number can be checked mentally: average and final displacement
//! errors, the error-dispersion term, and how best-of-K selection uses
//! them.
//!
//! Run with `cargo run --example metrics_demo`.

use std::collections::BTreeMap;
use trajgraph::metrics::{ade, fde, var_ade, MetricsReport, SceneMetrics};
use trajgraph::Result;

fn main() -> Result<()> {
    // One pedestrian, two predicted steps, laid out (t, n, xy).
    let gt = vec![0.0, 0.0, 1.0, 0.0];

    // Offset by the 3-4-5 triangle at every step: each point error is 5.
    let pred = vec![3.0, 4.0, 4.0, 4.0];
    println!("constant (3,4) offset from the truth:");
    println!("  ade     = {} (mean point error)", ade(&pred, &gt, 2, 1)?);
    println!("  fde     = {} (final-step error)", fde(&pred, &gt, 2, 1)?);
    println!("  var_ade = {} (no spread: every error identical)", var_ade(&pred, &gt, 2, 1)?);

    // Errors 0 and 2 average to 1 with population variance 1, and the
    // dispersion term is its square root. Together they recover the mean
    // squared error: ade^2 + var_ade^2 = (0 + 4)/2 = 2.
    let pred = vec![0.0, 0.0, 1.0, 2.0];
    let (a, v) = (ade(&pred, &gt, 2, 1)?, var_ade(&pred, &gt, 2, 1)?);
    println!("\npoint errors 0 and 2:");
    println!("  ade = {a}, var_ade = {v}, ade^2 + var_ade^2 = {}", a * a + v * v);

    // Best-of-K in miniature: of three candidate futures, evaluation keeps
    // the lowest-ADE one. More candidates can only lower the kept error.
    let candidates = [
        vec![0.5, 0.0, 1.5, 0.0],
        vec![0.1, 0.0, 1.1, 0.0],
        vec![0.0, 3.0, 1.0, 3.0],
    ];
    let best = candidates
        .iter()
        .map(|c| ade(c, &gt, 2, 1).unwrap())
        .fold(f64::INFINITY, f64::min);
    println!("\nbest-of-3 candidate ADEs pick {best}");

    // Scene rows aggregate into the report used by evaluation: AVG is the
    // column mean and Var the population variance across scenes.
    let mut scenes = BTreeMap::new();
    scenes.insert(
        "CORRIDOR".to_string(),
        SceneMetrics { ade: 0.2, fde: 0.4, var_ade: 0.1 },
    );
    scenes.insert(
        "PLAZA".to_string(),
        SceneMetrics { ade: 0.4, fde: 0.8, var_ade: 0.3 },
    );
    let report = MetricsReport::from_scenes(scenes)?;
    println!("\ntwo-scene report:");
    println!("  AVG ade = {} (mean of 0.2 and 0.4)", report.avg.ade);
    println!("  Var ade = {} (population variance)", report.cross_scene_var.ade);
    Ok(())
}
