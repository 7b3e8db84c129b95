//! Forwards one window through a model and draws a cloud of trajectories
//! from the predicted bivariate-Gaussian field, summarizing its spread
//! around the mean path.
//!
//! Run with `cargo run --example sample_cloud`.

use trajgraph::data::{load_scene, to_graph_tensor, window_sequences, T_OBS, T_PRED};
use trajgraph::loss::sample_trajectories;
use trajgraph::model::{Model, ModelConfig};
use trajgraph::rng::SeedStream;
use trajgraph::synth::{write_dataset, SynthKind};
use trajgraph::Result;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("trajgraph_sample_cloud");
    let files = write_dataset(&dir, SynthKind::Group, 1, 2, 24, 21)?;
    let scene = load_scene(&files[0])?;
    let windows = window_sequences(&scene, T_OBS, T_PRED, 1)?;
    let sample = &windows[0];
    let n = sample.n();

    // An untrained model still emits a well-formed field (positive scales,
    // correlation strictly inside (-1, 1)), so sampling is always safe.
    let model = Model::new(ModelConfig::default(), &SeedStream::from_seed(5))?;
    let (obs, _fut) = to_graph_tensor(sample, model.config.coord_mode);
    let field = model.model_forward(&obs)?;
    println!(
        "field over {} pedestrians x {} steps; ped 0 step 0: mu = ({:.3}, {:.3}), sigma = ({:.3}, {:.3}), rho = {:.3}",
        field.n,
        field.t_pred,
        field.mu(0, 0).0,
        field.mu(0, 0).1,
        field.sigma(0, 0).0,
        field.sigma(0, 0).1,
        field.rho(0, 0),
    );

    let k = 300;
    let cloud = sample_trajectories(&field, k, &SeedStream::from_seed(99), &sample.last_obs())?;
    println!("drew {k} trajectories ({} coordinates)", cloud.len());

    // Spread of the cloud at each horizon: average distance of a sampled
    // endpoint from the cloud centroid. Displacement noise accumulates, so
    // it widens with the horizon.
    let stride = T_PRED * n * 2;
    for t in [0, T_PRED / 2, T_PRED - 1] {
        let j = 0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for s in 0..k {
            let i = s * stride + (t * n + j) * 2;
            cx += cloud[i];
            cy += cloud[i + 1];
        }
        cx /= k as f64;
        cy /= k as f64;
        let mut spread = 0.0;
        for s in 0..k {
            let i = s * stride + (t * n + j) * 2;
            spread += ((cloud[i] - cx).powi(2) + (cloud[i + 1] - cy).powi(2)).sqrt();
        }
        println!(
            "  step {:>2}: centroid ({cx:7.3}, {cy:7.3}), mean radial spread {:.3}",
            t + 1,
            spread / k as f64
        );
    }

    // Same seed, same cloud: sampling is a pure function of the stream.
    let again = sample_trajectories(&field, k, &SeedStream::from_seed(99), &sample.last_obs())?;
    assert_eq!(cloud, again);
    println!("re-sampling with the same seed reproduced the cloud exactly");
    Ok(())
}
