//! Turns one frame of pedestrian features into a symmetric attention
//! adjacency matrix and degree-normalizes it, printing each stage.
//!
//! Run with `cargo run --example build_adjacency`.

use trajgraph::attention::{adjacency_from_features, AttentionParams};
use trajgraph::gcn::normalize_adjacency;
use trajgraph::rng::SeedStream;
use trajgraph::tape::Tape;
use trajgraph::Result;

fn print_matrix(label: &str, m: &[f64], n: usize) {
    println!("{label}:");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:7.4}", m[i * n + j])).collect();
        println!("  [{}]", row.join(", "));
    }
}

fn main() -> Result<()> {
    // Three pedestrians described by 5 features each (the lifted width the
    // model uses at block entry).
    let n = 3;
    let d_in = 5;
    let mut feats = vec![0.0; n * d_in];
    SeedStream::from_seed(12).fill_uniform(&mut feats, 1.0);

    let params = AttentionParams::new(d_in, 16, 4, &SeedStream::from_seed(13))?;
    let mut tape = Tape::new();
    let mut registry = Vec::new();
    let bound = params.bind(&mut tape, "attn", &mut registry);
    let x = tape.constant(feats, vec![n, d_in])?;

    // Multi-head scaled dot-product scores, averaged over heads and
    // symmetrized, yield a nonnegative weighted adjacency.
    let adj = adjacency_from_features(&mut tape, x, &bound)?;
    let a = tape.value(adj).to_vec();
    print_matrix("attention adjacency A", &a, n);
    for i in 0..n {
        for j in 0..n {
            assert_eq!(a[i * n + j], a[j * n + i], "A must be symmetric");
            assert!(a[i * n + j] >= 0.0, "A must be nonnegative");
        }
    }

    // Self-loops plus symmetric degree scaling: entries become
    // A'_ij / sqrt(deg_i * deg_j), which bounds the spectral radius by 1
    // so stacked graph convolutions cannot blow features up.
    let norm = normalize_adjacency(&a, n)?;
    print_matrix("\ndegree-normalized norm(A + I)", &norm, n);

    let loners = normalize_adjacency(&vec![0.0; n * n], n)?;
    print_matrix(
        "\nno interaction at all normalizes to the identity",
        &loners,
        n,
    );
    Ok(())
}
