//! Shared learnable-parameter bundles.

use crate::error::Result;
use crate::rng::SeedStream;
use crate::tape::{Tape, Tensor, TensorId};

/// Kernels (Cout×Cin×k) plus per-channel bias for a length-preserving
/// convolution along the middle axis of a (Cin×L×N) block.
#[derive(Debug, Clone)]
pub struct ConvParams {
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl ConvParams {
    /// Uniform init in ±sqrt(1/fan_in) with fan_in = cin·k; biases start at
    /// zero.
    pub fn new(cin: usize, cout: usize, k: usize, stream: &SeedStream) -> Self {
        let bound = (1.0 / (cin * k) as f64).sqrt();
        ConvParams {
            kernels: Tensor::rand_param(vec![cout, cin, k], bound, &stream.fork("kernels")),
            bias: Tensor::param(vec![0.0; cout], vec![cout]).expect("bias shape"),
        }
    }

    pub fn bind(
        &self,
        tape: &mut Tape,
        prefix: &str,
        registry: &mut Vec<(String, TensorId)>,
    ) -> BoundConv {
        let kernels = tape.leaf(&self.kernels);
        registry.push((format!("{prefix}.kernels"), kernels));
        let bias = tape.leaf(&self.bias);
        registry.push((format!("{prefix}.bias"), bias));
        BoundConv { kernels, bias }
    }

    pub fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.kernels"), &self.kernels));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.kernels"), &mut self.kernels));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundConv {
    pub kernels: TensorId,
    pub bias: TensorId,
}

impl BoundConv {
    pub fn apply(&self, tape: &mut Tape, x: TensorId) -> Result<TensorId> {
        tape.conv_over_time(x, self.kernels, self.bias)
    }
}
