//! Full pipeline assembly, the optimizer, and checkpoint persistence.
//!
//! The model chains four stages over a (2 × 8 × N) observation block:
//! a 1-wide convolution lifting the 2 displacement channels to 5 features,
//! the spatio-temporal attention/convolution block, a 1-wide reduction back
//! to 5 channels, and the decoder producing the (12 × N) Gaussian field.
//! Parameters live in plain tensors owned by [`Model`]; every training step
//! binds them onto a fresh tape, runs forward/backward, and harvests named
//! gradients back out.

use crate::data::{CoordMode, GraphTensor, T_OBS};
use crate::error::{Error, Result};
use crate::gcn::{st_block_forward, StBlockParams, Variant, D_LIFT};
use crate::loss::LossConfig;
use crate::nn::{BoundConv, ConvParams};
use crate::rng::SeedStream;
use crate::tape::{Tape, Tensor, TensorId};
use crate::tcnn::{
    decoder_to_field_layout, field_from_tape, tcnn_forward, to_gaussian_field, BoundTcnn,
    FieldIds, GaussianField, TcnnParams, GAUSS_PARAMS,
};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

const CHECKPOINT_MAGIC: &[u8; 4] = b"STTC";
const CHECKPOINT_VERSION: u32 = 1;
/// Upper bound on any length field in a checkpoint; larger values mean the
/// file is corrupt, not that the model is that big.
const SANE_LEN: u32 = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub tcnn_refine_layers: usize,
    pub kernel_width: usize,
    pub variant: Variant,
    pub coord_mode: CoordMode,
    pub loss: LossConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 16,
            heads: 4,
            tcnn_refine_layers: 1,
            kernel_width: 3,
            variant: Variant::ST,
            coord_mode: CoordMode::Relative,
            loss: LossConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.kernel_width % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel width must be odd, got {}",
                self.kernel_width
            )));
        }
        self.loss.validate()
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    lift: ConvParams,
    block: StBlockParams,
    reduce: ConvParams,
    tcnn: TcnnParams,
}

impl Model {
    pub fn new(config: ModelConfig, stream: &SeedStream) -> Result<Self> {
        config.validate()?;
        Ok(Model {
            lift: ConvParams::new(2, D_LIFT, 1, &stream.fork("lift")),
            block: StBlockParams::new(config.d_model, config.heads, &stream.fork("block"))?,
            reduce: ConvParams::new(config.d_model, GAUSS_PARAMS, 1, &stream.fork("reduce")),
            tcnn: TcnnParams::new(
                config.kernel_width,
                config.tcnn_refine_layers,
                &stream.fork("tcnn"),
            )?,
            config,
        })
    }

    /// All trainable tensors with their registry names, in bind order.
    pub fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.lift.visit("lift", &mut out);
        self.block.visit(&mut out);
        self.reduce.visit("reduce", &mut out);
        self.tcnn.visit(&mut out);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        self.lift.visit_mut("lift", &mut out);
        self.block.visit_mut(&mut out);
        self.reduce.visit_mut("reduce", &mut out);
        self.tcnn.visit_mut(&mut out);
        out
    }

    /// Copies every parameter onto `tape` as a leaf and records the handle
    /// under its registry name.
    pub fn bind(&self, tape: &mut Tape) -> Bindings {
        let mut registry = Vec::new();
        let lift = self.lift.bind(tape, "lift", &mut registry);
        let block = self.block.bind(tape, &mut registry);
        let reduce = self.reduce.bind(tape, "reduce", &mut registry);
        let tcnn = self.tcnn.bind(tape, &mut registry);
        Bindings {
            registry,
            variant: self.config.variant,
            lift,
            block,
            reduce,
            tcnn,
        }
    }

    /// One full inference pass on a private tape.
    pub fn model_forward(&self, graph: &GraphTensor) -> Result<GaussianField> {
        if graph.coord_mode != self.config.coord_mode {
            return Err(Error::Contract(format!(
                "graph coordinates are {} but the model expects {}",
                graph.coord_mode, self.config.coord_mode
            )));
        }
        let mut tape = Tape::new();
        let bindings = self.bind(&mut tape);
        let x = tape.constant(graph.values.clone(), graph.shape())?;
        let field = forward(&mut tape, &bindings, x)?;
        Ok(field_from_tape(&tape, &field, self.config.coord_mode))
    }
}

/// Tape handles for one bound copy of the model.
#[derive(Debug, Clone)]
pub struct Bindings {
    pub registry: Vec<(String, TensorId)>,
    pub variant: Variant,
    pub lift: BoundConv,
    pub block: crate::gcn::BoundStBlock,
    pub reduce: BoundConv,
    pub tcnn: BoundTcnn,
}

/// Observation block (2 × 8 × N) to Gaussian field, on the caller's tape.
pub fn forward(tape: &mut Tape, b: &Bindings, x: TensorId) -> Result<FieldIds> {
    let shape = tape.shape(x).to_vec();
    if shape.len() != 3 || shape[0] != 2 || shape[1] != T_OBS {
        return Err(Error::shape("model forward", &shape, &[2, T_OBS, 0]));
    }
    let lifted = b.lift.apply(tape, x)?;
    let features = st_block_forward(tape, lifted, &b.block, b.variant)?;
    let reduced = b.reduce.apply(tape, features)?;
    let decoded = tcnn_forward(tape, reduced, &b.tcnn)?;
    let raw = decoder_to_field_layout(tape, decoded)?;
    to_gaussian_field(tape, raw)
}

/// Adds each bound parameter's tape gradient into `into` under its registry
/// name. Parameters untouched by the loss contribute exact zeros.
pub fn harvest_grads(tape: &Tape, b: &Bindings, into: &mut BTreeMap<String, Vec<f64>>) {
    for (name, id) in &b.registry {
        let g = tape.grad(*id);
        let slot = into
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; g.len()]);
        for (dst, src) in slot.iter_mut().zip(g) {
            *dst += src;
        }
    }
}

/// Classic momentum update on one flat parameter block:
/// v ← momentum·v + g, then p ← p − lr·v.
pub fn sgd_step(param: &mut [f64], grad: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) {
    for ((p, g), v) in param.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}

/// Momentum SGD over the model's named parameters. Velocities appear on
/// first use and persist across steps (and through checkpoints).
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub momentum: f64,
    pub velocity: BTreeMap<String, Vec<f64>>,
}

impl SgdMomentum {
    pub fn new(momentum: f64) -> Self {
        SgdMomentum {
            momentum,
            velocity: BTreeMap::new(),
        }
    }

    pub fn step(
        &mut self,
        model: &mut Model,
        grads: &BTreeMap<String, Vec<f64>>,
        lr: f64,
    ) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {lr}")));
        }
        for (name, tensor) in model.parameters_mut() {
            let g = grads
                .get(&name)
                .ok_or_else(|| Error::Contract(format!("no gradient harvested for {name}")))?;
            if g.len() != tensor.data.len() {
                return Err(Error::shape("sgd step", &[g.len()], &[tensor.data.len()]));
            }
            let v = self
                .velocity
                .entry(name)
                .or_insert_with(|| vec![0.0; g.len()]);
            sgd_step(&mut tensor.data, g, v, lr, self.momentum);
        }
        Ok(())
    }
}

/// Serializable snapshot of a training run: configuration, epoch counter,
/// root seed, every named parameter, and the optimizer velocities.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub epoch: u32,
    pub seed: u64,
    pub params: Vec<(String, Tensor)>,
    pub velocity: BTreeMap<String, Vec<f64>>,
}

impl Checkpoint {
    pub fn capture(model: &Model, opt: &SgdMomentum, epoch: u32, seed: u64) -> Self {
        Checkpoint {
            config: model.config.clone(),
            epoch,
            seed,
            params: model
                .parameters()
                .into_iter()
                .map(|(n, t)| (n, t.clone()))
                .collect(),
            velocity: opt.velocity.clone(),
        }
    }

    /// Rebuilds the model and optimizer. Every model parameter must match
    /// exactly one stored record by name and shape.
    pub fn restore(&self, momentum: f64) -> Result<(Model, SgdMomentum)> {
        let mut model = Model::new(self.config.clone(), &SeedStream::from_seed(0))?;
        let stored: BTreeMap<&str, &Tensor> =
            self.params.iter().map(|(n, t)| (n.as_str(), t)).collect();
        if stored.len() != self.params.len() {
            return Err(Error::Integrity("duplicate parameter record".into()));
        }
        let mut matched = 0usize;
        for (name, tensor) in model.parameters_mut() {
            let record = stored.get(name.as_str()).ok_or_else(|| {
                Error::Integrity(format!("checkpoint is missing parameter {name}"))
            })?;
            if record.shape != tensor.shape {
                return Err(Error::Integrity(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    record.shape, tensor.shape
                )));
            }
            tensor.data = record.data.clone();
            tensor.zero_grad();
            matched += 1;
        }
        if matched != self.params.len() {
            return Err(Error::Integrity(format!(
                "checkpoint carries {} parameter records, model has {matched}",
                self.params.len()
            )));
        }
        let opt = SgdMomentum {
            momentum,
            velocity: self.velocity.clone(),
        };
        Ok((model, opt))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut buf, CHECKPOINT_VERSION);
        put_u32(&mut buf, self.config.d_model as u32);
        put_u32(&mut buf, self.config.heads as u32);
        put_u32(&mut buf, self.config.tcnn_refine_layers as u32);
        put_u32(&mut buf, self.config.kernel_width as u32);
        buf.push(match self.config.variant {
            Variant::S => 0,
            Variant::T => 1,
            Variant::ST => 2,
        });
        buf.push(match self.config.coord_mode {
            CoordMode::Absolute => 0,
            CoordMode::Relative => 1,
        });
        put_f64(&mut buf, self.config.loss.alpha);
        put_u32(&mut buf, self.config.loss.mmd_bandwidths.len() as u32);
        for b in &self.config.loss.mmd_bandwidths {
            put_f64(&mut buf, *b);
        }
        put_u32(&mut buf, self.config.loss.mmd_sample_count as u32);
        put_u32(&mut buf, self.epoch);
        buf.extend_from_slice(&self.seed.to_le_bytes());
        put_u32(&mut buf, self.params.len() as u32);
        for (name, tensor) in &self.params {
            put_str(&mut buf, name);
            put_u32(&mut buf, tensor.shape.len() as u32);
            for d in &tensor.shape {
                put_u32(&mut buf, *d as u32);
            }
            for v in &tensor.data {
                put_f64(&mut buf, *v);
            }
        }
        put_u32(&mut buf, self.velocity.len() as u32);
        for (name, v) in &self.velocity {
            put_str(&mut buf, name);
            put_u32(&mut buf, v.len() as u32);
            for x in v {
                put_f64(&mut buf, *x);
            }
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = std::fs::File::open(path)?;
        let mut r = std::io::BufReader::new(file);
        let mut magic = [0u8; 4];
        read_all(&mut r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Integrity(format!(
                "not a checkpoint file (magic {magic:?})"
            )));
        }
        let version = get_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Incompatible(format!(
                "checkpoint version {version}, this build reads {CHECKPOINT_VERSION}"
            )));
        }
        let d_model = get_u32(&mut r)? as usize;
        let heads = get_u32(&mut r)? as usize;
        let tcnn_refine_layers = get_u32(&mut r)? as usize;
        let kernel_width = get_u32(&mut r)? as usize;
        let variant = match get_u8(&mut r)? {
            0 => Variant::S,
            1 => Variant::T,
            2 => Variant::ST,
            v => return Err(Error::Integrity(format!("unknown variant tag {v}"))),
        };
        let coord_mode = match get_u8(&mut r)? {
            0 => CoordMode::Absolute,
            1 => CoordMode::Relative,
            v => return Err(Error::Integrity(format!("unknown coordinate tag {v}"))),
        };
        let alpha = get_f64(&mut r)?;
        let n_bw = get_len(&mut r)?;
        let mut mmd_bandwidths = Vec::with_capacity(n_bw);
        for _ in 0..n_bw {
            mmd_bandwidths.push(get_f64(&mut r)?);
        }
        let mmd_sample_count = get_u32(&mut r)? as usize;
        let epoch = get_u32(&mut r)?;
        let mut seed_bytes = [0u8; 8];
        read_all(&mut r, &mut seed_bytes)?;
        let seed = u64::from_le_bytes(seed_bytes);
        let n_params = get_len(&mut r)?;
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let name = get_str(&mut r)?;
            let rank = get_len(&mut r)?;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(get_u32(&mut r)? as usize);
            }
            let numel: usize = shape.iter().product();
            if numel > SANE_LEN as usize {
                return Err(Error::Integrity(format!(
                    "parameter {name} claims {numel} elements"
                )));
            }
            let mut data = Vec::with_capacity(numel);
            for _ in 0..numel {
                data.push(get_f64(&mut r)?);
            }
            params.push((name, Tensor::param(data, shape)?));
        }
        let n_vel = get_len(&mut r)?;
        let mut velocity = BTreeMap::new();
        for _ in 0..n_vel {
            let name = get_str(&mut r)?;
            let len = get_len(&mut r)?;
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                v.push(get_f64(&mut r)?);
            }
            velocity.insert(name, v);
        }
        Ok(Checkpoint {
            config: ModelConfig {
                d_model,
                heads,
                tcnn_refine_layers,
                kernel_width,
                variant,
                coord_mode,
                loss: LossConfig {
                    alpha,
                    mmd_bandwidths,
                    mmd_sample_count,
                },
            },
            epoch,
            seed,
            params,
            velocity,
        })
    }
}

pub fn save_checkpoint(
    model: &Model,
    opt: &SgdMomentum,
    epoch: u32,
    seed: u64,
    path: &Path,
) -> Result<()> {
    Checkpoint::capture(model, opt, epoch, seed).save(path)
}

pub fn load_checkpoint(path: &Path, momentum: f64) -> Result<(Model, SgdMomentum, u32, u64)> {
    let ckpt = Checkpoint::load(path)?;
    let (model, opt) = ckpt.restore(momentum)?;
    Ok((model, opt, ckpt.epoch, ckpt.seed))
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

fn read_all<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Integrity("checkpoint file is truncated".into()))
}

fn get_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    read_all(r, &mut b)?;
    Ok(b[0])
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_all(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_all(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// u32 length field with a corruption guard.
fn get_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = get_u32(r)?;
    if v > SANE_LEN {
        return Err(Error::Integrity(format!("implausible length field {v}")));
    }
    Ok(v as usize)
}

fn get_str<R: Read>(r: &mut R) -> Result<String> {
    let len = get_len(r)?;
    let mut bytes = vec![0u8; len];
    read_all(r, &mut bytes)?;
    String::from_utf8(bytes).map_err(|_| Error::Integrity("non-UTF-8 name record".into()))
}
