//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! "MSRC"  version:u32 = 1
//! input_channels:u32  layer_count:u32
//! per layer: kind:u8 filters:u32 kernel:u32 stride:u32 activation:u8 slope:f32 bias:u8
//! epoch:u32  history_len:u32  history:f32 × history_len
//! per layer: dims:u32 × 4  weights:f32 × product(dims)  bias_len:u32  bias:f32 × bias_len
//! optional training-state block:
//!   "TRST" lr:f64 batch_size:u32 epochs:u32 seed:u64 degradation:u8
//!   val_len:u32 val:f32 × val_len
//!   optimizer:u8 (0 = SGD, 1 = Adam) beta1:f64 beta2:f64 eps:f64 step:u64
//!   slot_count:u32, then per slot: len:u32 m:f32 × len v:f32 × len
//! ```
//!
//! `kind` is 0 for convolution and 1 for transposed convolution;
//! `activation` is 0 for LeakyReLU, 1 for sigmoid and 2 for identity.

use std::fs;
use std::io::{self, Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::optim::{Optimizer, OptimizerKind};
use super::spec::{LayerKind, LayerSpec, NetworkSpec};
use super::{Activation, Network, Tensor};
use crate::error::{Error, Result};
use crate::interp::ScaleMethod;

pub const MAGIC: [u8; 4] = *b"MSRC";
pub const VERSION: u32 = 1;
const TRAINING_TAG: [u8; 4] = *b"TRST";

/// Hyperparameters and optimizer state needed to resume training exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingState {
    pub lr: f64,
    pub batch_size: u32,
    /// Total epochs the run was configured for.
    pub epochs: u32,
    pub seed: u64,
    pub degradation: ScaleMethod,
    pub val_history: Vec<f32>,
    pub optimizer: Optimizer<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub weights: Vec<Tensor<f32>>,
    pub biases: Vec<Vec<f32>>,
    /// Completed epochs.
    pub epoch: u32,
    /// Mean training loss of every completed epoch.
    pub loss_history: Vec<f32>,
    pub training: Option<TrainingState>,
}

impl Checkpoint {
    pub fn from_network(net: &Network<f32>, epoch: u32, loss_history: Vec<f32>) -> Self {
        Self {
            spec: net.spec().clone(),
            weights: net.layers().iter().map(|l| l.weights.clone()).collect(),
            biases: net.layers().iter().map(|l| l.bias.clone()).collect(),
            epoch,
            loss_history,
            training: None,
        }
    }

    pub fn network(&self) -> Result<Network<f32>> {
        Network::from_parts(self.spec.clone(), self.weights.clone(), self.biases.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        w.write_u32::<LE>(self.spec.input_channels as u32)?;
        w.write_u32::<LE>(self.spec.layers.len() as u32)?;
        for l in &self.spec.layers {
            w.write_u8(match l.kind {
                LayerKind::Conv => 0,
                LayerKind::ConvTranspose => 1,
            })?;
            w.write_u32::<LE>(l.filters as u32)?;
            w.write_u32::<LE>(l.kernel as u32)?;
            w.write_u32::<LE>(l.stride as u32)?;
            let (code, slope) = match l.activation {
                Activation::LeakyRelu { slope } => (0, slope),
                Activation::Sigmoid => (1, 0.0),
                Activation::Identity => (2, 0.0),
            };
            w.write_u8(code)?;
            w.write_f32::<LE>(slope)?;
            w.write_u8(l.bias as u8)?;
        }
        w.write_u32::<LE>(self.epoch)?;
        write_f32s(w, &self.loss_history)?;
        for (t, b) in self.weights.iter().zip(&self.biases) {
            for d in t.shape() {
                w.write_u32::<LE>(d as u32)?;
            }
            for &v in t.data() {
                w.write_f32::<LE>(v)?;
            }
            write_f32s(w, b)?;
        }
        if let Some(ts) = &self.training {
            w.write_all(&TRAINING_TAG)?;
            w.write_f64::<LE>(ts.lr)?;
            w.write_u32::<LE>(ts.batch_size)?;
            w.write_u32::<LE>(ts.epochs)?;
            w.write_u64::<LE>(ts.seed)?;
            w.write_u8(method_code(ts.degradation))?;
            write_f32s(w, &ts.val_history)?;
            let opt = &ts.optimizer;
            let (code, b1, b2, eps) = match opt.kind {
                OptimizerKind::Sgd => (0, 0.0, 0.0, 0.0),
                OptimizerKind::Adam { beta1, beta2, eps } => (1, beta1, beta2, eps),
            };
            w.write_u8(code)?;
            w.write_f64::<LE>(b1)?;
            w.write_f64::<LE>(b2)?;
            w.write_f64::<LE>(eps)?;
            w.write_u64::<LE>(opt.step)?;
            w.write_u32::<LE>(opt.m.len() as u32)?;
            for (m, v) in opt.m.iter().zip(&opt.v) {
                w.write_u32::<LE>(m.len() as u32)?;
                for &x in m.iter().chain(v) {
                    w.write_f32::<LE>(x)?;
                }
            }
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if magic != MAGIC {
            return Err(Error::BadMagic {
                expected: MAGIC,
                found: magic,
            });
        }
        let version = u32_at(&mut r, "version")?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                expected: VERSION,
                found: version,
            });
        }
        let input_channels = u32_at(&mut r, "input channels")? as usize;
        let layer_count = u32_at(&mut r, "layer count")? as usize;
        let mut layers = Vec::with_capacity(layer_count.min(1024));
        for _ in 0..layer_count {
            let kind = match u8_at(&mut r, "layer kind")? {
                0 => LayerKind::Conv,
                1 => LayerKind::ConvTranspose,
                k => return Err(Error::Inconsistent(format!("unknown layer kind {k}"))),
            };
            let filters = u32_at(&mut r, "filters")? as usize;
            let kernel = u32_at(&mut r, "kernel")? as usize;
            let stride = u32_at(&mut r, "stride")? as usize;
            let act_code = u8_at(&mut r, "activation")?;
            let slope = f32_at(&mut r, "slope")?;
            let activation = match act_code {
                0 => Activation::LeakyRelu { slope },
                1 => Activation::Sigmoid,
                2 => Activation::Identity,
                a => return Err(Error::Inconsistent(format!("unknown activation {a}"))),
            };
            let bias = match u8_at(&mut r, "bias flag")? {
                0 => false,
                1 => true,
                b => return Err(Error::Inconsistent(format!("bad bias flag {b}"))),
            };
            layers.push(LayerSpec {
                kind,
                filters,
                kernel,
                stride,
                activation,
                bias,
            });
        }
        let spec = NetworkSpec { input_channels, layers };
        spec.validate().map_err(|e| Error::Inconsistent(e.to_string()))?;

        let epoch = u32_at(&mut r, "epoch")?;
        let loss_history = f32s_at(&mut r, "loss history")?;
        if loss_history.len() != epoch as usize {
            return Err(Error::Inconsistent(format!(
                "{} loss values for {epoch} completed epochs",
                loss_history.len()
            )));
        }

        let mut weights = Vec::with_capacity(spec.layers.len());
        let mut biases = Vec::with_capacity(spec.layers.len());
        for (i, (ls, cin)) in spec.layers.iter().zip(spec.layer_inputs()).enumerate() {
            let mut dims = [0usize; 4];
            for d in &mut dims {
                *d = u32_at(&mut r, "weight dims")? as usize;
            }
            if dims != ls.weight_shape(cin) {
                return Err(Error::Inconsistent(format!(
                    "layer {i}: stored weight shape {dims:?}, spec implies {:?}",
                    ls.weight_shape(cin)
                )));
            }
            let data = f32s_exact(&mut r, dims.iter().product(), "weights")?;
            weights.push(Tensor::new(dims, data)?);
            let bias = f32s_at(&mut r, "bias")?;
            if bias.len() != if ls.bias { ls.filters } else { 0 } {
                return Err(Error::Inconsistent(format!("layer {i}: {} bias values", bias.len())));
            }
            biases.push(bias);
        }

        let training = if (r.position() as usize) < bytes.len() {
            Some(read_training_state(&mut r, &weights, &biases)?)
        } else {
            None
        };
        if (r.position() as usize) != bytes.len() {
            return Err(Error::Inconsistent("trailing bytes after checkpoint".into()));
        }
        Ok(Self {
            spec,
            weights,
            biases,
            epoch,
            loss_history,
            training,
        })
    }

    /// Writes via a temporary file and a rename, so a crash never leaves a
    /// partial checkpoint at `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    ckpt.save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

fn method_code(m: ScaleMethod) -> u8 {
    match m {
        ScaleMethod::Nearest => 0,
        ScaleMethod::Bilinear => 1,
        ScaleMethod::Bicubic => 2,
    }
}

fn read_training_state(r: &mut Cursor<&[u8]>, weights: &[Tensor<f32>], biases: &[Vec<f32>]) -> Result<TrainingState> {
    let mut tag = [0u8; 4];
    read_exact(r, &mut tag, "training-state tag")?;
    if tag != TRAINING_TAG {
        return Err(Error::Inconsistent("unrecognized data after the weights".into()));
    }
    let lr = f64_at(r, "learning rate")?;
    let batch_size = u32_at(r, "batch size")?;
    let epochs = u32_at(r, "epochs")?;
    let seed = u64_at(r, "seed")?;
    let degradation = match u8_at(r, "degradation")? {
        0 => ScaleMethod::Nearest,
        1 => ScaleMethod::Bilinear,
        2 => ScaleMethod::Bicubic,
        d => return Err(Error::Inconsistent(format!("unknown degradation code {d}"))),
    };
    let val_history = f32s_at(r, "validation history")?;
    let code = u8_at(r, "optimizer")?;
    let beta1 = f64_at(r, "beta1")?;
    let beta2 = f64_at(r, "beta2")?;
    let eps = f64_at(r, "eps")?;
    let kind = match code {
        0 => OptimizerKind::Sgd,
        1 => OptimizerKind::Adam { beta1, beta2, eps },
        o => return Err(Error::Inconsistent(format!("unknown optimizer code {o}"))),
    };
    let step = u64_at(r, "optimizer step")?;
    let slots = u32_at(r, "optimizer slots")? as usize;
    let expected: Vec<usize> = weights
        .iter()
        .zip(biases)
        .flat_map(|(w, b)| [w.len(), b.len()])
        .collect();
    if slots != 0 && slots != expected.len() {
        return Err(Error::Inconsistent(format!(
            "optimizer has {slots} slots for {} parameter tensors",
            expected.len()
        )));
    }
    let (mut m, mut v) = (Vec::with_capacity(slots), Vec::with_capacity(slots));
    for &len in expected.iter().take(slots) {
        let stored = u32_at(r, "optimizer slot length")? as usize;
        if stored != len {
            return Err(Error::Inconsistent(
                "optimizer slot size differs from parameters".into(),
            ));
        }
        m.push(f32s_exact(r, len, "first moments")?);
        v.push(f32s_exact(r, len, "second moments")?);
    }
    Ok(TrainingState {
        lr,
        batch_size,
        epochs,
        seed,
        degradation,
        val_history,
        optimizer: Optimizer { kind, step, m, v },
    })
}

fn truncated(what: &str) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Truncated(format!("file ends inside {what}")),
        _ => Error::Io(e),
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(truncated(what))
}

fn u8_at(r: &mut impl Read, what: &str) -> Result<u8> {
    r.read_u8().map_err(truncated(what))
}

fn u32_at(r: &mut impl Read, what: &str) -> Result<u32> {
    r.read_u32::<LE>().map_err(truncated(what))
}

fn u64_at(r: &mut impl Read, what: &str) -> Result<u64> {
    r.read_u64::<LE>().map_err(truncated(what))
}

fn f32_at(r: &mut impl Read, what: &str) -> Result<f32> {
    r.read_f32::<LE>().map_err(truncated(what))
}

fn f64_at(r: &mut impl Read, what: &str) -> Result<f64> {
    r.read_f64::<LE>().map_err(truncated(what))
}

/// Reads `len` floats, checking first that the buffer can hold them so a
/// corrupt length cannot trigger a huge allocation.
fn f32s_exact(r: &mut Cursor<&[u8]>, len: usize, what: &str) -> Result<Vec<f32>> {
    let remaining = r.get_ref().len() - r.position() as usize;
    if len.checked_mul(4).is_none_or(|b| b > remaining) {
        return Err(Error::Truncated(format!("file ends inside {what}")));
    }
    let mut out = vec![0.0f32; len];
    r.read_f32_into::<LE>(&mut out).map_err(truncated(what))?;
    Ok(out)
}

fn f32s_at(r: &mut Cursor<&[u8]>, what: &str) -> Result<Vec<f32>> {
    let len = u32_at(r, what)? as usize;
    f32s_exact(r, len, what)
}

fn write_f32s(w: &mut impl Write, xs: &[f32]) -> io::Result<()> {
    w.write_u32::<LE>(xs.len() as u32)?;
    xs.iter().try_for_each(|&x| w.write_f32::<LE>(x))
}
