//! Binary checkpoint format:
//!
//! ```text
//! "MAPLENET" | version u32 | board_size, input_channels, blocks, filters,
//! policy_outputs, embed_dim, anchor_channels (u32 each) | record count u32 |
//! records: name_len u32, name bytes, rank u32, dims u32 × rank, f32 × ∏dims
//! ```
//!
//! All integers and floats are little endian. Optimizer state follows the
//! network tensors as `opt/lr`, `opt/momentum`, `opt/weight_decay` and
//! `opt/velocity/<tensor name>` records.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::optim::OptimState;
use super::params::{Layout, NetConfig};
use super::Network;

pub const MAGIC: &[u8; 8] = b"MAPLENET";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("checkpoint holds no tensors")]
    Empty,
    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    Shape { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("tensor `{0}` missing from checkpoint")]
    Missing(String),
    #[error("unexpected tensor `{0}` in checkpoint")]
    Unknown(String),
}

#[derive(Debug)]
pub struct Checkpoint {
    pub network: Network,
    pub optimizer: Option<OptimState>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_record(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f32]) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    put_u32(out, shape.len() as u32);
    for &d in shape {
        put_u32(out, d as u32);
    }
    for &x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode(network: &Network, optimizer: Option<&OptimState>) -> Vec<u8> {
    let cfg = network.config();
    let layout = network.layout();
    let mut out = Vec::with_capacity(64 + 4 * layout.total_len() * if optimizer.is_some() { 2 } else { 1 });
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    for v in [
        cfg.board_size,
        cfg.input_channels,
        cfg.blocks,
        cfg.filters,
        cfg.policy_outputs,
        cfg.embed_dim,
        cfg.anchor_channels,
    ] {
        put_u32(&mut out, v as u32);
    }
    let count = layout.specs.len() + optimizer.map_or(0, |o| 3 + o.velocity.len());
    put_u32(&mut out, count as u32);
    for (spec, data) in layout.specs.iter().zip(network.params()) {
        put_record(&mut out, &spec.name, &spec.shape, data);
    }
    if let Some(o) = optimizer {
        put_record(&mut out, "opt/lr", &[], &[o.lr]);
        put_record(&mut out, "opt/momentum", &[], &[o.momentum]);
        put_record(&mut out, "opt/weight_decay", &[], &[o.weight_decay]);
        for (spec, v) in layout.specs.iter().zip(&o.velocity) {
            put_record(&mut out, &format!("opt/velocity/{}", spec.name), &spec.shape, v);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&[u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated(what));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic").map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let mut f = [0usize; 7];
    for v in &mut f {
        *v = r.u32("config")? as usize;
    }
    let cfg = NetConfig {
        board_size: f[0],
        input_channels: f[1],
        blocks: f[2],
        filters: f[3],
        policy_outputs: f[4],
        embed_dim: f[5],
        anchor_channels: f[6],
    };
    cfg.validate().map_err(CheckpointError::Config)?;
    let count = r.u32("record count")? as usize;
    if count == 0 {
        return Err(CheckpointError::Empty);
    }
    let layout = Layout::new(&cfg);
    let mut params: Vec<Option<Vec<f32>>> = vec![None; layout.specs.len()];
    let mut velocity: Vec<Option<Vec<f32>>> = vec![None; layout.specs.len()];
    let mut scalars = [None; 3];
    for _ in 0..count {
        let name_len = r.u32("record name")? as usize;
        let name = String::from_utf8_lossy(r.take(name_len, "record name")?).into_owned();
        let rank = r.u32("record rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("record dims")? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(4).ok_or(CheckpointError::Truncated("record data"))?, "record data")?;
        let data: Vec<f32> = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        let scalar_slot = ["opt/lr", "opt/momentum", "opt/weight_decay"].iter().position(|s| *s == name);
        if let Some(i) = scalar_slot {
            if !shape.is_empty() {
                return Err(CheckpointError::Shape { name, expected: vec![], found: shape });
            }
            scalars[i] = Some(data[0]);
            continue;
        }
        let (target, base) = match name.strip_prefix("opt/velocity/") {
            Some(base) => (&mut velocity, base.to_string()),
            None => (&mut params, name.clone()),
        };
        let i = layout.specs.iter().position(|s| s.name == base).ok_or_else(|| CheckpointError::Unknown(name.clone()))?;
        if layout.specs[i].shape != shape {
            return Err(CheckpointError::Shape { name, expected: layout.specs[i].shape.clone(), found: shape });
        }
        target[i] = Some(data);
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Unknown("trailing bytes".into()));
    }
    let params = params
        .into_iter()
        .zip(&layout.specs)
        .map(|(p, s)| p.ok_or_else(|| CheckpointError::Missing(s.name.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let optimizer = match scalars {
        [None, None, None] if velocity.iter().all(Option::is_none) => None,
        [Some(lr), Some(momentum), Some(weight_decay)] => Some(OptimState {
            lr,
            momentum,
            weight_decay,
            velocity: velocity
                .into_iter()
                .zip(&layout.specs)
                .map(|(v, s)| v.ok_or_else(|| CheckpointError::Missing(format!("opt/velocity/{}", s.name))))
                .collect::<Result<Vec<_>, _>>()?,
        }),
        _ => return Err(CheckpointError::Missing("opt/lr, opt/momentum or opt/weight_decay".into())),
    };
    Ok(Checkpoint { network: Network::from_params(cfg, params), optimizer })
}

pub fn save(path: &Path, network: &Network, optimizer: Option<&OptimState>) -> Result<(), CheckpointError> {
    fs::write(path, encode(network, optimizer))
        .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
    decode(&bytes)
}
