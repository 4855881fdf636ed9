use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use std::fmt::Debug;
use std::iter::Sum;

/// Scalar type the network math is generic over (f32 in play, f64 in
/// gradient checks).
pub trait Real: Float + Sum + Send + Sync + Debug + Default + 'static {
    fn lit(x: f64) -> Self {
        Self::from(x).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub board_size: usize,
    pub input_channels: usize,
    pub blocks: usize,
    pub filters: usize,
    pub policy_outputs: usize,
    pub embed_dim: usize,
    pub anchor_channels: usize,
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("board_size", self.board_size),
            ("input_channels", self.input_channels),
            ("filters", self.filters),
            ("policy_outputs", self.policy_outputs),
            ("embed_dim", self.embed_dim),
            ("anchor_channels", self.anchor_channels),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(format!("net {name} must be positive"));
            }
        }
        let area = self.board_size * self.board_size;
        if self.policy_outputs != area && self.policy_outputs != area + 1 {
            return Err(format!(
                "policy_outputs {} does not match a {}x{} board",
                self.policy_outputs, self.board_size, self.board_size
            ));
        }
        Ok(())
    }

    pub fn area(&self) -> usize {
        self.board_size * self.board_size
    }
}

/// Name and shape of one parameter tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Indices of a convolution's weight and bias tensors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvIdx {
    pub w: usize,
    pub b: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinearIdx {
    pub w: usize,
    pub b: usize,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BodyIdx {
    pub conv_in: ConvIdx,
    pub blocks: Vec<[ConvIdx; 2]>,
}

/// Where every tensor lives in the flat parameter list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub specs: Vec<ParamSpec>,
    pub trunk: BodyIdx,
    pub policy_conv: ConvIdx,
    pub policy_fc: LinearIdx,
    pub value_conv: ConvIdx,
    pub value_fc: LinearIdx,
    pub anchor: BodyIdx,
    pub anchor_fc: LinearIdx,
    pub state: BodyIdx,
    pub state_fc: LinearIdx,
}

struct Builder {
    specs: Vec<ParamSpec>,
}

impl Builder {
    fn push(&mut self, name: String, shape: Vec<usize>) -> usize {
        self.specs.push(ParamSpec { name, shape });
        self.specs.len() - 1
    }

    fn conv(&mut self, prefix: &str, in_ch: usize, out_ch: usize, kernel: usize) -> ConvIdx {
        let w = self.push(format!("{prefix}/w"), vec![out_ch, in_ch, kernel, kernel]);
        let b = self.push(format!("{prefix}/b"), vec![out_ch]);
        ConvIdx { w, b, in_ch, out_ch, kernel }
    }

    fn linear(&mut self, prefix: &str, inputs: usize, outputs: usize) -> LinearIdx {
        let w = self.push(format!("{prefix}/w"), vec![outputs, inputs]);
        let b = self.push(format!("{prefix}/b"), vec![outputs]);
        LinearIdx { w, b, inputs, outputs }
    }

    fn body(&mut self, prefix: &str, in_ch: usize, cfg: &NetConfig) -> BodyIdx {
        let f = cfg.filters;
        let conv_in = self.conv(&format!("{prefix}/conv_in"), in_ch, f, 3);
        let blocks = (0..cfg.blocks)
            .map(|i| {
                [
                    self.conv(&format!("{prefix}/block{i}/conv1"), f, f, 3),
                    self.conv(&format!("{prefix}/block{i}/conv2"), f, f, 3),
                ]
            })
            .collect();
        BodyIdx { conv_in, blocks }
    }
}

impl Layout {
    pub fn new(cfg: &NetConfig) -> Self {
        let mut b = Builder { specs: Vec::new() };
        let area = cfg.area();
        let trunk = b.body("trunk", cfg.input_channels, cfg);
        let policy_conv = b.conv("policy/conv", cfg.filters, 2, 1);
        let policy_fc = b.linear("policy/fc", 2 * area, cfg.policy_outputs);
        let value_conv = b.conv("value/conv", cfg.filters, 1, 1);
        let value_fc = b.linear("value/fc", area, 1);
        let anchor = b.body("anchor", cfg.anchor_channels, cfg);
        let anchor_fc = b.linear("anchor/fc", cfg.filters, cfg.embed_dim);
        let state = b.body("state", crate::encode::BOARD_CHANNELS, cfg);
        let state_fc = b.linear("state/fc", cfg.filters, cfg.embed_dim);
        Layout {
            specs: b.specs,
            trunk,
            policy_conv,
            policy_fc,
            value_conv,
            value_fc,
            anchor,
            anchor_fc,
            state,
            state_fc,
        }
    }

    pub fn zeros<T: Real>(&self) -> Vec<Vec<T>> {
        self.specs.iter().map(|s| vec![T::zero(); s.len()]).collect()
    }

    pub fn total_len(&self) -> usize {
        self.specs.iter().map(ParamSpec::len).sum()
    }

    /// He-normal weights (fan-in), zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f32>> {
        self.specs
            .iter()
            .map(|s| {
                if s.shape.len() == 1 {
                    return vec![0.0; s.len()];
                }
                let fan_in: usize = s.shape[1..].iter().product();
                let std = (2.0 / fan_in as f64).sqrt();
                let normal = Normal::new(0.0, std).unwrap();
                (0..s.len()).map(|_| normal.sample(rng) as f32).collect()
            })
            .collect()
    }
}

pub fn squared_norm<T: Real>(params: &[Vec<T>]) -> T {
    params.iter().flat_map(|t| t.iter()).map(|&x| x * x).sum()
}

pub fn cast<A: Real, B: Real>(params: &[Vec<A>]) -> Vec<Vec<B>> {
    params.iter().map(|t| t.iter().map(|&x| B::from(x).unwrap()).collect()).collect()
}
