//! Residual policy/value network and the two-tower Siamese embedder,
//! written directly on flat parameter buffers with analytic gradients.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;

use rand::Rng;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use loss::{loss_and_gradients, triplet_distances, LossBreakdown, TrainingSample, Triplet, TripletDistances};
pub use optim::{sgd_step, OptimState};
pub use params::{Layout, NetConfig, ParamSpec, Real};

use crate::encode::{history_channels, PlaneTensor, BOARD_CHANNELS, STATE_CHANNELS};
use crate::game::GameSpec;
use crate::sampler::Embedder;

/// Embedding width of both towers.
pub const EMBED_DIM: usize = 64;

impl NetConfig {
    /// Network shape for a game with the given trunk size.
    pub fn for_game(spec: &GameSpec, blocks: usize, filters: usize, embed_dim: usize) -> Self {
        NetConfig {
            board_size: spec.size,
            input_channels: STATE_CHANNELS,
            blocks,
            filters,
            policy_outputs: spec.num_actions(),
            embed_dim,
            anchor_channels: history_channels(spec.kind),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetConfig,
    layout: Layout,
    params: Vec<Vec<f32>>,
}

impl Network {
    pub fn new_random<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Self {
        let layout = Layout::new(&config);
        let params = layout.init(rng);
        Network { config, layout, params }
    }

    pub fn zeros(config: NetConfig) -> Self {
        let layout = Layout::new(&config);
        let params = layout.zeros();
        Network { config, layout, params }
    }

    /// Panics if the tensors do not match the layout of `config`.
    pub fn from_params(config: NetConfig, params: Vec<Vec<f32>>) -> Self {
        let layout = Layout::new(&config);
        assert_eq!(params.len(), layout.specs.len(), "tensor count");
        for (p, s) in params.iter().zip(&layout.specs) {
            assert_eq!(p.len(), s.len(), "tensor {}", s.name);
        }
        Network { config, layout, params }
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[Vec<f32>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<f32>] {
        &mut self.params
    }

    /// Whether this network can play `spec`.
    pub fn check_game(&self, spec: &GameSpec) -> Result<(), String> {
        let want = NetConfig::for_game(spec, self.config.blocks, self.config.filters, self.config.embed_dim);
        if want != self.config {
            return Err(format!(
                "network built for a {}x{} board with {} actions and {} history planes cannot play {} {}x{}",
                self.config.board_size,
                self.config.board_size,
                self.config.policy_outputs,
                self.config.anchor_channels,
                spec.kind,
                spec.size,
                spec.size
            ));
        }
        Ok(())
    }

    /// Masked policy and tanh value for six state planes.
    pub fn policy_value(&self, planes: &PlaneTensor, legal: &[bool]) -> (Vec<f32>, f32) {
        assert_eq!(planes.channels, STATE_CHANNELS);
        let fwd = model::policy_value_forward(&self.params, &self.layout, &planes.data, legal, self.config.board_size);
        (fwd.policy, fwd.value)
    }

    pub fn anchor_embedding(&self, history: &PlaneTensor) -> Vec<f32> {
        assert_eq!(history.channels, self.config.anchor_channels);
        let l = &self.layout;
        model::tower_forward(&self.params, &l.anchor, l.anchor_fc, &history.data, self.config.board_size).embedding
    }

    pub fn state_embedding(&self, board: &PlaneTensor) -> Vec<f32> {
        assert_eq!(board.channels, BOARD_CHANNELS);
        let l = &self.layout;
        model::tower_forward(&self.params, &l.state, l.state_fc, &board.data, self.config.board_size).embedding
    }
}

impl Embedder for Network {
    fn embed_anchor(&self, history: &PlaneTensor) -> Vec<f32> {
        self.anchor_embedding(history)
    }

    fn embed_state(&self, board: &PlaneTensor) -> Vec<f32> {
        self.state_embedding(board)
    }
}
