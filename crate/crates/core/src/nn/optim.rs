use serde::{Deserialize, Serialize};

/// SGD with momentum. Weight decay is not applied here: it enters through
/// the L2 term of the loss gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub velocity: Vec<Vec<f32>>,
}

impl OptimState {
    pub fn new(lr: f32, momentum: f32, weight_decay: f32, shapes: &[Vec<f32>]) -> Self {
        OptimState { lr, momentum, weight_decay, velocity: shapes.iter().map(|t| vec![0.0; t.len()]).collect() }
    }
}

/// v ← μ·v + g; θ ← θ − lr·v.
pub fn sgd_step(params: &mut [Vec<f32>], grads: &[Vec<f32>], opt: &mut OptimState) {
    assert_eq!(params.len(), grads.len(), "gradient tensor count");
    assert_eq!(params.len(), opt.velocity.len(), "velocity tensor count");
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut opt.velocity) {
        assert_eq!(p.len(), g.len());
        for ((pi, &gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = opt.momentum * *vi + gi;
            *pi -= opt.lr * *vi;
        }
    }
}
