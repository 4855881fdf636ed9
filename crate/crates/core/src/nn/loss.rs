//! Joint objective: squared value error, policy cross-entropy, triplet
//! hinge with margin 1, and L2 weight decay.

use rayon::prelude::*;

use super::model::{policy_value_backward, policy_value_forward, tower_backward, tower_forward};
use super::params::{squared_norm, Layout, NetConfig, Real};
use crate::encode::PlaneTensor;

pub const TRIPLET_MARGIN: f64 = 1.0;

/// Samples per rayon task; fixed so gradient sums do not depend on the
/// number of threads.
const CHUNK: usize = 8;

#[derive(Clone, Debug)]
pub struct Triplet {
    pub anchor: PlaneTensor,
    pub positive: PlaneTensor,
    pub negative: PlaneTensor,
}

#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub state: PlaneTensor,
    pub legal: Vec<bool>,
    /// Search policy target; zero wherever `legal` is false.
    pub pi: Vec<f32>,
    pub z: f32,
    pub triplet: Option<Triplet>,
}

/// Batch means of each loss term.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub value: f64,
    pub policy: f64,
    pub triplet: f64,
    pub l2: f64,
    pub samples: usize,
    pub triplets: usize,
    /// Triplets with d_ap < d_an.
    pub triplet_successes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripletDistances {
    pub d_ap: f64,
    pub d_an: f64,
}

fn to_real<T: Real>(xs: &[f32]) -> Vec<T> {
    xs.iter().map(|&x| T::from(x).unwrap()).collect()
}

fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

struct Partial<T> {
    value: T,
    policy: T,
    triplet: T,
    triplets: usize,
    successes: usize,
    grads: Vec<Vec<T>>,
}

fn sample_terms<T: Real>(
    cfg: &NetConfig,
    layout: &Layout,
    params: &[Vec<T>],
    s: &TrainingSample,
    scale: T,
    acc: &mut Partial<T>,
) {
    let n = cfg.board_size;
    let planes: Vec<T> = to_real(&s.state.data);
    let fwd = policy_value_forward(params, layout, &planes, &s.legal, n);
    let z = T::from(s.z).unwrap();
    let v = fwd.value;
    acc.value = acc.value + (z - v) * (z - v);
    let mut dlogits = vec![T::zero(); fwd.policy.len()];
    for (i, (&p, &pi)) in fwd.policy.iter().zip(&s.pi).enumerate() {
        if !s.legal[i] {
            continue;
        }
        let pi = T::from(pi).unwrap();
        if pi > T::zero() {
            acc.policy = acc.policy - pi * p.ln();
        }
        dlogits[i] = (p - pi) * scale;
    }
    let du = T::lit(-2.0) * (z - v) * (T::one() - v * v) * scale;
    policy_value_backward(params, &mut acc.grads, layout, &fwd, &dlogits, du, n);

    if let Some(t) = &s.triplet {
        let a = tower_forward(params, &layout.anchor, layout.anchor_fc, &to_real::<T>(&t.anchor.data), n);
        let p = tower_forward(params, &layout.state, layout.state_fc, &to_real::<T>(&t.positive.data), n);
        let ng = tower_forward(params, &layout.state, layout.state_fc, &to_real::<T>(&t.negative.data), n);
        let d_ap = distance(&a.embedding, &p.embedding);
        let d_an = distance(&a.embedding, &ng.embedding);
        acc.triplets += 1;
        if d_ap < d_an {
            acc.successes += 1;
        }
        let hinge = T::lit(TRIPLET_MARGIN) + d_ap - d_an;
        if hinge > T::zero() {
            acc.triplet = acc.triplet + hinge;
            let dim = a.embedding.len();
            let mut da = vec![T::zero(); dim];
            let mut dp = vec![T::zero(); dim];
            let mut dn = vec![T::zero(); dim];
            for i in 0..dim {
                if d_ap > T::zero() {
                    let g = (a.embedding[i] - p.embedding[i]) / d_ap * scale;
                    da[i] = da[i] + g;
                    dp[i] = -g;
                }
                if d_an > T::zero() {
                    let g = (a.embedding[i] - ng.embedding[i]) / d_an * scale;
                    da[i] = da[i] - g;
                    dn[i] = g;
                }
            }
            tower_backward(params, &mut acc.grads, &layout.anchor, layout.anchor_fc, &a, &da, n);
            tower_backward(params, &mut acc.grads, &layout.state, layout.state_fc, &p, &dp, n);
            tower_backward(params, &mut acc.grads, &layout.state, layout.state_fc, &ng, &dn, n);
        }
    }
}

/// Loss and exact gradients of the batch-mean objective plus
/// `weight_decay`·‖θ‖².
pub fn loss_and_gradients<T: Real>(
    cfg: &NetConfig,
    layout: &Layout,
    params: &[Vec<T>],
    batch: &[TrainingSample],
    weight_decay: f64,
) -> (LossBreakdown, Vec<Vec<T>>) {
    assert!(!batch.is_empty(), "empty training batch");
    let scale = T::one() / T::lit(batch.len() as f64);
    let partials: Vec<Partial<T>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Partial {
                value: T::zero(),
                policy: T::zero(),
                triplet: T::zero(),
                triplets: 0,
                successes: 0,
                grads: layout.zeros(),
            };
            for s in chunk {
                sample_terms(cfg, layout, params, s, scale, &mut acc);
            }
            acc
        })
        .collect();
    let mut grads = layout.zeros::<T>();
    let mut out = LossBreakdown { samples: batch.len(), ..Default::default() };
    let (mut value, mut policy, mut triplet) = (T::zero(), T::zero(), T::zero());
    for part in partials {
        value = value + part.value;
        policy = policy + part.policy;
        triplet = triplet + part.triplet;
        out.triplets += part.triplets;
        out.triplet_successes += part.successes;
        for (g, pg) in grads.iter_mut().zip(part.grads) {
            for (a, b) in g.iter_mut().zip(pg) {
                *a = *a + b;
            }
        }
    }
    let c = T::lit(weight_decay);
    for (g, p) in grads.iter_mut().zip(params) {
        for (a, &b) in g.iter_mut().zip(p) {
            *a = *a + T::lit(2.0) * c * b;
        }
    }
    let to_f64 = |x: T| x.to_f64().unwrap();
    out.value = to_f64(value * scale);
    out.policy = to_f64(policy * scale);
    out.triplet = to_f64(triplet * scale);
    out.l2 = to_f64(c * squared_norm(params));
    out.total = out.value + out.policy + out.triplet + out.l2;
    for g in &grads {
        if g.iter().any(|x| !x.is_finite()) {
            panic!("non-finite gradient");
        }
    }
    (out, grads)
}

/// Anchor/positive/negative distances without gradients.
pub fn triplet_distances(cfg: &NetConfig, layout: &Layout, params: &[Vec<f32>], t: &Triplet) -> TripletDistances {
    let n = cfg.board_size;
    let a = tower_forward(params, &layout.anchor, layout.anchor_fc, &t.anchor.data, n);
    let p = tower_forward(params, &layout.state, layout.state_fc, &t.positive.data, n);
    let ng = tower_forward(params, &layout.state, layout.state_fc, &t.negative.data, n);
    TripletDistances {
        d_ap: distance(&a.embedding, &p.embedding) as f64,
        d_an: distance(&a.embedding, &ng.embedding) as f64,
    }
}
