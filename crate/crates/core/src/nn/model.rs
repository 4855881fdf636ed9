//! Forward and backward passes of the residual trunk, the policy/value
//! heads and the two embedding towers.

use super::layers::{col2im, conv_backward, conv_forward, im2col, linear_backward, linear_forward, relu_in_place, relu_mask};
use super::params::{BodyIdx, LinearIdx, Real};

pub struct BodyCache<T> {
    /// Patch matrices: conv_in, then conv1/conv2 of each block.
    cols: Vec<Vec<T>>,
    /// Rectified outputs: h0, then (r_i, h_{i+1}) per block.
    acts: Vec<Vec<T>>,
}

impl<T: Real> BodyCache<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("body has an input convolution")
    }
}

pub fn body_forward<T: Real>(params: &[Vec<T>], body: &BodyIdx, input: &[T], n: usize) -> BodyCache<T> {
    let area = n * n;
    let mut cols = Vec::with_capacity(1 + 2 * body.blocks.len());
    let mut acts = Vec::with_capacity(1 + 2 * body.blocks.len());
    let col = im2col(input, body.conv_in.in_ch, n, 3);
    let mut h = conv_forward(params, body.conv_in, &col, area);
    relu_in_place(&mut h);
    cols.push(col);
    acts.push(h);
    for [c1, c2] in &body.blocks {
        let h_prev = acts.last().unwrap();
        let col1 = im2col(h_prev, c1.in_ch, n, 3);
        let mut r = conv_forward(params, *c1, &col1, area);
        relu_in_place(&mut r);
        let col2 = im2col(&r, c2.in_ch, n, 3);
        let mut next = conv_forward(params, *c2, &col2, area);
        for (o, &s) in next.iter_mut().zip(h_prev) {
            *o = *o + s;
        }
        relu_in_place(&mut next);
        cols.push(col1);
        cols.push(col2);
        acts.push(r);
        acts.push(next);
    }
    BodyCache { cols, acts }
}

/// Backpropagates `dout` (gradient of the body output) into `grads`.
pub fn body_backward<T: Real>(
    params: &[Vec<T>],
    grads: &mut [Vec<T>],
    body: &BodyIdx,
    cache: &BodyCache<T>,
    mut dout: Vec<T>,
    n: usize,
) {
    let area = n * n;
    for (i, [c1, c2]) in body.blocks.iter().enumerate().rev() {
        let h_next = &cache.acts[2 + 2 * i];
        let r = &cache.acts[1 + 2 * i];
        relu_mask(&mut dout, h_next);
        let dcol2 = conv_backward(params, grads, *c2, &cache.cols[2 + 2 * i], &dout, area, true);
        let mut dr = col2im(&dcol2, c2.in_ch, n, 3);
        relu_mask(&mut dr, r);
        let dcol1 = conv_backward(params, grads, *c1, &cache.cols[1 + 2 * i], &dr, area, true);
        let dh = col2im(&dcol1, c1.in_ch, n, 3);
        for (d, s) in dout.iter_mut().zip(dh) {
            *d = *d + s;
        }
    }
    relu_mask(&mut dout, &cache.acts[0]);
    conv_backward(params, grads, body.conv_in, &cache.cols[0], &dout, area, false);
}

/// Softmax over entries with `mask[i]`; masked entries get probability 0.
pub fn masked_softmax<T: Real>(logits: &[T], mask: &[bool]) -> Vec<T> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { T::zero() })
        .collect();
    let sum: T = out.iter().copied().sum();
    if sum > T::zero() {
        for p in &mut out {
            *p = *p / sum;
        }
    }
    out
}

pub struct PolicyValueForward<T> {
    pub body: BodyCache<T>,
    policy_act: Vec<T>,
    value_act: Vec<T>,
    pub policy: Vec<T>,
    pub value: T,
}

pub fn policy_value_forward<T: Real>(
    params: &[Vec<T>],
    layout: &super::params::Layout,
    planes: &[T],
    mask: &[bool],
    n: usize,
) -> PolicyValueForward<T> {
    let area = n * n;
    let body = body_forward(params, &layout.trunk, planes, n);
    let h = body.output();
    let mut policy_act = conv_forward(params, layout.policy_conv, h, area);
    relu_in_place(&mut policy_act);
    let logits = linear_forward(params, layout.policy_fc, &policy_act);
    let policy = masked_softmax(&logits, mask);
    let mut value_act = conv_forward(params, layout.value_conv, h, area);
    relu_in_place(&mut value_act);
    let value = linear_forward(params, layout.value_fc, &value_act)[0].tanh();
    check_finite(&policy, "policy");
    check_finite(&[value], "value");
    PolicyValueForward { body, policy_act, value_act, policy, value }
}

/// `dlogits`: gradient w.r.t. the pre-softmax logits; `du`: gradient
/// w.r.t. the pre-tanh value.
pub fn policy_value_backward<T: Real>(
    params: &[Vec<T>],
    grads: &mut [Vec<T>],
    layout: &super::params::Layout,
    fwd: &PolicyValueForward<T>,
    dlogits: &[T],
    du: T,
    n: usize,
) {
    let area = n * n;
    let h = fwd.body.output();
    let mut dpa = linear_backward(params, grads, layout.policy_fc, &fwd.policy_act, dlogits);
    relu_mask(&mut dpa, &fwd.policy_act);
    let dcol_p = conv_backward(params, grads, layout.policy_conv, h, &dpa, area, true);
    let mut dva = linear_backward(params, grads, layout.value_fc, &fwd.value_act, &[du]);
    relu_mask(&mut dva, &fwd.value_act);
    let dcol_v = conv_backward(params, grads, layout.value_conv, h, &dva, area, true);
    let dh: Vec<T> = dcol_p.iter().zip(&dcol_v).map(|(&a, &b)| a + b).collect();
    body_backward(params, grads, &layout.trunk, &fwd.body, dh, n);
}

pub struct TowerForward<T> {
    body: BodyCache<T>,
    pooled: Vec<T>,
    pub embedding: Vec<T>,
}

pub fn tower_forward<T: Real>(params: &[Vec<T>], body: &BodyIdx, fc: LinearIdx, input: &[T], n: usize) -> TowerForward<T> {
    let area = n * n;
    let cache = body_forward(params, body, input, n);
    let inv = T::one() / T::lit(area as f64);
    let pooled: Vec<T> = cache.output().chunks(area).map(|c| c.iter().copied().sum::<T>() * inv).collect();
    let embedding = linear_forward(params, fc, &pooled);
    check_finite(&embedding, "embedding");
    TowerForward { body: cache, pooled, embedding }
}

pub fn tower_backward<T: Real>(
    params: &[Vec<T>],
    grads: &mut [Vec<T>],
    body: &BodyIdx,
    fc: LinearIdx,
    fwd: &TowerForward<T>,
    demb: &[T],
    n: usize,
) {
    let area = n * n;
    let dpool = linear_backward(params, grads, fc, &fwd.pooled, demb);
    let inv = T::one() / T::lit(area as f64);
    let dh: Vec<T> = dpool.iter().flat_map(|&g| std::iter::repeat_n(g * inv, area)).collect();
    body_backward(params, grads, body, &fwd.body, dh, n);
}

fn check_finite<T: Real>(xs: &[T], what: &str) {
    if xs.iter().any(|x| !x.is_finite()) {
        panic!("non-finite {what} in network forward pass");
    }
}
