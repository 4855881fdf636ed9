//! Convolution and affine layers on (channel, row, col) buffers of an
//! n×n board with zero padding.

use super::params::{ConvIdx, LinearIdx, Real};

/// Patch matrix of shape [in_ch·k·k, n·n] for a `kernel`×`kernel` convolution.
pub fn im2col<T: Real>(input: &[T], in_ch: usize, n: usize, kernel: usize) -> Vec<T> {
    if kernel == 1 {
        return input.to_vec();
    }
    let area = n * n;
    let half = (kernel / 2) as isize;
    let mut col = vec![T::zero(); in_ch * kernel * kernel * area];
    for c in 0..in_ch {
        let plane = &input[c * area..(c + 1) * area];
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = &mut col[((c * kernel + ky) * kernel + kx) * area..][..area];
                let dy = ky as isize - half;
                let dx = kx as isize - half;
                for y in 0..n {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= n as isize {
                        continue;
                    }
                    for x in 0..n {
                        let sx = x as isize + dx;
                        if sx < 0 || sx >= n as isize {
                            continue;
                        }
                        row[y * n + x] = plane[sy as usize * n + sx as usize];
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`].
pub fn col2im<T: Real>(col: &[T], in_ch: usize, n: usize, kernel: usize) -> Vec<T> {
    if kernel == 1 {
        return col.to_vec();
    }
    let area = n * n;
    let half = (kernel / 2) as isize;
    let mut out = vec![T::zero(); in_ch * area];
    for c in 0..in_ch {
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = &col[((c * kernel + ky) * kernel + kx) * area..][..area];
                let dy = ky as isize - half;
                let dx = kx as isize - half;
                for y in 0..n {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= n as isize {
                        continue;
                    }
                    for x in 0..n {
                        let sx = x as isize + dx;
                        if sx < 0 || sx >= n as isize {
                            continue;
                        }
                        let dst = c * area + sy as usize * n + sx as usize;
                        out[dst] = out[dst] + row[y * n + x];
                    }
                }
            }
        }
    }
    out
}

/// Forward convolution given the patch matrix; returns [out_ch, n·n].
pub fn conv_forward<T: Real>(params: &[Vec<T>], idx: ConvIdx, col: &[T], area: usize) -> Vec<T> {
    let w = &params[idx.w];
    let b = &params[idx.b];
    let ck = idx.in_ch * idx.kernel * idx.kernel;
    let mut out = vec![T::zero(); idx.out_ch * area];
    for f in 0..idx.out_ch {
        let dst = &mut out[f * area..(f + 1) * area];
        dst.fill(b[f]);
        for (j, &wv) in w[f * ck..(f + 1) * ck].iter().enumerate() {
            if wv == T::zero() {
                continue;
            }
            let src = &col[j * area..(j + 1) * area];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = *d + wv * s;
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients and returns the patch-matrix gradient.
pub fn conv_backward<T: Real>(
    params: &[Vec<T>],
    grads: &mut [Vec<T>],
    idx: ConvIdx,
    col: &[T],
    dout: &[T],
    area: usize,
    need_input_grad: bool,
) -> Vec<T> {
    let ck = idx.in_ch * idx.kernel * idx.kernel;
    {
        let gb = &mut grads[idx.b];
        for f in 0..idx.out_ch {
            gb[f] = gb[f] + dout[f * area..(f + 1) * area].iter().copied().sum();
        }
    }
    {
        let gw = &mut grads[idx.w];
        for f in 0..idx.out_ch {
            let d = &dout[f * area..(f + 1) * area];
            for j in 0..ck {
                let src = &col[j * area..(j + 1) * area];
                let s: T = d.iter().zip(src).map(|(&a, &b)| a * b).sum();
                gw[f * ck + j] = gw[f * ck + j] + s;
            }
        }
    }
    if !need_input_grad {
        return Vec::new();
    }
    let w = &params[idx.w];
    let mut dcol = vec![T::zero(); ck * area];
    for f in 0..idx.out_ch {
        let d = &dout[f * area..(f + 1) * area];
        for j in 0..ck {
            let wv = w[f * ck + j];
            if wv == T::zero() {
                continue;
            }
            let dst = &mut dcol[j * area..(j + 1) * area];
            for (o, &g) in dst.iter_mut().zip(d) {
                *o = *o + wv * g;
            }
        }
    }
    dcol
}

pub fn linear_forward<T: Real>(params: &[Vec<T>], idx: LinearIdx, x: &[T]) -> Vec<T> {
    let w = &params[idx.w];
    let b = &params[idx.b];
    (0..idx.outputs)
        .map(|o| b[o] + w[o * idx.inputs..(o + 1) * idx.inputs].iter().zip(x).map(|(&a, &c)| a * c).sum())
        .collect()
}

/// Accumulates parameter gradients and returns the input gradient.
pub fn linear_backward<T: Real>(params: &[Vec<T>], grads: &mut [Vec<T>], idx: LinearIdx, x: &[T], dy: &[T]) -> Vec<T> {
    let n = idx.inputs;
    for (o, &g) in dy.iter().enumerate() {
        grads[idx.b][o] = grads[idx.b][o] + g;
        let gw = &mut grads[idx.w][o * n..(o + 1) * n];
        for (gwi, &xi) in gw.iter_mut().zip(x) {
            *gwi = *gwi + g * xi;
        }
    }
    let w = &params[idx.w];
    let mut dx = vec![T::zero(); n];
    for (o, &g) in dy.iter().enumerate() {
        for (d, &wv) in dx.iter_mut().zip(&w[o * n..(o + 1) * n]) {
            *d = *d + g * wv;
        }
    }
    dx
}

pub fn relu_in_place<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes `grad` where the rectified output is not positive.
pub fn relu_mask<T: Real>(grad: &mut [T], output: &[T]) {
    for (g, &o) in grad.iter_mut().zip(output) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}
