//! Batched layer primitives over flat NCHW buffers.

use super::real::Real;

/// Shape bookkeeping of a same-padded 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub k: usize,
    pub stride: usize,
    pub ho: usize,
    pub wo: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeom {
    /// Output size ceil(H / stride); padding split with the extra row or
    /// column at the bottom/right.
    pub fn new(c_in: usize, h: usize, w: usize, f: usize, k: usize, stride: usize) -> Self {
        let ho = h.div_ceil(stride);
        let wo = w.div_ceil(stride);
        let pad_h = ((ho - 1) * stride + k).saturating_sub(h);
        let pad_w = ((wo - 1) * stride + k).saturating_sub(w);
        Self {
            c_in,
            h,
            w,
            f,
            k,
            stride,
            ho,
            wo,
            pad_top: pad_h / 2,
            pad_left: pad_w / 2,
        }
    }

    pub fn in_len(&self) -> usize {
        self.c_in * self.h * self.w
    }

    pub fn out_len(&self) -> usize {
        self.f * self.ho * self.wo
    }

    pub fn col_rows(&self) -> usize {
        self.c_in * self.k * self.k
    }

    pub fn col_len(&self) -> usize {
        self.col_rows() * self.ho * self.wo
    }

    pub fn weight_len(&self) -> usize {
        self.f * self.col_rows()
    }

    /// Input coordinate read by output `o` at kernel offset `kk`, if inside.
    fn src(&self, o: usize, kk: usize, pad: usize, len: usize) -> Option<usize> {
        let i = (o * self.stride + kk) as isize - pad as isize;
        (i >= 0 && (i as usize) < len).then_some(i as usize)
    }

    /// Outputs `lo..hi` whose input coordinate at offset `kk` lies inside
    /// `0..len`; the input coordinate of `lo` is `first`.
    fn valid(&self, kk: usize, pad: usize, len: usize, out: usize) -> (usize, usize, usize) {
        let s = self.stride;
        let lo = pad.saturating_sub(kk).div_ceil(s).min(out);
        let hi = ((len + pad).saturating_sub(kk).div_ceil(s)).clamp(lo, out);
        let first = if lo < hi { lo * s + kk - pad } else { 0 };
        (lo, hi, first)
    }
}

/// Unfold one sample (C, H, W) into a (C·k·k, Ho·Wo) matrix.
pub fn im2col<T: Real>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let hw = g.ho * g.wo;
    let s = g.stride;
    for c in 0..g.c_in {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                let (lo, hi, j0) = g.valid(kj, g.pad_left, g.w, g.wo);
                for oi in 0..g.ho {
                    let line = &mut dst[oi * g.wo..(oi + 1) * g.wo];
                    match g.src(oi, ki, g.pad_top, g.h) {
                        None => line.fill(T::zero()),
                        Some(ii) => {
                            let xr = &x[(c * g.h + ii) * g.w..(c * g.h + ii + 1) * g.w];
                            line[..lo].fill(T::zero());
                            line[hi..].fill(T::zero());
                            let n = hi - lo;
                            if s == 1 {
                                line[lo..hi].copy_from_slice(&xr[j0..j0 + n]);
                            } else {
                                for (v, &src) in line[lo..hi].iter_mut().zip(xr[j0..].iter().step_by(s)) {
                                    *v = src;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back into (C, H, W).
pub fn col2im<T: Real>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let hw = g.ho * g.wo;
    let s = g.stride;
    for c in 0..g.c_in {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src = &cols[row * hw..(row + 1) * hw];
                let (lo, hi, j0) = g.valid(kj, g.pad_left, g.w, g.wo);
                for oi in 0..g.ho {
                    let Some(ii) = g.src(oi, ki, g.pad_top, g.h) else {
                        continue;
                    };
                    let xr = &mut dx[(c * g.h + ii) * g.w..(c * g.h + ii + 1) * g.w];
                    let line = &src[oi * g.wo + lo..oi * g.wo + hi];
                    if s == 1 {
                        for (d, &v) in xr[j0..j0 + line.len()].iter_mut().zip(line) {
                            *d += v;
                        }
                    } else {
                        for (d, &v) in xr[j0..].iter_mut().step_by(s).zip(line) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
}

/// Convolution of a batch of `n` samples; returns the output and the
/// unfolded inputs kept for the backward pass.
pub fn conv_forward<T: Real>(
    x: &[T],
    n: usize,
    w: &[T],
    b: &[T],
    g: &ConvGeom,
) -> (Vec<T>, Vec<T>) {
    let hw = g.ho * g.wo;
    let kr = g.col_rows();
    let mut out = vec![T::zero(); n * g.out_len()];
    let mut cols = vec![T::zero(); n * g.col_len()];
    for s in 0..n {
        let c = &mut cols[s * g.col_len()..(s + 1) * g.col_len()];
        im2col(&x[s * g.in_len()..(s + 1) * g.in_len()], g, c);
        let o = &mut out[s * g.out_len()..(s + 1) * g.out_len()];
        for f in 0..g.f {
            o[f * hw..(f + 1) * hw].iter_mut().for_each(|v| *v = b[f]);
        }
        T::gemm(
            g.f,
            kr,
            hw,
            T::one(),
            w,
            kr,
            1,
            c,
            hw,
            1,
            T::one(),
            o,
            hw,
            1,
        );
    }
    (out, cols)
}

/// Gradients of a convolution. `dw`/`db` are accumulated; dx is returned.
pub fn conv_backward<T: Real>(
    dout: &[T],
    cols: &[T],
    n: usize,
    w: &[T],
    g: &ConvGeom,
    dw: &mut [T],
    db: &mut [T],
    need_dx: bool,
) -> Vec<T> {
    let hw = g.ho * g.wo;
    let kr = g.col_rows();
    let mut dx = if need_dx {
        vec![T::zero(); n * g.in_len()]
    } else {
        Vec::new()
    };
    let mut dcols = vec![T::zero(); g.col_len()];
    for s in 0..n {
        let d = &dout[s * g.out_len()..(s + 1) * g.out_len()];
        let c = &cols[s * g.col_len()..(s + 1) * g.col_len()];
        // dW += dOut · colsᵀ
        T::gemm(
            g.f,
            hw,
            kr,
            T::one(),
            d,
            hw,
            1,
            c,
            1,
            hw,
            T::one(),
            dw,
            kr,
            1,
        );
        for f in 0..g.f {
            db[f] += d[f * hw..(f + 1) * hw].iter().copied().sum::<T>();
        }
        if need_dx {
            // dcols = Wᵀ · dOut
            T::gemm(
                kr,
                g.f,
                hw,
                T::one(),
                w,
                1,
                kr,
                d,
                hw,
                1,
                T::zero(),
                &mut dcols,
                hw,
                1,
            );
            col2im(&dcols, g, &mut dx[s * g.in_len()..(s + 1) * g.in_len()]);
        }
    }
    dx
}

pub fn elu<T: Real>(x: &[T]) -> Vec<T> {
    x.iter()
        .map(|&v| if v > T::zero() { v } else { v.exp_m1() })
        .collect()
}

/// Backward of ELU given its output `y`.
pub fn elu_backward<T: Real>(dy: &[T], y: &[T]) -> Vec<T> {
    dy.iter()
        .zip(y)
        .map(|(&d, &v)| if v > T::zero() { d } else { d * (v + T::one()) })
        .collect()
}

/// What the backward pass of batch normalization needs.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub batch_stats: bool,
    /// Batch mean and biased variance per channel (batch mode only).
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[allow(clippy::too_many_arguments)]
pub fn bn_forward<T: Real>(
    x: &[T],
    n: usize,
    c: usize,
    hw: usize,
    gamma: &[T],
    beta: &[T],
    running: (&[T], &[T]),
    eps: T,
    batch_stats: bool,
) -> (Vec<T>, BnCache<T>) {
    let count = T::from_f64((n * hw) as f64);
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    if batch_stats {
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * hw;
                mean[ch] += x[base..base + hw].iter().copied().sum::<T>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * hw;
                let m = mean[ch];
                var[ch] += x[base..base + hw]
                    .iter()
                    .map(|&v| (v - m) * (v - m))
                    .sum::<T>();
            }
        }
        var.iter_mut().for_each(|v| *v /= count);
    } else {
        mean.copy_from_slice(running.0);
        var.copy_from_slice(running.1);
    }
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for s in 0..n {
        for ch in 0..c {
            let base = (s * c + ch) * hw;
            for i in base..base + hw {
                let h = (x[i] - mean[ch]) * inv_std[ch];
                xhat[i] = h;
                y[i] = gamma[ch] * h + beta[ch];
            }
        }
    }
    (
        y,
        BnCache {
            xhat,
            inv_std,
            batch_stats,
            mean,
            var,
        },
    )
}

pub fn bn_backward<T: Real>(
    dy: &[T],
    cache: &BnCache<T>,
    n: usize,
    c: usize,
    hw: usize,
    gamma: &[T],
    dgamma: &mut [T],
    dbeta: &mut [T],
) -> Vec<T> {
    let mut sum_d = vec![T::zero(); c];
    let mut sum_dx = vec![T::zero(); c];
    for s in 0..n {
        for ch in 0..c {
            let base = (s * c + ch) * hw;
            for i in base..base + hw {
                sum_d[ch] += dy[i];
                sum_dx[ch] += dy[i] * cache.xhat[i];
            }
        }
    }
    for ch in 0..c {
        dgamma[ch] += sum_dx[ch];
        dbeta[ch] += sum_d[ch];
    }
    let count = T::from_f64((n * hw) as f64);
    let mut dx = vec![T::zero(); dy.len()];
    for s in 0..n {
        for ch in 0..c {
            let base = (s * c + ch) * hw;
            let g = gamma[ch] * cache.inv_std[ch];
            for i in base..base + hw {
                dx[i] = if cache.batch_stats {
                    // dxhat = γ·dy; dx = inv_std·(dxhat − mean(dxhat) − x̂·mean(dxhat·x̂))
                    g * (dy[i] - sum_d[ch] / count - cache.xhat[i] * sum_dx[ch] / count)
                } else {
                    g * dy[i]
                };
            }
        }
    }
    dx
}

/// y = x·Wᵀ + b for `n` rows, W stored (out, in).
pub fn dense_forward<T: Real>(
    x: &[T],
    n: usize,
    w: &[T],
    b: &[T],
    d_in: usize,
    d_out: usize,
) -> Vec<T> {
    let mut y = vec![T::zero(); n * d_out];
    for s in 0..n {
        y[s * d_out..(s + 1) * d_out].copy_from_slice(b);
    }
    T::gemm(
        n,
        d_in,
        d_out,
        T::one(),
        x,
        d_in,
        1,
        w,
        1,
        d_in,
        T::one(),
        &mut y,
        d_out,
        1,
    );
    y
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward<T: Real>(
    dy: &[T],
    x: &[T],
    n: usize,
    w: &[T],
    d_in: usize,
    d_out: usize,
    dw: &mut [T],
    db: &mut [T],
) -> Vec<T> {
    // dW (out, in) += dyᵀ · x
    T::gemm(
        d_out,
        n,
        d_in,
        T::one(),
        dy,
        1,
        d_out,
        x,
        d_in,
        1,
        T::one(),
        dw,
        d_in,
        1,
    );
    for s in 0..n {
        for o in 0..d_out {
            db[o] += dy[s * d_out + o];
        }
    }
    let mut dx = vec![T::zero(); n * d_in];
    T::gemm(
        n,
        d_out,
        d_in,
        T::one(),
        dy,
        d_out,
        1,
        w,
        d_in,
        1,
        T::zero(),
        &mut dx,
        d_in,
        1,
    );
    dx
}

/// Row-wise softmax over `k` classes, max-shifted.
pub fn softmax<T: Real>(logits: &[T], k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); logits.len()];
    for (row, o) in logits.chunks(k).zip(out.chunks_mut(k)) {
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for (v, r) in o.iter_mut().zip(row) {
            *v = (*r - mx).exp();
            sum += *v;
        }
        o.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean cross-entropy of row-wise softmax probabilities and its gradient
/// with respect to the logits, (p − onehot) / N.
pub fn cross_entropy<T: Real>(probs: &[T], labels: &[usize], k: usize) -> (T, Vec<T>) {
    let n = labels.len();
    let tiny = T::min_positive_value();
    let inv_n = T::from_f64(1.0 / n as f64);
    let mut loss = T::zero();
    let mut d = probs.to_vec();
    for (s, &l) in labels.iter().enumerate() {
        loss -= probs[s * k + l].max(tiny).ln();
        d[s * k + l] -= T::one();
    }
    d.iter_mut().for_each(|v| *v *= inv_n);
    (loss * inv_n, d)
}
