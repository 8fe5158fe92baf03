use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::layers::{
    bn_backward, bn_forward, conv_backward, conv_forward, cross_entropy, dense_backward,
    dense_forward, elu, elu_backward, softmax, BnCache, ConvGeom,
};
use super::real::Real;
use super::tensor::Tensor;
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Architecture of the residual classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_h: usize,
    pub input_w: usize,
    /// Filters per residual block; each block halves both spatial sizes.
    pub filters: Vec<usize>,
    pub dense: usize,
    pub n_classes: usize,
    pub dropout_blocks: f64,
    pub dropout_dense: f64,
}

/// Filter counts of the full network.
pub const STANDARD_FILTERS: [usize; 4] = [8, 16, 32, 64];

impl NetworkSpec {
    /// Four blocks of [8, 16, 32, 64] filters, dense 64, dropouts 0.5/0.2.
    pub fn standard(input_h: usize, input_w: usize, n_classes: usize) -> Self {
        Self {
            input_h,
            input_w,
            filters: STANDARD_FILTERS.to_vec(),
            dense: 64,
            n_classes,
            dropout_blocks: 0.5,
            dropout_dense: 0.2,
        }
    }

    pub fn is_standard(&self) -> bool {
        self.filters == STANDARD_FILTERS && self.dense == 64
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_h == 0 || self.input_w == 0 {
            return Err(Error::invalid("input dimensions must be positive"));
        }
        if self.filters.is_empty() || self.filters.contains(&0) {
            return Err(Error::invalid("every block needs at least one filter"));
        }
        if self.dense == 0 || self.n_classes < 2 {
            return Err(Error::invalid(
                "dense width must be positive and n_classes ≥ 2",
            ));
        }
        for p in [self.dropout_blocks, self.dropout_dense] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::invalid("dropout rates must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    /// (conv1, conv2, shortcut) geometry of every block.
    pub fn geometry(&self) -> Vec<[ConvGeom; 3]> {
        let (mut c, mut h, mut w) = (1, self.input_h, self.input_w);
        self.filters
            .iter()
            .map(|&f| {
                let g1 = ConvGeom::new(c, h, w, f, 3, 2);
                let g2 = ConvGeom::new(f, g1.ho, g1.wo, f, 3, 1);
                let gs = ConvGeom::new(c, h, w, f, 1, 2);
                c = f;
                h = g1.ho;
                w = g1.wo;
                [g1, g2, gs]
            })
            .collect()
    }

    /// Parameter tensor shapes in declaration order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        for [g1, g2, gs] in self.geometry() {
            shapes.push(vec![g1.f, g1.c_in, 3, 3]);
            shapes.push(vec![g1.f]);
            shapes.push(vec![g1.f]);
            shapes.push(vec![g1.f]);
            shapes.push(vec![g2.f, g2.c_in, 3, 3]);
            shapes.push(vec![g2.f]);
            shapes.push(vec![gs.f, gs.c_in, 1, 1]);
            shapes.push(vec![gs.f]);
            shapes.push(vec![g2.f]);
            shapes.push(vec![g2.f]);
        }
        let last = *self.filters.last().unwrap();
        shapes.push(vec![self.dense, last]);
        shapes.push(vec![self.dense]);
        shapes.push(vec![self.n_classes, self.dense]);
        shapes.push(vec![self.n_classes]);
        shapes
    }
}

/// Which stochastic / batch-dependent behaviour a pass uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    /// Normalize with batch statistics instead of running averages.
    pub batch_stats: bool,
    pub dropout: bool,
}

impl Mode {
    pub const TRAIN: Mode = Mode {
        batch_stats: true,
        dropout: true,
    };
    pub const EVAL: Mode = Mode {
        batch_stats: false,
        dropout: false,
    };
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
const PARAMS_PER_BLOCK: usize = 10;

/// Residual CNN: blocks of `BN(ELU(conv3×3/2))`, `conv3×3`, summed with a
/// 1×1/2 projection of the block input, then `BN(ELU(·))`; global average
/// pooling, dropout, dense + ELU, dropout, dense, softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    params: Vec<Vec<T>>,
    /// (mean, variance) per batch-norm layer, two per block.
    running: Vec<(Vec<T>, Vec<T>)>,
}

/// Parameter gradients in declaration order.
pub type Grads<T> = Vec<Vec<T>>;

struct BlockCache<T> {
    cols1: Vec<T>,
    e1: Vec<T>,
    bn1: BnCache<T>,
    cols2: Vec<T>,
    cols_s: Vec<T>,
    e2: Vec<T>,
    bn2: BnCache<T>,
}

struct Cache<T> {
    n: usize,
    blocks: Vec<BlockCache<T>>,
    pooled_hw: usize,
    mask1: Option<Vec<T>>,
    d1_in: Vec<T>,
    d1_out: Vec<T>,
    mask2: Option<Vec<T>>,
    d2_in: Vec<T>,
    probs: Vec<T>,
}

/// Batch statistics seen by every batch-norm layer during a train pass.
pub type BnStats<T> = Vec<(Vec<T>, Vec<T>)>;

fn dropout_mask<T: Real>(len: usize, p: f64, rng: &mut dyn RngCore) -> Vec<T> {
    let keep = T::from_f64(1.0 / (1.0 - p));
    (0..len)
        .map(|_| {
            if rng.gen::<f64>() < p {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

impl<T: Real> Network<T> {
    /// He-normal weights, zero biases, unit BN scale; seeded.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = stream(seed, Purpose::WeightInit, 0, 0);
        let shapes = spec.param_shapes();
        let mut params = Vec::with_capacity(shapes.len());
        let n_blocks = spec.filters.len();
        for (i, shape) in shapes.iter().enumerate() {
            let len: usize = shape.iter().product();
            let slot = if i < n_blocks * PARAMS_PER_BLOCK {
                i % PARAMS_PER_BLOCK
            } else {
                100 + (i - n_blocks * PARAMS_PER_BLOCK) % 2
            };
            let v = match slot {
                0 | 4 | 6 | 100 => {
                    let fan_in: usize = shape[1..].iter().product();
                    let std = (2.0 / fan_in as f64).sqrt();
                    (0..len)
                        .map(|_| T::from_f64(std * rng.sample::<f64, _>(StandardNormal)))
                        .collect()
                }
                2 | 8 => vec![T::one(); len],
                _ => vec![T::zero(); len],
            };
            params.push(v);
        }
        let running = spec
            .filters
            .iter()
            .flat_map(|&f| (0..2).map(move |_| (vec![T::zero(); f], vec![T::one(); f])))
            .collect();
        Ok(Self {
            spec,
            params,
            running,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Vec<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.params
    }

    pub fn running_stats(&self) -> &[(Vec<T>, Vec<T>)] {
        &self.running
    }

    pub fn running_stats_mut(&mut self) -> &mut [(Vec<T>, Vec<T>)] {
        &mut self.running
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    /// Zero both convolutions (weights and biases) of block `b`.
    pub fn zero_block_convs(&mut self, b: usize) {
        for slot in [0, 1, 4, 5] {
            self.params[b * PARAMS_PER_BLOCK + slot]
                .iter_mut()
                .for_each(|v| *v = T::zero());
        }
    }

    /// Zero the output layer so that every input maps to uniform scores.
    pub fn zero_output_layer(&mut self) {
        let n = self.params.len();
        for i in [n - 2, n - 1] {
            self.params[i].iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Blend the batch statistics of a train pass into the running averages.
    pub fn update_running(&mut self, stats: &BnStats<T>) {
        let m = T::from_f64(BN_MOMENTUM);
        for ((rm, rv), (bm, bv)) in self.running.iter_mut().zip(stats) {
            for (r, b) in rm.iter_mut().zip(bm) {
                *r = (T::one() - m) * *r + m * *b;
            }
            for (r, b) in rv.iter_mut().zip(bv) {
                *r = (T::one() - m) * *r + m * *b;
            }
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<usize> {
        let s = input.shape();
        let want = [self.spec.input_h, self.spec.input_w];
        match s {
            [n, 1, h, w] if [*h, *w] == want && *n > 0 => Ok(*n),
            _ => Err(Error::invalid(format!(
                "input shape {s:?} does not match [N, 1, {}, {}]",
                want[0], want[1]
            ))),
        }
    }

    fn block_forward(&self, b: usize, x: &[T], n: usize, mode: Mode) -> (Vec<T>, BlockCache<T>) {
        let [g1, g2, gs] = self.spec.geometry()[b];
        let eps = T::from_f64(BN_EPS);
        let p = &self.params[b * PARAMS_PER_BLOCK..(b + 1) * PARAMS_PER_BLOCK];
        let hw = g1.ho * g1.wo;
        let (a1, cols1) = conv_forward(x, n, &p[0], &p[1], &g1);
        let e1 = elu(&a1);
        let r1 = &self.running[2 * b];
        let (a, bn1) = bn_forward(
            &e1,
            n,
            g1.f,
            hw,
            &p[2],
            &p[3],
            (&r1.0, &r1.1),
            eps,
            mode.batch_stats,
        );
        let (mut u, cols2) = conv_forward(&a, n, &p[4], &p[5], &g2);
        let (s, cols_s) = conv_forward(x, n, &p[6], &p[7], &gs);
        u.iter_mut().zip(&s).for_each(|(u, s)| *u += *s);
        let e2 = elu(&u);
        let r2 = &self.running[2 * b + 1];
        let (y, bn2) = bn_forward(
            &e2,
            n,
            g2.f,
            hw,
            &p[8],
            &p[9],
            (&r2.0, &r2.1),
            eps,
            mode.batch_stats,
        );
        (
            y,
            BlockCache {
                cols1,
                e1,
                bn1,
                cols2,
                cols_s,
                e2,
                bn2,
            },
        )
    }

    /// Output of residual block `b` for a batch of `n` block inputs.
    pub fn block_output(&self, b: usize, x: &[T], n: usize, mode: Mode) -> Vec<T> {
        self.block_forward(b, x, n, mode).0
    }

    /// The block's shortcut path alone: BN(ELU(1×1/2 projection of x)).
    pub fn block_shortcut_path(&self, b: usize, x: &[T], n: usize, mode: Mode) -> Vec<T> {
        let [_, g2, gs] = self.spec.geometry()[b];
        let p = &self.params[b * PARAMS_PER_BLOCK..(b + 1) * PARAMS_PER_BLOCK];
        let (s, _) = conv_forward(x, n, &p[6], &p[7], &gs);
        let r2 = &self.running[2 * b + 1];
        let (y, _) = bn_forward(
            &elu(&s),
            n,
            g2.f,
            gs.ho * gs.wo,
            &p[8],
            &p[9],
            (&r2.0, &r2.1),
            T::from_f64(BN_EPS),
            mode.batch_stats,
        );
        y
    }

    fn run(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<Cache<T>> {
        let n = self.check_input(input)?;
        if mode.dropout && rng.is_none() {
            return Err(Error::invalid("dropout needs a random source"));
        }
        let mut x = input.data().to_vec();
        let mut blocks = Vec::with_capacity(self.spec.filters.len());
        let geoms = self.spec.geometry();
        for b in 0..geoms.len() {
            let (y, bc) = self.block_forward(b, &x, n, mode);
            blocks.push(bc);
            x = y;
        }
        let last = geoms.last().unwrap()[1];
        let c = last.f;
        let hw = last.ho * last.wo;
        let inv = T::from_f64(1.0 / hw as f64);
        let mut pooled: Vec<T> = x
            .chunks(hw)
            .map(|ch| ch.iter().copied().sum::<T>() * inv)
            .collect();
        let mask1 = if mode.dropout && self.spec.dropout_blocks > 0.0 {
            let m = dropout_mask(
                pooled.len(),
                self.spec.dropout_blocks,
                rng.as_deref_mut().unwrap(),
            );
            pooled.iter_mut().zip(&m).for_each(|(v, k)| *v *= *k);
            Some(m)
        } else {
            None
        };
        let nb = self.spec.filters.len() * PARAMS_PER_BLOCK;
        let d = self.spec.dense;
        let k = self.spec.n_classes;
        let h1 = dense_forward(&pooled, n, &self.params[nb], &self.params[nb + 1], c, d);
        let d1_out = elu(&h1);
        let mut d2_in = d1_out.clone();
        let mask2 = if mode.dropout && self.spec.dropout_dense > 0.0 {
            let m = dropout_mask(
                d2_in.len(),
                self.spec.dropout_dense,
                rng.as_deref_mut().unwrap(),
            );
            d2_in.iter_mut().zip(&m).for_each(|(v, k)| *v *= *k);
            Some(m)
        } else {
            None
        };
        let logits = dense_forward(&d2_in, n, &self.params[nb + 2], &self.params[nb + 3], d, k);
        let probs = softmax(&logits, k);
        Ok(Cache {
            n,
            blocks,
            pooled_hw: hw,
            mask1,
            d1_in: pooled,
            d1_out,
            mask2,
            d2_in,
            probs,
        })
    }

    /// Class probabilities, shape [N, n_classes].
    pub fn forward(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Tensor<T>> {
        let cache = self.run(input, mode, rng)?;
        Tensor::new(vec![cache.n, self.spec.n_classes], cache.probs)
    }

    /// Mean cross-entropy, its gradients and the batch-norm statistics of
    /// the pass (empty unless `mode.batch_stats`).
    pub fn loss_and_grads(
        &self,
        input: &Tensor<T>,
        labels: &[usize],
        mode: Mode,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<(T, Grads<T>, BnStats<T>)> {
        let k = self.spec.n_classes;
        let n = self.check_input(input)?;
        if labels.len() != n {
            return Err(Error::invalid("one label per sample is required"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        let cache = self.run(input, mode, rng)?;
        let (loss, dlogits) = cross_entropy(&cache.probs, labels, k);
        let grads = self.backward(&cache, &dlogits);
        let stats = if mode.batch_stats {
            cache
                .blocks
                .iter()
                .flat_map(|b| {
                    [
                        (b.bn1.mean.clone(), b.bn1.var.clone()),
                        (b.bn2.mean.clone(), b.bn2.var.clone()),
                    ]
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok((loss, grads, stats))
    }

    fn backward(&self, cache: &Cache<T>, dlogits: &[T]) -> Grads<T> {
        let n = cache.n;
        let mut grads: Grads<T> = self
            .params
            .iter()
            .map(|p| vec![T::zero(); p.len()])
            .collect();
        let nb = self.spec.filters.len() * PARAMS_PER_BLOCK;
        let (d, k) = (self.spec.dense, self.spec.n_classes);
        let c_last = *self.spec.filters.last().unwrap();

        let (head, tail) = grads.split_at_mut(nb + 2);
        let (tw, tb) = tail.split_at_mut(1);
        let mut dx = dense_backward(
            dlogits,
            &cache.d2_in,
            n,
            &self.params[nb + 2],
            d,
            k,
            &mut tw[0],
            &mut tb[0],
        );
        if let Some(m) = &cache.mask2 {
            dx.iter_mut().zip(m).for_each(|(v, k)| *v *= *k);
        }
        let dh1 = elu_backward(&dx, &cache.d1_out);
        let (gw, gb) = head[nb..nb + 2].split_at_mut(1);
        let mut dpool = dense_backward(
            &dh1,
            &cache.d1_in,
            n,
            &self.params[nb],
            c_last,
            d,
            &mut gw[0],
            &mut gb[0],
        );
        if let Some(m) = &cache.mask1 {
            dpool.iter_mut().zip(m).for_each(|(v, k)| *v *= *k);
        }
        let hw = cache.pooled_hw;
        let inv = T::from_f64(1.0 / hw as f64);
        let mut dy: Vec<T> = dpool
            .iter()
            .flat_map(|&g| std::iter::repeat_n(g * inv, hw))
            .collect();

        let geoms = self.spec.geometry();
        for (b, [g1, g2, gs]) in geoms.iter().enumerate().rev() {
            let p = &self.params[b * PARAMS_PER_BLOCK..(b + 1) * PARAMS_PER_BLOCK];
            let g = &mut grads[b * PARAMS_PER_BLOCK..(b + 1) * PARAMS_PER_BLOCK];
            let bc = &cache.blocks[b];
            let hw = g1.ho * g1.wo;
            let [g0, g1p, g2p, g3, g4, g5, g6, g7, g8, g9] = g else {
                unreachable!()
            };
            let de2 = bn_backward(&dy, &bc.bn2, n, g2.f, hw, &p[8], g8, g9);
            let du = elu_backward(&de2, &bc.e2);
            let need = b > 0;
            let dx_s = conv_backward(&du, &bc.cols_s, n, &p[6], gs, g6, g7, need);
            let da = conv_backward(&du, &bc.cols2, n, &p[4], g2, g4, g5, true);
            let de1 = bn_backward(&da, &bc.bn1, n, g1.f, hw, &p[2], g2p, g3);
            let da1 = elu_backward(&de1, &bc.e1);
            let mut dx1 = conv_backward(&da1, &bc.cols1, n, &p[0], g1, g0, g1p, need);
            if need {
                dx1.iter_mut().zip(&dx_s).for_each(|(a, s)| *a += *s);
                dy = dx1;
            }
        }
        grads
    }

    /// Eval-mode label and confidence of a single (H, W) input, ties to the
    /// smaller label.
    pub fn predict(&self, values: &[T]) -> Result<(usize, T)> {
        let input = Tensor::new(
            vec![1, 1, self.spec.input_h, self.spec.input_w],
            values.to_vec(),
        )?;
        let probs = self.forward(&input, Mode::EVAL, None)?;
        Ok(argmax(probs.data()))
    }
}

/// Index and value of the largest entry; ties to the smaller index.
pub fn argmax<T: Real>(v: &[T]) -> (usize, T) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    (best, v[best])
}
