//! Policy/value network with hand-written backpropagation.
//!
//! A shared trunk (optional same-padded 3D convolutions, then dense layers,
//! all followed by `tanh`) feeds a linear policy head over the flat action
//! space and a linear scalar value head. Parameters live in one flat vector so
//! the optimizer and finite-difference checks can treat them uniformly.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// Observation channels.
    pub in_channels: usize,
    /// Spatial grid `[H, W, D]` of the observation.
    pub grid: [usize; 3],
    /// Output channels of each convolution; empty disables the conv front-end.
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    /// Dense hidden sizes after the (optional) convolutions.
    pub hidden: Vec<usize>,
    pub n_actions: usize,
}

impl Architecture {
    /// Feed-forward default: two dense layers of 512 and 128 units.
    pub fn mlp(in_channels: usize, grid: [usize; 3], n_actions: usize) -> Self {
        Architecture { in_channels, grid, conv_channels: Vec::new(), kernel: 5, hidden: vec![512, 128], n_actions }
    }

    /// Conv front-end with kernel 5 and 8/32 channels ahead of the dense layers.
    pub fn conv(in_channels: usize, grid: [usize; 3], n_actions: usize) -> Self {
        Architecture { conv_channels: vec![8, 32], ..Self::mlp(in_channels, grid, n_actions) }
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.grid.iter().product::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layer {
    Conv { in_c: usize, out_c: usize, k: usize, w: usize, b: usize },
    Dense { n_in: usize, n_out: usize, w: usize, b: usize },
}

impl Layer {
    fn n_params(&self) -> usize {
        match *self {
            Layer::Conv { in_c, out_c, k, .. } => out_c * in_c * k * k * k + out_c,
            Layer::Dense { n_in, n_out, .. } => n_in * n_out + n_out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    arch: Architecture,
    #[serde(skip)]
    layout: Option<Layout>,
    params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    trunk: Vec<Layer>,
    policy: Layer,
    value: Layer,
    n_params: usize,
}

fn layout(arch: &Architecture) -> Result<Layout> {
    if arch.in_channels == 0 || arch.grid.contains(&0) || arch.n_actions == 0 {
        return Err(Error::InvalidConfig("network dimensions must be positive".into()));
    }
    if !arch.conv_channels.is_empty() && arch.kernel % 2 == 0 {
        return Err(Error::InvalidConfig(format!("conv kernel must be odd, got {}", arch.kernel)));
    }
    let cells: usize = arch.grid.iter().product();
    let mut off = 0;
    let mut trunk = Vec::new();
    let mut ch = arch.in_channels;
    for &out_c in &arch.conv_channels {
        let l = Layer::Conv { in_c: ch, out_c, k: arch.kernel, w: off, b: off + out_c * ch * arch.kernel.pow(3) };
        off += l.n_params();
        trunk.push(l);
        ch = out_c;
    }
    let mut width = ch * cells;
    for &h in &arch.hidden {
        let l = Layer::Dense { n_in: width, n_out: h, w: off, b: off + h * width };
        off += l.n_params();
        trunk.push(l);
        width = h;
    }
    let policy = Layer::Dense { n_in: width, n_out: arch.n_actions, w: off, b: off + arch.n_actions * width };
    off += policy.n_params();
    let value = Layer::Dense { n_in: width, n_out: 1, w: off, b: off + width };
    off += value.n_params();
    Ok(Layout { trunk, policy, value, n_params: off })
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// Input followed by each trunk layer's post-tanh output, batch-major.
    acts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Output {
    /// `batch × n_actions`, row-major.
    pub logits: Vec<f64>,
    pub values: Vec<f64>,
}

/// `out (m×n) = a (m×k) · bᵀ` where `b` is stored `n×k` row-major, plus `beta·out`.
fn gemm_abt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, out: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), k as isize, 1, b.as_ptr(), 1, k as isize, beta, out.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// `out (m×n) = a (m×k) · b (k×n)`, all row-major.
fn gemm_ab(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, out: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), k as isize, 1, b.as_ptr(), n as isize, 1, beta, out.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// `out (m×n) += aᵀ · b` where `a` is `k×m` and `b` is `k×n`, both row-major.
fn gemm_atb_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), 1, m as isize, b.as_ptr(), n as isize, 1, 1.0, out.as_mut_ptr(), n as isize, 1,
        );
    }
}

impl PolicyNet {
    pub fn new(arch: Architecture, rng: &mut impl Rng) -> Result<Self> {
        let lay = layout(&arch)?;
        let mut params = vec![0.0; lay.n_params];
        let mut init = |l: &Layer, gain: f64| {
            let (w, fan_in, n_w) = match *l {
                Layer::Conv { in_c, out_c, k, w, .. } => (w, in_c * k * k * k, out_c * in_c * k * k * k),
                Layer::Dense { n_in, n_out, w, .. } => (w, n_in, n_in * n_out),
            };
            let normal = Normal::new(0.0, gain / (fan_in as f64).sqrt()).expect("finite std");
            for p in &mut params[w..w + n_w] {
                *p = normal.sample(rng);
            }
        };
        for l in &lay.trunk {
            init(l, 2f64.sqrt());
        }
        init(&lay.policy, 0.01);
        init(&lay.value, 1.0);
        Ok(PolicyNet { arch, layout: Some(lay), params })
    }

    /// Rebuild from stored parameters, validating their count.
    pub fn from_parts(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        let lay = layout(&arch)?;
        if params.len() != lay.n_params {
            return Err(Error::Malformed(format!("expected {} parameters, got {}", lay.n_params, params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Malformed("non-finite network parameter".into()));
        }
        Ok(PolicyNet { arch, layout: Some(lay), params })
    }

    fn lay(&self) -> &Layout {
        self.layout.as_ref().expect("layout is built on construction")
    }

    /// Restore the derived layout after deserialization.
    pub fn rebuild(self) -> Result<Self> {
        Self::from_parts(self.arch, self.params)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, input: &[f64], batch: usize) -> (Output, ForwardCache) {
        let lay = self.lay();
        let cells: usize = self.arch.grid.iter().product();
        assert_eq!(input.len(), batch * self.arch.input_len(), "input length");
        let mut acts = vec![input.to_vec()];
        for l in &lay.trunk {
            let x = acts.last().expect("non-empty");
            let mut y = match *l {
                Layer::Conv { in_c, out_c, k, w, b } => {
                    let mut y = vec![0.0; batch * out_c * cells];
                    for s in 0..batch {
                        conv_forward(
                            &x[s * in_c * cells..(s + 1) * in_c * cells],
                            &mut y[s * out_c * cells..(s + 1) * out_c * cells],
                            &self.params[w..b],
                            &self.params[b..b + out_c],
                            in_c,
                            out_c,
                            k,
                            self.arch.grid,
                        );
                    }
                    y
                }
                Layer::Dense { n_in, n_out, w, b } => self.dense(x, batch, n_in, n_out, w, b),
            };
            y.iter_mut().for_each(|v| *v = v.tanh());
            acts.push(y);
        }
        let h = acts.last().expect("non-empty");
        let (logits, values) = match (lay.policy, lay.value) {
            (Layer::Dense { n_in, n_out, w, b }, Layer::Dense { w: vw, b: vb, .. }) => {
                (self.dense(h, batch, n_in, n_out, w, b), self.dense(h, batch, n_in, 1, vw, vb))
            }
            _ => unreachable!("heads are dense"),
        };
        (Output { logits, values }, ForwardCache { batch, acts })
    }

    fn dense(&self, x: &[f64], batch: usize, n_in: usize, n_out: usize, w: usize, b: usize) -> Vec<f64> {
        let mut y = Vec::with_capacity(batch * n_out);
        for _ in 0..batch {
            y.extend_from_slice(&self.params[b..b + n_out]);
        }
        gemm_abt(batch, n_in, n_out, x, &self.params[w..w + n_in * n_out], 1.0, &mut y);
        y
    }

    /// Parameter gradient given loss gradients w.r.t. logits and values.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64], dvalues: &[f64]) -> Vec<f64> {
        let lay = self.lay();
        let batch = cache.batch;
        let cells: usize = self.arch.grid.iter().product();
        let mut grad = vec![0.0; self.params.len()];
        let h = cache.acts.last().expect("non-empty");
        let mut g = match (lay.policy, lay.value) {
            (Layer::Dense { n_in, n_out, w, b }, Layer::Dense { w: vw, b: vb, .. }) => {
                let mut g = vec![0.0; batch * n_in];
                dense_backward(&self.params, &mut grad, h, dlogits, &mut g, batch, n_in, n_out, w, b, 0.0);
                dense_backward(&self.params, &mut grad, h, dvalues, &mut g, batch, n_in, 1, vw, vb, 1.0);
                g
            }
            _ => unreachable!("heads are dense"),
        };
        for (li, l) in lay.trunk.iter().enumerate().rev() {
            let out = &cache.acts[li + 1];
            for (gv, &a) in g.iter_mut().zip(out) {
                *gv *= 1.0 - a * a;
            }
            let x = &cache.acts[li];
            let mut gx = vec![0.0; x.len()];
            match *l {
                Layer::Conv { in_c, out_c, k, w, b } => {
                    for s in 0..batch {
                        let (gw, gb) = grad.split_at_mut(b);
                        conv_backward(
                            &x[s * in_c * cells..(s + 1) * in_c * cells],
                            &g[s * out_c * cells..(s + 1) * out_c * cells],
                            &self.params[w..b],
                            &mut gw[w..],
                            &mut gb[..out_c],
                            &mut gx[s * in_c * cells..(s + 1) * in_c * cells],
                            in_c,
                            out_c,
                            k,
                            self.arch.grid,
                        );
                    }
                }
                Layer::Dense { n_in, n_out, w, b } => {
                    dense_backward(&self.params, &mut grad, x, &g, &mut gx, batch, n_in, n_out, w, b, 0.0);
                }
            }
            g = gx;
        }
        grad
    }
}

#[allow(clippy::too_many_arguments)]
fn dense_backward(
    params: &[f64],
    grad: &mut [f64],
    x: &[f64],
    gy: &[f64],
    gx: &mut [f64],
    batch: usize,
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
    beta: f64,
) {
    gemm_atb_acc(n_out, batch, n_in, gy, x, &mut grad[w..w + n_out * n_in]);
    for s in 0..batch {
        for o in 0..n_out {
            grad[b + o] += gy[s * n_out + o];
        }
    }
    gemm_ab(batch, n_out, n_in, gy, &params[w..w + n_out * n_in], beta, gx);
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(x: &[f64], y: &mut [f64], w: &[f64], b: &[f64], in_c: usize, out_c: usize, k: usize, grid: [usize; 3]) {
    let [h, wd, d] = grid;
    let p = (k / 2) as isize;
    let cells = h * wd * d;
    for o in 0..out_c {
        for cx in 0..h {
            for cy in 0..wd {
                for cz in 0..d {
                    let mut acc = b[o];
                    for i in 0..in_c {
                        for dx in 0..k {
                            let sx = cx as isize + dx as isize - p;
                            if sx < 0 || sx >= h as isize {
                                continue;
                            }
                            for dy in 0..k {
                                let sy = cy as isize + dy as isize - p;
                                if sy < 0 || sy >= wd as isize {
                                    continue;
                                }
                                for dz in 0..k {
                                    let sz = cz as isize + dz as isize - p;
                                    if sz < 0 || sz >= d as isize {
                                        continue;
                                    }
                                    let wi = (((o * in_c + i) * k + dx) * k + dy) * k + dz;
                                    let xi = i * cells + ((sx as usize * wd) + sy as usize) * d + sz as usize;
                                    acc += w[wi] * x[xi];
                                }
                            }
                        }
                    }
                    y[o * cells + (cx * wd + cy) * d + cz] = acc;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    gy: &[f64],
    w: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    gx: &mut [f64],
    in_c: usize,
    out_c: usize,
    k: usize,
    grid: [usize; 3],
) {
    let [h, wd, d] = grid;
    let p = (k / 2) as isize;
    let cells = h * wd * d;
    for o in 0..out_c {
        for cx in 0..h {
            for cy in 0..wd {
                for cz in 0..d {
                    let g = gy[o * cells + (cx * wd + cy) * d + cz];
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    for i in 0..in_c {
                        for dx in 0..k {
                            let sx = cx as isize + dx as isize - p;
                            if sx < 0 || sx >= h as isize {
                                continue;
                            }
                            for dy in 0..k {
                                let sy = cy as isize + dy as isize - p;
                                if sy < 0 || sy >= wd as isize {
                                    continue;
                                }
                                for dz in 0..k {
                                    let sz = cz as isize + dz as isize - p;
                                    if sz < 0 || sz >= d as isize {
                                        continue;
                                    }
                                    let wi = (((o * in_c + i) * k + dx) * k + dy) * k + dz;
                                    let xi = i * cells + ((sx as usize * wd) + sy as usize) * d + sz as usize;
                                    gw[wi] += g * x[xi];
                                    gx[xi] += g * w[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
