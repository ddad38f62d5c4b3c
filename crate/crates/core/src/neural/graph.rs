//! Tape-based reverse-mode automatic differentiation over `Tensor`s.

use crate::error::{Error, Result};

use super::params::ParamSet;
use super::tensor::{
    conv_backward, conv_forward, conv_transpose_backward, conv_transpose_forward, pixel_shuffle, pixel_unshuffle,
    ConvGeom, Tensor,
};

pub const BN_EPS: f64 = 1e-5;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    Conv { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    ConvT { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    BatchNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    /// Batch norm with fixed statistics: y = γ·(x − μ)·s + β.
    FrozenNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Relu(Var),
    Sigmoid(Var),
    Add(Var, Var),
    Scale(Var, f64),
    Concat(Var, Var),
    AvgPool(Var),
    ChannelScale(Var, Var),
    PixelShuffle(Var, usize),
    Crop { x: Var, h0: usize, w0: usize },
    L1 { pred: Var, target: Vec<f64> },
    WeightedSum { x: Var, weights: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Per-channel batch statistics observed by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance.
    pub var: Vec<f64>,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

/// Gradients for every node of a tape, indexed by `Var`.
pub struct Grads(Vec<Option<Vec<f64>>>);

impl Grads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.0[v.0].as_deref()
    }
}

fn channel_dims(t: &Tensor) -> Result<(usize, usize, usize)> {
    let (n, c, h, w) = t.dims4()?;
    Ok((n, c, h * w))
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::Shape(format!("{what}: shapes {:?} and {:?} differ", a.shape, b.shape)));
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Leaf for parameter `idx` of `ps`; repeated calls return the same node.
    pub fn param(&mut self, ps: &ParamSet, idx: usize) -> Var {
        if self.param_nodes.len() <= idx {
            self.param_nodes.resize(idx + 1, None);
        }
        if let Some(v) = self.param_nodes[idx] {
            return v;
        }
        let v = self.push(ps.tensors[idx].clone(), Op::Param);
        self.param_nodes[idx] = Some(v);
        v
    }

    pub fn conv(&mut self, x: Var, w: Var, b: Option<Var>, geom: ConvGeom) -> Result<Var> {
        let y = conv_forward(self.value(x), self.value(w), b.map(|b| self.value(b)), geom)?;
        Ok(self.push(y, Op::Conv { x, w, b, geom }))
    }

    pub fn conv_transpose(&mut self, x: Var, w: Var, b: Option<Var>, geom: ConvGeom) -> Result<Var> {
        let y = conv_transpose_forward(self.value(x), self.value(w), b.map(|b| self.value(b)), geom)?;
        Ok(self.push(y, Op::ConvT { x, w, b, geom }))
    }

    /// Training-mode batch norm over (N, H, W) per channel. Returns the batch statistics
    /// for running-average updates.
    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<(Var, BatchStats)> {
        let xv = self.value(x);
        let (n, c, hw) = channel_dims(xv)?;
        let m = n * hw;
        if m < 2 {
            return Err(Error::Shape("batch norm needs at least two values per channel".into()));
        }
        let (g, b) = (&self.value(gamma).data, &self.value(beta).data);
        if g.len() != c || b.len() != c {
            return Err(Error::Shape(format!("batch norm affine params must have {c} entries")));
        }
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for s in 0..n {
            for ch in 0..c {
                mean[ch] += xv.data[(s * c + ch) * hw..][..hw].iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|v| *v /= m as f64);
        for s in 0..n {
            for ch in 0..c {
                var[ch] += xv.data[(s * c + ch) * hw..][..hw].iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v / m as f64 + BN_EPS).sqrt()).collect();
        let mut xhat = vec![0.0; xv.len()];
        let mut y = vec![0.0; xv.len()];
        for s in 0..n {
            for ch in 0..c {
                let off = (s * c + ch) * hw;
                for i in off..off + hw {
                    xhat[i] = (xv.data[i] - mean[ch]) * inv_std[ch];
                    y[i] = g[ch] * xhat[i] + b[ch];
                }
            }
        }
        let stats = BatchStats {
            mean,
            var: var.iter().map(|v| v / (m - 1) as f64).collect(),
        };
        let y = Tensor::new(xv.shape.clone(), y)?;
        Ok((self.push(y, Op::BatchNorm { x, gamma, beta, xhat, inv_std }), stats))
    }

    /// Inference-mode batch norm with the given running statistics.
    pub fn frozen_norm(&mut self, x: Var, gamma: Var, beta: Var, mean: &[f64], var: &[f64]) -> Result<Var> {
        let xv = self.value(x);
        let (n, c, hw) = channel_dims(xv)?;
        let (g, b) = (&self.value(gamma).data, &self.value(beta).data);
        if g.len() != c || b.len() != c || mean.len() != c || var.len() != c {
            return Err(Error::Shape(format!("batch norm parameters must have {c} entries")));
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut xhat = vec![0.0; xv.len()];
        let mut y = vec![0.0; xv.len()];
        for s in 0..n {
            for ch in 0..c {
                let off = (s * c + ch) * hw;
                for i in off..off + hw {
                    xhat[i] = (xv.data[i] - mean[ch]) * inv_std[ch];
                    y[i] = g[ch] * xhat[i] + b[ch];
                }
            }
        }
        let y = Tensor::new(xv.shape.clone(), y)?;
        Ok(self.push(y, Op::FrozenNorm { x, gamma, beta, xhat, inv_std }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let y = Tensor {
            shape: xv.shape.clone(),
            data: xv.data.iter().map(|&v| v.max(0.0)).collect(),
        };
        self.push(y, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let y = Tensor {
            shape: xv.shape.clone(),
            data: xv.data.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect(),
        };
        self.push(y, Op::Sigmoid(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape(av, bv, "add")?;
        let y = Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().zip(&bv.data).map(|(x, y)| x + y).collect(),
        };
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let xv = self.value(x);
        let y = Tensor {
            shape: xv.shape.clone(),
            data: xv.data.iter().map(|v| v * k).collect(),
        };
        self.push(y, Op::Scale(x, k))
    }

    /// Concatenation along the channel axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (n, ca, h, w) = av.dims4()?;
        let (nb, cb, hb, wb) = bv.dims4()?;
        if (n, h, w) != (nb, hb, wb) {
            return Err(Error::Shape(format!("concat: {:?} vs {:?}", av.shape, bv.shape)));
        }
        let hw = h * w;
        let mut data = Vec::with_capacity(av.len() + bv.len());
        for s in 0..n {
            data.extend_from_slice(&av.data[s * ca * hw..(s + 1) * ca * hw]);
            data.extend_from_slice(&bv.data[s * cb * hw..(s + 1) * cb * hw]);
        }
        let y = Tensor::new(vec![n, ca + cb, h, w], data)?;
        Ok(self.push(y, Op::Concat(a, b)))
    }

    /// Global average pool to [N, C, 1, 1].
    pub fn avg_pool(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let (n, c, hw) = channel_dims(xv)?;
        let data = xv.data.chunks(hw).map(|p| p.iter().sum::<f64>() / hw as f64).collect();
        let y = Tensor::new(vec![n, c, 1, 1], data)?;
        Ok(self.push(y, Op::AvgPool(x)))
    }

    /// x [N, C, H, W] scaled per channel by g [N, C, 1, 1].
    pub fn channel_scale(&mut self, x: Var, g: Var) -> Result<Var> {
        let (xv, gv) = (self.value(x), self.value(g));
        let (n, c, hw) = channel_dims(xv)?;
        if gv.shape != [n, c, 1, 1] {
            return Err(Error::Shape(format!("channel gate {:?} for input {:?}", gv.shape, xv.shape)));
        }
        let mut data = xv.data.clone();
        for (plane, &k) in data.chunks_mut(hw).zip(&gv.data) {
            plane.iter_mut().for_each(|v| *v *= k);
        }
        let y = Tensor::new(xv.shape.clone(), data)?;
        Ok(self.push(y, Op::ChannelScale(x, g)))
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let y = pixel_shuffle(self.value(x), r)?;
        Ok(self.push(y, Op::PixelShuffle(x, r)))
    }

    /// Spatial window [h0, h0 + h) × [w0, w0 + w).
    pub fn crop(&mut self, x: Var, h0: usize, w0: usize, h: usize, w: usize) -> Result<Var> {
        let xv = self.value(x);
        let (n, c, xh, xw) = xv.dims4()?;
        if h0 + h > xh || w0 + w > xw {
            return Err(Error::Shape(format!("crop {h}x{w} at ({h0}, {w0}) exceeds {xh}x{xw}")));
        }
        let mut data = Vec::with_capacity(n * c * h * w);
        for plane in xv.data.chunks(xh * xw) {
            for r in h0..h0 + h {
                data.extend_from_slice(&plane[r * xw + w0..r * xw + w0 + w]);
            }
        }
        let y = Tensor::new(vec![n, c, h, w], data)?;
        Ok(self.push(y, Op::Crop { x, h0, w0 }))
    }

    /// Mean absolute error against a constant target.
    pub fn l1_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let pv = self.value(pred);
        same_shape(pv, target, "l1 loss")?;
        let loss = pv.data.iter().zip(&target.data).map(|(p, t)| (p - t).abs()).sum::<f64>() / pv.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::L1 {
                pred,
                target: target.data.clone(),
            },
        ))
    }

    /// Σ x·weights, used by gradient checks.
    pub fn weighted_sum(&mut self, x: Var, weights: &[f64]) -> Result<Var> {
        let xv = self.value(x);
        if xv.len() != weights.len() {
            return Err(Error::Shape(format!("{} weights for {} values", weights.len(), xv.len())));
        }
        let s = xv.data.iter().zip(weights).map(|(a, b)| a * b).sum();
        Ok(self.push(
            Tensor::scalar(s),
            Op::WeightedSum {
                x,
                weights: weights.to_vec(),
            },
        ))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            self.backprop_node(i, &dy, &mut grads)?;
            grads[i] = Some(dy);
        }
        Ok(Grads(grads))
    }

    fn backprop_node(&self, i: usize, dy: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let node = &self.nodes[i];
        let mut acc = |v: Var, g: &[f64]| {
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; g.len()]);
            slot.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        };
        let dy_t = || Tensor::new(node.value.shape.clone(), dy.to_vec());
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::Conv { x, w, b, geom } => {
                let (dx, dw, db) = conv_backward(self.value(*x), self.value(*w), &dy_t()?, *geom)?;
                acc(*x, &dx.data);
                acc(*w, &dw.data);
                if let Some(b) = b {
                    acc(*b, &db.data);
                }
            }
            Op::ConvT { x, w, b, geom } => {
                let (dx, dw, db) = conv_transpose_backward(self.value(*x), self.value(*w), &dy_t()?, *geom)?;
                acc(*x, &dx.data);
                acc(*w, &dw.data);
                if let Some(b) = b {
                    acc(*b, &db.data);
                }
            }
            Op::BatchNorm { x, gamma, beta, xhat, inv_std } => {
                let (n, c, hw) = channel_dims(&node.value)?;
                let m = (n * hw) as f64;
                let g = &self.value(*gamma).data;
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for s in 0..n {
                    for ch in 0..c {
                        let off = (s * c + ch) * hw;
                        for k in off..off + hw {
                            dgamma[ch] += dy[k] * xhat[k];
                            dbeta[ch] += dy[k];
                        }
                    }
                }
                let mut dx = vec![0.0; dy.len()];
                for s in 0..n {
                    for ch in 0..c {
                        let off = (s * c + ch) * hw;
                        let k0 = g[ch] * inv_std[ch] / m;
                        for k in off..off + hw {
                            dx[k] = k0 * (m * dy[k] - dbeta[ch] - xhat[k] * dgamma[ch]);
                        }
                    }
                }
                acc(*x, &dx);
                acc(*gamma, &dgamma);
                acc(*beta, &dbeta);
            }
            Op::FrozenNorm { x, gamma, beta, xhat, inv_std } => {
                let (n, c, hw) = channel_dims(&node.value)?;
                let g = &self.value(*gamma).data;
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                let mut dx = vec![0.0; dy.len()];
                for s in 0..n {
                    for ch in 0..c {
                        let off = (s * c + ch) * hw;
                        for k in off..off + hw {
                            dgamma[ch] += dy[k] * xhat[k];
                            dbeta[ch] += dy[k];
                            dx[k] = dy[k] * g[ch] * inv_std[ch];
                        }
                    }
                }
                acc(*x, &dx);
                acc(*gamma, &dgamma);
                acc(*beta, &dbeta);
            }
            Op::Relu(x) => {
                let xv = &self.value(*x).data;
                let dx: Vec<f64> = dy.iter().zip(xv).map(|(&d, &v)| if v > 0.0 { d } else { 0.0 }).collect();
                acc(*x, &dx);
            }
            Op::Sigmoid(x) => {
                let dx: Vec<f64> = dy.iter().zip(&node.value.data).map(|(&d, &y)| d * y * (1.0 - y)).collect();
                acc(*x, &dx);
            }
            Op::Add(a, b) => {
                acc(*a, dy);
                acc(*b, dy);
            }
            Op::Scale(x, k) => {
                let dx: Vec<f64> = dy.iter().map(|d| d * k).collect();
                acc(*x, &dx);
            }
            Op::Concat(a, b) => {
                let (n, _, h, w) = node.value.dims4()?;
                let ca = self.value(*a).shape[1];
                let cb = self.value(*b).shape[1];
                let hw = h * w;
                let mut da = Vec::with_capacity(n * ca * hw);
                let mut db = Vec::with_capacity(n * cb * hw);
                for s in 0..n {
                    let base = s * (ca + cb) * hw;
                    da.extend_from_slice(&dy[base..base + ca * hw]);
                    db.extend_from_slice(&dy[base + ca * hw..base + (ca + cb) * hw]);
                }
                acc(*a, &da);
                acc(*b, &db);
            }
            Op::AvgPool(x) => {
                let (_, _, hw) = channel_dims(self.value(*x))?;
                let dx: Vec<f64> = dy.iter().flat_map(|&d| std::iter::repeat_n(d / hw as f64, hw)).collect();
                acc(*x, &dx);
            }
            Op::ChannelScale(x, g) => {
                let (xv, gv) = (&self.value(*x).data, &self.value(*g).data);
                let hw = node.value.len() / gv.len();
                let mut dx = vec![0.0; xv.len()];
                let mut dg = vec![0.0; gv.len()];
                for (j, &k) in gv.iter().enumerate() {
                    for t in j * hw..(j + 1) * hw {
                        dx[t] = dy[t] * k;
                        dg[j] += dy[t] * xv[t];
                    }
                }
                acc(*x, &dx);
                acc(*g, &dg);
            }
            Op::PixelShuffle(x, r) => {
                let dx = pixel_unshuffle(&dy_t()?, *r)?;
                acc(*x, &dx.data);
            }
            Op::Crop { x, h0, w0 } => {
                let xv = self.value(*x);
                let (_, _, xh, xw) = xv.dims4()?;
                let (_, _, h, w) = node.value.dims4()?;
                let mut dx = vec![0.0; xv.len()];
                for (p, plane) in dx.chunks_mut(xh * xw).enumerate() {
                    for r in 0..h {
                        let src = &dy[(p * h + r) * w..(p * h + r + 1) * w];
                        plane[(h0 + r) * xw + w0..(h0 + r) * xw + w0 + w].copy_from_slice(src);
                    }
                }
                acc(*x, &dx);
            }
            Op::L1 { pred, target } => {
                let pv = &self.value(*pred).data;
                let k = dy[0] / pv.len() as f64;
                let dx: Vec<f64> = pv
                    .iter()
                    .zip(target)
                    .map(|(p, t)| {
                        let d = p - t;
                        if d > 0.0 {
                            k
                        } else if d < 0.0 {
                            -k
                        } else {
                            0.0
                        }
                    })
                    .collect();
                acc(*pred, &dx);
            }
            Op::WeightedSum { x, weights } => {
                let dx: Vec<f64> = weights.iter().map(|w| w * dy[0]).collect();
                acc(*x, &dx);
            }
        }
        Ok(())
    }

    /// Gradients of the parameters that appeared on this tape, indexed like `ps`.
    pub fn param_grads(&self, grads: &Grads, n_params: usize) -> Vec<Option<Vec<f64>>> {
        let mut out = vec![None; n_params];
        for (idx, v) in self.param_nodes.iter().enumerate() {
            if let Some(v) = v {
                if idx < n_params {
                    out[idx] = grads.get(*v).map(<[f64]>::to_vec);
                }
            }
        }
        out
    }
}
