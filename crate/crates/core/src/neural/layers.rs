//! Parameterized building blocks shared by the two networks.

use rand::Rng;

use crate::error::Result;

use super::graph::{BatchStats, Graph, Var};
use super::params::ParamSet;
use super::tensor::ConvGeom;

/// Forward-pass context: tape, weights, norm buffers, and collected batch statistics.
pub struct Ctx<'a> {
    pub g: &'a mut Graph,
    pub params: &'a ParamSet,
    pub buffers: &'a ParamSet,
    pub train: bool,
    /// (running-mean buffer, running-var buffer, observed statistics)
    pub stats: Vec<(usize, usize, BatchStats)>,
}

impl<'a> Ctx<'a> {
    pub fn new(g: &'a mut Graph, params: &'a ParamSet, buffers: &'a ParamSet, train: bool) -> Self {
        Self {
            g,
            params,
            buffers,
            train,
            stats: Vec::new(),
        }
    }

    pub fn param(&mut self, idx: usize) -> Var {
        self.g.param(self.params, idx)
    }
}

#[derive(Debug, Clone)]
pub struct Conv {
    pub w: usize,
    pub b: Option<usize>,
    pub geom: ConvGeom,
    pub transposed: bool,
}

/// Parameter tensors are registered in `ps` as `{name}.weight` and `{name}.bias`.
pub struct Builder<'a, R: Rng> {
    pub params: &'a mut ParamSet,
    pub buffers: &'a mut ParamSet,
    pub rng: &'a mut R,
}

impl<R: Rng> Builder<'_, R> {
    pub fn conv(&mut self, name: &str, cin: usize, cout: usize, geom: ConvGeom, bias: bool) -> Conv {
        self.conv_scaled(name, cin, cout, geom, bias, 1.0)
    }

    /// Convolution whose initial weights are shrunk by `gain`; used for the last layer of
    /// residual branches so deep stacks start close to identity.
    pub fn conv_scaled(&mut self, name: &str, cin: usize, cout: usize, geom: ConvGeom, bias: bool, gain: f64) -> Conv {
        let [kh, kw] = geom.kernel;
        let w = self.params.kaiming(format!("{name}.weight"), vec![cout, cin, kh, kw], cin * kh * kw, gain, self.rng);
        let b = bias.then(|| self.params.constant(format!("{name}.bias"), cout, 0.0));
        Conv {
            w,
            b,
            geom,
            transposed: false,
        }
    }

    pub fn conv_transpose(&mut self, name: &str, cin: usize, cout: usize, geom: ConvGeom, bias: bool) -> Conv {
        let [kh, kw] = geom.kernel;
        let fan_in = (cin * kh * kw / (geom.stride[0] * geom.stride[1])).max(1);
        let w = self.params.kaiming(format!("{name}.weight"), vec![cin, cout, kh, kw], fan_in, 1.0, self.rng);
        let b = bias.then(|| self.params.constant(format!("{name}.bias"), cout, 0.0));
        Conv {
            w,
            b,
            geom,
            transposed: true,
        }
    }

    pub fn norm(&mut self, name: &str, c: usize) -> Norm {
        Norm {
            gamma: self.params.constant(format!("{name}.gamma"), c, 1.0),
            beta: self.params.constant(format!("{name}.beta"), c, 0.0),
            mean: self.buffers.constant(format!("{name}.running_mean"), c, 0.0),
            var: self.buffers.constant(format!("{name}.running_var"), c, 1.0),
        }
    }
}

impl Conv {
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let w = ctx.param(self.w);
        let b = self.b.map(|b| ctx.param(b));
        if self.transposed {
            ctx.g.conv_transpose(x, w, b, self.geom)
        } else {
            ctx.g.conv(x, w, b, self.geom)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Norm {
    pub gamma: usize,
    pub beta: usize,
    pub mean: usize,
    pub var: usize,
}

impl Norm {
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let gamma = ctx.param(self.gamma);
        let beta = ctx.param(self.beta);
        if ctx.train {
            let (y, stats) = ctx.g.batch_norm(x, gamma, beta)?;
            ctx.stats.push((self.mean, self.var, stats));
            Ok(y)
        } else {
            let (mean, var) = (&ctx.buffers.tensors[self.mean].data, &ctx.buffers.tensors[self.var].data);
            ctx.g.frozen_norm(x, gamma, beta, mean, var)
        }
    }
}

/// Running-statistics momentum for batch norm.
pub const BN_MOMENTUM: f64 = 0.1;
