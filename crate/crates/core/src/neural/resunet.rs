//! 1-D residual U-Net for per-spectrum denoising.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::graph::Var;
use super::layers::{Builder, Conv, Ctx, Norm};
use super::tensor::ConvGeom;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResUNet1dConfig {
    pub in_len: usize,
    pub depth: usize,
    pub base_channels: usize,
    pub kernel: usize,
    pub use_batch_norm: bool,
}

impl ResUNet1dConfig {
    pub fn new(in_len: usize) -> Self {
        Self {
            in_len,
            depth: 4,
            base_channels: 64,
            kernel: 5,
            use_batch_norm: true,
        }
    }

    /// Smaller network that trains in minutes on one CPU core.
    pub fn desk(in_len: usize) -> Self {
        Self {
            depth: 3,
            base_channels: 8,
            ..Self::new(in_len)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_len < 2 || self.depth == 0 || self.base_channels == 0 {
            return Err(Error::Config(format!("invalid ResUNet config {self:?}")));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel must be odd, got {}", self.kernel)));
        }
        if self.depth > 12 {
            return Err(Error::Config(format!("depth {} is too large", self.depth)));
        }
        Ok(())
    }

    /// Input length after zero-padding to a multiple of 2^depth.
    pub fn padded_len(&self) -> usize {
        let m = 1 << self.depth;
        self.in_len.div_ceil(m) * m
    }

    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

/// conv → norm → ReLU → conv → norm, plus identity or 1×1 projection skip, then ReLU.
#[derive(Debug, Clone)]
struct ResBlock {
    conv1: Conv,
    norm1: Option<Norm>,
    conv2: Conv,
    norm2: Option<Norm>,
    proj: Option<Conv>,
}

impl ResBlock {
    fn build<R: Rng>(b: &mut Builder<R>, name: &str, cin: usize, cout: usize, cfg: &ResUNet1dConfig) -> Self {
        let geom = ConvGeom::line(cfg.kernel, 1);
        let bn = cfg.use_batch_norm;
        let conv1 = b.conv(&format!("{name}.conv1"), cin, cout, geom, !bn);
        let norm1 = bn.then(|| b.norm(&format!("{name}.norm1"), cout));
        let conv2 = b.conv(&format!("{name}.conv2"), cout, cout, geom, !bn);
        let norm2 = bn.then(|| b.norm(&format!("{name}.norm2"), cout));
        let proj = (cin != cout).then(|| b.conv(&format!("{name}.proj"), cin, cout, ConvGeom::line(1, 1), true));
        Self {
            conv1,
            norm1,
            conv2,
            norm2,
            proj,
        }
    }

    fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let mut h = self.conv1.forward(ctx, x)?;
        if let Some(n) = &self.norm1 {
            h = n.forward(ctx, h)?;
        }
        h = ctx.g.relu(h);
        h = self.conv2.forward(ctx, h)?;
        if let Some(n) = &self.norm2 {
            h = n.forward(ctx, h)?;
        }
        let skip = match &self.proj {
            Some(p) => p.forward(ctx, x)?,
            None => x,
        };
        let s = ctx.g.add(h, skip)?;
        Ok(ctx.g.relu(s))
    }
}

#[derive(Debug, Clone)]
struct Down {
    conv: Conv,
    norm: Option<Norm>,
}

#[derive(Debug, Clone)]
pub struct ResUNet1d {
    pub cfg: ResUNet1dConfig,
    stem: Conv,
    enc: Vec<ResBlock>,
    down: Vec<Down>,
    bottleneck: ResBlock,
    up: Vec<Conv>,
    dec: Vec<ResBlock>,
    head: Conv,
}

impl ResUNet1d {
    pub fn build<R: Rng>(cfg: ResUNet1dConfig, b: &mut Builder<R>) -> Result<Self> {
        cfg.validate()?;
        let bn = cfg.use_batch_norm;
        let stem = b.conv("stem", 1, cfg.base_channels, ConvGeom::line(cfg.kernel, 1), true);
        let mut enc = Vec::new();
        let mut down = Vec::new();
        for l in 0..cfg.depth {
            let c = cfg.channels(l);
            enc.push(ResBlock::build(b, &format!("enc{l}"), c, c, &cfg));
            let conv = b.conv(&format!("down{l}"), c, 2 * c, ConvGeom::line(cfg.kernel, 2), !bn);
            let norm = bn.then(|| b.norm(&format!("down{l}.norm"), 2 * c));
            down.push(Down { conv, norm });
        }
        let cb = cfg.channels(cfg.depth);
        let bottleneck = ResBlock::build(b, "bottleneck", cb, cb, &cfg);
        let mut up = Vec::new();
        let mut dec = Vec::new();
        for l in (0..cfg.depth).rev() {
            let c = cfg.channels(l);
            up.push(b.conv_transpose(&format!("up{l}"), 2 * c, c, ConvGeom::new([1, 2], [1, 2], [0, 0]), true));
            dec.push(ResBlock::build(b, &format!("dec{l}"), 2 * c, c, &cfg));
        }
        let head = b.conv("head", cfg.base_channels, 1, ConvGeom::line(1, 1), true);
        Ok(Self {
            cfg,
            stem,
            enc,
            down,
            bottleneck,
            up,
            dec,
            head,
        })
    }

    /// x: [N, 1, 1, padded_len] → [N, 1, 1, padded_len].
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let len = ctx.g.value(x).shape.get(3).copied().unwrap_or(0);
        if ctx.g.value(x).shape.len() != 4 || len % (1 << self.cfg.depth) != 0 || ctx.g.value(x).shape[1] != 1 {
            return Err(Error::Shape(format!(
                "ResUNet input must be [N, 1, 1, L] with L divisible by {}, got {:?}",
                1 << self.cfg.depth,
                ctx.g.value(x).shape
            )));
        }
        let mut h = self.stem.forward(ctx, x)?;
        h = ctx.g.relu(h);
        let mut skips = Vec::with_capacity(self.cfg.depth);
        for (block, down) in self.enc.iter().zip(&self.down) {
            h = block.forward(ctx, h)?;
            skips.push(h);
            h = down.conv.forward(ctx, h)?;
            if let Some(n) = &down.norm {
                h = n.forward(ctx, h)?;
            }
            h = ctx.g.relu(h);
        }
        h = self.bottleneck.forward(ctx, h)?;
        for (up, block) in self.up.iter().zip(&self.dec) {
            let u = up.forward(ctx, h)?;
            let skip = skips.pop().expect("one skip per level");
            let cat = ctx.g.concat(u, skip)?;
            h = block.forward(ctx, cat)?;
        }
        self.head.forward(ctx, h)
    }
}
