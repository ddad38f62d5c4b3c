//! Residual channel-attention super-resolution network for hyperspectral cubes, with
//! 1×1 spectral compression at the input and expansion at the output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::graph::Var;
use super::layers::{Builder, Conv, Ctx};
use super::tensor::ConvGeom;

/// Initial weight scale of the last conv in every residual branch.
pub const RESIDUAL_GAIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyrisrConfig {
    pub bands: usize,
    pub feature_channels: usize,
    pub n_residual_groups: usize,
    pub n_rcab_per_group: usize,
    pub attention_reduction: usize,
    pub scale: usize,
}

impl HyrisrConfig {
    pub fn new(bands: usize, scale: usize) -> Self {
        Self {
            bands,
            feature_channels: 64,
            n_residual_groups: 3,
            n_rcab_per_group: 4,
            attention_reduction: 16,
            scale,
        }
    }

    /// 18 groups of 16 blocks.
    pub fn deep(bands: usize, scale: usize) -> Self {
        Self {
            n_residual_groups: 18,
            n_rcab_per_group: 16,
            ..Self::new(bands, scale)
        }
    }

    /// Narrow trunk for CPU training.
    pub fn desk(bands: usize, scale: usize) -> Self {
        Self {
            feature_channels: 32,
            attention_reduction: 8,
            ..Self::new(bands, scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.scale) {
            return Err(Error::Config(format!("scale must be 2, 3 or 4, got {}", self.scale)));
        }
        if self.bands == 0 || self.feature_channels == 0 || self.n_residual_groups == 0 || self.n_rcab_per_group == 0 {
            return Err(Error::Config(format!("invalid HyRISR config {self:?}")));
        }
        if self.attention_reduction == 0 || self.feature_channels < self.attention_reduction {
            return Err(Error::Config(format!(
                "feature channels {} must be at least the attention reduction {}",
                self.feature_channels, self.attention_reduction
            )));
        }
        Ok(())
    }

    /// Sub-pixel stages: ×2, ×3, or ×2·×2.
    pub fn upsample_stages(&self) -> Vec<usize> {
        match self.scale {
            4 => vec![2, 2],
            s => vec![s],
        }
    }
}

/// Global pool → 1×1 (C → C/r) → ReLU → 1×1 (C/r → C) → sigmoid → per-channel scale.
#[derive(Debug, Clone)]
pub struct ChannelAttention {
    pub squeeze: Conv,
    pub excite: Conv,
}

impl ChannelAttention {
    pub fn build<R: Rng>(b: &mut Builder<R>, name: &str, c: usize, r: usize) -> Result<Self> {
        if r == 0 || c < r {
            return Err(Error::Config(format!("channel attention needs C >= r, got C={c}, r={r}")));
        }
        let pw = ConvGeom::square(1);
        Ok(Self {
            squeeze: b.conv(&format!("{name}.squeeze"), c, c / r, pw, true),
            excite: b.conv(&format!("{name}.excite"), c / r, c, pw, true),
        })
    }

    /// Returns (scaled output, gate).
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<(Var, Var)> {
        let p = ctx.g.avg_pool(x)?;
        let z = self.squeeze.forward(ctx, p)?;
        let z = ctx.g.relu(z);
        let z = self.excite.forward(ctx, z)?;
        let gate = ctx.g.sigmoid(z);
        Ok((ctx.g.channel_scale(x, gate)?, gate))
    }
}

/// conv3×3 → ReLU → conv3×3 → channel attention, plus identity skip.
#[derive(Debug, Clone)]
pub struct Rcab {
    pub conv1: Conv,
    pub conv2: Conv,
    pub attention: ChannelAttention,
}

impl Rcab {
    fn build<R: Rng>(b: &mut Builder<R>, name: &str, c: usize, r: usize) -> Result<Self> {
        Ok(Self {
            conv1: b.conv(&format!("{name}.conv1"), c, c, ConvGeom::square(3), true),
            conv2: b.conv_scaled(&format!("{name}.conv2"), c, c, ConvGeom::square(3), true, RESIDUAL_GAIN),
            attention: ChannelAttention::build(b, &format!("{name}.ca"), c, r)?,
        })
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let h = self.conv1.forward(ctx, x)?;
        let h = ctx.g.relu(h);
        let h = self.conv2.forward(ctx, h)?;
        let (h, _) = self.attention.forward(ctx, h)?;
        ctx.g.add(x, h)
    }
}

#[derive(Debug, Clone)]
struct Group {
    blocks: Vec<Rcab>,
    tail: Conv,
}

#[derive(Debug, Clone)]
pub struct Hyrisr {
    pub cfg: HyrisrConfig,
    spectral_down: Conv,
    groups: Vec<Group>,
    trunk_tail: Conv,
    upsample: Vec<(Conv, usize)>,
    spectral_up: Conv,
}

impl Hyrisr {
    pub fn build<R: Rng>(cfg: HyrisrConfig, b: &mut Builder<R>) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.feature_channels;
        let sq = ConvGeom::square(3);
        let spectral_down = b.conv("spectral_down", cfg.bands, c, ConvGeom::square(1), true);
        let mut groups = Vec::with_capacity(cfg.n_residual_groups);
        for gi in 0..cfg.n_residual_groups {
            let blocks = (0..cfg.n_rcab_per_group)
                .map(|bi| Rcab::build(b, &format!("group{gi}.rcab{bi}"), c, cfg.attention_reduction))
                .collect::<Result<_>>()?;
            let tail = b.conv_scaled(&format!("group{gi}.tail"), c, c, sq, true, RESIDUAL_GAIN);
            groups.push(Group { blocks, tail });
        }
        let trunk_tail = b.conv_scaled("trunk_tail", c, c, sq, true, RESIDUAL_GAIN);
        let upsample = cfg
            .upsample_stages()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (b.conv(&format!("upsample{i}"), c, c * r * r, sq, true), r))
            .collect();
        let spectral_up = b.conv("spectral_up", c, cfg.bands, ConvGeom::square(1), true);
        Ok(Self {
            cfg,
            spectral_down,
            groups,
            trunk_tail,
            upsample,
            spectral_up,
        })
    }

    /// x: [N, B, H, W] → [N, B, s·H, s·W].
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let shape = &ctx.g.value(x).shape;
        if shape.len() != 4 || shape[1] != self.cfg.bands {
            return Err(Error::Shape(format!(
                "HyRISR expects [N, {}, H, W], got {shape:?}",
                self.cfg.bands
            )));
        }
        let f0 = self.spectral_down.forward(ctx, x)?;
        let mut h = f0;
        for group in &self.groups {
            let mut y = h;
            for block in &group.blocks {
                y = block.forward(ctx, y)?;
            }
            y = group.tail.forward(ctx, y)?;
            h = ctx.g.add(h, y)?;
        }
        h = self.trunk_tail.forward(ctx, h)?;
        h = ctx.g.add(h, f0)?;
        for (conv, r) in &self.upsample {
            h = conv.forward(ctx, h)?;
            h = ctx.g.pixel_shuffle(h, *r)?;
        }
        self.spectral_up.forward(ctx, h)
    }

    /// First channel-attention module, for inspection.
    pub fn first_attention(&self) -> &ChannelAttention {
        &self.groups[0].blocks[0].attention
    }

    pub fn first_block(&self) -> &Rcab {
        &self.groups[0].blocks[0]
    }
}
