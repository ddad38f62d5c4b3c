//! Architecture selection and seeded construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::graph::{Graph, Var};
use super::hyrisr::{Hyrisr, HyrisrConfig};
use super::layers::{Builder, Ctx, BN_MOMENTUM};
use super::params::{round_f32, ParamSet};
use super::resunet::{ResUNet1d, ResUNet1dConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum ArchConfig {
    Resunet1d(ResUNet1dConfig),
    Hyrisr(HyrisrConfig),
}

impl ArchConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ArchConfig::Resunet1d(_) => "resunet1d",
            ArchConfig::Hyrisr(_) => "hyrisr",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ArchConfig::Resunet1d(c) => c.validate(),
            ArchConfig::Hyrisr(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Network {
    Resunet1d(ResUNet1d),
    Hyrisr(Hyrisr),
}

/// A network with its weights and norm buffers.
#[derive(Debug, Clone)]
pub struct Model {
    pub arch: ArchConfig,
    pub net: Network,
    pub params: ParamSet,
    pub buffers: ParamSet,
}

impl Model {
    /// Kaiming-initialized weights from `seed`; biases and norm shifts zero, norm scales one.
    pub fn build(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut buffers = ParamSet::new();
        let mut b = Builder {
            params: &mut params,
            buffers: &mut buffers,
            rng: &mut rng,
        };
        let net = match arch {
            ArchConfig::Resunet1d(c) => Network::Resunet1d(ResUNet1d::build(c, &mut b)?),
            ArchConfig::Hyrisr(c) => Network::Hyrisr(Hyrisr::build(c, &mut b)?),
        };
        Ok(Self {
            arch,
            net,
            params,
            buffers,
        })
    }

    /// Records the forward pass on `ctx`'s tape.
    pub fn forward_ctx(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        match &self.net {
            Network::Resunet1d(n) => n.forward(ctx, x),
            Network::Hyrisr(n) => n.forward(ctx, x),
        }
    }

    /// Builds a forward pass on `g`, returning the output and observed batch statistics.
    pub fn forward(&self, g: &mut Graph, x: Var, train: bool) -> Result<(Var, Vec<(usize, usize, super::graph::BatchStats)>)> {
        let mut ctx = Ctx::new(g, &self.params, &self.buffers, train);
        let y = self.forward_ctx(&mut ctx, x)?;
        Ok((y, ctx.stats))
    }

    /// Exponential running-average update of norm buffers, kept f32-representable.
    pub fn update_running_stats(&mut self, stats: &[(usize, usize, super::graph::BatchStats)]) {
        for (mi, vi, s) in stats {
            for (r, &b) in self.buffers.tensors[*mi].data.iter_mut().zip(&s.mean) {
                *r = round_f32((1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b);
            }
            for (r, &b) in self.buffers.tensors[*vi].data.iter_mut().zip(&s.var) {
                *r = round_f32((1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b);
            }
        }
    }

    pub fn resunet_config(&self) -> Option<&ResUNet1dConfig> {
        match &self.arch {
            ArchConfig::Resunet1d(c) => Some(c),
            ArchConfig::Hyrisr(_) => None,
        }
    }

    pub fn hyrisr_config(&self) -> Option<&HyrisrConfig> {
        match &self.arch {
            ArchConfig::Hyrisr(c) => Some(c),
            ArchConfig::Resunet1d(_) => None,
        }
    }
}
