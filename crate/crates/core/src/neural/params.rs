//! Named parameter and buffer collections.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Ordered, named tensors. Order is the checkpoint order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

/// Rounds to the nearest f32, so values survive an f32 checkpoint unchanged.
pub fn round_f32(v: f64) -> f64 {
    f64::from(v as f32)
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    /// Kaiming fan-in normal initialization times `gain`, rounded to f32.
    pub fn kaiming(&mut self, name: impl Into<String>, shape: Vec<usize>, fan_in: usize, gain: f64, rng: &mut impl Rng) -> usize {
        let std = gain * (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let n = shape.iter().product();
        let data = (0..n).map(|_| round_f32(normal.sample(rng))).collect();
        self.push(name, Tensor { shape, data })
    }

    pub fn constant(&mut self, name: impl Into<String>, len: usize, v: f64) -> usize {
        self.push(
            name,
            Tensor {
                shape: vec![len],
                data: vec![v; len],
            },
        )
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Copies values from `other`, which must have identical names and shapes.
    pub fn assign(&mut self, other: &ParamSet) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Config("parameter names differ".into()));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            if a.shape != b.shape {
                return Err(Error::Config(format!("parameter shape {:?} vs {:?}", a.shape, b.shape)));
            }
            a.data.clone_from(&b.data);
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Tensor::zeros(t.shape.clone())).collect(),
        }
    }
}
