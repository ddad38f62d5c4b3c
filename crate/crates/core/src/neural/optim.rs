//! Adam and the one-cycle learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update at step `t` (1-based) with bias-corrected moments.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    t: u64,
    cfg: AdamConfig,
) -> Result<()> {
    if grads.len() != params.len() || m.len() != params.len() || v.len() != params.len() {
        return Err(Error::Shape(format!(
            "adam: params {}, grads {}, m {}, v {}",
            params.len(),
            grads.len(),
            m.len(),
            v.len()
        )));
    }
    if t == 0 {
        return Err(Error::Range("adam step index starts at 1".into()));
    }
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + cfg.eps);
    }
    Ok(())
}

pub const ONE_CYCLE_PCT_START: f64 = 0.3;
pub const ONE_CYCLE_DIV_START: f64 = 25.0;
pub const ONE_CYCLE_DIV_FINAL: f64 = 1e4;

fn cos_interp(from: f64, to: f64, pct: f64) -> f64 {
    to + (from - to) / 2.0 * (1.0 + (std::f64::consts::PI * pct).cos())
}

/// Step at which the one-cycle schedule peaks.
pub fn one_cycle_peak(total_steps: usize) -> usize {
    ((ONE_CYCLE_PCT_START * total_steps as f64).floor() as usize).min(total_steps.saturating_sub(1))
}

/// Cosine warm-up from max_lr/25 to max_lr over the first 30% of steps, then cosine
/// decay to max_lr/1e4 at the last step.
pub fn one_cycle_lr(step: usize, total_steps: usize, max_lr: f64) -> Result<f64> {
    if step >= total_steps {
        return Err(Error::Range(format!("step {step} outside [0, {total_steps})")));
    }
    let peak = one_cycle_peak(total_steps);
    let start = max_lr / ONE_CYCLE_DIV_START;
    let end = max_lr / ONE_CYCLE_DIV_FINAL;
    if step <= peak {
        if peak == 0 {
            return Ok(max_lr);
        }
        Ok(cos_interp(start, max_lr, step as f64 / peak as f64))
    } else {
        let span = (total_steps - 1 - peak) as f64;
        Ok(cos_interp(max_lr, end, (step - peak) as f64 / span))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheduler {
    OneCycle,
    Constant,
}

impl Scheduler {
    pub fn lr(&self, step: usize, total_steps: usize, max_lr: f64) -> Result<f64> {
        match self {
            Scheduler::OneCycle => one_cycle_lr(step, total_steps, max_lr),
            Scheduler::Constant => Ok(max_lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = vec![1.5, -2.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_step(&mut p, &[0.0, 0.0], &mut m, &mut v, 0.1, 1, AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn first_step_is_signed_lr() {
        let mut p = vec![0.0, 0.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_step(&mut p, &[3.0, -0.02], &mut m, &mut v, 0.01, 1, AdamConfig::default()).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-9);
        assert!((p[1] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn schedule_endpoints() {
        let total = 1000;
        let peak = one_cycle_peak(total);
        assert_eq!(peak, 300);
        assert_eq!(one_cycle_lr(peak, total, 5e-4).unwrap(), 5e-4);
        assert!((one_cycle_lr(0, total, 5e-4).unwrap() - 5e-4 / 25.0).abs() < 1e-18);
        assert!((one_cycle_lr(total - 1, total, 5e-4).unwrap() - 5e-8).abs() < 1e-18);
        assert!(matches!(one_cycle_lr(total, total, 1.0), Err(Error::Range(_))));
        assert_eq!(one_cycle_lr(0, 1, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn schedule_is_unimodal() {
        let total = 1000;
        let lrs: Vec<f64> = (0..total).map(|s| one_cycle_lr(s, total, 1.0).unwrap()).collect();
        let peak = one_cycle_peak(total);
        assert!(lrs[..=peak].windows(2).all(|w| w[1] > w[0]));
        assert!(lrs[peak..].windows(2).all(|w| w[1] < w[0]));
    }
}
