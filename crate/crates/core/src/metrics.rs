//! Full-reference image quality metrics for hyperspectral cubes and acquisition-speedup
//! accounting.
//!
//! `x` is always the ground truth and `y` the image under test. Dimensions are
//! m rows × n columns × p channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercube::HyperCube;

/// A ground-truth / test pair with identical dimensions.
#[derive(Debug, Clone, Copy)]
pub struct MetricsPair<'a> {
    x: &'a HyperCube,
    y: &'a HyperCube,
}

impl<'a> MetricsPair<'a> {
    pub fn new(x: &'a HyperCube, y: &'a HyperCube) -> Result<Self> {
        if (x.height(), x.width(), x.bands()) != (y.height(), y.width(), y.bands()) {
            return Err(Error::Shape(format!(
                "metric pair dims differ: {}x{}x{} vs {}x{}x{}",
                x.height(),
                x.width(),
                x.bands(),
                y.height(),
                y.width(),
                y.bands()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn truth(&self) -> &HyperCube {
        self.x
    }

    pub fn test(&self) -> &HyperCube {
        self.y
    }

    /// Largest ground-truth value over all channels.
    pub fn x_max(&self) -> f64 {
        f64::from(self.x.max_value())
    }
}

/// SSIM stabilizers c1 = (k1·L)², c2 = (k2·L)².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConstants {
    pub c1: f64,
    pub c2: f64,
}

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

impl SsimConstants {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::Value(format!("SSIM constants must be positive, got {c1}, {c2}")));
        }
        Ok(Self { c1, c2 })
    }

    /// Standard k1 = 0.01, k2 = 0.03 with dynamic range `l`.
    pub fn from_dynamic_range(l: f64) -> Result<Self> {
        Self::new((SSIM_K1 * l).powi(2), (SSIM_K2 * l).powi(2))
    }

    /// Constants derived from the ground truth's maximum.
    pub fn for_pair(pair: &MetricsPair<'_>) -> Result<Self> {
        Self::from_dynamic_range(pair.x_max())
    }
}

/// Mean squared error over every element.
pub fn mse(pair: &MetricsPair<'_>) -> f64 {
    let n = pair.x.data().len() as f64;
    pair.x
        .data()
        .iter()
        .zip(pair.y.data())
        .map(|(&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum::<f64>()
        / n
}

/// 10·log10(x_max² / MSE). Identical inputs give `f64::INFINITY`.
pub fn psnr(pair: &MetricsPair<'_>) -> Result<f64> {
    let x_max = pair.x_max();
    if !(x_max > 0.0) {
        return Err(Error::Value(format!(
            "PSNR needs a positive ground-truth maximum, got {x_max}"
        )));
    }
    Ok(psnr_from_mse(x_max, mse(pair)))
}

pub fn psnr_from_mse(x_max: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (x_max * x_max / mse).log10()
    }
}

/// SSIM from global statistics of one channel (population variances).
pub fn ssim_channel(x: &[f64], y: &[f64], consts: SsimConstants) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    ((2.0 * mx * my + consts.c1) * (2.0 * cxy + consts.c2))
        / ((mx * mx + my * my + consts.c1) * (vx + vy + consts.c2))
}

/// Per-channel global SSIM averaged over channels.
pub fn ssim(pair: &MetricsPair<'_>, consts: SsimConstants) -> f64 {
    let bands = pair.x.bands();
    let pixels = pair.x.pixels();
    let mut xs = vec![0.0; pixels];
    let mut ys = vec![0.0; pixels];
    let mut total = 0.0;
    for b in 0..bands {
        for p in 0..pixels {
            xs[p] = f64::from(pair.x.data()[p * bands + b]);
            ys[p] = f64::from(pair.y.data()[p * bands + b]);
        }
        total += ssim_channel(&xs, &ys, consts);
    }
    total / bands as f64
}

/// Effective imaging speed-up of a low-SNR, s×-decimated acquisition over the
/// full high-SNR raster: (t_high / t_low) · s².
pub fn speedup(t_low: f64, t_high: f64, s: u32) -> Result<f64> {
    if !(t_low > 0.0 && t_high > 0.0) {
        return Err(Error::Value(format!(
            "integration times must be positive, got {t_low} and {t_high}"
        )));
    }
    if t_low > t_high {
        return Err(Error::Value(format!(
            "t_low ({t_low}) must not exceed t_high ({t_high})"
        )));
    }
    if s == 0 {
        return Err(Error::Value("scale must be positive".into()));
    }
    Ok((t_high / t_low) * f64::from(s * s))
}

/// Full report for one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub x_max: f64,
    pub ssim_c1: f64,
    pub ssim_c2: f64,
}

pub fn quality_report(x: &HyperCube, y: &HyperCube) -> Result<QualityReport> {
    let pair = MetricsPair::new(x, y)?;
    let consts = SsimConstants::for_pair(&pair)?;
    Ok(QualityReport {
        mse: mse(&pair),
        psnr: psnr(&pair)?,
        ssim: ssim(&pair, consts),
        x_max: pair.x_max(),
        ssim_c1: consts.c1,
        ssim_c2: consts.c2,
    })
}
