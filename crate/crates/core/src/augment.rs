//! Training-time augmentation for denoising and super-resolution pairs: crops, flips,
//! 90° rotations, spectral shift/flip, and mixup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercube::HyperCube;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    /// Crop side in input pixels; `0` keeps the full frame.
    pub crop_size: usize,
    pub p_flip_h: f64,
    pub p_flip_v: f64,
    pub p_rot90: f64,
    pub mixup_alpha: f64,
    pub p_mixup: f64,
    pub max_spectral_shift: usize,
    pub p_spectral_flip: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            crop_size: 0,
            p_flip_h: 0.5,
            p_flip_v: 0.5,
            p_rot90: 0.5,
            mixup_alpha: 0.2,
            p_mixup: 0.0,
            max_spectral_shift: 0,
            p_spectral_flip: 0.0,
        }
    }
}

impl AugmentPolicy {
    /// No transforms at all.
    pub fn none() -> Self {
        Self {
            crop_size: 0,
            p_flip_h: 0.0,
            p_flip_v: 0.0,
            p_rot90: 0.0,
            mixup_alpha: 0.2,
            p_mixup: 0.0,
            max_spectral_shift: 0,
            p_spectral_flip: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_flip_h, self.p_flip_v, self.p_rot90, self.p_mixup, self.p_spectral_flip];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Param(format!("probabilities must lie in [0, 1]: {self:?}")));
        }
        if !(self.mixup_alpha > 0.0) {
            return Err(Error::Param(format!("mixup_alpha must be positive, got {}", self.mixup_alpha)));
        }
        Ok(())
    }
}

/// Network input and target. For super-resolution (`scale > 1`) the input is the
/// raster-decimated grid of the target: input dims == ceil(target dims / scale).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: HyperCube,
    pub target: HyperCube,
    pub scale: usize,
}

impl TrainingPair {
    pub fn denoise(input: HyperCube, target: HyperCube) -> Result<Self> {
        Self::new(input, target, 1)
    }

    pub fn superres(input: HyperCube, target: HyperCube, scale: usize) -> Result<Self> {
        Self::new(input, target, scale)
    }

    fn new(input: HyperCube, target: HyperCube, scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Param("scale must be positive".into()));
        }
        if input.bands() != target.bands() {
            return Err(Error::Shape(format!(
                "input has {} bands, target {}",
                input.bands(),
                target.bands()
            )));
        }
        if target.height().div_ceil(scale) != input.height() || target.width().div_ceil(scale) != input.width() {
            return Err(Error::Shape(format!(
                "target {}x{} does not match input {}x{} at scale {scale}",
                target.height(),
                target.width(),
                input.height(),
                input.width()
            )));
        }
        Ok(Self { input, target, scale })
    }
}

fn remap(cube: &HyperCube, out_h: usize, out_w: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> Result<HyperCube> {
    let mut data = Vec::with_capacity(out_h * out_w * cube.bands());
    for i in 0..out_h {
        for j in 0..out_w {
            let (r, c) = src(i, j);
            data.extend_from_slice(cube.pixel(r, c));
        }
    }
    cube.reshaped(out_h, out_w, data, cube.meta().clone())
}

pub fn crop(cube: &HyperCube, row: usize, col: usize, h: usize, w: usize) -> Result<HyperCube> {
    if h == 0 || w == 0 || row + h > cube.height() || col + w > cube.width() {
        return Err(Error::Param(format!(
            "crop {h}x{w} at ({row}, {col}) exceeds {}x{}",
            cube.height(),
            cube.width()
        )));
    }
    remap(cube, h, w, |i, j| (row + i, col + j))
}

/// Mirror left-right.
pub fn flip_h(cube: &HyperCube) -> Result<HyperCube> {
    let w = cube.width();
    remap(cube, cube.height(), w, |i, j| (i, w - 1 - j))
}

/// Mirror top-bottom.
pub fn flip_v(cube: &HyperCube) -> Result<HyperCube> {
    let h = cube.height();
    remap(cube, h, cube.width(), |i, j| (h - 1 - i, j))
}

/// Counter-clockwise quarter turn; output is W×H.
pub fn rot90(cube: &HyperCube) -> Result<HyperCube> {
    let w = cube.width();
    remap(cube, w, cube.height(), |i, j| (j, w - 1 - i))
}

/// Output band b takes input band b − k, with edge replication; the axis is unchanged.
pub fn spectral_shift(cube: &HyperCube, k: isize) -> Result<HyperCube> {
    let b = cube.bands() as isize;
    if k.abs() >= b {
        return Err(Error::Param(format!("shift {k} must be smaller than {b} bands")));
    }
    let mut data = Vec::with_capacity(cube.data().len());
    for p in 0..cube.pixels() {
        let px = cube.pixel_at(p);
        data.extend((0..b).map(|i| px[(i - k).clamp(0, b - 1) as usize]));
    }
    cube.with_data(data)
}

/// Reverses band order of the values; the axis is unchanged.
pub fn spectral_flip(cube: &HyperCube) -> Result<HyperCube> {
    let mut data = Vec::with_capacity(cube.data().len());
    for p in 0..cube.pixels() {
        data.extend(cube.pixel_at(p).iter().rev());
    }
    cube.with_data(data)
}

/// Trims a super-resolution target to s·(n − 1) + 1 rows and columns so that flips
/// and rotations keep the decimation grid aligned with the input.
fn align_target(pair: TrainingPair) -> Result<TrainingPair> {
    let s = pair.scale;
    let th = s * (pair.input.height() - 1) + 1;
    let tw = s * (pair.input.width() - 1) + 1;
    if (th, tw) == (pair.target.height(), pair.target.width()) {
        return Ok(pair);
    }
    let target = crop(&pair.target, 0, 0, th, tw)?;
    TrainingPair::new(pair.input, target, s)
}

fn both(pair: TrainingPair, f: impl Fn(&HyperCube) -> Result<HyperCube>) -> Result<TrainingPair> {
    TrainingPair::new(f(&pair.input)?, f(&pair.target)?, pair.scale)
}

/// Applies crop, flip-h, flip-v, rot90, spectral shift, spectral flip in that order.
/// Random numbers for every stage are drawn whether or not the stage fires, so the
/// stream layout does not depend on the outcomes.
pub fn augment_pair(pair: &TrainingPair, policy: &AugmentPolicy, rng: &mut impl Rng) -> Result<TrainingPair> {
    policy.validate()?;
    let (ih, iw) = (pair.input.height(), pair.input.width());
    let c = if policy.crop_size == 0 { ih.min(iw) } else { policy.crop_size };
    let (ch, cw) = if policy.crop_size == 0 { (ih, iw) } else { (c, c) };
    if ch > ih || cw > iw {
        return Err(Error::Param(format!("crop {c} exceeds input {ih}x{iw}")));
    }
    let r0 = rng.gen_range(0..=ih - ch);
    let c0 = rng.gen_range(0..=iw - cw);
    let fh = rng.gen::<f64>() < policy.p_flip_h;
    let fv = rng.gen::<f64>() < policy.p_flip_v;
    let rot = rng.gen::<f64>() < policy.p_rot90;
    let m = policy.max_spectral_shift as isize;
    let shift = rng.gen_range(-m..=m);
    let sflip = rng.gen::<f64>() < policy.p_spectral_flip;

    let s = pair.scale;
    let mut out = if (ch, cw) == (ih, iw) {
        pair.clone()
    } else {
        let input = crop(&pair.input, r0, c0, ch, cw)?;
        // Full s·n extent when the target has room for it, otherwise the aligned s·(n−1)+1.
        let extent = |n: usize, origin: usize, total: usize| {
            if s * (origin + n) <= total {
                s * n
            } else {
                s * (n - 1) + 1
            }
        };
        let th = extent(ch, r0, pair.target.height());
        let tw = extent(cw, c0, pair.target.width());
        let target = crop(&pair.target, s * r0, s * c0, th, tw)?;
        TrainingPair::new(input, target, s)?
    };
    if fh || fv || rot {
        out = align_target(out)?;
    }
    if fh {
        out = both(out, flip_h)?;
    }
    if fv {
        out = both(out, flip_v)?;
    }
    if rot {
        out = both(out, rot90)?;
    }
    if shift != 0 {
        out = both(out, |c| spectral_shift(c, shift))?;
    }
    if sflip {
        out = both(out, spectral_flip)?;
    }
    Ok(out)
}

fn blend(a: &HyperCube, b: &HyperCube, lambda: f64) -> Result<HyperCube> {
    if (a.height(), a.width(), a.bands()) != (b.height(), b.width(), b.bands()) {
        return Err(Error::Shape(format!(
            "mixup operands differ: {}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.bands(),
            b.height(),
            b.width(),
            b.bands()
        )));
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (lambda * f64::from(x) + (1.0 - lambda) * f64::from(y)) as f32)
        .collect();
    a.with_data(data)
}

/// λ·a + (1 − λ)·b applied to input and target alike.
pub fn mixup(a: &TrainingPair, b: &TrainingPair, lambda: f64) -> Result<TrainingPair> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Param(format!("mixup lambda must lie in [0, 1], got {lambda}")));
    }
    if a.scale != b.scale {
        return Err(Error::Shape("mixup pairs have different scales".into()));
    }
    TrainingPair::new(blend(&a.input, &b.input, lambda)?, blend(&a.target, &b.target, lambda)?, a.scale)
}

/// λ ~ Beta(α, α).
pub fn sample_mixup_lambda(alpha: f64, rng: &mut impl Rng) -> Result<f64> {
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::Param(format!("mixup alpha {alpha}: {e}")))?;
    Ok(beta.sample(rng))
}

/// Independent stream for worker `worker`: seeded with `seed + worker`.
pub fn worker_rng(seed: u64, worker: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(worker))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::AcquisitionMeta;

    fn cube(h: usize, w: usize, b: usize, f: impl FnMut(usize, usize, usize) -> f32) -> HyperCube {
        HyperCube::from_fn(h, w, (0..b).map(|i| i as f64).collect(), AcquisitionMeta::default(), f).unwrap()
    }

    fn ramp(h: usize, w: usize, b: usize) -> HyperCube {
        cube(h, w, b, |r, c, k| (r * 100 + c * 10 + k) as f32)
    }

    #[test]
    fn no_op_policy_is_identity() {
        let p = TrainingPair::denoise(ramp(5, 4, 3), ramp(5, 4, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(augment_pair(&p, &AugmentPolicy::none(), &mut rng).unwrap(), p);
        let mut policy = AugmentPolicy::none();
        policy.crop_size = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = TrainingPair::denoise(ramp(4, 4, 3), ramp(4, 4, 3)).unwrap();
        assert_eq!(augment_pair(&q, &policy, &mut rng).unwrap(), q);
    }

    #[test]
    fn flip_twice_restores() {
        let c = ramp(3, 5, 2);
        assert_eq!(flip_h(&flip_h(&c).unwrap()).unwrap(), c);
        assert_eq!(flip_v(&flip_v(&c).unwrap()).unwrap(), c);
        let mut r = c.clone();
        for _ in 0..4 {
            r = rot90(&r).unwrap();
        }
        assert_eq!(r, c);
        assert_eq!(rot90(&c).unwrap().height(), 5);
    }

    #[test]
    fn crop_too_large() {
        let p = TrainingPair::denoise(ramp(4, 4, 2), ramp(4, 4, 2)).unwrap();
        let mut policy = AugmentPolicy::none();
        policy.crop_size = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(augment_pair(&p, &policy, &mut rng), Err(Error::Param(_))));
    }

    #[test]
    fn shift_cases() {
        let c = ramp(2, 2, 6);
        assert_eq!(spectral_shift(&c, 0).unwrap(), c);
        let back = spectral_shift(&spectral_shift(&c, 1).unwrap(), -1).unwrap();
        for p in 0..4 {
            assert_eq!(&back.pixel_at(p)[1..5], &c.pixel_at(p)[1..5]);
        }
        let s = spectral_shift(&c, 2).unwrap();
        assert_eq!(s.pixel_at(0), &[0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        let flat = cube(2, 2, 5, |_, _, _| 2.5);
        assert_eq!(spectral_shift(&flat, -3).unwrap(), flat);
        assert!(matches!(spectral_shift(&c, 6), Err(Error::Param(_))));
    }

    #[test]
    fn mixup_cases() {
        let zero = TrainingPair::denoise(cube(2, 2, 2, |_, _, _| 0.0), cube(2, 2, 2, |_, _, _| 0.0)).unwrap();
        let four = TrainingPair::denoise(cube(2, 2, 2, |_, _, _| 4.0), cube(2, 2, 2, |_, _, _| 4.0)).unwrap();
        let m = mixup(&zero, &four, 0.25).unwrap();
        assert!(m.input.data().iter().chain(m.target.data()).all(|&v| v == 3.0));
        assert_eq!(mixup(&four, &zero, 1.0).unwrap(), four);
        let p = TrainingPair::denoise(ramp(2, 3, 2), ramp(2, 3, 2)).unwrap();
        assert_eq!(mixup(&p, &p, 0.5).unwrap(), p);
        let other = TrainingPair::denoise(ramp(3, 3, 2), ramp(3, 3, 2)).unwrap();
        assert!(matches!(mixup(&p, &other, 0.5), Err(Error::Shape(_))));
    }

    #[test]
    fn pair_relation_checked() {
        assert!(TrainingPair::superres(ramp(3, 3, 2), ramp(5, 6, 2), 2).is_ok());
        assert!(TrainingPair::superres(ramp(3, 3, 2), ramp(7, 6, 2), 2).is_err());
        assert!(TrainingPair::denoise(ramp(3, 3, 2), ramp(3, 3, 3)).is_err());
    }

    #[test]
    fn worker_streams_differ() {
        let a: u64 = worker_rng(9, 0).gen();
        let b: u64 = worker_rng(9, 1).gen();
        let c: u64 = worker_rng(10, 0).gen();
        assert_ne!(a, b);
        assert_eq!(b, c);
    }
}
