//! Raster decimation and the nearest-neighbour / bicubic upsampling baselines.
//!
//! All mappings are top-left aligned: low-resolution pixel (i, j) sits at
//! high-resolution position (s·i, s·j).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercube::{AcquisitionMeta, HyperCube, Plane};

/// Integer spatial scale factor, restricted to 2, 3 or 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ScaleFactor(u32);

impl ScaleFactor {
    pub const X2: ScaleFactor = ScaleFactor(2);
    pub const X3: ScaleFactor = ScaleFactor(3);
    pub const X4: ScaleFactor = ScaleFactor(4);

    pub fn new(s: u32) -> Result<Self> {
        match s {
            2..=4 => Ok(Self(s)),
            _ => Err(Error::Param(format!("scale factor must be 2, 3 or 4, got {s}"))),
        }
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u32> for ScaleFactor {
    type Error = Error;
    fn try_from(s: u32) -> Result<Self> {
        Self::new(s)
    }
}

impl From<ScaleFactor> for u32 {
    fn from(s: ScaleFactor) -> u32 {
        s.0
    }
}

impl std::fmt::Display for ScaleFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn coarser_meta(meta: &AcquisitionMeta, s: usize) -> AcquisitionMeta {
    AcquisitionMeta {
        pixel_pitch: meta.pixel_pitch * s as f64,
        ..meta.clone()
    }
}

pub(crate) fn finer_meta(meta: &AcquisitionMeta, s: usize) -> AcquisitionMeta {
    AcquisitionMeta {
        pixel_pitch: meta.pixel_pitch / s as f64,
        ..meta.clone()
    }
}

/// Keeps every s-th pixel in both directions, starting at (0, 0).
pub fn decimate(cube: &HyperCube, s: ScaleFactor) -> Result<HyperCube> {
    let s = s.get();
    if cube.height() < s || cube.width() < s {
        return Err(Error::Shape(format!(
            "{}x{} cube is smaller than scale factor {s}",
            cube.height(),
            cube.width()
        )));
    }
    let (h, w) = (cube.height().div_ceil(s), cube.width().div_ceil(s));
    let mut data = Vec::with_capacity(h * w * cube.bands());
    for i in 0..h {
        for j in 0..w {
            data.extend_from_slice(cube.pixel(s * i, s * j));
        }
    }
    cube.reshaped(h, w, data, coarser_meta(cube.meta(), s))
}

/// Plane version of [`decimate`].
pub fn decimate_plane(plane: &Plane, s: ScaleFactor) -> Result<Plane> {
    let s = s.get();
    let (h, w) = (plane.height.div_ceil(s), plane.width.div_ceil(s));
    let mut data = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            data.push(plane.get(s * i, s * j));
        }
    }
    Plane::new(h, w, data)
}

fn check_out_dims(cube: &HyperCube, s: usize, out_h: usize, out_w: usize) -> Result<()> {
    if out_h.div_ceil(s) != cube.height() || out_w.div_ceil(s) != cube.width() {
        return Err(Error::Shape(format!(
            "output {out_h}x{out_w} is inconsistent with {}x{} input at scale {s}",
            cube.height(),
            cube.width()
        )));
    }
    Ok(())
}

/// Output (i, j) copies input (⌊i/s⌋, ⌊j/s⌋). `out_h`/`out_w` must decimate back to the input size.
pub fn upsample_nearest(
    cube: &HyperCube,
    s: ScaleFactor,
    out_h: usize,
    out_w: usize,
) -> Result<HyperCube> {
    let s = s.get();
    check_out_dims(cube, s, out_h, out_w)?;
    let mut data = Vec::with_capacity(out_h * out_w * cube.bands());
    for i in 0..out_h {
        for j in 0..out_w {
            data.extend_from_slice(cube.pixel(i / s, j / s));
        }
    }
    cube.reshaped(out_h, out_w, data, finer_meta(cube.meta(), s))
}

pub const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel with a = -0.5.
pub fn keys_kernel(x: f64) -> f64 {
    let a = KEYS_A;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps and weights for one output coordinate; taps are clamped to `[0, n)`.
fn cubic_taps(out: usize, s: usize, n: usize) -> ([usize; 4], [f64; 4]) {
    let src = out as f64 / s as f64;
    let base = src.floor();
    let frac = src - base;
    let base = base as isize;
    let mut idx = [0usize; 4];
    let mut w = [0.0; 4];
    for (t, k) in (-1isize..=2).enumerate() {
        idx[t] = (base + k).clamp(0, n as isize - 1) as usize;
        w[t] = keys_kernel(frac - k as f64);
    }
    (idx, w)
}

/// Separable 2-D cubic convolution per band. Overshoot is not clamped.
pub fn upsample_bicubic(
    cube: &HyperCube,
    s: ScaleFactor,
    out_h: usize,
    out_w: usize,
) -> Result<HyperCube> {
    if cube.height() < 2 || cube.width() < 2 {
        return Err(Error::Shape(format!(
            "bicubic upsampling needs at least 2x2 input, got {}x{}",
            cube.height(),
            cube.width()
        )));
    }
    let s = s.get();
    check_out_dims(cube, s, out_h, out_w)?;
    let bands = cube.bands();
    let rows: Vec<_> = (0..out_h).map(|i| cubic_taps(i, s, cube.height())).collect();
    let cols: Vec<_> = (0..out_w).map(|j| cubic_taps(j, s, cube.width())).collect();

    // Horizontal pass into f64 (in_h × out_w × B), then vertical.
    let mut tmp = vec![0.0f64; cube.height() * out_w * bands];
    for r in 0..cube.height() {
        for (j, (cidx, cw)) in cols.iter().enumerate() {
            let dst = &mut tmp[(r * out_w + j) * bands..(r * out_w + j + 1) * bands];
            for t in 0..4 {
                let src = cube.pixel(r, cidx[t]);
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d += cw[t] * f64::from(v);
                }
            }
        }
    }
    let mut data = vec![0.0f32; out_h * out_w * bands];
    let mut acc = vec![0.0f64; bands];
    for (i, (ridx, rw)) in rows.iter().enumerate() {
        for j in 0..out_w {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for t in 0..4 {
                let src = &tmp[(ridx[t] * out_w + j) * bands..(ridx[t] * out_w + j + 1) * bands];
                for (a, &v) in acc.iter_mut().zip(src) {
                    *a += rw[t] * v;
                }
            }
            let dst = &mut data[(i * out_w + j) * bands..(i * out_w + j + 1) * bands];
            for (d, &a) in dst.iter_mut().zip(&acc) {
                *d = a as f32;
            }
        }
    }
    cube.reshaped(out_h, out_w, data, finer_meta(cube.meta(), s))
}
