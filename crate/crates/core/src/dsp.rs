//! Classical spectral processing: Savitzky-Golay smoothing, asymmetric least-squares
//! baseline estimation and peak normalization.

use crate::error::{Error, Result};
use crate::hypercube::{HyperCube, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SgParams {
    pub order: usize,
    pub frame: usize,
}

impl SgParams {
    pub fn new(order: usize, frame: usize) -> Result<Self> {
        let p = Self { order, frame };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame < 3 || self.frame.is_multiple_of(2) {
            return Err(Error::Param(format!(
                "frame must be odd and >= 3, got {}",
                self.frame
            )));
        }
        if self.order >= self.frame {
            return Err(Error::Param(format!(
                "order {} must be below frame {}",
                self.order, self.frame
            )));
        }
        Ok(())
    }
}

/// The comparison grid: orders 1..=5 × frames {5, 7, 9, 11, 13}, skipping the one
/// invalid pair (order 5, frame 5).
pub fn sg_grid() -> Vec<SgParams> {
    let mut grid = Vec::with_capacity(24);
    for order in 1..=5 {
        for frame in [5, 7, 9, 11, 13] {
            if order < frame {
                grid.push(SgParams { order, frame });
            }
        }
    }
    grid
}

/// Gram polynomial `P_k` of the (2m+1)-point grid evaluated at `t`, via the
/// three-term recurrence.
fn gram_poly(t: f64, m: usize, k: usize) -> f64 {
    let m2 = 2.0 * m as f64;
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 1..=k {
        let jf = j as f64;
        let a = (4.0 * jf - 2.0) / (jf * (m2 - jf + 1.0));
        let b = ((jf - 1.0) * (m2 + jf)) / (jf * (m2 - jf + 1.0));
        let next = a * t * cur - b * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// (2k+1) (2m)^(k) / (2m+k+1)^(k+1), with a^(b) the falling factorial.
fn gram_weight(m: usize, k: usize) -> f64 {
    let two_m = 2 * m;
    let mut w = (2 * k + 1) as f64 / (two_m + k + 1 - k) as f64;
    for j in 0..k {
        w *= (two_m - j) as f64 / (two_m + k + 1 - j) as f64;
    }
    w
}

/// Central-point smoothing weights of the least-squares polynomial fit.
pub fn sg_coefficients(params: SgParams) -> Result<Vec<f64>> {
    params.validate()?;
    let m = params.frame / 2;
    let weights = (0..params.frame)
        .map(|i| {
            let t = i as f64 - m as f64;
            (0..=params.order)
                .map(|k| gram_weight(m, k) * gram_poly(t, m, k) * gram_poly(0.0, m, k))
                .sum()
        })
        .collect();
    Ok(weights)
}

#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i as usize
}

/// Filters raw values; edges use mirror padding (reflection without repeating the edge sample).
pub fn sg_filter_values(values: &[f64], params: SgParams) -> Result<Vec<f64>> {
    let weights = sg_coefficients(params)?;
    if values.len() < params.frame {
        return Err(Error::Param(format!(
            "spectrum of length {} is shorter than frame {}",
            values.len(),
            params.frame
        )));
    }
    let m = (params.frame / 2) as isize;
    let n = values.len();
    Ok((0..n as isize)
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * values[mirror(i + j as isize - m, n)])
                .sum()
        })
        .collect())
}

pub fn sg_filter(s: &Spectrum, params: SgParams) -> Result<Spectrum> {
    s.with_values(sg_filter_values(s.values(), params)?)
}

/// Applies the filter independently to every pixel spectrum.
pub fn sg_filter_cube(cube: &HyperCube, params: SgParams) -> Result<HyperCube> {
    let mut data = Vec::with_capacity(cube.data().len());
    let mut buf = vec![0.0; cube.bands()];
    for p in 0..cube.pixels() {
        for (d, &v) in buf.iter_mut().zip(cube.pixel_at(p)) {
            *d = f64::from(v);
        }
        data.extend(sg_filter_values(&buf, params)?.into_iter().map(|v| v as f32));
    }
    cube.with_data(data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    /// Penalty weight λ on the second difference.
    pub smoothness: f64,
    /// Weight p given to points above the current baseline.
    pub asymmetry: f64,
    pub iterations: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            smoothness: 1e5,
            asymmetry: 0.01,
            iterations: 10,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothness.is_finite() && self.smoothness > 0.0) {
            return Err(Error::Param(format!("smoothness must be > 0, got {}", self.smoothness)));
        }
        if !(self.asymmetry > 0.0 && self.asymmetry < 1.0) {
            return Err(Error::Param(format!(
                "asymmetry must lie in (0, 1), got {}",
                self.asymmetry
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Param("iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Solves (W + λ DᵀD) z = W y where D is the second-difference operator. The
/// system matrix is symmetric positive definite with half-bandwidth 2; this is
/// a banded Cholesky factorization.
fn solve_penalized(weights: &[f64], y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    // Diagonals of DᵀD: main, first and second off-diagonal.
    let mut d0 = vec![0.0; n];
    let mut d1 = vec![0.0; n.saturating_sub(1)];
    let mut d2 = vec![0.0; n.saturating_sub(2)];
    for i in 0..n.saturating_sub(2) {
        // Row i of D is (1, -2, 1) at columns i, i+1, i+2.
        let c = [1.0, -2.0, 1.0];
        for a in 0..3 {
            d0[i + a] += c[a] * c[a];
        }
        d1[i] += c[0] * c[1];
        d1[i + 1] += c[1] * c[2];
        d2[i] += c[0] * c[2];
    }
    let a0: Vec<f64> = (0..n).map(|i| weights[i] + lambda * d0[i]).collect();
    let a1: Vec<f64> = d1.iter().map(|v| lambda * v).collect();
    let a2: Vec<f64> = d2.iter().map(|v| lambda * v).collect();

    // L has unit-free lower band (l0 diag, l1, l2).
    let mut l0 = vec![0.0; n];
    let mut l1 = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    for i in 0..n {
        if i >= 2 {
            l2[i] = a2[i - 2] / l0[i - 2];
        }
        if i >= 1 {
            let mut v = a1[i - 1];
            if i >= 2 {
                v -= l2[i] * l1[i - 1];
            }
            l1[i] = v / l0[i - 1];
        }
        let mut diag = a0[i] - l1[i] * l1[i] - l2[i] * l2[i];
        if diag <= 0.0 {
            diag = f64::MIN_POSITIVE;
        }
        l0[i] = diag.sqrt();
    }
    let mut z: Vec<f64> = (0..n).map(|i| weights[i] * y[i]).collect();
    for i in 0..n {
        let mut v = z[i];
        if i >= 1 {
            v -= l1[i] * z[i - 1];
        }
        if i >= 2 {
            v -= l2[i] * z[i - 2];
        }
        z[i] = v / l0[i];
    }
    for i in (0..n).rev() {
        let mut v = z[i];
        if i + 1 < n {
            v -= l1[i + 1] * z[i + 1];
        }
        if i + 2 < n {
            v -= l2[i + 2] * z[i + 2];
        }
        z[i] = v / l0[i];
    }
    z
}

/// Asymmetric least-squares baseline of raw values.
pub fn estimate_baseline_values(values: &[f64], params: BaselineParams) -> Result<Vec<f64>> {
    params.validate()?;
    let n = values.len();
    if n < 3 {
        return Ok(values.to_vec());
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w = vec![1.0; n];
    let mut z = Vec::new();
    for _ in 0..params.iterations {
        z = solve_penalized(&w, values, params.smoothness);
        for i in 0..n {
            w[i] = if values[i] > z[i] {
                params.asymmetry
            } else {
                1.0 - params.asymmetry
            };
        }
    }
    Ok(z.into_iter().map(|v| v.min(max)).collect())
}

pub fn estimate_baseline(s: &Spectrum, params: BaselineParams) -> Result<Spectrum> {
    s.with_values(estimate_baseline_values(s.values(), params)?)
}

/// Subtracts the estimated baseline from every pixel.
pub fn subtract_baseline_cube(cube: &HyperCube, params: BaselineParams) -> Result<HyperCube> {
    let mut data = Vec::with_capacity(cube.data().len());
    for p in 0..cube.pixels() {
        let px: Vec<f64> = cube.pixel_at(p).iter().map(|&v| f64::from(v)).collect();
        let base = estimate_baseline_values(&px, params)?;
        data.extend(px.iter().zip(&base).map(|(v, b)| (v - b) as f32));
    }
    cube.with_data(data)
}

/// Scales a spectrum so its maximum is 1.
pub fn normalize_peak(s: &Spectrum) -> Result<Spectrum> {
    let max = s.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::Value(format!(
            "cannot normalize a spectrum whose maximum is {max}"
        )));
    }
    s.with_values(s.values().iter().map(|v| v / max).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn known_coefficients() {
        let c = sg_coefficients(SgParams::new(1, 3).unwrap()).unwrap();
        assert!(close(&c, &[1.0 / 3.0; 3], 1e-14));
        let c = sg_coefficients(SgParams::new(2, 5).unwrap()).unwrap();
        let expect: Vec<f64> = [-3.0, 12.0, 17.0, 12.0, -3.0].iter().map(|v| v / 35.0).collect();
        assert!(close(&c, &expect, 1e-14));
    }

    #[test]
    fn interpolating_fit_is_delta() {
        for frame in [3, 5, 7, 9, 11, 13, 15] {
            let c = sg_coefficients(SgParams::new(frame - 1, frame).unwrap()).unwrap();
            let mut delta = vec![0.0; frame];
            delta[frame / 2] = 1.0;
            assert!(close(&c, &delta, 1e-10), "frame {frame}: {c:?}");
        }
    }

    #[test]
    fn invalid_params() {
        assert!(matches!(SgParams::new(1, 4), Err(Error::Param(_))));
        assert!(matches!(SgParams::new(5, 5), Err(Error::Param(_))));
        assert!(matches!(SgParams::new(0, 1), Err(Error::Param(_))));
        let bad = SgParams { order: 3, frame: 3 };
        assert!(sg_coefficients(bad).is_err());
    }

    #[test]
    fn ramp_and_constant_are_fixed_points() {
        let ramp: Vec<f64> = (0..40).map(|i| 0.5 * i as f64 - 3.0).collect();
        for order in 1..=4 {
            for frame in [5, 7, 9] {
                let p = SgParams::new(order, frame).unwrap();
                let out = sg_filter_values(&ramp, p).unwrap();
                let m = frame / 2;
                assert!(close(&out[m..40 - m], &ramp[m..40 - m], 1e-11));
            }
        }
        let flat = vec![4.25; 20];
        let out = sg_filter_values(&flat, SgParams::new(2, 7).unwrap()).unwrap();
        assert!(close(&out, &flat, 1e-12));
    }

    #[test]
    fn quadratic_fixed_on_interior() {
        let q: Vec<f64> = (0..30).map(|i| {
            let x = i as f64;
            0.1 * x * x - 2.0 * x + 7.0
        }).collect();
        let out = sg_filter_values(&q, SgParams::new(2, 5).unwrap()).unwrap();
        assert!(close(&out[2..28], &q[2..28], 1e-10));
    }

    #[test]
    fn short_spectrum_rejected() {
        let s = Spectrum::from_values(vec![1.0; 4]).unwrap();
        assert!(matches!(sg_filter(&s, SgParams::new(1, 5).unwrap()), Err(Error::Param(_))));
    }

    #[test]
    fn filter_keeps_axis() {
        let s = Spectrum::new((0..9).map(|i| 600.0 + i as f64).collect(), vec![1.0; 9]).unwrap();
        let out = sg_filter(&s, SgParams::new(1, 3).unwrap()).unwrap();
        assert_eq!(out.axis(), s.axis());
    }

    #[test]
    fn grid_has_24_members() {
        let g = sg_grid();
        assert_eq!(g.len(), 24);
        assert!(g.iter().all(|p| p.validate().is_ok()));
    }

    #[test]
    fn flat_baseline_is_flat() {
        let y = vec![3.5; 200];
        let z = estimate_baseline_values(&y, BaselineParams::default()).unwrap();
        assert!(close(&z, &y, 1e-6));
    }

    #[test]
    fn baseline_is_translation_equivariant_for_slopes() {
        let mut y: Vec<f64> = (0..150).map(|i| 2.0 + ((i as f64) * 0.3).sin() * 0.1).collect();
        y[70] += 5.0;
        let slope: Vec<f64> = (0..150).map(|i| 0.01 * i as f64 - 0.4).collect();
        let ys: Vec<f64> = y.iter().zip(&slope).map(|(a, b)| a + b).collect();
        let p = BaselineParams::default();
        let z = estimate_baseline_values(&y, p).unwrap();
        let zs = estimate_baseline_values(&ys, p).unwrap();
        for i in 0..150 {
            assert!((zs[i] - z[i] - slope[i]).abs() < 1e-6, "i={i}");
        }
    }

    #[test]
    fn baseline_params_validated() {
        let s = Spectrum::from_values(vec![1.0; 10]).unwrap();
        for bad in [
            BaselineParams { smoothness: 0.0, ..Default::default() },
            BaselineParams { asymmetry: 1.0, ..Default::default() },
            BaselineParams { iterations: 0, ..Default::default() },
        ] {
            assert!(matches!(estimate_baseline(&s, bad), Err(Error::Param(_))));
        }
    }

    #[test]
    fn normalize_cases() {
        let s = Spectrum::from_values(vec![2.0, 4.0, 8.0]).unwrap();
        let n = normalize_peak(&s).unwrap();
        assert_eq!(n.values(), &[0.25, 0.5, 1.0]);
        assert_eq!(normalize_peak(&n).unwrap(), n);
        let z = Spectrum::from_values(vec![0.0; 3]).unwrap();
        assert!(matches!(normalize_peak(&z), Err(Error::Value(_))));
    }
}
