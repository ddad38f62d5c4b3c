//! Synthetic Raman phantoms: Lorentzian component spectra, layered spatial layouts,
//! shot/read noise, and paired low/high-SNR, low/high-resolution datasets.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercube::{load_cube, save_cube, AcquisitionMeta, HyperCube, Spectrum, FINGERPRINT_RANGE};
use crate::resample::{decimate, ScaleFactor};
use crate::unmix::{classify_pixels, AbundanceCube, EndmemberSet, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Peak {
    pub const fn new(center: f64, width: f64, amplitude: f64) -> Self {
        Self {
            center,
            width,
            amplitude,
        }
    }

    /// amplitude·(w/2)² / ((ν − c)² + (w/2)²)
    pub fn eval(&self, nu: f64) -> f64 {
        let hw2 = (0.5 * self.width).powi(2);
        let d = nu - self.center;
        self.amplitude * hw2 / (d * d + hw2)
    }
}

/// Spatial support of a component, in pixel coordinates. Edges are soft over about
/// one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    Full,
    Disk { row: f64, col: f64, radius: f64 },
    Annulus { row: f64, col: f64, inner: f64, outer: f64 },
    Blob { row: f64, col: f64, sigma_row: f64, sigma_col: f64 },
}

fn soft_step(x: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * x).exp())
}

impl Layout {
    fn center(&self) -> Option<(f64, f64)> {
        match *self {
            Layout::Full => None,
            Layout::Disk { row, col, .. } | Layout::Annulus { row, col, .. } | Layout::Blob { row, col, .. } => {
                Some((row, col))
            }
        }
    }

    fn validate(&self, h: usize, w: usize) -> Result<()> {
        if let Some((r, c)) = self.center() {
            if !(r >= 0.0 && r <= (h - 1) as f64 && c >= 0.0 && c <= (w - 1) as f64) {
                return Err(Error::Param(format!(
                    "layout center ({r}, {c}) outside the {h}x{w} grid"
                )));
            }
        }
        let ok = match *self {
            Layout::Full => true,
            Layout::Disk { radius, .. } => radius > 0.0,
            Layout::Annulus { inner, outer, .. } => inner >= 0.0 && outer > inner,
            Layout::Blob { sigma_row, sigma_col, .. } => sigma_row > 0.0 && sigma_col > 0.0,
        };
        if !ok {
            return Err(Error::Param(format!("invalid layout extents: {self:?}")));
        }
        Ok(())
    }

    /// Coverage in [0, 1] at pixel (r, c).
    pub fn weight(&self, r: usize, c: usize) -> f64 {
        let (y, x) = (r as f64, c as f64);
        match *self {
            Layout::Full => 1.0,
            Layout::Disk { row, col, radius } => {
                let d = ((y - row).powi(2) + (x - col).powi(2)).sqrt();
                soft_step(radius - d)
            }
            Layout::Annulus { row, col, inner, outer } => {
                let d = ((y - row).powi(2) + (x - col).powi(2)).sqrt();
                soft_step(outer - d) * soft_step(d - inner)
            }
            Layout::Blob { row, col, sigma_row, sigma_col } => {
                let q = ((y - row) / sigma_row).powi(2) + ((x - col) / sigma_col).powi(2);
                (-0.5 * q).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub peaks: Vec<Peak>,
    pub layout: Layout,
}

impl ComponentSpec {
    pub fn new(name: impl Into<String>, peaks: Vec<Peak>, layout: Layout) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            peaks,
            layout,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.peaks.is_empty() {
            return Err(Error::Validation(format!("component {} has no peaks", self.name)));
        }
        for p in &self.peaks {
            if !(p.width > 0.0) || !(p.amplitude >= 0.0) || !p.center.is_finite() {
                return Err(Error::Validation(format!(
                    "component {}: bad peak {p:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Sum of the component's Lorentzian peaks on `axis`.
pub fn component_spectrum(spec: &ComponentSpec, axis: &[f64]) -> Result<Spectrum> {
    spec.validate()?;
    let values = axis
        .iter()
        .map(|&nu| spec.peaks.iter().map(|p| p.eval(nu)).sum())
        .collect();
    Spectrum::new(axis.to_vec(), values)
}

/// Evenly spaced axis over the fingerprint region.
pub fn fingerprint_axis(bands: usize) -> Vec<f64> {
    let (lo, hi) = FINGERPRINT_RANGE;
    let step = (hi - lo) / (bands.max(2) - 1) as f64;
    (0..bands).map(|i| lo + step * i as f64).collect()
}

/// Ground truth for a generated cube.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub clean: HyperCube,
    pub endmembers: EndmemberSet,
    pub abundances: AbundanceCube,
    pub labels: LabelMap,
    /// One pure pixel (flat index) per component, in component order.
    pub pure_pixels: Vec<usize>,
}

/// Smooth multiplicative intensity texture in roughly [0.75, 1.25].
fn texture(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let s: f64 = waves
                .iter()
                .map(|&(a, fr, fc, ph)| {
                    a * (std::f64::consts::TAU * (fr * r as f64 / h as f64 + fc * c as f64 / w as f64) + ph).cos()
                })
                .sum();
            out.push(1.0 + 0.25 * s / 3.0);
        }
    }
    out
}

/// Layers the components bottom-up (component 0 first) with alpha compositing, forces
/// one pure pixel per component, and applies a smooth random intensity texture.
pub fn gen_phantom(
    components: &[ComponentSpec],
    height: usize,
    width: usize,
    axis: &[f64],
    seed: u64,
) -> Result<Phantom> {
    let k = components.len();
    if k == 0 {
        return Err(Error::Param("phantom needs at least one component".into()));
    }
    if height == 0 || width == 0 {
        return Err(Error::Param("phantom grid must be non-empty".into()));
    }
    let n = height * width;
    if n < k {
        return Err(Error::Param(format!("{n} pixels cannot hold {k} pure pixels")));
    }
    for comp in components {
        comp.validate()?;
        comp.layout.validate(height, width)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut ab = vec![0.0; n * k];
    for (j, comp) in components.iter().enumerate() {
        for r in 0..height {
            for c in 0..width {
                let p = r * width + c;
                let m = comp.layout.weight(r, c);
                for v in &mut ab[p * k..(p + 1) * k] {
                    *v *= 1.0 - m;
                }
                ab[p * k + j] += m;
            }
        }
    }

    let mut pure = Vec::with_capacity(k);
    for j in 0..k {
        let mut best = None;
        for p in 0..n {
            if pure.contains(&p) {
                continue;
            }
            if best.is_none_or(|b: usize| ab[p * k + j] > ab[b * k + j]) {
                best = Some(p);
            }
        }
        let p = best.expect("n >= k leaves a free pixel");
        ab[p * k..(p + 1) * k].fill(0.0);
        ab[p * k + j] = 1.0;
        pure.push(p);
    }

    let tex = texture(height, width, &mut rng);
    for p in 0..n {
        for v in &mut ab[p * k..(p + 1) * k] {
            *v *= tex[p];
        }
    }

    let spectra: Vec<Vec<f64>> = components
        .iter()
        .map(|c| component_spectrum(c, axis).map(|s| s.values().to_vec()))
        .collect::<Result<_>>()?;
    let b = axis.len();
    let mut data = Vec::with_capacity(n * b);
    for p in 0..n {
        for band in 0..b {
            let v: f64 = (0..k).map(|j| ab[p * k + j] * spectra[j][band]).sum();
            data.push(v as f32);
        }
    }
    let clean = HyperCube::new(height, width, axis.to_vec(), data, AcquisitionMeta::default())?;
    let endmembers = EndmemberSet::new(
        DMatrix::from_fn(b, k, |i, j| spectra[j][i]),
        components.iter().map(|c| c.name.clone()).collect(),
    )?;
    let abundances = AbundanceCube::new(height, width, k, ab)?;
    let labels = classify_pixels(&abundances);
    Ok(Phantom {
        clean,
        endmembers,
        abundances,
        labels,
        pure_pixels: pure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub integration_time: f64,
    pub photon_rate_scale: f64,
    pub read_noise_sigma: f64,
}

impl NoiseModel {
    pub fn new(integration_time: f64, photon_rate_scale: f64, read_noise_sigma: f64) -> Result<Self> {
        let m = Self {
            integration_time,
            photon_rate_scale,
            read_noise_sigma,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.integration_time > 0.0 && self.photon_rate_scale > 0.0 && self.read_noise_sigma > 0.0) {
            return Err(Error::Param(format!("noise model parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

pub const DEFAULT_PHOTON_RATE: f64 = 200.0;
pub const DEFAULT_READ_NOISE: f64 = 1.0;

/// Poisson variate: CDF inversion below mean 50, rounded normal approximation above.
pub fn sample_poisson(mean: f64, rng: &mut impl Rng) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    if mean < 50.0 {
        let u: f64 = rng.gen();
        let mut k = 0u32;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / f64::from(k);
            cdf += p;
        }
        f64::from(k)
    } else {
        let z: f64 = StandardNormal.sample(rng);
        (mean + mean.sqrt() * z).round().max(0.0)
    }
}

/// Shot noise on rate·t·intensity counts plus Gaussian read noise, rescaled back to
/// intensity units. The output's integration time is set to the model's.
pub fn apply_noise(clean: &HyperCube, model: NoiseModel, seed: u64) -> Result<HyperCube> {
    model.validate()?;
    let gain = model.photon_rate_scale * model.integration_time;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = clean
        .data()
        .iter()
        .map(|&v| {
            let counts = sample_poisson(gain * f64::from(v).max(0.0), &mut rng);
            let read: f64 = StandardNormal.sample(&mut rng);
            ((counts + model.read_noise_sigma * read) / gain) as f32
        })
        .collect();
    let meta = AcquisitionMeta {
        integration_time: model.integration_time,
        ..clean.meta().clone()
    };
    HyperCube::new(clean.height(), clean.width(), clean.axis().to_vec(), data, meta)
}

/// Component libraries. `Cell` mimics cell imaging (DNA, protein, lipid bands);
/// `Tissue` is a second, distinct library used for transfer experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Cell,
    Tissue,
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell" => Ok(Domain::Cell),
            "tissue" => Ok(Domain::Tissue),
            _ => Err(Error::Param(format!("unknown domain {s:?} (expected cell or tissue)"))),
        }
    }
}

fn cell_library() -> Vec<(&'static str, Vec<Peak>)> {
    vec![
        ("background", vec![Peak::new(950.0, 500.0, 0.25), Peak::new(1450.0, 600.0, 0.2)]),
        (
            "nucleus",
            vec![
                Peak::new(795.0, 14.0, 1.0),
                Peak::new(1095.0, 18.0, 0.6),
                Peak::new(1340.0, 20.0, 0.5),
                Peak::new(1580.0, 16.0, 0.4),
            ],
        ),
        (
            "cytoplasm",
            vec![
                Peak::new(1004.0, 10.0, 1.0),
                Peak::new(1250.0, 30.0, 0.4),
                Peak::new(1450.0, 25.0, 0.6),
                Peak::new(1660.0, 30.0, 0.7),
            ],
        ),
        (
            "lipid",
            vec![
                Peak::new(1080.0, 20.0, 0.4),
                Peak::new(1300.0, 18.0, 0.9),
                Peak::new(1440.0, 20.0, 1.0),
                Peak::new(1660.0, 18.0, 0.6),
                Peak::new(1745.0, 14.0, 0.3),
            ],
        ),
        (
            "granule",
            vec![Peak::new(750.0, 12.0, 0.8), Peak::new(1128.0, 12.0, 0.6), Peak::new(1585.0, 12.0, 0.9)],
        ),
    ]
}

fn tissue_library() -> Vec<(&'static str, Vec<Peak>)> {
    vec![
        ("matrix", vec![Peak::new(1200.0, 700.0, 0.3)]),
        (
            "collagen",
            vec![
                Peak::new(855.0, 14.0, 0.7),
                Peak::new(938.0, 20.0, 0.6),
                Peak::new(1245.0, 22.0, 0.6),
                Peak::new(1450.0, 24.0, 0.8),
                Peak::new(1665.0, 28.0, 1.0),
            ],
        ),
        (
            "proteoglycan",
            vec![Peak::new(1063.0, 12.0, 1.0), Peak::new(1380.0, 20.0, 0.5), Peak::new(1410.0, 16.0, 0.4)],
        ),
        ("mineral", vec![Peak::new(960.0, 10.0, 1.0), Peak::new(1070.0, 14.0, 0.3)]),
    ]
}

/// Randomized layouts for a domain's component library on an h×w grid.
pub fn random_components(domain: Domain, height: usize, width: usize, seed: u64) -> Vec<ComponentSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f64, width as f64);
    let m = h.min(w);
    let mut jitter = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    let layouts: Vec<Layout> = match domain {
        Domain::Cell => {
            let (cr, cc) = (h * jitter(0.35, 0.65), w * jitter(0.35, 0.65));
            let cell_r = m * jitter(0.28, 0.4);
            let nuc_r = cell_r * jitter(0.35, 0.5);
            let angle = jitter(0.0, std::f64::consts::TAU);
            let lip_d = cell_r * jitter(0.55, 0.75);
            let g_angle = angle + jitter(2.0, 4.0);
            let g_d = cell_r * jitter(0.5, 0.7);
            let clamp = |v: f64, n: f64| v.clamp(0.0, n - 1.0);
            vec![
                Layout::Full,
                Layout::Disk {
                    row: clamp(cr, h),
                    col: clamp(cc, w),
                    radius: cell_r,
                },
                Layout::Disk {
                    row: clamp(cr + jitter(-0.2, 0.2) * nuc_r, h),
                    col: clamp(cc + jitter(-0.2, 0.2) * nuc_r, w),
                    radius: nuc_r,
                },
                Layout::Blob {
                    row: clamp(cr + lip_d * angle.sin(), h),
                    col: clamp(cc + lip_d * angle.cos(), w),
                    sigma_row: m * jitter(0.04, 0.08),
                    sigma_col: m * jitter(0.04, 0.08),
                },
                Layout::Blob {
                    row: clamp(cr + g_d * g_angle.sin(), h),
                    col: clamp(cc + g_d * g_angle.cos(), w),
                    sigma_row: m * jitter(0.03, 0.06),
                    sigma_col: m * jitter(0.03, 0.06),
                },
            ]
        }
        Domain::Tissue => {
            let (lr, lc) = (h * jitter(0.3, 0.7), w * jitter(0.3, 0.7));
            let outer = m * jitter(0.25, 0.35);
            vec![
                Layout::Full,
                Layout::Blob {
                    row: h * jitter(0.2, 0.8),
                    col: w * jitter(0.2, 0.8),
                    sigma_row: m * jitter(0.25, 0.4),
                    sigma_col: m * jitter(0.1, 0.2),
                },
                Layout::Annulus {
                    row: lr,
                    col: lc,
                    inner: outer * jitter(0.4, 0.6),
                    outer,
                },
                Layout::Disk {
                    row: h * jitter(0.1, 0.9),
                    col: w * jitter(0.1, 0.9),
                    radius: m * jitter(0.08, 0.14),
                },
            ]
        }
    };
    let library = match domain {
        Domain::Cell => cell_library(),
        Domain::Tissue => tissue_library(),
    };
    // The cell body carries the cytoplasm spectrum, the inner disk the nucleus.
    let order: Vec<usize> = match domain {
        Domain::Cell => vec![0, 2, 1, 3, 4],
        Domain::Tissue => vec![0, 1, 2, 3],
    };
    order
        .into_iter()
        .zip(layouts)
        .map(|(lib_idx, layout)| {
            let (name, peaks) = &library[lib_idx];
            ComponentSpec {
                name: (*name).to_string(),
                peaks: peaks.clone(),
                layout,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Train => 0x7472_6169_6e00_0001,
            Role::Val => 0x7661_6c00_0000_0002,
            Role::Test => 0x7465_7374_0000_0003,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-cube seed derived from the dataset seed, role, and index within the role.
pub fn derive_seed(seed: u64, role: Role, index: usize) -> u64 {
    splitmix64(splitmix64(seed ^ role.tag()).wrapping_add(index as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_cubes: usize,
    pub height: usize,
    pub width: usize,
    pub axis: Vec<f64>,
    pub scale: ScaleFactor,
    pub t_low: f64,
    pub t_high: f64,
    pub seed: u64,
    pub domain: Domain,
    pub photon_rate_scale: f64,
    pub read_noise_sigma: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl DatasetSpec {
    pub fn new(n_cubes: usize, size: usize, bands: usize, scale: ScaleFactor, seed: u64) -> Self {
        Self {
            n_cubes,
            height: size,
            width: size,
            axis: fingerprint_axis(bands),
            scale,
            t_low: 0.1,
            t_high: 1.0,
            seed,
            domain: Domain::Cell,
            photon_rate_scale: DEFAULT_PHOTON_RATE,
            read_noise_sigma: DEFAULT_READ_NOISE,
            val_fraction: 0.15,
            test_fraction: 0.15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cubes == 0 {
            return Err(Error::Param("dataset needs at least one cube".into()));
        }
        if self.height < self.scale.get() || self.width < self.scale.get() {
            return Err(Error::Param(format!(
                "cube size {}x{} is smaller than scale {}",
                self.height, self.width, self.scale
            )));
        }
        if !(self.t_low > 0.0 && self.t_low <= self.t_high) {
            return Err(Error::Param(format!(
                "need 0 < t_low <= t_high, got {} and {}",
                self.t_low, self.t_high
            )));
        }
        let fr = [self.val_fraction, self.test_fraction];
        if fr.iter().any(|f| !(0.0..1.0).contains(f)) || fr[0] + fr[1] >= 1.0 {
            return Err(Error::Param("val/test fractions must be in [0, 1) and sum below 1".into()));
        }
        NoiseModel::new(self.t_low, self.photon_rate_scale, self.read_noise_sigma)?;
        Ok(())
    }

    /// (train, val, test) counts.
    pub fn role_counts(&self) -> (usize, usize, usize) {
        let n = self.n_cubes;
        let val = (n as f64 * self.val_fraction).round() as usize;
        let test = (n as f64 * self.test_fraction).round() as usize;
        let train = n.saturating_sub(val + test).max(1);
        let val = val.min(n - train);
        (train, val, n - train - val)
    }
}

/// One generated cube in all of its acquisition variants.
#[derive(Debug, Clone)]
pub struct Sample {
    pub role: Role,
    pub seed: u64,
    pub clean_hr: HyperCube,
    /// High-SNR (t_high) acquisition.
    pub noisy_hr: HyperCube,
    pub noisy_lr: HyperCube,
    pub clean_lr: HyperCube,
    /// Low-SNR (t_low) acquisition.
    pub low_snr_hr: HyperCube,
    pub low_snr_lr: HyperCube,
    pub endmembers: EndmemberSet,
    pub labels: LabelMap,
}

pub fn gen_sample(spec: &DatasetSpec, role: Role, seed: u64) -> Result<Sample> {
    let comps = random_components(spec.domain, spec.height, spec.width, seed);
    let phantom = gen_phantom(&comps, spec.height, spec.width, &spec.axis, seed.wrapping_add(1))?;
    let high = NoiseModel::new(spec.t_high, spec.photon_rate_scale, spec.read_noise_sigma)?;
    let low = NoiseModel::new(spec.t_low, spec.photon_rate_scale, spec.read_noise_sigma)?;
    let clean_hr = phantom.clean;
    let noisy_hr = apply_noise(&clean_hr, high, seed.wrapping_add(2))?;
    let low_snr_hr = apply_noise(&clean_hr, low, seed.wrapping_add(3))?;
    Ok(Sample {
        role,
        seed,
        noisy_lr: decimate(&noisy_hr, spec.scale)?,
        clean_lr: decimate(&clean_hr, spec.scale)?,
        low_snr_lr: decimate(&low_snr_hr, spec.scale)?,
        clean_hr,
        noisy_hr,
        low_snr_hr,
        endmembers: phantom.endmembers,
        labels: phantom.labels,
    })
}

pub fn gen_dataset(spec: &DatasetSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    let (train, val, test) = spec.role_counts();
    let mut out = Vec::with_capacity(spec.n_cubes);
    for (role, count) in [(Role::Train, train), (Role::Val, val), (Role::Test, test)] {
        for i in 0..count {
            out.push(gen_sample(spec, role, derive_seed(spec.seed, role, i))?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clean_hr: String,
    pub noisy_hr: String,
    pub noisy_lr: String,
    pub clean_lr: String,
    pub low_snr_hr: String,
    pub low_snr_lr: String,
    pub role: Role,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub pairs: Vec<ManifestEntry>,
    pub axis_file: String,
    pub scale: ScaleFactor,
    pub t_low: f64,
    pub t_high: f64,
    pub domain: Domain,
    pub seed: u64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes every sample as HRC1 files plus `axis.csv` and `manifest.json` into `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, spec: &DatasetSpec, samples: &[Sample]) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let axis_file = "axis.csv".to_string();
    let axis_text: String = spec.axis.iter().map(|v| format!("{v}\n")).collect();
    let axis_path = dir.join(&axis_file);
    fs::write(&axis_path, axis_text).map_err(|e| Error::io(&axis_path, e))?;

    let mut pairs = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let name = |field: &str| format!("cube{i:03}_{field}.hrc");
        let files = [
            ("clean_hr", &s.clean_hr),
            ("noisy_hr", &s.noisy_hr),
            ("noisy_lr", &s.noisy_lr),
            ("clean_lr", &s.clean_lr),
            ("low_snr_hr", &s.low_snr_hr),
            ("low_snr_lr", &s.low_snr_lr),
        ];
        for (field, cube) in files {
            save_cube(cube, dir.join(name(field)))?;
        }
        pairs.push(ManifestEntry {
            clean_hr: name("clean_hr"),
            noisy_hr: name("noisy_hr"),
            noisy_lr: name("noisy_lr"),
            clean_lr: name("clean_lr"),
            low_snr_hr: name("low_snr_hr"),
            low_snr_lr: name("low_snr_lr"),
            role: s.role,
            seed: s.seed,
        });
    }
    let manifest = Manifest {
        pairs,
        axis_file,
        scale: spec.scale,
        t_low: spec.t_low,
        t_high: spec.t_high,
        domain: spec.domain,
        seed: spec.seed,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Reads a manifest; returns it with the directory its relative paths resolve against.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<(Manifest, PathBuf)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((manifest, dir))
}

/// Loaded cubes of one manifest entry.
#[derive(Debug, Clone)]
pub struct LoadedPair {
    pub role: Role,
    pub seed: u64,
    pub clean_hr: HyperCube,
    pub noisy_hr: HyperCube,
    pub noisy_lr: HyperCube,
    pub clean_lr: HyperCube,
    pub low_snr_hr: HyperCube,
    pub low_snr_lr: HyperCube,
}

impl ManifestEntry {
    pub fn load(&self, dir: &Path) -> Result<LoadedPair> {
        Ok(LoadedPair {
            role: self.role,
            seed: self.seed,
            clean_hr: load_cube(dir.join(&self.clean_hr))?,
            noisy_hr: load_cube(dir.join(&self.noisy_hr))?,
            noisy_lr: load_cube(dir.join(&self.noisy_lr))?,
            clean_lr: load_cube(dir.join(&self.clean_lr))?,
            low_snr_hr: load_cube(dir.join(&self.low_snr_hr))?,
            low_snr_lr: load_cube(dir.join(&self.low_snr_lr))?,
        })
    }
}

impl From<Sample> for LoadedPair {
    fn from(s: Sample) -> Self {
        Self {
            role: s.role,
            seed: s.seed,
            clean_hr: s.clean_hr,
            noisy_hr: s.noisy_hr,
            noisy_lr: s.noisy_lr,
            clean_lr: s.clean_lr,
            low_snr_hr: s.low_snr_hr,
            low_snr_lr: s.low_snr_lr,
        }
    }
}
