//! Hyperspectral cube container, the `HRC1` on-disk format, and spectral/spatial accessors.
//!
//! Intensities are held as `f32` (the on-disk precision) so that a save/load cycle is
//! the identity. The wavenumber axis is `f64`.
//!
//! `HRC1` layout, all little-endian:
//!
//! | field             | type                 |
//! |-------------------|----------------------|
//! | magic             | `b"HRC1"`            |
//! | version           | u32 (= 1)            |
//! | height, width, bands | u32 × 3           |
//! | integration_time  | f64                  |
//! | pixel_pitch       | f64                  |
//! | label             | u32 length + UTF-8   |
//! | axis              | bands × f64          |
//! | data              | H·W·B × f32, (row, col, band) |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const HRC1_MAGIC: &[u8; 4] = b"HRC1";
pub const HRC1_VERSION: u32 = 1;

/// Fingerprint region used throughout the pipeline, in cm⁻¹.
pub const FINGERPRINT_RANGE: (f64, f64) = (600.0, 1800.0);

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionMeta {
    /// Seconds per spectrum.
    pub integration_time: f64,
    /// Micrometres per pixel.
    pub pixel_pitch: f64,
    pub label: String,
}

impl AcquisitionMeta {
    pub fn new(integration_time: f64, pixel_pitch: f64, label: impl Into<String>) -> Self {
        Self {
            integration_time,
            pixel_pitch,
            label: label.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.integration_time.is_finite() && self.integration_time > 0.0) {
            return Err(Error::Validation(format!(
                "integration_time must be positive, got {}",
                self.integration_time
            )));
        }
        if !(self.pixel_pitch.is_finite() && self.pixel_pitch > 0.0) {
            return Err(Error::Validation(format!(
                "pixel_pitch must be positive, got {}",
                self.pixel_pitch
            )));
        }
        Ok(())
    }
}

impl Default for AcquisitionMeta {
    fn default() -> Self {
        Self::new(1.0, 0.5, "")
    }
}

/// A single Raman spectrum aligned to a wavenumber axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    axis: Vec<f64>,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(axis: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if axis.len() != values.len() {
            return Err(Error::Validation(format!(
                "axis has {} points but values has {}",
                axis.len(),
                values.len()
            )));
        }
        if values.iter().chain(axis.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("spectrum contains non-finite values".into()));
        }
        Ok(Self { axis, values })
    }

    /// Builds a spectrum on an implicit `0..n` axis.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let axis = (0..values.len()).map(|i| i as f64).collect();
        Self::new(axis, values)
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same axis, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.axis.clone(), values)
    }
}

/// A 2-D scalar image (H×W), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "plane {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// H×W×B hyperspectral Raman image.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    axis: Vec<f64>,
    data: Vec<f32>,
    meta: AcquisitionMeta,
}

impl HyperCube {
    pub fn new(
        height: usize,
        width: usize,
        axis: Vec<f64>,
        data: Vec<f32>,
        meta: AcquisitionMeta,
    ) -> Result<Self> {
        let cube = Self {
            height,
            width,
            bands: axis.len(),
            axis,
            data,
            meta,
        };
        cube.validate()?;
        Ok(cube)
    }

    /// Builds a cube by evaluating `f(row, col, band)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        axis: Vec<f64>,
        meta: AcquisitionMeta,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let bands = axis.len();
        let mut data = Vec::with_capacity(height * width * bands);
        for r in 0..height {
            for c in 0..width {
                for b in 0..bands {
                    data.push(f(r, c, b));
                }
            }
        }
        Self::new(height, width, axis, data, meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Validation(format!(
                "cube must have at least one pixel, got {}x{}",
                self.height, self.width
            )));
        }
        if self.bands < 2 || self.axis.len() != self.bands {
            return Err(Error::Validation(format!(
                "cube needs at least 2 bands with a matching axis (bands {}, axis {})",
                self.bands,
                self.axis.len()
            )));
        }
        if self.axis.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("axis contains non-finite values".into()));
        }
        if let Some(k) = self.axis.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "axis is not strictly increasing at band {}",
                k + 1
            )));
        }
        let expected = self.height * self.width * self.bands;
        if self.data.len() != expected {
            return Err(Error::Validation(format!(
                "data has {} values, expected {expected}",
                self.data.len()
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite intensity at flat index {i}")));
        }
        self.meta.validate()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn meta(&self) -> &AcquisitionMeta {
        &self.meta
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, band: usize) -> usize {
        (row * self.width + col) * self.bands + band
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f32 {
        self.data[self.index(row, col, band)]
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.bands;
        &self.data[start..start + self.bands]
    }

    /// Pixel spectrum by flat pixel index.
    pub fn pixel_at(&self, p: usize) -> &[f32] {
        &self.data[p * self.bands..(p + 1) * self.bands]
    }

    pub fn spectrum(&self, row: usize, col: usize) -> Spectrum {
        Spectrum {
            axis: self.axis.clone(),
            values: self.pixel(row, col).iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn band_plane(&self, band: usize) -> Plane {
        let data = (0..self.pixels())
            .map(|p| f64::from(self.data[p * self.bands + band]))
            .collect();
        Plane {
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Same geometry and axis, replacement data.
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        Self::new(self.height, self.width, self.axis.clone(), data, self.meta.clone())
    }

    pub fn with_meta(mut self, meta: AcquisitionMeta) -> Result<Self> {
        meta.validate()?;
        self.meta = meta;
        Ok(self)
    }

    /// Reshapes spatially; `data` must be laid out (row, col, band).
    pub fn reshaped(
        &self,
        height: usize,
        width: usize,
        data: Vec<f32>,
        meta: AcquisitionMeta,
    ) -> Result<Self> {
        Self::new(height, width, self.axis.clone(), data, meta)
    }

    pub fn map_values(&self, mut f: impl FnMut(f32) -> f32) -> Result<Self> {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }
}

/// Serializes a cube to the `HRC1` byte layout. Validation happens before any
/// byte is produced.
pub fn encode_cube(cube: &HyperCube) -> Result<Vec<u8>> {
    cube.validate()?;
    let label = cube.meta.label.as_bytes();
    let mut out = Vec::with_capacity(
        4 + 16 + 16 + 4 + label.len() + 8 * cube.bands + 4 * cube.data.len(),
    );
    out.extend_from_slice(HRC1_MAGIC);
    out.extend_from_slice(&HRC1_VERSION.to_le_bytes());
    for dim in [cube.height, cube.width, cube.bands] {
        let dim = u32::try_from(dim)
            .map_err(|_| Error::Validation(format!("dimension {dim} exceeds u32")))?;
        out.extend_from_slice(&dim.to_le_bytes());
    }
    out.extend_from_slice(&cube.meta.integration_time.to_le_bytes());
    out.extend_from_slice(&cube.meta.pixel_pitch.to_le_bytes());
    let label_len = u32::try_from(label.len())
        .map_err(|_| Error::Validation("label too long".into()))?;
    out.extend_from_slice(&label_len.to_le_bytes());
    out.extend_from_slice(label);
    for v in &cube.axis {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &cube.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated file: need {n} bytes for {what} at offset {}, have {}",
                    self.pos,
                    self.bytes.len() - self.pos.min(self.bytes.len())
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses `HRC1` bytes.
pub fn decode_cube(bytes: &[u8]) -> Result<HyperCube> {
    let mut rd = Reader { bytes, pos: 0 };
    let magic = rd.take(4, "magic")?;
    if magic != HRC1_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected HRC1")));
    }
    let version = rd.u32("version")?;
    if version != HRC1_VERSION {
        return Err(Error::Format(format!("unsupported HRC1 version {version}")));
    }
    let height = rd.u32("height")? as usize;
    let width = rd.u32("width")? as usize;
    let bands = rd.u32("bands")? as usize;
    let integration_time = rd.f64("integration_time")?;
    let pixel_pitch = rd.f64("pixel_pitch")?;
    let label_len = rd.u32("label length")? as usize;
    let label = std::str::from_utf8(rd.take(label_len, "label")?)
        .map_err(|e| Error::Format(format!("label is not UTF-8: {e}")))?
        .to_owned();
    let axis_bytes = rd.take(
        bands
            .checked_mul(8)
            .ok_or_else(|| Error::Format("band count overflows".into()))?,
        "axis",
    )?;
    let axis = axis_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let count = height
        .checked_mul(width)
        .and_then(|p| p.checked_mul(bands))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let data = rd
        .take(count, "data")?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if rd.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - rd.pos
        )));
    }
    HyperCube::new(
        height,
        width,
        axis,
        data,
        AcquisitionMeta {
            integration_time,
            pixel_pitch,
            label,
        },
    )
}

pub fn save_cube(cube: &HyperCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_cube(cube)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HyperCube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}

/// Keeps exactly the bands with `lo <= axis[k] <= hi`.
pub fn crop_spectral(cube: &HyperCube, lo: f64, hi: f64) -> Result<HyperCube> {
    if !(lo < hi) {
        return Err(Error::Range(format!("crop bounds must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    let keep: Vec<usize> = (0..cube.bands)
        .filter(|&k| cube.axis[k] >= lo && cube.axis[k] <= hi)
        .collect();
    if keep.len() < 2 {
        return Err(Error::Range(format!(
            "[{lo}, {hi}] retains {} bands of axis [{}, {}]; need at least 2",
            keep.len(),
            cube.axis[0],
            cube.axis[cube.bands - 1]
        )));
    }
    // Retained bands are contiguous on an increasing axis.
    let (first, last) = (keep[0], keep[keep.len() - 1]);
    let axis = cube.axis[first..=last].to_vec();
    let mut data = Vec::with_capacity(cube.pixels() * axis.len());
    for p in 0..cube.pixels() {
        data.extend_from_slice(&cube.pixel_at(p)[first..=last]);
    }
    HyperCube::new(cube.height, cube.width, axis, data, cube.meta.clone())
}

/// Mean intensity per pixel over the bands inside `[center - half_width, center + half_width]`.
pub fn peak_intensity_map(cube: &HyperCube, center: f64, half_width: f64) -> Result<Plane> {
    let (lo, hi) = (center - half_width, center + half_width);
    let bands: Vec<usize> = (0..cube.bands)
        .filter(|&k| cube.axis[k] >= lo && cube.axis[k] <= hi)
        .collect();
    if bands.is_empty() {
        return Err(Error::Range(format!("no bands inside window [{lo}, {hi}]")));
    }
    let n = bands.len() as f64;
    let data = (0..cube.pixels())
        .map(|p| {
            let px = cube.pixel_at(p);
            bands.iter().map(|&k| f64::from(px[k])).sum::<f64>() / n
        })
        .collect();
    Plane::new(cube.height, cube.width, data)
}

/// Reads a two-column (wavenumber, intensity) text file. A non-numeric first line is
/// treated as a header; commas, semicolons, tabs and spaces all separate columns.
pub fn load_spectrum_csv(path: impl AsRef<Path>) -> Result<Spectrum> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spectrum_csv(&text)
}

pub fn parse_spectrum_csv(text: &str) -> Result<Spectrum> {
    let mut axis = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(nums) if nums.len() == 2 => {
                axis.push(nums[0]);
                values.push(nums[1]);
            }
            None if axis.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::Format(format!(
                    "line {}: expected two numeric columns, got {line:?}",
                    lineno + 1
                )))
            }
        }
    }
    if axis.is_empty() {
        return Err(Error::Format("no spectral rows found".into()));
    }
    Spectrum::new(axis, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn sample_cube() -> HyperCube {
        HyperCube::from_fn(3, 4, axis(5, 600.0, 1800.0), AcquisitionMeta::new(0.1, 0.5, "cell µ"), |r, c, b| {
            (r * 100 + c * 10 + b) as f32 * 0.25
        })
        .unwrap()
    }

    #[test]
    fn roundtrip_is_identity_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.hrc"), dir.path().join("b.hrc"));
        let cube = sample_cube();
        save_cube(&cube, &p1).unwrap();
        save_cube(&cube, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(load_cube(&p1).unwrap(), cube);
    }

    #[test]
    fn header_layout() {
        let bytes = encode_cube(&sample_cube()).unwrap();
        assert_eq!(&bytes[0..4], b"HRC1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 5);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 0.1);
        assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), 0.5);
        let label_len = u32::from_le_bytes(bytes[36..40].try_into().unwrap()) as usize;
        assert_eq!(&bytes[40..40 + label_len], "cell µ".as_bytes());
        assert_eq!(bytes.len(), 40 + label_len + 5 * 8 + 3 * 4 * 5 * 4);
    }

    #[test]
    fn short_file_is_format_error() {
        assert!(matches!(decode_cube(b"HRC1\x01\x00\x00"), Err(Error::Format(_))));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode_cube(&sample_cube()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_cube(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn missing_payload_is_format_error() {
        let bytes = encode_cube(&sample_cube()).unwrap();
        let cut = &bytes[..bytes.len() - 4];
        assert!(matches!(decode_cube(cut), Err(Error::Format(_))));
    }

    #[test]
    fn non_increasing_axis_is_validation_error() {
        let mut bytes = encode_cube(&sample_cube()).unwrap();
        let label_len = u32::from_le_bytes(bytes[36..40].try_into().unwrap()) as usize;
        let axis_at = 40 + label_len + 8; // second axis value
        bytes[axis_at..axis_at + 8].copy_from_slice(&500.0f64.to_le_bytes());
        assert!(matches!(decode_cube(&bytes), Err(Error::Validation(_))));
    }

    #[test]
    fn nan_cube_fails_before_writing() {
        let mut cube = sample_cube();
        cube.data[3] = f32::NAN;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.hrc");
        assert!(matches!(save_cube(&cube, &path), Err(Error::Validation(_))));
        assert!(!path.exists());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = save_cube(&sample_cube(), "/nonexistent-dir/x/y.hrc").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn construction_rejects_broken_invariants() {
        let meta = AcquisitionMeta::default();
        assert!(HyperCube::new(1, 1, vec![1.0], vec![0.0], meta.clone()).is_err());
        assert!(HyperCube::new(1, 1, vec![1.0, 2.0], vec![0.0], meta.clone()).is_err());
        assert!(HyperCube::new(0, 1, vec![1.0, 2.0], vec![], meta.clone()).is_err());
        let bad_meta = AcquisitionMeta::new(0.0, 0.5, "");
        assert!(HyperCube::new(1, 1, vec![1.0, 2.0], vec![0.0, 0.0], bad_meta).is_err());
    }

    #[test]
    fn fingerprint_crop_keeps_closed_interval() {
        let ax = axis(371, 0.0, 3700.0);
        let cube = HyperCube::from_fn(2, 2, ax, AcquisitionMeta::default(), |_, _, b| b as f32).unwrap();
        let cropped = crop_spectral(&cube, 600.0, 1800.0).unwrap();
        assert!(cropped.axis().iter().all(|&v| (600.0..=1800.0).contains(&v)));
        // Both endpoints sit exactly on the 10 cm⁻¹ grid.
        assert_eq!(cropped.axis()[0], 600.0);
        assert_eq!(*cropped.axis().last().unwrap(), 1800.0);
        assert_eq!(cropped.bands(), 121);
        assert_eq!(cropped.get(1, 1, 0), 60.0);
        assert_eq!(crop_spectral(&cropped, 600.0, 1800.0).unwrap(), cropped);
    }

    #[test]
    fn full_range_crop_is_identity() {
        let cube = sample_cube();
        assert_eq!(crop_spectral(&cube, 600.0, 1800.0).unwrap(), cube);
    }

    #[test]
    fn disjoint_crop_is_range_error() {
        let cube = HyperCube::from_fn(1, 1, axis(38, 0.0, 3700.0), AcquisitionMeta::default(), |_, _, _| 1.0)
            .unwrap();
        assert!(matches!(crop_spectral(&cube, 5000.0, 6000.0), Err(Error::Range(_))));
        assert!(matches!(crop_spectral(&cube, 10.0, 5.0), Err(Error::Range(_))));
    }

    #[test]
    fn peak_map_of_constant_cube() {
        let cube = HyperCube::from_fn(3, 2, axis(10, 600.0, 1800.0), AcquisitionMeta::default(), |_, _, _| 2.5)
            .unwrap();
        let map = peak_intensity_map(&cube, 1450.0, 100.0).unwrap();
        assert!(map.data.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn narrow_window_selects_single_band() {
        let cube = sample_cube();
        let map = peak_intensity_map(&cube, cube.axis()[2], 1.0).unwrap();
        assert_eq!(map, cube.band_plane(2));
    }

    #[test]
    fn peak_map_hand_computed() {
        // 2×2×3, axis (100, 200, 300); window [200, 300] averages bands 1 and 2.
        let values = [
            [1.0, 2.0, 4.0],
            [0.0, 6.0, 8.0],
            [3.0, 3.0, 3.0],
            [5.0, -1.0, 0.0],
        ];
        let data: Vec<f32> = values.iter().flatten().copied().collect();
        let cube = HyperCube::new(2, 2, vec![100.0, 200.0, 300.0], data, AcquisitionMeta::default()).unwrap();
        let map = peak_intensity_map(&cube, 250.0, 50.0).unwrap();
        assert_eq!(map.data, vec![3.0, 7.0, 3.0, -0.5]);
        let map = peak_intensity_map(&cube, 200.0, 50.0).unwrap();
        assert_eq!(map.data, vec![2.0, 6.0, 3.0, -1.0]);
        assert!(matches!(peak_intensity_map(&cube, 1000.0, 10.0), Err(Error::Range(_))));
    }

    #[test]
    fn csv_with_and_without_header() {
        let s = parse_spectrum_csv("wavenumber,intensity\n600,1.5\n610,2.5\n").unwrap();
        assert_eq!(s.axis(), &[600.0, 610.0]);
        assert_eq!(s.values(), &[1.5, 2.5]);
        let s = parse_spectrum_csv("600 1\n610\t2\n").unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);
        assert!(parse_spectrum_csv("600,1\nfoo,bar\n").is_err());
    }
}
