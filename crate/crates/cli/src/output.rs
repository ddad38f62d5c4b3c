use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde_json::{Map, Value};

use ramanhs::neural::EpochLog;
use ramanhs::{LabelMap, Plane};

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Flat metrics report written as `report.json` and `report.txt` (key=value lines).
#[derive(Debug, Default)]
pub struct Report(Map<String, Value>);

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.0.insert(key.into(), value.into());
    }

    pub fn key_values(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}={s}\n"),
                other => format!("{k}={other}\n"),
            })
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        create_dir(dir)?;
        let json = serde_json::to_string_pretty(&self.0).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_text(&dir.join("report.json"), &(json + "\n"))?;
        write_text(&dir.join("report.txt"), &self.key_values())
    }
}

fn write_gray(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| io_err(path, e))?;
    w.write_image_data(pixels).map_err(|e| io_err(path, e))
}

/// 8-bit grayscale PNG, min to 0 and max to 255, plus a `.txt` sidecar with the scale.
pub fn write_heatmap(path: &Path, plane: &Plane) -> Result<(), CliError> {
    let (lo, hi) = plane.min_max();
    let span = hi - lo;
    let mut pixels = Vec::with_capacity(plane.height * plane.width);
    for r in 0..plane.height {
        for c in 0..plane.width {
            let v = if span > 0.0 { (plane.get(r, c) - lo) / span } else { 0.0 };
            pixels.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    write_gray(path, plane.width, plane.height, &pixels)?;
    let sidecar = format!("min={lo:e}\nmax={hi:e}\ngray_0=min\ngray_255=max\n");
    write_text(&path.with_extension("txt"), &sidecar)
}

/// Label `l` of `k` is drawn as gray level `round(255 l / (k - 1))`.
pub fn write_labels(path: &Path, labels: &LabelMap, k: usize) -> Result<(), CliError> {
    let step = if k > 1 { 255.0 / (k - 1) as f64 } else { 0.0 };
    let mut pixels = Vec::with_capacity(labels.height * labels.width);
    for r in 0..labels.height {
        for c in 0..labels.width {
            pixels.push((labels.get(r, c) as f64 * step).round() as u8);
        }
    }
    write_gray(path, labels.width, labels.height, &pixels)?;
    write_text(&path.with_extension("txt"), &format!("classes={k}\ngray_step={step}\n"))
}

pub fn loss_csv(history: &[EpochLog]) -> String {
    let mut s = String::from("epoch,train_l1,val_l1,lr\n");
    for h in history {
        s.push_str(&format!("{},{:e},{:e},{:e}\n", h.epoch, h.train_l1, h.val_l1, h.lr));
    }
    s
}
