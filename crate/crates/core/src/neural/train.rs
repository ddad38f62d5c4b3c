//! L1 training with Adam, best-validation checkpointing, fine-tuning, and inference.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_pair, mixup, sample_mixup_lambda, AugmentPolicy, TrainingPair};
use crate::error::{Error, Result};
use crate::hypercube::{AcquisitionMeta, HyperCube};
use crate::resample::finer_meta;

use super::checkpoint::{AdamMoments, Checkpoint, Provenance};
use super::graph::Graph;
use super::model::{ArchConfig, Model};
use super::optim::{adam_step, AdamConfig, Scheduler};
use super::params::round_f32;
use super::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub max_lr: f64,
    pub scheduler: Scheduler,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Training samples per epoch (spectra for denoising, crops for super-resolution);
    /// `None` uses the whole training split once.
    pub epoch_size: Option<usize>,
    /// Fraction held out for validation when no validation set is given.
    pub val_fraction: f64,
    /// Cap on validation samples (spectra or cubes), drawn once with the seed.
    pub max_val_samples: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 32,
            max_lr: 5e-4,
            scheduler: Scheduler::OneCycle,
            seed: 0,
            adam: AdamConfig::default(),
            epoch_size: None,
            val_fraction: 0.1,
            max_val_samples: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epoch_size == Some(0) {
            return Err(Error::Config("batch and epoch sizes must be positive".into()));
        }
        if !(self.max_lr > 0.0) {
            return Err(Error::Config(format!("max_lr must be positive, got {}", self.max_lr)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("val_fraction must lie in [0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_l1: f64,
    pub val_l1: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights with the lowest validation L1 (the initialization when `epochs == 0`).
    pub best: Checkpoint,
    /// Weights and optimizer state after the final epoch.
    pub last: Checkpoint,
    pub best_epoch: usize,
    pub initial_val_l1: f64,
    pub history: Vec<EpochLog>,
}

fn cube_scale(cube: &HyperCube) -> f64 {
    let m = f64::from(cube.max_value());
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

fn scaled(cube: &HyperCube, k: f64) -> Result<HyperCube> {
    cube.map_values(|v| (f64::from(v) / k) as f32)
}

/// Divides input and target by the input cube's maximum.
fn normalize_pair(p: &TrainingPair) -> Result<TrainingPair> {
    let k = cube_scale(&p.input);
    Ok(TrainingPair {
        input: scaled(&p.input, k)?,
        target: scaled(&p.target, k)?,
        scale: p.scale,
    })
}

fn f64s(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// One spectrum pair (already normalized).
#[derive(Clone)]
struct SpecPair {
    input: Vec<f64>,
    target: Vec<f64>,
}

enum Data {
    Denoise { train: Vec<SpecPair>, val: Vec<SpecPair>, axis: Vec<f64> },
    SuperRes { train: Vec<TrainingPair>, val: Vec<TrainingPair> },
}

fn spectra_of(pairs: &[TrainingPair]) -> Result<Vec<SpecPair>> {
    let mut out = Vec::new();
    for p in pairs {
        let n = normalize_pair(p)?;
        for i in 0..n.input.pixels() {
            out.push(SpecPair {
                input: f64s(n.input.pixel_at(i)),
                target: f64s(n.target.pixel_at(i)),
            });
        }
    }
    Ok(out)
}

fn take_val<T: Clone>(mut v: Vec<T>, cap: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<T> {
    if let Some(c) = cap {
        if v.len() > c {
            v.shuffle(rng);
            v.truncate(c);
        }
    }
    v
}

fn check_data(arch: &ArchConfig, train: &[TrainingPair], val: Option<&[TrainingPair]>) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    for p in train.iter().chain(val.unwrap_or(&[])) {
        match arch {
            ArchConfig::Resunet1d(c) => {
                if p.scale != 1 || p.input.bands() != c.in_len {
                    return Err(Error::Config(format!(
                        "denoiser expects {}-band same-size pairs, got {} bands at scale {}",
                        c.in_len,
                        p.input.bands(),
                        p.scale
                    )));
                }
            }
            ArchConfig::Hyrisr(c) => {
                if p.scale != c.scale || p.input.bands() != c.bands {
                    return Err(Error::Config(format!(
                        "super-resolution model expects {} bands at scale {}, got {} bands at scale {}",
                        c.bands,
                        c.scale,
                        p.input.bands(),
                        p.scale
                    )));
                }
            }
        }
    }
    Ok(())
}

fn prepare(arch: &ArchConfig, train: &[TrainingPair], val: Option<&[TrainingPair]>, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Data> {
    check_data(arch, train, val)?;
    match arch {
        ArchConfig::Resunet1d(_) => {
            let axis = train[0].input.axis().to_vec();
            let (tr, va) = match val {
                Some(v) => (spectra_of(train)?, spectra_of(v)?),
                None => {
                    let mut all = spectra_of(train)?;
                    all.shuffle(rng);
                    let n_val = (all.len() as f64 * cfg.val_fraction).round() as usize;
                    let n_val = n_val.min(all.len() - 1);
                    let tr = all.split_off(n_val);
                    (tr, all)
                }
            };
            let va = take_val(va, cfg.max_val_samples, rng);
            Ok(Data::Denoise { train: tr, val: va, axis })
        }
        ArchConfig::Hyrisr(_) => {
            let norm = |ps: &[TrainingPair]| ps.iter().map(normalize_pair).collect::<Result<Vec<_>>>();
            let (tr, va) = match val {
                Some(v) => (norm(train)?, norm(v)?),
                None => {
                    let mut all = norm(train)?;
                    all.shuffle(rng);
                    let n_val = (all.len() as f64 * cfg.val_fraction).round() as usize;
                    let n_val = n_val.min(all.len() - 1);
                    let tr = all.split_off(n_val);
                    (tr, all)
                }
            };
            let va = take_val(va, cfg.max_val_samples, rng);
            Ok(Data::SuperRes { train: tr, val: va })
        }
    }
}

/// Batch of spectra as [N, 1, 1, padded] with zero padding.
fn spectra_tensor(rows: &[&[f64]], padded: usize) -> Tensor {
    let mut data = vec![0.0; rows.len() * padded];
    for (r, row) in rows.iter().enumerate() {
        data[r * padded..r * padded + row.len()].copy_from_slice(row);
    }
    Tensor {
        shape: vec![rows.len(), 1, 1, padded],
        data,
    }
}

fn cube_tensor(cube: &HyperCube) -> Tensor {
    let (h, w, b) = (cube.height(), cube.width(), cube.bands());
    let mut data = vec![0.0; h * w * b];
    for p in 0..h * w {
        for (k, &v) in cube.pixel_at(p).iter().enumerate() {
            data[k * h * w + p] = f64::from(v);
        }
    }
    Tensor {
        shape: vec![1, b, h, w],
        data,
    }
}

/// [1, B, H, W] (or a crop of it) back to interleaved cube order.
fn tensor_to_cube_data(t: &Tensor, h: usize, w: usize, scale: f64) -> Result<Vec<f32>> {
    let (_, b, th, tw) = t.dims4()?;
    if h > th || w > tw {
        return Err(Error::Shape(format!("cannot take {h}x{w} from a {th}x{tw} output")));
    }
    let mut out = Vec::with_capacity(h * w * b);
    for r in 0..h {
        for c in 0..w {
            for k in 0..b {
                out.push((t.data[(k * th + r) * tw + c] * scale) as f32);
            }
        }
    }
    Ok(out)
}

fn mean_l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

struct Optimizer {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
    cfg: AdamConfig,
}

impl Optimizer {
    fn new(model: &Model, cfg: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = model.params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            cfg,
        }
    }

    /// Adam update; parameters and moments are rounded to f32 afterwards so that
    /// checkpoints capture the exact training state.
    fn apply(&mut self, model: &mut Model, grads: &[Option<Vec<f64>>], lr: f64) -> Result<()> {
        self.step += 1;
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let p = &mut model.params.tensors[i].data;
            adam_step(p, g, &mut self.m[i], &mut self.v[i], lr, self.step, self.cfg)?;
            p.iter_mut().for_each(|x| *x = round_f32(*x));
            self.m[i].iter_mut().for_each(|x| *x = round_f32(*x));
            self.v[i].iter_mut().for_each(|x| *x = round_f32(*x));
        }
        Ok(())
    }

    fn moments(&self, model: &Model) -> AdamMoments {
        let mut m = model.params.zeros_like();
        let mut v = model.params.zeros_like();
        for i in 0..self.m.len() {
            m.tensors[i].data.clone_from(&self.m[i]);
            v.tensors[i].data.clone_from(&self.v[i]);
        }
        AdamMoments { m, v, step: self.step }
    }
}

fn denoise_len(model: &Model) -> Result<(usize, usize)> {
    let c = model
        .resunet_config()
        .ok_or_else(|| Error::Config("expected a ResUNet1d model".into()))?;
    Ok((c.in_len, c.padded_len()))
}

/// Evaluation-mode forward of a batch of spectra; returns [N, in_len] rows.
fn denoise_rows(model: &Model, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let (len, padded) = denoise_len(model)?;
    let mut g = Graph::new();
    let x = g.input(spectra_tensor(rows, padded));
    let (y, _) = model.forward(&mut g, x, false)?;
    let out = g.value(y);
    Ok(out.data.chunks(padded).map(|c| c[..len].to_vec()).collect())
}

fn sr_forward(model: &Model, input: &HyperCube, train: bool, g: &mut Graph) -> Result<super::graph::Var> {
    let x = g.input(cube_tensor(input));
    Ok(model.forward(g, x, train)?.0)
}

fn evaluate(model: &Model, data: &Data) -> Result<f64> {
    match data {
        Data::Denoise { val, .. } => {
            if val.is_empty() {
                return Ok(f64::NAN);
            }
            let mut total = 0.0;
            for chunk in val.chunks(256) {
                let rows: Vec<&[f64]> = chunk.iter().map(|s| s.input.as_slice()).collect();
                let out = denoise_rows(model, &rows)?;
                for (o, s) in out.iter().zip(chunk) {
                    total += mean_l1(o, &s.target);
                }
            }
            Ok(total / val.len() as f64)
        }
        Data::SuperRes { val, .. } => {
            if val.is_empty() {
                return Ok(f64::NAN);
            }
            let mut total = 0.0;
            for p in val {
                let mut g = Graph::new();
                let y = sr_forward(model, &p.input, false, &mut g)?;
                let t = p.target.height();
                let w = p.target.width();
                let pred = tensor_to_cube_data(g.value(y), t, w, 1.0)?;
                total += mean_l1(&f64s(&pred), &f64s(p.target.data()));
            }
            Ok(total / val.len() as f64)
        }
    }
}

fn spec_cube(values: &[f64], axis: &[f64]) -> Result<HyperCube> {
    HyperCube::new(1, 1, axis.to_vec(), values.iter().map(|&v| v as f32).collect(), AcquisitionMeta::default())
}

/// Spectral augmentation and optional mixup for one spectrum pair.
fn augment_spectrum(
    s: &SpecPair,
    pool: &[SpecPair],
    axis: &[f64],
    policy: &AugmentPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<SpecPair> {
    let spectral_only = AugmentPolicy {
        crop_size: 0,
        p_flip_h: 0.0,
        p_flip_v: 0.0,
        p_rot90: 0.0,
        ..*policy
    };
    let pair = TrainingPair::denoise(spec_cube(&s.input, axis)?, spec_cube(&s.target, axis)?)?;
    let mut out = augment_pair(&pair, &spectral_only, rng)?;
    if rng.gen::<f64>() < policy.p_mixup {
        let lambda = sample_mixup_lambda(policy.mixup_alpha, rng)?;
        let other = &pool[rng.gen_range(0..pool.len())];
        let other = TrainingPair::denoise(spec_cube(&other.input, axis)?, spec_cube(&other.target, axis)?)?;
        let other = augment_pair(&other, &spectral_only, rng)?;
        out = mixup(&out, &other, lambda)?;
    }
    Ok(SpecPair {
        input: f64s(out.input.data()),
        target: f64s(out.target.data()),
    })
}

fn augment_sr(p: &TrainingPair, pool: &[TrainingPair], policy: &AugmentPolicy, rng: &mut ChaCha8Rng) -> Result<TrainingPair> {
    let mut out = augment_pair(p, policy, rng)?;
    if rng.gen::<f64>() < policy.p_mixup {
        let lambda = sample_mixup_lambda(policy.mixup_alpha, rng)?;
        let other = augment_pair(&pool[rng.gen_range(0..pool.len())], policy, rng)?;
        if let Ok(m) = mixup(&out, &other, lambda) {
            out = m;
        }
    }
    Ok(out)
}

fn epoch_indices(n: usize, epoch_size: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let want = epoch_size.unwrap_or(n);
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        out.extend(order.into_iter().take(want - out.len()));
    }
    out
}

fn run(mut model: Model, train: &[TrainingPair], val: Option<&[TrainingPair]>, cfg: &TrainConfig, policy: &AugmentPolicy, provenance: Provenance) -> Result<TrainOutcome> {
    cfg.validate()?;
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let data = prepare(&model.arch, train, val, cfg, &mut rng)?;
    let n_train = match &data {
        Data::Denoise { train, .. } => train.len(),
        Data::SuperRes { train, .. } => train.len(),
    };
    let per_epoch = cfg.epoch_size.unwrap_or(n_train);
    let batch = cfg.batch_size.min(per_epoch);
    let batches = per_epoch.div_ceil(batch);
    let total_steps = cfg.epochs * batches;

    let mut opt = Optimizer::new(&model, cfg.adam);
    let initial_val = evaluate(&model, &data)?;
    let mut best = Checkpoint::from_model(&model, None, 0, provenance.clone());
    let mut best_score = initial_val;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        let order = epoch_indices(n_train, cfg.epoch_size, &mut rng);
        let mut loss_sum = 0.0;
        let mut lr = cfg.max_lr;
        for idx in order.chunks(batch) {
            lr = cfg.scheduler.lr(step, total_steps, cfg.max_lr)?;
            let (loss, grads) = match &data {
                Data::Denoise { train, axis, .. } => {
                    let (len, padded) = denoise_len(&model)?;
                    let samples: Vec<SpecPair> = idx
                        .iter()
                        .map(|&i| augment_spectrum(&train[i], train, axis, policy, &mut rng))
                        .collect::<Result<_>>()?;
                    let rows: Vec<&[f64]> = samples.iter().map(|s| s.input.as_slice()).collect();
                    let mut g = Graph::new();
                    let x = g.input(spectra_tensor(&rows, padded));
                    let (y, stats) = model.forward(&mut g, x, true)?;
                    let y = g.crop(y, 0, 0, 1, len)?;
                    let target = Tensor {
                        shape: vec![samples.len(), 1, 1, len],
                        data: samples.iter().flat_map(|s| s.target.iter().copied()).collect(),
                    };
                    let l = g.l1_loss(y, &target)?;
                    let grads = g.backward(l)?;
                    let pg = g.param_grads(&grads, model.params.len());
                    model.update_running_stats(&stats);
                    (g.value(l).data[0], pg)
                }
                Data::SuperRes { train, .. } => {
                    let mut acc: Vec<Option<Vec<f64>>> = vec![None; model.params.len()];
                    let mut loss = 0.0;
                    let k = 1.0 / idx.len() as f64;
                    for &i in idx {
                        let p = augment_sr(&train[i], train, policy, &mut rng)?;
                        let mut g = Graph::new();
                        let y = sr_forward(&model, &p.input, true, &mut g)?;
                        let y = g.crop(y, 0, 0, p.target.height(), p.target.width())?;
                        let l = g.l1_loss(y, &cube_tensor(&p.target))?;
                        let l = g.scale(l, k);
                        let grads = g.backward(l)?;
                        loss += g.value(l).data[0];
                        for (a, gr) in acc.iter_mut().zip(g.param_grads(&grads, model.params.len())) {
                            if let Some(gr) = gr {
                                match a {
                                    Some(a) => a.iter_mut().zip(&gr).for_each(|(x, y)| *x += y),
                                    None => *a = Some(gr),
                                }
                            }
                        }
                    }
                    (loss, acc)
                }
            };
            opt.apply(&mut model, &grads, lr)?;
            loss_sum += loss * idx.len() as f64;
            step += 1;
        }
        let train_l1 = loss_sum / per_epoch as f64;
        let val_l1 = evaluate(&model, &data)?;
        history.push(EpochLog {
            epoch,
            train_l1,
            val_l1,
            lr,
        });
        let score = if val_l1.is_nan() { train_l1 } else { val_l1 };
        if best_score.is_nan() || score < best_score {
            best_score = score;
            best_epoch = epoch;
            best = Checkpoint::from_model(&model, Some(opt.moments(&model)), epoch, provenance.clone());
        }
    }
    let last = Checkpoint::from_model(&model, Some(opt.moments(&model)), cfg.epochs, provenance);
    Ok(TrainOutcome {
        best,
        last,
        best_epoch,
        initial_val_l1: initial_val,
        history,
    })
}

/// Trains a freshly initialized network (weights seeded by `cfg.seed`).
pub fn train(arch: ArchConfig, train_set: &[TrainingPair], val_set: Option<&[TrainingPair]>, cfg: &TrainConfig, policy: &AugmentPolicy) -> Result<TrainOutcome> {
    let model = Model::build(arch, cfg.seed)?;
    let prov = Provenance::new(format!("{} trained from scratch", arch.name()), cfg.seed);
    run(model, train_set, val_set, cfg, policy, prov)
}

/// Continues training all weights of `parent` on new data with fresh optimizer moments.
pub fn fine_tune(parent: &Checkpoint, train_set: &[TrainingPair], val_set: Option<&[TrainingPair]>, cfg: &TrainConfig, policy: &AugmentPolicy) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    check_data(&parent.arch, train_set, val_set)?;
    let model = parent.to_model()?;
    let mut prov = Provenance::new(format!("{} fine-tuned from parent", parent.arch.name()), cfg.seed);
    prov.parent_sha256 = Some(parent.sha256()?);
    prov.moments_reset = true;
    run(model, train_set, val_set, cfg, policy, prov)
}

/// Per-spectrum denoising with the cube normalized by its maximum; `batch` spectra per
/// forward pass.
pub fn denoise_cube(model: &Model, cube: &HyperCube, batch: usize) -> Result<HyperCube> {
    let (len, _) = denoise_len(model)?;
    if cube.bands() != len {
        return Err(Error::Config(format!("denoiser expects {len} bands, cube has {}", cube.bands())));
    }
    let k = cube_scale(cube);
    let spectra: Vec<Vec<f64>> = (0..cube.pixels())
        .map(|p| cube.pixel_at(p).iter().map(|&v| f64::from(v) / k).collect())
        .collect();
    let mut data = Vec::with_capacity(cube.data().len());
    for chunk in spectra.chunks(batch.max(1)) {
        let rows: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
        for row in denoise_rows(model, &rows)? {
            data.extend(row.iter().map(|&v| (v * k) as f32));
        }
    }
    cube.with_data(data)
}

pub fn infer_denoise(ckpt: &Checkpoint, cube: &HyperCube) -> Result<HyperCube> {
    denoise_cube(&ckpt.to_model()?, cube, 256)
}

/// Whole-cube super-resolution, cropped to `out_h`×`out_w`; pixel pitch is divided by s.
pub fn superres_cube(model: &Model, cube: &HyperCube, out_h: usize, out_w: usize) -> Result<HyperCube> {
    let c = model
        .hyrisr_config()
        .ok_or_else(|| Error::Config("expected a HyRISR model".into()))?;
    if cube.bands() != c.bands {
        return Err(Error::Config(format!("model expects {} bands, cube has {}", c.bands, cube.bands())));
    }
    let s = c.scale;
    if out_h.div_ceil(s) != cube.height() || out_w.div_ceil(s) != cube.width() {
        return Err(Error::Shape(format!(
            "output {out_h}x{out_w} inconsistent with {}x{} input at scale {s}",
            cube.height(),
            cube.width()
        )));
    }
    let k = cube_scale(cube);
    let mut g = Graph::new();
    let y = sr_forward(model, &scaled(cube, k)?, false, &mut g)?;
    let data = tensor_to_cube_data(g.value(y), out_h, out_w, k)?;
    cube.reshaped(out_h, out_w, data, finer_meta(cube.meta(), s))
}

pub fn infer_superres(ckpt: &Checkpoint, cube: &HyperCube, out_h: usize, out_w: usize) -> Result<HyperCube> {
    superres_cube(&ckpt.to_model()?, cube, out_h, out_w)
}

/// Denoising followed by super-resolution. The two models must agree on band count.
pub fn denoise_then_superres(denoiser: &Model, sr: &Model, cube: &HyperCube, out_h: usize, out_w: usize) -> Result<HyperCube> {
    let (len, _) = denoise_len(denoiser)?;
    let c = sr
        .hyrisr_config()
        .ok_or_else(|| Error::Config("expected a HyRISR model".into()))?;
    if len != c.bands {
        return Err(Error::Config(format!(
            "denoiser emits {len} bands but the super-resolution model expects {}",
            c.bands
        )));
    }
    let d = denoise_cube(denoiser, cube, 256)?;
    superres_cube(sr, &d, out_h, out_w)
}
