use std::path::Path;

use ramanhs::dsp::{sg_filter_cube, sg_grid};
use ramanhs::hypercube::{load_cube, save_cube};
use ramanhs::metrics::{quality_report, speedup};
use ramanhs::neural::{
    denoise_cube, denoise_then_superres, fine_tune, superres_cube, train, Provenance, TrainOutcome,
};
use ramanhs::resample::{upsample_bicubic, upsample_nearest};
use ramanhs::synth::{gen_dataset, load_manifest, write_dataset, DatasetSpec, LoadedPair, Role};
use ramanhs::unmix::{abundance_map, classification_accuracy, classify_pixels, vca};
use ramanhs::{
    ArchConfig, Checkpoint, EndmemberSet, HyperCube, HyrisrConfig, LabelMap, QualityReport, ResUNet1dConfig,
    ScaleFactor, TrainingPair,
};
use serde_json::json;

use crate::config::{BaselineParams, Field, Keep, PipelineParams, Preset, RoleSel, SynthParams, TrainParams, UnmixParams};
use crate::output::{create_dir, loss_csv, write_heatmap, write_labels, write_text, Report};
use crate::{CliError, Task};

fn usage(e: ramanhs::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn scale_factor(s: u32) -> Result<ScaleFactor, CliError> {
    ScaleFactor::new(s).map_err(usage)
}

fn put_quality(r: &mut Report, prefix: &str, q: &QualityReport) {
    r.set(format!("{prefix}.mse"), q.mse);
    r.set(format!("{prefix}.psnr"), q.psnr);
    r.set(format!("{prefix}.ssim"), q.ssim);
}

pub fn synth(p: &SynthParams) -> Result<Report, CliError> {
    let mut spec = DatasetSpec::new(p.cubes, p.size, p.bands, scale_factor(p.scale)?, p.seed);
    spec.t_low = p.t_low;
    spec.t_high = p.t_high;
    spec.domain = p.domain;
    spec.val_fraction = p.val_fraction;
    spec.test_fraction = p.test_fraction;
    if let Some(v) = p.photon_rate_scale {
        spec.photon_rate_scale = v;
    }
    if let Some(v) = p.read_noise_sigma {
        spec.read_noise_sigma = v;
    }
    spec.validate().map_err(usage)?;
    let samples = gen_dataset(&spec)?;
    let manifest = write_dataset(&p.out_dir, &spec, &samples)?;
    let (train, val, test) = spec.role_counts();
    let mut r = Report::new();
    r.set("cubes", manifest.pairs.len());
    r.set("train", train);
    r.set("val", val);
    r.set("test", test);
    r.set("manifest", p.out_dir.join(ramanhs::synth::MANIFEST_FILE).display().to_string());
    Ok(r)
}

fn load_pairs(manifest: &Path) -> Result<(u32, Vec<LoadedPair>), CliError> {
    let (m, dir) = load_manifest(manifest)?;
    let pairs = m.pairs.iter().map(|e| e.load(&dir)).collect::<ramanhs::Result<Vec<_>>>()?;
    Ok((m.scale.into(), pairs))
}

fn training_pairs(task: Task, pairs: &[&LoadedPair], scale: usize) -> Result<Vec<TrainingPair>, CliError> {
    pairs
        .iter()
        .map(|p| match task {
            Task::Denoise => TrainingPair::denoise(p.low_snr_hr.clone(), p.noisy_hr.clone()),
            Task::Sr => TrainingPair::superres(p.noisy_lr.clone(), p.noisy_hr.clone(), scale),
        })
        .collect::<ramanhs::Result<_>>()
        .map_err(CliError::from)
}

fn check_parent(task: Task, parent: &Checkpoint, scale: Option<u32>) -> Result<(), CliError> {
    match (task, &parent.arch) {
        (Task::Denoise, ArchConfig::Resunet1d(_)) => Ok(()),
        (Task::Sr, ArchConfig::Hyrisr(c)) => match scale {
            Some(s) if s as usize != c.scale => Err(CliError::Runtime(format!(
                "checkpoint is a x{} model but scale {s} was requested",
                c.scale
            ))),
            _ => Ok(()),
        },
        (_, arch) => Err(CliError::Runtime(format!(
            "checkpoint holds a {} model, which cannot be trained for {}",
            arch.name(),
            task.name()
        ))),
    }
}

fn architecture(task: Task, preset: Preset, bands: usize, scale: usize) -> ArchConfig {
    match (task, preset) {
        (Task::Denoise, Preset::Desk) => ArchConfig::Resunet1d(ResUNet1dConfig::desk(bands)),
        (Task::Denoise, Preset::Full) => ArchConfig::Resunet1d(ResUNet1dConfig::new(bands)),
        (Task::Sr, Preset::Desk) => ArchConfig::Hyrisr(HyrisrConfig::desk(bands, scale)),
        (Task::Sr, Preset::Full) => ArchConfig::Hyrisr(HyrisrConfig::new(bands, scale)),
    }
}

pub fn train_cmd(task: Task, p: &TrainParams) -> Result<Report, CliError> {
    let parent = p.from_checkpoint.as_ref().map(Checkpoint::load).transpose()?;
    if let Some(parent) = &parent {
        check_parent(task, parent, p.scale)?;
    }
    let mut r = Report::new();
    r.set("task", task.name());
    let Some(manifest) = &p.manifest else {
        // Zero epochs of fine-tuning need no data: the child is the parent with new provenance.
        let Some(parent) = parent.filter(|_| p.epochs == 0) else {
            return Err(CliError::Runtime("missing dataset: pass --manifest".into()));
        };
        let mut prov = Provenance::new(format!("{} fine-tuned from parent", parent.arch.name()), p.seed);
        prov.parent_sha256 = Some(parent.sha256()?);
        prov.moments_reset = true;
        let child = Checkpoint::from_model(&parent.to_model()?, None, 0, prov);
        child.save(&p.out)?;
        write_text(&p.loss_csv_path(), &loss_csv(&[]))?;
        r.set("epochs", 0);
        r.set("checkpoint", p.out.display().to_string());
        r.set("sha256", child.sha256()?);
        return Ok(r);
    };

    let (manifest_scale, pairs) = load_pairs(manifest)?;
    if task == Task::Sr {
        if let Some(s) = p.scale.filter(|&s| s != manifest_scale) {
            return Err(CliError::Runtime(format!("dataset has scale {manifest_scale} but scale {s} was requested")));
        }
    }
    let scale = manifest_scale as usize;
    let by_role = |role: Role| pairs.iter().filter(|x| x.role == role).collect::<Vec<_>>();
    let train_set = training_pairs(task, &by_role(Role::Train), scale)?;
    let val_set = training_pairs(task, &by_role(Role::Val), scale)?;
    if train_set.is_empty() {
        return Err(CliError::Runtime(format!("{} has no training cubes", manifest.display())));
    }
    let val = (!val_set.is_empty()).then_some(val_set.as_slice());
    let cfg = p.train_config();
    let out: TrainOutcome = match &parent {
        Some(parent) => fine_tune(parent, &train_set, val, &cfg, &p.augment)?,
        None => {
            let arch = architecture(task, p.preset, train_set[0].target.bands(), scale);
            train(arch, &train_set, val, &cfg, &p.augment)?
        }
    };
    let ckpt = match p.keep {
        Keep::Best => &out.best,
        Keep::Last => &out.last,
    };
    ckpt.save(&p.out)?;
    write_text(&p.loss_csv_path(), &loss_csv(&out.history))?;
    r.set("arch", ckpt.arch.name());
    r.set("epochs", out.history.len());
    r.set("train_cubes", train_set.len());
    r.set("val_cubes", val_set.len());
    r.set("initial_val_l1", out.initial_val_l1);
    r.set("best_epoch", out.best_epoch);
    if let Some(last) = out.history.last() {
        r.set("final_train_l1", last.train_l1);
        r.set("final_val_l1", last.val_l1);
    }
    r.set("checkpoint", p.out.display().to_string());
    r.set("loss_csv", p.loss_csv_path().display().to_string());
    r.set("sha256", ckpt.sha256()?);
    Ok(r)
}

fn labels_for(cube: &HyperCube, ems: &EndmemberSet) -> Result<LabelMap, CliError> {
    Ok(classify_pixels(&abundance_map(cube, ems)?))
}

pub fn pipeline(p: &PipelineParams) -> Result<(Report, HyperCube), CliError> {
    let (Some(input_path), Some(sr_path)) = (&p.input, &p.sr) else {
        return Err(CliError::Usage("pipeline needs --input and --sr".into()));
    };
    let input = load_cube(input_path)?;
    let sr_ckpt = Checkpoint::load(sr_path)?;
    let ArchConfig::Hyrisr(sr_cfg) = sr_ckpt.arch else {
        return Err(CliError::Runtime(format!("{} is not a super-resolution checkpoint", sr_path.display())));
    };
    if let Some(s) = p.scale.filter(|&s| s as usize != sr_cfg.scale) {
        return Err(CliError::Runtime(format!(
            "{} is a x{} model but scale {s} was requested",
            sr_path.display(),
            sr_cfg.scale
        )));
    }
    let s = sr_cfg.scale;
    let reference = p.reference.as_ref().map(load_cube).transpose()?;
    let out_h = p.out_height.or(reference.as_ref().map(HyperCube::height)).unwrap_or(s * input.height());
    let out_w = p.out_width.or(reference.as_ref().map(HyperCube::width)).unwrap_or(s * input.width());

    let sr = sr_ckpt.to_model()?;
    let output = match &p.denoiser {
        Some(path) => {
            let dn = Checkpoint::load(path)?;
            if !matches!(dn.arch, ArchConfig::Resunet1d(_)) {
                return Err(CliError::Runtime(format!("{} is not a denoising checkpoint", path.display())));
            }
            denoise_then_superres(&dn.to_model()?, &sr, &input, out_h, out_w)?
        }
        None => superres_cube(&sr, &input, out_h, out_w)?,
    };
    save_cube(&output, &p.out)?;

    let mut r = Report::new();
    let t_low = p.t_low.unwrap_or(input.meta().integration_time);
    r.set("output", p.out.display().to_string());
    r.set("height", out_h);
    r.set("width", out_w);
    r.set("bands", output.bands());
    r.set("scale", s);
    r.set("t_low", t_low);
    r.set("t_high", p.t_high);
    r.set("speedup", speedup(t_low, p.t_high, s as u32).map_err(usage)?);

    let reference = if p.self_test { Some(output.clone()) } else { reference };
    if let Some(reference) = &reference {
        put_quality(&mut r, "neural", &quality_report(reference, &output)?);
        let baseline = if p.baseline {
            Some(best_sg_bicubic(&input, reference, s)?)
        } else {
            None
        };
        if let Some((_, order, frame, q)) = &baseline {
            r.set("baseline.sg_order", *order);
            r.set("baseline.sg_frame", *frame);
            put_quality(&mut r, "baseline", q);
        }
        if p.endmembers > 0 {
            let ems = vca(reference, p.endmembers, p.unmix_seed)?;
            let truth = labels_for(reference, &ems)?;
            let pred = labels_for(&output, &ems)?;
            r.set("endmembers", p.endmembers);
            r.set("neural.accuracy", classification_accuracy(&pred, &truth)?);
            if let Some((cube, ..)) = &baseline {
                r.set("baseline.accuracy", classification_accuracy(&labels_for(cube, &ems)?, &truth)?);
            }
            create_dir(&p.report_dir)?;
            write_labels(&p.report_dir.join("labels_reference.png"), &truth, p.endmembers)?;
            write_labels(&p.report_dir.join("labels_neural.png"), &pred, p.endmembers)?;
        }
    }

    if p.heatmaps {
        let dir = p.report_dir.join("heatmaps");
        create_dir(&dir)?;
        let bands: Vec<usize> = match &p.heatmap_bands {
            Some(b) => b.clone(),
            None => (0..output.bands()).collect(),
        };
        for b in bands {
            if b >= output.bands() {
                return Err(CliError::Usage(format!("heatmap band {b} out of range 0..{}", output.bands())));
            }
            write_heatmap(&dir.join(format!("band_{b:04}.png")), &output.band_plane(b))?;
        }
    }
    r.write(&p.report_dir)?;
    Ok((r, output))
}

/// SG-filters `input` with every grid member, upsamples bicubically, and keeps the member
/// closest to `reference` in MSE.
fn best_sg_bicubic(input: &HyperCube, reference: &HyperCube, s: usize) -> Result<(HyperCube, usize, usize, QualityReport), CliError> {
    let sf = scale_factor(s as u32)?;
    let mut best: Option<(HyperCube, usize, usize, QualityReport)> = None;
    for params in sg_grid() {
        if params.frame > input.bands() {
            continue;
        }
        let cube = upsample_bicubic(&sg_filter_cube(input, params)?, sf, reference.height(), reference.width())?;
        let q = quality_report(reference, &cube)?;
        if best.as_ref().is_none_or(|b| q.mse < b.3.mse) {
            best = Some((cube, params.order, params.frame, q));
        }
    }
    best.ok_or_else(|| CliError::Runtime("no Savitzky-Golay member fits the band count".into()))
}

fn field(p: &LoadedPair, f: Field) -> &HyperCube {
    match f {
        Field::CleanHr => &p.clean_hr,
        Field::NoisyHr => &p.noisy_hr,
        Field::NoisyLr => &p.noisy_lr,
        Field::CleanLr => &p.clean_lr,
        Field::LowSnrHr => &p.low_snr_hr,
        Field::LowSnrLr => &p.low_snr_lr,
    }
}

#[derive(Default)]
struct Mean {
    mse: f64,
    psnr: f64,
    ssim: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, q: &QualityReport) {
        self.mse += q.mse;
        self.psnr += q.psnr;
        self.ssim += q.ssim;
        self.n += 1;
    }

    fn get(&self) -> (f64, f64, f64) {
        let n = self.n.max(1) as f64;
        (self.mse / n, self.psnr / n, self.ssim / n)
    }
}

/// Returns the JSON report and the human-readable tables.
pub fn baseline(p: &BaselineParams) -> Result<(serde_json::Value, String), CliError> {
    let Some(manifest) = &p.manifest else {
        return Err(CliError::Runtime("missing dataset: pass --manifest".into()));
    };
    let (scale, pairs) = load_pairs(manifest)?;
    let pairs: Vec<&LoadedPair> = pairs
        .iter()
        .filter(|x| match p.role {
            RoleSel::All => true,
            RoleSel::Train => x.role == Role::Train,
            RoleSel::Val => x.role == Role::Val,
            RoleSel::Test => x.role == Role::Test,
        })
        .collect();
    if pairs.is_empty() {
        return Err(CliError::Runtime(format!("no cubes with role {:?} in {}", p.role, manifest.display())));
    }
    let bands = field(pairs[0], p.denoise_input).bands();

    let grid: Vec<_> = sg_grid().into_iter().filter(|g| g.frame <= bands).collect();
    let mut rows = Vec::new();
    for g in &grid {
        let mut m = Mean::default();
        for x in &pairs {
            let y = sg_filter_cube(field(x, p.denoise_input), *g)?;
            m.add(&quality_report(field(x, p.reference), &y)?);
        }
        rows.push((g.order, g.frame, m.get()));
    }
    let best = (0..rows.len())
        .min_by(|&a, &b| rows[a].2 .0.total_cmp(&rows[b].2 .0))
        .ok_or_else(|| CliError::Runtime("empty Savitzky-Golay grid".into()))?;

    let mut text = format!("denoising ({} cubes, {} vs {})\n", pairs.len(), p.denoise_input, p.reference);
    text.push_str(&format!("{:<10} {:>5} {:>5} {:>12} {:>9} {:>8}  best\n", "method", "order", "frame", "mse", "psnr", "ssim"));
    let mut sg_json = Vec::new();
    for (i, (order, frame, (mse, psnr, ssim))) in rows.iter().enumerate() {
        let flag = if i == best { "  *" } else { "" };
        text.push_str(&format!("{:<10} {order:>5} {frame:>5} {mse:>12.4e} {psnr:>9.3} {ssim:>8.5}{flag}\n", "sg"));
        sg_json.push(json!({"order": order, "frame": frame, "mse": mse, "psnr": psnr, "ssim": ssim, "best": i == best}));
    }
    let mut denoiser_json = serde_json::Value::Null;
    if let Some(path) = &p.denoiser {
        let model = Checkpoint::load(path)?.to_model()?;
        let mut m = Mean::default();
        for x in &pairs {
            let y = denoise_cube(&model, field(x, p.denoise_input), 256)?;
            m.add(&quality_report(field(x, p.reference), &y)?);
        }
        let (mse, psnr, ssim) = m.get();
        text.push_str(&format!("{:<10} {:>5} {:>5} {mse:>12.4e} {psnr:>9.3} {ssim:>8.5}\n", "resunet1d", "-", "-"));
        denoiser_json = json!({"mse": mse, "psnr": psnr, "ssim": ssim, "beats_best_sg": mse < rows[best].2 .0});
    }

    let sf = scale_factor(scale)?;
    let mut methods: Vec<(&str, Mean)> = vec![("nearest", Mean::default()), ("bicubic", Mean::default())];
    let sr_model = p.sr.as_ref().map(|path| Checkpoint::load(path).and_then(|c| c.to_model())).transpose()?;
    if sr_model.is_some() {
        methods.push(("hyrisr", Mean::default()));
    }
    for x in &pairs {
        let (lr, truth) = (field(x, p.upsample_input), field(x, p.reference));
        let (h, w) = (truth.height(), truth.width());
        methods[0].1.add(&quality_report(truth, &upsample_nearest(lr, sf, h, w)?)?);
        methods[1].1.add(&quality_report(truth, &upsample_bicubic(lr, sf, h, w)?)?);
        if let Some(model) = &sr_model {
            methods[2].1.add(&quality_report(truth, &superres_cube(model, lr, h, w)?)?);
        }
    }
    text.push_str(&format!("\nupsampling x{scale} ({} vs {})\n", p.upsample_input, p.reference));
    text.push_str(&format!("{:<10} {:>12} {:>9} {:>8}\n", "method", "mse", "psnr", "ssim"));
    let mut up_json = Vec::new();
    for (name, m) in &methods {
        let (mse, psnr, ssim) = m.get();
        text.push_str(&format!("{name:<10} {mse:>12.4e} {psnr:>9.3} {ssim:>8.5}\n"));
        up_json.push(json!({"method": name, "mse": mse, "psnr": psnr, "ssim": ssim}));
    }

    let report = json!({
        "cubes": pairs.len(),
        "sg_grid": sg_json,
        "best_sg": {"order": rows[best].0, "frame": rows[best].1, "mse": rows[best].2 .0},
        "denoiser": denoiser_json,
        "upsampling": up_json,
    });
    create_dir(&p.report_dir)?;
    let pretty = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(&p.report_dir.join("baseline.json"), &(pretty + "\n"))?;
    write_text(&p.report_dir.join("baseline.txt"), &text)?;
    Ok((report, text))
}

pub fn unmix(p: &UnmixParams) -> Result<Report, CliError> {
    let Some(input) = &p.input else {
        return Err(CliError::Usage("unmix needs --input".into()));
    };
    let cube = load_cube(input)?;
    let ems = vca(&cube, p.endmembers, p.seed)?;
    let ab = abundance_map(&cube, &ems)?;
    let labels = classify_pixels(&ab);
    create_dir(&p.out_dir)?;

    let mut csv = String::from("wavenumber");
    for j in 0..ems.count() {
        csv.push_str(&format!(",em{j}"));
    }
    csv.push('\n');
    for (b, nu) in cube.axis().iter().enumerate() {
        csv.push_str(&nu.to_string());
        for j in 0..ems.count() {
            csv.push_str(&format!(",{:e}", ems.spectra()[(b, j)]));
        }
        csv.push('\n');
    }
    write_text(&p.out_dir.join("endmembers.csv"), &csv)?;
    save_cube(&ab.to_cube(cube.meta().clone())?, p.out_dir.join("abundances.hrc"))?;
    for j in 0..ems.count() {
        write_heatmap(&p.out_dir.join(format!("abundance_{j}.png")), &ab.plane(j))?;
    }
    write_labels(&p.out_dir.join("labels.png"), &labels, ems.count())?;

    let mut r = Report::new();
    r.set("endmembers", ems.count());
    for j in 0..ems.count() {
        let share = labels.labels.iter().filter(|&&l| l == j).count() as f64 / labels.labels.len() as f64;
        r.set(format!("class{j}.fraction"), share);
    }
    r.set("out_dir", p.out_dir.display().to_string());
    Ok(r)
}

pub fn score(reference: &Path, test: &Path) -> Result<Report, CliError> {
    let q = quality_report(&load_cube(reference)?, &load_cube(test)?)?;
    let mut r = Report::new();
    r.set("mse", q.mse);
    r.set("psnr", q.psnr);
    r.set("ssim", q.ssim);
    r.set("x_max", q.x_max);
    Ok(r)
}
