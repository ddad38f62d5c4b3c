//! `ramanhs` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{BaselineParams, Field, Keep, PipelineParams, Preset, RoleSel, SynthParams, TrainParams, UnmixParams};
use ramanhs::neural::Scheduler;
use ramanhs::synth::Domain;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<ramanhs::Error> for CliError {
    fn from(e: ramanhs::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Denoise,
    Sr,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Denoise => "denoise",
            Task::Sr => "sr",
        }
    }
}

#[derive(Parser)]
#[command(name = "ramanhs", version, about = "Hyperspectral Raman denoising, super-resolution and unmixing")]
struct Cli {
    /// TOML file with one table per command ([synth], [train], [pipeline], [baseline], [unmix]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired dataset with a manifest.
    Synth(SynthArgs),
    /// Train a denoiser or a super-resolution network on a manifest.
    Train(TrainArgs),
    /// Denoise and super-resolve a cube, then score it against a reference.
    Pipeline(PipelineArgs),
    /// Savitzky-Golay grid and interpolation baselines over a manifest.
    Baseline(BaselineArgs),
    /// VCA endmembers, abundance maps and pixel labels for one cube.
    Unmix(UnmixArgs),
    /// MSE, PSNR and SSIM of a test cube against a reference.
    Score(ScoreArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    cubes: Option<usize>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_low: Option<f64>,
    #[arg(long)]
    t_high: Option<f64>,
    #[arg(long, value_parser = parse_domain)]
    domain: Option<Domain>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    photon_rate_scale: Option<f64>,
    #[arg(long)]
    read_noise_sigma: Option<f64>,
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    s.parse().map_err(|e: ramanhs::Error| e.to_string())
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum KeepArg {
    Best,
    Last,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedulerArg {
    OneCycle,
    Constant,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(value_enum)]
    task: Task,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch losses; defaults to the checkpoint path with a `.losses.csv` extension.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// Fine-tune all weights of this checkpoint instead of starting from scratch.
    #[arg(long)]
    from_checkpoint: Option<PathBuf>,
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Which checkpoint to save: lowest validation loss or final epoch.
    #[arg(long, value_enum)]
    keep: Option<KeepArg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_lr: Option<f64>,
    #[arg(long, value_enum)]
    scheduler: Option<SchedulerArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Samples drawn per epoch (spectra for denoising, cubes for super-resolution).
    #[arg(long)]
    epoch_size: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    max_val_samples: Option<usize>,
    /// Crop side in input pixels for super-resolution training.
    #[arg(long)]
    crop_size: Option<usize>,
    /// Disable every augmentation.
    #[arg(long)]
    no_augment: bool,
}

#[derive(Args)]
struct PipelineArgs {
    /// Low-SNR, low-resolution input cube (HRC1).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    denoiser: Option<PathBuf>,
    #[arg(long)]
    sr: Option<PathBuf>,
    /// Expected scale factor; must match the super-resolution checkpoint.
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report_dir: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Score the output against itself.
    #[arg(long)]
    self_test: bool,
    #[arg(long)]
    out_height: Option<usize>,
    #[arg(long)]
    out_width: Option<usize>,
    #[arg(long)]
    t_low: Option<f64>,
    #[arg(long)]
    t_high: Option<f64>,
    /// Endmembers to extract from the reference for pixel classification.
    #[arg(long)]
    endmembers: Option<usize>,
    #[arg(long)]
    unmix_seed: Option<u64>,
    /// Skip the Savitzky-Golay + bicubic comparison.
    #[arg(long)]
    no_baseline: bool,
    #[arg(long)]
    no_heatmaps: bool,
    /// Comma-separated band indices to export; all bands by default.
    #[arg(long, value_delimiter = ',')]
    heatmap_bands: Option<Vec<usize>>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    role: Option<RoleArg>,
    #[arg(long)]
    denoise_input: Option<Field>,
    #[arg(long)]
    upsample_input: Option<Field>,
    #[arg(long)]
    reference: Option<Field>,
    /// Adds a trained denoiser row to the denoising table.
    #[arg(long)]
    denoiser: Option<PathBuf>,
    /// Adds a trained super-resolution row to the upsampling table.
    #[arg(long)]
    sr: Option<PathBuf>,
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args)]
struct UnmixArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    endmembers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

/// Copies every `Some` flag over the matching parameter.
macro_rules! overlay {
    ($p:expr, $a:expr; $($f:ident),* $(,)?) => {
        $( if let Some(v) = $a.$f.clone() { $p.$f = v.into(); } )*
    };
}

/// Echoes the resolved parameters to stderr before the run.
fn announce<T: Serialize>(section: &str, params: &T) -> Result<String, CliError> {
    let text = config::echo(section, params)?;
    eprintln!("# resolved config\n{text}");
    Ok(text)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Synth(a) => {
            let mut p: SynthParams = config::load_section(cfg, "synth")?;
            overlay!(p, a; out_dir, cubes, size, bands, scale, seed, t_low, t_high, domain, val_fraction, test_fraction);
            overlay!(p, a; photon_rate_scale, read_noise_sigma);
            p.validate()?;
            let echo = announce("synth", &p)?;
            let r = commands::synth(&p)?;
            output::write_text(&p.out_dir.join("resolved_config.toml"), &echo)?;
            print!("{}", r.key_values());
        }
        Command::Train(a) => {
            let mut p: TrainParams = config::load_section(cfg, "train")?;
            overlay!(p, a; manifest, out, loss_csv, from_checkpoint, scale, epochs, batch_size, max_lr, seed);
            overlay!(p, a; epoch_size, val_fraction, max_val_samples);
            if let Some(v) = a.preset {
                p.preset = match v {
                    PresetArg::Desk => Preset::Desk,
                    PresetArg::Full => Preset::Full,
                };
            }
            if let Some(v) = a.keep {
                p.keep = match v {
                    KeepArg::Best => Keep::Best,
                    KeepArg::Last => Keep::Last,
                };
            }
            if let Some(v) = a.scheduler {
                p.scheduler = match v {
                    SchedulerArg::OneCycle => Scheduler::OneCycle,
                    SchedulerArg::Constant => Scheduler::Constant,
                };
            }
            if a.no_augment {
                p.augment = ramanhs::AugmentPolicy::none();
            }
            if let Some(v) = a.crop_size {
                p.augment.crop_size = v;
            }
            p.validate()?;
            let echo = announce("train", &p)?;
            let r = commands::train_cmd(a.task, &p)?;
            output::write_text(&p.out.with_extension("config.toml"), &echo)?;
            print!("{}", r.key_values());
        }
        Command::Pipeline(a) => {
            let mut p: PipelineParams = config::load_section(cfg, "pipeline")?;
            overlay!(p, a; input, denoiser, sr, scale, out, report_dir, reference, out_height, out_width, t_low);
            overlay!(p, a; t_high, endmembers, unmix_seed, heatmap_bands);
            p.self_test |= a.self_test;
            p.baseline &= !a.no_baseline;
            p.heatmaps &= !a.no_heatmaps;
            p.validate()?;
            let echo = announce("pipeline", &p)?;
            let (r, _) = commands::pipeline(&p)?;
            output::write_text(&p.report_dir.join("resolved_config.toml"), &echo)?;
            print!("{}", r.key_values());
        }
        Command::Baseline(a) => {
            let mut p: BaselineParams = config::load_section(cfg, "baseline")?;
            overlay!(p, a; manifest, denoise_input, upsample_input, reference, denoiser, sr, report_dir);
            if let Some(v) = a.role {
                p.role = match v {
                    RoleArg::Train => RoleSel::Train,
                    RoleArg::Val => RoleSel::Val,
                    RoleArg::Test => RoleSel::Test,
                    RoleArg::All => RoleSel::All,
                };
            }
            let echo = announce("baseline", &p)?;
            let (_, text) = commands::baseline(&p)?;
            output::write_text(&p.report_dir.join("resolved_config.toml"), &echo)?;
            print!("{text}");
        }
        Command::Unmix(a) => {
            let mut p: UnmixParams = config::load_section(cfg, "unmix")?;
            overlay!(p, a; input, endmembers, seed, out_dir);
            let echo = announce("unmix", &p)?;
            let r = commands::unmix(&p)?;
            output::write_text(&p.out_dir.join("resolved_config.toml"), &echo)?;
            print!("{}", r.key_values());
        }
        Command::Score(a) => {
            print!("{}", commands::score(&a.reference, &a.test)?.key_values());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
