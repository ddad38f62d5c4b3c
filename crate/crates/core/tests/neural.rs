mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use ramanhs::augment::{AugmentPolicy, TrainingPair};
use ramanhs::neural::graph::Graph;
use ramanhs::neural::hyrisr::ChannelAttention;
use ramanhs::neural::layers::{Builder, Ctx};
use ramanhs::neural::params::ParamSet;
use ramanhs::neural::tensor::Tensor;
use ramanhs::neural::{
    fine_tune, infer_denoise, infer_superres, train, ArchConfig, Checkpoint, Model, Scheduler, TrainConfig,
};
use ramanhs::{AcquisitionMeta, Error, HyperCube};

#[test]
fn layer_gradients_match_finite_differences() {
    for case in layer_cases() {
        for seed in 0..3 {
            let e = check_layer(&case, seed, 12);
            assert!(e < LAYER_TOL, "{} seed {seed}: relative error {e:e}", case.name);
        }
    }
}

#[test]
fn model_gradients_match_finite_differences() {
    for (name, arch, train) in tiny_models() {
        for seed in 0..2 {
            let e = check_model(arch, train, seed, 24);
            assert!(e < MODEL_TOL, "{name} seed {seed}: relative error {e:e}");
        }
    }
}

#[test]
fn zero_attention_weights_gate_at_one_half() {
    let (mut ps, mut bs) = (ParamSet::new(), ParamSet::new());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ca = {
        let mut b = Builder {
            params: &mut ps,
            buffers: &mut bs,
            rng: &mut rng,
        };
        ChannelAttention::build(&mut b, "ca", 4, 2).unwrap()
    };
    ps.tensors.iter_mut().for_each(|t| t.data.fill(0.0));
    let x = Tensor::new(vec![1, 4, 2, 2], (0..16).map(|i| i as f64 - 3.0).collect()).unwrap();
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let mut ctx = Ctx::new(&mut g, &ps, &bs, false);
    let (y, gate) = ca.forward(&mut ctx, xv).unwrap();
    assert!(g.value(gate).data.iter().all(|&v| v == 0.5));
    for (a, b) in g.value(y).data.iter().zip(&x.data) {
        assert_eq!(*a, 0.5 * b);
    }
}

#[test]
fn attention_rejects_reduction_above_channels() {
    let (mut ps, mut bs) = (ParamSet::new(), ParamSet::new());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut b = Builder {
        params: &mut ps,
        buffers: &mut bs,
        rng: &mut rng,
    };
    assert!(matches!(ChannelAttention::build(&mut b, "ca", 4, 8), Err(Error::Config(_))));
}

#[test]
fn models_map_shapes() {
    let m = Model::build(tiny_hyrisr(3), 1).unwrap();
    let mut g = Graph::new();
    let x = g.input(Tensor::zeros(vec![1, 5, 4, 3]));
    let (y, _) = m.forward(&mut g, x, false).unwrap();
    assert_eq!(g.value(y).shape, vec![1, 5, 12, 9]);

    let m = Model::build(tiny_resunet(true), 1).unwrap();
    let mut g = Graph::new();
    let x = g.input(Tensor::zeros(vec![2, 1, 1, 10]));
    assert!(matches!(m.forward(&mut g, x, false), Err(Error::Shape(_))));
}

fn axis(bands: usize) -> Vec<f64> {
    (0..bands).map(|b| 500.0 + 10.0 * b as f64).collect()
}

/// Smooth spectra plus seeded noise on a small cube.
fn denoise_pairs(n: usize, bands: usize, seed: u64) -> Vec<TrainingPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let shift: f64 = rng.gen_range(0.0..6.0);
            let clean = HyperCube::from_fn(3, 3, axis(bands), AcquisitionMeta::default(), |r, c, b| {
                let x = b as f64 - 5.0 - shift - 0.3 * (r + c) as f64;
                (1.0 + 3.0 * (-x * x / 4.0).exp()) as f32
            })
            .unwrap();
            let noisy = clean.map_values(|v| v + rng.gen_range(-0.4..0.4)).unwrap();
            TrainingPair::denoise(noisy, clean).unwrap()
        })
        .collect()
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        max_lr: 3e-3,
        scheduler: Scheduler::OneCycle,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn denoiser_fits_a_small_set() {
    let pairs = denoise_pairs(6, 16, 1);
    let out = train(tiny_resunet(true), &pairs, None, &small_config(60), &AugmentPolicy::none()).unwrap();
    let first = out.history[0].train_l1;
    let last = out.history.last().unwrap().train_l1;
    assert!(last < 0.5 * first, "train L1 {first} -> {last}");
    assert!(out.history.iter().any(|h| h.val_l1 < out.initial_val_l1));
}

#[test]
fn training_is_bit_reproducible() {
    let pairs = denoise_pairs(3, 16, 2);
    let cfg = small_config(3);
    let a = train(tiny_resunet(true), &pairs, None, &cfg, &AugmentPolicy::default()).unwrap();
    let b = train(tiny_resunet(true), &pairs, None, &cfg, &AugmentPolicy::default()).unwrap();
    assert_eq!(a.last.encode().unwrap(), b.last.encode().unwrap());
    assert_eq!(history_bits(&a.history), history_bits(&b.history));
}

#[test]
fn zero_epochs_returns_initialization() {
    let pairs = denoise_pairs(2, 16, 3);
    let out = train(tiny_resunet(false), &pairs, None, &small_config(0), &AugmentPolicy::none()).unwrap();
    let init = Model::build(tiny_resunet(false), 5).unwrap();
    assert_eq!(out.best.params, init.params);
    assert!(out.history.is_empty());
}

#[test]
fn empty_training_set_is_rejected() {
    let r = train(tiny_resunet(false), &[], None, &small_config(1), &AugmentPolicy::none());
    assert!(matches!(r, Err(Error::Data(_))));
}

#[test]
fn checkpoint_round_trips_byte_exactly() {
    let pairs = denoise_pairs(2, 16, 4);
    let out = train(tiny_resunet(true), &pairs, None, &small_config(2), &AugmentPolicy::none()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.dprc");
    out.last.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, out.last);
    assert_eq!(back.encode().unwrap(), std::fs::read(&path).unwrap());

    let mut bytes = out.last.encode().unwrap();
    let n = bytes.len();
    bytes[n - 1] ^= 0x40;
    assert!(matches!(Checkpoint::decode(&bytes), Err(Error::Format(_))));
    bytes[0] = b'X';
    assert!(matches!(Checkpoint::decode(&bytes), Err(Error::Format(_))));
}

#[test]
fn fine_tune_records_parent_and_resets_moments() {
    let pairs = denoise_pairs(2, 16, 6);
    let parent = train(tiny_resunet(true), &pairs, None, &small_config(2), &AugmentPolicy::none()).unwrap();
    let child = fine_tune(&parent.last, &pairs, None, &small_config(1), &AugmentPolicy::none()).unwrap();
    let prov = &child.last.provenance;
    assert_eq!(prov.parent_sha256.as_deref(), Some(parent.last.sha256().unwrap().as_str()));
    assert!(prov.moments_reset);
    let steps_per_epoch = child.last.adam.as_ref().unwrap().step;
    assert!(steps_per_epoch > 0 && steps_per_epoch < parent.last.adam.as_ref().unwrap().step);
}

#[test]
fn inference_preserves_geometry() {
    let pairs = denoise_pairs(1, 16, 7);
    let model = Model::build(tiny_resunet(true), 0).unwrap();
    let ckpt = Checkpoint::from_model(&model, None, 0, ramanhs::neural::Provenance::new("t", 0));
    let out = infer_denoise(&ckpt, &pairs[0].input).unwrap();
    assert_eq!((out.height(), out.width(), out.bands()), (3, 3, 16));
    assert_eq!(out.axis(), pairs[0].input.axis());

    let model = Model::build(tiny_hyrisr(2), 0).unwrap();
    let ckpt = Checkpoint::from_model(&model, None, 0, ramanhs::neural::Provenance::new("t", 0));
    let lr = HyperCube::from_fn(3, 4, axis(5), AcquisitionMeta::new(1.0, 2.0, "x"), |r, c, b| (r + c + b) as f32).unwrap();
    let hr = infer_superres(&ckpt, &lr, 5, 8).unwrap();
    assert_eq!((hr.height(), hr.width(), hr.bands()), (5, 8, 5));
    assert_eq!(hr.meta().pixel_pitch, 1.0);
    assert!(matches!(infer_superres(&ckpt, &lr, 7, 8), Err(Error::Shape(_))));
    assert!(matches!(infer_denoise(&ckpt, &lr), Err(Error::Config(_))));
}

#[test]
fn arch_config_serializes_with_tag() {
    let a = tiny_hyrisr(2);
    let s = serde_json::to_string(&a).unwrap();
    assert!(s.contains("\"arch\":\"hyrisr\""));
    let back: ArchConfig = serde_json::from_str(&s).unwrap();
    assert_eq!(back, a);
}
