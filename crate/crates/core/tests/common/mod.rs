//! Finite-difference gradient checks and small fixtures shared by the test targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ramanhs::neural::graph::{Graph, Var};
use ramanhs::neural::hyrisr::HyrisrConfig;
use ramanhs::neural::model::{ArchConfig, Model};
use ramanhs::neural::resunet::ResUNet1dConfig;
use ramanhs::neural::tensor::{ConvGeom, Tensor};
use ramanhs::Result;

pub const FD_STEP: f64 = 1e-6;
pub const LAYER_TOL: f64 = 1e-4;
pub const MODEL_TOL: f64 = 1e-3;

fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), randn(rng, n)).unwrap()
}

/// ‖a − b‖ / max(‖a‖, ‖b‖), or 0 when both are negligible.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

type BuildFn = fn(&mut Graph, &[Var]) -> Result<Var>;

pub struct LayerCase {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    pub build: BuildFn,
}

fn conv_case(g: &mut Graph, v: &[Var], geom: ConvGeom) -> Result<Var> {
    g.conv(v[0], v[1], Some(v[2]), geom)
}

pub fn layer_cases() -> Vec<LayerCase> {
    let case = |name, shapes: &[&[usize]], build| LayerCase {
        name,
        shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        build,
    };
    vec![
        case("conv3x3", &[&[2, 3, 5, 4], &[4, 3, 3, 3], &[4]], |g, v| conv_case(g, v, ConvGeom::square(3))),
        case("conv1x1", &[&[2, 3, 4, 4], &[5, 3, 1, 1], &[5]], |g, v| conv_case(g, v, ConvGeom::square(1))),
        case("conv_line_stride2", &[&[2, 2, 1, 12], &[3, 2, 1, 5], &[3]], |g, v| {
            conv_case(g, v, ConvGeom::line(5, 2))
        }),
        case("conv_transpose", &[&[2, 3, 1, 6], &[3, 2, 1, 2], &[2]], |g, v| {
            g.conv_transpose(v[0], v[1], Some(v[2]), ConvGeom::new([1, 2], [1, 2], [0, 0]))
        }),
        case("batch_norm", &[&[3, 2, 2, 3], &[2], &[2]], |g, v| Ok(g.batch_norm(v[0], v[1], v[2])?.0)),
        case("frozen_norm", &[&[2, 3, 2, 2], &[3], &[3]], |g, v| {
            g.frozen_norm(v[0], v[1], v[2], &[0.1, -0.3, 0.5], &[0.7, 1.3, 2.1])
        }),
        case("relu", &[&[2, 3, 3, 3]], |g, v| Ok(g.relu(v[0]))),
        case("sigmoid", &[&[2, 3, 3, 3]], |g, v| Ok(g.sigmoid(v[0]))),
        case("add", &[&[2, 3, 2, 2], &[2, 3, 2, 2]], |g, v| g.add(v[0], v[1])),
        case("scale", &[&[2, 2, 2, 2]], |g, v| Ok(g.scale(v[0], -1.7))),
        case("concat", &[&[2, 2, 3, 1], &[2, 3, 3, 1]], |g, v| g.concat(v[0], v[1])),
        case("avg_pool", &[&[2, 3, 3, 4]], |g, v| g.avg_pool(v[0])),
        case("channel_scale", &[&[2, 3, 2, 3], &[2, 3, 1, 1]], |g, v| g.channel_scale(v[0], v[1])),
        case("pixel_shuffle", &[&[2, 8, 2, 3]], |g, v| g.pixel_shuffle(v[0], 2)),
        case("crop", &[&[2, 2, 5, 4]], |g, v| g.crop(v[0], 1, 1, 3, 2)),
        case("l1_loss", &[&[2, 2, 3, 3]], |g, v| {
            let target = Tensor::new(vec![2, 2, 3, 3], (0..36).map(|i| (i as f64 * 0.37).sin()).collect())?;
            g.l1_loss(v[0], &target)
        }),
    ]
}

fn eval_case(case: &LayerCase, inputs: &[Tensor], weights: &[f64]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let y = (case.build)(&mut g, &vars).unwrap();
    let loss = g.weighted_sum(y, weights).unwrap();
    g.value(loss).data[0]
}

/// Relative error between analytic and central-difference gradients of Σ w·f(inputs),
/// over up to `probes` random coordinates of each input.
pub fn check_layer(case: &LayerCase, seed: u64, probes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Tensor> = case.shapes.iter().map(|s| rand_tensor(&mut rng, s)).collect();
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let y = (case.build)(&mut g, &vars).unwrap();
    let weights = randn(&mut rng, g.value(y).len());
    let loss = g.weighted_sum(y, &weights).unwrap();
    let grads = g.backward(loss).unwrap();

    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for (i, v) in vars.iter().enumerate() {
        let n = inputs[i].len();
        let zeros = vec![0.0; n];
        let a = grads.get(*v).unwrap_or(&zeros);
        for _ in 0..probes.min(n) {
            let j = rng.gen_range(0..n);
            let mut plus = inputs.clone();
            plus[i].data[j] += FD_STEP;
            let mut minus = inputs.clone();
            minus[i].data[j] -= FD_STEP;
            let fd = (eval_case(case, &plus, &weights) - eval_case(case, &minus, &weights)) / (2.0 * FD_STEP);
            analytic.push(a[j]);
            numeric.push(fd);
        }
    }
    rel_error(&analytic, &numeric)
}

pub fn tiny_resunet(bn: bool) -> ArchConfig {
    ArchConfig::Resunet1d(ResUNet1dConfig {
        in_len: 16,
        depth: 2,
        base_channels: 4,
        kernel: 3,
        use_batch_norm: bn,
    })
}

pub fn tiny_hyrisr(scale: usize) -> ArchConfig {
    ArchConfig::Hyrisr(HyrisrConfig {
        bands: 5,
        feature_channels: 8,
        n_residual_groups: 2,
        n_rcab_per_group: 1,
        attention_reduction: 4,
        scale,
    })
}

pub fn tiny_models() -> Vec<(&'static str, ArchConfig, bool)> {
    vec![
        ("resunet1d_bn_train", tiny_resunet(true), true),
        ("resunet1d_bn_eval", tiny_resunet(true), false),
        ("resunet1d_plain", tiny_resunet(false), true),
        ("hyrisr_x2", tiny_hyrisr(2), true),
        ("hyrisr_x3", tiny_hyrisr(3), true),
        ("hyrisr_x4", tiny_hyrisr(4), true),
    ]
}

fn model_input_shape(arch: &ArchConfig) -> Vec<usize> {
    match arch {
        ArchConfig::Resunet1d(c) => vec![3, 1, 1, c.in_len],
        ArchConfig::Hyrisr(c) => vec![2, c.bands, 3, 4],
    }
}

fn eval_model(model: &Model, x: &Tensor, train: bool, weights: &[f64]) -> f64 {
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let (y, _) = model.forward(&mut g, xv, train).unwrap();
    let loss = g.weighted_sum(y, weights).unwrap();
    g.value(loss).data[0]
}

/// End-to-end check over random parameter and input coordinates. Parameters are jittered
/// away from their structured initial values so no ReLU sits exactly on its kink.
pub fn check_model(arch: ArchConfig, train: bool, seed: u64, probes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::build(arch, seed).unwrap();
    for t in &mut model.params.tensors {
        for v in &mut t.data {
            *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let x = rand_tensor(&mut rng, &model_input_shape(&arch));
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let (y, _) = model.forward(&mut g, xv, train).unwrap();
    let weights = randn(&mut rng, g.value(y).len());
    let loss = g.weighted_sum(y, &weights).unwrap();
    let grads = g.backward(loss).unwrap();
    let pg = g.param_grads(&grads, model.params.len());

    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for _ in 0..probes {
        let i = rng.gen_range(0..model.params.len());
        let j = rng.gen_range(0..model.params.tensors[i].len());
        let orig = model.params.tensors[i].data[j];
        model.params.tensors[i].data[j] = orig + FD_STEP;
        let fp = eval_model(&model, &x, train, &weights);
        model.params.tensors[i].data[j] = orig - FD_STEP;
        let fm = eval_model(&model, &x, train, &weights);
        model.params.tensors[i].data[j] = orig;
        analytic.push(pg[i].as_ref().map_or(0.0, |g| g[j]));
        numeric.push((fp - fm) / (2.0 * FD_STEP));
    }
    let gx = grads.get(xv).unwrap().to_vec();
    for _ in 0..probes / 4 {
        let j = rng.gen_range(0..x.len());
        let mut xp = x.clone();
        xp.data[j] += FD_STEP;
        let mut xm = x.clone();
        xm.data[j] -= FD_STEP;
        analytic.push(gx[j]);
        numeric.push((eval_model(&model, &xp, train, &weights) - eval_model(&model, &xm, train, &weights)) / (2.0 * FD_STEP));
    }
    rel_error(&analytic, &numeric)
}

// Classical oracles.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use ramanhs::{AcquisitionMeta, HyperCube};

/// Central smoothing weights from the normal equations of the polynomial fit, solved
/// exactly over the rationals.
pub fn sg_oracle(order: usize, frame: usize) -> Vec<f64> {
    let m = (frame / 2) as i64;
    let n = order + 1;
    let xs: Vec<BigRational> = (-m..=m).map(|x| BigRational::from_integer(BigInt::from(x))).collect();
    let pow = |x: &BigRational, k: usize| -> BigRational {
        let mut r = BigRational::one();
        for _ in 0..k {
            r *= x;
        }
        r
    };
    // [VᵀV | e0] → Gauss-Jordan.
    let mut aug: Vec<Vec<BigRational>> = (0..n)
        .map(|r| {
            let mut row: Vec<BigRational> = (0..n)
                .map(|c| xs.iter().fold(BigRational::zero(), |acc, x| acc + pow(x, r + c)))
                .collect();
            row.push(if r == 0 { BigRational::one() } else { BigRational::zero() });
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !aug[r][col].is_zero()).expect("normal equations are nonsingular");
        aug.swap(col, piv);
        let p = aug[col][col].clone();
        for v in &mut aug[col] {
            *v = &*v / &p;
        }
        for r in 0..n {
            if r != col && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                let pivot_row = aug[col].clone();
                for (v, pv) in aug[r].iter_mut().zip(&pivot_row) {
                    *v = &*v - &f * pv;
                }
            }
        }
    }
    let y: Vec<BigRational> = aug.iter().map(|row| row[n].clone()).collect();
    xs.iter()
        .map(|x| {
            let c = y.iter().enumerate().fold(BigRational::zero(), |acc, (k, yk)| acc + yk * pow(x, k));
            c.to_f64().unwrap()
        })
        .collect()
}

pub fn random_cube(rng: &mut ChaCha8Rng, h: usize, w: usize, bands: usize) -> HyperCube {
    let axis = (0..bands).map(|b| b as f64).collect();
    HyperCube::from_fn(h, w, axis, AcquisitionMeta::default(), |_, _, _| rng.gen_range(0.0f32..1.0)).unwrap()
}

/// Element-by-element MSE through `get`.
pub fn naive_mse(x: &HyperCube, y: &HyperCube) -> f64 {
    let mut s = 0.0;
    for r in 0..x.height() {
        for c in 0..x.width() {
            for b in 0..x.bands() {
                let d = f64::from(x.get(r, c, b)) - f64::from(y.get(r, c, b));
                s += d * d;
            }
        }
    }
    s / (x.height() * x.width() * x.bands()) as f64
}

pub fn naive_psnr(x: &HyperCube, y: &HyperCube) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    for r in 0..x.height() {
        for c in 0..x.width() {
            for b in 0..x.bands() {
                peak = peak.max(f64::from(x.get(r, c, b)));
            }
        }
    }
    10.0 * (peak * peak / naive_mse(x, y)).log10()
}

/// Global-statistics SSIM per band with c1 = (0.01 L)², c2 = (0.03 L)², L = max of x.
pub fn naive_ssim(x: &HyperCube, y: &HyperCube) -> f64 {
    let l = f64::from(x.data().iter().copied().fold(f32::MIN, f32::max));
    let (c1, c2) = ((0.01 * l).powi(2), (0.03 * l).powi(2));
    let n = (x.height() * x.width()) as f64;
    let mut total = 0.0;
    for b in 0..x.bands() {
        let (mut sx, mut sy) = (0.0, 0.0);
        for r in 0..x.height() {
            for c in 0..x.width() {
                sx += f64::from(x.get(r, c, b));
                sy += f64::from(y.get(r, c, b));
            }
        }
        let (mx, my) = (sx / n, sy / n);
        let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
        for r in 0..x.height() {
            for c in 0..x.width() {
                let a = f64::from(x.get(r, c, b)) - mx;
                let d = f64::from(y.get(r, c, b)) - my;
                vx += a * a;
                vy += d * d;
                cov += a * d;
            }
        }
        let (vx, vy, cov) = (vx / n, vy / n, cov / n);
        total += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    total / x.bands() as f64
}

/// Largest violation of the NNLS optimality conditions: x ≥ 0, w = Aᵀ(b − Ax) ≤ 0,
/// and w = 0 on the support of x.
pub fn kkt_residual(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let w = a.transpose() * (b - a * x);
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        worst = worst.max(-x[i]);
        if x[i] > 0.0 {
            worst = worst.max(w[i].abs());
        } else {
            worst = worst.max(w[i]);
        }
    }
    worst
}

pub fn random_system(rng: &mut ChaCha8Rng, m: usize, k: usize) -> (DMatrix<f64>, DVector<f64>) {
    let a = DMatrix::from_fn(m, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    (a, b)
}

/// Two-variable NNLS by repeated grid refinement over [0, r]².
pub fn nnls_grid_2(a: &DMatrix<f64>, b: &DVector<f64>, r: f64) -> (f64, f64) {
    let f = |x0: f64, x1: f64| {
        (0..a.nrows())
            .map(|i| {
                let e = a[(i, 0)] * x0 + a[(i, 1)] * x1 - b[i];
                e * e
            })
            .sum::<f64>()
    };
    let (mut lo0, mut hi0, mut lo1, mut hi1) = (0.0, r, 0.0, r);
    let steps = 100;
    let mut best = (0.0, 0.0);
    for _ in 0..6 {
        let (d0, d1) = ((hi0 - lo0) / steps as f64, (hi1 - lo1) / steps as f64);
        let mut bf = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let (x0, x1) = (lo0 + d0 * i as f64, lo1 + d1 * j as f64);
                let v = f(x0, x1);
                if v < bf {
                    bf = v;
                    best = (x0, x1);
                }
            }
        }
        lo0 = (best.0 - 3.0 * d0).max(0.0);
        hi0 = best.0 + 3.0 * d0;
        lo1 = (best.1 - 3.0 * d1).max(0.0);
        hi1 = best.1 + 3.0 * d1;
    }
    best
}

/// Noiseless phantom with 3–5 components (cycled by seed); returns the permutation-matched
/// worst spectral angle of VCA's estimate.
pub fn vca_trial(seed: u64) -> f64 {
    use ramanhs::synth::{fingerprint_axis, gen_phantom, random_components, Domain};
    let k = 3 + (seed % 3) as usize;
    let comps: Vec<_> = random_components(Domain::Cell, 24, 24, seed).into_iter().take(k).collect();
    let ph = gen_phantom(&comps, 24, 24, &fingerprint_axis(120), seed).unwrap();
    let est = ramanhs::unmix::vca(&ph.clean, k, seed).unwrap();
    ramanhs::unmix::match_endmembers(&ph.endmembers, &est).unwrap().1
}

/// Loss history as raw bits, so NaN entries (no validation data) compare equal.
pub fn history_bits(h: &[ramanhs::neural::EpochLog]) -> Vec<(usize, u64, u64, u64)> {
    h.iter()
        .map(|e| (e.epoch, e.train_l1.to_bits(), e.val_l1.to_bits(), e.lr.to_bits()))
        .collect()
}
