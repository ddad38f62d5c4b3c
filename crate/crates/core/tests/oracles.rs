mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use ramanhs::dsp::{sg_coefficients, SgParams};
use ramanhs::metrics::quality_report;
use ramanhs::unmix::nnls;

#[test]
fn sg_coefficients_match_exact_least_squares() {
    for frame in (3..=15).step_by(2) {
        for order in 0..frame {
            let got = sg_coefficients(SgParams::new(order, frame).unwrap()).unwrap();
            let want = sg_oracle(order, frame);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10, "order {order} frame {frame}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn metrics_match_naive_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (h, w, b) = (rng.gen_range(2..9), rng.gen_range(2..9), rng.gen_range(2..12));
        let x = random_cube(&mut rng, h, w, b);
        let y = x.map_values(|v| v + rng.gen_range(-0.2f32..0.2)).unwrap();
        let q = quality_report(&x, &y).unwrap();
        assert!((q.mse - naive_mse(&x, &y)).abs() < 1e-10);
        assert!((q.psnr - naive_psnr(&x, &y)).abs() < 1e-10);
        assert!((q.ssim - naive_ssim(&x, &y)).abs() < 1e-10);
    }
}

#[test]
fn nnls_satisfies_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let k = rng.gen_range(1..9);
        let m = rng.gen_range(k..k + 30);
        let (a, b) = random_system(&mut rng, m, k);
        let x = nnls(&a, &b).unwrap();
        let r = kkt_residual(&a, &b, &x);
        assert!(r < 1e-8, "KKT residual {r:e} for {m}x{k}");
    }
}

#[test]
fn nnls_matches_grid_search_in_two_variables() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let (a, b) = random_system(&mut rng, 6, 2);
        let x = nnls(&a, &b).unwrap();
        let (g0, g1) = nnls_grid_2(&a, &b, 10.0);
        assert!((x[0] - g0).abs() < 2e-3 && (x[1] - g1).abs() < 2e-3, "{x:?} vs ({g0}, {g1})");
    }
}

#[test]
fn nnls_handles_rank_deficient_columns() {
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
    let b = DVector::from_vec(vec![2.0, 1.0, 2.0]);
    let x = nnls(&a, &b).unwrap();
    assert!(kkt_residual(&a, &b, &x) < 1e-10);
    assert!((x[0] + x[1] - 2.0).abs() < 1e-10 && (x[2] - 1.0).abs() < 1e-10);
}

#[test]
fn vca_recovers_pure_endmembers() {
    for seed in 0..20 {
        let angle = vca_trial(seed);
        assert!(angle < 1e-6, "seed {seed}: angle {angle:e}");
    }
}
