//! Fixtures shared by the kernel benchmarks.

use ramanhs::synth::{gen_sample, DatasetSpec, Role, Sample};
use ramanhs::ScaleFactor;

pub const BANDS: usize = 200;

/// One synthetic cell cube of `size`×`size` pixels at the benchmark band count.
pub fn sample(size: usize, seed: u64) -> Sample {
    let spec = DatasetSpec::new(1, size, BANDS, ScaleFactor::new(2).expect("valid scale"), seed);
    gen_sample(&spec, Role::Test, seed).expect("valid dataset spec")
}
