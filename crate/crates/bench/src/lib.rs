//! Shared inputs for the benchmarks in `benches/`.

use qrlearn::simgen::{generate, DgpConfig, Scenario};
use qrlearn::Dataset;

/// A fixed aligned draw with `n1` trial and `n0` external rows.
pub fn aligned(n1: usize, n0: usize) -> Dataset {
    generate(&DgpConfig::new(Scenario::RmseAligned, n1, n0).with_seed(99, 0))
        .expect("default scenario generates")
        .dataset
}
