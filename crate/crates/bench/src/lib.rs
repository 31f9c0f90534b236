//! Shared fixtures for the benchmarks.

use phasemix_core::catalog;
use phasemix_core::driver::Problem;
use phasemix_core::ScalarField;

/// A built-in example on a reduced mesh, with its initial phase field.
pub fn example(name: &str, nx: usize, ny: usize) -> (Problem, ScalarField) {
    catalog::load(name).expect("catalog entry").with_mesh(nx, ny).build().expect("valid example")
}
