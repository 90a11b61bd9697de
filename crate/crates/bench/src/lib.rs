//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use lyapmkv::benchmarks::{contracting, two_state_chain};
use lyapmkv::funcspace::{GridFunction, SpaceParams};
use lyapmkv::transfer::Discretization;

pub fn contracting_grid(n: usize) -> Arc<Discretization> {
    Discretization::new(contracting(), two_state_chain(), n, SpaceParams::default()).expect("valid family")
}

pub fn wave(n: usize) -> GridFunction<f64> {
    GridFunction::from_fn(2, n, SpaceParams::default(), |i, th| (6.0 * th).cos() + 0.5 * i as f64)
}
