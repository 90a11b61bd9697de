//! Grid functions on `{symbols} x RP^1` and the discrete norms.
//!
//! A [`GridFunction`] holds `w(i, x_m)` at the angle nodes
//! `theta_m = m pi / N`, `m = 0..N`, with node `N` identified with node 0.
//! Between nodes it is linear in the angle. Functions depend on the
//! sequence only through its first symbol, so the symbol metric reduces to
//! 1 for distinct symbols.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::projective::{angle_chart, ProjPoint};

/// Largest grid for which the seminorm visits every node pair.
pub const EXACT_SEMINORM_MAX_N: usize = 2048;
/// Pair budget per symbol for the sampled seminorm above that size.
pub const SAMPLED_SEMINORM_PAIRS: usize = 1_000_000;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_THETA: f64 = 0.25;

/// Scalars a grid function can hold: `f64` or `Complex64`.
pub trait Value:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
{
    const IS_COMPLEX: bool;
    fn zero() -> Self;
    fn from_real(v: f64) -> Self;
    /// Real types keep only the real part.
    fn from_complex_lossy(c: Complex64) -> Self;
    fn modulus(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl Value for f64 {
    const IS_COMPLEX: bool = false;
    #[inline]
    fn from_complex_lossy(c: Complex64) -> Self {
        c.re
    }
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn from_real(v: f64) -> Self {
        v
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Value for Complex64 {
    const IS_COMPLEX: bool = true;
    #[inline]
    fn from_complex_lossy(c: Complex64) -> Self {
        c
    }
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn from_real(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Hölder exponent and symbol-metric base of the function space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceParams {
    pub alpha: f64,
    pub theta: f64,
}

impl Default for SpaceParams {
    fn default() -> Self {
        SpaceParams {
            alpha: DEFAULT_ALPHA,
            theta: DEFAULT_THETA,
        }
    }
}

impl SpaceParams {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} not in (0, 1]")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidArgument(format!("theta = {theta} not in (0, 1)")));
        }
        Ok(SpaceParams { alpha, theta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T: Value = f64> {
    k: usize,
    n: usize,
    values: Vec<T>,
    params: SpaceParams,
}

#[inline]
pub fn node_angle(m: usize, n: usize) -> f64 {
    m as f64 * PI / n as f64
}

impl<T: Value> GridFunction<T> {
    /// `values` is symbol-major: `values[i * n + m] = w(i, x_m)`.
    pub fn new(k: usize, n: usize, values: Vec<T>, params: SpaceParams) -> Result<Self> {
        if k == 0 || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid function needs k >= 1 and N >= 2 (got k = {k}, N = {n})"
            )));
        }
        if values.len() != k * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for k = {k}, N = {n}, got {}",
                k * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::InvalidArgument("grid function has non-finite values".into()));
        }
        Ok(GridFunction { k, n, values, params })
    }

    pub fn constant(k: usize, n: usize, c: T, params: SpaceParams) -> Self {
        GridFunction {
            k,
            n,
            values: vec![c; k * n],
            params,
        }
    }

    /// Samples `f(symbol, angle)` at the nodes.
    pub fn from_fn(k: usize, n: usize, params: SpaceParams, f: impl Fn(usize, f64) -> T) -> Self {
        let values = (0..k)
            .flat_map(|i| (0..n).map(move |m| (i, m)))
            .map(|(i, m)| f(i, node_angle(m, n)))
            .collect();
        GridFunction { k, n, values, params }
    }

    pub(crate) fn from_raw(k: usize, n: usize, values: Vec<T>, params: SpaceParams) -> Self {
        debug_assert_eq!(values.len(), k * n);
        GridFunction { k, n, values, params }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> SpaceParams {
        self.params
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Node values of one symbol.
    pub fn symbol(&self, i: usize) -> &[T] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn at(&self, i: usize, m: usize) -> T {
        self.values[i * self.n + m]
    }

    /// Linear interpolation in the angle, with wraparound at `pi`.
    pub fn eval_angle(&self, i: usize, theta: f64) -> T {
        let s = crate::projective::fold_angle(theta) * self.n as f64 / PI;
        let base = s.floor();
        let frac = s - base;
        let lo = (base as usize) % self.n;
        let hi = (lo + 1) % self.n;
        self.at(i, lo) * (1.0 - frac) + self.at(i, hi) * frac
    }

    pub fn eval(&self, i: usize, x: &ProjPoint) -> Result<T> {
        if i >= self.k {
            return Err(Error::IndexOutOfRange { symbol: i, k: self.k });
        }
        Ok(self.eval_angle(i, angle_chart(x)?))
    }

    pub fn map<U: Value>(&self, f: impl Fn(T) -> U) -> GridFunction<U> {
        GridFunction {
            k: self.k,
            n: self.n,
            values: self.values.iter().map(|&v| f(v)).collect(),
            params: self.params,
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_shape(other)?;
        Ok(GridFunction {
            k: self.k,
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            params: self.params,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn check_shape<U: Value>(&self, other: &GridFunction<U>) -> Result<()> {
        if self.k != other.k || self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "grid functions have shapes (k = {}, N = {}) and (k = {}, N = {})",
                self.k, self.n, other.k, other.n
            )));
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(self)
    }

    pub fn holder_seminorm(&self) -> f64 {
        holder_seminorm(self)
    }
}

impl GridFunction<f64> {
    /// Hat function of node `m` for symbol `i`, zero elsewhere.
    pub fn hat(k: usize, n: usize, i: usize, m: usize, params: SpaceParams) -> Self {
        let mut values = vec![0.0; k * n];
        values[i * n + m] = 1.0;
        GridFunction { k, n, values, params }
    }

    /// Indicator of the symbol `i`.
    pub fn symbol_indicator(k: usize, n: usize, i: usize, params: SpaceParams) -> Self {
        Self::from_fn(k, n, params, |s, _| if s == i { 1.0 } else { 0.0 })
    }

    pub fn to_complex(&self) -> GridFunction<Complex64> {
        self.map(Complex64::from)
    }

    /// Random trigonometric polynomial of degree `max_freq` in `2 theta`
    /// for each symbol, coefficients uniform in `[-1, 1]`.
    pub fn random_band_limited<R: Rng + ?Sized>(
        k: usize,
        n: usize,
        max_freq: usize,
        params: SpaceParams,
        rng: &mut R,
    ) -> Self {
        let coeffs: Vec<Vec<(f64, f64)>> = (0..k)
            .map(|_| {
                (0..=max_freq)
                    .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        Self::from_fn(k, n, params, |i, th| {
            coeffs[i]
                .iter()
                .enumerate()
                .map(|(f, (a, b))| {
                    let (s, c) = (2.0 * f as f64 * th).sin_cos();
                    a * c + if f == 0 { 0.0 } else { b * s }
                })
                .sum()
        })
    }
}

/// `max |w(i, x_m)|` over all symbols and nodes.
pub fn sup_norm<T: Value>(w: &GridFunction<T>) -> f64 {
    w.values.iter().fold(0.0_f64, |acc, v| acc.max(v.modulus()))
}

/// Discrete `|w|_{theta, alpha}`.
///
/// The supremum over arbitrary pairs splits into an angle part (same
/// symbol, `|dw| / d^alpha`) and a symbol part (same node, denominator
/// `d_theta = 1`); a mixed pair never exceeds the larger of the two.
pub fn holder_seminorm<T: Value>(w: &GridFunction<T>) -> f64 {
    angle_part(w).max(symbol_part(w))
}

fn symbol_part<T: Value>(w: &GridFunction<T>) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..w.k {
        for j in i + 1..w.k {
            let (a, b) = (w.symbol(i), w.symbol(j));
            for m in 0..w.n {
                best = best.max((a[m] - b[m]).modulus());
            }
        }
    }
    best
}

fn angle_part<T: Value>(w: &GridFunction<T>) -> f64 {
    let n = w.n;
    let offsets = seminorm_offsets(n);
    let alpha = w.params.alpha;
    // d(x_m, x_{m + off}) = |sin(off pi / N)| depends only on the offset.
    offsets
        .par_iter()
        .map(|&off| {
            let denom = node_angle(off, n).sin().abs().powf(alpha);
            let mut best = 0.0_f64;
            for i in 0..w.k {
                let row = w.symbol(i);
                for m in 0..n {
                    let diff = (row[m] - row[(m + off) % n]).modulus();
                    best = best.max(diff);
                }
            }
            best / denom
        })
        .reduce(|| 0.0, f64::max)
}

/// Node offsets visited by the seminorm. Offsets `off` and `N - off`
/// cover the same unordered pairs, so only `1..=N/2` is needed.
fn seminorm_offsets(n: usize) -> Vec<usize> {
    let half = n / 2;
    if n <= EXACT_SEMINORM_MAX_N {
        return (1..=half).collect();
    }
    // Every node, a stratified subset of offsets: all the short ones plus
    // an even spread of the long ones.
    let budget = (SAMPLED_SEMINORM_PAIRS / n).max(2);
    let short = budget / 2;
    let long = budget - short;
    let mut offs: Vec<usize> = (1..=short.min(half)).collect();
    for q in 0..long {
        let off = short + 1 + (q * (half - short)) / long.max(1);
        if off <= half {
            offs.push(off);
        }
    }
    offs.sort_unstable();
    offs.dedup();
    offs
}
