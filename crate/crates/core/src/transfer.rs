//! Markovian transfer operators on grid functions.
//!
//! For functions of `(w0, x)` the parametrised operator reads
//!
//! ```text
//! (L_t w)(j, x) = sum_i P[i][j] exp(t log |M_i x|) w(i, M_i . x)
//! ```
//!
//! and the weighted operator replaces the exponential by
//! `exp(g(i, M_i . x))`. Off-grid images `M_i . x_m` are resolved by
//! linear interpolation in the angle, so every operator is a sparse
//! matrix with `2k` entries per row. The stencils (image node, fraction,
//! log-gain) are computed once per [`Discretization`] and shared by all
//! operators built on it.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::funcspace::{node_angle, GridFunction, SpaceParams, Value};
use crate::linalg::MatrixFamily;
use crate::markov::MarkovChainSpec;
use crate::projective::fold_angle;

pub const DEFAULT_GRID: usize = 1024;
pub const DEFAULT_T_MAX: f64 = 0.5;
pub const EIGEN_TOL: f64 = 1e-12;
pub const EIGEN_MAX_ITER: usize = 100_000;
pub const MEASURE_TOL: f64 = 1e-14;
/// Gap fits at or above this rate are flagged as "no gap".
pub const NO_GAP_RATE: f64 = 0.99;
/// Residuals below this are treated as exact convergence in gap fits.
pub const GAP_FLOOR: f64 = 1e-13;

/// Images this close to a node (in grid units) land on it.
const SNAP_TOL: f64 = 1e-10;
const PERIOD2_TOL: f64 = 1e-9;
const PERIOD2_STREAK: usize = 20;
const TRACE_KEEP: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Stencil {
    lo: u32,
    hi: u32,
    frac: f64,
    /// `log |M_i x_m|`.
    gain: f64,
}

/// Family, chain and grid geometry. Requires d = 2.
#[derive(Debug)]
pub struct Discretization {
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: usize,
    params: SpaceParams,
    /// Indexed `i * n + m`.
    stencils: Vec<Stencil>,
    /// Flattened backward kernel, `p[i * k + j] = P[i][j]`.
    p: Vec<f64>,
}

impl Discretization {
    pub fn new(
        family: MatrixFamily,
        chain: MarkovChainSpec,
        n: usize,
        params: SpaceParams,
    ) -> Result<Arc<Self>> {
        if family.dim() != 2 {
            return Err(Error::UnsupportedDimension {
                dim: family.dim(),
                what: "the grid transfer operator",
            });
        }
        if family.len() != chain.k() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrices but {} chain states",
                family.len(),
                chain.k()
            )));
        }
        if n < 4 || n > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("grid size N = {n} out of range")));
        }
        let k = chain.k();
        let stencils = (0..k)
            .flat_map(|i| (0..n).map(move |m| (i, m)))
            .map(|(i, m)| {
                let mat = family.get(i).matrix().as_slice();
                let (s, c) = node_angle(m, n).sin_cos();
                let y0 = mat[0] * c + mat[1] * s;
                let y1 = mat[2] * c + mat[3] * s;
                let pos = fold_angle(y1.atan2(y0)) * n as f64 / std::f64::consts::PI;
                let mut base = pos.floor();
                let mut frac = pos - base;
                if frac < SNAP_TOL {
                    frac = 0.0;
                } else if frac > 1.0 - SNAP_TOL {
                    base += 1.0;
                    frac = 0.0;
                }
                let lo = (base as usize) % n;
                Stencil {
                    lo: lo as u32,
                    hi: ((lo + 1) % n) as u32,
                    frac,
                    gain: y0.hypot(y1).ln(),
                }
            })
            .collect();
        let p = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| chain.p(i, j))
            .collect();
        Ok(Arc::new(Discretization {
            family,
            chain,
            n,
            params,
            stencils,
            p,
        }))
    }

    pub fn k(&self) -> usize {
        self.chain.k()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> SpaceParams {
        self.params
    }

    pub fn family(&self) -> &MatrixFamily {
        &self.family
    }

    pub fn chain(&self) -> &MarkovChainSpec {
        &self.chain
    }

    pub fn ones(&self) -> GridFunction<f64> {
        GridFunction::constant(self.k(), self.n, 1.0, self.params)
    }

    /// `log |M_i x_m|` at every node, symbol-major.
    pub fn log_gains(&self) -> GridFunction<f64> {
        GridFunction::from_raw(
            self.k(),
            self.n,
            self.stencils.iter().map(|s| s.gain).collect(),
            self.params,
        )
    }

    #[inline]
    fn p(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.k() + j]
    }
}

/// Multiplicative weight of an operator.
#[derive(Debug, Clone)]
pub enum Weight {
    /// `exp(t log |M_i x|)`.
    Parametric(Complex64),
    /// `exp(g(i, M_i . x))` for a grid function `g`.
    General(GridFunction<Complex64>),
}

#[derive(Debug, Clone)]
enum Factors {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// A transfer operator ready to apply.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    disc: Arc<Discretization>,
    weight: Weight,
    factors: Factors,
}

impl TransferOperator {
    /// `L_t` for real `t`.
    pub fn parametric(disc: &Arc<Discretization>, t: f64) -> Self {
        let factors = disc.stencils.iter().map(|s| (t * s.gain).exp()).collect();
        TransferOperator {
            disc: Arc::clone(disc),
            weight: Weight::Parametric(Complex64::new(t, 0.0)),
            factors: Factors::Real(factors),
        }
    }

    /// `L_t` for complex `t`.
    pub fn complex(disc: &Arc<Discretization>, t: Complex64) -> Self {
        if t.im == 0.0 {
            return Self::parametric(disc, t.re);
        }
        let factors = disc.stencils.iter().map(|s| (t * s.gain).exp()).collect();
        TransferOperator {
            disc: Arc::clone(disc),
            weight: Weight::Parametric(t),
            factors: Factors::Complex(factors),
        }
    }

    /// `L_g` with the weight `exp(g(i, M_i . x))`, `g` interpolated at the
    /// image point.
    pub fn weighted(disc: &Arc<Discretization>, g: GridFunction<Complex64>) -> Result<Self> {
        if g.k() != disc.k() || g.n() != disc.n {
            return Err(Error::DimensionMismatch(format!(
                "weight has shape (k = {}, N = {}), operator (k = {}, N = {})",
                g.k(),
                g.n(),
                disc.k(),
                disc.n
            )));
        }
        let n = disc.n;
        let values: Vec<Complex64> = disc
            .stencils
            .iter()
            .enumerate()
            .map(|(idx, s)| {
                let i = idx / n;
                let v = g.at(i, s.lo as usize) * (1.0 - s.frac) + g.at(i, s.hi as usize) * s.frac;
                v.exp()
            })
            .collect();
        let factors = if values.iter().all(|v| v.im == 0.0) {
            Factors::Real(values.iter().map(|v| v.re).collect())
        } else {
            Factors::Complex(values)
        };
        Ok(TransferOperator {
            disc: Arc::clone(disc),
            weight: Weight::General(g),
            factors,
        })
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    /// True when the operator maps real functions to real functions.
    pub fn is_real(&self) -> bool {
        matches!(self.factors, Factors::Real(_))
    }

    /// Parameter `t` of a parametric operator.
    pub fn t(&self) -> Option<Complex64> {
        match self.weight {
            Weight::Parametric(t) => Some(t),
            Weight::General(_) => None,
        }
    }

    /// Applies the operator to a real function. Fails for complex weights.
    pub fn apply(&self, w: &GridFunction<f64>) -> Result<GridFunction<f64>> {
        if !self.is_real() {
            return Err(Error::InvalidArgument(
                "complex-weighted operator applied to a real function".into(),
            ));
        }
        self.apply_any(w)
    }

    pub fn apply_complex(&self, w: &GridFunction<Complex64>) -> Result<GridFunction<Complex64>> {
        self.apply_any(w)
    }

    /// Applies the operator to a real or complex function. A complex
    /// weight applied to a real function is an error.
    pub fn apply_any<T: Value>(&self, w: &GridFunction<T>) -> Result<GridFunction<T>> {
        let disc = &*self.disc;
        if w.k() != disc.k() || w.n() != disc.n {
            return Err(Error::DimensionMismatch(format!(
                "function has shape (k = {}, N = {}), operator (k = {}, N = {})",
                w.k(),
                w.n(),
                disc.k(),
                disc.n
            )));
        }
        let values = match &self.factors {
            Factors::Real(f) => kernel(disc, w.values(), |idx| T::from_real(f[idx])),
            Factors::Complex(f) => {
                if !T::IS_COMPLEX {
                    return Err(Error::InvalidArgument(
                        "complex-weighted operator applied to a real function".into(),
                    ));
                }
                kernel(disc, w.values(), |idx| T::from_complex_lossy(f[idx]))
            }
        };
        Ok(GridFunction::from_raw(disc.k(), disc.n, values, w.params()))
    }

    /// `L^n w`.
    pub fn apply_power<T: Value>(&self, w: &GridFunction<T>, n: usize) -> Result<GridFunction<T>> {
        let mut cur = w.clone();
        for _ in 0..n {
            cur = self.apply_any(&cur)?;
        }
        Ok(cur)
    }
}

/// One application. Each output node sums its `k` contributions in
/// symbol order, so the result does not depend on the thread count.
fn kernel<T: Value>(disc: &Discretization, w: &[T], factor: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let k = disc.k();
    let n = disc.n;
    (0..k * n)
        .into_par_iter()
        .with_min_len(512)
        .map(|out| {
            let (j, m) = (out / n, out % n);
            let mut acc = T::zero();
            for i in 0..k {
                let idx = i * n + m;
                let s = &disc.stencils[idx];
                let base = i * n;
                let interp = w[base + s.lo as usize] * (1.0 - s.frac) + w[base + s.hi as usize] * s.frac;
                acc = acc + factor(idx) * interp * disc.p(i, j);
            }
            acc
        })
        .collect()
}

/// Result of power iteration for the leading eigenvalue.
#[derive(Debug, Clone)]
pub struct LeadingEigen {
    pub beta: f64,
    /// Positive eigenfunction with sup norm 1.
    pub eigenfunction: GridFunction<f64>,
    pub iterations: usize,
    /// Last ratios of the iteration (oldest first).
    pub ratio_trace: Vec<f64>,
    /// Ratios settled into a 2-cycle; `beta` is the mean of the two values.
    pub possibly_non_simple: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: EIGEN_TOL,
            max_iter: EIGEN_MAX_ITER,
        }
    }
}

fn push_trace(trace: &mut Vec<f64>, v: f64) {
    if trace.len() == TRACE_KEEP {
        trace.remove(0);
    }
    trace.push(v);
}

/// `beta(t)` and its eigenfunction by power iteration from the constant
/// function, normalizing by the sup norm each step.
pub fn leading_eigenvalue(op: &TransferOperator, opts: EigenOptions) -> Result<LeadingEigen> {
    if !op.is_real() {
        return Err(Error::InvalidArgument(
            "leading eigenvalue needs a real (positive) operator".into(),
        ));
    }
    let mut v = op.disc.ones();
    let mut trace = Vec::new();
    let (mut prev, mut prev2) = (f64::NAN, f64::NAN);
    let mut streak = 0usize;
    for it in 1..=opts.max_iter {
        let u = op.apply(&v)?;
        let r = u.sup_norm();
        if !(r > 0.0) || !r.is_finite() {
            push_trace(&mut trace, r);
            return Err(Error::Convergence {
                what: "leading eigenvalue (degenerate iterate)",
                iterations: it,
                trace,
            });
        }
        v = u.scale(1.0 / r);
        push_trace(&mut trace, r);
        if (r - prev).abs() < opts.tol {
            return Ok(LeadingEigen {
                beta: r,
                eigenfunction: v,
                iterations: it,
                ratio_trace: trace,
                possibly_non_simple: false,
            });
        }
        if (r - prev2).abs() < PERIOD2_TOL && (r - prev).abs() > PERIOD2_TOL {
            streak += 1;
            if streak >= PERIOD2_STREAK {
                return Ok(LeadingEigen {
                    beta: 0.5 * (r + prev),
                    eigenfunction: v,
                    iterations: it,
                    ratio_trace: trace,
                    possibly_non_simple: true,
                });
            }
        } else {
            streak = 0;
        }
        prev2 = prev;
        prev = r;
    }
    Err(Error::Convergence {
        what: "leading eigenvalue",
        iterations: opts.max_iter,
        trace,
    })
}

/// `beta(t)` for real `t`, with `|t| <= t_max`.
pub fn beta(disc: &Arc<Discretization>, t: f64, t_max: f64) -> Result<f64> {
    if t.abs() > t_max {
        return Err(Error::InvalidArgument(format!("|t| = {} exceeds t_max = {t_max}", t.abs())));
    }
    Ok(leading_eigenvalue(&TransferOperator::parametric(disc, t), EigenOptions::default())?.beta)
}

/// Fixed probability measure of the adjoint of the discretized `L_0`.
#[derive(Debug, Clone)]
pub struct EigenMeasure {
    k: usize,
    n: usize,
    weights: Vec<f64>,
    masses: Vec<f64>,
    pub iterations: usize,
    /// L1 change of the last iteration.
    pub residual: f64,
}

impl EigenMeasure {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Node weights, symbol-major.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn symbol_weights(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// Per-symbol masses `q_i`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Angle marginal (summed over symbols).
    pub fn angle_marginal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|m| (0..self.k).map(|i| self.weights[i * self.n + m]).sum())
            .collect()
    }

    pub fn integrate<T: Value>(&self, w: &GridFunction<T>) -> Result<T> {
        q_projection(self, w)
    }
}

/// Power iteration on the transpose of the discretized `L_0`, started from
/// `pi_i / N` at every node.
pub fn eigenmeasure(disc: &Discretization) -> Result<EigenMeasure> {
    eigenmeasure_with(disc, MEASURE_TOL, EIGEN_MAX_ITER)
}

pub fn eigenmeasure_with(disc: &Discretization, tol: f64, max_iter: usize) -> Result<EigenMeasure> {
    let k = disc.k();
    let n = disc.n;
    let pi = disc.chain.pi();
    let mut nu: Vec<f64> = (0..k * n).map(|idx| pi[idx / n] / n as f64).collect();
    let mut next = vec![0.0; k * n];
    let mut pulled = vec![0.0; k * n];
    let mut trace = Vec::new();
    for it in 1..=max_iter {
        // pulled[i][m] = sum_j P[i][j] nu[j][m]; then scatter along stencils.
        for i in 0..k {
            for m in 0..n {
                pulled[i * n + m] = (0..k).map(|j| disc.p(i, j) * nu[j * n + m]).sum();
            }
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        for (idx, s) in disc.stencils.iter().enumerate() {
            let base = (idx / n) * n;
            let mass = pulled[idx];
            next[base + s.lo as usize] += mass * (1.0 - s.frac);
            next[base + s.hi as usize] += mass * s.frac;
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let diff: f64 = nu.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut nu, &mut next);
        push_trace(&mut trace, diff);
        if diff < tol {
            let masses = (0..k).map(|i| nu[i * n..(i + 1) * n].iter().sum()).collect();
            return Ok(EigenMeasure {
                k,
                n,
                weights: nu,
                masses,
                iterations: it,
                residual: diff,
            });
        }
    }
    Err(Error::Convergence {
        what: "eigenmeasure",
        iterations: max_iter,
        trace,
    })
}

/// `Q w = sum_{i,m} nu[i][m] w(i, x_m)`.
pub fn q_projection<T: Value>(nu: &EigenMeasure, w: &GridFunction<T>) -> Result<T> {
    if w.k() != nu.k || w.n() != nu.n {
        return Err(Error::DimensionMismatch(format!(
            "measure has shape (k = {}, N = {}), function (k = {}, N = {})",
            nu.k,
            nu.n,
            w.k(),
            w.n()
        )));
    }
    Ok(nu
        .weights
        .iter()
        .zip(w.values())
        .fold(T::zero(), |acc, (&p, &v)| acc + v * p))
}

/// Decay of `|L_0^n w - Q w|_inf` for one probe.
#[derive(Debug, Clone)]
pub struct ProbeDecay {
    /// `r_n` for `n = 0..=n_max` (truncated at early success).
    pub residuals: Vec<f64>,
    pub rate: f64,
    /// Residual fell below [`GAP_FLOOR`]; `rate` is an upper bound.
    pub upper_bound: bool,
}

#[derive(Debug, Clone)]
pub struct SpectralGap {
    /// Slowest probe rate.
    pub rate: f64,
    pub probes: Vec<ProbeDecay>,
    pub window: (usize, usize),
    /// Rate at or above [`NO_GAP_RATE`]; reported, not an error.
    pub no_gap: bool,
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits `log r_n` against `n` over `window` for each probe and returns
/// the slowest `exp(slope)`.
pub fn spectral_gap(
    disc: &Arc<Discretization>,
    nu: &EigenMeasure,
    probes: &[GridFunction<f64>],
    window: (usize, usize),
) -> Result<SpectralGap> {
    let (n1, n2) = window;
    if n1 >= n2 {
        return Err(Error::InvalidArgument(format!("gap window [{n1}, {n2}] is empty")));
    }
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probes for spectral gap".into()));
    }
    let op = TransferOperator::parametric(disc, 0.0);
    let mut decays = Vec::with_capacity(probes.len());
    for w in probes {
        let q = q_projection(nu, w)?;
        let mut cur = w.clone();
        let mut residuals = Vec::with_capacity(n2 + 1);
        let mut early = None;
        for step in 0..=n2 {
            if step > 0 {
                cur = op.apply(&cur)?;
            }
            let r = cur.values().iter().fold(0.0_f64, |a, v| a.max((v - q).abs()));
            residuals.push(r);
            if r < GAP_FLOOR {
                early = Some(step);
                break;
            }
        }
        let decay = match early {
            Some(0) => ProbeDecay {
                residuals,
                rate: 0.0,
                upper_bound: true,
            },
            Some(step) => {
                let rate = (GAP_FLOOR / residuals[0]).powf(1.0 / step as f64);
                ProbeDecay {
                    residuals,
                    rate,
                    upper_bound: true,
                }
            }
            None => {
                let xs: Vec<f64> = (n1..=n2).map(|v| v as f64).collect();
                let ys: Vec<f64> = (n1..=n2).map(|v| residuals[v].ln()).collect();
                ProbeDecay {
                    residuals,
                    rate: ls_slope(&xs, &ys).exp(),
                    upper_bound: false,
                }
            }
        };
        decays.push(decay);
    }
    let rate = decays.iter().map(|d| d.rate).fold(0.0, f64::max);
    Ok(SpectralGap {
        rate,
        probes: decays,
        window,
        no_gap: rate >= NO_GAP_RATE,
    })
}

/// First-order perturbation of `beta` at 0 with right eigenfunction 1 and
/// left eigenmeasure `nu`:
/// `gamma = sum_{j,m} nu[j][m] sum_i P[i][j] log |M_i x_m|`.
pub fn lyapunov_via_perturbation(disc: &Discretization, nu: &EigenMeasure) -> Result<f64> {
    if nu.k != disc.k() || nu.n != disc.n {
        return Err(Error::DimensionMismatch("measure and discretization differ".into()));
    }
    let k = disc.k();
    let n = disc.n;
    let mut total = 0.0;
    for j in 0..k {
        for m in 0..n {
            let drift: f64 = (0..k).map(|i| disc.p(i, j) * disc.stencils[i * n + m].gain).sum();
            total += nu.weights[j * n + m] * drift;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaDerivative {
    pub h: f64,
    /// Central difference of `log beta` with step `h`.
    pub raw: f64,
    /// Same with step `h / 2`.
    pub raw_half: f64,
    /// One Richardson level: `(4 raw_half - raw) / 3`.
    pub extrapolated: f64,
}

/// `(log beta(h) - log beta(-h)) / 2h`.
pub fn central_difference(disc: &Arc<Discretization>, h: f64) -> Result<f64> {
    let opts = EigenOptions::default();
    let plus = leading_eigenvalue(&TransferOperator::parametric(disc, h), opts)?.beta;
    let minus = leading_eigenvalue(&TransferOperator::parametric(disc, -h), opts)?.beta;
    Ok((plus.ln() - minus.ln()) / (2.0 * h))
}

pub fn lyapunov_via_beta_derivative(disc: &Arc<Discretization>, h: f64) -> Result<BetaDerivative> {
    if !(1e-5..=1e-1).contains(&h.abs()) {
        return Err(Error::InvalidArgument(format!("step h = {h} not in [1e-5, 1e-1]")));
    }
    let raw = central_difference(disc, h)?;
    let raw_half = central_difference(disc, 0.5 * h)?;
    Ok(BetaDerivative {
        h,
        raw,
        raw_half,
        extrapolated: (4.0 * raw_half - raw) / 3.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaStep {
    pub n: usize,
    pub sup_norm: f64,
    pub seminorm: f64,
}

/// Fitted Lasota-Yorke bound `|L^n w|_{theta,alpha} <= C |w|_inf + delta^n |w|_{theta,alpha}`.
#[derive(Debug, Clone)]
pub struct LasotaYorke {
    pub steps: Vec<LaStep>,
    /// Least-squares `C` at the fitted `delta`.
    pub c_fit: f64,
    pub delta: f64,
    /// Smallest `C` that makes the bound hold at every step for `delta`.
    pub c_envelope: f64,
    /// Largest `seminorm_n - (c_fit |w| + delta^n |w|_a)`, relative to
    /// `c_fit |w| + |w|_a`.
    pub max_excess: f64,
    /// For purely imaginary `t`: `max_n |L^n w|_inf - |w|_inf`.
    pub sup_growth: Option<f64>,
    /// `delta` at or above 1: no contraction observed.
    pub no_contraction: bool,
}

const DELTA_GRID: usize = 1500;
const DELTA_MAX: f64 = 1.5;

/// Trajectory of `(|L^n w|_inf, |L^n w|_{theta,alpha})` for `n = 0..=n_max`
/// and the fitted `(C, delta)`.
pub fn lasota_yorke_probe(
    op: &TransferOperator,
    w: &GridFunction<Complex64>,
    n_max: usize,
) -> Result<LasotaYorke> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be positive".into()));
    }
    let imaginary = matches!(op.t(), Some(t) if t.re == 0.0 && t.im != 0.0);
    let mut steps = Vec::with_capacity(n_max + 1);
    let mut cur = w.clone();
    for n in 0..=n_max {
        if n > 0 {
            cur = op.apply_complex(&cur)?;
        }
        steps.push(LaStep {
            n,
            sup_norm: cur.sup_norm(),
            seminorm: cur.holder_seminorm(),
        });
    }
    let sup0 = steps[0].sup_norm;
    let semi0 = steps[0].seminorm;
    let sup_growth = imaginary.then(|| {
        steps
            .iter()
            .map(|s| s.sup_norm - sup0)
            .fold(f64::NEG_INFINITY, f64::max)
    });

    let (c_fit, delta, c_envelope, max_excess) = fit_lasota_yorke(&steps[1..], sup0, semi0);
    Ok(LasotaYorke {
        steps,
        c_fit,
        delta,
        c_envelope,
        max_excess,
        sup_growth,
        no_contraction: delta >= 1.0,
    })
}

fn fit_lasota_yorke(steps: &[LaStep], sup0: f64, semi0: f64) -> (f64, f64, f64, f64) {
    if sup0 == 0.0 || steps.is_empty() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for q in 1..=DELTA_GRID {
        let delta = DELTA_MAX * q as f64 / DELTA_GRID as f64;
        let c = steps
            .iter()
            .map(|s| s.seminorm - delta.powi(s.n as i32) * semi0)
            .sum::<f64>()
            / (steps.len() as f64 * sup0);
        let c = c.max(0.0);
        let sse: f64 = steps
            .iter()
            .map(|s| (s.seminorm - c * sup0 - delta.powi(s.n as i32) * semi0).powi(2))
            .sum();
        if sse < best.0 {
            best = (sse, c, delta);
        }
    }
    let (_, c_fit, delta) = best;
    let c_envelope = steps
        .iter()
        .map(|s| (s.seminorm - delta.powi(s.n as i32) * semi0) / sup0)
        .fold(c_fit, f64::max);
    let scale = c_fit * sup0 + semi0;
    let max_excess = steps
        .iter()
        .map(|s| s.seminorm - c_fit * sup0 - delta.powi(s.n as i32) * semi0)
        .fold(0.0_f64, f64::max)
        / scale.max(f64::MIN_POSITIVE);
    (c_fit, delta, c_envelope, max_excess)
}

impl LasotaYorke {
    /// Largest `seminorm_n - (c |w|_inf + delta^n |w|_a)` over the trace,
    /// relative to `c |w|_inf + |w|_a`. Non-positive when the bound holds.
    pub fn bound_violation(&self, c: f64, delta: f64) -> f64 {
        let (sup0, semi0) = (self.steps[0].sup_norm, self.steps[0].seminorm);
        let scale = (c * sup0 + semi0).max(f64::MIN_POSITIVE);
        self.steps[1..]
            .iter()
            .map(|s| (s.seminorm - c * sup0 - delta.powi(s.n as i32) * semi0) / scale)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One `(C, delta)` for several probe traces of the same operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLasotaYorke {
    pub delta: f64,
    /// Least-squares `C` at `delta`.
    pub c_fit: f64,
    /// Smallest `C` making the bound hold on every trace at `delta`.
    pub c_envelope: f64,
}

/// Least-squares fit of a common `(C, delta)`, each trace weighted by
/// `1 / (|w|_inf + |w|_a)`.
pub fn fit_lasota_yorke_joint(traces: &[LasotaYorke]) -> Result<JointLasotaYorke> {
    let rows: Vec<(f64, f64, f64, &[LaStep])> = traces
        .iter()
        .filter(|t| t.steps[0].sup_norm > 0.0)
        .map(|t| {
            let (sup0, semi0) = (t.steps[0].sup_norm, t.steps[0].seminorm);
            (sup0, semi0, 1.0 / (sup0 + semi0), &t.steps[1..])
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no non-zero probe traces".into()));
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for q in 1..=DELTA_GRID {
        let delta = DELTA_MAX * q as f64 / DELTA_GRID as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for &(sup0, semi0, wt, steps) in &rows {
            for s in steps {
                let r = s.seminorm - delta.powi(s.n as i32) * semi0;
                num += wt * wt * sup0 * r;
                den += wt * wt * sup0 * sup0;
            }
        }
        let c = (num / den).max(0.0);
        let sse: f64 = rows
            .iter()
            .flat_map(|&(sup0, semi0, wt, steps)| {
                steps
                    .iter()
                    .map(move |s| (wt * (s.seminorm - c * sup0 - delta.powi(s.n as i32) * semi0)).powi(2))
            })
            .sum();
        if sse < best.0 {
            best = (sse, c, delta);
        }
    }
    let (_, c_fit, delta) = best;
    let c_envelope = rows
        .iter()
        .flat_map(|&(sup0, semi0, _, steps)| {
            steps
                .iter()
                .map(move |s| (s.seminorm - delta.powi(s.n as i32) * semi0) / sup0)
        })
        .fold(c_fit, f64::max);
    Ok(JointLasotaYorke {
        delta,
        c_fit,
        c_envelope,
    })
}

/// Low-frequency probes for the gap fit: `cos(2 f theta)` plus a symbol
/// offset, `f = 1..=count`.
pub fn default_gap_probes(disc: &Discretization, count: usize) -> Vec<GridFunction<f64>> {
    (1..=count)
        .map(|f| {
            GridFunction::from_fn(disc.k(), disc.n, disc.params, move |i, th| {
                (2.0 * f as f64 * th).cos() + 0.3 * i as f64
            })
        })
        .collect()
}

/// `gamma` by perturbation at each grid size.
pub fn grid_convergence(
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    params: SpaceParams,
    sizes: &[usize],
) -> Result<Vec<(usize, f64)>> {
    sizes
        .iter()
        .map(|&n| {
            let disc = Discretization::new(family.clone(), chain.clone(), n, params)?;
            let nu = eigenmeasure(&disc)?;
            Ok((n, lyapunov_via_perturbation(&disc, &nu)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::markov::build_chain;
    use std::f64::consts::PI;

    fn t2() -> MarkovChainSpec {
        build_chain(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn conformal(n: usize) -> Arc<Discretization> {
        let fam = MatrixFamily::from_matrices(vec![
            Matrix::rotation(1.1).scaled(2.0),
            Matrix::rotation(0.4).scaled(1.0 / 3.0),
        ])
        .unwrap();
        Discretization::new(fam, t2(), n, SpaceParams::default()).unwrap()
    }

    fn contracting(n: usize) -> Arc<Discretization> {
        let a = Matrix::rotation(1.0).mul(&Matrix::diag(&[2.0, 1.0]));
        let shear = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let b = shear.mul(&Matrix::diag(&[1.0, 0.8]));
        let fam = MatrixFamily::from_matrices(vec![a, b]).unwrap();
        Discretization::new(fam, t2(), n, SpaceParams::default()).unwrap()
    }

    fn single(m: Matrix, n: usize) -> Arc<Discretization> {
        let fam = MatrixFamily::from_matrices(vec![m]).unwrap();
        Discretization::new(fam, build_chain(&[vec![1.0]]).unwrap(), n, SpaceParams::default())
            .unwrap()
    }

    /// Perron root of a positive matrix via its characteristic polynomial
    /// (2x2 only).
    fn perron_2x2(b: [[f64; 2]; 2]) -> f64 {
        let tr = b[0][0] + b[1][1];
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        0.5 * (tr + (tr * tr - 4.0 * det).sqrt())
    }

    #[test]
    fn normalization_at_zero() {
        for disc in [conformal(128), contracting(256)] {
            let out = TransferOperator::parametric(&disc, 0.0).apply(&disc.ones()).unwrap();
            assert!(out.values().iter().all(|v| (v - 1.0).abs() <= 1e-14));
        }
    }

    #[test]
    fn conformal_apply_is_x_independent() {
        let disc = conformal(64);
        let t = 0.7;
        let out = TransferOperator::parametric(&disc, t).apply(&disc.ones()).unwrap();
        let c = [2.0f64, 1.0 / 3.0];
        let p = [[0.9, 0.2], [0.1, 0.8]];
        for j in 0..2 {
            let want = p[0][j] * c[0].powf(t) + p[1][j] * c[1].powf(t);
            assert!(out.symbol(j).iter().all(|v| (v - want).abs() < 1e-13));
        }
    }

    #[test]
    fn identity_leaves_functions_unchanged() {
        let disc = single(Matrix::identity(2), 32);
        let w = GridFunction::from_fn(1, 32, SpaceParams::default(), |_, th| (3.0 * th).cos());
        let out = TransferOperator::parametric(&disc, 0.0).apply(&w).unwrap();
        for (a, b) in out.values().iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn apply_shape_mismatch() {
        let disc = conformal(32);
        let w = GridFunction::constant(2, 64, 1.0, SpaceParams::default());
        let err = TransferOperator::parametric(&disc, 0.0).apply(&w).unwrap_err();
        assert_eq!(err.category(), "dimension-mismatch");
        let z = TransferOperator::complex(&disc, Complex64::new(0.0, 0.3));
        assert!(z.apply(&disc.ones()).is_err());
    }

    #[test]
    fn beta_examples() {
        let disc = contracting(256);
        let e = leading_eigenvalue(&TransferOperator::parametric(&disc, 0.0), EigenOptions::default())
            .unwrap();
        assert!((e.beta - 1.0).abs() < 1e-12);
        assert!(e.eigenfunction.values().iter().all(|v| (v - 1.0).abs() < 1e-12));

        let disc = conformal(64);
        let c = [2.0f64, 1.0 / 3.0];
        let p = [[0.9, 0.2], [0.1, 0.8]];
        for t in [-0.3, 0.1, 0.45] {
            let b = [
                [p[0][0] * c[0].powf(t), p[1][0] * c[1].powf(t)],
                [p[0][1] * c[0].powf(t), p[1][1] * c[1].powf(t)],
            ];
            let got = beta(&disc, t, DEFAULT_T_MAX).unwrap();
            assert!((got - perron_2x2(b)).abs() < 1e-11, "t = {t}");
        }
        assert!(beta(&disc, 0.6, DEFAULT_T_MAX).is_err());

        let disc = single(Matrix::rotation(0.3).scaled(1.7), 64);
        for t in [-0.5, 0.25] {
            assert!((beta(&disc, t, DEFAULT_T_MAX).unwrap() - 1.7f64.powf(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenmeasure_examples() {
        // Irrational rotation: uniform.
        let disc = single(Matrix::rotation(2f64.sqrt()), 256);
        let nu = eigenmeasure(&disc).unwrap();
        assert!(nu.weights().iter().all(|w| (w - 1.0 / 256.0).abs() < 1e-12));

        let disc = conformal(128);
        let nu = eigenmeasure(&disc).unwrap();
        assert!((nu.masses()[0] - 2.0 / 3.0).abs() < 1e-8);
        assert!((nu.masses()[1] - 1.0 / 3.0).abs() < 1e-8);

        let fam = MatrixFamily::from_matrices(vec![Matrix::diag(&[2.0, 1.0]), Matrix::diag(&[1.0, 3.0])])
            .unwrap();
        let disc = Discretization::new(fam, t2(), 128, SpaceParams::default()).unwrap();
        let nu = eigenmeasure(&disc).unwrap();
        let marg = nu.angle_marginal();
        assert!(marg[0] + marg[64] > 0.99, "axis mass {}", marg[0] + marg[64]);
    }

    #[test]
    fn q_projection_examples() {
        let disc = contracting(128);
        let nu = eigenmeasure(&disc).unwrap();
        let c = GridFunction::constant(2, 128, 2.5, SpaceParams::default());
        assert!((q_projection(&nu, &c).unwrap() - 2.5).abs() < 1e-13);
        for i in 0..2 {
            let ind = GridFunction::symbol_indicator(2, 128, i, SpaceParams::default());
            assert!((q_projection(&nu, &ind).unwrap() - nu.masses()[i]).abs() < 1e-15);
            assert!((nu.masses()[i] - disc.chain().pi()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_probe_has_no_residual() {
        let disc = contracting(128);
        let nu = eigenmeasure(&disc).unwrap();
        let gap = spectral_gap(&disc, &nu, &[disc.ones()], (10, 40)).unwrap();
        assert!(gap.probes[0].residuals[0] < GAP_FLOOR);
        assert!(gap.probes[0].upper_bound);
    }

    #[test]
    fn perturbation_examples() {
        let disc = single(Matrix::rotation(0.9).scaled(2.5), 64);
        let nu = eigenmeasure(&disc).unwrap();
        assert!((lyapunov_via_perturbation(&disc, &nu).unwrap() - 2.5f64.ln()).abs() < 1e-13);

        let disc = conformal(256);
        let nu = eigenmeasure(&disc).unwrap();
        let exact = (2.0 / 3.0) * 2f64.ln() + (1.0 / 3.0) * (1.0f64 / 3.0).ln();
        assert!((exact - 0.095_894_024).abs() < 1e-8);
        assert!((lyapunov_via_perturbation(&disc, &nu).unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn beta_derivative_examples() {
        let exact = (2.0 / 3.0) * 2f64.ln() + (1.0 / 3.0) * (1.0f64 / 3.0).ln();
        let d = lyapunov_via_beta_derivative(&conformal(64), 1e-2).unwrap();
        assert!((d.extrapolated - exact).abs() < 1e-6);

        let disc = single(Matrix::rotation(0.2).scaled(3.0), 32);
        let d = lyapunov_via_beta_derivative(&disc, 1e-2).unwrap();
        let lc = 3f64.ln();
        // beta(t) = c^t makes the central difference of log beta exact.
        assert!((d.raw - lc).abs() < 1e-10);
        assert!((d.extrapolated - lc).abs() < 1e-10);

        let disc = contracting(128);
        assert_eq!(
            central_difference(&disc, 1e-2).unwrap().to_bits(),
            central_difference(&disc, -1e-2).unwrap().to_bits()
        );
        assert!(lyapunov_via_beta_derivative(&disc, 0.5).is_err());
    }

    #[test]
    fn lasota_yorke_constant_probe() {
        let disc = contracting(64);
        let op = TransferOperator::parametric(&disc, 0.0);
        let w = GridFunction::constant(2, 64, Complex64::new(1.0, 0.0), SpaceParams::default());
        let ly = lasota_yorke_probe(&op, &w, 10).unwrap();
        assert!(ly.steps.iter().all(|s| s.seminorm < 1e-14));
    }

    #[test]
    fn weighted_operator_bound() {
        let disc = contracting(128);
        let g = GridFunction::from_fn(2, 128, SpaceParams::default(), |i, th| {
            Complex64::new(0.3 * (2.0 * th).cos() + 0.1 * i as f64, 0.5 * th.sin())
        });
        let gsup = g.sup_norm();
        let op = TransferOperator::weighted(&disc, g).unwrap();
        let w = GridFunction::from_fn(2, 128, SpaceParams::default(), |_, th| {
            Complex64::new((4.0 * th).sin(), 1.0)
        });
        let out = op.apply_complex(&w).unwrap();
        assert!(out.sup_norm() <= gsup.exp() * w.sup_norm() * (1.0 + 1e-12));
        // A zero weight is L_0.
        let zero = TransferOperator::weighted(
            &disc,
            GridFunction::constant(2, 128, Complex64::new(0.0, 0.0), SpaceParams::default()),
        )
        .unwrap();
        assert!(zero.is_real());
        let ones = zero.apply(&disc.ones()).unwrap();
        assert!(ones.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn positivity_for_real_t() {
        let disc = contracting(128);
        let w = GridFunction::from_fn(2, 128, SpaceParams::default(), |i, th| {
            ((3.0 * th).sin() + i as f64).abs()
        });
        for t in [-0.4, 0.0, 0.3] {
            let out = TransferOperator::parametric(&disc, t).apply(&w).unwrap();
            assert!(out.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let disc = contracting(512);
        let op = TransferOperator::parametric(&disc, 0.2);
        let w = GridFunction::from_fn(2, 512, SpaceParams::default(), |i, th| (th * (i + 1) as f64).cos());
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| op.apply_power(&w, 5).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_other_dimensions() {
        let fam = MatrixFamily::from_matrices(vec![Matrix::identity(3)]).unwrap();
        let err = Discretization::new(fam, build_chain(&[vec![1.0]]).unwrap(), 64, SpaceParams::default())
            .unwrap_err();
        assert_eq!(err.category(), "unsupported-dimension");
        let _ = PI;
    }
}
