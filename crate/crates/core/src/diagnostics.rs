//! Sampling probes for contraction, index, properness and strong
//! irreducibility, plus checks of the `ell` bounds.
//!
//! Every probe here is heuristic: a pass is evidence, not proof.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ell_of, Matrix, MatrixFamily};
use crate::markov::{stream_rng, MarkovChainSpec};
use crate::projective::{fold_angle, unit_metric};
use crate::transfer::EigenMeasure;

pub const CLOSURE_TOL: f64 = 1e-8;
pub const CLOSURE_CAP: usize = 64;
pub const EIGEN_WORD_LEN: usize = 4;
pub const ELL_SLACK: f64 = 1e-9;
/// Ball-mass ratio across the eps range above which a center is an atom.
pub const ATOM_RATIO: f64 = 0.5;

fn check_pair(family: &MatrixFamily, chain: &MarkovChainSpec) -> Result<()> {
    if family.len() != chain.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} matrices but {} chain states",
            family.len(),
            chain.k()
        )));
    }
    Ok(())
}

fn require_2d(family: &MatrixFamily, what: &'static str) -> Result<()> {
    if family.dim() != 2 {
        return Err(Error::UnsupportedDimension { dim: family.dim(), what });
    }
    Ok(())
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= n);
    n
}

fn random_unit<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            normalize(&mut v);
            return v;
        }
    }
}

/// Unit vector at angle `s` from `x` in a random plane through `x`.
fn at_separation<R: Rng>(x: &[f64], s: f64, rng: &mut R) -> Vec<f64> {
    let mut u = loop {
        let mut u = random_unit(x.len(), rng);
        let dot: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
        u.iter_mut().zip(x).for_each(|(a, b)| *a -= dot * b);
        if normalize(&mut u) > 1e-3 {
            break u;
        }
    };
    let (sn, cs) = s.sin_cos();
    u.iter_mut().zip(x).for_each(|(a, b)| *a = cs * b + sn * *a);
    normalize(&mut u);
    u
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub n: usize,
    /// Max over pairs of the path-mean of `d^a(psi x, psi y) / d^a(x, y)`.
    pub ratio: f64,
    /// `ratio^(1/n)`.
    pub delta_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionTable {
    pub alpha: f64,
    pub pairs: usize,
    pub paths_per_pair: usize,
    pub rows: Vec<ContractionRow>,
}

/// Pair separations are log-stratified over `[1e-3, pi/2]`. Each pair is
/// pushed along `paths` independent time-reversed paths, so the partial
/// products are stationary samples of `psi(n)` for every `n`.
pub fn contraction_average(
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    n_max: usize,
    pairs: usize,
    paths: usize,
    alpha: f64,
    seed: u64,
) -> Result<ContractionTable> {
    check_pair(family, chain)?;
    if pairs < 100 {
        return Err(Error::InvalidArgument("at least 100 pairs are needed".into()));
    }
    if n_max == 0 || paths == 0 {
        return Err(Error::InvalidArgument("n_max and paths must be positive".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} not in (0, 1]")));
    }
    let d = family.dim();
    let per_pair: Vec<Vec<f64>> = (0..pairs as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p);
            let lo = 1e-3f64.ln();
            let hi = (PI / 2.0).ln();
            let u = (p as f64 + rng.random::<f64>()) / pairs as f64;
            let s = (lo + u * (hi - lo)).exp();
            let x0 = random_unit(d, &mut rng);
            let y0 = at_separation(&x0, s, &mut rng);
            let base = unit_metric(&x0, &y0).powf(alpha);
            let mut sums = vec![0.0; n_max];
            let (mut xb, mut yb) = (vec![0.0; d], vec![0.0; d]);
            for _ in 0..paths {
                let (mut x, mut y) = (x0.clone(), y0.clone());
                let mut state = chain.sample_initial(&mut rng);
                for (m, slot) in sums.iter_mut().enumerate() {
                    if m > 0 {
                        state = chain.step_backward(state, &mut rng);
                    }
                    let mat = family.get(state).matrix();
                    mat.mul_vec_into(&x, &mut xb);
                    mat.mul_vec_into(&y, &mut yb);
                    normalize(&mut xb);
                    normalize(&mut yb);
                    std::mem::swap(&mut x, &mut xb);
                    std::mem::swap(&mut y, &mut yb);
                    *slot += unit_metric(&x, &y).powf(alpha) / base;
                }
            }
            sums.into_iter().map(|s| s / paths as f64).collect()
        })
        .collect();
    let rows = (0..n_max)
        .map(|m| {
            let ratio = per_pair.iter().map(|v| v[m]).fold(0.0, f64::max);
            ContractionRow {
                n: m + 1,
                ratio,
                delta_hat: ratio.powf(1.0 / (m + 1) as f64),
            }
        })
        .collect();
    Ok(ContractionTable {
        alpha,
        pairs,
        paths_per_pair: paths,
        rows,
    })
}

/// Product of a stationary forward path, rescaled by powers of two.
struct ScaledProduct {
    m: Matrix,
    exp2: i64,
    log_det: f64,
}

impl ScaledProduct {
    fn sample<R: Rng>(family: &MatrixFamily, chain: &MarkovChainSpec, n: usize, rng: &mut R) -> Self {
        let mut state = chain.sample_initial(rng);
        let mut m = family.get(state).matrix().clone();
        let mut log_det = family.get(state).determinant().abs().ln();
        let mut tmp = Matrix::zeros(family.dim());
        let mut exp2 = 0i64;
        for step in 2..=n {
            state = chain.step_forward(state, rng);
            m.mul_into(family.get(state).matrix(), &mut tmp);
            std::mem::swap(&mut m, &mut tmp);
            log_det += family.get(state).determinant().abs().ln();
            if step % 16 == 0 {
                exp2 += rescale(&mut m) as i64;
            }
        }
        exp2 += rescale(&mut m) as i64;
        ScaledProduct { m, exp2, log_det }
    }

    fn log_sigma1(&self) -> f64 {
        self.exp2 as f64 * std::f64::consts::LN_2 + self.m.operator_norm().ln()
    }

    /// `log(sigma_2 / sigma_1)`; exact through the determinant when d = 2.
    fn log_index_ratio(&self) -> f64 {
        if self.m.dim() == 2 {
            self.log_det - 2.0 * self.log_sigma1()
        } else {
            let s = self.m.singular_values();
            (s[1] / s[0]).ln()
        }
    }
}

fn rescale(m: &mut Matrix) -> i32 {
    let e = m.frobenius_norm().log2().round() as i32;
    if e != 0 {
        m.scale_in_place((-e as f64).exp2());
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub n: usize,
    pub samples: usize,
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub q10: f64,
    pub q90: f64,
    /// Median of `log(sigma_2 / sigma_1)`.
    pub median_log: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Distribution of `sigma_2 / sigma_1` over sampled `psi(n)`.
pub fn index_probe(
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<IndexStats> {
    check_pair(family, chain)?;
    if n == 0 || samples == 0 {
        return Err(Error::InvalidArgument("n and samples must be positive".into()));
    }
    let mut logs: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s);
            ScaledProduct::sample(family, chain, n, &mut rng).log_index_ratio().min(0.0)
        })
        .collect();
    logs.sort_by(f64::total_cmp);
    let ratios: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    Ok(IndexStats {
        n,
        samples,
        median: quantile(&ratios, 0.5),
        mean: ratios.iter().sum::<f64>() / samples as f64,
        min: ratios[0],
        max: ratios[samples - 1],
        q10: quantile(&ratios, 0.1),
        q90: quantile(&ratios, 0.9),
        median_log: quantile(&logs, 0.5),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProperCenter {
    pub angle: f64,
    /// Ball mass for each eps.
    pub masses: Vec<f64>,
    pub atom: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProperReport {
    pub eps: Vec<f64>,
    /// Largest ball mass over centers, per eps.
    pub max_mass: Vec<f64>,
    pub centers: Vec<ProperCenter>,
    /// Grid spacing; smaller balls cannot resolve the measure.
    pub resolution: f64,
    pub atom: bool,
}

/// Mass of the `d`-ball of radius `eps` around the line at `center`. Each
/// node's weight is spread evenly over its grid cell.
pub fn ball_mass(nu: &EigenMeasure, center: f64, eps: f64) -> f64 {
    if eps >= 1.0 {
        return 1.0;
    }
    let marginal = nu.angle_marginal();
    ball_mass_marginal(&marginal, center, eps)
}

fn ball_mass_marginal(marginal: &[f64], center: f64, eps: f64) -> f64 {
    if eps >= 1.0 {
        return marginal.iter().sum();
    }
    let n = marginal.len();
    let h = PI / n as f64;
    let a = eps.asin();
    let (b_lo, b_hi) = (center - a, center + a);
    let mut total = 0.0;
    for (m, &w) in marginal.iter().enumerate() {
        let c = m as f64 * h;
        let (c_lo, c_hi) = (c - h / 2.0, c + h / 2.0);
        let mut overlap = 0.0;
        for shift in [-PI, 0.0, PI] {
            let lo = c_lo.max(b_lo + shift);
            let hi = c_hi.min(b_hi + shift);
            if hi > lo {
                overlap += hi - lo;
            }
        }
        total += w * (overlap / h).min(1.0);
    }
    total
}

/// Ball masses around `directions` evenly spaced lines and the eight
/// heaviest nodes. A center is an atom when its mass at the smallest
/// resolvable eps keeps at least [`ATOM_RATIO`] of its mass at the largest
/// eps while the radius shrinks at least fivefold.
pub fn properness_probe(nu: &EigenMeasure, directions: usize, eps_grid: &[f64]) -> Result<ProperReport> {
    if eps_grid.is_empty() || eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument("eps grid must be non-empty and positive".into()));
    }
    let marginal = nu.angle_marginal();
    let n = marginal.len();
    let resolution = PI / n as f64;
    let mut eps: Vec<f64> = eps_grid.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();

    let mut angles: Vec<f64> = (0..directions).map(|q| q as f64 * PI / directions as f64).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| marginal[b].total_cmp(&marginal[a]).then(a.cmp(&b)));
    for &m in order.iter().take(8) {
        let a = m as f64 * resolution;
        if !angles.iter().any(|&b| line_dist(a, b) < 1e-12) {
            angles.push(a);
        }
    }

    let big = eps[0];
    let small = eps.iter().copied().rfind(|&e| e.asin() >= resolution);
    let centers: Vec<ProperCenter> = angles
        .iter()
        .map(|&angle| {
            let masses: Vec<f64> = eps.iter().map(|&e| ball_mass_marginal(&marginal, angle, e)).collect();
            let atom = match small {
                Some(s) if s <= big / 5.0 => {
                    let ms = ball_mass_marginal(&marginal, angle, s);
                    let mb = masses[0];
                    mb > 0.0 && ms / mb >= ATOM_RATIO
                }
                _ => false,
            };
            ProperCenter { angle, masses, atom }
        })
        .collect();
    let max_mass = (0..eps.len())
        .map(|q| centers.iter().map(|c| c.masses[q]).fold(0.0, f64::max))
        .collect();
    let atom = centers.iter().any(|c| c.atom);
    Ok(ProperReport {
        eps,
        max_mass,
        centers,
        resolution,
        atom,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Irreducibility {
    Pass,
    /// Angles in `[0, pi)` of a finite set of lines closed under the family.
    Fail { witness: Vec<f64> },
    Inconclusive,
}

/// Real eigenlines of a 2x2 matrix, as angles. Scalar matrices have none.
fn eigenlines(m: &Matrix) -> Vec<f64> {
    let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let scale = m.max_abs();
    if (b.abs() + c.abs() + (a - d).abs()) <= 1e-12 * scale {
        return Vec::new();
    }
    let disc = (a - d).powi(2) + 4.0 * b * c;
    if disc < -1e-12 * scale * scale {
        return Vec::new();
    }
    let root = disc.max(0.0).sqrt();
    let mut out = Vec::new();
    for lambda in [(a + d + root) / 2.0, (a + d - root) / 2.0] {
        let v1 = [b, lambda - a];
        let v2 = [lambda - d, c];
        let v = if v1[0].hypot(v1[1]) >= v2[0].hypot(v2[1]) { v1 } else { v2 };
        if v[0].hypot(v[1]) > 0.0 {
            out.push(fold_angle(v[1].atan2(v[0])));
        }
    }
    out
}

fn line_dist(a: f64, b: f64) -> f64 {
    (a - b).sin().abs()
}

fn act(m: &Matrix, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let y = m.mul_vec(&[c, s]);
    fold_angle(y[1].atan2(y[0]))
}

/// `Some(orbit)` if the orbit of `seed` closes within the cap.
fn close_orbit(family: &MatrixFamily, seed: f64, tol: f64, cap: usize) -> Option<Vec<f64>> {
    let mut orbit = vec![seed];
    let mut head = 0;
    while head < orbit.len() {
        let line = orbit[head];
        head += 1;
        for m in family.matrices() {
            let img = act(m.matrix(), line);
            if !orbit.iter().any(|&o| line_dist(o, img) < tol) {
                orbit.push(img);
                if orbit.len() > cap {
                    return None;
                }
            }
        }
    }
    Some(orbit)
}

/// Seeds the closure search with eigenlines of every word up to length
/// `max_len`; falls back to `e1`, `e2`, `e1 + e2` when none exist.
pub fn irreducibility_heuristic(family: &MatrixFamily, max_len: usize) -> Result<Irreducibility> {
    require_2d(family, "the irreducibility heuristic")?;
    let mut seeds: Vec<f64> = Vec::new();
    let mut layer: Vec<Matrix> = vec![Matrix::identity(2)];
    for _ in 0..max_len.max(1) {
        layer = layer
            .iter()
            .flat_map(|w| family.matrices().iter().map(move |m| w.mul(m.matrix())))
            .map(|mut w| {
                rescale(&mut w);
                w
            })
            .collect();
        for w in &layer {
            for l in eigenlines(w) {
                if !seeds.iter().any(|&s| line_dist(s, l) < CLOSURE_TOL) {
                    seeds.push(l);
                }
            }
        }
    }
    let fallback = seeds.is_empty();
    if fallback {
        seeds = vec![0.0, PI / 2.0, PI / 4.0];
    }
    let mut witness: Vec<f64> = Vec::new();
    for &s in &seeds {
        if let Some(orbit) = close_orbit(family, s, CLOSURE_TOL, CLOSURE_CAP) {
            for l in orbit {
                if !witness.iter().any(|&w| line_dist(w, l) < CLOSURE_TOL) {
                    witness.push(l);
                }
            }
        }
    }
    if !witness.is_empty() {
        witness.sort_by(f64::total_cmp);
        return Ok(Irreducibility::Fail { witness });
    }
    Ok(if fallback {
        Irreducibility::Inconclusive
    } else {
        Irreducibility::Pass
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllBoundCheck {
    pub n: usize,
    pub samples: usize,
    /// `K = max_i ell(M_i)`.
    pub k_max: f64,
    /// Largest `ell(psi(n)) - n K`.
    pub max_excess: f64,
    /// Largest `ell(AB) - ell(A) - ell(B)` over random splits `psi = AB`.
    pub max_subadditive_excess: f64,
    pub pass: bool,
}

/// `ell` of a product tracked with its inverse, both rescaled.
fn log_ell_product(words: &[usize], family: &MatrixFamily) -> f64 {
    let d = family.dim();
    let mut m = Matrix::identity(d);
    let mut inv = Matrix::identity(d);
    let (mut e, mut einv) = (0i64, 0i64);
    let mut tmp = Matrix::zeros(d);
    for (step, &s) in words.iter().enumerate() {
        m.mul_into(family.get(s).matrix(), &mut tmp);
        std::mem::swap(&mut m, &mut tmp);
        family.get(s).inverse().mul_into(&inv, &mut tmp);
        std::mem::swap(&mut inv, &mut tmp);
        if step % 16 == 15 {
            e += rescale(&mut m) as i64;
            einv += rescale(&mut inv) as i64;
        }
    }
    let ln2 = std::f64::consts::LN_2;
    let up = e as f64 * ln2 + m.operator_norm().ln();
    let down = einv as f64 * ln2 + inv.operator_norm().ln();
    up.max(down).max(0.0)
}

/// Checks `ell(psi(n)) <= n K` and subadditivity of `ell` on sampled
/// products, with slack [`ELL_SLACK`].
pub fn ell_product_bound_check(
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<EllBoundCheck> {
    check_pair(family, chain)?;
    if n == 0 || samples == 0 {
        return Err(Error::InvalidArgument("n and samples must be positive".into()));
    }
    let k_max = family.max_ell();
    let excess: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s);
            let mut word = Vec::with_capacity(n);
            let mut state = chain.sample_initial(&mut rng);
            word.push(state);
            for _ in 1..n {
                state = chain.step_forward(state, &mut rng);
                word.push(state);
            }
            let whole = log_ell_product(&word, family);
            let split = if n > 1 { rng.random_range(1..n) } else { 1 };
            let (a, b) = word.split_at(split);
            let parts = log_ell_product(a, family) + log_ell_product(b, family);
            (whole - n as f64 * k_max, whole - parts)
        })
        .collect();
    let max_excess = excess.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let max_subadditive_excess = excess.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(EllBoundCheck {
        n,
        samples,
        k_max,
        max_excess,
        max_subadditive_excess,
        pass: max_excess <= ELL_SLACK && max_subadditive_excess <= ELL_SLACK,
    })
}

/// `sum_i pi_i log |det M_i|`, which equals `gamma_1 + gamma_2` when d = 2.
pub fn det_closure_check(family: &MatrixFamily, chain: &MarkovChainSpec) -> Result<f64> {
    check_pair(family, chain)?;
    require_2d(family, "the determinant closure check")?;
    Ok(family
        .matrices()
        .iter()
        .zip(chain.pi())
        .map(|(m, p)| p * m.determinant().abs().ln())
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainHolderCheck {
    pub alpha: f64,
    /// Constant fitted on the calibration set.
    pub c: f64,
    /// Largest normalized quotient seen after calibration, in units of `c`.
    pub max_ratio: f64,
    pub pass: bool,
}

fn gain_quotient<R: Rng>(alpha: f64, rng: &mut R) -> Option<f64> {
    let data: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
    let m = Matrix::from_row_major(2, data).ok()?;
    if m.determinant().abs() < 1e-3 {
        return None;
    }
    let l = ell_of(&m);
    if l < 1e-6 {
        return None;
    }
    let x = random_unit(2, rng);
    let s = (rng.random_range(-6.0..0.0f64)).exp();
    let y = at_separation(&x, s, rng);
    let gx = m.mul_vec(&x);
    let gy = m.mul_vec(&y);
    let diff = (gx[0].hypot(gx[1]).ln() - gy[0].hypot(gy[1]).ln()).abs();
    let dist = unit_metric(&x, &y);
    if dist <= 0.0 {
        return None;
    }
    Some(diff / dist.powf(alpha) / (l * (2.0 * alpha * l).exp()))
}

/// Calibrates `c` in `|log|Mx| - log|My|| <= c ell(M) e^(2 a ell(M)) d(x, y)^a`
/// on `calibration` random draws, then checks `samples` fresh draws stay
/// under `10 c`.
pub fn gain_holder_check(alpha: f64, calibration: usize, samples: usize, seed: u64) -> Result<GainHolderCheck> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} not in (0, 1]")));
    }
    let draw = |stream: u64, count: usize| -> f64 {
        let mut rng = stream_rng(seed, stream);
        let mut best = 0.0f64;
        let mut got = 0;
        while got < count {
            if let Some(q) = gain_quotient(alpha, &mut rng) {
                best = best.max(q);
                got += 1;
            }
        }
        best
    };
    let c = draw(0, calibration);
    let later = draw(1, samples);
    let max_ratio = later / c;
    Ok(GainHolderCheck {
        alpha,
        c,
        max_ratio,
        pass: c.is_finite() && max_ratio <= 10.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::*;
    use crate::funcspace::SpaceParams;
    use crate::markov::build_chain;
    use crate::transfer::{eigenmeasure, Discretization};

    fn single(m: Matrix) -> (MatrixFamily, MarkovChainSpec) {
        (MatrixFamily::from_matrices(vec![m]).unwrap(), single_state_chain())
    }

    #[test]
    fn contraction_examples() {
        let t = contraction_average(&orthogonal(), &two_state_chain(), 10, 100, 4, 0.5, 1).unwrap();
        assert!(t.rows.iter().all(|r| (r.ratio - 1.0).abs() < 1e-9));

        let (fam, chain) = single(Matrix::diag(&[4.0, 0.25]));
        let t = contraction_average(&fam, &chain, 30, 100, 1, 0.5, 1).unwrap();
        // Pairs far from the repelling line contract like 16^-n.
        assert!(t.rows[29].ratio < 1e-6, "{}", t.rows[29].ratio);

        let t = contraction_average(&contracting(), &two_state_chain(), 40, 100, 64, 0.5, 2).unwrap();
        assert!(t.rows[39].delta_hat < 1.0);
        assert!(contraction_average(&contracting(), &two_state_chain(), 5, 10, 1, 0.5, 0).is_err());
    }

    #[test]
    fn index_examples() {
        let s = index_probe(&orthogonal(), &two_state_chain(), 50, 64, 0).unwrap();
        assert!((s.min - 1.0).abs() < 1e-12 && (s.max - 1.0).abs() < 1e-12);
        let s = index_probe(&conformal(), &two_state_chain(), 50, 64, 0).unwrap();
        assert!((s.min - 1.0).abs() < 1e-12);
        let s = index_probe(&contracting(), &two_state_chain(), 50, 256, 0).unwrap();
        assert!(s.median < 1e-3, "median {}", s.median);
    }

    #[test]
    fn properness_examples() {
        let disc = Discretization::new(
            MatrixFamily::from_matrices(vec![Matrix::rotation(2f64.sqrt())]).unwrap(),
            single_state_chain(),
            512,
            SpaceParams::default(),
        )
        .unwrap();
        let nu = eigenmeasure(&disc).unwrap();
        let eps = [0.5, 0.1, 0.02];
        let r = properness_probe(&nu, 16, &eps).unwrap();
        for (q, e) in r.eps.iter().enumerate() {
            let want = 2.0 * e.asin() / PI;
            assert!((r.max_mass[q] - want).abs() < 1e-9, "{} vs {want}", r.max_mass[q]);
        }
        assert!(!r.atom);

        let disc = Discretization::new(diagonal(), two_state_chain(), 512, SpaceParams::default()).unwrap();
        let nu = eigenmeasure(&disc).unwrap();
        let r = properness_probe(&nu, 16, &[0.3, 0.1, 0.03, 0.01]).unwrap();
        assert!(r.atom);
        let axes: Vec<f64> = r.centers.iter().filter(|c| c.atom).map(|c| c.angle).collect();
        let near_axis = |a: f64| line_dist(a, 0.0).min(line_dist(a, PI / 2.0)) < 0.02;
        assert!(axes.iter().all(|&a| near_axis(a)));
        assert!(axes.contains(&0.0) && axes.contains(&(PI / 2.0)));
    }

    #[test]
    fn irreducibility_examples() {
        match irreducibility_heuristic(&diagonal(), EIGEN_WORD_LEN).unwrap() {
            Irreducibility::Fail { witness } => {
                assert_eq!(witness.len(), 2);
                assert!(witness[0].abs() < 1e-12 && (witness[1] - PI / 2.0).abs() < 1e-12);
            }
            v => panic!("{v:?}"),
        }
        let shear = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let fam = MatrixFamily::from_matrices(vec![Matrix::rotation(1.0).mul(&Matrix::diag(&[2.0, 1.0])), shear])
            .unwrap();
        assert_eq!(irreducibility_heuristic(&fam, EIGEN_WORD_LEN).unwrap(), Irreducibility::Pass);
        assert_eq!(irreducibility_heuristic(&contracting(), EIGEN_WORD_LEN).unwrap(), Irreducibility::Pass);

        let rot = MatrixFamily::from_matrices(vec![Matrix::rotation(PI / 4.0)]).unwrap();
        match irreducibility_heuristic(&rot, EIGEN_WORD_LEN).unwrap() {
            Irreducibility::Fail { witness } => assert_eq!(witness.len(), 4),
            v => panic!("{v:?}"),
        }
        let rot3 = MatrixFamily::from_matrices(vec![Matrix::identity(3)]).unwrap();
        assert!(irreducibility_heuristic(&rot3, 4).is_err());
    }

    #[test]
    fn ell_bound_examples() {
        let (fam, chain) = single(Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 1.5]]).unwrap());
        let c = ell_product_bound_check(&fam, &chain, 30, 20, 0).unwrap();
        assert!(c.pass);
        let c = ell_product_bound_check(&orthogonal(), &two_state_chain(), 30, 20, 0).unwrap();
        assert!(c.pass && c.k_max.abs() < 1e-12);
        let c = ell_product_bound_check(&contracting(), &two_state_chain(), 20, 1000, 0).unwrap();
        assert!(c.pass);
    }

    #[test]
    fn det_closure_examples() {
        let chain = two_state_chain();
        let v = det_closure_check(&conformal(), &chain).unwrap();
        assert!((v - 2.0 * conformal_gamma()).abs() < 1e-14);
        let unimodular = MatrixFamily::from_matrices(vec![
            Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap(),
            Matrix::diag(&[1.0, -1.0]),
        ])
        .unwrap();
        assert!(det_closure_check(&unimodular, &chain).unwrap().abs() < 1e-15);
        let (fam, ch) = single(Matrix::diag(&[2.0, 0.5]));
        assert_eq!(det_closure_check(&fam, &ch).unwrap(), 0.0);
        let three = MatrixFamily::from_matrices(vec![Matrix::identity(3)]).unwrap();
        assert_eq!(
            det_closure_check(&three, &build_chain(&[vec![1.0]]).unwrap()).unwrap_err().category(),
            "unsupported-dimension"
        );
    }

    #[test]
    fn gain_holder_spot_check() {
        let c = gain_holder_check(0.5, 2000, 5000, 3).unwrap();
        assert!(c.pass, "{c:?}");
    }
}
