//! Simulation estimators of the top exponent and an exact enumeration
//! oracle for short words.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, MatrixFamily};
use crate::markov::{stream_rng, MarkovChainSpec};
use crate::projective::ProjPoint;

/// Products are rescaled by a power of two this often.
pub const RENORM_EVERY: usize = 32;
/// Checkpoints recorded by the subadditive estimator.
pub const SUBADDITIVE_BLOCKS: usize = 20;
/// Word budget of [`enumerate_exact`].
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

const FURSTENBERG_STREAM: u64 = 1 << 32;
const SPECTRUM_STREAM: u64 = 1 << 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Subadditive,
    Furstenberg,
    /// `i`-th exponent (0-based) from QR renormalization.
    QrExponent(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub gamma_hat: f64,
    pub std_error: f64,
    pub n_steps: usize,
    pub n_replicas: usize,
    pub method: Method,
    /// True when `std_error` comes from batch means along one chain.
    pub heuristic_error: bool,
    /// Partial means, one per block.
    pub trace: Vec<(usize, f64)>,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_family_chain(family: &MatrixFamily, chain: &MarkovChainSpec) -> Result<()> {
    if family.len() != chain.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} matrices but {} chain states",
            family.len(),
            chain.k()
        )));
    }
    Ok(())
}

/// Rescales `m` by `2^-e` so its Frobenius norm is near 1; returns `e`.
/// Power-of-two scaling is exact.
fn renormalize(m: &mut Matrix) -> i32 {
    let f = m.frobenius_norm();
    let e = f.log2().round() as i32;
    if e != 0 {
        m.scale_in_place((-e as f64).exp2());
    }
    e
}

fn checkpoints(n: usize) -> Vec<usize> {
    let blocks = SUBADDITIVE_BLOCKS.min(n);
    (1..=blocks).map(|b| n * b / blocks).collect()
}

/// Mean over replicas of `(1/n) log |M_{x1} ... M_{xn}|` along stationary
/// forward paths.
pub fn estimate_subadditive(
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<EstimateResult> {
    check_family_chain(family, chain)?;
    if n < 1 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if replicas < 2 {
        return Err(Error::InvalidArgument("at least 2 replicas are needed".into()));
    }
    let marks = checkpoints(n);
    let runs: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| subadditive_replica(family, chain, n, &marks, seed, r))
        .collect();
    let finals: Vec<f64> = runs.iter().map(|v| *v.last().unwrap()).collect();
    let (gamma_hat, std_error) = mean_and_se(&finals);
    let trace = marks
        .iter()
        .enumerate()
        .map(|(b, &m)| (m, runs.iter().map(|v| v[b]).sum::<f64>() / replicas as f64))
        .collect();
    Ok(EstimateResult {
        gamma_hat,
        std_error,
        n_steps: n,
        n_replicas: replicas,
        method: Method::Subadditive,
        heuristic_error: false,
        trace,
    })
}

fn subadditive_replica(
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    n: usize,
    marks: &[usize],
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    let mut state = chain.sample_initial(&mut rng);
    let mut prod = family.get(state).matrix().clone();
    let mut tmp = Matrix::zeros(family.dim());
    let mut exp2: i64 = 0;
    let mut out = Vec::with_capacity(marks.len());
    let mut next_mark = 0;
    for step in 1..=n {
        if step > 1 {
            state = chain.step_forward(state, &mut rng);
            prod.mul_into(family.get(state).matrix(), &mut tmp);
            std::mem::swap(&mut prod, &mut tmp);
        }
        if step % RENORM_EVERY == 0 {
            exp2 += renormalize(&mut prod) as i64;
        }
        if marks[next_mark] == step {
            let log_norm = exp2 as f64 * std::f64::consts::LN_2 + prod.operator_norm().ln();
            out.push(log_norm / step as f64);
            next_mark += 1;
            if next_mark == marks.len() {
                break;
            }
        }
    }
    out
}

/// Running batch means for a scalar series.
struct Batches {
    size: usize,
    current: f64,
    filled: usize,
    sums: Vec<f64>,
}

impl Batches {
    fn new(total: usize) -> Self {
        let count = ((total as f64).sqrt().floor() as usize).max(2).min(total.max(1));
        Batches {
            size: (total / count).max(1),
            current: 0.0,
            filled: 0,
            sums: Vec::with_capacity(count),
        }
    }

    fn push(&mut self, v: f64) {
        self.current += v;
        self.filled += 1;
        if self.filled == self.size {
            self.sums.push(self.current);
            self.current = 0.0;
            self.filled = 0;
        }
    }

    /// `(mean over all pushed values, batch-means SE, cumulative trace)`.
    fn finish(self, total: usize, offset: usize) -> (f64, f64, Vec<(usize, f64)>) {
        let grand: f64 = self.sums.iter().sum::<f64>() + self.current;
        let means: Vec<f64> = self.sums.iter().map(|s| s / self.size as f64).collect();
        let (_, se) = mean_and_se(&means);
        let mut acc = 0.0;
        let trace = self
            .sums
            .iter()
            .enumerate()
            .map(|(b, s)| {
                acc += s;
                let count = (b + 1) * self.size;
                (offset + count, acc / count as f64)
            })
            .collect();
        (grand / total as f64, se, trace)
    }
}

fn initial_direction<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.1 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// Ergodic average of `log |M_x^T x|` along one long chain, after
/// `burn_in` discarded steps.
pub fn estimate_furstenberg(
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<EstimateResult> {
    check_family_chain(family, chain)?;
    if n <= burn_in {
        return Err(Error::InvalidArgument(format!(
            "n = {n} must exceed burn_in = {burn_in}"
        )));
    }
    let transposed = family.transposed();
    let d = family.dim();
    let mut rng = stream_rng(seed, FURSTENBERG_STREAM);
    let mut x = initial_direction(d, &mut rng);
    let mut y = vec![0.0; d];
    let mut state = chain.sample_initial(&mut rng);
    let kept = n - burn_in;
    let mut batches = Batches::new(kept);
    for step in 1..=n {
        if step > 1 {
            state = chain.step_forward(state, &mut rng);
        }
        transposed.get(state).matrix().mul_vec_into(&x, &mut y);
        let norm = y.iter().map(|c| c * c).sum::<f64>().sqrt();
        x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi = yi / norm);
        if step > burn_in {
            batches.push(norm.ln());
        }
    }
    let (gamma_hat, std_error, trace) = batches.finish(kept, burn_in);
    Ok(EstimateResult {
        gamma_hat,
        std_error,
        n_steps: n,
        n_replicas: 1,
        method: Method::Furstenberg,
        heuristic_error: true,
        trace,
    })
}

/// All `d` exponents by QR renormalization of the transposed cocycle along
/// one chain. Entry `i` estimates the `i`-th largest exponent.
pub fn estimate_spectrum_qr(
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<EstimateResult>> {
    check_family_chain(family, chain)?;
    if n <= burn_in {
        return Err(Error::InvalidArgument(format!(
            "n = {n} must exceed burn_in = {burn_in}"
        )));
    }
    let transposed = family.transposed();
    let d = family.dim();
    let mut rng = stream_rng(seed, SPECTRUM_STREAM);
    let mut q = Matrix::identity(d);
    let mut a = Matrix::zeros(d);
    let mut state = chain.sample_initial(&mut rng);
    let kept = n - burn_in;
    let mut batches: Vec<Batches> = (0..d).map(|_| Batches::new(kept)).collect();
    for step in 1..=n {
        if step > 1 {
            state = chain.step_forward(state, &mut rng);
        }
        transposed.get(state).matrix().mul_into(&q, &mut a);
        let (qn, r) = a.qr_diag();
        q = qn;
        if step > burn_in {
            for (b, ri) in batches.iter_mut().zip(&r) {
                b.push(ri.ln());
            }
        }
    }
    Ok(batches
        .into_iter()
        .enumerate()
        .map(|(i, b)| {
            let (gamma_hat, std_error, trace) = b.finish(kept, burn_in);
            EstimateResult {
                gamma_hat,
                std_error,
                n_steps: n,
                n_replicas: 1,
                method: Method::QrExponent(i),
                heuristic_error: true,
                trace,
            }
        })
        .collect())
}

/// `sum over words w of length n of P(w | terminal) exp(t log |psi(w) x|)`
/// where `psi(i0 ... i_{n-1}) = M_{i0} M_{i1} ... M_{i_{n-1}}`.
pub fn enumerate_exact(
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    n: usize,
    t: f64,
    terminal: usize,
    x: &ProjPoint,
) -> Result<f64> {
    check_family_chain(family, chain)?;
    let k = chain.k();
    if terminal >= k {
        return Err(Error::IndexOutOfRange { symbol: terminal, k });
    }
    if x.dim() != family.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has dimension {}, matrices {}",
            x.dim(),
            family.dim()
        )));
    }
    let words = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if words > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            words,
            budget: ENUMERATION_BUDGET,
        });
    }
    let start = Branch {
        symbol: terminal,
        prob: 1.0,
        log_norm: 0.0,
        v: x.as_slice().to_vec(),
    };
    // Split the top levels into independent subtrees, summed in order.
    let mut frontier = vec![start];
    let mut depth = n;
    while depth > 0 && frontier.len() < 64 {
        frontier = frontier.iter().flat_map(|b| b.children(family, chain)).collect();
        depth -= 1;
    }
    let parts: Vec<f64> = frontier
        .par_iter()
        .map(|b| subtree(family, chain, b, depth, t))
        .collect();
    Ok(parts.iter().sum())
}

#[derive(Clone)]
struct Branch {
    symbol: usize,
    prob: f64,
    log_norm: f64,
    /// Unit vector `M_{i_m} ... M_{i_{n-1}} x / |.|`.
    v: Vec<f64>,
}

impl Branch {
    fn children(&self, family: &MatrixFamily, chain: &MarkovChainSpec) -> Vec<Branch> {
        let j = self.symbol;
        (0..chain.k())
            .map(|i| {
                let y = family.get(i).matrix().mul_vec(&self.v);
                let norm = y.iter().map(|c| c * c).sum::<f64>().sqrt();
                Branch {
                    symbol: i,
                    prob: self.prob * chain.p(i, j),
                    log_norm: self.log_norm + norm.ln(),
                    v: y.into_iter().map(|c| c / norm).collect(),
                }
            })
            .collect()
    }
}

fn subtree(family: &MatrixFamily, chain: &MarkovChainSpec, b: &Branch, depth: usize, t: f64) -> f64 {
    if depth == 0 {
        return b.prob * (t * b.log_norm).exp();
    }
    b.children(family, chain)
        .iter()
        .map(|c| subtree(family, chain, c, depth - 1, t))
        .sum()
}
