//! The symbol process: a forward transition matrix `T`, its stationary
//! law `pi`, and the backward kernel `P[i][j] = P(w0 = i | w1 = j)`
//! obtained by time reversal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-15;
const STATIONARY_MAX_ITER: usize = 1_000_000;

/// How strictly the full-shift assumption (every `T[a][b] > 0`) is
/// enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    /// Reject any zero transition.
    #[default]
    Strict,
    /// Accept irreducible aperiodic chains with zeros, recording a warning.
    Warn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainSpec {
    k: usize,
    forward: Vec<Vec<f64>>,
    pi: Vec<f64>,
    backward: Vec<Vec<f64>>,
    forward_cdf: Vec<Vec<f64>>,
    backward_cdf: Vec<Vec<f64>>,
    pi_cdf: Vec<f64>,
    warnings: Vec<String>,
}

/// Builds the chain in strict mode.
pub fn build_chain(t: &[Vec<f64>]) -> Result<MarkovChainSpec> {
    build_chain_with(t, ShiftPolicy::Strict)
}

pub fn build_chain_with(t: &[Vec<f64>], policy: ShiftPolicy) -> Result<MarkovChainSpec> {
    let k = t.len();
    if k == 0 {
        return Err(Error::InvalidArgument("transition matrix is empty".into()));
    }
    for (row, r) in t.iter().enumerate() {
        if r.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "transition matrix row {row} has {} entries, expected {k}",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NotStochastic {
                row,
                sum: r.iter().sum(),
            });
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > ROW_TOL {
            return Err(Error::NotStochastic { row, sum });
        }
    }

    let mut warnings = Vec::new();
    let zero = t
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, v)| (i, j, *v)))
        .find(|(_, _, v)| *v <= 0.0);
    if let Some((row, col, value)) = zero {
        match policy {
            ShiftPolicy::Strict => return Err(Error::FullShiftViolation { row, col, value }),
            ShiftPolicy::Warn => {
                if !is_primitive(t) {
                    return Err(Error::InvalidArgument(
                        "transition matrix is not irreducible and aperiodic".into(),
                    ));
                }
                warnings.push(format!(
                    "transition ({row}, {col}) is zero: the chain is not a full shift; \
                     estimators remain valid but the spectral theory does not apply"
                ));
            }
        }
    }

    let pi = stationary_vector(t)?;
    let mut backward = vec![vec![0.0; k]; k];
    for j in 0..k {
        for i in 0..k {
            backward[i][j] = pi[i] * t[i][j] / pi[j];
        }
        // Exact column normalization keeps L_0 1 = 1 to the last ulp.
        let col: f64 = (0..k).map(|i| backward[i][j]).sum();
        for row in backward.iter_mut() {
            row[j] /= col;
        }
    }

    let forward_cdf = t.iter().map(|r| cumulative(r)).collect();
    let backward_cdf = (0..k)
        .map(|j| cumulative(&(0..k).map(|i| backward[i][j]).collect::<Vec<_>>()))
        .collect();
    let pi_cdf = cumulative(&pi);

    Ok(MarkovChainSpec {
        k,
        forward: t.to_vec(),
        pi,
        backward,
        forward_cdf,
        backward_cdf,
        pi_cdf,
        warnings,
    })
}

/// Wielandt: a non-negative k x k matrix is primitive iff its
/// `(k-1)^2 + 1`-th power is strictly positive.
fn is_primitive(t: &[Vec<f64>]) -> bool {
    let k = t.len();
    let support: Vec<Vec<bool>> = t.iter().map(|r| r.iter().map(|v| *v > 0.0).collect()).collect();
    let mut reach = support.clone();
    for _ in 1..(k - 1) * (k - 1) + 1 {
        let mut next = vec![vec![false; k]; k];
        for i in 0..k {
            for l in 0..k {
                if reach[i][l] {
                    for j in 0..k {
                        next[i][j] |= support[l][j];
                    }
                }
            }
        }
        reach = next;
    }
    reach.iter().all(|r| r.iter().all(|&b| b))
}

fn stationary_vector(t: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = t.len();
    let mut pi = vec![1.0 / k as f64; k];
    let mut next = vec![0.0; k];
    let mut trace = Vec::new();
    for _ in 0..STATIONARY_MAX_ITER {
        for (j, n) in next.iter_mut().enumerate() {
            *n = (0..k).map(|i| pi[i] * t[i][j]).sum();
        }
        let mass: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= mass);
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if diff <= STATIONARY_TOL {
            return Ok(pi);
        }
        if trace.len() == 8 {
            trace.remove(0);
        }
        trace.push(diff);
    }
    Err(Error::Convergence {
        what: "stationary vector",
        iterations: STATIONARY_MAX_ITER,
        trace,
    })
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

#[inline]
fn draw(cdf: &[f64], u: f64) -> usize {
    let total = cdf[cdf.len() - 1];
    let target = u * total;
    cdf.iter().position(|&c| target < c).unwrap_or(cdf.len() - 1)
}

impl MarkovChainSpec {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Forward transition matrix, `T[a][b] = P(next = b | current = a)`.
    pub fn forward(&self) -> &[Vec<f64>] {
        &self.forward
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Backward kernel, `P[i][j] = P(w0 = i | w1 = j)`. Columns sum to 1.
    pub fn backward(&self) -> &[Vec<f64>] {
        &self.backward
    }

    #[inline]
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.backward[i][j]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn check_symbol(&self, s: usize) -> Result<()> {
        if s >= self.k {
            Err(Error::IndexOutOfRange { symbol: s, k: self.k })
        } else {
            Ok(())
        }
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&self.pi_cdf, rng.random::<f64>())
    }

    /// One forward step `a -> b` with probability `T[a][b]`.
    pub fn step_forward<R: Rng + ?Sized>(&self, current: usize, rng: &mut R) -> usize {
        draw(&self.forward_cdf[current], rng.random::<f64>())
    }

    /// One step of the time-reversed chain, `j -> i` with probability
    /// `P[i][j]`.
    pub fn step_backward<R: Rng + ?Sized>(&self, current: usize, rng: &mut R) -> usize {
        draw(&self.backward_cdf[current], rng.random::<f64>())
    }

    pub fn word_probability(&self, word: &[usize], terminal: usize) -> Result<f64> {
        word_probability(self, word, terminal)
    }
}

/// `P(w0 = i0, ..., w_{n-1} = i_{n-1} | w_n = j)`
/// `= P[i_{n-1}][j] P[i_{n-2}][i_{n-1}] ... P[i0][i1]`.
pub fn word_probability(spec: &MarkovChainSpec, word: &[usize], terminal: usize) -> Result<f64> {
    spec.check_symbol(terminal)?;
    let mut prob = 1.0;
    let mut next = terminal;
    for &s in word.iter().rev() {
        spec.check_symbol(s)?;
        prob *= spec.backward[s][next];
        next = s;
    }
    Ok(prob)
}

/// A stationary forward path of length `n`: first symbol from `pi`, then
/// steps by `T`.
pub fn sample_path<R: Rng + ?Sized>(spec: &MarkovChainSpec, n: usize, rng: &mut R) -> Vec<usize> {
    let mut path = Vec::with_capacity(n);
    if n == 0 {
        return path;
    }
    let mut s = spec.sample_initial(rng);
    path.push(s);
    for _ in 1..n {
        s = spec.step_forward(s, rng);
        path.push(s);
    }
    path
}

/// Deterministic RNG for stream `stream` of a run seeded by `seed`.
/// Distinct streams are independent, so results never depend on how work
/// is split across threads.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
