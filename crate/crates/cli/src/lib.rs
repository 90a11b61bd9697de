//! Config-driven batch runs of the `lyapmkv` pipelines with JSON reports
//! and CSV convergence traces.

pub mod config;
pub mod error;
pub mod report;

use std::collections::BTreeMap;
use std::time::Instant;

use lyapmkv::diagnostics::{
    contraction_average, det_closure_check, ell_product_bound_check, gain_holder_check, index_probe,
    irreducibility_heuristic, properness_probe, EIGEN_WORD_LEN,
};
use lyapmkv::montecarlo::{enumerate_exact, estimate_furstenberg, estimate_spectrum_qr, estimate_subadditive};
use lyapmkv::transfer::{
    default_gap_probes, eigenmeasure, grid_convergence, leading_eigenvalue, lyapunov_via_beta_derivative,
    lyapunov_via_perturbation, spectral_gap, Discretization, EigenMeasure, EigenOptions, TransferOperator,
};
use lyapmkv::{MarkovChainSpec, MatrixFamily, ProjPoint};

pub use config::{Mode, RunConfig};
pub use error::CliError;
pub use report::Report;

use report::*;

pub const GRID_TABLE: [usize; 4] = [256, 512, 1024, 2048];
pub const BETA_POINTS: usize = 9;
pub const GAP_WINDOW: (usize, usize) = (10, 40);
pub const PROPER_EPS: [f64; 6] = [0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3];
const ORACLE_MAX_N: usize = 8;
const ORACLE_MAX_WORDS: u128 = 100_000;

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
        let start = Instant::now();
        let out = f()?;
        self.0.insert(stage.into(), start.elapsed().as_secs_f64());
        Ok(out)
    }
}

/// Runs the pipelines selected by `config.mode`. Every numeric field of
/// the report depends only on `config`.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let (family, chain) = config.validate()?;
    let d = family.dim();
    let mode = config.mode;
    let wants = |m: Mode| mode == m || mode == Mode::All;
    let mut timer = Timer(BTreeMap::new());
    let mut notes = Vec::new();

    if mode == Mode::Spectrum && d != 2 {
        return Err(lyapmkv::Error::UnsupportedDimension {
            dim: d,
            what: "the spectrum mode",
        }
        .into());
    }

    let mut estimates = Vec::new();
    if wants(Mode::Estimate) {
        estimates = timer.time("estimate", || estimate(config, &family, &chain))?;
    }

    let mut measure = None;
    let spectrum = if wants(Mode::Spectrum) && d == 2 {
        let (rep, nu) = timer.time("spectrum", || spectrum(config, &family, &chain))?;
        measure = Some(nu);
        Some(rep)
    } else {
        if wants(Mode::Spectrum) {
            notes.push(format!("spectrum skipped: the transfer-operator pipeline needs d = 2, got d = {d}"));
        }
        None
    };

    let diagnostics = if wants(Mode::Diagnose) {
        Some(timer.time("diagnose", || diagnose(config, &family, &chain, measure.as_ref()))?)
    } else {
        None
    };
    if diagnostics.is_some() && d != 2 {
        notes.push("irreducibility, properness and determinant closure are only run for d = 2".into());
    }

    let oracle = if wants(Mode::Oracle) {
        Some(timer.time("oracle", || oracle(config, &family, &chain))?)
    } else {
        None
    };

    Ok(Report {
        schema_version: config::SCHEMA_VERSION.into(),
        config: config.clone(),
        chain: ChainSummary {
            k: chain.k(),
            d,
            pi: chain.pi().to_vec(),
            warnings: chain.warnings().to_vec(),
        },
        estimates,
        spectrum,
        diagnostics,
        oracle,
        notes,
        runtime: Runtime {
            workers: rayon::current_num_threads(),
            timings: timer.0,
        },
    })
}

fn estimate(
    config: &RunConfig,
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
) -> Result<Vec<lyapmkv::montecarlo::EstimateResult>, CliError> {
    let mc = &config.mc;
    let mut out = vec![
        estimate_subadditive(family, chain, mc.n, mc.replicas, config.seed)?,
        estimate_furstenberg(family, chain, mc.n, mc.burn_in, config.seed)?,
    ];
    out.extend(estimate_spectrum_qr(family, chain, mc.n, mc.burn_in, config.seed)?);
    Ok(out)
}

fn spectrum(
    config: &RunConfig,
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
) -> Result<(SpectrumReport, EigenMeasure), CliError> {
    let params = config.params()?;
    let disc = Discretization::new(family.clone(), chain.clone(), config.grid, params)?;
    let nu = eigenmeasure(&disc)?;
    let gamma_perturbation = lyapunov_via_perturbation(&disc, &nu)?;
    let der = lyapunov_via_beta_derivative(&disc, config.t_step)?;
    let mut beta = Vec::with_capacity(BETA_POINTS);
    for q in 0..BETA_POINTS {
        let t = config.t_max * (2.0 * q as f64 / (BETA_POINTS - 1) as f64 - 1.0);
        let e = leading_eigenvalue(&TransferOperator::parametric(&disc, t), EigenOptions::default())?;
        beta.push(BetaSample {
            t,
            beta: e.beta,
            iterations: e.iterations,
            possibly_non_simple: e.possibly_non_simple,
        });
    }
    let gap = spectral_gap(&disc, &nu, &default_gap_probes(&disc, 5), GAP_WINDOW)?;
    let grid = grid_convergence(family, chain, params, &GRID_TABLE)?;
    let rep = SpectrumReport {
        grid: config.grid,
        eigenmeasure_iterations: nu.iterations,
        symbol_masses: nu.masses().to_vec(),
        gamma_perturbation,
        gamma_derivative: Derivative {
            h: der.h,
            raw: der.raw,
            raw_half: der.raw_half,
            extrapolated: der.extrapolated,
        },
        beta,
        gap: GapFit {
            rate: gap.rate,
            no_gap: gap.no_gap,
            window: gap.window,
            probe_rates: gap.probes.iter().map(|p| p.rate).collect(),
        },
        grid_convergence: grid.into_iter().map(|(n, gamma)| GridPoint { n, gamma }).collect(),
    };
    Ok((rep, nu))
}

fn diagnose(
    config: &RunConfig,
    family: &MatrixFamily,
    chain: &MarkovChainSpec,
    measure: Option<&EigenMeasure>,
) -> Result<DiagnosticsReport, CliError> {
    let seed = config.seed;
    let contraction = contraction_average(family, chain, 30, 100, 32, config.alpha, seed)?;
    let index = index_probe(family, chain, 50, 256, seed)?;
    let ell_bound = ell_product_bound_check(family, chain, 20, 1000, seed)?;
    let gain_holder = gain_holder_check(config.alpha, 1000, 2000, seed)?;
    let (mut irreducibility, mut det_closure, mut properness) = (None, None, None);
    if family.dim() == 2 {
        irreducibility = Some(irreducibility_heuristic(family, EIGEN_WORD_LEN)?);
        det_closure = Some(det_closure_check(family, chain)?);
        let owned;
        let nu = match measure {
            Some(nu) => nu,
            None => {
                let disc = Discretization::new(family.clone(), chain.clone(), config.grid, config.params()?)?;
                owned = eigenmeasure(&disc)?;
                &owned
            }
        };
        properness = Some(properness_probe(nu, 32, &PROPER_EPS)?);
    }
    Ok(DiagnosticsReport {
        heuristic: true,
        contraction,
        index,
        ell_bound,
        gain_holder,
        irreducibility,
        det_closure,
        properness,
    })
}

fn oracle(config: &RunConfig, family: &MatrixFamily, chain: &MarkovChainSpec) -> Result<OracleReport, CliError> {
    let k = chain.k();
    let x = ProjPoint::basis(family.dim(), 0);
    let h = config.t_step;
    let n_max = (1..=ORACLE_MAX_N)
        .take_while(|&n| (k as u128).pow(n as u32) <= ORACLE_MAX_WORDS)
        .last()
        .unwrap_or(1);
    let mut entries = Vec::new();
    let mut derivative = Vec::new();
    for n in 1..=n_max {
        let mut slope = 0.0;
        for j in 0..k {
            let mut at = |t: f64| -> Result<f64, CliError> {
                let value = enumerate_exact(family, chain, n, t, j, &x)?;
                entries.push(OracleEntry { n, terminal: j, t, value });
                Ok(value)
            };
            let (plus, minus) = (at(h)?, at(-h)?);
            slope += chain.pi()[j] * (plus - minus) / (2.0 * h * n as f64);
        }
        derivative.push(GridPoint { n, gamma: slope });
    }
    Ok(OracleReport {
        x: x.as_slice().to_vec(),
        entries,
        derivative,
    })
}
