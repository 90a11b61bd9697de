use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use lyapmkv::diagnostics::{ContractionTable, EllBoundCheck, GainHolderCheck, IndexStats, Irreducibility, ProperReport};
use lyapmkv::montecarlo::EstimateResult;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub k: usize,
    pub d: usize,
    pub pi: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub h: f64,
    pub raw: f64,
    pub raw_half: f64,
    pub extrapolated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSample {
    pub t: f64,
    pub beta: f64,
    pub iterations: usize,
    pub possibly_non_simple: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFit {
    pub rate: f64,
    pub no_gap: bool,
    pub window: (usize, usize),
    pub probe_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub grid: usize,
    pub eigenmeasure_iterations: usize,
    pub symbol_masses: Vec<f64>,
    pub gamma_perturbation: f64,
    pub gamma_derivative: Derivative,
    pub beta: Vec<BetaSample>,
    pub gap: GapFit,
    pub grid_convergence: Vec<GridPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// All probes are sampling heuristics.
    pub heuristic: bool,
    pub contraction: ContractionTable,
    pub index: IndexStats,
    pub ell_bound: EllBoundCheck,
    pub gain_holder: GainHolderCheck,
    pub irreducibility: Option<Irreducibility>,
    pub det_closure: Option<f64>,
    pub properness: Option<ProperReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub n: usize,
    pub terminal: usize,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Start point of every enumeration, as a unit vector.
    pub x: Vec<f64>,
    pub entries: Vec<OracleEntry>,
    /// `(E(n, h) - E(n, -h)) / (2 h n)` averaged over terminals with
    /// weights `pi`, per `n`.
    pub derivative: Vec<GridPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub workers: usize,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub config: RunConfig,
    pub chain: ChainSummary,
    pub estimates: Vec<EstimateResult>,
    pub spectrum: Option<SpectrumReport>,
    pub diagnostics: Option<DiagnosticsReport>,
    pub oracle: Option<OracleReport>,
    pub notes: Vec<String>,
    /// Everything here varies between identical runs.
    pub runtime: Runtime,
}

impl Report {
    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let report_path = out_dir.join(&self.config.output.report);
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::io(&report_path, e))?;
        let mut f = std::fs::File::create(&report_path).map_err(|e| CliError::io(&report_path, e))?;
        f.write_all(json.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| CliError::io(&report_path, e))?;

        let trace_path = out_dir.join(&self.config.output.traces);
        let mut w = csv::Writer::from_path(&trace_path).map_err(|e| CliError::io(&trace_path, e))?;
        let err = |e: csv::Error| CliError::io(&trace_path, e);
        w.write_record(["method", "n", "value", "stderr"]).map_err(err)?;
        for est in &self.estimates {
            let method = method_name(est);
            let last = est.trace.len().saturating_sub(1);
            for (idx, (n, value)) in est.trace.iter().enumerate() {
                let se = if idx == last { est.std_error.to_string() } else { String::new() };
                w.write_record([method.clone(), n.to_string(), value.to_string(), se])
                    .map_err(err)?;
            }
        }
        w.flush().map_err(|e| CliError::io(&trace_path, e))?;
        Ok(())
    }
}

pub fn method_name(est: &EstimateResult) -> String {
    match est.method {
        lyapmkv::montecarlo::Method::Subadditive => "subadditive".into(),
        lyapmkv::montecarlo::Method::Furstenberg => "furstenberg".into(),
        lyapmkv::montecarlo::Method::QrExponent(i) => format!("qr_exponent_{}", i + 1),
    }
}
