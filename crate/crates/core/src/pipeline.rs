//! Composed workflows: simulate, estimate, reconstruct, round trip.
//!
//! Everything here is a thin orchestration over the forward model,
//! the binned estimator, and the two reconstruction routes, plus a
//! serializable run report. Reports are reproducible for fixed inputs
//! and seeds except for the wall-clock field.

use crate::error::{Error, Result};
use crate::estimate::{estimate_tomogram, EstimationConfig};
use crate::forward::{analytic_tomogram, default_r_max, sample, SampleSet};
use crate::recon::{self, ReconstructionReport};
use crate::states::DensityMatrix;
use crate::tomogram::Tomogram;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::time::Instant;

/// Reconstruction route: `Tomogram` consumes the whole observable
/// family, `Single` consumes one observable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tomogram,
    Single,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Tomogram => write!(f, "tomogram"),
            Method::Single => write!(f, "single"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tomogram" => Ok(Method::Tomogram),
            "single" => Ok(Method::Single),
            other => Err(Error::Format(format!(
                "unknown method '{other}' (expected 'tomogram' or 'single')"
            ))),
        }
    }
}

/// Data regime for a round trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Analytic,
    Samples { count: usize },
}

/// Everything a run leaves behind besides the matrix itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    /// Observable index for the single-index route.
    pub s: Option<u32>,
    pub dim: usize,
    /// SHA-256 of each logical input, keyed by a short name.
    pub input_sha256: BTreeMap<String, String>,
    pub bands: Vec<recon::BandDiagnostics>,
    pub validation: crate::states::ValidationReport,
    pub max_band_residual: f64,
    /// Largest sampling-disk leakage across the consumed sample sets.
    pub truncated_mass: Option<f64>,
    pub warnings: Vec<String>,
    pub diagonal_stderr: Option<Vec<f64>>,
    /// Round trips only: max |recovered - truth| over entries.
    pub max_error: Option<f64>,
    /// Round trips only: per-diagonal 5-sigma budgets and the verdict.
    pub diagonal_error_bound: Option<Vec<f64>>,
    pub within_error_budget: Option<bool>,
    /// Wall clock; the one field outside the determinism contract.
    pub elapsed_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Analytic tomogram for the observables a method needs: all of
/// `0..dim` for the full route, the chosen index for the single one.
pub fn simulate_analytic(
    rho: &DensityMatrix,
    method: Method,
    s: Option<u32>,
) -> Result<Tomogram> {
    analytic_tomogram(rho, &observables(rho.dim(), method, s)?)
}

/// Per-observable sample sets with seeds derived from the base seed,
/// so shards are independent but the whole run is reproducible.
pub fn simulate_samples(
    rho: &DensityMatrix,
    s_list: &[u32],
    count: usize,
    seed: u64,
) -> Result<Vec<SampleSet>> {
    let mut sets = Vec::with_capacity(s_list.len());
    for (k, s) in s_list.iter().enumerate() {
        let shard_seed = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1));
        let r_max = default_r_max(rho.dim(), *s);
        sets.push(sample(*s, rho, count, shard_seed, r_max)?);
    }
    Ok(sets)
}

fn observables(dim: usize, method: Method, s: Option<u32>) -> Result<Vec<u32>> {
    match method {
        Method::Tomogram => Ok((0..dim as u32).collect()),
        Method::Single => Ok(vec![s.unwrap_or(0)]),
    }
}

/// Dispatch to the chosen reconstruction route.
pub fn run_reconstruction(
    t: &Tomogram,
    method: Method,
    s: Option<u32>,
) -> Result<(DensityMatrix, ReconstructionReport)> {
    match method {
        Method::Tomogram => recon::tomogram::reconstruct(t),
        Method::Single => recon::single::reconstruct(s.unwrap_or(0), t),
    }
}

/// Outcome of a full simulate/estimate/reconstruct loop.
#[derive(Debug, Clone)]
pub struct Roundtrip {
    pub truth: DensityMatrix,
    pub recovered: DensityMatrix,
    pub report: RunReport,
}

/// Random state of the given dimension, through simulation (exact or
/// sampled), estimation where sampled, reconstruction, and an error
/// audit against the known truth.
pub fn roundtrip(
    dim: usize,
    seed: u64,
    method: Method,
    s: Option<u32>,
    noise: Noise,
    cfg: &EstimationConfig,
) -> Result<Roundtrip> {
    let start = Instant::now();
    let truth = DensityMatrix::random(dim, dim, seed)?;
    let s_list = observables(dim, method, s)?;
    let mut warnings = Vec::new();
    let mut truncated_mass = None;
    let mut input_sha256 = BTreeMap::new();
    input_sha256.insert(
        "state".to_string(),
        sha256_hex(truth.canonical_json()?.as_bytes()),
    );
    let tomogram = match noise {
        Noise::Analytic => analytic_tomogram(&truth, &s_list)?,
        Noise::Samples { count } => {
            let sets = simulate_samples(&truth, &s_list, count, seed ^ 0x5eed)?;
            truncated_mass = sets
                .iter()
                .map(|set| set.truncated_mass)
                .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))));
            for set in &sets {
                if set.truncation_warning() {
                    warnings.push(format!(
                        "s={}: {:.2e} of the distribution lies outside the sampling disk r <= {}",
                        set.s, set.truncated_mass, set.r_max
                    ));
                }
            }
            let (t, mut w) = estimate_tomogram(&sets, dim, cfg)?;
            warnings.append(&mut w);
            t
        }
    };
    let (recovered, recon_report) = run_reconstruction(&tomogram, method, s)?;
    let max_error = recovered.max_abs_diff(&truth);
    let diagonal_error_bound = recon_report
        .diagonal_stderr
        .as_ref()
        .map(|se| se.iter().map(|e| 5.0 * e).collect::<Vec<f64>>());
    let within_error_budget = diagonal_error_bound.as_ref().map(|bounds| {
        bounds.iter().enumerate().all(|(n, bound)| {
            (recovered.entry(n, n).re - truth.entry(n, n).re).abs() <= *bound
        })
    });
    let report = RunReport {
        method,
        s: match method {
            Method::Single => Some(s.unwrap_or(0)),
            Method::Tomogram => None,
        },
        dim,
        input_sha256,
        max_band_residual: recon_report.max_residual(),
        bands: recon_report.bands,
        validation: recon_report.validation,
        truncated_mass,
        warnings,
        diagonal_stderr: recon_report.diagonal_stderr,
        max_error: Some(max_error),
        diagonal_error_bound,
        within_error_budget,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(Roundtrip {
        truth,
        recovered,
        report,
    })
}

/// Report for a reconstruction whose truth is unknown (file-driven
/// runs): same diagnostics, no error audit.
pub fn report_for_reconstruction(
    method: Method,
    s: Option<u32>,
    dim: usize,
    input_sha256: BTreeMap<String, String>,
    recon_report: ReconstructionReport,
    truncated_mass: Option<f64>,
    warnings: Vec<String>,
    elapsed_seconds: f64,
) -> RunReport {
    RunReport {
        method,
        s,
        dim,
        input_sha256,
        max_band_residual: recon_report.max_residual(),
        bands: recon_report.bands,
        validation: recon_report.validation,
        truncated_mass,
        warnings,
        diagonal_stderr: recon_report.diagonal_stderr,
        max_error: None,
        diagonal_error_bound: None,
        within_error_budget: None,
        elapsed_seconds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_roundtrip_both_methods() {
        let cfg = EstimationConfig::default();
        let out = roundtrip(4, 11, Method::Tomogram, None, Noise::Analytic, &cfg).unwrap();
        assert!(out.report.max_error.unwrap() < 1e-9);
        assert!(out.report.validation.passes);
        assert!(out.report.truncated_mass.is_none());

        let out = roundtrip(3, 5, Method::Single, Some(0), Noise::Analytic, &cfg).unwrap();
        assert!(out.report.max_error.unwrap() < 1e-9);
        assert_eq!(out.report.s, Some(0));
    }

    #[test]
    fn sampled_roundtrip_reports_a_budget() {
        let cfg = EstimationConfig::default();
        let out = roundtrip(
            2,
            3,
            Method::Tomogram,
            None,
            Noise::Samples { count: 60_000 },
            &cfg,
        )
        .unwrap();
        assert!(out.report.truncated_mass.is_some());
        let bounds = out.report.diagonal_error_bound.as_ref().unwrap();
        assert_eq!(bounds.len(), 2);
        assert!(bounds.iter().all(|b| *b > 0.0));
        assert!(out.report.within_error_budget.is_some());
        assert!(out.report.max_error.unwrap() < 0.2);
    }

    #[test]
    fn shard_seeds_differ_between_observables() {
        let rho = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let sets = simulate_samples(&rho, &[0, 1], 2_000, 42).unwrap();
        assert_eq!(sets.len(), 2);
        assert_ne!(sets[0].seed, sets[1].seed);
        let again = simulate_samples(&rho, &[0, 1], 2_000, 42).unwrap();
        assert_eq!(sets[0].points, again[0].points);
    }

    #[test]
    fn report_round_trips_through_json() {
        let cfg = EstimationConfig::default();
        let out = roundtrip(2, 7, Method::Tomogram, None, Noise::Analytic, &cfg).unwrap();
        let text = serde_json::to_string_pretty(&out.report).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.dim, 2);
        assert_eq!(back.method, Method::Tomogram);
        assert_eq!(back.input_sha256, out.report.input_sha256);
    }

    #[test]
    fn method_parses_from_strings() {
        assert_eq!("tomogram".parse::<Method>().unwrap(), Method::Tomogram);
        assert_eq!("single".parse::<Method>().unwrap(), Method::Single);
        assert!("other".parse::<Method>().is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
