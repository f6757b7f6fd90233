//! Command-line driver for the reconstruction workflows.
//!
//! Exit codes: 0 success, 1 I/O or format, 2 validation or contract,
//! 3 coverage, 4 estimation or fit, 5 singular system.

use clap::{Parser, Subcommand, ValueEnum};
use fockrec::error::{Error, Result};
use fockrec::estimate::{
    estimate_tomogram, EstimationConfig, DEFAULT_RADIAL_BINS, DEFAULT_R_FIT_MAX,
};
use fockrec::forward::SampleSet;
use fockrec::pipeline::{self, Method, Noise};
use fockrec::states::DensityMatrix;
use fockrec::tomogram::Tomogram;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "fockrec",
    version,
    about = "Simulate, estimate, and reconstruct Fock-basis density matrices from displaced photon-number data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Analytic,
    Samples,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Tomogram,
    Single,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Tomogram => Method::Tomogram,
            MethodArg::Single => Method::Single,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Forward-simulate observables of a state file.
    Simulate {
        /// Density-matrix JSON.
        #[arg(long)]
        state: PathBuf,
        /// Observable indices, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        s: Vec<u32>,
        #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
        mode: ModeArg,
        /// Samples per observable (samples mode).
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Tomogram JSON path (analytic) or directory for sample CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Bin sampled data into a tomogram of radial profiles.
    Estimate {
        /// Sample CSV files (each with its .meta.json sidecar).
        #[arg(long, required = true, num_args = 1..)]
        samples: Vec<PathBuf>,
        /// Truncation dimension of the target state.
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = DEFAULT_RADIAL_BINS)]
        bins: usize,
        #[arg(long, default_value_t = DEFAULT_R_FIT_MAX)]
        rmax: f64,
        /// Tomogram JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a density matrix from a tomogram file.
    Reconstruct {
        /// Tomogram JSON.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Tomogram)]
        method: MethodArg,
        /// Observable index (single method).
        #[arg(long)]
        s: Option<u32>,
        /// Recovered density-matrix JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Optional run-report JSON path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Simulate, estimate, and reconstruct a random state; audit the error.
    Roundtrip {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MethodArg::Tomogram)]
        method: MethodArg,
        #[arg(long)]
        s: Option<u32>,
        #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
        mode: ModeArg,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_RADIAL_BINS)]
        bins: usize,
        #[arg(long, default_value_t = DEFAULT_R_FIT_MAX)]
        rmax: f64,
        /// Optional path for the recovered density matrix.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional run-report JSON path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Physicality report for a state file; exit 2 when checks fail.
    Validate {
        #[arg(long)]
        state: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            state,
            s,
            mode,
            count,
            seed,
            out,
        } => simulate(&state, &s, mode, count, seed, &out),
        Command::Estimate {
            samples,
            dim,
            bins,
            rmax,
            out,
        } => estimate(&samples, dim, bins, rmax, &out),
        Command::Reconstruct {
            input,
            method,
            s,
            out,
            report,
        } => reconstruct(&input, method.into(), s, &out, report.as_deref()),
        Command::Roundtrip {
            dim,
            seed,
            method,
            s,
            mode,
            count,
            bins,
            rmax,
            out,
            report,
        } => roundtrip(
            dim,
            seed,
            method.into(),
            s,
            mode,
            count,
            bins,
            rmax,
            out.as_deref(),
            report.as_deref(),
        ),
        Command::Validate { state } => validate(&state),
    }
}

fn simulate(
    state: &Path,
    s_list: &[u32],
    mode: ModeArg,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let rho = DensityMatrix::load(state)?;
    let validation = rho.validate();
    if !validation.passes {
        return Err(Error::Validation(format!(
            "input state fails physicality checks: {}",
            serde_json::to_string(&validation)?
        )));
    }
    match mode {
        ModeArg::Analytic => {
            let tomogram = fockrec::forward::analytic_tomogram(&rho, s_list)?;
            tomogram.save(out)?;
            println!("wrote {}", out.display());
        }
        ModeArg::Samples => {
            std::fs::create_dir_all(out)?;
            let sets = pipeline::simulate_samples(&rho, s_list, count, seed)?;
            for set in &sets {
                let path = out.join(format!("s{}.csv", set.s));
                set.save(&path)?;
                if set.truncation_warning() {
                    eprintln!(
                        "warning: s={}: {:.2e} of the distribution lies outside r <= {}",
                        set.s, set.truncated_mass, set.r_max
                    );
                }
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn estimate(samples: &[PathBuf], dim: usize, bins: usize, rmax: f64, out: &Path) -> Result<()> {
    let cfg = EstimationConfig {
        radial_bins: bins,
        r_fit_max: rmax,
        ..EstimationConfig::default()
    };
    let mut sets = Vec::with_capacity(samples.len());
    for path in samples {
        sets.push(SampleSet::load(path)?);
    }
    let (tomogram, warnings) = estimate_tomogram(&sets, dim, &cfg)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    tomogram.save(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn reconstruct(
    input: &Path,
    method: Method,
    s: Option<u32>,
    out: &Path,
    report_path: Option<&Path>,
) -> Result<()> {
    let start = Instant::now();
    let tomogram = Tomogram::load(input)?;
    let (rho, recon_report) = pipeline::run_reconstruction(&tomogram, method, s)?;
    rho.save(out)?;
    println!("wrote {}", out.display());
    println!(
        "dim {} | max band residual {:.3e} | validation {}",
        recon_report.dim,
        recon_report.max_residual(),
        if recon_report.validation.passes {
            "pass"
        } else {
            "fail"
        }
    );
    if let Some(path) = report_path {
        let mut hashes = BTreeMap::new();
        hashes.insert("tomogram".to_string(), file_sha256(input)?);
        let dim = recon_report.dim;
        let report = pipeline::report_for_reconstruction(
            method,
            s.or(match method {
                Method::Single => Some(0),
                Method::Tomogram => None,
            }),
            dim,
            hashes,
            recon_report,
            None,
            Vec::new(),
            start.elapsed().as_secs_f64(),
        );
        write_json(path, &report)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn roundtrip(
    dim: usize,
    seed: u64,
    method: Method,
    s: Option<u32>,
    mode: ModeArg,
    count: usize,
    bins: usize,
    rmax: f64,
    out: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let cfg = EstimationConfig {
        radial_bins: bins,
        r_fit_max: rmax,
        ..EstimationConfig::default()
    };
    let noise = match mode {
        ModeArg::Analytic => Noise::Analytic,
        ModeArg::Samples => Noise::Samples { count },
    };
    let result = pipeline::roundtrip(dim, seed, method, s, noise, &cfg)?;
    let max_error = result.report.max_error.unwrap_or(f64::NAN);
    let gate = match mode {
        ModeArg::Analytic => max_error <= 1e-9,
        ModeArg::Samples => result.report.within_error_budget.unwrap_or(false),
    };
    println!(
        "dim {dim} seed {seed} method {method} mode {} | max error {max_error:.3e} | gate {}",
        match mode {
            ModeArg::Analytic => "analytic",
            ModeArg::Samples => "samples",
        },
        if gate { "pass" } else { "fail" }
    );
    for w in &result.report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = out {
        result.recovered.save(path)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = report_path {
        write_json(path, &result.report)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn validate(state: &Path) -> Result<()> {
    let rho = DensityMatrix::load(state)?;
    let report = rho.validate();
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.passes {
        Ok(())
    } else {
        Err(Error::Validation("state fails physicality checks".into()))
    }
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(pipeline::sha256_hex(&std::fs::read(path)?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
