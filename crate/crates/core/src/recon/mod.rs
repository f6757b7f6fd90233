//! State reconstruction.
//!
//! Two routes to the same matrix: [`tomogram`] combines origin limits
//! of every observable index, [`single`] inverts the moment system of
//! one index. Both return the recovered matrix together with a
//! [`ReconstructionReport`] of per-band diagnostics.

pub mod single;
pub mod tomogram;

use crate::states::ValidationReport;
use serde::{Deserialize, Serialize};

/// Per-band quality figures for a finished reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandDiagnostics {
    pub l: u32,
    /// Largest absolute mismatch between the input profiles feeding
    /// this band and the same profiles recomputed from the output.
    pub residual: f64,
    /// Decay-condition check on the recovered band (trivially true for
    /// finite matrices; reported for the record).
    pub condition_pass: bool,
}

/// Reconstruction outcome diagnostics shared by both methods.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub dim: usize,
    pub bands: Vec<BandDiagnostics>,
    pub validation: ValidationReport,
    /// Standard errors of the diagonal estimates when the input was
    /// sampled; absent for analytic profiles.
    pub diagonal_stderr: Option<Vec<f64>>,
}

impl ReconstructionReport {
    /// Largest band residual, 0 for an empty band list.
    pub fn max_residual(&self) -> f64 {
        self.bands.iter().map(|b| b.residual).fold(0.0, f64::max)
    }
}
