//! Finite density matrices in the photon-number basis.
//!
//! The same type doubles as the generator operator of a covariant
//! phase-space observable: both are trace-one positive matrices and
//! share truncation, validation and characteristic-function weights.

use crate::error::{Error, Result};
use crate::special::{displacement_element, PhasePoint};
use crate::C64;
use nalgebra::DMatrix;
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Hermiticity defect allowed by validation.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Trace defect allowed by validation.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue allowed by validation.
pub const PSD_TOL: f64 = -1e-10;
/// Trace below which a truncated block cannot be renormalized.
const TRUNCATION_TRACE_EPS: f64 = 1e-12;

/// Trace-one positive matrix on the first `dim` number states,
/// stored dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<C64>,
}

/// Generator of a covariant phase-space observable; structurally a
/// density matrix and treated as one throughout.
pub type GeneratorOperator = DensityMatrix;

/// Validation outcome with the raw defect magnitudes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dim: usize,
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    pub passes: bool,
}

/// Scan of the characteristic weight over a radial grid, used to judge
/// whether an observable's generator keeps full information.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub points: usize,
    pub min_abs: f64,
    pub fraction_below_floor: f64,
    pub all_nonzero: bool,
}

/// Magnitude below which the characteristic weight counts as a zero.
pub const WEIGHT_FLOOR: f64 = 1e-12;

impl DensityMatrix {
    /// Build from row-major entries and validate physicality.
    pub fn from_entries(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::Domain(format!(
                "expected {} entries for dim {dim}, got {}",
                dim * dim,
                data.len()
            )));
        }
        let rho = DensityMatrix { dim, data };
        let report = rho.validate();
        if !report.passes {
            return Err(Error::Validation(format!(
                "matrix is not a physical state: hermiticity defect {:.3e}, trace defect {:.3e}, min eigenvalue {:.3e}",
                report.hermiticity_defect, report.trace_defect, report.min_eigenvalue
            )));
        }
        Ok(rho)
    }

    /// Build without physicality checks; callers report defects
    /// separately. Shape is still enforced.
    pub fn from_entries_unchecked(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::Domain("entry count must equal dim^2 with dim > 0".into()));
        }
        Ok(DensityMatrix { dim, data })
    }

    /// Diagonal state from a probability vector.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let dim = probs.len();
        if dim == 0 {
            return Err(Error::Domain("empty probability vector".into()));
        }
        if probs.iter().any(|p| *p < -TRACE_TOL) {
            return Err(Error::Validation("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::Validation(format!("probabilities sum to {total}, not 1")));
        }
        let mut data = vec![C64::zero(); dim * dim];
        for (i, p) in probs.iter().enumerate() {
            data[i * dim + i] = C64::new(*p, 0.0);
        }
        Ok(DensityMatrix { dim, data })
    }

    /// Pure state `|psi><psi|` from amplitudes; normalizes the vector.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let dim = amplitudes.len();
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if dim == 0 || norm_sq <= 0.0 {
            return Err(Error::Domain("pure state needs a nonzero amplitude vector".into()));
        }
        let scale = 1.0 / norm_sq;
        let mut data = vec![C64::zero(); dim * dim];
        for m in 0..dim {
            for n in 0..dim {
                data[m * dim + n] = amplitudes[m] * amplitudes[n].conj() * scale;
            }
        }
        Ok(DensityMatrix { dim, data })
    }

    /// Random rank-`rank` state: `G G^dagger / tr` with `G` a seeded
    /// `dim x rank` complex Gaussian matrix. Deterministic per seed.
    pub fn random(dim: usize, rank: usize, seed: u64) -> Result<Self> {
        if dim == 0 || rank == 0 || rank > dim {
            return Err(Error::Domain(format!(
                "need 1 <= rank <= dim, got rank {rank}, dim {dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = vec![C64::zero(); dim * rank];
        for entry in g.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *entry = C64::new(re, im);
        }
        let mut data = vec![C64::zero(); dim * dim];
        for m in 0..dim {
            for n in 0..dim {
                let mut acc = C64::zero();
                for k in 0..rank {
                    acc += g[m * rank + k] * g[n * rank + k].conj();
                }
                data[m * dim + n] = acc;
            }
        }
        let trace: f64 = (0..dim).map(|i| data[i * dim + i].re).sum();
        for e in data.iter_mut() {
            *e /= trace;
        }
        // exact Hermitian symmetrization; GG^dagger is Hermitian up to rounding
        for m in 0..dim {
            for n in m + 1..dim {
                let avg = (data[m * dim + n] + data[n * dim + m].conj()) * 0.5;
                data[m * dim + n] = avg;
                data[n * dim + m] = avg.conj();
            }
            data[m * dim + m] = C64::new(data[m * dim + m].re, 0.0);
        }
        Ok(DensityMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, m: usize, n: usize) -> C64 {
        self.data[m * self.dim + n]
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    /// Upper diagonal band `l`: entries `rho_{n+l, n}` for
    /// `n = 0..dim-l`.
    pub fn band(&self, l: usize) -> Vec<C64> {
        (0..self.dim.saturating_sub(l))
            .map(|n| self.entry(n + l, n))
            .collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.entry(i, i)).sum()
    }

    /// `tr(rho^2)`; equals one exactly for pure states.
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for m in 0..self.dim {
            for n in 0..self.dim {
                acc += (self.entry(m, n) * self.entry(n, m)).re;
            }
        }
        acc
    }

    /// Zero-pad into a larger space.
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::Domain(format!(
                "embedding dimension {dim} below current {}",
                self.dim
            )));
        }
        let mut data = vec![C64::zero(); dim * dim];
        for m in 0..self.dim {
            for n in 0..self.dim {
                data[m * dim + n] = self.entry(m, n);
            }
        }
        Ok(DensityMatrix { dim, data })
    }

    /// Largest elementwise modulus of the difference.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.to_dmatrix();
        let herm = (m.clone() + m.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Trace-norm distance `|| self - other ||_1` (sum of singular
    /// values; absolute eigenvalues for the Hermitian difference).
    pub fn trace_norm_distance(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let diff = self.to_dmatrix() - other.to_dmatrix();
        let herm = (diff.clone() + diff.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .sum()
    }

    /// Defect magnitudes against the physicality tolerances.
    pub fn validate(&self) -> ValidationReport {
        let mut herm = 0.0_f64;
        for m in 0..self.dim {
            for n in 0..self.dim {
                let d = (self.entry(m, n) - self.entry(n, m).conj()).norm();
                herm = herm.max(d);
            }
        }
        let trace_defect = (self.trace() - C64::new(1.0, 0.0)).norm();
        let min_eig = self
            .eigenvalues()
            .first()
            .copied()
            .unwrap_or(f64::NEG_INFINITY);
        ValidationReport {
            dim: self.dim,
            hermiticity_defect: herm,
            trace_defect,
            min_eigenvalue: min_eig,
            passes: herm <= HERMITICITY_TOL && trace_defect <= TRACE_TOL && min_eig >= PSD_TOL,
        }
    }

    /// Leading `n x n` block renormalized to unit trace.
    pub fn truncate_normalize(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.dim {
            return Err(Error::Domain(format!(
                "truncation dimension {n} outside 1..={}",
                self.dim
            )));
        }
        let block_trace: f64 = (0..n).map(|i| self.entry(i, i).re).sum();
        if block_trace.abs() < TRUNCATION_TRACE_EPS {
            return Err(Error::DegenerateTruncation {
                dim: n,
                trace: block_trace,
            });
        }
        let mut data = vec![C64::zero(); n * n];
        for m in 0..n {
            for j in 0..n {
                data[m * n + j] = self.entry(m, j) / block_trace;
            }
        }
        Ok(DensityMatrix { dim: n, data })
    }

    /// Characteristic weight `tr[K D(z)]`.
    pub fn characteristic_weight(&self, z: PhasePoint) -> C64 {
        let mut acc = C64::zero();
        for m in 0..self.dim {
            for n in 0..self.dim {
                let k_mn = self.entry(m, n);
                if k_mn.norm_sqr() > 0.0 {
                    acc += k_mn * displacement_element(n, m, z);
                }
            }
        }
        acc
    }

    /// Scan `|tr[K D(z)]|` over a grid of phase-space points.
    pub fn completeness_diagnostic(&self, grid: &[PhasePoint]) -> CompletenessReport {
        let mut min_abs = f64::INFINITY;
        let mut below = 0_usize;
        for z in grid {
            let w = self.characteristic_weight(*z).norm();
            min_abs = min_abs.min(w);
            if w < WEIGHT_FLOOR {
                below += 1;
            }
        }
        CompletenessReport {
            points: grid.len(),
            min_abs,
            fraction_below_floor: below as f64 / grid.len().max(1) as f64,
            all_nonzero: below == 0,
        }
    }

    /// JSON form (`dim`, `re`, `im` row-major grids); stable bytes
    /// for hashing and file comparison.
    pub fn canonical_json(&self) -> Result<String> {
        let file = DensityMatrixFile::from(self);
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Write as JSON (`dim`, `re`, `im` row-major grids).
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.canonical_json()?)?;
        Ok(())
    }

    /// Read from JSON without physicality enforcement; run
    /// [`DensityMatrix::validate`] for the report.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: DensityMatrixFile = serde_json::from_str(&text)?;
        file.into_matrix()
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixFile {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<&DensityMatrix> for DensityMatrixFile {
    fn from(rho: &DensityMatrix) -> Self {
        let dim = rho.dim();
        DensityMatrixFile {
            dim,
            re: (0..dim)
                .map(|m| (0..dim).map(|n| rho.entry(m, n).re).collect())
                .collect(),
            im: (0..dim)
                .map(|m| (0..dim).map(|n| rho.entry(m, n).im).collect())
                .collect(),
        }
    }
}

impl DensityMatrixFile {
    fn into_matrix(self) -> Result<DensityMatrix> {
        let dim = self.dim;
        let shape_ok = self.re.len() == dim
            && self.im.len() == dim
            && self.re.iter().all(|r| r.len() == dim)
            && self.im.iter().all(|r| r.len() == dim);
        if !shape_ok {
            return Err(Error::Format(format!(
                "re/im grids do not match declared dim {dim}"
            )));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for m in 0..dim {
            for n in 0..dim {
                data.push(C64::new(self.re[m][n], self.im[m][n]));
            }
        }
        DensityMatrix::from_entries_unchecked(dim, data)
    }
}
