//! Reconstruction from the origin behavior of many observable
//! indices.
//!
//! The diagonal is read off directly: `G_0(0) = rho_ss` for index `s`.
//! Each off-diagonal band enters through the small-radius limits
//! `d^l_s = lim_{r->0} e^{r^2} r^{-l} G_l(r)`, a banded binomial
//! combination of the band entries that is inverted in closed form by
//! partial sums. Limits are never taken by evaluating near-zero
//! quotients; they are constant terms of exact polynomial models in
//! `x = r^2`.

use crate::error::{Error, Result};
use crate::fit::{fit_polynomial, fit_polynomial_real};
use crate::forward;
use crate::special::{ln_binomial, ln_factorial, sqrt_factorial_ratio};
use crate::states::DensityMatrix;
use crate::tomogram::{ProfileKind, Tomogram};
use crate::C64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{BandDiagnostics, ReconstructionReport};

/// Weighted fits floor each standard error at this fraction of the
/// largest transformed value so a freak zero-variance bin cannot seize
/// the fit.
const SIGMA_FLOOR_REL: f64 = 1e-12;
/// Reduced-residual budget for sampled-profile limit extraction.
const RESIDUAL_BUDGET: f64 = 10.0;
/// Tail weights below this level count as identically zero.
const TAIL_ZERO_TOL: f64 = 1e-12;
/// Decay verdict: log-log slope of the tail weights must fall below
/// this for the limit condition to count as satisfied.
const SLOPE_PASS: f64 = -0.25;

/// Coefficient `T^l_{sn}` of `rho_{n+l,n}` in the limit `d^l_s`:
/// zero outside `s - l <= n <= s`, else
/// `(-1)^{s-n} sqrt((n+l)!/n!) / ((s-n)! (n+l-s)!)`.
pub fn t_limit_coeff(l: u32, s: u32, n: u32) -> f64 {
    assert!(l >= 1, "limit coefficients are defined for l >= 1");
    if n + l < s || n > s {
        return 0.0;
    }
    let (s, n, l) = (s as usize, n as usize, l as usize);
    let magnitude = sqrt_factorial_ratio((n + l) as u64, n as u64)
        * (-ln_factorial(s - n) - ln_factorial(n + l - s)).exp();
    if (s - n) % 2 == 0 {
        magnitude
    } else {
        -magnitude
    }
}

/// Diagonal read-out with per-entry uncertainty when available.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalEstimate {
    pub values: Vec<f64>,
    /// Present when every diagonal profile carried sampling errors.
    pub stderr: Option<Vec<f64>>,
}

fn sigma_floor(ys_scale: f64) -> f64 {
    (SIGMA_FLOOR_REL * ys_scale).max(f64::MIN_POSITIVE)
}

/// Diagonal entries `rho_ss = G^(s)_0(0)`, each taken as the constant
/// term of the exact polynomial model of `e^x G_0(sqrt(x))`.
pub fn diagonal_from_origin(t: &Tomogram) -> Result<DiagonalEstimate> {
    let dim = t.dim_hint;
    let mut values = Vec::with_capacity(dim);
    let mut stderr = Vec::with_capacity(dim);
    let mut have_stderr = dim > 0;
    for s in 0..dim as u32 {
        let p = t.require(s, 0)?;
        let degree = dim - 1 + s as usize;
        if p.len() < degree + 1 {
            return Err(Error::Estimation(format!(
                "profile (s={s}, l=0) has {} radii; the origin fit needs {}",
                p.len(),
                degree + 1
            )));
        }
        let xs: Vec<f64> = p.radii().iter().map(|r| r * r).collect();
        let ys: Vec<f64> = xs
            .iter()
            .zip(p.values())
            .map(|(x, v)| x.exp() * v.re)
            .collect();
        let scale = ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        let floor = sigma_floor(scale);
        // measured profiles weight by their propagated bin errors;
        // analytic ones by the e^x roundoff envelope
        let sigmas: Vec<f64> = match (p.kind, p.stderr()) {
            (ProfileKind::Sampled, Some(se)) => xs
                .iter()
                .zip(se)
                .map(|(x, e)| (x.exp() * e).max(floor))
                .collect(),
            _ => xs.iter().map(|x| x.exp()).collect(),
        };
        let fit = fit_polynomial_real(&xs, &ys, Some(&sigmas), degree)?;
        values.push(fit.coefficient(0).re);
        if p.kind == ProfileKind::Sampled && p.stderr().is_some() {
            stderr.push(fit.coefficient_stderr(0));
        } else {
            have_stderr = false;
        }
    }
    Ok(DiagonalEstimate {
        values,
        stderr: have_stderr.then_some(stderr),
    })
}

/// Small-radius limit `d^l_s` of one profile, as the constant term of
/// the polynomial `e^x r^{-l} G_l` in `x = r^2`, fitted inside the
/// unit disk where the model is best conditioned.
pub fn extract_d(t: &Tomogram, l: u32, s: u32) -> Result<C64> {
    if l == 0 {
        return Err(Error::Contract(
            "l = 0 has no r^{-l} limit; use diagonal_from_origin".into(),
        ));
    }
    if s < l {
        return Err(Error::Contract(format!(
            "limit d^l_s requires s >= l, got s={s}, l={l}"
        )));
    }
    let dim = t.dim_hint;
    let p = t.require(s, l)?;
    let degree = dim - 1 - l as usize + s as usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut errs = Vec::new();
    for (i, r) in p.radii().iter().enumerate() {
        if *r <= 0.0 || *r >= 1.0 {
            continue;
        }
        let x = r * r;
        let lift = x.exp() * r.powi(-(l as i32));
        xs.push(x);
        ys.push(p.values()[i] * lift);
        errs.push(p.stderr().map(|se| se[i] * lift));
    }
    let sampled = p.kind == ProfileKind::Sampled;
    if sampled && xs.len() < dim + s as usize {
        return Err(Error::Estimation(format!(
            "profile (s={s}, l={l}) has {} usable radii below 1; need {}",
            xs.len(),
            dim + s as usize
        )));
    }
    if xs.len() < degree + 1 {
        return Err(Error::Estimation(format!(
            "profile (s={s}, l={l}) has {} radii below 1; the limit fit needs {}",
            xs.len(),
            degree + 1
        )));
    }
    let sigmas: Option<Vec<f64>> = if sampled {
        let scale = ys.iter().fold(0.0_f64, |m, y| m.max(y.norm()));
        let floor = sigma_floor(scale);
        Some(
            errs.iter()
                .map(|e| e.unwrap_or(1.0).max(floor))
                .collect(),
        )
    } else {
        None
    };
    let fit = fit_polynomial(&xs, &ys, sigmas.as_deref(), degree)?;
    if sampled && fit.residual_rms() > RESIDUAL_BUDGET {
        return Err(Error::IllConditionedFit {
            context: format!("limit extraction for (s={s}, l={l})"),
            residual: fit.residual_rms(),
            budget: RESIDUAL_BUDGET,
        });
    }
    Ok(fit.coefficient(0))
}

/// Where a limit vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Fitted,
}

/// Limits `d^l_s` for one band, `s = l..=s_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DVector {
    pub l: u32,
    entries: Vec<C64>,
    pub provenance: Provenance,
}

impl DVector {
    pub fn new(l: u32, entries: Vec<C64>, provenance: Provenance) -> Result<Self> {
        if l == 0 {
            return Err(Error::Contract("limit vectors describe bands l >= 1".into()));
        }
        if entries.is_empty() {
            return Err(Error::Contract("limit vector needs s_max >= l".into()));
        }
        if entries
            .iter()
            .any(|e| !e.re.is_finite() || !e.im.is_finite())
        {
            return Err(Error::Validation("non-finite limit entry".into()));
        }
        Ok(DVector {
            l,
            entries,
            provenance,
        })
    }

    pub fn s_max(&self) -> u32 {
        self.l + self.entries.len() as u32 - 1
    }

    /// `d^l_s`; zero outside the stored range.
    pub fn entry(&self, s: u32) -> C64 {
        if s < self.l {
            return C64::zero();
        }
        self.entries
            .get((s - self.l) as usize)
            .copied()
            .unwrap_or_else(C64::zero)
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }
}

/// All limits for band `l` out of one tomogram, `s = l..dim_hint-1`.
pub fn extract_d_vector(t: &Tomogram, l: u32) -> Result<DVector> {
    let dim = t.dim_hint;
    if l as usize >= dim {
        return Err(Error::Contract(format!(
            "band {l} does not exist in dimension {dim}"
        )));
    }
    let mut entries = Vec::with_capacity(dim - l as usize);
    let mut fitted = false;
    for s in l..dim as u32 {
        fitted |= t.require(s, l)?.kind == ProfileKind::Sampled;
        entries.push(extract_d(t, l, s)?);
    }
    DVector::new(
        l,
        entries,
        if fitted {
            Provenance::Fitted
        } else {
            Provenance::Analytic
        },
    )
}

/// Band recovery
/// `rho_{n+l,n} = (-1)^l l! sqrt(n!/(n+l)!)
///  sum_{s=n+l}^{s_max} C(s-n-1, l-1) d^l_s`.
///
/// The sum starts at `s = n + l`: of the two one-sided solutions of
/// the banded limit system, this is the one selected by square
/// summability, and it is exact for finite matrices.
pub fn reconstruct_offdiagonal(l: u32, d: &DVector, band_len: usize) -> Result<Vec<C64>> {
    if d.l != l {
        return Err(Error::Contract(format!(
            "limit vector describes band {}, asked for band {l}",
            d.l
        )));
    }
    let lu = l as usize;
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    let l_fact = ln_factorial(lu).exp();
    let mut band = Vec::with_capacity(band_len);
    for n in 0..band_len {
        let mut acc = C64::zero();
        for s in (n as u32 + l)..=d.s_max() {
            let c = ln_binomial(s as usize - n - 1, lu - 1).exp();
            acc += d.entry(s) * c;
        }
        let scale = sign * l_fact * sqrt_factorial_ratio(n as u64, (n + lu) as u64);
        band.push(acc * scale);
    }
    Ok(band)
}

/// Outcome of the band decay check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub l: u32,
    /// `m^{(3/2)l - 1} |rho_{m,m-l}|` along the tail.
    pub weights: Vec<f64>,
    /// Log-log slope over the far half of the nonzero weights; absent
    /// when the tail dies out or is too short to regress.
    pub slope: Option<f64>,
    pub passes: bool,
}

/// Checks the decay sufficient for band recovery: the weighted tail
/// `m^{(3/2)l - 1} |rho_{m,m-l}|` must tend to zero. Entry `j` of
/// `band_tail` is `rho_{m,m-l}` at `m = l + j`. Finite matrices,
/// padded with their vanishing tail, always pass; for infinite tails
/// the verdict is a heuristic slope estimate, and failing it does not
/// prove the reconstruction wrong (the condition is not necessary).
pub fn condition_check(band_tail: &[C64], l: u32) -> ConditionReport {
    let exponent = 1.5 * l as f64 - 1.0;
    let weights: Vec<f64> = band_tail
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let m = l as usize + j;
            if m == 0 {
                0.0
            } else {
                (m as f64).powf(exponent) * v.norm()
            }
        })
        .collect();
    let half = weights.len() / 2;
    if weights[half..].iter().all(|w| *w <= TAIL_ZERO_TOL) {
        return ConditionReport {
            l,
            weights,
            slope: None,
            passes: true,
        };
    }
    let points: Vec<(f64, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > TAIL_ZERO_TOL)
        .map(|(j, w)| (((l as usize + j) as f64).ln(), w.ln()))
        .collect();
    if points.len() < 4 {
        // too short to call; do not raise a false alarm
        return ConditionReport {
            l,
            weights,
            slope: None,
            passes: true,
        };
    }
    // regress on the far half, where the asymptotic regime lives
    let far = &points[points.len() / 2..];
    let n = far.len() as f64;
    let mean_x = far.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = far.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in far {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    ConditionReport {
        l,
        weights,
        slope: Some(slope),
        passes: slope <= SLOPE_PASS,
    }
}

/// Full reconstruction: diagonal from origin values, every band from
/// its limit vector, Hermitian completion, then validation.
pub fn reconstruct(t: &Tomogram) -> Result<(DensityMatrix, ReconstructionReport)> {
    let dim = t.dim_hint;
    if dim == 0 {
        return Err(Error::Contract("tomogram dim_hint must be >= 1".into()));
    }
    let diag = diagonal_from_origin(t)?;
    let mut data = vec![C64::zero(); dim * dim];
    for n in 0..dim {
        data[n * dim + n] = C64::new(diag.values[n], 0.0);
    }
    for l in 1..dim {
        let d = extract_d_vector(t, l as u32)?;
        let band = reconstruct_offdiagonal(l as u32, &d, dim - l)?;
        for (n, v) in band.iter().enumerate() {
            data[(n + l) * dim + n] = *v;
            data[n * dim + n + l] = v.conj();
        }
    }
    let rho = DensityMatrix::from_entries_unchecked(dim, data)?;
    let mut bands = Vec::with_capacity(dim);
    for l in 0..dim as u32 {
        bands.push(BandDiagnostics {
            l,
            residual: band_residual(t, &rho, l)?,
            condition_pass: finite_band_condition(&rho, l).passes,
        });
    }
    let report = ReconstructionReport {
        dim,
        bands,
        validation: rho.validate(),
        diagonal_stderr: diag.stderr,
    };
    Ok((rho, report))
}

/// Largest mismatch between the stored profiles for band `l` and the
/// same profiles recomputed from the reconstructed matrix.
fn band_residual(t: &Tomogram, rho: &DensityMatrix, l: u32) -> Result<f64> {
    let mut worst = 0.0_f64;
    for s in 0..rho.dim() as u32 {
        if let Some(p) = t.get(s, l) {
            for (r, v) in p.radii().iter().zip(p.values()) {
                let model = forward::fourier_component_value(s, rho, l, *r)?;
                worst = worst.max((model - v).norm());
            }
        }
    }
    Ok(worst)
}

/// Decay check on a finite matrix's band: the tail beyond the
/// truncation is identically zero, so it is padded in before the
/// check.
fn finite_band_condition(rho: &DensityMatrix, l: u32) -> ConditionReport {
    let mut tail = rho.band(l as usize);
    tail.extend(std::iter::repeat(C64::zero()).take(rho.dim()));
    condition_check(&tail, l)
}
