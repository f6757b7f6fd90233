//! Reconstruction from a single observable index.
//!
//! One index `s` determines the whole matrix: each band `l` of the
//! state enters the auxiliary function (even `l`: `e^x G_l(sqrt(x))`,
//! odd `l`: `sqrt(x) e^x G_l(sqrt(x))`, with `x = r^2`) through an
//! upper-triangular coefficient system. Derivative moments of the
//! auxiliary function at the origin are exact polynomial coefficients
//! for finite states, and the system is inverted by the triangular
//! engine. The coefficients `H^s_l(t, n)` have a closed
//! double-binomial form; its derivation route (geometric-family
//! derivatives, [`lemma4_derivative`]) is kept alongside as the test
//! oracle.

use crate::error::{Error, Result};
use crate::fit::fit_polynomial;
use crate::forward;
use crate::special::{binomial, factorial, ln_binomial, ln_factorial};
use crate::states::DensityMatrix;
use crate::tomogram::{ProfileKind, RadialProfile, Tomogram};
use crate::{C64, Exact};
use crate::scalar::SINGULAR_EPS;
use crate::triinv::TriangularOperator;
use nalgebra::DMatrix;
use num_traits::Zero;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Floor applied to fit weights, relative to the largest value.
const SIGMA_FLOOR_REL: f64 = 1e-12;
/// Reduced-residual budget for sampled-profile moment fits.
const RESIDUAL_BUDGET: f64 = 10.0;

/// `(1/s!) d^s/dlambda^s [(1-lambda)^p lambda^q e^{lambda x}]` at
/// `lambda = 0`:
/// `sum_{k=q}^{min(s, p+q)} ((-1)^{k+q}/(s-k)!) C(p, k-q) x^{s-k}`,
/// identically zero iff `s < q`.
pub fn lemma4_derivative(p: u32, q: u32, s: u32, x: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..=s {
        let c = lemma4_x_coefficient(p, q, s, j);
        if c != 0.0 {
            acc += c * x.powi(j as i32);
        }
    }
    acc
}

/// Coefficient of `x^j` in [`lemma4_derivative`]; the `k`-sum index
/// maps to `k = s - j`.
fn lemma4_x_coefficient(p: u32, q: u32, s: u32, j: u32) -> f64 {
    if j > s {
        return 0.0;
    }
    let k = s - j;
    if k < q || k > p + q {
        return 0.0;
    }
    let magnitude = (ln_binomial(p as usize, (k - q) as usize) - ln_factorial(j as usize)).exp();
    if (k + q) % 2 == 0 {
        magnitude
    } else {
        -magnitude
    }
}

/// Coefficient `H^s_l(t, n)` of `rho_{n+l,n}` in the `t`-th origin
/// derivative of the auxiliary function, by the closed form
/// (`h = floor(l/2)`, `delta = l mod 2`, `tau = t - h - delta`):
///
/// `t! sqrt(n!(n+l)!) (-1)^{s+h+t+n+delta} / (h+t+n-s)!
///  sum_u C(2(u+h)+delta, u) C(s-n+u, tau-u) / ((n-u)! (u-n+s)!)`,
///
/// `u = max(0, n-s)..min(n, tau)`. Vanishes when `tau < 0`,
/// `tau < n - s`, or `n < tau - s`.
pub fn h_coeff(s: u32, l: u32, t: u32, n: u32) -> f64 {
    let (s, l, t, n) = (s as i64, l as i64, t as i64, n as i64);
    let h = l / 2;
    let delta = l % 2;
    let tau = t - h - delta;
    if tau < 0 {
        return 0.0;
    }
    let pre_den = h + t + n - s;
    if pre_den < 0 {
        // reciprocal factorial of a negative integer: the whole
        // coefficient vanishes
        return 0.0;
    }
    let u_lo = 0.max(n - s);
    let u_hi = n.min(tau);
    if u_hi < u_lo {
        return 0.0;
    }
    // every summand is positive; accumulate in log space around the max
    let mut ln_terms = Vec::with_capacity((u_hi - u_lo + 1) as usize);
    for u in u_lo..=u_hi {
        let a = 2 * (u + h) + delta;
        let b = s - n + u;
        if tau - u > b {
            continue;
        }
        ln_terms.push(
            ln_binomial(a as usize, u as usize) + ln_binomial(b as usize, (tau - u) as usize)
                - ln_factorial((n - u) as usize)
                - ln_factorial((u - n + s) as usize),
        );
    }
    if ln_terms.is_empty() {
        return 0.0;
    }
    let peak = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = ln_terms.iter().map(|t| (t - peak).exp()).sum();
    let ln_pre = ln_factorial(t as usize)
        + 0.5 * (ln_factorial(n as usize) + ln_factorial((n + l) as usize))
        - ln_factorial(pre_den as usize);
    let magnitude = (ln_pre + peak).exp() * sum;
    if (s + h + t + n + delta) % 2 == 0 {
        magnitude
    } else {
        -magnitude
    }
}

/// `H^s_l(t, n)` with the radial weight `sqrt(n!(n+l)!)` stripped, so
/// the value is exactly rational: `h_coeff = sqrt(n!(n+l)!) * this`.
/// Independent exact route used to validate the float evaluation and
/// the inverse systems.
pub fn h_coeff_reduced_exact(s: u32, l: u32, t: u32, n: u32) -> Exact {
    let (si, li, ti, ni) = (s as i64, l as i64, t as i64, n as i64);
    let h = li / 2;
    let delta = li % 2;
    let tau = ti - h - delta;
    if tau < 0 {
        return Exact::zero();
    }
    let pre_den = h + ti + ni - si;
    if pre_den < 0 {
        return Exact::zero();
    }
    let u_lo = 0.max(ni - si);
    let u_hi = ni.min(tau);
    let mut sum = Exact::zero();
    for u in u_lo..=u_hi {
        let a = 2 * (u + h) + delta;
        let b = si - ni + u;
        if tau - u > b {
            continue;
        }
        let num = binomial(a as u64, u as u64) * binomial(b as u64, (tau - u) as u64);
        let den = factorial((ni - u) as u64) * factorial((u - ni + si) as u64);
        sum += Exact::new(num, den);
    }
    let pre = Exact::new(factorial(t as u64), factorial(pre_den as u64));
    let signed = pre * sum;
    if (si + h + ti + ni + delta) % 2 == 0 {
        signed
    } else {
        -signed
    }
}

/// Upper-triangular moment system `A^{s,l}` on a finite window:
/// `A_{pn} = H^s_l(p + s + ceil(l/2), n)`, zero for `n < p` and for
/// `n > 2s + p`.
#[derive(Debug, Clone)]
pub struct CoefficientMatrix {
    pub s: u32,
    pub l: u32,
    rows: Vec<Vec<f64>>,
}

impl CoefficientMatrix {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, p: usize, n: usize) -> f64 {
        self.rows[p][n]
    }

    /// View as a triangular operator (band `2s`) for inversion.
    pub fn operator(&self) -> TriangularOperator<f64> {
        TriangularOperator::from_window(0, self.rows.clone())
    }
}

type MatrixCache = Mutex<HashMap<(u32, u32, usize), Arc<CoefficientMatrix>>>;

fn matrix_cache() -> &'static MatrixCache {
    static CACHE: OnceLock<MatrixCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Builds (and memoizes) the moment system for one `(s, l)` window,
/// checking the two structural requirements: strict upper
/// triangularity and a nonzero diagonal.
pub fn build_coefficient_matrix(s: u32, l: u32, size: usize) -> Result<Arc<CoefficientMatrix>> {
    if size == 0 {
        return Err(Error::Contract("coefficient window must be nonempty".into()));
    }
    let key = (s, l, size);
    if let Some(hit) = matrix_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let hc = l.div_ceil(2);
    let mut rows = Vec::with_capacity(size);
    for p in 0..size {
        let t = p as u32 + s + hc;
        let mut row = Vec::with_capacity(size);
        for n in 0..size {
            row.push(h_coeff(s, l, t, n as u32));
        }
        for (n, v) in row.iter().enumerate().take(p) {
            if *v != 0.0 {
                return Err(Error::Inconsistency(format!(
                    "moment system (s={s}, l={l}) has sub-diagonal entry at ({p}, {n})"
                )));
            }
        }
        if row[p].abs() <= SINGULAR_EPS {
            return Err(Error::SingularSystem { s, l, row: p });
        }
        rows.push(row);
    }
    let built = Arc::new(CoefficientMatrix { s, l, rows });
    matrix_cache()
        .lock()
        .unwrap()
        .entry(key)
        .or_insert_with(|| built.clone());
    Ok(built)
}

/// Rows of the inverse system `B = A^{-1}` on the window:
/// `rows[n][p - n] = B_{np}` for `p = n..band_len`.
fn inverse_rows(s: u32, l: u32, band_len: usize) -> Result<Vec<Vec<f64>>> {
    let a = build_coefficient_matrix(s, l, band_len)?;
    let inv = a.operator().inverse();
    let mut rows = Vec::with_capacity(band_len);
    for n in 0..band_len {
        let mut row = Vec::with_capacity(band_len - n);
        for p in n..band_len {
            row.push(inv.try_element(n, p)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Origin derivative moments of one auxiliary function. Entry `p`
/// holds the derivative of order `t = s + ceil(l/2) + p`, the order
/// that feeds row `p` of the moment system.
#[derive(Debug, Clone)]
pub struct MomentVector {
    pub s: u32,
    pub l: u32,
    entries: Vec<C64>,
    covariance: Option<DMatrix<f64>>,
}

impl MomentVector {
    pub fn new(
        s: u32,
        l: u32,
        entries: Vec<C64>,
        covariance: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if entries
            .iter()
            .any(|e| !e.re.is_finite() || !e.im.is_finite())
        {
            return Err(Error::Validation("non-finite moment entry".into()));
        }
        if let Some(c) = &covariance {
            if c.nrows() != entries.len() || c.ncols() != entries.len() {
                return Err(Error::Validation("moment covariance shape mismatch".into()));
            }
        }
        Ok(MomentVector {
            s,
            l,
            entries,
            covariance,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn entry(&self, p: usize) -> C64 {
        self.entries[p]
    }

    /// Derivative order behind entry `p`.
    pub fn derivative_order(&self, p: usize) -> u32 {
        self.s + self.l.div_ceil(2) + p as u32
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.covariance.as_ref()
    }
}

/// Derivative moments from a radial profile: fit the auxiliary
/// function as the exact polynomial it is for a `dim`-dimensional
/// state, then scale coefficients to derivative values.
pub fn moments_from_profile(p: &RadialProfile, dim: usize) -> Result<MomentVector> {
    let l = p.l as usize;
    let s = p.s;
    if l >= dim {
        return Err(Error::Contract(format!(
            "band {l} does not exist in dimension {dim}"
        )));
    }
    let h = l / 2;
    let delta = l % 2;
    let band_len = dim - l;
    let degree = dim - 1 + s as usize - h;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lifted_err = Vec::new();
    let mut in_window = 0usize;
    for (i, r) in p.radii().iter().enumerate() {
        if delta == 1 && *r == 0.0 {
            // the odd auxiliary vanishes identically at the origin
            continue;
        }
        let x = r * r;
        let lift = if delta == 1 {
            x.sqrt() * x.exp()
        } else {
            x.exp()
        };
        if *r > 0.0 && *r < 1.5 {
            in_window += 1;
        }
        xs.push(x);
        ys.push(p.values()[i] * lift);
        lifted_err.push(p.stderr().map(|se| se[i] * lift));
    }
    let sampled = p.kind == ProfileKind::Sampled;
    if sampled && in_window < 2 * (dim + s as usize) {
        return Err(Error::Estimation(format!(
            "profile (s={s}, l={l}) has {in_window} radii in (0, 1.5); the moment fit needs {}",
            2 * (dim + s as usize)
        )));
    }
    if xs.len() < degree + 1 {
        return Err(Error::Estimation(format!(
            "profile (s={s}, l={l}) has {} usable radii; the moment fit needs {}",
            xs.len(),
            degree + 1
        )));
    }
    let scale = ys.iter().fold(0.0_f64, |m, y| m.max(y.norm()));
    let floor = (SIGMA_FLOOR_REL * scale).max(f64::MIN_POSITIVE);
    // weight by the lift so every row carries comparable relative
    // error; measured profiles fold in their bin errors
    let sigmas: Vec<f64> = xs
        .iter()
        .zip(&lifted_err)
        .map(|(x, e)| {
            let lift = if delta == 1 {
                x.sqrt() * x.exp()
            } else {
                x.exp()
            };
            match e {
                Some(err) if sampled => err.max(floor),
                _ => lift.max(floor),
            }
        })
        .collect();
    let fit = fit_polynomial(&xs, &ys, Some(&sigmas), degree)?;
    if sampled && fit.residual_rms() > RESIDUAL_BUDGET {
        return Err(Error::IllConditionedFit {
            context: format!("moment fit for (s={s}, l={l})"),
            residual: fit.residual_rms(),
            budget: RESIDUAL_BUDGET,
        });
    }
    let hc = h + delta;
    let mut entries = Vec::with_capacity(band_len);
    for p_idx in 0..band_len {
        let t = s as usize + hc + p_idx;
        let t_fact = ln_factorial(t).exp();
        entries.push(fit.coefficient(t) * t_fact);
    }
    let covariance = if sampled && p.stderr().is_some() {
        let mut cov = DMatrix::zeros(band_len, band_len);
        for i in 0..band_len {
            for j in 0..band_len {
                let ti = s as usize + hc + i;
                let tj = s as usize + hc + j;
                cov[(i, j)] = ln_factorial(ti).exp()
                    * ln_factorial(tj).exp()
                    * fit.covariance()[(ti, tj)];
            }
        }
        Some(cov)
    } else {
        None
    };
    MomentVector::new(s, p.l, entries, covariance)
}

/// Band recovery `rho_{n+l,n} = sum_{p >= n} B_{np} m_p` with `B` the
/// triangular inverse of the moment system.
pub fn reconstruct_band(s: u32, l: u32, m: &MomentVector, band_len: usize) -> Result<Vec<C64>> {
    if m.s != s || m.l != l {
        return Err(Error::Contract(format!(
            "moment vector describes (s={}, l={}), asked for (s={s}, l={l})",
            m.s, m.l
        )));
    }
    if m.len() < band_len {
        return Err(Error::Contract(format!(
            "moment vector has {} entries; band needs {band_len}",
            m.len()
        )));
    }
    let b = inverse_rows(s, l, band_len)?;
    let mut band = Vec::with_capacity(band_len);
    for n in 0..band_len {
        let mut acc = C64::zero();
        for p in n..band_len {
            acc += m.entry(p) * b[n][p - n];
        }
        band.push(acc);
    }
    Ok(band)
}

/// Full single-index reconstruction over all bands of one tomogram,
/// with Hermitian completion and validation.
pub fn reconstruct(
    s: u32,
    t: &Tomogram,
) -> Result<(DensityMatrix, super::ReconstructionReport)> {
    let dim = t.dim_hint;
    if dim == 0 {
        return Err(Error::Contract("tomogram dim_hint must be >= 1".into()));
    }
    let mut data = vec![C64::zero(); dim * dim];
    let mut diagonal_stderr = None;
    for l in 0..dim {
        let prof = t.require(s, l as u32)?;
        let m = moments_from_profile(prof, dim)?;
        let band = reconstruct_band(s, l as u32, &m, dim - l)?;
        if l == 0 {
            for (n, v) in band.iter().enumerate() {
                // diagonal of a Hermitian matrix is real
                data[n * dim + n] = C64::new(v.re, 0.0);
            }
            if let Some(cov) = m.covariance() {
                let b = inverse_rows(s, 0, dim)?;
                let mut errs = Vec::with_capacity(dim);
                for n in 0..dim {
                    let mut var = 0.0;
                    for p in n..dim {
                        for p2 in n..dim {
                            var += b[n][p - n] * b[n][p2 - n] * cov[(p, p2)];
                        }
                    }
                    errs.push(var.max(0.0).sqrt());
                }
                diagonal_stderr = Some(errs);
            }
        } else {
            for (n, v) in band.iter().enumerate() {
                data[(n + l) * dim + n] = *v;
                data[n * dim + n + l] = v.conj();
            }
        }
    }
    let rho = DensityMatrix::from_entries_unchecked(dim, data)?;
    let mut bands = Vec::with_capacity(dim);
    for l in 0..dim as u32 {
        let mut residual = 0.0_f64;
        if let Some(p) = t.get(s, l) {
            for (r, v) in p.radii().iter().zip(p.values()) {
                let model = forward::fourier_component_value(s, &rho, l, *r)?;
                residual = residual.max((model - v).norm());
            }
        }
        let mut tail = rho.band(l as usize);
        tail.extend(std::iter::repeat(C64::zero()).take(dim));
        bands.push(super::BandDiagnostics {
            l,
            residual,
            condition_pass: super::tomogram::condition_check(&tail, l).passes,
        });
    }
    let report = super::ReconstructionReport {
        dim,
        bands,
        validation: rho.validate(),
        diagonal_stderr,
    };
    Ok((rho, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::analytic_tomogram;
    use crate::triinv::window_product;
    use approx::assert_relative_eq;
    use num_traits::One;

    #[test]
    fn lemma4_vanishes_below_q() {
        for (p, q, s) in [(0u32, 3u32, 2u32), (4, 5, 1), (2, 2, 1)] {
            for x in [0.0, 0.7, -1.3, 4.0] {
                assert_eq!(lemma4_derivative(p, q, s, x), 0.0, "p={p} q={q} s={s}");
            }
        }
    }

    #[test]
    fn lemma4_exponential_series() {
        // p = q = 0 reduces to the Taylor coefficients of e^{lambda x}
        for x in [0.3, 1.0, 2.7] {
            assert_relative_eq!(lemma4_derivative(0, 0, 2, x), x * x / 2.0, epsilon = 1e-13);
            assert_relative_eq!(lemma4_derivative(0, 0, 3, x), x.powi(3) / 6.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn lemma4_origin_reduces_to_signed_binomial() {
        for p in 0..5u32 {
            for q in 0..4u32 {
                for s in q..(p + q + 1).min(8) {
                    let got = lemma4_derivative(p, q, s, 0.0);
                    let sign = if (s + q) % 2 == 0 { 1.0 } else { -1.0 };
                    let expect =
                        sign * ln_binomial(p as usize, (s - q) as usize).exp();
                    assert_relative_eq!(got, expect, epsilon = 1e-12);
                }
            }
        }
    }

    /// The defining route for `H^s_l(t, n)`: expand the index-mixture
    /// kernel term by term and take the geometric-family derivative of
    /// each `(1-lambda)^{2u+l} lambda^{n-u} e^{lambda x}` factor.
    fn h_brute(s: u32, l: u32, t: u32, n: u32) -> f64 {
        let h = l / 2;
        let delta = l % 2;
        let mut acc = 0.0;
        for u in 0..=n {
            let offset = u + h + delta;
            if offset > t {
                continue;
            }
            let j = t - offset;
            let c = lemma4_x_coefficient(2 * u + l, n - u, s, j);
            if c != 0.0 {
                acc += c
                    * (-ln_factorial((n - u) as usize)
                        - ln_factorial((l + u) as usize)
                        - ln_factorial(u as usize))
                    .exp();
            }
        }
        (ln_factorial(t as usize)
            + 0.5 * (ln_factorial(n as usize) + ln_factorial((n + l) as usize)))
        .exp()
            * acc
    }

    #[test]
    fn h_coeff_matches_derivative_route() {
        for s in 0..4u32 {
            for l in 0..4u32 {
                for t in 0..9u32 {
                    for n in 0..9u32 {
                        let closed = h_coeff(s, l, t, n);
                        let brute = h_brute(s, l, t, n);
                        let scale = closed.abs().max(brute.abs()).max(1.0);
                        assert!(
                            (closed - brute).abs() <= 1e-10 * scale,
                            "s={s} l={l} t={t} n={n}: {closed} vs {brute}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn h_coeff_zero_regions() {
        for s in 0..4u32 {
            for l in 0..4u32 {
                let h = l / 2;
                for t in 0..9u32 {
                    for n in 0..9u32 {
                        // stated regions: tau < 0, tau < n-s, n < tau-s
                        let tau = t as i64 - h as i64 - (l % 2) as i64;
                        let zero = tau < 0
                            || tau < n as i64 - s as i64
                            || (n as i64) < tau - s as i64;
                        if zero {
                            assert_eq!(h_coeff(s, l, t, n), 0.0, "s={s} l={l} t={t} n={n}");
                            assert_eq!(h_brute(s, l, t, n), 0.0, "brute s={s} l={l} t={t} n={n}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn h_coeff_float_matches_exact_reduction() {
        for s in 0..3u32 {
            for l in 0..5u32 {
                for t in 0..8u32 {
                    for n in 0..7u32 {
                        let exact = h_coeff_reduced_exact(s, l, t, n);
                        let weight = (0.5
                            * (ln_factorial(n as usize) + ln_factorial((n + l) as usize)))
                        .exp();
                        let via_exact = rational_to_f64(&exact) * weight;
                        let direct = h_coeff(s, l, t, n);
                        let scale = direct.abs().max(via_exact.abs()).max(1.0);
                        assert!(
                            (direct - via_exact).abs() <= 1e-11 * scale,
                            "s={s} l={l} t={t} n={n}"
                        );
                    }
                }
            }
        }
    }

    fn rational_to_f64(x: &Exact) -> f64 {
        use num_traits::ToPrimitive;
        x.to_f64().unwrap()
    }

    #[test]
    fn example_matrix_entries() {
        for p in 0..6u32 {
            assert_relative_eq!(h_coeff(1, 0, p + 1, p), (p + 1) as f64, epsilon = 1e-12);
            assert_relative_eq!(
                h_coeff(1, 0, p + 1, p + 1),
                -(2.0 * p as f64 + 2.0),
                epsilon = 1e-12
            );
            assert_relative_eq!(h_coeff(1, 0, p + 1, p + 2), (p + 2) as f64, epsilon = 1e-12);
            assert_eq!(h_coeff(1, 0, p + 1, p + 3), 0.0);
            if p >= 1 {
                assert_eq!(h_coeff(1, 0, p + 1, p - 1), 0.0);
            }
        }
    }

    #[test]
    fn coefficient_matrix_band_vanishes_beyond_2s() {
        for s in 0..3u32 {
            for l in 0..4u32 {
                let hc = l.div_ceil(2);
                for p in 0..5u32 {
                    for n in (2 * s + p + 1)..(2 * s + p + 4) {
                        assert_eq!(
                            h_coeff(s, l, p + s + hc, n),
                            0.0,
                            "s={s} l={l} p={p} n={n}"
                        );
                    }
                }
            }
        }
    }

    /// Rational polynomial with coefficient `k` at `x^k`.
    #[derive(Clone, Debug, PartialEq)]
    struct Poly(Vec<Exact>);

    impl Poly {
        fn coeff(&self, k: usize) -> Exact {
            self.0.get(k).cloned().unwrap_or_else(Exact::zero)
        }

        fn mul(&self, other: &Poly) -> Poly {
            let mut out = vec![Exact::zero(); self.0.len() + other.0.len() - 1];
            for (i, a) in self.0.iter().enumerate() {
                for (j, b) in other.0.iter().enumerate() {
                    out[i + j] += a.clone() * b.clone();
                }
            }
            Poly(out)
        }

        fn shift(&self, k: usize) -> Poly {
            let mut out = vec![Exact::zero(); k];
            out.extend(self.0.iter().cloned());
            Poly(out)
        }

        fn scale(&self, c: &Exact) -> Poly {
            Poly(self.0.iter().map(|a| a.clone() * c.clone()).collect())
        }
    }

    fn laguerre_poly(alpha: u32, m: u32) -> Poly {
        let coeffs = (0..=m)
            .map(|u| {
                let c = Exact::new(
                    binomial((m + alpha) as u64, (m - u) as u64),
                    factorial(u as u64),
                );
                if u % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .collect();
        Poly(coeffs)
    }

    /// Rational part of the auxiliary-basis polynomial for band entry
    /// `n`: the auxiliary function equals
    /// `sum_n rho_{n+l,n} / sqrt(n!(n+l)!) * Phi_n(x)`.
    fn phi_poly(s: u32, l: u32, n: u32) -> Poly {
        let delta = l % 2;
        let a1 = (n as i64 - s as i64).unsigned_abs() as u32;
        let a2 = (n as i64 + l as i64 - s as i64).unsigned_abs() as u32;
        let m1 = n.min(s);
        let m2 = (n + l).min(s);
        let exp = ((a1 + a2 + delta) / 2) as usize;
        let sign_pow = s.saturating_sub(n) + s.saturating_sub(n + l);
        let scale = Exact::new(
            factorial(m1 as u64) * factorial(m2 as u64),
            factorial(s as u64),
        );
        let scale = if sign_pow % 2 == 0 { scale } else { -scale };
        laguerre_poly(a1, m1)
            .mul(&laguerre_poly(a2, m2))
            .shift(exp)
            .scale(&scale)
    }

    #[test]
    fn forward_identity_is_exact_in_rational_arithmetic() {
        // t! [x^t] Phi_n = n!(n+l)! Hred(t, n) for every order t: the
        // closed form and the basis expansion are the same polynomial
        for s in 0..3u32 {
            for l in 0..5u32 {
                for n in 0..5u32 {
                    let phi = phi_poly(s, l, n);
                    let weight = Exact::new(
                        factorial(n as u64) * factorial((n + l) as u64),
                        1.into(),
                    );
                    for t in 0..(phi.0.len() + 2) as u32 {
                        let lhs = phi.coeff(t as usize)
                            * Exact::new(factorial(t as u64), 1.into());
                        let rhs = weight.clone() * h_coeff_reduced_exact(s, l, t, n);
                        assert_eq!(lhs, rhs, "s={s} l={l} n={n} t={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn displayed_example_system_and_inverse() {
        let a = build_coefficient_matrix(1, 0, 6).unwrap();
        let expect: [[f64; 6]; 6] = [
            [1.0, -2.0, 2.0, 0.0, 0.0, 0.0],
            [0.0, 2.0, -4.0, 3.0, 0.0, 0.0],
            [0.0, 0.0, 3.0, -6.0, 4.0, 0.0],
            [0.0, 0.0, 0.0, 4.0, -8.0, 5.0],
            [0.0, 0.0, 0.0, 0.0, 5.0, -10.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 6.0],
        ];
        for p in 0..6 {
            for n in 0..6 {
                assert_relative_eq!(a.entry(p, n), expect[p][n], epsilon = 1e-12);
            }
        }

        // exact inverse against the published fractions
        let a_exact = TriangularOperator::new(move |p, n| {
            let v = expect.get(p).and_then(|r| r.get(n)).copied().unwrap_or(0.0);
            Exact::from_integer((v as i64).into())
        });
        let b = a_exact.inverse();
        let frac = |n: i64, d: i64| Exact::new(n.into(), d.into());
        let expect_b = [
            vec![frac(1, 1), frac(1, 1), frac(2, 3), frac(1, 4), frac(-2, 15), frac(-31, 72)],
            vec![frac(1, 2), frac(2, 3), frac(5, 8), frac(7, 15), frac(37, 144)],
            vec![frac(1, 3), frac(1, 2), frac(8, 15), frac(17, 36)],
            vec![frac(1, 4), frac(2, 5), frac(11, 24)],
            vec![frac(1, 5), frac(1, 3)],
            vec![frac(1, 6)],
        ];
        for (n, row) in expect_b.iter().enumerate() {
            for (k, want) in row.iter().enumerate() {
                let got = b.try_element(n, n + k).unwrap();
                assert_eq!(got, *want, "B[{n}][{}]", n + k);
            }
        }
    }

    #[test]
    fn reduced_system_inverts_exactly() {
        for s in 0..3u32 {
            for l in 0..4u32 {
                let hc = l.div_ceil(2);
                let size = 5usize;
                let a = TriangularOperator::banded(2 * s as usize, move |p, n| {
                    h_coeff_reduced_exact(s, l, p as u32 + s + hc, n as u32)
                });
                let b = a.inverse();
                let product = window_product(&a, &b, 0, size).unwrap();
                for (i, row) in product.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        let want = if i == j { Exact::one() } else { Exact::zero() };
                        assert_eq!(*v, want, "s={s} l={l} ({i}, {j})");
                    }
                }
            }
        }
    }

    #[test]
    fn singular_window_is_reported() {
        match build_coefficient_matrix(0, 0, 0) {
            Err(Error::Contract(_)) => {}
            other => panic!("expected contract error, got {other:?}"),
        }
    }

    #[test]
    fn three_level_mixture_moments_and_band() {
        let rho = DensityMatrix::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let t = analytic_tomogram(&rho, &[1]).unwrap();
        let prof = t.get(1, 0).unwrap();
        let m = moments_from_profile(prof, 3).unwrap();
        let expect = [0.3, -0.2, 0.6];
        for (p, want) in expect.iter().enumerate() {
            assert_relative_eq!(m.entry(p).re, *want, epsilon = 1e-10);
            assert!(m.entry(p).im.abs() < 1e-12);
            assert_eq!(m.derivative_order(p), p as u32 + 1);
        }
        let band = reconstruct_band(1, 0, &m, 3).unwrap();
        for (v, want) in band.iter().zip([0.5, 0.3, 0.2]) {
            assert_relative_eq!(v.re, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_profile_gives_zero_moments() {
        let radii: Vec<f64> = (1..40).map(|i| i as f64 * 0.1).collect();
        let values = vec![C64::zero(); radii.len()];
        let prof = RadialProfile::new(
            2,
            1,
            ProfileKind::Analytic,
            radii,
            values,
            None,
        )
        .unwrap();
        let m = moments_from_profile(&prof, 4).unwrap();
        assert!(m.entries().iter().all(|e| e.norm() < 1e-12));
        let band = reconstruct_band(2, 1, &m, 3).unwrap();
        assert!(band.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn round_trips_from_one_index() {
        let rho = DensityMatrix::random(3, 3, 90).unwrap();
        let t = analytic_tomogram(&rho, &[0]).unwrap();
        let (rec, report) = reconstruct(0, &t).unwrap();
        assert!(
            rec.max_abs_diff(&rho) < 1e-9,
            "error {}",
            rec.max_abs_diff(&rho)
        );
        assert!(report.validation.passes);

        let rho4 = DensityMatrix::random(4, 2, 91).unwrap();
        let t = analytic_tomogram(&rho4, &[2]).unwrap();
        let (rec, _) = reconstruct(2, &t).unwrap();
        assert!(
            rec.max_abs_diff(&rho4) < 1e-9,
            "error {}",
            rec.max_abs_diff(&rho4)
        );
    }

    #[test]
    fn one_dimensional_state() {
        let rho = DensityMatrix::diagonal(&[1.0]).unwrap();
        let t = analytic_tomogram(&rho, &[0]).unwrap();
        let (rec, _) = reconstruct(0, &t).unwrap();
        assert_relative_eq!(rec.entry(0, 0).re, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn example_reconstruction_from_probe_one() {
        let rho = DensityMatrix::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let t = analytic_tomogram(&rho, &[1]).unwrap();
        let (rec, report) = reconstruct(1, &t).unwrap();
        assert!(rec.max_abs_diff(&rho) < 1e-9);
        assert!(report.diagonal_stderr.is_none());
    }
}
