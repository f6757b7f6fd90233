//! Weighted least-squares polynomial fits.
//!
//! Fits are solved in a scaled monomial basis `u = x / x_scale` by QR
//! on the weighted design matrix; real and imaginary parts share the
//! design, so one factorization serves complex-valued data. The
//! coefficient covariance (in the original variable) is kept so
//! callers can propagate statistical errors through linear
//! post-processing.

use crate::error::{Error, Result};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use num_traits::Zero;

#[derive(Debug, Clone)]
pub struct PolyFit {
    degree: usize,
    /// Coefficients of x^k, ascending in k.
    coefficients: Vec<C64>,
    /// Covariance of the coefficients under the supplied stddevs.
    covariance: DMatrix<f64>,
    /// Weighted rms of the residuals (sqrt of reduced chi-square when
    /// stddevs were given).
    residual_rms: f64,
}

impl PolyFit {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn coefficient(&self, k: usize) -> C64 {
        self.coefficients.get(k).copied().unwrap_or_else(C64::zero)
    }

    /// Standard deviation of the k-th coefficient (per real/imaginary
    /// component).
    pub fn coefficient_stderr(&self, k: usize) -> f64 {
        self.covariance[(k, k)].max(0.0).sqrt()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn residual_rms(&self) -> f64 {
        self.residual_rms
    }

    pub fn eval(&self, x: f64) -> C64 {
        let mut acc = C64::zero();
        for c in self.coefficients.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }
}

/// Fit `sum_k c_k x^k` of the given degree to `(xs, ys)`.
///
/// `stddevs`, when present, weights each point by `1 / sigma^2` and
/// scales the covariance accordingly; otherwise unit weights are used
/// and the covariance assumes unit-variance noise.
pub fn fit_polynomial(
    xs: &[f64],
    ys: &[C64],
    stddevs: Option<&[f64]>,
    degree: usize,
) -> Result<PolyFit> {
    let count = xs.len();
    if ys.len() != count {
        return Err(Error::Domain(format!(
            "{count} abscissae but {} values",
            ys.len()
        )));
    }
    if count < degree + 1 {
        return Err(Error::IllConditionedFit {
            context: "underdetermined polynomial fit".into(),
            residual: f64::INFINITY,
            budget: 0.0,
        });
    }
    if let Some(s) = stddevs {
        if s.len() != count {
            return Err(Error::Domain("stddev length mismatch".into()));
        }
        if s.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Domain("stddevs must be positive".into()));
        }
    }
    if xs.iter().any(|x| !x.is_finite()) || ys.iter().any(|y| !y.re.is_finite() || !y.im.is_finite())
    {
        return Err(Error::Domain("non-finite data in fit".into()));
    }

    let x_scale = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
    let cols = degree + 1;
    let mut design = DMatrix::zeros(count, cols);
    let mut rhs_re = DVector::zeros(count);
    let mut rhs_im = DVector::zeros(count);
    for i in 0..count {
        let w = stddevs.map_or(1.0, |s| 1.0 / s[i]);
        let u = xs[i] / x_scale;
        let mut pow = 1.0;
        for k in 0..cols {
            design[(i, k)] = w * pow;
            pow *= u;
        }
        rhs_re[i] = w * ys[i].re;
        rhs_im[i] = w * ys[i].im;
    }

    let qr = design.qr();
    let r = qr.r();
    let mut diag_min = f64::INFINITY;
    let mut diag_max = 0.0_f64;
    for k in 0..cols {
        let d = r[(k, k)].abs();
        diag_min = diag_min.min(d);
        diag_max = diag_max.max(d);
    }
    if !(diag_min > diag_max * 1e-13) {
        return Err(Error::IllConditionedFit {
            context: format!("degree-{degree} design matrix is numerically singular"),
            residual: f64::INFINITY,
            budget: 0.0,
        });
    }
    let q_t = qr.q().transpose();
    let solve = |rhs: &DVector<f64>| {
        r.solve_upper_triangular(&(&q_t * rhs))
            .expect("diagonal checked above")
    };
    let sol_re = solve(&rhs_re);
    let sol_im = solve(&rhs_im);
    // (X^T X)^{-1} = R^{-1} R^{-T}, reusing the factorization
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .expect("diagonal checked above");
    let cov_scaled = &r_inv * r_inv.transpose();

    // undo the u = x / x_scale substitution
    let mut coefficients = Vec::with_capacity(cols);
    let mut covariance = DMatrix::zeros(cols, cols);
    for k in 0..cols {
        let shrink = x_scale.powi(k as i32);
        coefficients.push(C64::new(sol_re[k], sol_im[k]) / shrink);
        for j in 0..cols {
            covariance[(j, k)] = cov_scaled[(j, k)] / (shrink * x_scale.powi(j as i32));
        }
    }

    let fit = PolyFit {
        degree,
        coefficients,
        covariance,
        residual_rms: 0.0,
    };
    let mut chi2 = 0.0;
    for i in 0..count {
        let w = stddevs.map_or(1.0, |s| 1.0 / s[i]);
        chi2 += (fit.eval(xs[i]) - ys[i]).norm_sqr() * w * w;
    }
    let dof = (count - cols).max(1);
    Ok(PolyFit {
        residual_rms: (chi2 / dof as f64).sqrt(),
        ..fit
    })
}

/// Real-data convenience wrapper around [`fit_polynomial`].
pub fn fit_polynomial_real(
    xs: &[f64],
    ys: &[f64],
    stddevs: Option<&[f64]>,
    degree: usize,
) -> Result<PolyFit> {
    let complex: Vec<C64> = ys.iter().map(|y| C64::new(*y, 0.0)).collect();
    fit_polynomial(xs, &complex, stddevs, degree)
}
