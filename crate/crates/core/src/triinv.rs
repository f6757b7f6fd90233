//! Formal inversion of infinite upper-triangular operators.
//!
//! An upper-triangular operator with invertible diagonal has a unique
//! upper-triangular two-sided inverse, and every entry of the inverse is
//! a finite expression in the entries of the original: `b_{m,m+l}` only
//! involves the window `[m, m+l]`. The engine computes inverse entries
//! on demand by bounded-window back-substitution and memoizes whole
//! columns; the closed series form
//! `b_{m,m+l} = (1/a_{m+l,m+l}) sum_{k=0}^{l} [(I - U A)^k]_{m,m+l}`
//! is kept alongside as an independent route and the two are asserted
//! equal in exact arithmetic.
//!
//! Banded Toeplitz operators get a dedicated representation: the inverse
//! is again Toeplitz and its entry sequence is the power-series
//! reciprocal of the band.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use num_traits::Zero;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

type ElementFn<T> = dyn Fn(usize, usize) -> Result<T> + Send + Sync;

/// Lazy infinite upper-triangular operator over a [`Scalar`].
///
/// Entries below the diagonal are structurally zero; a `band` of `w`
/// means entries with `n - m > w` are zero as well.
#[derive(Clone)]
pub struct TriangularOperator<T> {
    element: Arc<ElementFn<T>>,
    band: Option<usize>,
}

impl<T: Scalar> TriangularOperator<T> {
    /// Operator from an element closure; the closure is only consulted
    /// on or above the diagonal.
    pub fn new(f: impl Fn(usize, usize) -> T + Send + Sync + 'static) -> Self {
        TriangularOperator {
            element: Arc::new(move |m, n| Ok(f(m, n))),
            band: None,
        }
    }

    /// Operator whose entries vanish for `n - m > band`.
    pub fn banded(band: usize, f: impl Fn(usize, usize) -> T + Send + Sync + 'static) -> Self {
        TriangularOperator {
            element: Arc::new(move |m, n| Ok(f(m, n))),
            band: Some(band),
        }
    }

    /// Operator from an explicit window; entries outside the window are
    /// zero. `rows[i][j]` holds the entry at absolute position
    /// `(start + i, start + j)`.
    pub fn from_window(start: usize, rows: Vec<Vec<T>>) -> Self {
        let size = rows.len();
        let rows = Arc::new(rows);
        TriangularOperator {
            element: Arc::new(move |m, n| {
                if m < start || m >= start + size || n < start || n >= start + size {
                    return Ok(T::zero());
                }
                let row = &rows[m - start];
                Ok(row.get(n - start).cloned().unwrap_or_else(T::zero))
            }),
            band: Some(size.saturating_sub(1)),
        }
    }

    pub fn band(&self) -> Option<usize> {
        self.band
    }

    /// Entry `(m, n)`; zero below the diagonal and outside the band.
    pub fn try_element(&self, m: usize, n: usize) -> Result<T> {
        if n < m {
            return Ok(T::zero());
        }
        if let Some(w) = self.band {
            if n - m > w {
                return Ok(T::zero());
            }
        }
        (self.element)(m, n)
    }

    /// Entry `(m, n)`; panics if the operator carries a deferred error
    /// (singular diagonal or contract violation in an inverse).
    pub fn element(&self, m: usize, n: usize) -> T {
        self.try_element(m, n)
            .unwrap_or_else(|e| panic!("element ({m}, {n}) unavailable: {e}"))
    }

    /// Dense copy of the square window `[start, start + size)`.
    pub fn window(&self, start: usize, size: usize) -> Result<Vec<Vec<T>>> {
        let mut rows = Vec::with_capacity(size);
        for i in 0..size {
            let mut row = Vec::with_capacity(size);
            for j in 0..size {
                row.push(self.try_element(start + i, start + j)?);
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// Two-sided formal inverse for operators with invertible diagonal.
    ///
    /// Entries are produced on demand: the column `n` of the inverse is
    /// one bounded back-substitution over rows `0..=n`, memoized under a
    /// lock so concurrent queries share work. A zero or near-zero
    /// diagonal surfaces as [`Error::SingularDiagonal`] at query time.
    pub fn inverse(&self) -> TriangularOperator<T> {
        self.inverse_impl(false)
    }

    /// Formal inverse under the unit-diagonal contract.
    ///
    /// Queries return [`Error::Contract`] if any diagonal entry in the
    /// touched window differs from one.
    pub fn inverse_unit_diagonal(&self) -> TriangularOperator<T> {
        self.inverse_impl(true)
    }

    fn inverse_impl(&self, unit_diagonal: bool) -> TriangularOperator<T> {
        let source = self.clone();
        let cache: Mutex<HashMap<usize, Arc<Vec<T>>>> = Mutex::new(HashMap::new());
        TriangularOperator {
            element: Arc::new(move |m, n| {
                if n < m {
                    return Ok(T::zero());
                }
                if let Some(col) = cache.lock().unwrap().get(&n) {
                    return Ok(col[m].clone());
                }
                let col = Arc::new(solve_column(&source, n, unit_diagonal)?);
                let value = col[m].clone();
                cache.lock().unwrap().insert(n, col);
                Ok(value)
            }),
            band: None,
        }
    }
}

/// Diagonal entry check shared by both inverse contracts.
fn checked_diagonal<T: Scalar>(
    a: &TriangularOperator<T>,
    row: usize,
    unit_diagonal: bool,
) -> Result<T> {
    let d = a.try_element(row, row)?;
    if unit_diagonal {
        if (d.clone() - T::one()).invertible() {
            return Err(Error::Contract(format!(
                "unit-diagonal inverse requires a_{{{row},{row}}} = 1"
            )));
        }
        Ok(T::one())
    } else {
        if !d.invertible() {
            return Err(Error::SingularDiagonal { row });
        }
        Ok(d)
    }
}

/// Back-substitution for column `n` of the inverse: solves
/// `A x = e_n` on the window `[0, n]`; `x[m] = b_{m,n}`.
fn solve_column<T: Scalar>(
    a: &TriangularOperator<T>,
    n: usize,
    unit_diagonal: bool,
) -> Result<Vec<T>> {
    let mut x = vec![T::zero(); n + 1];
    let d = checked_diagonal(a, n, unit_diagonal)?;
    x[n] = T::one() / d;
    for j in (0..n).rev() {
        let hi = match a.band() {
            Some(w) => n.min(j + w),
            None => n,
        };
        let mut acc = T::zero();
        for k in j + 1..=hi {
            let a_jk = a.try_element(j, k)?;
            if !a_jk.is_zero() {
                acc = acc + a_jk * x[k].clone();
            }
        }
        let d = checked_diagonal(a, j, unit_diagonal)?;
        x[j] = -acc / d;
    }
    Ok(x)
}

/// Inverse entry by the closed series form
/// `(1/a_{nn}) sum_{k=0}^{n-m} [(I - U A)^k]_{m,n}` with
/// `U = diag(1/a_{jj})`; the sum is finite because `I - U A` is
/// strictly upper-triangular on the window.
///
/// Kept as an independent route; tests assert it agrees exactly with
/// the back-substitution inverse over rational scalars.
pub fn inverse_element_by_series<T: Scalar>(
    a: &TriangularOperator<T>,
    m: usize,
    n: usize,
) -> Result<T> {
    if n < m {
        return Ok(T::zero());
    }
    let w = n - m + 1;
    // M = I - U A on the window, strictly upper triangular
    let mut mat = vec![vec![T::zero(); w]; w];
    for i in 0..w {
        let d = checked_diagonal(a, m + i, false)?;
        for j in i..w {
            let a_ij = a.try_element(m + i, m + j)?;
            let scaled = a_ij / d.clone();
            mat[i][j] = if i == j {
                T::one() - scaled
            } else {
                -scaled
            };
        }
    }
    // total = sum of powers M^0 .. M^{w-1}
    let mut power = identity::<T>(w);
    let mut total = identity::<T>(w);
    for _ in 1..w {
        power = mat_mul(&power, &mat);
        mat_add_assign(&mut total, &power);
    }
    let d_n = a.try_element(n, n)?;
    Ok(total[0][w - 1].clone() / d_n)
}

fn identity<T: Scalar>(w: usize) -> Vec<Vec<T>> {
    let mut m = vec![vec![T::zero(); w]; w];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

fn mat_mul<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let w = a.len();
    let mut out = vec![vec![T::zero(); w]; w];
    for i in 0..w {
        for k in 0..w {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..w {
                if !b[k][j].is_zero() {
                    out[i][j] = out[i][j].clone() + a[i][k].clone() * b[k][j].clone();
                }
            }
        }
    }
    out
}

fn mat_add_assign<T: Scalar>(acc: &mut [Vec<T>], other: &[Vec<T>]) {
    for (ra, rb) in acc.iter_mut().zip(other) {
        for (ea, eb) in ra.iter_mut().zip(rb) {
            *ea = ea.clone() + eb.clone();
        }
    }
}

/// Product window `(A B)[start..start+size)^2` for upper-triangular
/// operators; the contraction index runs over the closed range `[m, n]`.
pub fn window_product<T: Scalar>(
    a: &TriangularOperator<T>,
    b: &TriangularOperator<T>,
    start: usize,
    size: usize,
) -> Result<Vec<Vec<T>>> {
    let mut rows = vec![vec![T::zero(); size]; size];
    for i in 0..size {
        for j in i..size {
            let (m, n) = (start + i, start + j);
            let mut acc = T::zero();
            for k in m..=n {
                let x = a.try_element(m, k)?;
                if x.is_zero() {
                    continue;
                }
                let y = b.try_element(k, n)?;
                if !y.is_zero() {
                    acc = acc + x * y;
                }
            }
            rows[i][j] = acc;
        }
    }
    Ok(rows)
}

/// Upper-triangular banded Toeplitz operator `A_{m,m+u} = a_u`,
/// `0 <= u <= L`, with `a_0` invertible and `L >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzBand<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> ToeplitzBand<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::Domain(
                "Toeplitz band needs coefficients a_0..a_L with L >= 1".into(),
            ));
        }
        if !coeffs[0].invertible() {
            return Err(Error::Domain("leading Toeplitz coefficient must be invertible".into()));
        }
        Ok(ToeplitzBand { coeffs })
    }

    /// Band order `L`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// View as a general triangular operator.
    pub fn operator(&self) -> TriangularOperator<T> {
        let coeffs = self.coeffs.clone();
        TriangularOperator::banded(self.order(), move |m, n| {
            coeffs.get(n - m).cloned().unwrap_or_else(T::zero)
        })
    }

    /// First `count` entries of the unique inverse sequence `b_u`:
    /// the power-series reciprocal of the band,
    /// `b_0 = 1/a_0`, `sum_j a_j b_{u-j} = 0` for `u >= 1`.
    pub fn inverse_sequence(&self, count: usize) -> Vec<T> {
        let mut b = Vec::with_capacity(count);
        if count == 0 {
            return b;
        }
        b.push(T::one() / self.coeffs[0].clone());
        for u in 1..count {
            let mut acc = T::zero();
            for j in 1..=u.min(self.order()) {
                let bj = &b[u - j];
                if !bj.is_zero() && !self.coeffs[j].is_zero() {
                    acc = acc + self.coeffs[j].clone() * bj.clone();
                }
            }
            b.push(-acc / self.coeffs[0].clone());
        }
        b
    }

    /// Recover `c` from `d = A c` given the leading entries of `d`:
    /// `c_j = sum_{s >= j} b_{s-j} d_s`, truncated at `d.len()`.
    ///
    /// Exact whenever `d_s = 0` for `s >= d.len()` (finite sequences).
    pub fn recover_sequence<S>(&self, d: &[S]) -> Vec<S>
    where
        S: Clone + Zero + std::ops::Add<Output = S> + std::ops::Mul<T, Output = S>,
    {
        let b = self.inverse_sequence(d.len());
        let mut c = Vec::with_capacity(d.len());
        for j in 0..d.len() {
            let mut acc = S::zero();
            for (s, ds) in d.iter().enumerate().skip(j) {
                if !ds.is_zero() {
                    acc = acc + ds.clone() * b[s - j].clone();
                }
            }
            c.push(acc);
        }
        c
    }

    /// Truncation remainder
    /// `R^n_k = sum_{n'=1}^{L} sum_{s=n'}^{L} b_{n'+k-s} a_s c_{n+k+n'}`
    /// where `c_tail[i] = c_{n+k+1+i}`; terms with a negative `b` index
    /// vanish. The `k`-truncated recovery overshoots by exactly this
    /// amount: `sum_{k'=0}^{k} b_{k'} d_{n+k'} = c_n + R^n_k`, so the
    /// recovery converges iff the remainder tends to zero.
    pub fn remainder_term<S>(&self, c_tail: &[S], k: usize) -> Result<S>
    where
        S: Clone + Zero + std::ops::Add<Output = S> + std::ops::Mul<T, Output = S>,
    {
        let ell = self.order();
        if c_tail.len() < ell {
            return Err(Error::Domain(format!(
                "remainder needs {ell} trailing c entries, got {}",
                c_tail.len()
            )));
        }
        let b = self.inverse_sequence(k + 1);
        let mut acc = S::zero();
        for np in 1..=ell {
            let c_val = &c_tail[np - 1];
            if c_val.is_zero() {
                continue;
            }
            for s in np..=ell {
                if np + k < s {
                    continue;
                }
                let idx = np + k - s;
                let w = self.coeffs[s].clone() * b[idx].clone();
                acc = acc + c_val.clone() * w;
            }
        }
        Ok(acc)
    }
}
