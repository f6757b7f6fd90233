//! Combinatorial and special-function kernels.
//!
//! Everything downstream reduces to binomial coefficients, factorial
//! ratios and associated Laguerre polynomials. Exact integer/rational
//! versions exist alongside the `f64` ones so the inversion identities
//! can be tested without rounding.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::C64;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::sync::OnceLock;

/// Phase-space point `z = r e^{i theta}` with `r >= 0`,
/// `theta` normalized into `[0, 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    r: f64,
    theta: f64,
}

impl PhasePoint {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Domain(format!("radius must be finite and >= 0, got {r}")));
        }
        if !theta.is_finite() {
            return Err(Error::Domain(format!("angle must be finite, got {theta}")));
        }
        let tau = 2.0 * std::f64::consts::PI;
        let mut t = theta.rem_euclid(tau);
        // rem_euclid can land exactly on tau after rounding
        if t >= tau {
            t = 0.0;
        }
        Ok(PhasePoint { r, theta: t })
    }

    pub fn from_complex(z: C64) -> Self {
        PhasePoint::new(z.norm(), z.arg()).expect("norm and arg are always in domain")
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn to_complex(self) -> C64 {
        C64::from_polar(self.r, self.theta)
    }
}

/// Exact binomial coefficient `C(n, k)`; zero for `k > n`.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for j in 0..k {
        num *= BigInt::from(n - j);
        den *= BigInt::from(j + 1);
    }
    num / den
}

/// Generalized binomial for integer arguments, including negative `n`:
/// `C(n, k) = (-1)^k C(k - n - 1, k)` for `n < 0`; zero for `k < 0`.
pub fn binomial_generalized(n: i64, k: i64) -> BigInt {
    if k < 0 {
        return BigInt::zero();
    }
    if n >= 0 {
        return binomial(n as u64, k as u64);
    }
    let v = binomial((k - n - 1) as u64, k as u64);
    if k % 2 == 0 {
        v
    } else {
        -v
    }
}

/// Exact factorial.
pub fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= BigInt::from(k);
    }
    acc
}

const LN_FACT_LEN: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_LEN];
        // Kahan accumulation keeps the absolute error near one ulp per term.
        let mut sum = 0.0_f64;
        let mut c = 0.0_f64;
        for k in 1..LN_FACT_LEN {
            let y = (k as f64).ln() - c;
            let s = sum + y;
            c = (s - sum) - y;
            sum = s;
            t[k] = sum;
        }
        t
    })
}

/// `ln(n!)` from a compensated table.
pub fn ln_factorial(n: usize) -> f64 {
    let table = ln_fact_table();
    if n < table.len() {
        return table[n];
    }
    // Stirling series fallback; unreachable for supported dimensions.
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv * inv * (1.0 / 360.0 - inv * inv / 1260.0))
}

/// `ln C(n, k)`; caller must ensure `k <= n`.
pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `sqrt(p!/q!)` without overflow for arguments up to at least 1000.
///
/// Small arguments use the exact integer ratio; larger ones go through
/// the log-factorial table.
pub fn sqrt_factorial_ratio(p: u64, q: u64) -> f64 {
    if p <= 20 && q <= 20 {
        let (num, den) = if p >= q { (p, q) } else { (q, p) };
        let mut ratio = 1.0_f64;
        for k in den + 1..=num {
            ratio *= k as f64;
        }
        let root = ratio.sqrt();
        return if p >= q { root } else { 1.0 / root };
    }
    (0.5 * (ln_factorial(p as usize) - ln_factorial(q as usize))).exp()
}

/// Associated Laguerre polynomial `L^alpha_s(x)` by the stable
/// three-term recurrence in the degree, generic over the scalar.
pub fn laguerre_recurrence<T: Scalar>(alpha: u32, s: u32, x: &T) -> T {
    if s == 0 {
        return T::one();
    }
    let a = alpha as i64;
    let mut prev = T::one();
    let mut cur = T::from_i64(1 + a) - x.clone();
    for k in 1..s as i64 {
        let next = ((T::from_i64(2 * k + 1 + a) - x.clone()) * cur.clone()
            - T::from_i64(k + a) * prev)
            / T::from_i64(k + 1);
        prev = cur;
        cur = next;
    }
    cur
}

/// `L^alpha_s(x)` for floats.
pub fn laguerre(alpha: u32, s: u32, x: f64) -> f64 {
    laguerre_recurrence(alpha, s, &x)
}

/// `L^alpha_s(x)` by the defining sum
/// `sum_u (-1)^u / u! * C(s + alpha, s - u) * x^u`, evaluated exactly.
pub fn laguerre_exact_sum(alpha: u32, s: u32, x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    let mut x_pow = BigRational::one();
    for u in 0..=s as u64 {
        let coeff = BigRational::new(
            binomial(s as u64 + alpha as u64, s as u64 - u),
            factorial(u),
        );
        let term = coeff * x_pow.clone();
        if u % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        x_pow *= x.clone();
    }
    acc
}

/// Matrix element `<m|D(z)|n>` of the displacement operator in the
/// number basis:
///
/// `(-1)^{max(0, n-m)} e^{i theta (m-n)} sqrt(min! / max!)
///  e^{-r^2/2} r^{|m-n|} L^{|m-n|}_{min}(r^2)`.
///
/// The factorial ratio is evaluated in log space so the element stays
/// finite for indices well past 500.
pub fn displacement_element(m: usize, n: usize, z: PhasePoint) -> C64 {
    let r = z.r();
    if r == 0.0 {
        return if m == n { C64::new(1.0, 0.0) } else { C64::zero() };
    }
    let (mi, ma) = (m.min(n), m.max(n));
    let d = (ma - mi) as u32;
    let x = r * r;
    let ln_mag = -0.5 * x
        + d as f64 * r.ln()
        + 0.5 * (ln_factorial(mi) - ln_factorial(ma));
    let mut value = ln_mag.exp() * laguerre(d, mi as u32, x);
    if n > m && (n - m) % 2 == 1 {
        value = -value;
    }
    let phase = z.theta() * (m as f64 - n as f64);
    C64::from_polar(1.0, phase) * value
}
