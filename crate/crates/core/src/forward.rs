//! Forward model: the statistics a displaced-count measurement
//! produces for a known state.
//!
//! The outcome density at phase-space point `z` for observable index
//! `s` is `G(z) = <s| D(z)^dagger rho D(z) |s>`, evaluated as a
//! quadratic form in the displacement column `w_n = <n|D(z)|s>`. Its
//! angular Fourier components isolate single diagonals of `rho`. The
//! module also covers the lambda-smoothed family obtained by mixing
//! observable indices geometrically (detector efficiency `eta`
//! corresponds to `lambda = 1 - eta`), plus rejection sampling and the
//! disk quadrature used to audit normalization.

use crate::error::{Error, Result};
use crate::quadrature::DiskRule;
use crate::special::{displacement_element, ln_factorial, sqrt_factorial_ratio, PhasePoint};
use crate::states::DensityMatrix;
use crate::tomogram::{ProfileKind, RadialProfile, Tomogram};
use crate::C64;
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Imaginary part of a density evaluation above which the state is
/// declared inconsistent (post-check threshold 1e-10 is the soft
/// contract; 1e-8 the hard failure).
const DENSITY_IMAG_HARD: f64 = 1e-8;
/// Tail bound for the geometric index mixture.
const LAMBDA_TAIL: f64 = 1e-12;
/// Relative mass outside the sampling disk that triggers a warning.
pub const TRUNCATION_WARNING_LEVEL: f64 = 0.01;

/// Displacement column `w_n = <n|D(z)|s>` for `n < dim`.
pub fn displaced_weight(s: u32, dim: usize, z: PhasePoint) -> Vec<C64> {
    (0..dim)
        .map(|n| displacement_element(n, s as usize, z))
        .collect()
}

/// Radial coefficient `f^s_{nm}(r) = <n|D(r)|s> <m|D(r)|s>`, the
/// weight of `rho_{mn} e^{i theta (n-m)}` in the outcome density.
pub fn f_coeff(s: u32, n: usize, m: usize, r: f64) -> f64 {
    let z = PhasePoint::new(r, 0.0).expect("real axis point");
    displacement_element(n, s as usize, z).re * displacement_element(m, s as usize, z).re
}

/// Outcome density `G(z) = <s| D(z)^dagger rho D(z) |s>`.
pub fn density(s: u32, rho: &DensityMatrix, z: PhasePoint) -> Result<f64> {
    let w = displaced_weight(s, rho.dim(), z);
    quadratic_form(rho, &w)
}

fn quadratic_form(rho: &DensityMatrix, w: &[C64]) -> Result<f64> {
    let dim = rho.dim();
    let mut acc = C64::zero();
    for m in 0..dim {
        let mut row = C64::zero();
        for n in 0..dim {
            row += rho.entry(m, n) * w[n];
        }
        acc += w[m].conj() * row;
    }
    if acc.im.abs() > DENSITY_IMAG_HARD {
        return Err(Error::Inconsistency(format!(
            "density has imaginary part {:.3e}; matrix is far from Hermitian",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// Pointwise angular Fourier component
/// `G_l(r) = sum_n rho_{n+l,n} f^s_{n,n+l}(r)`, the coefficient of
/// `e^{-i l theta}` in the density.
pub fn fourier_component_value(s: u32, rho: &DensityMatrix, l: u32, r: f64) -> Result<C64> {
    let dim = rho.dim();
    let l = l as usize;
    if l >= dim {
        return Err(Error::Domain(format!(
            "component index {l} out of range for dimension {dim}"
        )));
    }
    if l == 0 {
        // diagonal of a Hermitian matrix is real; its validated
        // imaginary dust would otherwise leak into the profile
        let mut acc = 0.0;
        for n in 0..dim {
            acc += rho.entry(n, n).re * f_coeff(s, n, n, r);
        }
        return Ok(C64::new(acc, 0.0));
    }
    let mut acc = C64::zero();
    for n in 0..dim - l {
        acc += rho.entry(n + l, n) * f_coeff(s, n, n + l, r);
    }
    Ok(acc)
}

/// Analytic radial profile of the `l`-th Fourier component on the
/// given grid.
pub fn fourier_component(
    s: u32,
    rho: &DensityMatrix,
    l: u32,
    radii: &[f64],
) -> Result<RadialProfile> {
    let values = radii
        .iter()
        .map(|r| fourier_component_value(s, rho, l, *r))
        .collect::<Result<Vec<_>>>()?;
    RadialProfile::new(s, l, ProfileKind::Analytic, radii.to_vec(), values, None)
}

/// Radial grid for analytic profiles: square-root-spaced Chebyshev
/// clusters, one inside the unit disk for origin limits, one out to
/// `x = dim + s + 6` so high polynomial coefficients stay observable.
pub fn default_radii(dim: usize, s: u32) -> Vec<f64> {
    let inner = 2 * (dim + s as usize) + 6;
    let outer = 2 * (dim + s as usize) + 8;
    let x_max = (dim + s as usize) as f64 + 6.0;
    let mut xs = chebyshev_nodes(0.005, 0.95, inner);
    xs.extend(chebyshev_nodes(1.05, x_max, outer));
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.into_iter().map(f64::sqrt).collect()
}

fn chebyshev_nodes(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let t = ((2 * j + 1) as f64 * PI / (2 * count) as f64).cos();
            (a + b) / 2.0 + (b - a) / 2.0 * t
        })
        .collect()
}

/// Analytic tomogram: profiles `(s, l)` for every listed `s` and all
/// `l < dim`.
pub fn analytic_tomogram(rho: &DensityMatrix, s_list: &[u32]) -> Result<Tomogram> {
    let dim = rho.dim();
    let mut t = Tomogram::new(dim);
    for &s in s_list {
        let radii = default_radii(dim, s);
        for l in 0..dim as u32 {
            t.insert(fourier_component(s, rho, l, &radii)?);
        }
    }
    Ok(t)
}

/// Detector efficiency to mixture parameter: `lambda = 1 - eta`.
pub fn efficiency_to_lambda(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!(
            "efficiency must lie in (0, 1], got {eta}"
        )));
    }
    Ok(1.0 - eta)
}

/// Radial kernel `K^lambda_{n,n+l}(r)` of the lambda-smoothed family,
/// in the closed Laguerre form.
pub fn cahill_glauber_k(lambda: f64, n: usize, l: u32, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "mixture parameter must lie in [0, 1), got {lambda}"
        )));
    }
    Ok(cahill_glauber_k_complex(C64::new(lambda, 0.0), n, l, r).re)
}

/// Closed form at complex `lambda` (used for series-coefficient
/// extraction on a circle); `lambda = 0` is the removable limit
/// `f^0_{n,n+l}`.
fn cahill_glauber_k_complex(lambda: C64, n: usize, l: u32, r: f64) -> C64 {
    let x = r * r;
    let ratio = sqrt_factorial_ratio(n as u64, n as u64 + l as u64);
    if lambda.norm_sqr() == 0.0 {
        // lambda^n L^l_n(... / lambda) tends to x^n / n!
        let ln_mag = -x + (2 * n + l as usize) as f64 * r.max(f64::MIN_POSITIVE).ln()
            - ln_factorial(n);
        let value = if r == 0.0 {
            if 2 * n + l as usize == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            ln_mag.exp()
        };
        return C64::new(ratio * value, 0.0);
    }
    let one = C64::new(1.0, 0.0);
    let arg = (C64::new(2.0, 0.0) - lambda - one / lambda) * x;
    let laguerre = crate::special::laguerre_recurrence(l, n as u32, &arg);
    let rl = if l == 0 { 1.0 } else { r.powi(l as i32) };
    C64::new(ratio * rl, 0.0)
        * (one - lambda).powu(l + 1)
        * ((lambda - one) * x).exp()
        * lambda.powu(n as u32)
        * laguerre
}

/// Same kernel via the finite positive sum; kept as an independent
/// route the closed form is checked against.
pub fn cahill_glauber_k_series_form(lambda: f64, n: usize, l: u32, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "mixture parameter must lie in [0, 1), got {lambda}"
        )));
    }
    let x = r * r;
    let l = l as usize;
    // sqrt(n! (n+l)!) spread into the per-term denominators in log space
    let half = 0.5 * (ln_factorial(n) + ln_factorial(n + l));
    let mut acc = 0.0;
    for u in 0..=n {
        if lambda == 0.0 && u != n {
            continue;
        }
        let mut ln_term = half - ln_factorial(n - u) - ln_factorial(l + u) - ln_factorial(u)
            + (2 * u + l) as f64 * 0.5 * x.max(f64::MIN_POSITIVE).ln()
            + (2 * u + l + 1) as f64 * (1.0 - lambda).ln()
            - (1.0 - lambda) * x;
        if u < n {
            ln_term += (n - u) as f64 * lambda.ln();
        }
        if 2 * u + l == 0 || x > 0.0 {
            acc += ln_term.exp();
        }
    }
    Ok(acc)
}

/// Density of the lambda-smoothed observable,
/// `W^lambda(z) = (1 - lambda) sum_k lambda^k G^(k)(z)`, truncated
/// where the geometric tail drops below 1e-12.
pub fn w_lambda_density(lambda: f64, rho: &DensityMatrix, z: PhasePoint) -> Result<f64> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "mixture parameter must lie in [0, 1), got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return density(0, rho, z);
    }
    // smallest K* with lambda^(K*+1) <= tail; each |G| <= 1
    let k_star = (LAMBDA_TAIL.ln() / lambda.ln()).ceil() as usize;
    let mut acc = 0.0;
    let mut weight = 1.0 - lambda;
    for k in 0..=k_star {
        acc += weight * density(k as u32, rho, z)?;
        weight *= lambda;
    }
    Ok(acc)
}

/// Matrix element `<n| W^lambda(z) |m>` from the closed kernel form;
/// supports complex `lambda` inside the unit disk.
fn w_lambda_element(lambda: C64, n: usize, m: usize, z: PhasePoint) -> C64 {
    let (lo, l) = if m >= n { (n, m - n) } else { (m, n - m) };
    let radial = cahill_glauber_k_complex(lambda, lo, l as u32, z.r());
    // phase e^{i theta (n - m)} from the two displacement factors
    radial * C64::from_polar(1.0, z.theta() * (n as f64 - m as f64))
}

/// `tr[rho W^lambda(z)] / (1 - lambda)` at complex `lambda`: the
/// generating function whose Taylor coefficient at order `s` is the
/// index-`s` density.
fn lambda_generating_function(lambda: C64, rho: &DensityMatrix, z: PhasePoint) -> C64 {
    let dim = rho.dim();
    let mut acc = C64::zero();
    for m in 0..dim {
        for n in 0..dim {
            let e = rho.entry(m, n);
            if e.norm_sqr() > 0.0 {
                acc += e * w_lambda_element(lambda, n, m, z);
            }
        }
    }
    acc / (C64::new(1.0, 0.0) - lambda)
}

/// Taylor-coefficient extraction radius and node count for
/// [`lambda_derivative_value`].
const EXTRACTION_RADIUS: f64 = 0.5;
const EXTRACTION_NODES: usize = 64;

/// `(1/s!) d^s/dlambda^s [(1-lambda)^{-1} W^lambda(z)]` at
/// `lambda = 0`, extracted from values on a complex circle. Equals
/// `density(s, rho, z)` and is evaluated by an independent route.
pub fn lambda_derivative_value(s: u32, rho: &DensityMatrix, z: PhasePoint) -> Result<f64> {
    let tau = EXTRACTION_RADIUS;
    let m = EXTRACTION_NODES;
    let mut acc = C64::zero();
    for j in 0..m {
        let phi = 2.0 * PI * j as f64 / m as f64;
        let lambda = C64::from_polar(tau, phi);
        acc += lambda_generating_function(lambda, rho, z)
            * C64::from_polar(1.0, -(s as f64) * phi);
    }
    let coeff = acc / C64::new(m as f64 * tau.powi(s as i32), 0.0);
    if coeff.im.abs() > 1e-6 {
        return Err(Error::Inconsistency(format!(
            "series coefficient {s} has imaginary part {:.3e}",
            coeff.im
        )));
    }
    Ok(coeff.re)
}

/// Default sampling disk radius for a given dimension and index.
pub fn default_r_max(dim: usize, s: u32) -> f64 {
    4.0 + (dim as f64).sqrt() + (s as f64).sqrt()
}

/// Mass of the outcome density on the disk `r <= r_max`, by the
/// product quadrature rule (256 angular nodes).
pub fn observable_mass(s: u32, rho: &DensityMatrix, r_max: f64) -> Result<f64> {
    let x_max = r_max * r_max;
    let panels = ((x_max / 2.0).ceil() as usize).clamp(8, 64);
    let rule = DiskRule::new(x_max, panels, 16, 256)?;
    let mut bad = None;
    let mass = rule.integrate(|z| match density(s, rho, z) {
        Ok(v) => C64::new(v, 0.0),
        Err(e) => {
            bad = Some(e);
            C64::zero()
        }
    });
    match bad {
        Some(e) => Err(e),
        None => Ok(mass.re),
    }
}

/// Measurement outcomes drawn from one observable index.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub s: u32,
    pub points: Vec<PhasePoint>,
    pub seed: u64,
    pub r_max: f64,
    /// Probability mass outside the sampling disk, by quadrature.
    pub truncated_mass: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleSetMeta {
    s: u32,
    count: usize,
    seed: u64,
    r_max: f64,
    truncated_mass: f64,
}

impl SampleSet {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    /// True when enough mass lies outside the disk to bias estimates.
    pub fn truncation_warning(&self) -> bool {
        self.truncated_mass > TRUNCATION_WARNING_LEVEL
    }

    fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("meta.json")
    }

    /// Write outcomes as CSV (`r,theta` header) plus a metadata
    /// sidecar next to it. Byte-deterministic for equal inputs.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let mut out = String::with_capacity(16 * self.points.len() + 16);
        out.push_str("r,theta\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.r(), p.theta()));
        }
        std::fs::write(csv_path, out)?;
        let meta = SampleSetMeta {
            s: self.s,
            count: self.points.len(),
            seed: self.seed,
            r_max: self.r_max,
            truncated_mass: self.truncated_mass,
        };
        std::fs::write(
            Self::sidecar_path(csv_path),
            serde_json::to_string_pretty(&meta)?,
        )?;
        Ok(())
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        let meta_text = std::fs::read_to_string(Self::sidecar_path(csv_path))?;
        let meta: SampleSetMeta = serde_json::from_str(&meta_text)?;
        let text = std::fs::read_to_string(csv_path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some("r,theta") => {}
            other => {
                return Err(Error::Format(format!(
                    "expected 'r,theta' header, got {other:?}"
                )))
            }
        }
        let mut points = Vec::with_capacity(meta.count);
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (r_text, theta_text) = line.split_once(',').ok_or_else(|| {
                Error::Format(format!("row {}: expected two comma-separated fields", i + 1))
            })?;
            let r: f64 = r_text
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad radius {r_text:?}", i + 1)))?;
            let theta: f64 = theta_text
                .parse()
                .map_err(|_| Error::Format(format!("row {}: bad angle {theta_text:?}", i + 1)))?;
            let p = PhasePoint::new(r, theta)?;
            if p.r() > meta.r_max {
                return Err(Error::Validation(format!(
                    "row {}: radius {} exceeds declared r_max {}",
                    i + 1,
                    p.r(),
                    meta.r_max
                )));
            }
            points.push(p);
        }
        if points.len() != meta.count {
            return Err(Error::Format(format!(
                "sidecar declares {} outcomes, CSV holds {}",
                meta.count,
                points.len()
            )));
        }
        if !(0.0..1.0).contains(&meta.truncated_mass) {
            return Err(Error::Validation(format!(
                "truncated mass {} outside [0, 1)",
                meta.truncated_mass
            )));
        }
        Ok(SampleSet {
            s: meta.s,
            points,
            seed: meta.seed,
            r_max: meta.r_max,
            truncated_mass: meta.truncated_mass,
        })
    }
}

/// Draw `count` outcomes by rejection: propose uniformly in
/// `(r^2, theta)` on the disk, accept with probability `G(z)` (at most
/// one, since `G <= trace norm = 1`). Deterministic per seed.
pub fn sample(
    s: u32,
    rho: &DensityMatrix,
    count: usize,
    seed: u64,
    r_max: f64,
) -> Result<SampleSet> {
    if !(r_max > 0.0) {
        return Err(Error::Domain(format!("disk radius must be positive, got {r_max}")));
    }
    let inside = observable_mass(s, rho, r_max)?;
    let truncated_mass = (1.0 - inside).clamp(0.0, 1.0 - f64::EPSILON);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_max = r_max * r_max;
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let x: f64 = rng.random::<f64>() * x_max;
        let theta: f64 = rng.random::<f64>() * 2.0 * PI;
        let z = PhasePoint::new(x.sqrt(), theta)?;
        let g = density(s, rho, z)?;
        if rng.random::<f64>() < g {
            points.push(z);
        }
    }
    Ok(SampleSet {
        s,
        points,
        seed,
        r_max,
        truncated_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vacuum() -> DensityMatrix {
        DensityMatrix::pure(&[C64::new(1.0, 0.0)]).unwrap()
    }

    fn number_state(n: usize, dim: usize) -> DensityMatrix {
        let mut amps = vec![C64::zero(); dim];
        amps[n] = C64::new(1.0, 0.0);
        DensityMatrix::pure(&amps).unwrap()
    }

    #[test]
    fn f_coeff_closed_forms() {
        for r in [0.0, 0.4, 1.3, 2.2] {
            let x = r * r;
            assert_relative_eq!(f_coeff(0, 0, 0, r), (-x).exp(), max_relative = 1e-13);
            assert_relative_eq!(
                f_coeff(1, 0, 1, r),
                -(-x).exp() * r * (1.0 - x),
                epsilon = 1e-14
            );
        }
    }

    proptest! {
        #[test]
        fn f_coeff_is_symmetric(s in 0u32..4, n in 0usize..8, m in 0usize..8,
                                r in 0.0f64..3.0) {
            let a = f_coeff(s, n, m, r);
            let b = f_coeff(s, m, n, r);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn density_at_origin_is_diagonal_entry() {
        let rho = DensityMatrix::random(5, 3, 17).unwrap();
        let origin = PhasePoint::new(0.0, 0.3).unwrap();
        for s in 0..5u32 {
            let g = density(s, &rho, origin).unwrap();
            assert_relative_eq!(g, rho.entry(s as usize, s as usize).re, epsilon = 1e-12);
        }
        // indices beyond the truncation see zero
        assert!(density(7, &rho, origin).unwrap().abs() < 1e-12);
    }

    #[test]
    fn density_of_vacuum_observables() {
        let rho = vacuum();
        for r in [0.2, 1.0, 2.5] {
            let z = PhasePoint::new(r, 1.0).unwrap();
            let x = r * r;
            assert_relative_eq!(density(0, &rho, z).unwrap(), (-x).exp(), max_relative = 1e-12);
            assert_relative_eq!(
                density(1, &rho, z).unwrap(),
                x * (-x).exp(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn fourier_component_examples() {
        let diag = DensityMatrix::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let v = fourier_component_value(1, &diag, 0, 0.0).unwrap();
        assert_relative_eq!(v.re, 0.3, epsilon = 1e-14);

        let plus = DensityMatrix::pure(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        for r in [0.3, 0.9, 1.6] {
            let x = r * r;
            let v = fourier_component_value(1, &plus, 1, r).unwrap();
            assert_relative_eq!(v.re, -0.5 * (-x).exp() * r * (1.0 - x), epsilon = 1e-13);
            assert!(v.im.abs() < 1e-15);
        }

        // top component has a single summand
        let rho = DensityMatrix::random(4, 2, 31).unwrap();
        for r in [0.5, 1.2] {
            let v = fourier_component_value(2, &rho, 3, r).unwrap();
            let expect = rho.entry(3, 0) * f_coeff(2, 0, 3, r);
            assert!((v - expect).norm() < 1e-14);
        }

        assert!(fourier_component_value(0, &diag, 3, 1.0).is_err());
    }

    #[test]
    fn fourier_component_matches_angular_integral() {
        // independent route: trapezoid angular average of the density
        let rho = DensityMatrix::random(4, 4, 77).unwrap();
        let s = 1u32;
        let nodes = 64;
        for l in [0u32, 1, 3] {
            for r in [0.4, 1.1] {
                let mut acc = C64::zero();
                for j in 0..nodes {
                    let theta = 2.0 * PI * j as f64 / nodes as f64;
                    let z = PhasePoint::new(r, theta).unwrap();
                    let g = density(s, &rho, z).unwrap();
                    acc += C64::from_polar(1.0, l as f64 * theta) * g;
                }
                acc /= nodes as f64;
                let direct = fourier_component_value(s, &rho, l, r).unwrap();
                assert!(
                    (acc - direct).norm() < 1e-12,
                    "l={l}, r={r}: {acc} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn fourier_negative_index_is_conjugate() {
        // the -l component, computed from the lower band, conjugates
        let rho = DensityMatrix::random(4, 3, 99).unwrap();
        let s = 2u32;
        let l = 2usize;
        for r in [0.3, 1.4] {
            let upper = fourier_component_value(s, &rho, l as u32, r).unwrap();
            let mut lower = C64::zero();
            for n in 0..rho.dim() - l {
                lower += rho.entry(n, n + l) * f_coeff(s, n + l, n, r);
            }
            assert!((upper.conj() - lower).norm() < 1e-14);
        }
    }

    #[test]
    fn efficiency_mapping() {
        assert_eq!(efficiency_to_lambda(1.0).unwrap(), 0.0);
        assert_relative_eq!(efficiency_to_lambda(0.9).unwrap(), 0.1, epsilon = 1e-15);
        assert_relative_eq!(efficiency_to_lambda(0.75).unwrap(), 0.25, epsilon = 1e-15);
        assert!(efficiency_to_lambda(0.0).is_err());
        assert!(efficiency_to_lambda(1.2).is_err());
    }

    #[test]
    fn cahill_glauber_limits() {
        for (n, l, r) in [(0, 0, 0.7), (2, 1, 1.3), (3, 2, 0.5)] {
            let k0 = cahill_glauber_k(0.0, n, l, r).unwrap();
            assert_relative_eq!(k0, f_coeff(0, n, n + l as usize, r), max_relative = 1e-12);
        }
        for lambda in [0.0, 0.3, 0.8] {
            for r in [0.0, 0.9, 2.0] {
                let k = cahill_glauber_k(lambda, 0, 0, r).unwrap();
                let expect = (1.0 - lambda) * (-(1.0 - lambda) * r * r).exp();
                assert_relative_eq!(k, expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn cahill_glauber_two_forms_agree() {
        let k1 = cahill_glauber_k(0.3, 2, 1, 1.7).unwrap();
        let k2 = cahill_glauber_k_series_form(0.3, 2, 1, 1.7).unwrap();
        assert_relative_eq!(k1, k2, max_relative = 1e-12);
        for lambda in [0.0, 0.15, 0.5, 0.9] {
            for n in 0..5 {
                for l in 0..4u32 {
                    for r in [0.0, 0.3, 1.1, 2.6] {
                        let a = cahill_glauber_k(lambda, n, l, r).unwrap();
                        let b = cahill_glauber_k_series_form(lambda, n, l, r).unwrap();
                        assert!(
                            (a - b).abs() <= 1e-12 * a.abs().max(1e-3),
                            "lambda={lambda}, n={n}, l={l}, r={r}: {a} vs {b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn w_lambda_series_and_kernel_routes_agree() {
        let rho = DensityMatrix::random(3, 3, 5).unwrap();
        for lambda in [0.0, 0.2, 0.6] {
            for (r, theta) in [(0.0, 0.0), (0.8, 1.1), (1.7, 4.0)] {
                let z = PhasePoint::new(r, theta).unwrap();
                let series = w_lambda_density(lambda, &rho, z).unwrap();
                let kernel = (lambda_generating_function(C64::new(lambda, 0.0), &rho, z)
                    * C64::new(1.0 - lambda, 0.0))
                .re;
                assert!(
                    (series - kernel).abs() < 1e-10,
                    "lambda={lambda}, r={r}: {series} vs {kernel}"
                );
            }
        }
    }

    #[test]
    fn w_lambda_of_vacuum_at_origin() {
        let rho = vacuum();
        let z = PhasePoint::new(0.0, 0.0).unwrap();
        for lambda in [0.0, 0.25, 0.7] {
            let w = w_lambda_density(lambda, &rho, z).unwrap();
            assert_relative_eq!(w, 1.0 - lambda, epsilon = 1e-12);
        }
        assert!(w_lambda_density(1.0, &rho, z).is_err());
    }

    #[test]
    fn lambda_derivative_reproduces_density() {
        let rho = DensityMatrix::random(4, 2, 123).unwrap();
        for s in 0..4u32 {
            for (r, theta) in [(0.0, 0.0), (0.6, 2.0), (1.9, 5.5)] {
                let z = PhasePoint::new(r, theta).unwrap();
                let extracted = lambda_derivative_value(s, &rho, z).unwrap();
                let direct = density(s, &rho, z).unwrap();
                assert!(
                    (extracted - direct).abs() < 1e-10,
                    "s={s}, r={r}: {extracted} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn mass_of_vacuum_disk() {
        let got = observable_mass(0, &vacuum(), 3.0).unwrap();
        assert_relative_eq!(got, 1.0 - (-9.0_f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let rho = DensityMatrix::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let a = sample(0, &rho, 500, 42, 5.0).unwrap();
        let b = sample(0, &rho, 500, 42, 5.0).unwrap();
        assert_eq!(a, b);
        let c = sample(0, &rho, 500, 43, 5.0).unwrap();
        assert_ne!(a.points, c.points);
        assert!(a.points.iter().all(|p| p.r() <= 5.0));
        assert_eq!(a.count(), 500);

        let empty = sample(0, &rho, 0, 1, 5.0).unwrap();
        assert!(empty.points.is_empty());
    }

    #[test]
    fn vacuum_radii_squared_are_unit_exponential() {
        let count = 20_000;
        let set = sample(0, &vacuum(), count, 7, 6.0).unwrap();
        let mean_x: f64 = set.points.iter().map(|p| p.r() * p.r()).sum::<f64>() / count as f64;
        assert!(
            (mean_x - 1.0).abs() < 3.0 / (count as f64).sqrt(),
            "mean r^2 = {mean_x}"
        );
    }

    #[test]
    fn number_state_radii_squared_follow_gamma() {
        let n = 2;
        let count = 20_000;
        let set = sample(0, &number_state(n, 4), count, 11, 7.0).unwrap();
        let mean_x: f64 = set.points.iter().map(|p| p.r() * p.r()).sum::<f64>() / count as f64;
        let expect = (n + 1) as f64;
        let tol = 3.0 * expect.sqrt() / (count as f64).sqrt();
        assert!((mean_x - expect).abs() < tol, "mean r^2 = {mean_x}");
    }

    #[test]
    fn truncation_mass_and_warning() {
        let tight = sample(0, &vacuum(), 10, 3, 1.0).unwrap();
        assert_relative_eq!(tight.truncated_mass, (-1.0_f64).exp(), max_relative = 1e-6);
        assert!(tight.truncation_warning());

        let wide = sample(0, &vacuum(), 10, 3, 6.0).unwrap();
        assert!(wide.truncated_mass < 1e-9);
        assert!(!wide.truncation_warning());
    }

    #[test]
    fn sample_set_round_trips_and_is_byte_stable() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let set = sample(1, &rho, 200, 99, 5.5).unwrap();
        let dir = std::env::temp_dir().join("fockrec-forward-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path_a = dir.join("a.csv");
        let path_b = dir.join("b.csv");
        set.save(&path_a).unwrap();
        set.save(&path_b).unwrap();
        assert_eq!(
            std::fs::read(&path_a).unwrap(),
            std::fs::read(&path_b).unwrap()
        );
        let back = SampleSet::load(&path_a).unwrap();
        assert_eq!(set, back, "CSV round trip must preserve every outcome");
        for p in [path_a, path_b] {
            std::fs::remove_file(SampleSet::sidecar_path(&p)).ok();
            std::fs::remove_file(p).ok();
        }
    }

    #[test]
    fn default_radii_serve_both_fit_windows() {
        for dim in [2usize, 4, 6] {
            for s in [0u32, 2] {
                let radii = default_radii(dim, s);
                assert!(radii.windows(2).all(|w| w[0] < w[1]));
                let below_one = radii.iter().filter(|r| **r < 1.0).count();
                assert!(below_one >= dim + s as usize, "{below_one} nodes below 1");
                let in_fit_window = radii.iter().filter(|r| **r < 1.5).count();
                assert!(in_fit_window >= 2 * (dim + s as usize));
            }
        }
    }

    #[test]
    fn analytic_tomogram_covers_all_components() {
        let rho = DensityMatrix::random(3, 2, 8).unwrap();
        let t = analytic_tomogram(&rho, &[0, 1, 2]).unwrap();
        for s in 0..3u32 {
            for l in 0..3u32 {
                assert!(t.get(s, l).is_some(), "missing ({s}, {l})");
            }
        }
        assert_eq!(t.dim_hint, 3);
    }
}
