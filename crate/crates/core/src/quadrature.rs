//! Quadrature over the phase-space disk.
//!
//! Radial integrals are done in the squared-radius variable
//! `x = r^2` (where the integrands are smooth and `d^2 z = dx dtheta / 2`)
//! with composite Gauss-Legendre panels; the angular direction uses the
//! trapezoid rule, which is exact for trigonometric polynomials of
//! degree below the node count.

use crate::error::{Error, Result};
use crate::special::PhasePoint;
use crate::C64;
use num_traits::Zero;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th root from the right
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * x * p - k as f64 * p_prev) / (k + 1) as f64;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Composite Gauss-Legendre rule for `int_0^{x_max} f(x) dx`:
/// `(node, weight)` pairs over `panels` equal panels.
pub fn radial_rule(x_max: f64, panels: usize, points_per_panel: usize) -> Result<Vec<(f64, f64)>> {
    if !(x_max > 0.0) || panels == 0 || points_per_panel == 0 {
        return Err(Error::Domain(
            "radial rule needs x_max > 0 and nonzero panel counts".into(),
        ));
    }
    let (nodes, weights) = gauss_legendre(points_per_panel);
    let width = x_max / panels as f64;
    let mut rule = Vec::with_capacity(panels * points_per_panel);
    for p in 0..panels {
        let left = p as f64 * width;
        for (t, w) in nodes.iter().zip(&weights) {
            rule.push((left + width * (t + 1.0) / 2.0, w * width / 2.0));
        }
    }
    Ok(rule)
}

/// Product rule on the disk `r <= sqrt(x_max)` for integrals weighted
/// by `d^2 z / pi`.
#[derive(Debug, Clone)]
pub struct DiskRule {
    radial: Vec<(f64, f64)>,
    theta_count: usize,
}

impl DiskRule {
    pub fn new(
        x_max: f64,
        panels: usize,
        points_per_panel: usize,
        theta_count: usize,
    ) -> Result<Self> {
        if theta_count == 0 {
            return Err(Error::Domain("need at least one angular node".into()));
        }
        Ok(DiskRule {
            radial: radial_rule(x_max, panels, points_per_panel)?,
            theta_count,
        })
    }

    pub fn node_count(&self) -> usize {
        self.radial.len() * self.theta_count
    }

    /// `(1/pi) int int f(r, theta) r dr dtheta` over the disk.
    pub fn integrate(&self, mut f: impl FnMut(PhasePoint) -> C64) -> C64 {
        let mut acc = C64::zero();
        for (x, wx) in &self.radial {
            let r = x.sqrt();
            let mut ring = C64::zero();
            for j in 0..self.theta_count {
                let theta = 2.0 * PI * j as f64 / self.theta_count as f64;
                ring += f(PhasePoint::new(r, theta).expect("valid node"));
            }
            // d^2 z / pi = dx dtheta / (2 pi); trapezoid supplies 2 pi / M
            acc += ring * C64::new(wx / self.theta_count as f64, 0.0);
        }
        acc
    }

    /// Radial-only integral `int_0^{x_max} g(x) dx`.
    pub fn integrate_radial(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.radial.iter().map(|(x, w)| w * g(*x)).sum()
    }
}
