//! Radial-profile estimation from sampled phase-space points.
//!
//! Samples are drawn against the measure `r dr dtheta / pi`. Angular
//! averaging with the phase `e^{il theta}` isolates one band; binning
//! in `r` with the Jacobian weight `1/(r2^2 - r1^2)` makes each bin an
//! unbiased estimate of the bin average of `G_l`.

use crate::error::{Error, Result};
use crate::forward::SampleSet;
use crate::tomogram::{ProfileKind, RadialProfile, Tomogram};
use crate::C64;

/// Bin count giving single-digit-percent bin widths over the default
/// fit window while keeping hundreds of samples per bin at desk-scale
/// counts.
pub const DEFAULT_RADIAL_BINS: usize = 56;
/// Profiles are only needed where the origin fits look, comfortably
/// inside one phase-space unit.
pub const DEFAULT_R_FIT_MAX: f64 = 1.5;
pub const DEFAULT_MIN_COUNT_PER_BIN: usize = 10;

/// Knobs for the binned estimator.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EstimationConfig {
    pub radial_bins: usize,
    pub r_fit_max: f64,
    /// Explicit fit degree for downstream polynomial stages; `None`
    /// lets each stage use the exact model degree for the requested
    /// dimension.
    pub poly_degree: Option<usize>,
    pub min_count_per_bin: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            radial_bins: DEFAULT_RADIAL_BINS,
            r_fit_max: DEFAULT_R_FIT_MAX,
            poly_degree: None,
            min_count_per_bin: DEFAULT_MIN_COUNT_PER_BIN,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radial_bins < 4 {
            return Err(Error::Validation(format!(
                "radial_bins must be at least 4, got {}",
                self.radial_bins
            )));
        }
        if !self.r_fit_max.is_finite() || self.r_fit_max <= 0.0 {
            return Err(Error::Validation(format!(
                "r_fit_max must be positive and finite, got {}",
                self.r_fit_max
            )));
        }
        Ok(())
    }
}

/// One band from one sample set: equal-width bins on
/// `[0, r_fit_max]`, value `(1/count) sum_{i in bin} e^{il theta_i} /
/// (r2^2 - r1^2)` at the bin midpoint, standard error from the
/// variance of the same per-sample summand over all `count` samples.
/// Bins with fewer than `min_count_per_bin` points are dropped and
/// reported in the warning list.
pub fn estimate_profile(
    samples: &SampleSet,
    l: u32,
    cfg: &EstimationConfig,
) -> Result<(RadialProfile, Vec<String>)> {
    cfg.validate()?;
    let count = samples.points.len();
    if count < cfg.radial_bins * cfg.min_count_per_bin {
        return Err(Error::Estimation(format!(
            "{count} samples cannot fill {} bins at {} per bin",
            cfg.radial_bins, cfg.min_count_per_bin
        )));
    }
    let width = cfg.r_fit_max / cfg.radial_bins as f64;
    let mut sums = vec![C64::new(0.0, 0.0); cfg.radial_bins];
    let mut counts = vec![0usize; cfg.radial_bins];
    for p in &samples.points {
        let r = p.r();
        if r >= cfg.r_fit_max {
            continue;
        }
        let bin = ((r / width) as usize).min(cfg.radial_bins - 1);
        let phase = l as f64 * p.theta();
        sums[bin] += C64::new(phase.cos(), phase.sin());
        counts[bin] += 1;
    }
    let mut radii = Vec::with_capacity(cfg.radial_bins);
    let mut values = Vec::with_capacity(cfg.radial_bins);
    let mut stderr = Vec::with_capacity(cfg.radial_bins);
    let mut warnings = Vec::new();
    let mut dropped = Vec::new();
    for b in 0..cfg.radial_bins {
        if counts[b] < cfg.min_count_per_bin {
            dropped.push(b);
            continue;
        }
        let r1 = b as f64 * width;
        let r2 = (b + 1) as f64 * width;
        let dx = r2 * r2 - r1 * r1;
        let value = sums[b] / (count as f64 * dx);
        // per-sample summand Y has |Y|^2 = 1/dx^2 inside the bin and
        // 0 outside, so E|Y|^2 reduces to a counting fraction
        let second_moment = counts[b] as f64 / (count as f64 * dx * dx);
        let variance = (second_moment - value.norm_sqr()).max(0.0);
        radii.push(0.5 * (r1 + r2));
        values.push(value);
        stderr.push((variance / count as f64).sqrt());
    }
    if !dropped.is_empty() {
        warnings.push(format!(
            "s={} l={l}: dropped {} of {} bins below {} samples (indices {:?})",
            samples.s,
            dropped.len(),
            cfg.radial_bins,
            cfg.min_count_per_bin,
            dropped
        ));
    }
    if radii.is_empty() {
        return Err(Error::Estimation(format!(
            "s={} l={l}: no bin reached {} samples",
            samples.s, cfg.min_count_per_bin
        )));
    }
    let profile = RadialProfile::new(
        samples.s,
        l,
        ProfileKind::Sampled,
        radii,
        values,
        Some(stderr),
    )?;
    Ok((profile, warnings))
}

/// All bands `l = 0..dim_hint` for every sample set, collected into a
/// tomogram ready for reconstruction.
pub fn estimate_tomogram(
    sets: &[SampleSet],
    dim_hint: usize,
    cfg: &EstimationConfig,
) -> Result<(Tomogram, Vec<String>)> {
    if dim_hint == 0 {
        return Err(Error::Contract("dim_hint must be >= 1".into()));
    }
    let mut tomogram = Tomogram::new(dim_hint);
    let mut warnings = Vec::new();
    for set in sets {
        for l in 0..dim_hint as u32 {
            let (profile, mut w) = estimate_profile(set, l, cfg)?;
            warnings.append(&mut w);
            tomogram.insert(profile);
        }
    }
    Ok((tomogram, warnings))
}
