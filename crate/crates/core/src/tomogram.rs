//! Radial Fourier profiles of a displaced-count distribution.
//!
//! A tomogram stores, for a detection index `s`, the angular Fourier
//! components of the measured density on a radial grid: profile
//! `(s, l)` holds `G_l(r) = <e^{i l theta} G(r, theta)>_theta`. The
//! `l = 0` component is real; higher components are complex and carry
//! the coherences `rho_{n+l, n}`.

use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Imaginary part allowed on an `l = 0` profile value.
pub const REALNESS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Evaluated from a known matrix; no statistical error.
    Analytic,
    /// Estimated from samples; `stderr` should be present.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub s: u32,
    pub l: u32,
    pub kind: ProfileKind,
    radii: Vec<f64>,
    values: Vec<C64>,
    stderr: Option<Vec<f64>>,
}

impl RadialProfile {
    pub fn new(
        s: u32,
        l: u32,
        kind: ProfileKind,
        radii: Vec<f64>,
        values: Vec<C64>,
        stderr: Option<Vec<f64>>,
    ) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::Validation(format!(
                "profile (s={s}, l={l}): {} radii but {} values",
                radii.len(),
                values.len()
            )));
        }
        if let Some(e) = &stderr {
            if e.len() != radii.len() {
                return Err(Error::Validation("stderr length mismatch".into()));
            }
            if e.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Validation("stderr must be finite and nonnegative".into()));
            }
        }
        let mut prev = -1.0_f64;
        for r in &radii {
            if !r.is_finite() || *r < 0.0 {
                return Err(Error::Validation(format!("bad radius {r}")));
            }
            if *r <= prev {
                return Err(Error::Validation(
                    "radii must be strictly increasing".into(),
                ));
            }
            prev = *r;
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Validation("non-finite profile value".into()));
        }
        if l == 0 {
            if let Some(worst) = values
                .iter()
                .map(|v| v.im.abs())
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            {
                if worst > REALNESS_TOL {
                    return Err(Error::Validation(format!(
                        "l = 0 profile has imaginary part {worst:.3e}"
                    )));
                }
            }
        }
        Ok(RadialProfile {
            s,
            l,
            kind,
            radii,
            values,
            stderr,
        })
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }
}

/// Profiles keyed by `(s, l)`, with the dimension the producer had in
/// mind when laying out grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Tomogram {
    pub dim_hint: usize,
    profiles: BTreeMap<(u32, u32), RadialProfile>,
}

impl Tomogram {
    pub fn new(dim_hint: usize) -> Self {
        Tomogram {
            dim_hint,
            profiles: BTreeMap::new(),
        }
    }

    /// Insert, replacing any previous profile with the same `(s, l)`.
    pub fn insert(&mut self, profile: RadialProfile) {
        self.profiles.insert((profile.s, profile.l), profile);
    }

    pub fn get(&self, s: u32, l: u32) -> Option<&RadialProfile> {
        self.profiles.get(&(s, l))
    }

    /// Like [`Tomogram::get`] but with a coverage error naming the
    /// missing component.
    pub fn require(&self, s: u32, l: u32) -> Result<&RadialProfile> {
        self.get(s, l).ok_or(Error::Coverage { s, l })
    }

    pub fn profiles(&self) -> impl Iterator<Item = &RadialProfile> {
        self.profiles.values()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = TomogramFile::from(self);
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: TomogramFile = serde_json::from_str(&text)?;
        file.into_tomogram()
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileRecord {
    s: u32,
    l: u32,
    kind: ProfileKind,
    radii: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TomogramFile {
    dim_hint: usize,
    profiles: Vec<ProfileRecord>,
}

impl From<&Tomogram> for TomogramFile {
    fn from(t: &Tomogram) -> Self {
        TomogramFile {
            dim_hint: t.dim_hint,
            profiles: t
                .profiles()
                .map(|p| ProfileRecord {
                    s: p.s,
                    l: p.l,
                    kind: p.kind,
                    radii: p.radii.clone(),
                    re: p.values.iter().map(|v| v.re).collect(),
                    im: p.values.iter().map(|v| v.im).collect(),
                    stderr: p.stderr.clone(),
                })
                .collect(),
        }
    }
}

impl TomogramFile {
    fn into_tomogram(self) -> Result<Tomogram> {
        let mut t = Tomogram::new(self.dim_hint);
        for rec in self.profiles {
            if rec.re.len() != rec.im.len() {
                return Err(Error::Format(format!(
                    "profile (s={}, l={}): re/im length mismatch",
                    rec.s, rec.l
                )));
            }
            let values = rec
                .re
                .iter()
                .zip(&rec.im)
                .map(|(re, im)| C64::new(*re, *im))
                .collect();
            t.insert(RadialProfile::new(
                rec.s, rec.l, rec.kind, rec.radii, values, rec.stderr,
            )?);
        }
        Ok(t)
    }
}
