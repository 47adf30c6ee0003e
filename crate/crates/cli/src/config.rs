//! Run configuration, loaded from TOML.
//!
//! ```toml
//! [model]
//! n_sites = 256
//! n_particles = 15
//! hbar_eff = 1.0
//!
//! [schedule]
//! kick_strength = 4.0
//! anisotropy = 0.0
//!
//! [initial]
//! temperature = "0.55*fermi"   # or an absolute number
//!
//! [run]
//! kicks = 300
//! snapshots = [0, 100, 300]
//! bosonic = true               # or a list of snapshot times
//! output_dir = "out"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tonks_core::opdm::{BosonicMethod, BosonicOptions};
use tonks_core::Lattice;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub run: RunSection,
    #[serde(default)]
    pub fits: FitConfig,
    #[serde(default)]
    pub opdm: OpdmConfig,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_sites: usize,
    pub n_particles: usize,
    pub hbar_eff: f64,
    /// The box is fixed at `2π`; accepted only so that configs can state it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kick_strength: f64,
    #[serde(default)]
    pub anisotropy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub temperature: Temperature,
}

/// Absolute temperature or a multiple of the Fermi energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Temperature {
    Absolute(f64),
    Fermi(f64),
}

impl Default for Temperature {
    fn default() -> Self {
        Temperature::Absolute(0.0)
    }
}

impl Temperature {
    pub fn resolve(self, fermi_energy: f64) -> f64 {
        match self {
            Temperature::Absolute(t) => t,
            Temperature::Fermi(x) => x * fermi_energy,
        }
    }

    fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(factor) = text.strip_suffix("*fermi") {
            let x: f64 = factor.trim().parse().with_context(|| format!("bad temperature factor in {text:?}"))?;
            return Ok(Temperature::Fermi(x));
        }
        if text == "fermi" {
            return Ok(Temperature::Fermi(1.0));
        }
        Ok(Temperature::Absolute(text.parse().with_context(|| format!("bad temperature {text:?}"))?))
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Temperature::Absolute(t) => write!(f, "{t}"),
            Temperature::Fermi(x) => write!(f, "{x}*fermi"),
        }
    }
}

impl Serialize for Temperature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Temperature::Absolute(t) => s.serialize_f64(*t),
            Temperature::Fermi(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(t) => Ok(Temperature::Absolute(t)),
            Raw::Int(t) => Ok(Temperature::Absolute(t as f64)),
            Raw::Text(s) => Temperature::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub kicks: usize,
    #[serde(default)]
    pub snapshots: Vec<usize>,
    #[serde(default)]
    pub bosonic: BosonicToggle,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Thermal levels with smaller occupation are not evolved.
    #[serde(default = "default_orbital_cutoff")]
    pub orbital_cutoff: f64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_orbital_cutoff() -> f64 {
    1e-15
}

/// Which snapshots get the bosonic OPDM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BosonicToggle {
    All(bool),
    At(Vec<usize>),
}

impl Default for BosonicToggle {
    fn default() -> Self {
        BosonicToggle::All(true)
    }
}

impl BosonicToggle {
    pub fn wants(&self, kick: usize) -> bool {
        match self {
            BosonicToggle::All(on) => *on,
            BosonicToggle::At(times) => times.contains(&kick),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Fraction of `k_max_occupied` bounding the `k_loc` fit.
    pub exponential_window: [f64; 2],
    /// Relative floor defining `k_max_occupied`.
    pub occupied_floor: f64,
    /// Fraction of the largest grid momentum bounding the power-law tail fit.
    pub algebraic_window: [f64; 2],
    /// Fraction of the box length bounding the `r_c` fit.
    pub correlation_window: [f64; 2],
    /// Kick range of the `γ` fit; latest half in `ln t` when absent.
    pub gamma_window: Option<[f64; 2]>,
    pub gamma_max_points: usize,
    /// Fraction of the run averaged for the late-time energy.
    pub late_fraction: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            exponential_window: [0.2, 0.8],
            occupied_floor: 1e-6,
            algebraic_window: [0.1, 1.0],
            correlation_window: [0.05, 0.25],
            gamma_window: None,
            gamma_max_points: 64,
            late_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpdmConfig {
    pub method: BosonicMethod,
    pub refactor_every: usize,
}

impl Default for OpdmConfig {
    fn default() -> Self {
        let o = BosonicOptions::default();
        Self { method: o.method, refactor_every: o.refactor_every }
    }
}

impl OpdmConfig {
    pub fn options(&self) -> BosonicOptions {
        BosonicOptions { method: self.method, refactor_every: self.refactor_every }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub strengths: Vec<f64>,
    pub anisotropies: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        Lattice::new(m.n_sites, m.n_particles, m.hbar_eff)?;
        if let Some(l) = m.box_length {
            if (l - 2.0 * std::f64::consts::PI).abs() > 1e-12 {
                bail!("model.box_length must be 2π, got {l}");
            }
        }
        if !self.schedule.kick_strength.is_finite() || self.schedule.kick_strength < 0.0 {
            bail!("schedule.kick_strength must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.schedule.anisotropy) {
            bail!("schedule.anisotropy must lie in [0, 1]");
        }
        let t = match self.initial.temperature {
            Temperature::Absolute(t) | Temperature::Fermi(t) => t,
        };
        if !(t >= 0.0) || !t.is_finite() {
            bail!("initial.temperature must be finite and non-negative");
        }
        if let Some(&t) = self.run.snapshots.iter().find(|&&t| t > self.run.kicks) {
            bail!("snapshot time {t} exceeds run.kicks = {}", self.run.kicks);
        }
        if let BosonicToggle::At(times) = &self.run.bosonic {
            if let Some(t) = times.iter().find(|t| !self.run.snapshots.contains(t)) {
                bail!("bosonic time {t} is not a snapshot time");
            }
        }
        if !(self.run.orbital_cutoff >= 0.0) {
            bail!("run.orbital_cutoff must be non-negative");
        }
        let f = &self.fits;
        for (name, w) in [
            ("exponential_window", f.exponential_window),
            ("algebraic_window", f.algebraic_window),
            ("correlation_window", f.correlation_window),
        ] {
            if !(w[0] >= 0.0 && w[0] < w[1]) {
                bail!("fits.{name} must satisfy 0 ≤ lo < hi");
            }
        }
        if !(f.late_fraction > 0.0 && f.late_fraction <= 1.0) {
            bail!("fits.late_fraction must lie in (0, 1]");
        }
        if let Some(scan) = &self.scan {
            if scan.strengths.is_empty() || scan.anisotropies.is_empty() {
                bail!("scan grid is empty");
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Ok(Lattice::new(self.model.n_sites, self.model.n_particles, self.model.hbar_eff)?)
    }

    pub fn temperature(&self) -> Result<f64> {
        Ok(self.initial.temperature.resolve(self.lattice()?.fermi_energy().value()))
    }

    /// Snapshot times, sorted and deduplicated.
    pub fn snapshot_times(&self) -> Vec<usize> {
        let mut t = self.run.snapshots.clone();
        t.sort_unstable();
        t.dedup();
        t
    }
}
