//! Effective thermalization, scaling predictors, dynamical exponents and
//! scaling collapses.
//!
//! Everything here works in `f64` on already-reduced data (distributions,
//! time series); the generic scalar only matters upstream.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{fit_line, MomentumDistribution};
use crate::roots::{bisect_increasing, newton_increasing};
use crate::scalar::{fermi_factor, to_f64, Real};

/// Fitted Fermi-Dirac parameters of a fermionic momentum distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveThermo {
    pub t_eff: f64,
    pub mu_eff: f64,
    pub kick_count: usize,
    /// Relative mismatch of the particle-number and energy constraints.
    pub residuals: (f64, f64),
}

/// Grand-canonical free fermions on a fixed set of momenta.
#[derive(Clone, Debug)]
pub struct GridEnsemble {
    energies: Vec<f64>,
}

impl GridEnsemble {
    pub fn new(momenta: &[f64], hbar_eff: f64) -> Self {
        Self { energies: momenta.iter().map(|&k| 0.5 * hbar_eff * hbar_eff * k * k).collect() }
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn occupations(&self, t: f64, mu: f64) -> Vec<f64> {
        self.energies.iter().map(|&e| fermi_factor((e - mu) / t)).collect()
    }

    pub fn number(&self, t: f64, mu: f64) -> f64 {
        self.energies.iter().map(|&e| fermi_factor((e - mu) / t)).sum()
    }

    pub fn energy(&self, t: f64, mu: f64) -> f64 {
        self.energies.iter().map(|&e| e * fermi_factor((e - mu) / t)).sum()
    }

    /// `μ(T)` at fixed particle number.
    pub fn chemical_potential(&self, t: f64, n_target: f64) -> Result<f64> {
        let len = self.energies.len() as f64;
        if !(n_target > 0.0 && n_target < len) {
            return Err(Error::InvalidParameter(format!("particle number {n_target} outside (0, {len})")));
        }
        let (emin, emax) = self.energies.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
        // Σf ≤ len·exp((μ − E_min)/T) and Σ(1 − f) ≤ len·exp((E_max − μ)/T)
        let lo = emin + t * ((n_target / len).ln() - 1.0);
        let hi = emax + t * (len / (len - n_target)).ln() + t;
        // relative in N, so that nearly empty ensembles are still pinned down
        let tol = 1e-11 * n_target;
        newton_increasing(
            |mu| {
                let (mut n, mut dn) = (0.0, 0.0);
                for &e in &self.energies {
                    let f = fermi_factor((e - mu) / t);
                    n += f;
                    dn += f * (1.0 - f) / t;
                }
                (n - n_target, dn)
            },
            lo,
            hi,
            tol,
            400,
        )
    }
}

/// Solves `Σ_k f_FD(k) = N`, `Σ_k (ħ²k²/2) f_FD(k) = E` for `(T, μ)`.
///
/// `N` is the distribution's own sum. The inner problem fixes `μ(T)`; the
/// energy at matched `N` increases with `T` and is bracketed in `ln T`.
pub fn fit_effective_thermo<T: Real>(dist: &MomentumDistribution<T>, hbar_eff: T) -> Result<EffectiveThermo> {
    let momenta: Vec<f64> = dist.momenta().iter().map(|&k| to_f64(k)).collect();
    let values: Vec<f64> = dist.values.iter().map(|&v| to_f64(v)).collect();
    let ensemble = GridEnsemble::new(&momenta, to_f64(hbar_eff));
    let n_target: f64 = values.iter().sum();
    let e_target: f64 = ensemble.energies().iter().zip(&values).map(|(e, n)| e * n).sum();
    let mut fit = fit_constraints(&ensemble, n_target, e_target)?;
    fit.kick_count = dist.kick_count;
    Ok(fit)
}

pub fn fit_constraints(ensemble: &GridEnsemble, n_target: f64, e_target: f64) -> Result<EffectiveThermo> {
    let energies = ensemble.energies();
    let spread = energies.iter().fold(0.0f64, |m, &e| m.max(e));
    let gap = {
        let mut sorted: Vec<f64> = energies.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    };
    let (log_lo, log_hi) = ((gap * 1e-3).ln(), (spread * 1e6).ln());
    let energy_at = |log_t: f64| -> Result<f64> {
        let t = log_t.exp();
        let mu = ensemble.chemical_potential(t, n_target)?;
        Ok(ensemble.energy(t, mu))
    };
    let (e_lo, e_hi) = (energy_at(log_lo)?, energy_at(log_hi)?);
    if e_target > e_hi {
        return Err(Error::NoBracket(format!(
            "energy {e_target} above the infinite-temperature limit {e_hi} of the grid"
        )));
    }
    if e_target < e_lo {
        return Err(Error::NoBracket(format!("energy {e_target} below the ground-state value {e_lo} of the grid")));
    }
    let mut failure = None;
    let log_t = bisect_increasing(
        |x| match energy_at(x) {
            Ok(e) => e / e_target - 1.0,
            Err(err) => {
                failure.get_or_insert(err);
                0.0
            }
        },
        log_lo,
        log_hi,
        1e-10,
        400,
    )?;
    if let Some(err) = failure {
        return Err(err);
    }
    let t_eff = log_t.exp();
    let mu_eff = ensemble.chemical_potential(t_eff, n_target)?;
    let residuals = (
        ensemble.number(t_eff, mu_eff) / n_target - 1.0,
        ensemble.energy(t_eff, mu_eff) / e_target - 1.0,
    );
    Ok(EffectiveThermo { t_eff, mu_eff, kick_count: 0, residuals })
}

/// `p_F = ħ·N/2`, so that `ε_F = p_F²/2 = ħ²N²/8`.
pub fn fermi_momentum(n_particles: usize, hbar_eff: f64) -> f64 {
    0.5 * hbar_eff * n_particles as f64
}

/// Degenerate-gas law `p_loc/p_F = (π/2√3)·√(T_eff² − T₀²)/ε_F`.
pub fn predict_p_loc_low_t(t_eff: f64, t0: f64, fermi_energy: f64) -> Result<f64> {
    if t_eff < t0 || t0 < 0.0 {
        return Err(Error::InvalidParameter(format!("need T_eff ≥ T₀ ≥ 0, got {t_eff} and {t0}")));
    }
    let (a, b) = (t_eff / fermi_energy, t0 / fermi_energy);
    Ok(PI / (2.0 * 3f64.sqrt()) * (a * a - b * b).sqrt())
}

/// Classical-gas law `p_loc/p_F = √((T_eff − T₀)/(2ε_F))`.
pub fn predict_p_loc_high_t(t_eff: f64, t0: f64, fermi_energy: f64) -> Result<f64> {
    if t_eff < t0 || t0 < 0.0 {
        return Err(Error::InvalidParameter(format!("need T_eff ≥ T₀ ≥ 0, got {t_eff} and {t0}")));
    }
    Ok(((t_eff - t0) / fermi_energy / 2.0).sqrt())
}

/// `p_loc = √(2(E_final − E_initial)/N)`.
pub fn extract_p_loc(energy_initial: f64, energy_final: f64, n_particles: f64) -> Result<f64> {
    let radicand = 2.0 * (energy_final - energy_initial) / n_particles;
    if radicand < 0.0 || !radicand.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "final energy {energy_final} below initial energy {energy_initial}"
        )));
    }
    Ok(radicand.sqrt())
}

/// Riemann ζ(s) for real `s > 1` by Euler-Maclaurin summation.
pub fn riemann_zeta(s: f64) -> f64 {
    assert!(s > 1.0, "ζ(s) needs s > 1");
    const N: usize = 20;
    let n = N as f64;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    // Bernoulli corrections B_2k/(2k)! · s(s+1)…(s+2k−2) · N^{−s−2k+1}
    let bernoulli = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0];
    let mut tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    let mut rising = s;
    let mut factorial = 2.0;
    for (k, b) in bernoulli.iter().enumerate() {
        let order = 2 * k + 2;
        tail += b / factorial * rising * n.powf(-s - order as f64 + 1.0);
        rising *= (s + order as f64 - 1.0) * (s + order as f64);
        factorial *= ((order + 1) * (order + 2)) as f64;
    }
    head + tail
}

/// `√π / ((1 − 2^{−3/2}) ζ(3/2))`, the high-temperature `r_c` prefactor.
pub fn high_temperature_rc_prefactor() -> f64 {
    PI.sqrt() / ((1.0 - 2f64.powf(-1.5)) * riemann_zeta(1.5))
}

/// Correlation length of the thermal hard-core gas and its limits, all as
/// `r_c·p_F/ħ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcPrediction {
    pub r_c: f64,
    pub scaled: f64,
    pub quadrature_error: f64,
    /// `2ε_F/T`, the degenerate law as usually quoted.
    pub degenerate: f64,
    /// `(4/π)·√(ε_F μ)/T`, the exact `μ/T → ∞` limit of the integral.
    pub degenerate_exact: f64,
    /// `√π/((1 − 2^{−3/2})ζ(3/2))·√(ε_F/T)` at `μ = 0`.
    pub high_temperature: f64,
    /// `√(ε_F/|μ|)` for `μ < 0`, `|μ| ≫ T`.
    pub negative_mu: Option<f64>,
}

/// `r_c⁻¹ = √(2T)/(2πħ) ∫ dλ ln|(e^{λ²−μ/T} + 1)/(e^{λ²−μ/T} − 1)|`, plus
/// `√(2|μ|)/ħ` when `μ < 0`.
///
/// The integrand has a logarithmic singularity on the shell `λ² = μ/T`;
/// the integral is split there and each side is done by double-exponential
/// quadrature in the distance `u` to the shell, where `λ² − μ/T = ±u(2λ₀ ± u)`
/// is computed without cancellation. For `μ < 0` there is no shell and the
/// argument is `λ² + |μ|/T`.
pub fn predict_r_c(t_eff: f64, mu_eff: f64, fermi_energy: f64, hbar_eff: f64) -> Result<RcPrediction> {
    if !(t_eff > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature {t_eff} must be positive")));
    }
    let a = mu_eff / t_eff;
    let lambda0 = a.max(0.0).sqrt();
    let g = |x: f64| {
        let x = x.abs();
        if x == 0.0 {
            0.0
        } else {
            // ln coth(x/2) = ln(1 + e^{−x}) − ln(1 − e^{−x})
            (-x).exp().ln_1p() - (-(-x).exp_m1()).ln()
        }
    };
    const TARGET: f64 = 1e-13;
    // integrand below e^{−45} beyond this distance
    let reach = (a.max(0.0) + 45.0).sqrt() - lambda0;
    let offset = (-a).max(0.0);
    let outer = quadrature::integrate(|u| g(u * (2.0 * lambda0 + u) + offset), 0.0, reach, TARGET);
    let mut integral = outer.integral;
    let mut error = outer.error_estimate;
    if lambda0 > 0.0 {
        let inner = quadrature::integrate(|u| g(u * (2.0 * lambda0 - u)), 0.0, lambda0, TARGET);
        integral += inner.integral;
        error += inner.error_estimate;
    }
    // even integrand
    integral *= 2.0;
    error *= 2.0;
    let mut inverse = (2.0 * t_eff).sqrt() / (2.0 * PI * hbar_eff) * integral;
    if mu_eff < 0.0 {
        inverse += (2.0 * mu_eff.abs()).sqrt() / hbar_eff;
    }
    let r_c = 1.0 / inverse;
    let p_over_hbar = (2.0 * fermi_energy).sqrt() / hbar_eff;
    Ok(RcPrediction {
        r_c,
        scaled: r_c * p_over_hbar,
        quadrature_error: error / integral,
        degenerate: 2.0 * fermi_energy / t_eff,
        degenerate_exact: 4.0 / PI * (fermi_energy * mu_eff.max(0.0)).sqrt() / t_eff,
        high_temperature: high_temperature_rc_prefactor() * (fermi_energy / t_eff).sqrt(),
        negative_mu: (mu_eff < 0.0).then(|| (fermi_energy / mu_eff.abs()).sqrt()),
    })
}

/// Measured and predicted scaling variables of one steady state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub p_loc: f64,
    pub p_f: f64,
    pub r_c: Option<f64>,
    pub predictions: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub gamma: f64,
    pub se: f64,
    pub n_points: usize,
}

/// Minimum number of samples in a dynamical-exponent window.
pub const MIN_EXPONENT_POINTS: usize = 8;

/// Slope of `ln E` against `ln t` over `window` (`t` range, inclusive), by
/// default the latest half of the series in `ln t`. Samples are thinned to
/// at most `max_points` roughly log-spaced times so that every decade of the
/// window carries similar weight.
pub fn dynamical_exponent(series: &[(f64, f64)], window: Option<(f64, f64)>, max_points: usize) -> Result<ExponentFit> {
    let positive: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::FitWindow("no positive times".into()));
    }
    let (t_first, t_last) = (positive[0].0, positive[positive.len() - 1].0);
    let (lo, hi) = window.unwrap_or(((t_first * t_last).sqrt(), t_last));
    let selected: Vec<(f64, f64)> = positive.into_iter().filter(|&(t, _)| t >= lo && t <= hi).collect();
    let thinned = log_spaced(&selected, max_points.max(MIN_EXPONENT_POINTS));
    if thinned.len() < MIN_EXPONENT_POINTS {
        return Err(Error::FitWindow(format!(
            "{} points in [{lo}, {hi}], need at least {MIN_EXPONENT_POINTS}",
            thinned.len()
        )));
    }
    if thinned.iter().any(|&(_, e)| !(e > 0.0)) {
        return Err(Error::FitWindow("energies must be positive".into()));
    }
    let x: Vec<f64> = thinned.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = thinned.iter().map(|p| p.1.ln()).collect();
    let fit = fit_line(&x, &y)?;
    Ok(ExponentFit { gamma: fit.slope, se: fit.slope_se, n_points: fit.n_points })
}

fn log_spaced(points: &[(f64, f64)], max_points: usize) -> Vec<(f64, f64)> {
    if points.len() <= max_points {
        return points.to_vec();
    }
    let (a, b) = (points[0].0.ln(), points[points.len() - 1].0.ln());
    let mut picked: Vec<usize> = Vec::with_capacity(max_points);
    for q in 0..max_points {
        let target = a + (b - a) * q as f64 / (max_points - 1) as f64;
        let idx = points
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 .0.ln() - target).abs().total_cmp(&(y.1 .0.ln() - target).abs()))
            .map(|(i, _)| i)
            .unwrap();
        if picked.last() != Some(&idx) {
            picked.push(idx);
        }
    }
    picked.into_iter().map(|i| points[i]).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Localized,
    Critical,
    Delocalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub phase: Phase,
    /// Set when `γ` falls between the class bands or its error bar crosses
    /// a band edge.
    pub low_confidence: bool,
}

/// Bands `γ < 1/3`, `|γ − 2/3| ≤ 1/6`, `γ > 5/6`; values in the gaps go to
/// the nearest band.
pub fn classify_phase(gamma: f64, se: f64) -> Classification {
    const LOCALIZED_BELOW: f64 = 1.0 / 3.0;
    const CRITICAL: (f64, f64) = (0.5, 5.0 / 6.0);
    let band = |g: f64| -> (Phase, bool) {
        if g < LOCALIZED_BELOW {
            (Phase::Localized, true)
        } else if g >= CRITICAL.0 && g <= CRITICAL.1 {
            (Phase::Critical, true)
        } else if g > CRITICAL.1 {
            (Phase::Delocalized, true)
        } else if g - LOCALIZED_BELOW < CRITICAL.0 - g {
            (Phase::Localized, false)
        } else {
            (Phase::Critical, false)
        }
    };
    let (phase, inside) = band(gamma);
    let se = se.abs();
    let stable = band(gamma - se).0 == phase && band(gamma + se).0 == phase;
    Classification { phase, low_confidence: !inside || !stable }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub strength: f64,
    pub anisotropy: f64,
    pub gamma: f64,
    pub gamma_se: f64,
    pub phase: Phase,
    pub low_confidence: bool,
}

impl PhasePoint {
    pub fn new(strength: f64, anisotropy: f64, fit: ExponentFit) -> Self {
        let c = classify_phase(fit.gamma, fit.se);
        Self { strength, anisotropy, gamma: fit.gamma, gamma_se: fit.se, phase: c.phase, low_confidence: c.low_confidence }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollapseRegime {
    /// `n(k, t) = t^{−α} f(k t^{−α})`.
    Moderate,
    /// `n(k, t) = t^{−2α} F(k t^{−α})`.
    Tail,
}

/// One snapshot for a collapse: kick time, momenta `k > 0`, occupations.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapseInput {
    pub time: f64,
    pub momenta: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub alpha: f64,
    pub regime: CollapseRegime,
    /// Common rescaled abscissa `k·t^{−α}`.
    pub abscissa: Vec<f64>,
    /// Rescaled curves interpolated onto the abscissa, one per snapshot.
    pub curves: Vec<Vec<f64>>,
    /// Median pairwise relative deviation between curves.
    pub metric: f64,
}

/// Number of points on the common rescaled abscissa.
pub const COLLAPSE_POINTS: usize = 64;

/// Rescales the snapshots and measures how well they fall on one curve.
///
/// `window` optionally restricts the rescaled abscissa. Curves are
/// interpolated by local cubics in `(ln x, ln y)` onto log-spaced points of
/// the common range; the metric is the median over points and pairs of
/// `|y_a − y_b| / max(|y_a|, |y_b|)`.
pub fn scaling_collapse(
    snapshots: &[CollapseInput],
    alpha: f64,
    regime: CollapseRegime,
    window: Option<(f64, f64)>,
) -> Result<CollapseResult> {
    if snapshots.len() < 3 {
        return Err(Error::Collapse(format!("need at least 3 snapshots, got {}", snapshots.len())));
    }
    let power = match regime {
        CollapseRegime::Moderate => alpha,
        CollapseRegime::Tail => 2.0 * alpha,
    };
    let rescaled: Vec<(Vec<f64>, Vec<f64>)> = snapshots
        .iter()
        .map(|s| {
            let pairs: Vec<(f64, f64)> = s
                .momenta
                .iter()
                .zip(&s.values)
                .filter(|(&k, &n)| k > 0.0 && n > 0.0)
                .map(|(&k, &n)| (k * s.time.powf(-alpha), n * s.time.powf(power)))
                .collect();
            pairs.into_iter().unzip()
        })
        .collect();
    let mut lo = rescaled.iter().map(|(x, _)| x.first().copied().unwrap_or(f64::INFINITY)).fold(f64::NEG_INFINITY, f64::max);
    let mut hi = rescaled.iter().map(|(x, _)| x.last().copied().unwrap_or(f64::NEG_INFINITY)).fold(f64::INFINITY, f64::min);
    if let Some((a, b)) = window {
        lo = lo.max(a);
        hi = hi.min(b);
    }
    if !(hi > lo) {
        return Err(Error::Collapse(format!("rescaled curves do not overlap (range [{lo}, {hi}])")));
    }
    let abscissa: Vec<f64> = (0..COLLAPSE_POINTS)
        .map(|q| (lo.ln() + (hi.ln() - lo.ln()) * q as f64 / (COLLAPSE_POINTS - 1) as f64).exp())
        .collect();
    let curves: Vec<Vec<f64>> = rescaled.iter().map(|(x, y)| abscissa.iter().map(|&z| interp_loglog(x, y, z)).collect()).collect();
    let mut deviations = Vec::new();
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            for q in 0..abscissa.len() {
                let (ya, yb) = (curves[a][q], curves[b][q]);
                let scale = ya.abs().max(yb.abs());
                deviations.push(if scale > 0.0 { (ya - yb).abs() / scale } else { 0.0 });
            }
        }
    }
    deviations.sort_by(f64::total_cmp);
    let metric = deviations[deviations.len() / 2];
    Ok(CollapseResult { alpha, regime, abscissa, curves, metric })
}

fn interp_loglog(x: &[f64], y: &[f64], z: f64) -> f64 {
    let p = x.partition_point(|&v| v < z);
    if p == 0 {
        return y[0];
    }
    if p >= x.len() {
        return y[x.len() - 1];
    }
    if x.len() < 4 {
        let (x0, x1) = (x[p - 1].ln(), x[p].ln());
        let (y0, y1) = (y[p - 1].ln(), y[p].ln());
        let w = if x1 > x0 { (z.ln() - x0) / (x1 - x0) } else { 0.0 };
        return (y0 + w * (y1 - y0)).exp();
    }
    // cubic through the four nearest samples in (ln x, ln y)
    let start = p.saturating_sub(2).min(x.len() - 4);
    let lz = z.ln();
    let mut total = 0.0;
    for a in start..start + 4 {
        let mut w = 1.0;
        for b in start..start + 4 {
            if a != b {
                w *= (lz - x[b].ln()) / (x[a].ln() - x[b].ln());
            }
        }
        total += w * y[a].ln();
    }
    total.exp()
}
