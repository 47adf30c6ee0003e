//! Momentum distributions, correlation functions, energies and tail fits.

use std::ops::Range;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EvolvedThermal;
use crate::lattice::{LatticeModel, MomentumGrid};
use crate::opdm::{Flavor, Opdm, OpdmBand};
use crate::scalar::{cis, from_usize, lit, to_f64, Real};

/// Largest imaginary residue tolerated in `n(k)` before the input is
/// declared non-Hermitian (relative to the largest value).
pub const IMAGINARY_RESIDUE_LIMIT: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MomentumDistribution<T: Real> {
    pub grid: MomentumGrid<T>,
    pub values: Vec<T>,
    pub flavor: Flavor,
    pub kick_count: usize,
}

impl<T: Real> MomentumDistribution<T> {
    pub fn momenta(&self) -> &[T] {
        self.grid.values()
    }

    pub fn total(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &x| a + x)
    }

    /// Positive momenta with `(n(k) + n(−k))/2`.
    pub fn folded(&self) -> (Vec<T>, Vec<T>) {
        let idx = self.grid.indices();
        let mut ks = Vec::new();
        let mut ns = Vec::new();
        for (p, &m) in idx.iter().enumerate() {
            if m <= 0 {
                continue;
            }
            let value = match idx.iter().position(|&x| x == -m) {
                Some(q) => (self.values[p] + self.values[q]) * lit(0.5),
                None => self.values[p],
            };
            ks.push(self.grid.values()[p]);
            ns.push(value);
        }
        (ks, ns)
    }

    /// Largest `|k|` whose occupation is at least `floor · max n`.
    pub fn k_max_occupied(&self, floor: T) -> T {
        let peak = self.values.iter().fold(T::zero(), |m, &x| m.max(x));
        self.momenta()
            .iter()
            .zip(&self.values)
            .filter(|(_, &n)| n >= floor * peak)
            .fold(T::zero(), |m, (&k, _)| m.max(k.abs()))
    }
}

/// `n(k_m) = 1/(𝒩−1) Σ_{j,l} exp(−i k_m (j−l) a) ρ_jl`.
///
/// Each row of `ρ` is transformed over `l`, then contracted with the
/// phases over `j`: `O(𝒩² log 𝒩)`.
pub fn momentum_distribution<T: Real>(opdm: &Opdm<T>, grid: &MomentumGrid<T>) -> Result<MomentumDistribution<T>> {
    let n = opdm.n_sites();
    if grid.len() != n {
        return Err(Error::InvalidParameter(format!("grid of {} points for {n} sites", grid.len())));
    }
    let twiddle: Vec<Complex<T>> = (0..n).map(|q| cis(-T::two_pi() * from_usize::<T>(q) / from_usize::<T>(n))).collect();
    let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for j in 0..n {
        for (l, b) in buf.iter_mut().enumerate() {
            *b = opdm.matrix[(j, l)];
        }
        T::dft_inverse(&mut buf);
        for (slot, (a, &y)) in acc.iter_mut().zip(&buf).enumerate() {
            *a += twiddle[(slot * j) % n] * y;
        }
    }
    finish(acc, grid, opdm.flavor, opdm.kick_count)
}

/// Fermionic `n(k) = 1/(𝒩−1) Σ_c n_c |Σ_l e^{i k l a} φ_c(l)|²` straight
/// from the evolved orbitals, without forming the density matrix.
pub fn fermionic_momentum_distribution<T: Real>(state: &EvolvedThermal<T>, grid: &MomentumGrid<T>) -> Result<MomentumDistribution<T>> {
    let n = state.n_sites();
    if grid.len() != n {
        return Err(Error::InvalidParameter(format!("grid of {} points for {n} sites", grid.len())));
    }
    let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for (col, &occ) in state.orbitals.column_iter().zip(&state.occupations) {
        if occ == T::zero() {
            continue;
        }
        buf.copy_from_slice(col.as_slice());
        T::dft_inverse(&mut buf);
        for (a, y) in acc.iter_mut().zip(&buf) {
            a.re += occ * y.norm_sqr();
        }
    }
    finish(acc, grid, Flavor::Fermionic, state.kick_count)
}

fn finish<T: Real>(acc: Vec<Complex<T>>, grid: &MomentumGrid<T>, flavor: Flavor, kick_count: usize) -> Result<MomentumDistribution<T>> {
    let n = acc.len();
    let norm = T::one() / from_usize::<T>(n - 1);
    let scale = acc.iter().fold(T::one(), |m, z| m.max(z.re.abs()));
    let residue = acc.iter().fold(T::zero(), |m, z| m.max(z.im.abs()));
    if to_f64(residue / scale) > IMAGINARY_RESIDUE_LIMIT {
        return Err(Error::NonHermitian(to_f64(residue * norm)));
    }
    let values = (0..n).map(|p| acc[grid.dft_slot(p)].re * norm).collect();
    Ok(MomentumDistribution { grid: grid.clone(), values, flavor, kick_count })
}

#[derive(Clone, Debug)]
pub struct CorrelationFunction<T: Real> {
    pub separations: Vec<usize>,
    pub values: Vec<Complex<T>>,
    pub kick_count: usize,
}

impl<T: Real> CorrelationFunction<T> {
    /// Distances `r = j·a`.
    pub fn distances(&self, spacing: T) -> Vec<T> {
        self.separations.iter().map(|&j| from_usize::<T>(j) * spacing).collect()
    }

    pub fn magnitudes(&self) -> Vec<T> {
        self.values.iter().map(|z| z.re.hypot(z.im)).collect()
    }
}

/// `g₁(j) = ⟨ρ_{i,i+j}⟩_i` averaged over the `𝒩 − j` pairs inside the box.
pub fn correlation_function<T: Real>(opdm: &Opdm<T>) -> CorrelationFunction<T> {
    let n = opdm.n_sites();
    let values = (0..n)
        .map(|j| {
            let sum = (0..n - j).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + opdm.matrix[(i, i + j)]);
            sum.unscale(from_usize(n - j))
        })
        .collect();
    CorrelationFunction { separations: (0..n).collect(), values, kick_count: opdm.kick_count }
}

/// Correlation function from a band of rows. Each row contributes
/// `ρ_{i,i+j}` and, through Hermiticity, `ρ_{i−j,i} = conj(ρ_{i,i−j})`
/// whenever those sites exist.
pub fn correlation_function_band<T: Real>(band: &OpdmBand<T>) -> CorrelationFunction<T> {
    let n = band.rows.first().map_or(0, Vec::len);
    let mut sums = vec![Complex::new(T::zero(), T::zero()); n];
    let mut counts = vec![0usize; n];
    for (r, row) in band.rows.iter().enumerate() {
        let i = band.first_row + r;
        for j in 0..n {
            if i + j < n {
                sums[j] += row[i + j];
                counts[j] += 1;
            }
            if j > 0 && i >= j {
                sums[j] += row[i - j].conj();
                counts[j] += 1;
            }
        }
    }
    let separations: Vec<usize> = (0..n).filter(|&j| counts[j] > 0).collect();
    let values = separations.iter().map(|&j| sums[j].unscale(from_usize(counts[j]))).collect();
    CorrelationFunction { separations, values, kick_count: band.kick_count }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub kick_count: usize,
    pub kinetic: f64,
}

/// `Σ_k (ħ²k²/2)·n(k)` with the continuum dispersion.
pub fn kinetic_energy<T: Real>(dist: &MomentumDistribution<T>, hbar_eff: T) -> T {
    let half = lit::<T>(0.5);
    dist.momenta()
        .iter()
        .zip(&dist.values)
        .fold(T::zero(), |acc, (&k, &n)| acc + half * hbar_eff * hbar_eff * k * k * n)
}

/// `𝒞 = 8·N·E/(L²·ħ²)`.
pub fn tan_contact<T: Real>(total_energy: T, model: &LatticeModel<T>) -> T {
    let l = model.box_length();
    let h = model.hbar_eff();
    lit::<T>(8.0) * from_usize::<T>(model.n_particles()) * total_energy / (l * l * h * h)
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub n_points: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::FitWindow(format!("{n} points cannot define a line")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::FitWindow("abscissa has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(&a, &b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit { slope, intercept, slope_se, n_points: n })
}

/// Indices whose abscissa lies in `[lo, hi]`; the abscissa must be sorted.
pub fn window_between(abscissa: &[f64], lo: f64, hi: f64) -> Range<usize> {
    let start = abscissa.iter().position(|&x| x >= lo).unwrap_or(abscissa.len());
    let end = abscissa.iter().rposition(|&x| x <= hi).map_or(start, |p| (p + 1).max(start));
    start..end
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailKind {
    /// `n(k) ∝ exp(−k/k_loc)`.
    Momentum,
    /// `g₁(r) ∝ exp(−2r/r_c)`.
    Correlation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentialFit {
    /// `k_loc` or `r_c`.
    pub length: f64,
    pub length_se: f64,
    pub amplitude: f64,
    /// Window actually used after shrinking.
    pub window: Range<usize>,
    pub shrunk: bool,
}

/// Log-linear fit of `values` against `abscissa` inside `window`.
///
/// A non-positive value ends the window just before it.
pub fn fit_exponential_tail(abscissa: &[f64], values: &[f64], window: Range<usize>, kind: TailKind) -> Result<ExponentialFit> {
    let (window, shrunk) = positive_prefix(values, window)?;
    let x = &abscissa[window.clone()];
    let y: Vec<f64> = values[window.clone()].iter().map(|v| v.ln()).collect();
    let fit = fit_line(x, &y)?;
    if !(fit.slope < 0.0) {
        return Err(Error::FitWindow(format!("non-decaying data (slope {})", fit.slope)));
    }
    let factor = match kind {
        TailKind::Momentum => 1.0,
        TailKind::Correlation => 2.0,
    };
    let length = -factor / fit.slope;
    let length_se = factor * fit.slope_se / (fit.slope * fit.slope);
    Ok(ExponentialFit { length, length_se, amplitude: fit.intercept.exp(), window, shrunk })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_se: f64,
    pub amplitude: f64,
    pub window: Range<usize>,
    pub shrunk: bool,
}

/// Log-log fit `values ≈ amplitude · abscissa^exponent`.
pub fn fit_power_law(abscissa: &[f64], values: &[f64], window: Range<usize>) -> Result<PowerLawFit> {
    let (window, shrunk) = positive_prefix(values, window)?;
    let x: Vec<f64> = abscissa[window.clone()].iter().map(|v| v.ln()).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitWindow("power-law fit needs a positive abscissa".into()));
    }
    let y: Vec<f64> = values[window.clone()].iter().map(|v| v.ln()).collect();
    let fit = fit_line(&x, &y)?;
    Ok(PowerLawFit { exponent: fit.slope, exponent_se: fit.slope_se, amplitude: fit.intercept.exp(), window, shrunk })
}

/// Amplitude `A` of `values ≈ A·abscissa^exponent` at fixed exponent
/// (geometric mean of `values·abscissa^{−exponent}` over the window).
pub fn tail_amplitude(abscissa: &[f64], values: &[f64], window: Range<usize>, exponent: f64) -> Result<f64> {
    let (window, _) = positive_prefix(values, window)?;
    let logs: Vec<f64> = window.map(|p| values[p].ln() - exponent * abscissa[p].ln()).collect();
    Ok((logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

fn positive_prefix(values: &[f64], window: Range<usize>) -> Result<(Range<usize>, bool)> {
    if window.end > values.len() || window.len() < 2 {
        return Err(Error::FitWindow(format!("window {window:?} over {} points", values.len())));
    }
    let end = window.clone().find(|&p| !(values[p] > 0.0)).unwrap_or(window.end);
    let shrunk = end < window.end;
    if shrunk {
        log::warn!("fit window {window:?} shrunk to end at {end}: non-positive value");
    }
    if end - window.start < 2 {
        return Err(Error::FitWindow(format!("fewer than two positive values in {window:?}")));
    }
    Ok((window.start..end, shrunk))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_tails() {
        let k: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
        let n: Vec<f64> = k.iter().map(|&x| 3.0 * (-x / 2.0).exp()).collect();
        let fit = fit_exponential_tail(&k, &n, 0..40, TailKind::Momentum).unwrap();
        assert!((fit.length - 2.0).abs() < 1e-6);
        assert!((fit.amplitude - 3.0).abs() < 1e-9);
        let g: Vec<f64> = k.iter().map(|&r| (-2.0 * r / 5.0).exp()).collect();
        let fit = fit_exponential_tail(&k, &g, 3..30, TailKind::Correlation).unwrap();
        assert!((fit.length - 5.0).abs() < 1e-9);
    }

    #[test]
    fn window_shrinks_at_first_non_positive_value() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let mut y: Vec<f64> = x.iter().map(|&v| (-v).exp()).collect();
        y[6] = 0.0;
        let fit = fit_exponential_tail(&x, &y, 0..10, TailKind::Momentum).unwrap();
        assert!(fit.shrunk);
        assert_eq!(fit.window, 0..6);
        y[1] = -1.0;
        assert!(fit_exponential_tail(&x, &y, 0..10, TailKind::Momentum).is_err());
        assert!(fit_exponential_tail(&x, &y, 3..3, TailKind::Momentum).is_err());
    }

    #[test]
    fn power_law_recovers_exponent() {
        let k: Vec<f64> = (1..50).map(f64::from).collect();
        let n: Vec<f64> = k.iter().map(|&x| 7.0 * x.powf(-4.0)).collect();
        let fit = fit_power_law(&k, &n, 0..49).unwrap();
        assert!((fit.exponent + 4.0).abs() < 1e-12);
        assert!((tail_amplitude(&k, &n, 10..40, -4.0).unwrap() - 7.0).abs() < 1e-10);
    }

    #[test]
    fn window_selection() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(window_between(&x, 0.5, 3.0), 1..4);
        assert_eq!(window_between(&x, 5.0, 6.0), 5..5);
    }

    #[test]
    fn tan_contact_values() {
        let model = LatticeModel::<f64>::new(128, 31, 1.0).unwrap();
        assert_eq!(tan_contact(0.0, &model), 0.0);
        let e = 31.0 * model.fermi_energy().value() / 3.0;
        let expected = 8.0 * 31.0 * e / (4.0 * std::f64::consts::PI.powi(2));
        assert!((tan_contact(e, &model) - expected).abs() < 1e-9);
        // N·(N²/8)/3 with N = 31, times 8N/(4π²)
        assert!((tan_contact(e, &model) - 7_797.686_736_546_287).abs() < 1e-6);
    }
}
