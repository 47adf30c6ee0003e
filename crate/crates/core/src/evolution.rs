//! Stroboscopic Floquet evolution of the single-particle propagator.
//!
//! One period maps `U → F · K(t) · U`: the kick `K(t) = exp(−i 𝒦(t) V/ħ)`
//! (diagonal on sites, amplitude taken at the pre-kick integer time `t`)
//! acts first, then the free flight `F = exp(−i h/ħ)`. Observables are
//! stroboscopic, so the choice of kick-then-flight only shifts the origin of
//! each period.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::lattice::{KickSchedule, LatticeModel};
use crate::linalg::{self, CMatrix};
use crate::scalar::{cis, lit, to_f64, Real};
use crate::thermal::ThermalState;

/// `V·diag(exp(−i E_j/ħ))·Vᵀ`.
pub fn free_step_operator<T: Real>(eigenvalues: &[T], eigenvectors: &DMatrix<T>, hbar_eff: T) -> CMatrix<T> {
    let phases: Vec<Complex<T>> = eigenvalues
        .iter()
        .map(|&e| cis(-e / hbar_eff))
        .collect();
    let mut left = linalg::to_complex(eigenvectors);
    for (mut col, &p) in left.column_iter_mut().zip(&phases) {
        col *= p;
    }
    linalg::mul_cr(&left, &eigenvectors.transpose())
}

/// Diagonal phases `exp(−i·amplitude·cos(l·a − (𝒩+1)a/2)/ħ)`.
pub fn kick_phases<T: Real>(kick_profile: &[T], amplitude: T, hbar_eff: T) -> Vec<Complex<T>> {
    kick_profile
        .iter()
        .map(|&v| cis(-amplitude * v / hbar_eff))
        .collect()
}

pub fn kick_step_operator<T: Real>(model: &LatticeModel<T>, amplitude: T) -> CMatrix<T> {
    let phases = kick_phases(&model.kick_profile(), amplitude, model.hbar_eff());
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases))
}

/// Cached free-flight operator plus the kick potential profile.
#[derive(Clone, Debug)]
pub struct FloquetOperators<T: Real> {
    free_re: DMatrix<T>,
    free_im: DMatrix<T>,
    kick_profile: Vec<T>,
    hbar_eff: T,
}

impl<T: Real> FloquetOperators<T> {
    pub fn new(model: &LatticeModel<T>, thermal: &ThermalState<T>) -> Self {
        let free = free_step_operator(thermal.eigenvalues(), thermal.eigenvectors(), model.hbar_eff());
        let (free_re, free_im) = linalg::split(&free);
        Self { free_re, free_im, kick_profile: model.kick_profile(), hbar_eff: model.hbar_eff() }
    }

    pub fn free_step(&self) -> CMatrix<T> {
        linalg::join(&self.free_re, &self.free_im)
    }

    pub fn kick_phases(&self, amplitude: T) -> Vec<Complex<T>> {
        kick_phases(&self.kick_profile, amplitude, self.hbar_eff)
    }

    /// `x → F·K·x` applied to the columns of `x`.
    pub fn forward(&self, x: &mut CMatrix<T>, amplitude: T) {
        let phases = self.kick_phases(amplitude);
        scale_rows(x, &phases);
        let (xr, xi) = linalg::split(x);
        let re = &self.free_re * &xr - &self.free_im * &xi;
        let im = &self.free_re * &xi + &self.free_im * &xr;
        *x = linalg::join(&re, &im);
    }

    /// Inverse period `x → K†·F†·x`.
    pub fn backward(&self, x: &mut CMatrix<T>, amplitude: T) {
        // F† = conj(F)ᵀ = conj(F) since F is symmetric
        let (xr, xi) = linalg::split(x);
        let re = &self.free_re * &xr + &self.free_im * &xi;
        let im = &self.free_re * &xi - &self.free_im * &xr;
        *x = linalg::join(&re, &im);
        let phases: Vec<Complex<T>> = self.kick_phases(amplitude).iter().map(|p| p.conj()).collect();
        scale_rows(x, &phases);
    }
}

fn scale_rows<T: Real>(x: &mut CMatrix<T>, phases: &[Complex<T>]) {
    let n = x.nrows();
    for mut col in x.column_iter_mut() {
        for i in 0..n {
            col[i] *= phases[i];
        }
    }
}

/// How often the drift of `U†U` from the identity is measured, and the
/// level at which a run is aborted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitarityCheck {
    pub every: usize,
    pub limit: f64,
}

impl Default for UnitarityCheck {
    fn default() -> Self {
        Self { every: 1, limit: 1e-6 }
    }
}

/// Full `𝒩×𝒩` propagator `U(t)`.
#[derive(Clone, Debug)]
pub struct PropagatorState<T: Real> {
    kick_count: usize,
    unitary: CMatrix<T>,
    check: UnitarityCheck,
    last_drift: f64,
}

impl<T: Real> PropagatorState<T> {
    pub fn new(n_sites: usize) -> Self {
        Self::with_check(n_sites, UnitarityCheck::default())
    }

    pub fn with_check(n_sites: usize, check: UnitarityCheck) -> Self {
        Self { kick_count: 0, unitary: CMatrix::identity(n_sites, n_sites), check, last_drift: 0.0 }
    }

    pub fn kick_count(&self) -> usize {
        self.kick_count
    }

    pub fn unitary(&self) -> &CMatrix<T> {
        &self.unitary
    }

    /// Drift measured at the last check.
    pub fn last_drift(&self) -> f64 {
        self.last_drift
    }

    pub fn unitarity_drift(&self) -> f64 {
        to_f64(linalg::unitarity_error(&self.unitary))
    }

    /// One Floquet period: kick with `𝒦(t)`, then free flight.
    pub fn advance(&mut self, ops: &FloquetOperators<T>, schedule: &KickSchedule<T>) -> Result<()> {
        ops.forward(&mut self.unitary, schedule.amplitude(self.kick_count));
        self.kick_count += 1;
        self.maybe_check()
    }

    /// Undo the most recent period.
    pub fn retreat(&mut self, ops: &FloquetOperators<T>, schedule: &KickSchedule<T>) -> Result<()> {
        if self.kick_count == 0 {
            return Err(Error::InvalidParameter("cannot retreat before t = 0".into()));
        }
        self.kick_count -= 1;
        ops.backward(&mut self.unitary, schedule.amplitude(self.kick_count));
        self.maybe_check()
    }

    fn maybe_check(&mut self) -> Result<()> {
        if self.check.every > 0 && self.kick_count % self.check.every == 0 {
            self.last_drift = self.unitarity_drift();
            if !(self.last_drift <= self.check.limit) {
                return Err(Error::UnitarityDrift {
                    kick: self.kick_count,
                    drift: self.last_drift,
                    limit: self.check.limit,
                });
            }
        }
        Ok(())
    }

    pub fn snapshot(&self, thermal: &ThermalState<T>) -> EvolvedThermal<T> {
        let orbitals = linalg::mul_cr(&self.unitary, thermal.eigenvectors());
        EvolvedThermal::from_levels(self.kick_count, orbitals, thermal, (0..thermal.n_sites()).collect())
    }
}

/// Evolution restricted to the orbitals whose occupation exceeds a cutoff.
///
/// Exact for the tracked orbitals; the dropped ones carry less than the
/// cutoff in occupation each. Used for single-particle scans and for long
/// many-body runs where only observables are needed.
#[derive(Clone, Debug)]
pub struct OrbitalState<T: Real> {
    kick_count: usize,
    orbitals: CMatrix<T>,
    levels: Vec<usize>,
    check: UnitarityCheck,
    last_drift: f64,
}

impl<T: Real> OrbitalState<T> {
    pub fn from_thermal(thermal: &ThermalState<T>, cutoff: T, check: UnitarityCheck) -> Self {
        let levels: Vec<usize> = thermal
            .occupations()
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > cutoff)
            .map(|(i, _)| i)
            .collect();
        let v = thermal.eigenvectors();
        let orbitals = CMatrix::from_fn(v.nrows(), levels.len(), |r, c| {
            Complex::new(v[(r, levels[c])], T::zero())
        });
        Self { kick_count: 0, orbitals, levels, check, last_drift: 0.0 }
    }

    pub fn kick_count(&self) -> usize {
        self.kick_count
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// `max |Φ†Φ − I|` over the tracked orbitals.
    pub fn isometry_drift(&self) -> f64 {
        to_f64(linalg::unitarity_error(&self.orbitals))
    }

    pub fn last_drift(&self) -> f64 {
        self.last_drift
    }

    pub fn advance(&mut self, ops: &FloquetOperators<T>, schedule: &KickSchedule<T>) -> Result<()> {
        ops.forward(&mut self.orbitals, schedule.amplitude(self.kick_count));
        self.kick_count += 1;
        if self.check.every > 0 && self.kick_count % self.check.every == 0 {
            self.last_drift = self.isometry_drift();
            if !(self.last_drift <= self.check.limit) {
                return Err(Error::UnitarityDrift {
                    kick: self.kick_count,
                    drift: self.last_drift,
                    limit: self.check.limit,
                });
            }
        }
        Ok(())
    }

    pub fn snapshot(&self, thermal: &ThermalState<T>) -> EvolvedThermal<T> {
        EvolvedThermal::from_levels(self.kick_count, self.orbitals.clone(), thermal, self.levels.clone())
    }
}

/// The evolved thermal state at one kick: evolved orbitals `Φ = U·V` (one
/// column per tracked level) with their occupations and Boltzmann weights.
#[derive(Clone, Debug)]
pub struct EvolvedThermal<T: Real> {
    pub kick_count: usize,
    pub orbitals: CMatrix<T>,
    pub occupations: Vec<T>,
    /// `−(E_i − μ)/T` of the tracked levels; `None` at zero temperature.
    pub log_weights: Option<Vec<T>>,
    /// `ln Z` over all levels, tracked or not.
    pub log_partition: Option<T>,
    pub n_particles: usize,
}

impl<T: Real> EvolvedThermal<T> {
    fn from_levels(kick_count: usize, orbitals: CMatrix<T>, thermal: &ThermalState<T>, levels: Vec<usize>) -> Self {
        let occupations = levels.iter().map(|&i| thermal.occupations()[i]).collect();
        let log_weights = thermal.log_weights().map(|w| levels.iter().map(|&i| w[i]).collect());
        Self {
            kick_count,
            orbitals,
            occupations,
            log_weights,
            log_partition: thermal.log_partition(),
            n_particles: thermal.n_particles(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.orbitals.nrows()
    }

    pub fn is_ground_state(&self) -> bool {
        self.log_weights.is_none()
    }

    /// `U·V·diag(n)·Vᵀ·U†`.
    pub fn occupation_form(&self) -> CMatrix<T> {
        linalg::weighted_outer(&self.orbitals, &self.occupations)
    }

    /// `U·V·diag(exp(w − s))·Vᵀ·U†` together with the shift `s = max w`.
    pub fn boltzmann_form(&self) -> Option<(CMatrix<T>, T)> {
        let w = self.log_weights.as_ref()?;
        let shift = w.iter().fold(T::min_value().unwrap(), |m, &x| m.max(x));
        let scaled: Vec<T> = w.iter().map(|&x| (x - shift).exp()).collect();
        Some((linalg::weighted_outer(&self.orbitals, &scaled), shift))
    }

    /// `Σ_i n_i ‖φ_i‖²`; equals `N` up to the dropped-orbital cutoff.
    pub fn trace(&self) -> T {
        self.orbitals
            .column_iter()
            .zip(&self.occupations)
            .fold(T::zero(), |acc, (c, &n)| acc + n * c.norm_squared())
    }

    /// Hopping-operator energy `Tr(ρ h)` on the lattice.
    pub fn lattice_energy(&self, model: &LatticeModel<T>) -> T {
        let j = model.coupling();
        let n = self.n_sites();
        let two = lit::<T>(2.0);
        let mut total = T::zero();
        for (col, &occ) in self.orbitals.column_iter().zip(&self.occupations) {
            let mut e = T::zero();
            for l in 0..n {
                e += two * j * col[l].norm_sqr();
                if l + 1 < n {
                    e -= two * j * (col[l].conj() * col[l + 1]).re;
                }
            }
            total += occ * e;
        }
        total
    }
}
