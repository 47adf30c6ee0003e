//! Grand-canonical initial state of the mapped free fermions.
//!
//! The many-body density matrix `exp(−(H − μN)/T)/Z` is Gaussian, so it is
//! carried entirely by the hopping eigenbasis, the chemical potential and
//! the Fermi-Dirac occupations. The partition function itself is never
//! formed; only `ln Z` is exposed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
use crate::linalg::sorted_symmetric_eigen;
use crate::roots::bisect_increasing;
use crate::scalar::{fermi_factor, from_usize, lit, softplus, Real};

#[derive(Clone, Debug)]
pub struct ThermalState<T: Real> {
    temperature: T,
    chemical_potential: T,
    n_particles: usize,
    eigenvalues: Vec<T>,
    eigenvectors: DMatrix<T>,
    occupations: Vec<T>,
}

impl<T: Real> ThermalState<T> {
    /// Diagonalizes the hopping matrix and fixes `μ` so that the mean
    /// particle number equals the model's `N`. `temperature == 0` selects the
    /// ground state (step occupations).
    pub fn prepare(model: &LatticeModel<T>, temperature: T) -> Result<Self> {
        let (eigenvalues, eigenvectors) = sorted_symmetric_eigen(model.hopping_matrix());
        Self::from_spectrum(eigenvalues, eigenvectors, model.n_particles(), temperature)
    }

    pub fn from_spectrum(
        eigenvalues: Vec<T>,
        eigenvectors: DMatrix<T>,
        n_particles: usize,
        temperature: T,
    ) -> Result<Self> {
        if temperature < T::zero() {
            return Err(Error::InvalidParameter("temperature must be non-negative".into()));
        }
        let chemical_potential = if temperature == T::zero() {
            zero_temperature_level(&eigenvalues, n_particles)?
        } else {
            solve_chemical_potential(&eigenvalues, n_particles, temperature)?
        };
        let occupations = occupations(&eigenvalues, chemical_potential, temperature);
        Ok(Self { temperature, chemical_potential, n_particles, eigenvalues, eigenvectors, occupations })
    }

    pub fn temperature(&self) -> T {
        self.temperature
    }

    pub fn chemical_potential(&self) -> T {
        self.chemical_potential
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn n_sites(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.eigenvectors
    }

    pub fn occupations(&self) -> &[T] {
        &self.occupations
    }

    pub fn is_ground_state(&self) -> bool {
        self.temperature == T::zero()
    }

    /// `−(E_i − μ)/T` per level; `None` for the ground state.
    pub fn log_weights(&self) -> Option<Vec<T>> {
        if self.is_ground_state() {
            return None;
        }
        let (mu, t) = (self.chemical_potential, self.temperature);
        Some(self.eigenvalues.iter().map(|&e| -(e - mu) / t).collect())
    }

    /// `ln det[I + exp(−(h − μ)/T)] = ln Z`.
    pub fn log_partition(&self) -> Option<T> {
        self.log_weights().map(|w| w.into_iter().fold(T::zero(), |acc, x| acc + softplus(x)))
    }

    /// Single-particle occupation form `V·diag(n_i)·Vᵀ`.
    pub fn occupation_matrix(&self) -> DMatrix<T> {
        weighted_projection(&self.eigenvectors, &self.occupations)
    }

    /// Boltzmann-weight matrix `V·diag(exp(−(E_i−μ)/T))·Vᵀ` stored as
    /// `exp(log_scale) · scaled`, where the largest weight in `scaled` is one.
    pub fn boltzmann_matrix(&self) -> Result<BoltzmannMatrix<T>> {
        let w = self.log_weights().ok_or_else(|| {
            Error::InvalidParameter("Boltzmann weights are undefined at zero temperature".into())
        })?;
        let log_scale = w.iter().fold(T::min_value().unwrap(), |m, &x| m.max(x));
        let scaled_w: Vec<T> = w.iter().map(|&x| (x - log_scale).exp()).collect();
        Ok(BoltzmannMatrix { scaled: weighted_projection(&self.eigenvectors, &scaled_w), log_scale })
    }
}

#[derive(Clone, Debug)]
pub struct BoltzmannMatrix<T: Real> {
    pub scaled: DMatrix<T>,
    pub log_scale: T,
}

fn weighted_projection<T: Real>(v: &DMatrix<T>, w: &[T]) -> DMatrix<T> {
    let mut scaled = v.clone();
    for (mut col, &x) in scaled.column_iter_mut().zip(w) {
        col *= x;
    }
    &scaled * v.transpose()
}

fn zero_temperature_level<T: Real>(eigenvalues: &[T], n: usize) -> Result<T> {
    if n == 0 || n >= eigenvalues.len() {
        return Err(Error::InvalidParameter(format!(
            "particle number {n} outside 1..{}",
            eigenvalues.len()
        )));
    }
    let (below, above) = (eigenvalues[n - 1], eigenvalues[n]);
    if !(above > below) {
        return Err(Error::InvalidParameter("degenerate Fermi level at zero temperature".into()));
    }
    Ok((below + above) * lit(0.5))
}

/// Fermi-Dirac occupations; exact step function at `T = 0`.
pub fn occupations<T: Real>(eigenvalues: &[T], mu: T, temperature: T) -> Vec<T> {
    if temperature == T::zero() {
        return eigenvalues.iter().map(|&e| if e < mu { T::one() } else { T::zero() }).collect();
    }
    eigenvalues.iter().map(|&e| fermi_factor((e - mu) / temperature)).collect()
}

pub fn particle_number<T: Real>(eigenvalues: &[T], mu: T, temperature: T) -> T {
    eigenvalues
        .iter()
        .fold(T::zero(), |acc, &e| acc + fermi_factor((e - mu) / temperature))
}

/// Chemical potential at which the Fermi-Dirac occupations sum to `N`.
///
/// Bisection over `[E_min − 50T, E_max + 50T]`; the particle number is
/// strictly increasing in `μ`, so the root is unique.
pub fn solve_chemical_potential<T: Real>(eigenvalues: &[T], n_particles: usize, temperature: T) -> Result<T> {
    if !(temperature > T::zero()) {
        return Err(Error::InvalidParameter("temperature must be positive".into()));
    }
    if n_particles == 0 || n_particles >= eigenvalues.len() {
        return Err(Error::InvalidParameter(format!(
            "particle number {n_particles} outside 1..{}",
            eigenvalues.len()
        )));
    }
    let target = from_usize::<T>(n_particles);
    let (lo_e, hi_e) = eigenvalues
        .iter()
        .fold((eigenvalues[0], eigenvalues[0]), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let margin = lit::<T>(50.0) * temperature;
    let tol = lit::<T>(1e-10).max(lit::<T>(100.0) * T::default_epsilon() * target);
    bisect_increasing(
        |mu| particle_number(eigenvalues, mu, temperature) - target,
        lo_e - margin,
        hi_e + margin,
        tol,
        500,
    )
}

/// Particle-number residual at `μ`, exposed for diagnostics.
pub fn number_residual<T: Real>(state: &ThermalState<T>) -> T {
    let total = state.occupations.iter().fold(T::zero(), |a, &x| a + x);
    total - from_usize(state.n_particles)
}

/// Diagonal `V·diag(w)·Vᵀ` entries without forming the matrix.
pub fn weighted_diagonal<T: Real>(v: &DMatrix<T>, w: &[T]) -> DVector<T> {
    DVector::from_fn(v.nrows(), |i, _| {
        v.row(i).iter().zip(w).fold(T::zero(), |acc, (&x, &wk)| acc + x * x * wk)
    })
}
