//! Discretized box: geometry, hopping and kick matrices, kick schedule and
//! the momentum grid used for every Fourier-space observable.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

/// Hard-core lattice model on `n_sites` sites spanning a box of length `2π`
/// with open boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeModel<T: Real> {
    n_sites: usize,
    n_particles: usize,
    hbar_eff: T,
    box_length: T,
    spacing: T,
    coupling: T,
}

impl<T: Real> LatticeModel<T> {
    pub fn new(n_sites: usize, n_particles: usize, hbar_eff: T) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidParameter(format!("n_sites = {n_sites}, need at least 2")));
        }
        if n_particles == 0 || n_particles >= n_sites {
            return Err(Error::InvalidParameter(format!(
                "n_particles = {n_particles} must lie in 1..{n_sites}"
            )));
        }
        if !(hbar_eff > T::zero()) {
            return Err(Error::InvalidParameter("hbar_eff must be positive".into()));
        }
        let box_length = T::two_pi();
        let spacing = box_length / from_usize::<T>(n_sites - 1);
        let coupling = hbar_eff * hbar_eff / (lit::<T>(2.0) * spacing * spacing);
        Ok(Self { n_sites, n_particles, hbar_eff, box_length, spacing, coupling })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn hbar_eff(&self) -> T {
        self.hbar_eff
    }

    pub fn box_length(&self) -> T {
        self.box_length
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Hopping amplitude `J = ħ²/(2a²)`.
    pub fn coupling(&self) -> T {
        self.coupling
    }

    pub fn fermi_energy(&self) -> FermiEnergy<T> {
        FermiEnergy::new(self.n_particles, self.hbar_eff)
    }

    /// Tridiagonal matrix with `2J` on the diagonal and `−J` on the first
    /// off-diagonals; no corner coupling.
    pub fn hopping_matrix(&self) -> DMatrix<T> {
        let n = self.n_sites;
        let j = self.coupling;
        let two_j = j + j;
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                two_j
            } else if r + 1 == c || c + 1 == r {
                -j
            } else {
                T::zero()
            }
        })
    }

    /// Unit-amplitude kick potential `cos(l·a − (𝒩+1)·a/2)` for `l = 1..=𝒩`.
    pub fn kick_profile(&self) -> Vec<T> {
        let center = from_usize::<T>(self.n_sites + 1) * self.spacing * lit(0.5);
        (1..=self.n_sites)
            .map(|l| (from_usize::<T>(l) * self.spacing - center).cos())
            .collect()
    }

    pub fn kick_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.kick_profile()))
    }

    pub fn momentum_grid(&self) -> MomentumGrid<T> {
        MomentumGrid::new(self.n_sites, self.spacing)
    }
}

/// Fermi energy `ε_F = ħ²N²/8` of `N` fermions in the `2π` box.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct FermiEnergy<T: Real>(T);

impl<T: Real> FermiEnergy<T> {
    pub fn new(n_particles: usize, hbar_eff: T) -> Self {
        let n = from_usize::<T>(n_particles);
        Self(hbar_eff * hbar_eff * n * n / lit(8.0))
    }

    pub fn value(self) -> T {
        self.0
    }

    /// Fermi momentum `p_F = ħN/2`, so that `ε_F = p_F²/2`.
    pub fn momentum(self) -> T {
        (self.0 + self.0).sqrt()
    }
}

/// Kick amplitude `K·[1 + ε·cos(ω₂n)·cos(ω₃n)]` evaluated at integer kick times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickSchedule<T: Real> {
    pub strength: T,
    pub anisotropy: T,
    pub omega2: T,
    pub omega3: T,
}

impl<T: Real> KickSchedule<T> {
    pub fn new(strength: T, anisotropy: T) -> Result<Self> {
        if strength < T::zero() {
            return Err(Error::InvalidParameter("kick strength must be non-negative".into()));
        }
        if anisotropy < T::zero() || anisotropy > T::one() {
            return Err(Error::InvalidParameter("anisotropy must lie in [0, 1]".into()));
        }
        Ok(Self {
            strength,
            anisotropy,
            omega2: T::two_pi() * lit::<T>(5.0).sqrt(),
            omega3: T::two_pi() * lit::<T>(13.0).sqrt(),
        })
    }

    pub fn periodic(strength: T) -> Result<Self> {
        Self::new(strength, T::zero())
    }

    pub fn amplitude(&self, kick_index: usize) -> T {
        if self.anisotropy == T::zero() {
            return self.strength;
        }
        let t = from_usize::<T>(kick_index);
        self.strength * (T::one() + self.anisotropy * (self.omega2 * t).cos() * (self.omega3 * t).cos())
    }
}

/// Momenta `k_m = 2π·m/(𝒩·a)`.
///
/// For odd `𝒩` the integers `m` run over `[−⌊𝒩/2⌋, ⌊𝒩/2⌋]`. For even `𝒩`
/// they run over `[−𝒩/2, 𝒩/2 − 1]` so the grid always holds exactly `𝒩`
/// points and `e^{−i k_m j a}` is a full discrete Fourier kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumGrid<T: Real> {
    indices: Vec<i64>,
    values: Vec<T>,
    step: T,
}

impl<T: Real> MomentumGrid<T> {
    pub fn new(n_sites: usize, spacing: T) -> Self {
        let n = n_sites as i64;
        let lo = -(n / 2);
        let indices: Vec<i64> = (lo..lo + n).collect();
        let step = T::two_pi() / (from_usize::<T>(n_sites) * spacing);
        let values = indices.iter().map(|&m| lit::<T>(m as f64) * step).collect();
        Self { indices, values, step }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Integer labels `m` of each grid point.
    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Position of label `m` inside a length-𝒩 DFT output (`m mod 𝒩`).
    pub fn dft_slot(&self, position: usize) -> usize {
        let n = self.values.len() as i64;
        self.indices[position].rem_euclid(n) as usize
    }

    pub fn k_max(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &k| m.max(k.abs()))
    }
}
