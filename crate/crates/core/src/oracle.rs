//! Exact many-body reference for small lattices.
//!
//! States are dense density matrices in the occupation-number basis, one
//! block per particle-number sector. Nearest-neighbour hopping carries no
//! Jordan-Wigner sign on an open chain, so hard-core bosons and spinless
//! fermions share the same many-body Hamiltonian; the flavors differ only in
//! the operator `a_i† a_j` used to read out the density matrix.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::lattice::{KickSchedule, LatticeModel};
use crate::linalg::{self, CMatrix};
use crate::opdm::{Flavor, Opdm};
use crate::scalar::cis;

pub const MAX_SITES: usize = 12;

#[derive(Clone, Debug)]
pub struct Sector {
    pub n_particles: usize,
    /// Occupation patterns, bit `l` set when site `l` is occupied.
    pub states: Vec<u32>,
    lookup: Vec<u32>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    fn index(&self, state: u32) -> usize {
        self.lookup[state as usize] as usize
    }
}

#[derive(Clone, Debug)]
pub struct FockSpace {
    pub n_sites: usize,
    pub sectors: Vec<Sector>,
}

impl FockSpace {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(Error::InvalidParameter(format!("Fock space needs 1..={MAX_SITES} sites, got {n_sites}")));
        }
        let total = 1usize << n_sites;
        let mut sectors: Vec<Sector> = (0..=n_sites)
            .map(|n_particles| Sector { n_particles, states: Vec::new(), lookup: vec![u32::MAX; total] })
            .collect();
        for state in 0..total as u32 {
            let sector = &mut sectors[state.count_ones() as usize];
            sector.lookup[state as usize] = sector.states.len() as u32;
            sector.states.push(state);
        }
        Ok(Self { n_sites, sectors })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// Hopping Hamiltonian restricted to one sector.
    pub fn hopping_hamiltonian(&self, model: &LatticeModel<f64>, n_particles: usize) -> DMatrix<f64> {
        let sector = &self.sectors[n_particles];
        let j = model.coupling();
        let mut h = DMatrix::zeros(sector.dim(), sector.dim());
        for (col, &state) in sector.states.iter().enumerate() {
            h[(col, col)] = 2.0 * j * state.count_ones() as f64;
            for l in 0..self.n_sites - 1 {
                let pair = (state >> l) & 0b11;
                if pair == 0b01 || pair == 0b10 {
                    let row = sector.index(state ^ (0b11 << l));
                    h[(row, col)] = -j;
                }
            }
        }
        h
    }

    /// Kick potential `Σ_l n_l cos(l·a − (𝒩+1)a/2)` per sector state.
    pub fn kick_diagonal(&self, model: &LatticeModel<f64>, n_particles: usize) -> Vec<f64> {
        let profile = model.kick_profile();
        self.sectors[n_particles]
            .states
            .iter()
            .map(|&s| (0..self.n_sites).filter(|&l| s >> l & 1 == 1).map(|l| profile[l]).sum())
            .collect()
    }

    /// Hopping Hamiltonian on the full `2^𝒩` space in the natural bit
    /// ordering, for checks that do not assume the sector structure.
    pub fn full_hopping_hamiltonian(&self, model: &LatticeModel<f64>) -> DMatrix<f64> {
        let dim = self.dim();
        let j = model.coupling();
        let mut h = DMatrix::zeros(dim, dim);
        for state in 0..dim as u32 {
            h[(state as usize, state as usize)] = 2.0 * j * state.count_ones() as f64;
            for l in 0..self.n_sites - 1 {
                let pair = (state >> l) & 0b11;
                if pair == 0b01 || pair == 0b10 {
                    h[((state ^ (0b11 << l)) as usize, state as usize)] = -j;
                }
            }
        }
        h
    }

    /// One Floquet period `exp(−iH/ħ)·exp(−i𝒦V/ħ)` on the full space.
    pub fn full_floquet_step(&self, model: &LatticeModel<f64>, amplitude: f64) -> CMatrix<f64> {
        let (vals, vecs) = linalg::sorted_symmetric_eigen(self.full_hopping_hamiltonian(model));
        let free = exp_symmetric(&vals, &vecs, model.hbar_eff());
        let profile = model.kick_profile();
        let mut step = free;
        for state in 0..self.dim() {
            let v: f64 = (0..self.n_sites).filter(|&l| state >> l & 1 == 1).map(|l| profile[l]).sum();
            let phase = cis(-amplitude * v / model.hbar_eff());
            for r in 0..self.dim() {
                step[(r, state)] *= phase;
            }
        }
        step
    }

    /// Largest matrix element connecting different particle numbers.
    pub fn sector_leakage(&self, op: &CMatrix<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.dim() {
            for r in 0..self.dim() {
                if (r as u32).count_ones() != (c as u32).count_ones() {
                    worst = worst.max(op[(r, c)].norm());
                }
            }
        }
        worst
    }
}

fn exp_symmetric(vals: &[f64], vecs: &DMatrix<f64>, hbar: f64) -> CMatrix<f64> {
    let mut left = linalg::to_complex(vecs);
    for (mut col, &e) in left.column_iter_mut().zip(vals) {
        col *= cis(-e / hbar);
    }
    linalg::mul_cr(&left, &vecs.transpose())
}

/// Block-diagonal many-body density matrix, normalized to unit trace.
#[derive(Clone, Debug)]
pub struct ManyBodyState {
    pub blocks: Vec<CMatrix<f64>>,
    pub kick_count: usize,
}

/// `exp(−(H − μN)/T)/Z` summed over all sectors.
pub fn exact_thermal_state(space: &FockSpace, model: &LatticeModel<f64>, temperature: f64, mu: f64) -> Result<ManyBodyState> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter("exact thermal state needs T > 0".into()));
    }
    let mut spectra = Vec::with_capacity(space.sectors.len());
    let mut max_exponent = f64::NEG_INFINITY;
    for sector in &space.sectors {
        let (vals, vecs) = linalg::sorted_symmetric_eigen(space.hopping_hamiltonian(model, sector.n_particles));
        let exponents: Vec<f64> =
            vals.iter().map(|&e| -(e - mu * sector.n_particles as f64) / temperature).collect();
        max_exponent = exponents.iter().fold(max_exponent, |m, &x| m.max(x));
        spectra.push((exponents, vecs));
    }
    let z: f64 = spectra.iter().flat_map(|(x, _)| x.iter()).map(|&x| (x - max_exponent).exp()).sum();
    let blocks = spectra
        .into_iter()
        .map(|(exponents, vecs)| {
            let weights: Vec<f64> = exponents.iter().map(|&x| (x - max_exponent).exp() / z).collect();
            linalg::weighted_outer(&linalg::to_complex(&vecs), &weights)
        })
        .collect();
    Ok(ManyBodyState { blocks, kick_count: 0 })
}

/// Pure `N`-particle ground state.
pub fn exact_ground_state(space: &FockSpace, model: &LatticeModel<f64>) -> Result<ManyBodyState> {
    let n = model.n_particles();
    let (vals, vecs) = linalg::sorted_symmetric_eigen(space.hopping_hamiltonian(model, n));
    if vals.len() > 1 && vals[1] - vals[0] < 1e-10 {
        return Err(Error::InvalidParameter("degenerate many-body ground state".into()));
    }
    let blocks = space
        .sectors
        .iter()
        .map(|s| {
            if s.n_particles == n {
                let g = linalg::to_complex(&vecs.columns(0, 1).into_owned());
                linalg::mul_cc(&g, &g.adjoint())
            } else {
                CMatrix::zeros(s.dim(), s.dim())
            }
        })
        .collect();
    Ok(ManyBodyState { blocks, kick_count: 0 })
}

/// Applies `kicks` exact Floquet periods sector by sector.
pub fn exact_evolve(
    space: &FockSpace,
    model: &LatticeModel<f64>,
    schedule: &KickSchedule<f64>,
    state: &ManyBodyState,
    kicks: usize,
) -> ManyBodyState {
    let mut blocks = state.blocks.clone();
    for (sector, block) in space.sectors.iter().zip(blocks.iter_mut()) {
        let (vals, vecs) = linalg::sorted_symmetric_eigen(space.hopping_hamiltonian(model, sector.n_particles));
        let free = exp_symmetric(&vals, &vecs, model.hbar_eff());
        let potential = space.kick_diagonal(model, sector.n_particles);
        for t in state.kick_count..state.kick_count + kicks {
            let amp = schedule.amplitude(t);
            let mut step = free.clone();
            for (c, &v) in potential.iter().enumerate() {
                let phase = cis(-amp * v / model.hbar_eff());
                for r in 0..step.nrows() {
                    step[(r, c)] *= phase;
                }
            }
            *block = linalg::mul_cc(&linalg::mul_cc(&step, block), &step.adjoint());
        }
    }
    ManyBodyState { blocks, kick_count: state.kick_count + kicks }
}

/// `⟨a_i† a_j⟩ = Tr(ρ a_i† a_j)` with the flavor's exchange sign.
pub fn exact_opdm(space: &FockSpace, state: &ManyBodyState, flavor: Flavor) -> Opdm<f64> {
    let n = space.n_sites;
    let mut matrix = CMatrix::zeros(n, n);
    for (sector, block) in space.sectors.iter().zip(&state.blocks) {
        for (col, &s) in sector.states.iter().enumerate() {
            for j in (0..n).filter(|&j| s >> j & 1 == 1) {
                for i in 0..n {
                    if i != j && s >> i & 1 == 1 {
                        continue;
                    }
                    let target = s & !(1 << j) | 1 << i;
                    let sign = match flavor {
                        Flavor::Bosonic => 1.0,
                        Flavor::Fermionic => {
                            let (lo, hi) = (i.min(j), i.max(j));
                            let between = if hi > lo + 1 { (s >> (lo + 1)) & ((1u32 << (hi - lo - 1)) - 1) } else { 0 };
                            if between.count_ones() % 2 == 0 {
                                1.0
                            } else {
                                -1.0
                            }
                        }
                    };
                    // a_i† a_j |s⟩ = sign |target⟩, so the trace picks ρ[s, target]
                    matrix[(i, j)] += block[(col, sector.index(target))] * sign;
                }
            }
        }
    }
    Opdm { flavor, matrix, kick_count: state.kick_count }
}

pub fn exact_thermal_opdm(
    space: &FockSpace,
    model: &LatticeModel<f64>,
    temperature: f64,
    mu: f64,
    flavor: Flavor,
) -> Result<Opdm<f64>> {
    Ok(exact_opdm(space, &exact_thermal_state(space, model, temperature, mu)?, flavor))
}

/// `Tr(ρ H_hop)`.
pub fn exact_energy(space: &FockSpace, model: &LatticeModel<f64>, state: &ManyBodyState) -> f64 {
    space
        .sectors
        .iter()
        .zip(&state.blocks)
        .map(|(sector, block)| {
            let h = linalg::to_complex(&space.hopping_hamiltonian(model, sector.n_particles));
            linalg::trace(&linalg::mul_cc(block, &h)).re
        })
        .sum()
}

/// `Σ_N N·Tr ρ_N`.
pub fn mean_particle_number(space: &FockSpace, state: &ManyBodyState) -> f64 {
    space
        .sectors
        .iter()
        .zip(&state.blocks)
        .map(|(s, b)| s.n_particles as f64 * linalg::trace(b).re)
        .sum()
}

pub fn trace(state: &ManyBodyState) -> Complex<f64> {
    state.blocks.iter().map(linalg::trace).sum()
}
