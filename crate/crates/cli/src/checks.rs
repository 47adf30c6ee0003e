//! Fast pipeline against the exact Fock-space oracle on small lattices.

use anyhow::{bail, Result};
use serde::Serialize;
use tonks_core::evolution::{FloquetOperators, PropagatorState};
use tonks_core::linalg;
use tonks_core::opdm::{self, BosonicMethod, BosonicOptions, Flavor};
use tonks_core::oracle::{self, FockSpace};
use tonks_core::{Propagator, Thermal};

use crate::config::RunConfig;

/// Largest lattice the oracle accepts here.
pub const MAX_SITES: usize = 10;
/// Entrywise discrepancy that fails the check.
pub const FAIL_ABOVE: f64 = 1e-6;
/// Bound for the low-temperature continuity check.
pub const CONTINUITY_LIMIT: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotComparison {
    pub kick: usize,
    pub fermionic: f64,
    pub bosonic: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub n_sites: usize,
    pub n_particles: usize,
    pub temperature: f64,
    pub snapshots: Vec<SnapshotComparison>,
    /// `T = 10⁻³ ε_F` against the zero-temperature projector path at the
    /// last kick.
    pub continuity: f64,
    pub max_discrepancy: f64,
    pub passed: bool,
}

pub fn oracle_check(config: &RunConfig) -> Result<OracleReport> {
    let model = config.lattice()?;
    if model.n_sites() > MAX_SITES {
        bail!("oracle-check needs n_sites ≤ {MAX_SITES}, got {}", model.n_sites());
    }
    let temperature = config.temperature()?;
    let thermal = Thermal::prepare(&model, temperature)?;
    let schedule = tonks_core::Schedule::new(config.schedule.kick_strength, config.schedule.anisotropy)?;
    let space = FockSpace::new(model.n_sites())?;
    let initial = if thermal.is_ground_state() {
        oracle::exact_ground_state(&space, &model)?
    } else {
        oracle::exact_thermal_state(&space, &model, temperature, thermal.chemical_potential())?
    };
    let mut times = config.snapshot_times();
    if times.is_empty() {
        times = (0..=config.run.kicks).collect();
    }
    let ops = FloquetOperators::new(&model, &thermal);
    let mut state = Propagator::new(model.n_sites());
    let mut exact = initial;
    let mut snapshots = Vec::new();
    let options = config.opdm.options();
    for &t in &times {
        while state.kick_count() < t {
            state.advance(&ops, &schedule)?;
        }
        exact = oracle::exact_evolve(&space, &model, &schedule, &exact, t - exact.kick_count);
        let snap = state.snapshot(&thermal);
        let f = opdm::fermionic_opdm(&snap);
        let b = opdm::bosonic_opdm(&snap, &options)?;
        let exact_f = oracle::exact_opdm(&space, &exact, Flavor::Fermionic);
        let exact_b = oracle::exact_opdm(&space, &exact, Flavor::Bosonic);
        snapshots.push(SnapshotComparison {
            kick: t,
            fermionic: linalg::max_abs_diff(&f.matrix, &exact_f.matrix),
            bosonic: linalg::max_abs_diff(&b.matrix, &exact_b.matrix),
        });
    }
    let continuity = continuity_check(config, *times.last().unwrap())?;
    let max_discrepancy = snapshots.iter().fold(0.0f64, |m, s| m.max(s.fermionic).max(s.bosonic));
    let passed = max_discrepancy <= FAIL_ABOVE && continuity <= CONTINUITY_LIMIT;
    Ok(OracleReport {
        n_sites: model.n_sites(),
        n_particles: model.n_particles(),
        temperature,
        snapshots,
        continuity,
        max_discrepancy,
        passed,
    })
}

/// Largest entrywise gap between the bosonic OPDM at `T = 10⁻³ ε_F` (row
/// path) and at `T = 0` (projector path) after `kicks` kicks.
pub fn continuity_check(config: &RunConfig, kicks: usize) -> Result<f64> {
    let model = config.lattice()?;
    let schedule = tonks_core::Schedule::new(config.schedule.kick_strength, config.schedule.anisotropy)?;
    let mut out = Vec::new();
    for (temperature, method) in [(0.0, BosonicMethod::Projector), (1e-3 * model.fermi_energy().value(), BosonicMethod::RowUpdate)] {
        let thermal = Thermal::prepare(&model, temperature)?;
        let ops = FloquetOperators::new(&model, &thermal);
        let mut state = PropagatorState::new(model.n_sites());
        for _ in 0..kicks {
            state.advance(&ops, &schedule)?;
        }
        let options = BosonicOptions { method, refactor_every: config.opdm.refactor_every };
        out.push(opdm::bosonic_opdm(&state.snapshot(&thermal), &options)?);
    }
    Ok(linalg::max_abs_diff(&out[0].matrix, &out[1].matrix))
}
