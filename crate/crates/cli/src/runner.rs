//! Single-run orchestration: evolve, record, fit, persist.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use tonks_core::analysis::{self, EffectiveThermo, ExponentFit, Phase, RcPrediction, ScalingRecord};
use tonks_core::evolution::{FloquetOperators, OrbitalState, UnitarityCheck};
use tonks_core::observables::{self, MomentumDistribution, TailKind};
use tonks_core::opdm;
use tonks_core::{Lattice, Schedule, Thermal};

use crate::config::RunConfig;
use crate::output::{self, num};

/// Observables at one snapshot time.
#[derive(Clone, Debug)]
pub struct SnapshotRecord {
    pub kick: usize,
    pub fermion: MomentumDistribution<f64>,
    pub boson: Option<MomentumDistribution<f64>>,
    /// `(r, g₁(r))` from the bosonic OPDM.
    pub g1: Option<(Vec<f64>, Vec<(f64, f64)>)>,
    /// Trace of the fermionic OPDM.
    pub fermion_trace: f64,
    /// Largest `|ρ^B_ii − ρ^F_ii|`.
    pub diagonal_mismatch: Option<f64>,
    /// Isometry drift of the evolved orbitals.
    pub drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fit<T> {
    pub value: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl<T> Fit<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Fit { value: Some(v), error: None },
            Err(e) => Fit { value: None, error: Some(format!("{e:#}")) },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaSummary {
    pub gamma: f64,
    pub se: f64,
    pub n_points: usize,
    pub phase: Phase,
    pub low_confidence: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LengthFit {
    pub length: f64,
    pub length_se: f64,
    pub window: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct TailSummary {
    pub kick: usize,
    pub exponent: f64,
    pub exponent_se: f64,
    /// Amplitude of `C/k⁴` fitted at fixed exponent −4.
    pub amplitude: f64,
    /// `8·N·E/(L²ħ²)` with the snapshot's kinetic energy.
    pub contact: f64,
    pub window: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub config: RunConfig,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub threads: usize,
    pub temperature: f64,
    pub fermi_energy: f64,
    pub tracked_levels: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub gamma: Fit<GammaSummary>,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Mean energy over the last `fits.late_fraction` of the run.
    pub late_energy: f64,
    pub effective_thermo: Fit<EffectiveThermo>,
    pub k_loc: Fit<LengthFit>,
    pub r_c: Fit<LengthFit>,
    pub r_c_prediction: Fit<RcPrediction>,
    pub scaling: Fit<ScalingRecord>,
    pub tail: Fit<TailSummary>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// `(kick, kinetic energy)` from kick 0 to the last kick.
    pub energies: Vec<(usize, f64)>,
    /// Effective thermodynamics per kick; `None` where the fit failed.
    pub thermo: Vec<Option<EffectiveThermo>>,
    pub snapshots: Vec<SnapshotRecord>,
    pub summary: Summary,
}

impl RunResult {
    pub fn snapshot(&self, kick: usize) -> Option<&SnapshotRecord> {
        self.snapshots.iter().find(|s| s.kick == kick)
    }
}

/// Evolution state shared by full runs and scans.
pub struct Simulation {
    pub model: Lattice,
    pub thermal: Thermal,
    pub schedule: Schedule,
    ops: FloquetOperators<f64>,
    state: OrbitalState<f64>,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let model = config.lattice()?;
        let temperature = config.temperature()?;
        let thermal = Thermal::prepare(&model, temperature).context("preparing the thermal state")?;
        let schedule = Schedule::new(config.schedule.kick_strength, config.schedule.anisotropy)?;
        let ops = FloquetOperators::new(&model, &thermal);
        let state = OrbitalState::from_thermal(&thermal, config.run.orbital_cutoff, UnitarityCheck::default());
        Ok(Self { model, thermal, schedule, ops, state })
    }

    pub fn kick_count(&self) -> usize {
        self.state.kick_count()
    }

    pub fn tracked_levels(&self) -> usize {
        self.state.levels().len()
    }

    pub fn advance(&mut self) -> Result<()> {
        self.state.advance(&self.ops, &self.schedule).context("evolution")?;
        Ok(())
    }

    pub fn fermion_distribution(&self) -> Result<MomentumDistribution<f64>> {
        let snap = self.state.snapshot(&self.thermal);
        Ok(observables::fermionic_momentum_distribution(&snap, &self.model.momentum_grid())?)
    }

    pub fn energy(&self) -> Result<f64> {
        Ok(observables::kinetic_energy(&self.fermion_distribution()?, self.model.hbar_eff()))
    }
}

/// Energy series `(t, E(t))` for `t = 0..=kicks`, without persisting anything.
pub fn energy_series(config: &RunConfig) -> Result<Vec<(f64, f64)>> {
    let mut sim = Simulation::new(config)?;
    let mut out = Vec::with_capacity(config.run.kicks + 1);
    out.push((0.0, sim.energy()?));
    for _ in 0..config.run.kicks {
        sim.advance()?;
        out.push((sim.kick_count() as f64, sim.energy()?));
    }
    Ok(out)
}

pub fn fit_gamma(config: &RunConfig, series: &[(f64, f64)]) -> Result<ExponentFit> {
    let window = config.fits.gamma_window.map(|w| (w[0], w[1]));
    Ok(analysis::dynamical_exponent(series, window, config.fits.gamma_max_points)?)
}

/// Runs the configured experiment. Files go to `out` when given.
pub fn run(config: &RunConfig, out: Option<&Path>) -> Result<RunResult> {
    let started = Instant::now();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut sim = Simulation::new(config)?;
    let hbar = sim.model.hbar_eff();
    let snapshot_times = config.snapshot_times();
    let mut energies = Vec::with_capacity(config.run.kicks + 1);
    let mut thermo = Vec::with_capacity(config.run.kicks + 1);
    let mut snapshots = Vec::new();
    let last_fermion = loop {
        let t = sim.kick_count();
        let dist = sim.fermion_distribution().with_context(|| format!("fermionic n(k) at kick {t}"))?;
        energies.push((t, observables::kinetic_energy(&dist, hbar)));
        thermo.push(match analysis::fit_effective_thermo(&dist, hbar) {
            Ok(fit) => Some(fit),
            Err(e) => {
                log::debug!("thermodynamic fit failed at kick {t}: {e}");
                None
            }
        });
        if snapshot_times.binary_search(&t).is_ok() {
            let record = take_snapshot(config, &sim, dist.clone()).with_context(|| format!("snapshot at kick {t}"))?;
            if let Some(dir) = out {
                persist_snapshot(dir, &record)?;
            }
            snapshots.push(record);
        }
        if t == config.run.kicks {
            break dist;
        }
        sim.advance().with_context(|| format!("kick {}", t + 1))?;
    };
    if let Some(dir) = out {
        let rows = energies.iter().zip(&thermo).map(|(&(t, e), fit)| {
            let (te, mu) = fit.map_or((f64::NAN, f64::NAN), |f| (f.t_eff, f.mu_eff));
            [t.to_string(), num(e), num(te), num(mu)]
        });
        output::write_rows(&dir.join("energy.csv"), output::ENERGY_HEADER, rows)?;
    }
    let summary = summarize(config, &sim, &energies, &thermo, &snapshots, &last_fermion, started)?;
    if let Some(dir) = out {
        output::write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(RunResult { energies, thermo, snapshots, summary })
}

fn take_snapshot(config: &RunConfig, sim: &Simulation, fermion: MomentumDistribution<f64>) -> Result<SnapshotRecord> {
    let kick = sim.kick_count();
    let snap = sim.state.snapshot(&sim.thermal);
    let fermion_trace = snap.trace();
    let drift = sim.state.isometry_drift();
    let mut record = SnapshotRecord { kick, fermion, boson: None, g1: None, fermion_trace, diagonal_mismatch: None, drift };
    if config.run.bosonic.wants(kick) && sim.model.n_particles() > 1 {
        let b = opdm::bosonic_opdm(&snap, &config.opdm.options()).context("bosonic OPDM")?;
        let f = opdm::fermionic_opdm(&snap);
        record.diagonal_mismatch = Some(f.diagonal().iter().zip(b.diagonal()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())));
        record.boson = Some(observables::momentum_distribution(&b, &sim.model.momentum_grid())?);
        let g1 = observables::correlation_function(&b);
        record.g1 = Some((g1.distances(sim.model.spacing()), g1.values.iter().map(|z| (z.re, z.im)).collect()));
    }
    Ok(record)
}

fn persist_snapshot(dir: &Path, record: &SnapshotRecord) -> Result<()> {
    let f = &record.fermion;
    output::write_columns(&output::nk_file(dir, "fermion", record.kick), output::NK_HEADER, f.momenta(), &f.values)?;
    if let Some(b) = &record.boson {
        output::write_columns(&output::nk_file(dir, "boson", record.kick), output::NK_HEADER, b.momenta(), &b.values)?;
    }
    if let Some((r, g)) = &record.g1 {
        let rows = r.iter().zip(g).map(|(r, (re, im))| [num(*r), num(*re), num(*im)]);
        output::write_rows(&output::g1_file(dir, record.kick), output::G1_HEADER, rows)?;
    }
    Ok(())
}

/// `k_loc` from the folded distribution over `window·k_max_occupied`.
pub fn fit_k_loc(dist: &MomentumDistribution<f64>, window: [f64; 2], floor: f64) -> Result<LengthFit> {
    let k_occ = dist.k_max_occupied(floor);
    let (k, n) = dist.folded();
    let (lo, hi) = (window[0] * k_occ, window[1] * k_occ);
    let fit = observables::fit_exponential_tail(&k, &n, observables::window_between(&k, lo, hi), TailKind::Momentum)?;
    Ok(LengthFit { length: fit.length, length_se: fit.length_se, window: [lo, hi] })
}

/// `r_c` from `|g₁(r)|` over `window·L`.
pub fn fit_r_c(r: &[f64], g1: &[(f64, f64)], window: [f64; 2], box_length: f64) -> Result<LengthFit> {
    let mag: Vec<f64> = g1.iter().map(|(re, im)| re.hypot(*im)).collect();
    let (lo, hi) = (window[0] * box_length, window[1] * box_length);
    let fit = observables::fit_exponential_tail(r, &mag, observables::window_between(r, lo, hi), TailKind::Correlation)?;
    Ok(LengthFit { length: fit.length, length_se: fit.length_se, window: [lo, hi] })
}

/// Power-law fit of the folded bosonic tail over `window·k_max`.
pub fn fit_tail(model: &Lattice, dist: &MomentumDistribution<f64>, energy: f64, window: [f64; 2]) -> Result<TailSummary> {
    let (k, n) = dist.folded();
    let k_max = dist.grid.k_max();
    let (lo, hi) = (window[0] * k_max, window[1] * k_max);
    let range = observables::window_between(&k, lo, hi);
    let fit = observables::fit_power_law(&k, &n, range.clone())?;
    let amplitude = observables::tail_amplitude(&k, &n, range, -4.0)?;
    Ok(TailSummary {
        kick: dist.kick_count,
        exponent: fit.exponent,
        exponent_se: fit.exponent_se,
        amplitude,
        contact: observables::tan_contact(energy, model),
        window: [lo, hi],
    })
}

fn summarize(
    config: &RunConfig,
    sim: &Simulation,
    energies: &[(usize, f64)],
    thermo: &[Option<EffectiveThermo>],
    snapshots: &[SnapshotRecord],
    last_fermion: &MomentumDistribution<f64>,
    started: Instant,
) -> Result<Summary> {
    let model = &sim.model;
    let fits = &config.fits;
    let n = model.n_particles();
    let ef = model.fermi_energy().value();
    let hbar = model.hbar_eff();
    let t0 = sim.thermal.temperature();
    let series: Vec<(f64, f64)> = energies.iter().map(|&(t, e)| (t as f64, e)).collect();
    let gamma = Fit::from(fit_gamma(config, &series).map(|f| {
        let c = analysis::classify_phase(f.gamma, f.se);
        GammaSummary { gamma: f.gamma, se: f.se, n_points: f.n_points, phase: c.phase, low_confidence: c.low_confidence }
    }));
    let late_start = energies.len() - ((energies.len() as f64 * fits.late_fraction).ceil() as usize).clamp(1, energies.len());
    let late = &energies[late_start..];
    let late_energy = late.iter().map(|p| p.1).sum::<f64>() / late.len() as f64;
    let effective_thermo = Fit::from(
        thermo
            .last()
            .copied()
            .flatten()
            .ok_or_else(|| anyhow::anyhow!("thermodynamic fit failed at the last kick")),
    );
    let k_loc = Fit::from(fit_k_loc(last_fermion, fits.exponential_window, fits.occupied_floor));
    let last_boson = snapshots.iter().rev().find(|s| s.boson.is_some());
    let r_c = Fit::from(
        last_boson
            .and_then(|s| s.g1.as_ref())
            .ok_or_else(|| anyhow::anyhow!("no bosonic snapshot"))
            .and_then(|(r, g)| fit_r_c(r, g, fits.correlation_window, model.box_length())),
    );
    let r_c_prediction = Fit::from(
        effective_thermo
            .value
            .ok_or_else(|| anyhow::anyhow!("no effective temperature"))
            .and_then(|th| Ok(analysis::predict_r_c(th.t_eff, th.mu_eff, ef, hbar)?)),
    );
    let scaling = Fit::from((|| -> Result<ScalingRecord> {
        let th = effective_thermo.value.ok_or_else(|| anyhow::anyhow!("no effective temperature"))?;
        let p_f = analysis::fermi_momentum(n, hbar);
        let p_loc = analysis::extract_p_loc(energies[0].1, late_energy, n as f64)?;
        let mut predictions = BTreeMap::new();
        if let Ok(v) = analysis::predict_p_loc_low_t(th.t_eff, t0, ef) {
            predictions.insert("p_loc_low_t".to_owned(), v);
        }
        if let Ok(v) = analysis::predict_p_loc_high_t(th.t_eff, t0, ef) {
            predictions.insert("p_loc_high_t".to_owned(), v);
        }
        if let Some(p) = &r_c_prediction.value {
            predictions.insert("r_c_scaled".to_owned(), p.scaled);
        }
        Ok(ScalingRecord { p_loc, p_f, r_c: r_c.value.as_ref().map(|f| f.length), predictions })
    })());
    let tail = Fit::from(
        last_boson
            .ok_or_else(|| anyhow::anyhow!("no bosonic snapshot"))
            .and_then(|s| {
                let e = observables::kinetic_energy(&s.fermion, hbar);
                fit_tail(model, s.boson.as_ref().unwrap(), e, fits.algebraic_window)
            }),
    );
    Ok(Summary {
        gamma,
        initial_energy: energies[0].1,
        final_energy: energies[energies.len() - 1].1,
        late_energy,
        effective_thermo,
        k_loc,
        r_c,
        r_c_prediction,
        scaling,
        tail,
        provenance: Provenance {
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            temperature: t0,
            fermi_energy: ef,
            tracked_levels: sim.tracked_levels(),
        },
    })
}
