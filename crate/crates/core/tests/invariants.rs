use proptest::prelude::*;
use tonks_core::analysis::{self, GridEnsemble};
use tonks_core::evolution::{FloquetOperators, PropagatorState};
use tonks_core::lattice::{KickSchedule, LatticeModel};
use tonks_core::observables;
use tonks_core::opdm::{self, BosonicOptions};
use tonks_core::thermal::ThermalState;

fn snapshot(n_sites: usize, n_particles: usize, t_frac: f64, strength: f64, eps: f64, kicks: usize) -> (LatticeModel<f64>, tonks_core::Snapshot) {
    let model = LatticeModel::<f64>::new(n_sites, n_particles, 1.0).unwrap();
    let thermal = ThermalState::prepare(&model, t_frac * model.fermi_energy().value()).unwrap();
    let ops = FloquetOperators::new(&model, &thermal);
    let schedule = KickSchedule::new(strength, eps).unwrap();
    let mut state = PropagatorState::new(n_sites);
    for _ in 0..kicks {
        state.advance(&ops, &schedule).unwrap();
    }
    (model, state.snapshot(&thermal))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn opdms_are_hermitian_positive_with_fixed_trace(
        n_sites in 10usize..28,
        fill in 0.1f64..0.5,
        t_frac in 0.0f64..2.0,
        strength in 0.0f64..6.0,
        eps in 0.0f64..1.0,
        kicks in 0usize..6,
    ) {
        let n_particles = ((n_sites as f64 * fill) as usize).max(1);
        let (model, snap) = snapshot(n_sites, n_particles, t_frac, strength, eps, kicks);
        let f = opdm::fermionic_opdm(&snap);
        let b = opdm::bosonic_opdm(&snap, &BosonicOptions::default()).unwrap();
        for m in [&f, &b] {
            prop_assert!(m.hermiticity_error() < 1e-10);
            prop_assert!(m.min_eigenvalue() > -1e-9);
            prop_assert!((m.trace() - n_particles as f64).abs() < 1e-9);
        }
        let grid = model.momentum_grid();
        for m in [&f, &b] {
            let dist = observables::momentum_distribution(m, &grid).unwrap();
            // the 1/(𝒩−1) normalization sums to N·𝒩/(𝒩−1)
            let expected = n_particles as f64 * n_sites as f64 / (n_sites - 1) as f64;
            prop_assert!((dist.total() - expected).abs() < 1e-8);
            prop_assert!(dist.values.iter().all(|&v| v > -1e-9));
        }
    }

    #[test]
    fn dynamical_exponent_ignores_energy_scale(gamma in -0.5f64..1.5, scale in 1e-3f64..1e3, wiggle in 0.0f64..0.05) {
        let series: Vec<(f64, f64)> = (1..=300)
            .map(|t| {
                let t = t as f64;
                (t, 2.0 * t.powf(gamma) * (1.0 + wiggle * (0.7 * t).sin()))
            })
            .collect();
        let scaled: Vec<(f64, f64)> = series.iter().map(|&(t, e)| (t, scale * e)).collect();
        let a = analysis::dynamical_exponent(&series, None, 64).unwrap();
        let b = analysis::dynamical_exponent(&scaled, None, 64).unwrap();
        prop_assert!((a.gamma - b.gamma).abs() < 1e-9);
        if wiggle == 0.0 {
            prop_assert!((a.gamma - gamma).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_predictions_are_particle_number_free(t_ratio in 0.05f64..5.0, t0_ratio in 0.0f64..0.04, ef in 0.1f64..500.0, factor in 0.01f64..100.0) {
        let t = t_ratio * ef;
        let t0 = t0_ratio * ef;
        let low = analysis::predict_p_loc_low_t(t, t0, ef).unwrap();
        let high = analysis::predict_p_loc_high_t(t, t0, ef).unwrap();
        prop_assert!((low - analysis::predict_p_loc_low_t(factor * t, factor * t0, factor * ef).unwrap()).abs() < 1e-12 * low.max(1.0));
        prop_assert!((high - analysis::predict_p_loc_high_t(factor * t, factor * t0, factor * ef).unwrap()).abs() < 1e-12 * high.max(1.0));
    }

    #[test]
    fn thermodynamic_fit_inverts_fermi_dirac(t in 5.0f64..400.0, mu in -100.0f64..200.0) {
        let model = LatticeModel::<f64>::new(256, 15, 1.0).unwrap();
        let ensemble = GridEnsemble::new(model.momentum_grid().values(), 1.0);
        let n = ensemble.number(t, mu);
        let e = ensemble.energy(t, mu);
        let fit = analysis::fit_constraints(&ensemble, n, e).unwrap();
        prop_assert!(((fit.t_eff - t) / t).abs() < 1e-6);
        prop_assert!((fit.mu_eff - mu).abs() < 1e-6 * t.max(mu.abs()));
    }
}

#[test]
fn zero_kick_state_keeps_initial_diagonal() {
    let (_, snap) = snapshot(20, 5, 0.3, 0.0, 0.0, 0);
    let f = opdm::fermionic_opdm(&snap);
    let b = opdm::bosonic_opdm(&snap, &BosonicOptions::default()).unwrap();
    for (x, y) in f.diagonal().iter().zip(b.diagonal()) {
        assert!((x - y).abs() < 1e-12);
    }
}
