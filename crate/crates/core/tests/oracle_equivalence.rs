use tonks_core::evolution::{PropagatorState, FloquetOperators};
use tonks_core::lattice::{KickSchedule, LatticeModel};
use tonks_core::linalg;
use tonks_core::opdm::{self, BosonicMethod, BosonicOptions, Flavor};
use tonks_core::oracle::{self, FockSpace};
use tonks_core::thermal::ThermalState;

const TOL: f64 = 1e-7;

fn evolved(model: &LatticeModel<f64>, thermal: &ThermalState<f64>, schedule: &KickSchedule<f64>, kicks: usize) -> tonks_core::Snapshot {
    let ops = FloquetOperators::new(model, thermal);
    let mut state = PropagatorState::new(model.n_sites());
    for _ in 0..kicks {
        state.advance(&ops, schedule).unwrap();
    }
    state.snapshot(thermal)
}

#[test]
fn thermal_opdms_match_fock_space() {
    for &(n_sites, n_particles) in &[(6, 3), (8, 3)] {
        let space = FockSpace::new(n_sites).unwrap();
        let model = LatticeModel::<f64>::new(n_sites, n_particles, 1.0).unwrap();
        for &temperature in &[0.5, 2.0] {
            let thermal = ThermalState::prepare(&model, temperature).unwrap();
            let initial = oracle::exact_thermal_state(&space, &model, temperature, thermal.chemical_potential()).unwrap();
            assert!((oracle::mean_particle_number(&space, &initial) - n_particles as f64).abs() < 1e-9);
            for &strength in &[0.0, 2.0] {
                let schedule = KickSchedule::periodic(strength).unwrap();
                for &kicks in &[0, 3] {
                    let snap = evolved(&model, &thermal, &schedule, kicks);
                    let exact = oracle::exact_evolve(&space, &model, &schedule, &initial, kicks);
                    let exact_f = oracle::exact_opdm(&space, &exact, Flavor::Fermionic);
                    let exact_b = oracle::exact_opdm(&space, &exact, Flavor::Bosonic);

                    let f = opdm::fermionic_opdm(&snap);
                    let err_f = linalg::max_abs_diff(&f.matrix, &exact_f.matrix);
                    assert!(err_f < TOL, "fermion 𝒩={n_sites} T={temperature} K={strength} t={kicks}: {err_f:e}");

                    for method in [BosonicMethod::Naive, BosonicMethod::RowUpdate, BosonicMethod::Auto] {
                        let b = opdm::bosonic_opdm(&snap, &BosonicOptions { method, refactor_every: 4 }).unwrap();
                        let err_b = linalg::max_abs_diff(&b.matrix, &exact_b.matrix);
                        assert!(err_b < TOL, "boson {method:?} 𝒩={n_sites} T={temperature} K={strength} t={kicks}: {err_b:e}");
                    }
                }
            }
        }
    }
}

#[test]
fn ground_state_opdms_match_fock_space() {
    let space = FockSpace::new(8).unwrap();
    let model = LatticeModel::<f64>::new(8, 3, 1.0).unwrap();
    let thermal = ThermalState::prepare(&model, 0.0).unwrap();
    let schedule = KickSchedule::new(2.0, 0.5).unwrap();
    let initial = oracle::exact_ground_state(&space, &model).unwrap();
    for &kicks in &[0, 3] {
        let snap = evolved(&model, &thermal, &schedule, kicks);
        let exact = oracle::exact_evolve(&space, &model, &schedule, &initial, kicks);
        let exact_b = oracle::exact_opdm(&space, &exact, Flavor::Bosonic);
        for method in [BosonicMethod::Projector, BosonicMethod::Naive, BosonicMethod::Auto] {
            let b = opdm::bosonic_opdm(&snap, &BosonicOptions { method, refactor_every: 32 }).unwrap();
            assert!(linalg::max_abs_diff(&b.matrix, &exact_b.matrix) < TOL, "{method:?} t={kicks}");
        }
        let f = opdm::fermionic_opdm(&snap);
        let exact_f = oracle::exact_opdm(&space, &exact, Flavor::Fermionic);
        assert!(linalg::max_abs_diff(&f.matrix, &exact_f.matrix) < TOL);
    }
}

#[test]
fn floquet_step_conserves_particle_number() {
    let space = FockSpace::new(6).unwrap();
    let model = LatticeModel::<f64>::new(6, 2, 1.3).unwrap();
    let step = space.full_floquet_step(&model, 2.5);
    assert!(space.sector_leakage(&step) < 1e-12);
    assert!(linalg::unitarity_error(&step) < 1e-12);
}

#[test]
fn sector_energies_match_single_particle_pipeline() {
    let space = FockSpace::new(8).unwrap();
    let model = LatticeModel::<f64>::new(8, 3, 1.0).unwrap();
    let thermal = ThermalState::prepare(&model, 0.7).unwrap();
    let schedule = KickSchedule::periodic(1.5).unwrap();
    let initial = oracle::exact_thermal_state(&space, &model, 0.7, thermal.chemical_potential()).unwrap();
    let exact = oracle::exact_evolve(&space, &model, &schedule, &initial, 3);
    let snap = evolved(&model, &thermal, &schedule, 3);
    let e_exact = oracle::exact_energy(&space, &model, &exact);
    assert!((snap.lattice_energy(&model) - e_exact).abs() < 1e-8);
    assert!((oracle::trace(&exact).re - 1.0).abs() < 1e-12);
}
