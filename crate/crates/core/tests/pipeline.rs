//! End-to-end use of the public API: circuit parameters feed a schedule,
//! the ramp prepares a cat, tomography recovers it.

use kerrcat_core::circuit::{pifs_curve, HoaOptions, JunctionConfig};
use kerrcat_core::dynamics::{
    qubit_channel, run_protocol, KerrCatParams, LindbladModel, Protocol, Tolerance,
};
use kerrcat_core::fock::{cat_state, parity, state_fidelity, CatPhase, HilbertSpace, StateVector};
use kerrcat_core::schedule::{CompensationStrategy, PumpSchedule, RampSpec};
use kerrcat_core::tomography::{
    fock_qpt, mle_reconstruct, process_fidelity, square_grid, wigner, MleConfig, RMatrix,
};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

const K: f64 = 6.9;

fn space(dim: usize) -> HilbertSpace {
    HilbertSpace::new(dim).unwrap()
}

#[test]
fn circuit_shift_coefficient_drives_a_compensated_ramp() {
    // take the pump-shift coefficient from the circuit model, pick the pump
    // amplitude that gives a 1.41-photon cat and compensate dynamically
    let curve = pifs_curve(
        &JunctionConfig::reference_device(),
        0.08 * std::f64::consts::PI,
        &[0.02, 0.05, 0.1, 0.15, 0.2],
        HoaOptions::default(),
    )
    .unwrap();
    let gamma = curve.gamma_per_mhz;
    let eps2 = 1.41 * K;
    let spec = RampSpec::new(eps2, 320.0, gamma, CompensationStrategy::Dynamic);
    let schedule = PumpSchedule::from_spec(spec).unwrap();
    assert!((schedule.delta_as(320.0) - gamma * eps2 * eps2).abs() < 1e-9);
    assert!(schedule.delta(160.0).abs() < 1e-9);

    let sp = space(24);
    let vacuum = StateVector::basis(sp, 0).unwrap();
    let r = run_protocol(
        &Protocol::RampOnly,
        &spec,
        K,
        vacuum,
        None,
        &[],
        &Tolerance::default(),
    )
    .unwrap();
    let rho = r.final_state().unwrap().to_density();
    let cat = cat_state(C64::new(1.41f64.sqrt(), 0.0), CatPhase::Plus, sp).unwrap();
    let f = state_fidelity(&rho, &cat).unwrap();
    assert!(f > 0.99, "prepared cat fidelity {f}");

    // Wigner tomography of the prepared state recovers it
    let grid = square_grid(3.5, 0.15).unwrap();
    let rec = mle_reconstruct(&wigner(&rho, &grid), 24, &MleConfig::default()).unwrap();
    let back = state_fidelity(&rec.rho, &cat).unwrap();
    assert!(back > 0.98, "reconstructed fidelity {back}");
}

#[test]
fn plateau_cat_pair_is_the_top_degenerate_doublet() {
    let sp = space(30);
    let params = KerrCatParams::new(K, 0.0, 9.7);
    let h = kerrcat_core::dynamics::hamiltonian_at(&params, sp).unwrap();
    let (vals, vecs) = h.eigh();
    let n = vals.len();
    assert!((vals[n - 1] - vals[n - 2]).abs() < 1e-6 * K);
    assert!(
        vals[n - 2] - vals[n - 3] > K,
        "gap {}",
        vals[n - 2] - vals[n - 3]
    );
    let p = parity(sp);
    // the doublet is degenerate to ~e^{-4|α|²}, so the solver may mix the
    // two parities slightly; they must still be nearly pure and opposite
    let parities: Vec<f64> = vecs[n - 2..]
        .iter()
        .map(|v| v.expect(&p).unwrap().re)
        .collect();
    assert!(
        (parities[0] * parities[1] + 1.0).abs() < 1e-4,
        "{parities:?}"
    );
}

#[test]
fn noisy_round_trip_is_a_contraction_of_the_noiseless_one() {
    let spec = RampSpec::new(9.7, 320.0, 5.1 / (9.7 * 9.7), CompensationStrategy::Dynamic);
    let tol = Tolerance::default();
    let clean =
        fock_qpt(&qubit_channel(&Protocol::RampHoldRamp, &spec, K, space(20), None, &tol).unwrap())
            .unwrap();
    let model = LindbladModel::from_us(6.0, 3.0).unwrap();
    let noisy = fock_qpt(
        &qubit_channel(
            &Protocol::RampHoldRamp,
            &spec,
            K,
            space(20),
            Some(&model),
            &tol,
        )
        .unwrap(),
    )
    .unwrap();
    assert!(clean.fidelity > 0.99);
    assert!(noisy.fidelity < clean.fidelity);
    assert!(noisy.fidelity > 0.5);
    assert!((process_fidelity(&clean.r, &RMatrix::identity()) - clean.fidelity).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unitary_ramps_conserve_parity_and_norm(
        eps2 in 2.0..9.0f64,
        t_up in 80.0..400.0f64,
        shift in 0.0..8.0f64,
        strategy in prop::sample::select(vec![
            CompensationStrategy::None,
            CompensationStrategy::Static,
            CompensationStrategy::Dynamic,
        ]),
        start in 0usize..4,
    ) {
        let sp = space(22);
        let spec = RampSpec::new(eps2, t_up, shift / (eps2 * eps2), strategy);
        let psi = StateVector::basis(sp, start).unwrap();
        let samples: Vec<f64> = (0..=8).map(|i| t_up * i as f64 / 8.0).collect();
        let r = run_protocol(&Protocol::RampOnly, &spec, K, psi, None, &samples, &Tolerance::default()).unwrap();
        let p = parity(sp);
        let expected = if start % 2 == 0 { 1.0 } else { -1.0 };
        for s in &r.states {
            prop_assert!((s.expect(&p).unwrap().re - expected).abs() < 1e-6);
        }
        prop_assert!(r.norm_drift() < 1e-6);
    }

    #[test]
    fn lindblad_evolution_stays_a_density_matrix(
        t1 in 1.0..50.0f64,
        ratio in 0.1..2.0f64,
        hold in 0.0..300.0f64,
    ) {
        let sp = space(18);
        let model = LindbladModel::from_us(t1, ratio * t1).unwrap();
        let spec = RampSpec::new(6.0, 200.0, 0.05, CompensationStrategy::Dynamic).with_hold(hold);
        let psi = StateVector::fock_superposition(sp, 0.3);
        let total = 400.0 + hold;
        let samples: Vec<f64> = (0..=6).map(|i| total * i as f64 / 6.0).collect();
        let r = run_protocol(&Protocol::RampHoldRamp, &spec, K, psi, Some(&model), &samples, &Tolerance::default())
            .unwrap();
        prop_assert!(r.norm_drift() < 1e-6);
        for s in &r.states {
            let rho = s.to_density();
            prop_assert!(rho.min_eigenvalue() > -1e-8);
            prop_assert!(rho.purity() <= 1.0 + 1e-9);
        }
    }
}
