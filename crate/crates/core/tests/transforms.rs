mod common;

use common::{cmat, cvec, rel_diff, unit_modulus, OwnedCell};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risnet::metrics::rate;
use risnet::ris_optimizer::*;
use risnet::system_model::PhaseProfile;
use risnet::C64;

fn setup(seed: u64, s: usize, m: usize, n: usize) -> (OwnedCell, PhaseProfile, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = OwnedCell::random(&mut rng, s, m, n);
    let phi = PhaseProfile::from_coefficients(unit_modulus(&mut rng, n));
    (cell, phi, rng)
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
    let b = cmat(rng, n, n + 2);
    let d = &b * b.adjoint();
    (&d + d.adjoint()) * C64::from(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagrangian_never_exceeds_rate_and_is_tight(seed in any::<u64>(), lam in prop::collection::vec(0.0f64..50.0, 3)) {
        let (cell, phi, _) = setup(seed, 3, 4, 6);
        let p = cell.problem();
        let beams = p.beamformers(&phi).unwrap();
        let g = p.sinrs(&phi, &beams).unwrap();
        let r: f64 = g.iter().copied().map(rate).sum();
        prop_assert!(lagrangian_objective(&g, &lam) <= r + 1e-12 * r.abs());
        prop_assert!(rel_diff(lagrangian_objective(&g, &update_lambda(&g)), r) < 1e-12);
    }

    #[test]
    fn quadratic_transform_is_a_tight_lower_bound(seed in any::<u64>(), lam in prop::collection::vec(0.0f64..50.0, 3)) {
        let (cell, phi, mut rng) = setup(seed, 3, 4, 6);
        let p = cell.problem();
        let beams = p.beamformers(&phi).unwrap();
        let ab = compute_ab(&p, &beams).unwrap();
        let psi = phi.coefficients().map(|c| c.conj());
        let f4 = fractional_objective(&ab, &lam, &psi, p.noise_power);
        let q = update_q(&ab, &lam, &psi, p.noise_power);
        prop_assert!(rel_diff(quadratic_objective(&ab, &lam, &q, &psi, p.noise_power), f4) < 1e-12);
        let other: Vec<C64> = q.iter().map(|x| x + C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * x.norm()).collect();
        prop_assert!(quadratic_objective(&ab, &lam, &other, &psi, p.noise_power) <= f4 * (1.0 + 1e-12));
    }

    #[test]
    fn quadratic_form_differs_by_a_constant(seed in any::<u64>()) {
        let (cell, phi, mut rng) = setup(seed, 3, 4, 6);
        let p = cell.problem();
        let beams = p.beamformers(&phi).unwrap();
        let ab = compute_ab(&p, &beams).unwrap();
        let psi = phi.coefficients().map(|c| c.conj());
        let lam = update_lambda(&ab.sinrs(&psi, p.noise_power));
        let q = update_q(&ab, &lam, &psi, p.noise_power);
        let (d, v) = build_dv(&ab, &lam, &q);
        let offset = |x: &nalgebra::DVector<C64>| quadratic_objective(&ab, &lam, &q, x, p.noise_power) - surrogate(&d, &v, x);
        let c0 = offset(&psi);
        for _ in 0..4 {
            let x = unit_modulus(&mut rng, 6);
            let scale = quadratic_objective(&ab, &lam, &q, &x, p.noise_power).abs().max(c0.abs()).max(1.0);
            prop_assert!((offset(&x) - c0).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn phase_sweep_never_decreases_surrogate(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_psd(&mut rng, n);
        let v = cvec(&mut rng, n);
        let mut psi = unit_modulus(&mut rng, n);
        let mut last = surrogate(&d, &v, &psi);
        for _ in 0..5 {
            phase_sweep(&mut psi, &d, &v);
            let now = surrogate(&d, &v, &psi);
            prop_assert!(now >= last - 1e-9 * last.abs().max(1.0));
            last = now;
        }
        prop_assert!(psi.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn closed_form_element_beats_grid(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_psd(&mut rng, n);
        let v = cvec(&mut rng, n);
        let psi = unit_modulus(&mut rng, n);
        let e = rng.random_range(0..n);
        let best = update_phase_element(e, &psi, &d, &v);
        let f_best = element_surrogate(e, best, &psi, &d, &v);
        for t in 0..720 {
            let theta = t as f64 * std::f64::consts::TAU / 720.0;
            prop_assert!(f_best >= element_surrogate(e, C64::from_polar(1.0, theta), &psi, &d, &v) - 1e-9);
        }
    }
}

#[test]
fn element_update_matches_full_surrogate_change() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = random_psd(&mut rng, 5);
    let v = cvec(&mut rng, 5);
    let psi = unit_modulus(&mut rng, 5);
    let mut moved = psi.clone();
    moved[2] = update_phase_element(2, &psi, &d, &v);
    let full = surrogate(&d, &v, &moved) - surrogate(&d, &v, &psi);
    let local = element_surrogate(2, moved[2], &psi, &d, &v) - element_surrogate(2, psi[2], &psi, &d, &v);
    assert!((full - local).abs() < 1e-10 * full.abs().max(1.0));
}

#[test]
fn zero_coupling_keeps_element() {
    let d = DMatrix::<C64>::identity(2, 2);
    let v = nalgebra::DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let psi = nalgebra::DVector::from_vec(vec![C64::new(0.0, 1.0), C64::new(1.0, 0.0)]);
    assert_eq!(update_phase_element(0, &psi, &d, &v), psi[0]);
}

#[test]
fn optimizer_ascends_between_refreshes_and_beats_neutral() {
    let mut improved = 0;
    for seed in 0..30 {
        let (cell, _, _) = setup(1000 + seed, 3, 4, 8);
        let sol = optimize_bs(&cell.problem(), &SolverSettings::default()).unwrap();
        for r in &sol.history {
            assert!(r.after_phase >= r.before_phase - 1e-9, "seed {seed} iter {}: {r:?}", r.iter);
        }
        assert!(sol.phi.modulus_error() < 1e-12);
        if sol.objective() > sol.initial_objective {
            improved += 1;
        }
    }
    assert!(improved >= 28, "{improved}/30");
}

#[test]
fn optimizer_respects_iteration_cap() {
    let (cell, _, _) = setup(5, 2, 4, 8);
    let settings = SolverSettings { outer_tol: 1e-300, max_outer_iters: 3, ..Default::default() };
    assert_eq!(optimize_bs(&cell.problem(), &settings).unwrap().iterations(), 3);
}
