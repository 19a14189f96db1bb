use approx::assert_abs_diff_eq;
use ed_core::grid::{ConfigGrid, VectorField};
use ed_core::quantum::states::{gaussian_packet, ground_state, plane_wave};
use ed_core::quantum::*;
use ed_core::rng::{stream, Domain};
use ed_core::stats::{compare_density, Binning, Verdict};
use ed_core::stochastic::*;
use ed_core::system::ParticleSystem;

fn timeline(s0: &WaveState, pot: &Potentials, dt: f64, steps: usize) -> Vec<WaveState> {
    let mut cn = CrankNicolson::new(s0, pot, dt, SolverOptions::default()).unwrap();
    let mut s = s0.clone();
    let mut out = vec![s.clone()];
    for _ in 0..steps {
        cn.step(&mut s).unwrap();
        out.push(s.clone());
    }
    out
}

#[test]
fn drift_examples() {
    let g = ConfigGrid::line(128, 0.0, 2.0 * std::f64::consts::PI, true).unwrap();
    let sys = ParticleSystem::new(vec![2.0], vec![1.0], 1).unwrap().with_hbar(0.5).unwrap();
    let k = 3.0;
    let pw = plane_wave(&g, &sys, &[k]).unwrap();
    let d = drift_velocity_field(&madelung(&pw), None, Process::Ou, 1.0).unwrap();
    for &v in d.field.component(0) {
        assert_abs_diff_eq!(v, 0.5 * k / 2.0, epsilon = 1e-12);
    }
    // A equal to the phase gradient cancels it
    let beta = sys.beta(0);
    let pot = Potentials::free().with_vector(LinkPotential::uniform(g.clone(), &[k / beta]).unwrap());
    let d = drift_velocity_field(&madelung(&pw), Some(&pot), Process::Ou, 1.0).unwrap();
    assert!(d.field.component(0).iter().all(|v| v.abs() < 1e-12));

    let g = ConfigGrid::line(400, -10.0, 10.0, false).unwrap();
    let sys = ParticleSystem::single(1, 1.5).unwrap();
    let sig = 1.2;
    let real = gaussian_packet(&g, &sys, &[0.0], &[sig], &[0.0]).unwrap();
    let pair = madelung(&real);
    let ou = drift_velocity_field(&pair, None, Process::Ou, 0.7).unwrap();
    assert!(ou.field.component(0).iter().all(|&v| v == 0.0));
    let es = drift_velocity_field(&pair, None, Process::Es, 0.7).unwrap();
    for i in 0..g.len() {
        if es.mask[i] {
            let x = g.coordinate(0, i);
            assert_abs_diff_eq!(es.field.component(0)[i], -(0.7 / (2.0 * 1.5)) * x / (sig * sig), epsilon = 1e-9);
        }
    }
}

fn constant_field(g: &ConfigGrid, v: &[f64]) -> VectorField {
    let v = v.to_vec();
    VectorField::from_fn(g.clone(), move |_| v.clone())
}

#[test]
fn noiseless_step_is_deterministic() {
    let g = ConfigGrid::line(64, 0.0, 10.0, true).unwrap();
    let sys = ParticleSystem::single(1, 1.0).unwrap();
    let f = constant_field(&g, &[0.75]);
    let p = TransitionParams::ou(0.1, 0.0).unwrap();
    let mut rng = stream(1, Domain::Test, 0);
    let mut x = [3.0];
    assert_eq!(sample_step(&mut x, &f, &p, &sys, &mut rng).unwrap(), Step::Inside);
    assert_eq!(x[0], 3.0 + 0.75 * 0.1);
    // wraps on a ring
    let mut x = [9.99];
    sample_step(&mut x, &f, &p, &sys, &mut rng).unwrap();
    assert_abs_diff_eq!(x[0], 0.065, epsilon = 1e-12);
    // escapes a box
    let b = ConfigGrid::line(64, 0.0, 10.0, false).unwrap();
    let fb = constant_field(&b, &[0.75]);
    let mut x = [9.99];
    assert_eq!(sample_step(&mut x, &fb, &p, &sys, &mut rng).unwrap(), Step::Escaped);
}

#[test]
fn fluctuation_variance_matches_the_law() {
    let g = ConfigGrid::line(64, 0.0, 10.0, true).unwrap();
    let sys = ParticleSystem::single(1, 1.0).unwrap();
    let f = constant_field(&g, &[0.3]);
    let p = TransitionParams::ou(0.1, 1.0).unwrap();
    let r = fluctuation_check(&[5.0], &f, &p, &sys, 1_000_000, 7).unwrap();
    assert_abs_diff_eq!(r.expected[0], 1e-3, epsilon = 1e-15);
    assert!(r.within(3.0), "{:?}", r);

    let g2 = ConfigGrid::cube(2, 16, 0.0, 1.0, true).unwrap();
    let sys2 = ParticleSystem::new(vec![1.0, 3.0], vec![0.0, 0.0], 1).unwrap();
    let f2 = VectorField::zeros(g2);
    let r = fluctuation_check(&[0.5, 0.5], &f2, &p, &sys2, 400_000, 8).unwrap();
    assert!(r.within(3.0), "{:?}", r);
    let ratio = r.covariance[0] / r.covariance[3];
    assert!((ratio / 3.0 - 1.0).abs() < 0.02, "{ratio}");
}

#[test]
fn scaling_exponents() {
    let sys = ParticleSystem::single(1, 1.0).unwrap();
    let dts: Vec<f64> = (0..7).map(|i| 10f64.powf(-3.0 + 0.4 * i as f64)).collect();
    for (gamma, process) in [(1.0, Process::Es), (3.0, Process::Ou), (4.0, Process::Fractional)] {
        let p = TransitionParams::new(0.1, 1.0, gamma, process).unwrap();
        let r = scaling_exponent(&p, &sys, &dts, 20_000, 3).unwrap();
        assert!((r.gamma_hat - gamma).abs() < 0.05, "{gamma}: {}", r.gamma_hat);
        if gamma > 2.0 {
            // noise becomes negligible against the drift as dt shrinks
            assert!(r.dominance.windows(2).all(|w| w[1] > w[0]));
        }
    }
    let quiet = TransitionParams::ou(0.1, 0.0).unwrap();
    assert!(matches!(scaling_exponent(&quiet, &sys, &dts, 10, 3), Err(ed_core::Error::NoiseUnavailable)));
}

#[test]
fn replay_and_noiseless_limit() {
    let g = ConfigGrid::line(256, -12.0, 12.0, false).unwrap();
    let sys = ParticleSystem::single(1, 1.0).unwrap();
    let s0 = gaussian_packet(&g, &sys, &[0.0], &[1.0], &[0.5]).unwrap();
    let tl = timeline(&s0, &Potentials::free(), 0.02, 20);
    let p = TransitionParams::ou(0.02, 1.0).unwrap();
    let mut o = EnsembleOptions::new(1, 99);
    o.checkpoints = (0..=20).collect();
    let a = simulate_ensemble(&tl, None, &p, &o).unwrap();
    let b = simulate_ensemble(&tl, None, &p, &o).unwrap();
    assert_eq!(a, b);

    let p0 = TransitionParams::ou(0.02, 0.0).unwrap();
    let mut o = EnsembleOptions::new(50, 1);
    o.initial = InitialSampling::Given((0..50).map(|i| -2.0 + 0.08 * i as f64).collect());
    o.checkpoints = vec![20];
    let x = simulate_ensemble(&tl, None, &p0, &o).unwrap();
    o.seed = 2;
    let y = simulate_ensemble(&tl, None, &p0, &o).unwrap();
    assert_eq!(x.positions, y.positions);
}

#[test]
fn velocity_increments_follow_the_wiener_law() {
    let g = ConfigGrid::line(400, -20.0, 20.0, false).unwrap();
    let run = |mass: f64| {
        let sys = ParticleSystem::single(1, mass).unwrap();
        let s0 = gaussian_packet(&g, &sys, &[0.0], &[1.5], &[0.0]).unwrap();
        let tl = timeline(&s0, &Potentials::free(), 0.01, 100);
        let p = TransitionParams::ou(0.01, 1.0).unwrap();
        let mut o = EnsembleOptions::new(10_000, 5);
        o.record_velocities = true;
        let e = simulate_ensemble(&tl, None, &p, &o).unwrap();
        velocity_increment_stats(&e).unwrap()
    };
    let r1 = run(1.0);
    assert!(r1.increments >= 990_000);
    assert!(r1.max_relative_error < 0.05, "{:?}", r1);
    let r2 = run(2.0);
    assert!(r2.max_relative_error < 0.05);
    assert!((r1.covariance[0] / r2.covariance[0] / 2.0 - 1.0).abs() < 0.05);

    let sys = ParticleSystem::single(1, 1.0).unwrap();
    let s0 = gaussian_packet(&g, &sys, &[0.0], &[1.5], &[0.0]).unwrap();
    let tl = timeline(&s0, &Potentials::free(), 0.01, 20);
    let mut o = EnsembleOptions::new(1000, 5);
    o.record_velocities = true;
    let e = simulate_ensemble(&tl, None, &TransitionParams::ou(0.01, 0.0).unwrap(), &o).unwrap();
    let r = velocity_increment_stats(&e).unwrap();
    assert!(r.covariance[0].abs() < 1e-6);
}

#[test]
fn bohmian_paths() {
    let g = ConfigGrid::line(256, 0.0, 20.0, true).unwrap();
    let sys = ParticleSystem::single(1, 2.0).unwrap();
    let k = 2.0 * std::f64::consts::PI * 3.0 / 20.0;
    let pw = plane_wave(&g, &sys, &[k]).unwrap();
    let tl = timeline(&pw, &Potentials::free(), 0.05, 40);
    let paths = bohmian_trajectories(&tl, None, &[1.0, 7.5], 4).unwrap();
    // group velocity of the lattice dispersion (1 - cos kh) / (m h^2)
    let h = g.spacing()[0];
    let v = (k * h).sin() / (2.0 * h);
    assert!((v / (k / 2.0) - 1.0).abs() < 0.01);
    for (p, x0) in paths.iter().zip([1.0, 7.5]) {
        assert!(p.flagged_at.is_none());
        for (c, &x) in p.points.iter().enumerate() {
            let expected = x0 + v * 0.05 * c as f64;
            assert!(g.displacement(0, expected, x).abs() < 1e-9);
        }
    }

    let g = ConfigGrid::line(400, -10.0, 10.0, false).unwrap();
    let sys = ParticleSystem::single(1, 1.0).unwrap();
    let s0 = gaussian_packet(&g, &sys, &[0.0], &[1.0], &[0.0]).unwrap();
    let tl = timeline(&s0, &Potentials::free(), 0.02, 50);
    let p = &bohmian_trajectories(&tl, None, &[0.0], 2).unwrap()[0];
    assert!(p.points.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn stochastic_paths_approach_bohmian_ones() {
    let g = ConfigGrid::line(400, -10.0, 10.0, false).unwrap();
    let sys = ParticleSystem::single(1, 1.0).unwrap();
    let s0 = gaussian_packet(&g, &sys, &[-1.0], &[1.0], &[1.0]).unwrap();
    let tl = timeline(&s0, &Potentials::free(), 0.02, 50);
    let x0: Vec<f64> = (0..20).map(|i| -2.5 + 0.15 * i as f64).collect();
    let r = bohmian_limit(&tl, None, &x0, &[1e-2, 1e-3, 1e-4], 11).unwrap();
    assert!(r.monotone, "{:?}", r);
    assert_eq!(r.excluded, 0);
}

#[test]
fn center_of_mass_fluctuations() {
    let p = TransitionParams::ou(0.05, 1.0).unwrap();
    for n in [1usize, 2, 4, 8] {
        let sys = ParticleSystem::new(vec![1.0; n], vec![0.0; n], 1).unwrap();
        let r = center_of_mass_report(&sys, &p, 200_000, 1.0, 4).unwrap();
        assert_abs_diff_eq!(r.expected[0], 0.05 / n as f64, epsilon = 1e-15);
        assert!(r.max_z < 4.0, "{n}: {:?}", r);
        assert!((r.quantum_potential_ratio - 4.0).abs() < 0.4);
    }
    // one particle: the centre of mass is the particle
    let single = ParticleSystem::single(1, 1.0).unwrap();
    let r = center_of_mass_report(&single, &p, 1000, 1.0, 4).unwrap();
    let g = ConfigGrid::line(8, 0.0, 1.0, true).unwrap();
    let f = VectorField::zeros(g);
    let mut rng = stream(4, Domain::CenterOfMass, 0);
    let mut acc = 0.0;
    for _ in 0..1000 {
        let mut x = [0.5];
        sample_step(&mut x, &f, &p, &single, &mut rng).unwrap();
        acc += ((x[0] - 0.5) / 0.05).powi(2);
    }
    assert!((acc / 1000.0 - r.covariance[0]).abs() < 1e-9 * r.covariance[0]);
}

#[test]
fn ground_state_histogram_matches_density() {
    let g = ConfigGrid::line(200, -6.0, 6.0, false).unwrap();
    let sys = ParticleSystem::single(1, 1.0).unwrap();
    let pot = Potentials::harmonic(&g, &sys, 1.0, &[0.0]).unwrap();
    let (gs, _) = ground_state(&g, &sys, &pot, 1e-10).unwrap();
    let tl = timeline(&gs, &pot, 0.01, 100);
    for params in [TransitionParams::ou(0.01, 1.0).unwrap(), TransitionParams::es(0.01, 1.0).unwrap()] {
        let mut o = EnsembleOptions::new(20_000, 21);
        o.checkpoints = vec![100];
        let e = simulate_ensemble(&tl, None, &params, &o).unwrap();
        let r = compare_density(&e.active_positions(0), &tl[100].density(), &Binning::uniform(1, 8), 400, 5).unwrap();
        assert_ne!(r.verdict, Verdict::Underpowered);
        assert!(r.p_value > 0.001, "{:?} {:?}", params.process, r);
    }
}

#[test]
fn timeline_must_match_step() {
    let g = ConfigGrid::line(64, -6.0, 6.0, false).unwrap();
    let sys = ParticleSystem::single(1, 1.0).unwrap();
    let s0 = gaussian_packet(&g, &sys, &[0.0], &[1.0], &[0.0]).unwrap();
    let tl = timeline(&s0, &Potentials::free(), 0.01, 3);
    let p = TransitionParams::ou(0.02, 1.0).unwrap();
    assert!(matches!(
        simulate_ensemble(&tl, None, &p, &EnsembleOptions::new(4, 1)),
        Err(ed_core::Error::TimelineMismatch { .. })
    ));
}
