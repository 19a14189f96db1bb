use approx::assert_abs_diff_eq;
use ed_core::geometry::*;
use ed_core::rng::{stream, Domain};
use ed_core::system::ParticleSystem;
use ed_core::{Complex64, Error};
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

fn rng(i: u64) -> ChaCha8Rng {
    stream(11, Domain::Geometry, i)
}

fn dist(a: &Tangent, b: &Tangent) -> f64 {
    a.dp.iter()
        .zip(&b.dp)
        .chain(a.dphi.iter().zip(&b.dphi))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn symplectic_form_examples() {
    let sp = EPhaseSpace::new(1.0).unwrap();
    for j in 0..4 {
        let mut a = Tangent::zeros(4);
        let mut b = Tangent::zeros(4);
        a.dp[j] = 1.0;
        b.dphi[j] = 1.0;
        assert_eq!(sp.symplectic(&a, &b), 1.0);
        assert_eq!(sp.symplectic(&b, &a), -1.0);
    }
    let mut r = rng(0);
    let at = EPhasePoint::random(9, 1.0, &mut r).unwrap();
    for _ in 0..100 {
        let v = Tangent::random_tgf(&at, &mut r);
        let u = Tangent::random_tgf(&at, &mut r);
        assert_eq!(sp.symplectic(&v, &v), 0.0);
        assert_abs_diff_eq!(sp.symplectic(&v, &u), -sp.symplectic(&u, &v), epsilon = 1e-14);
    }
}

#[test]
fn points_and_tangents() {
    assert!(EPhasePoint::new(vec![0.5, 0.6], vec![0.0, 0.0]).is_err());
    assert_eq!(
        EPhasePoint::new(vec![1.5, -0.5], vec![0.0, 0.0]),
        Err(Error::SupportViolation { index: 1 })
    );
    let at = EPhasePoint::new(vec![0.25, 0.75], vec![1.0, 3.0]).unwrap();
    assert_abs_diff_eq!(at.mean_phase(), 2.5, epsilon = 1e-15);
    assert_abs_diff_eq!(at.canonical().mean_phase(), 0.0, epsilon = 1e-15);

    let hbar = 0.7;
    let mut r = rng(1);
    let at = EPhasePoint::random(6, hbar, &mut r).unwrap();
    let back = EPhasePoint::from_psi(&at.psi(hbar), hbar).unwrap();
    for i in 0..6 {
        assert_abs_diff_eq!(back.p()[i], at.p()[i], epsilon = 1e-14);
        assert_abs_diff_eq!(back.phi()[i], at.phi()[i], epsilon = 1e-13);
    }
    let v = Tangent::random_tgf(&at, &mut r);
    assert!(v.tgf_defect(&at) < 1e-14);
}

#[test]
fn fubini_study_examples() {
    let hbar = 1.3;
    let sp = EPhaseSpace::new(hbar).unwrap();
    let at = EPhasePoint::new(vec![0.5, 0.5], vec![0.0, 0.0]).unwrap();
    let eps = 1e-2;
    let dx = Tangent::new(vec![eps, -eps], vec![0.0, 0.0]).unwrap();
    assert_abs_diff_eq!(sp.fs_length(&dx, &at).unwrap(), 2.0 * hbar * eps * eps, epsilon = 1e-16);

    let gauge = Tangent::new(vec![0.0; 2], vec![0.3, 0.3]).unwrap();
    assert_abs_diff_eq!(sp.fs_length(&gauge, &at).unwrap(), 0.0, epsilon = 1e-16);
    assert_abs_diff_eq!(sp.fs_length_minimized(&gauge, &at).unwrap(), 0.0, epsilon = 1e-14);

    let edge = EPhasePoint::new(vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
    assert_eq!(sp.fs_length(&dx, &edge), Err(Error::SupportViolation { index: 1 }));
}

#[test]
fn closed_form_and_minimized_lengths_agree() {
    let mut worst: f64 = 0.0;
    for (i, k) in [1usize, 3, 8, 32, 64].into_iter().enumerate() {
        let mut r = rng(10 + i as u64);
        let hbar = 0.5 + i as f64 * 0.3;
        let sp = EPhaseSpace::new(hbar).unwrap();
        for _ in 0..100 {
            let at = EPhasePoint::random(k + 1, hbar, &mut r).unwrap();
            // raw directions: the minimization has to remove the phase mean itself
            let mut v = Tangent::random_tgf(&at, &mut r);
            v.dphi.iter_mut().for_each(|x| *x += 0.4);
            let a = sp.fs_length(&v, &at).unwrap();
            let b = sp.fs_length_minimized(&v, &at).unwrap();
            worst = worst.max((a - b).abs() / a.max(1.0));
        }
    }
    assert!(worst < 1e-10, "closed form vs minimization {worst:e}");
}

#[test]
fn embedding_metric_reduces_to_fubini_study_on_tgf_vectors() {
    let hbar = 1.0;
    let sp = EPhaseSpace::new(hbar).unwrap();
    let fam = MetricFamily::new(|n| 3.0 / n, move |n| 2.0 * hbar / n);
    assert_abs_diff_eq!(fam.big_b(1.0, hbar), 1.0, epsilon = 1e-15);
    let mut r = rng(20);
    let at = EPhasePoint::random(5, hbar, &mut r).unwrap();
    for _ in 0..100 {
        let v = Tangent::random_tgf(&at, &mut r);
        let u = Tangent::random_tgf(&at, &mut r);
        let e = sp.embedding_metric(&v, &u, &fam, at.p()).unwrap();
        assert_abs_diff_eq!(e, sp.metric(&v, &u, &at).unwrap(), epsilon = 1e-12);
    }
    // A picks up the normal direction only
    let mut n = Tangent::zeros(5);
    n.dp = at.p().to_vec();
    let e = sp.embedding_metric(&n, &n, &fam, at.p()).unwrap();
    assert_abs_diff_eq!(e, fam.big_a(1.0) + hbar / 2.0, epsilon = 1e-12);
}

#[test]
fn complex_structure_and_compatibility() {
    let mut worst = [0.0f64; 6];
    for (i, k) in [1usize, 4, 16, 64].into_iter().enumerate() {
        let mut r = rng(30 + i as u64);
        let hbar = 0.8;
        let sp = EPhaseSpace::new(hbar).unwrap();
        let at = EPhasePoint::random(k + 1, hbar, &mut r).unwrap();
        for _ in 0..100 {
            let v = Tangent::random_tgf(&at, &mut r);
            let u = Tangent::random_tgf(&at, &mut r);
            let (jv, dv) = sp.apply_j(&v, &at).unwrap();
            let (ju, du) = sp.apply_j(&u, &at).unwrap();
            let (jjv, _) = sp.apply_j(&jv, &at).unwrap();
            let minus_v = v.scaled(-1.0);
            let g = |a: &Tangent, b: &Tangent| sp.metric(a, b, &at).unwrap();
            let om = |a: &Tangent, b: &Tangent| sp.symplectic(a, b);
            let scale = g(&v, &v).max(g(&u, &u)).max(1.0);
            let w = [
                dist(&jjv, &minus_v) / scale,
                (g(&jv, &ju) - g(&v, &u)).abs() / scale,
                (om(&jv, &ju) - om(&v, &u)).abs() / scale,
                (om(&v, &u) - g(&jv, &u)).abs() / scale,
                (g(&jv, &jv) - g(&v, &v)).abs() / scale,
                dv.max(du),
            ];
            for (a, b) in worst.iter_mut().zip(w) {
                *a = a.max(b);
            }
        }
    }
    for (name, w) in ["J^2", "G(J,J)", "Omega(J,J)", "Omega=G(J.,.)", "|JV|", "TGF closure"].iter().zip(worst) {
        assert!(w < 1e-10, "{name}: {w:e}");
    }
}

#[test]
fn metric_is_positive_on_tgf_vectors() {
    let sp = EPhaseSpace::new(1.0).unwrap();
    let mut r = rng(40);
    let at = EPhasePoint::random(12, 1.0, &mut r).unwrap();
    for _ in 0..100 {
        let v = Tangent::random_tgf(&at, &mut r);
        let u = Tangent::random_tgf(&at, &mut r);
        assert!(sp.metric(&v, &v, &at).unwrap() > 0.0);
        assert_abs_diff_eq!(sp.metric(&v, &u, &at).unwrap(), sp.metric(&u, &v, &at).unwrap(), epsilon = 1e-13);
    }
}

#[test]
fn poisson_bracket_examples() {
    let sp = EPhaseSpace::new(1.0).unwrap();
    let mut r = rng(50);
    let at = EPhasePoint::random(5, 1.0, &mut r).unwrap();
    let q = HermitianKernel::random(5, &mut r);
    let f = q.functional(1.0);
    assert_abs_diff_eq!(sp.poisson_bracket(&f, &f, &at, DEFAULT_H_FD).unwrap(), 0.0, epsilon = 1e-12);
    for j in 0..5 {
        let pj = move |p: &[f64], _: &[f64]| p[j];
        let phij = move |_: &[f64], phi: &[f64]| phi[j];
        assert_abs_diff_eq!(sp.poisson_bracket(pj, phij, &at, DEFAULT_H_FD).unwrap(), 1.0, epsilon = 1e-9);
    }
    // bilinear functionals only see phase differences
    let nb = sp.poisson_bracket(normalization_functional, &f, &at, DEFAULT_H_FD).unwrap();
    assert!(nb.abs() < 1e-8, "{{N, H}} = {nb:e}");

    // halving the step leaves the bracket unchanged to the truncation order
    let g = HermitianKernel::random(5, &mut r);
    let gf = g.functional(1.0);
    let b1 = sp.poisson_bracket(&f, &gf, &at, 1e-3).unwrap();
    let b2 = sp.poisson_bracket(&f, &gf, &at, 5e-4).unwrap();
    let b3 = sp.poisson_bracket(&f, &gf, &at, 2.5e-4).unwrap();
    let ratio = (b1 - b2) / (b2 - b3);
    assert!((ratio - 4.0).abs() < 0.5, "h_fd convergence ratio {ratio}");
}

#[test]
fn normalization_flow_shifts_the_phase() {
    let sp = EPhaseSpace::new(1.0).unwrap();
    let mut r = rng(60);
    let at = EPhasePoint::random(7, 1.0, &mut r).unwrap();
    let dl = 0.01;
    let step = sp.hamiltonian_flow_step(normalization_functional, &at, dl, DEFAULT_H_FD).unwrap();
    for i in 0..7 {
        assert_abs_diff_eq!(step.raw.p()[i], at.p()[i], epsilon = 1e-15);
        assert_abs_diff_eq!(step.raw.phi()[i] - at.phi()[i], dl, epsilon = 1e-10);
        assert_abs_diff_eq!(step.point.phi()[i], at.canonical().phi()[i], epsilon = 1e-10);
    }
    assert_abs_diff_eq!(step.phase_shift, dl, epsilon = 1e-10);

    let same = sp.hamiltonian_flow_step(normalization_functional, &at, 0.0, DEFAULT_H_FD).unwrap();
    assert_eq!(same.raw, at);

    let killing = sp
        .killing_residual(normalization_functional, &at, KillingOptions::default(), &mut r)
        .unwrap();
    // zero up to the finite-difference floor shared with bilinear generators
    assert!(killing < 1e-6, "{killing:e}");
}

fn unitary(q: &HermitianKernel, t: f64, hbar: f64) -> DMatrix<Complex64> {
    let n = q.size();
    let m = DMatrix::from_fn(n, n, |r, c| q.get(r, c));
    let e = m.symmetric_eigen();
    let phase = DMatrix::from_diagonal(&e.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t / hbar)));
    &e.eigenvectors * phase * e.eigenvectors.adjoint()
}

#[test]
fn bilinear_flow_follows_the_unitary_group() {
    let hbar = 0.9;
    let sp = EPhaseSpace::new(hbar).unwrap();
    let mut r = rng(70);
    let n = 8;
    let q = HermitianKernel::random(n, &mut r);
    let at = EPhasePoint::random(n, hbar, &mut r).unwrap();
    let psi = nalgebra::DVector::from_vec(at.psi(hbar));
    let err = |dl: f64| {
        let step = sp.hamiltonian_flow_step(q.functional(hbar), &at, dl, DEFAULT_H_FD).unwrap();
        let exact = unitary(&q, dl, hbar) * &psi;
        let mut e: f64 = 0.0;
        for i in 0..n {
            e = e.max((step.raw.p()[i] - exact[i].norm_sqr()).abs());
            let d = Complex64::from_polar(1.0, (step.raw.phi()[i] - hbar * exact[i].arg()) / hbar);
            e = e.max(d.arg().abs() * at.p()[i]);
        }
        e
    };
    let (e1, e2) = (err(2e-3), err(1e-3));
    assert!(e1 < 1e-4 && e2 < 3e-5, "{e1:e} {e2:e}");
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.3, "observed order {order}");
}

#[test]
fn negative_probability_is_rejected() {
    let sp = EPhaseSpace::new(1.0).unwrap();
    let at = EPhasePoint::new(vec![0.01, 0.99], vec![0.0, 0.0]).unwrap();
    // F = Phi_1 - Phi_0 drains p_0 at unit rate
    let f = |_: &[f64], phi: &[f64]| phi[0] - phi[1];
    let err = sp.hamiltonian_flow_step(f, &at, -0.05, DEFAULT_H_FD).unwrap_err();
    match err {
        Error::NegativeProbability { index, suggested } => {
            assert_eq!(index, 0);
            assert!(suggested > 0.0 && suggested < 0.05);
            assert!(sp.hamiltonian_flow_step(f, &at, -suggested, DEFAULT_H_FD).is_ok());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn killing_classification() {
    let hbar = 1.0;
    let sp = EPhaseSpace::new(hbar).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let mut r = rng(100 + i);
        let n = 3 + (i as usize % 4) * 2;
        let q = HermitianKernel::random(n, &mut r);
        let at = EPhasePoint::random(n, hbar, &mut r).unwrap();
        let opts = KillingOptions { probes: 5, ..Default::default() };
        worst = worst.max(sp.killing_residual(q.functional(hbar), &at, opts, &mut r).unwrap());
    }
    assert!(worst < 1e-6, "bilinear residual {worst:e}");

    let mut r = rng(200);
    let at = EPhasePoint::random(6, hbar, &mut r).unwrap();
    let sq = |p: &[f64], _: &[f64]| p.iter().map(|v| v * v).sum::<f64>();
    let bad = sp.killing_residual(sq, &at, KillingOptions::default(), &mut r).unwrap();
    assert!(bad > 1e-3, "sum p^2 residual {bad:e}");

    // Omega is kept by both
    let om = sp.symplectic_residual(sq, &at, KillingOptions::default(), &mut r).unwrap();
    assert!(om < 1e-6, "{om:e}");
    let cubic = |p: &[f64], phi: &[f64]| p.iter().zip(phi).map(|(a, b)| a * a * b.sin()).sum::<f64>();
    let om = sp.symplectic_residual(cubic, &at, KillingOptions::default(), &mut r).unwrap();
    assert!(om < 1e-6, "{om:e}");
}

#[test]
fn scalar_product_and_commutators() {
    let hbar = 0.6;
    let sp = EPhaseSpace::new(hbar).unwrap();
    let mut r = rng(300);
    let a = EPhasePoint::random(4, hbar, &mut r).unwrap().psi(hbar);
    let b = EPhasePoint::random(4, hbar, &mut r).unwrap().psi(hbar);
    let direct: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
    assert!((sp.scalar_product(&a, &b).unwrap() - direct).norm() < 1e-14);
    let aa = sp.scalar_product(&a, &a).unwrap();
    assert_abs_diff_eq!(aa.im, 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(aa.re, a.iter().map(|z| z.norm_sqr()).sum::<f64>(), epsilon = 1e-14);
    let mut e0 = vec![Complex64::new(0.0, 0.0); 4];
    let mut e1 = e0.clone();
    e0[0] = Complex64::new(1.0, 0.0);
    e1[1] = Complex64::new(0.0, 1.0);
    assert_eq!(sp.scalar_product(&e0, &e1).unwrap(), Complex64::new(0.0, 0.0));

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let u = HermitianKernel::random(4, &mut r);
        let v = HermitianKernel::random(4, &mut r);
        let psi = EPhasePoint::random(4, hbar, &mut r).unwrap().psi(hbar);
        worst = worst.max(sp.commutator_identity(&u, &v, &psi, DEFAULT_H_FD).unwrap());
    }
    assert!(worst < 1e-6, "commutator gap {worst:e}");
}

#[test]
fn hermitian_kernels() {
    let bad = vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(1.0, 0.0),
    ];
    assert!(HermitianKernel::new(2, bad).is_err());
    let mut r = rng(400);
    let q = HermitianKernel::random(5, &mut r);
    assert!(HermitianKernel::new(5, q.values().to_vec()).is_ok());
    let psi = EPhasePoint::random(5, 1.0, &mut r).unwrap().psi(1.0);
    let hp = q.apply(&psi);
    let im: f64 = psi.iter().zip(&hp).map(|(a, b)| (a.conj() * b).im).sum();
    assert!(im.abs() < 1e-14);
}

#[test]
fn momentum_kernel_translates_rigidly() {
    let hbar = 1.0;
    let sp = EPhaseSpace::new(hbar).unwrap();
    let n = 64;
    let len = 16.0;
    let h = len / n as f64;
    let kernel = translation_kernel(n, h, hbar).unwrap();
    let x = |i: usize| -0.5 * len + (i as f64 + 0.5) * h;
    let profile = |c: f64| -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|i| (-(x(i) - c).powi(2) / 2.0).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    let at = EPhasePoint::new(profile(0.0), vec![0.0; n]).unwrap();
    let dl = 0.02;
    let step = sp.hamiltonian_flow_step(kernel.functional(hbar), &at, dl, DEFAULT_H_FD).unwrap();
    let target = profile(dl);
    let err = step.raw.p().iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let peak = target.iter().copied().fold(0.0, f64::max);
    // O(dl^2) from the explicit step and O(h^2) from the central stencil
    assert!(err / peak < 2.0 * (dl * dl + h * h * dl), "{err:e}");
    let mean = |p: &[f64]| (0..n).map(|i| x(i) * p[i]).sum::<f64>();
    assert_abs_diff_eq!(mean(step.raw.p()) - mean(at.p()), dl, epsilon = dl * (h * h + dl));
}

#[test]
fn information_metric_matches_the_mass_tensor() {
    let sys = ParticleSystem::single(1, 1.0).unwrap().with_eta(1.0).unwrap().with_gamma(3.0).unwrap();
    let r = information_metric_check(&sys, 0.1).unwrap();
    assert!((r.gamma[0] / 1e3 - 1.0).abs() < 0.01, "{}", r.gamma[0]);
    assert!(r.max_relative_error < 0.01);

    let pair = ParticleSystem::new(vec![1.0, 2.0], vec![0.0, 0.0], 1)
        .unwrap()
        .with_eta(1.0)
        .unwrap()
        .with_gamma(3.0)
        .unwrap();
    let r = information_metric_check(&pair, 0.1).unwrap();
    assert!(r.max_relative_error < 0.01);
    assert!(r.max_off_diagonal < 1e-6);
    assert!((r.gamma[3] / r.gamma[0] - 2.0).abs() < 0.02);

    let slow = information_metric_check(&sys, 0.2).unwrap();
    let ratio = slow.gamma[0] / information_metric_check(&sys, 0.1).unwrap().gamma[0];
    assert!((ratio - 0.125).abs() < 0.00125, "{ratio}");
}
