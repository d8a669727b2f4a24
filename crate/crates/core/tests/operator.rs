mod common;

use common::{closed_form_eigenvalues, problem_with_rho, random_rho, seeded};
use fuyau_core::geometry::{
    build_grid, random_field, wedge_density_at, ComplexField, HermitianField, ScalarField,
};
use fuyau_core::hessian::upsilon_margin;
use fuyau_core::linalg::{Mat, C64};
use fuyau_core::operator::{
    adjoint_apply, chi_form, compute_constants, extract_lrho, f_tensor, linearize_apply, residual,
    sandwich_check, scalar_g_form_check, ProblemSpec,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn fd_mismatch(n: usize, res: usize, k: usize, seed: u64) -> f64 {
    let g = build_grid(n, res).unwrap();
    let mut rng = seeded(seed);
    let problem = problem_with_rho(&g, k, 50.0, 0.01);
    let coeffs = extract_lrho(&problem.rho);
    let u = random_field(&g, 1, 0.02, &mut rng).map(|v| v + 50f64.ln());
    let h = random_field(&g, 1, 1.0, &mut rng);
    let t = 0.7;
    let eps = 1e-6;
    let plus = residual(&u.add_scaled(&h, eps), t, &problem, &coeffs);
    let minus = residual(&u.add_scaled(&h, -eps), t, &problem, &coeffs);
    let fd = plus.zip_map(&minus, |a, b| (a - b) / (2.0 * eps));
    let lin = linearize_apply(&u, t, &h, &problem, &coeffs).map(|v| v * n as f64);
    lin.zip_map(&fd, |a, b| a - b).sup_norm() / fd.sup_norm()
}

#[test]
fn jacobian_matches_finite_differences_in_two_dimensions() {
    for seed in 0..5 {
        let e = fd_mismatch(2, 8, 1, seed);
        assert!(e < 1e-6, "relative mismatch {e:e}");
    }
}

#[test]
fn jacobian_matches_finite_differences_in_three_dimensions() {
    for k in 1..=2 {
        let e = fd_mismatch(3, 4, k, 11 + k as u64);
        assert!(e < 1e-6, "k = {k}: relative mismatch {e:e}");
    }
}

// Band limits keep `T_k(i∂∂̄u)·ψ` alias-free, so the discrete divergence of the Newton tensor vanishes.
#[test]
fn adjoint_pairs_with_linearization() {
    let g = build_grid(2, 8).unwrap();
    let mut rng = seeded(3);
    let problem = problem_with_rho(&g, 1, 20.0, 0.01);
    let coeffs = extract_lrho(&problem.rho);
    let u = random_field(&g, 1, 0.05, &mut rng).map(|v| v + 20f64.ln());
    for _ in 0..5 {
        let h = random_field(&g, 2, 1.0, &mut rng);
        let psi = random_field(&g, 2, 1.0, &mut rng);
        let lh = linearize_apply(&u, 0.4, &h, &problem, &coeffs);
        let ls = adjoint_apply(&u, 0.4, &psi, &problem, &coeffs);
        let a = psi.zip_map(&lh, |x, y| x * y).integrate();
        let b = h.zip_map(&ls, |x, y| x * y).integrate();
        assert!(
            (a - b).abs() <= 1e-8 * (a.abs() + b.abs()),
            "{a:e} vs {b:e}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residual_integrates_to_zero(seed in any::<u64>(), t in 0.0f64..1.0, k in 1usize..=1) {
        let g = build_grid(2, 8).unwrap();
        let mut rng = seeded(seed);
        let problem = problem_with_rho(&g, k, 10.0, 0.01);
        let coeffs = extract_lrho(&problem.rho);
        let u = random_field(&g, 3, 0.5, &mut rng);
        let r = residual(&u, t, &problem, &coeffs);
        prop_assert!(r.integrate().abs() <= 1e-10 * (1.0 + r.sup_norm()));
    }

    #[test]
    fn linearization_integrates_to_zero(seed in any::<u64>()) {
        let g = build_grid(2, 8).unwrap();
        let mut rng = seeded(seed);
        let problem = problem_with_rho(&g, 1, 10.0, 0.01);
        let coeffs = extract_lrho(&problem.rho);
        let u = random_field(&g, 2, 0.1, &mut rng).map(|v| v + 10f64.ln());
        let h = random_field(&g, 3, 1.0, &mut rng);
        let l = linearize_apply(&u, 0.5, &h, &problem, &coeffs);
        prop_assert!(l.integrate().abs() <= 1e-10 * (1.0 + l.sup_norm()));
    }
}

#[test]
fn constant_state_has_constant_free_residual() {
    let g = build_grid(2, 8).unwrap();
    let problem = problem_with_rho(&g, 1, 100.0, 0.0);
    let coeffs = extract_lrho(&problem.rho);
    let u = ScalarField::constant(&g, 100f64.ln());
    assert!(residual(&u, 1.0, &problem, &coeffs).sup_norm() < 1e-9);
}

/// `n i∂∂̄(fρ) ∧ ω̂^{n−2} / ω̂ⁿ` summed term by term over the (2,2)-form components.
fn lrho_by_forms(rho: &HermitianField, f: &ScalarField) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.dim();
    let s = grid.scale();
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    for j in 0..n {
        for k in 0..n {
            let prod: Vec<C64> = f
                .values()
                .iter()
                .zip(rho.values())
                .map(|(&v, m)| m[(j, k)] * v)
                .collect();
            let prod = ComplexField::new(grid.clone(), prod);
            for p in 0..n {
                for q in 0..n {
                    let w = wedge_density_at(&[Mat::unit(n, p, q), Mat::unit(n, j, k)], n - 2, s)
                        * n as f64;
                    let d = prod.partial_z(p).partial_zbar(q);
                    for (o, v) in out.iter_mut().zip(d.values()) {
                        *o += w * v;
                    }
                }
            }
        }
    }
    assert!(out.iter().all(|z| z.im.abs() < 1e-9 * (1.0 + z.re.abs())));
    out.into_iter().map(|z| z.re).collect()
}

#[test]
fn lrho_coefficients_reproduce_the_form_definition() {
    let mut rng = seeded(40);
    for (n, res) in [(2, 8), (3, 6)] {
        let grid = build_grid(n, res).unwrap();
        let rho = random_rho(&grid, 1, 0.5, &mut rng);
        let coeffs = extract_lrho(&rho);
        assert!(coeffs.a.max_hermitian_defect() < 1e-13);
        let s = grid.scale();
        let constants = compute_constants(
            &ProblemSpec::new(1, 2.0, 1.0, rho.clone(), ScalarField::zeros(&grid), 10.0).unwrap(),
            &coeffs,
        );
        for m in coeffs.a.values() {
            let ev = m.scale(s).hermitian_eigenvalues();
            assert!(
                ev[0] >= -constants.lambda * (1.0 + 1e-12)
                    && ev[n - 1] <= constants.lambda * (1.0 + 1e-12)
            );
        }
        for _ in 0..if n == 2 { 20 } else { 4 } {
            let f = random_field(&grid, 1, 1.0, &mut rng);
            let oracle = lrho_by_forms(&rho, &f);
            let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for lf in [coeffs.apply_coefficients(&f), coeffs.apply(&f)] {
                let err = lf
                    .values()
                    .iter()
                    .zip(&oracle)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(err <= 1e-9 * scale, "n={n}: {err:e} of {scale:e}");
            }
        }
    }
}

#[test]
fn constant_rho_has_no_lower_order_terms() {
    let grid = build_grid(3, 4).unwrap();
    let m = common::random_hermitian(3, &mut seeded(2));
    let coeffs = extract_lrho(&HermitianField::constant(&grid, m));
    assert!(coeffs.b.iter().all(|b| b.sup_norm() < 1e-13));
    assert!(coeffs.c.sup_norm() < 1e-13);
    let a0 = *coeffs.a.at(0);
    assert!(coeffs
        .a
        .values()
        .iter()
        .all(|a| (*a - a0).max_abs() < 1e-13));
    let zero = extract_lrho(&HermitianField::zeros(&grid));
    assert!(zero.is_zero() && zero.a.sup_norm() == 0.0 && zero.c.sup_norm() == 0.0);
}

#[test]
fn constants_follow_their_defining_formulas() {
    let grid = build_grid(2, 8).unwrap();
    let mu = random_field(&grid, 1, 3.0, &mut seeded(9));
    let problem =
        ProblemSpec::new(1, 2.0, 1.0, HermitianField::zeros(&grid), mu.clone(), 10.0).unwrap();
    let k = compute_constants(&problem, &extract_lrho(&problem.rho));
    assert_eq!(k.lambda, 0.0);
    assert_eq!(k.gamma_prime, 1.0);
    assert_eq!(k.tau, 2f64.powi(-7));
    assert!((k.theta - 1.0 / (2.0 * k.c1 - 1.0)).abs() <= 1e-15 * k.theta);
    let c1 = (2.0 * (k.c_x + 1.0) * 3.0).powi(2) * 2f64.powi(4);
    assert!((k.c1 - c1).abs() <= 1e-12 * c1);
    let expected = 1f64.min((k.theta / (2.0 * k.c_x * mu.sup_norm())).powf(2.0));
    assert!((k.delta - expected).abs() <= 1e-12 * expected);
    assert_eq!(k.delta_gate, 1.0);
    assert_eq!(k.c_x, k.c_poincare.max(k.c_sobolev));
}

#[test]
fn f_tensor_sandwich_against_pointwise_eigensolves() {
    let mut rng = seeded(13);
    for (n, res, k) in [(2, 8, 1), (3, 4, 2)] {
        let grid = build_grid(n, res).unwrap();
        let problem = problem_with_rho(&grid, k, 1e3, 0.01);
        let coeffs = extract_lrho(&problem.rho);
        let constants = compute_constants(&problem, &coeffs);
        let u = random_field(&grid, 1, 0.01, &mut rng).map(|v| v + 1e3f64.ln());
        let hess = u.complex_hessian();
        assert!(upsilon_margin(&u, &hess, &problem, &constants).admissible());
        let f = f_tensor(&u, 0.8, &problem, &coeffs);
        assert!(f.max_hermitian_defect() < 1e-14);
        let report = sandwich_check(&u, &f);
        let s = grid.scale();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (v, m) in u.values().iter().zip(f.values()) {
            // Eigenvalues of F relative to g^{pq̄} = δ/(e^u s).
            for e in closed_form_eigenvalues(&m.scale(v.exp() * s)) {
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
        assert!(
            lo >= 1.0 - 1.0 / 64.0 && hi <= 1.0 + 1.0 / 64.0,
            "{lo} {hi}"
        );
        assert!(report.holds());
        let gap = (report.min_ratio - lo)
            .abs()
            .max((report.max_ratio - hi).abs());
        assert!(gap < 1e-10, "{gap:e}");
    }
    let grid = build_grid(2, 4).unwrap();
    let problem = problem_with_rho(&grid, 1, 1e8, 0.0);
    let coeffs = extract_lrho(&problem.rho);
    let u = ScalarField::constant(&grid, 1e8f64.ln());
    let f = f_tensor(&u, 1.0, &problem, &coeffs);
    let g = 1.0 / (1e8 * grid.scale());
    assert!(f
        .values()
        .iter()
        .all(|m| (*m - Mat::identity(2).scale(g)).max_abs() < 1e-14 * g));
}

#[test]
fn chi_margin_tracks_admissibility() {
    let grid = build_grid(2, 8).unwrap();
    let problem = problem_with_rho(&grid, 1, 1.0, 0.0);
    let coeffs = extract_lrho(&problem.rho);
    let constants = compute_constants(&problem, &coeffs);
    let flat = ScalarField::zeros(&grid);
    assert!((chi_form(&flat, 1.0, &problem, &coeffs).margin - 1.0).abs() < 1e-12);
    let profile = ScalarField::from_fn(&grid, |x| (2.0 * PI * x[0]).cos());
    let mut flipped = false;
    for step in 0..40 {
        let amp = 0.002 * 1.25f64.powi(step);
        let u = profile.map(|v| amp * v);
        let m2 = upsilon_margin(&u, &u.complex_hessian(), &problem, &constants).m2;
        let margin = chi_form(&u, 1.0, &problem, &coeffs).margin;
        if m2 > 0.0 {
            assert!(margin >= 0.5, "amp {amp}: margin {margin}");
        }
        if margin < 0.0 {
            assert!(m2 < 0.0);
            flipped = true;
        }
    }
    assert!(flipped, "crafted states never left the positive cone");
}

#[test]
fn g_form_rewrite_agrees_with_the_residual() {
    let mut rng = seeded(17);
    // The two sides differ by the Nyquist-band content of the exponentials, so states stay small.
    for (n, res, k, amp) in [(2, 24, 1, 0.05), (3, 8, 1, 5e-5), (3, 8, 2, 5e-5)] {
        let grid = build_grid(n, res).unwrap();
        let base = problem_with_rho(&grid, k, 30.0, 0.01);
        let mu = random_field(&grid, 1, 5.0, &mut rng);
        let problem = ProblemSpec::new(k, base.gamma, -0.7, base.rho.clone(), mu, 30.0).unwrap();
        let coeffs = extract_lrho(&problem.rho);
        for _ in 0..3 {
            let u = random_field(&grid, 1, amp, &mut rng).map(|v| v + 30f64.ln());
            let d = scalar_g_form_check(&u, &problem, &coeffs);
            assert!(d <= 1e-9, "n={n} k={k}: {d:e}");
        }
        assert!(
            scalar_g_form_check(&ScalarField::constant(&grid, 2.0), &problem, &coeffs) <= 1e-12
        );
    }
}
