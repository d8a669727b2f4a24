mod common;

use common::seeded;
use fuyau_core::error::ProblemError;
use fuyau_core::geometry::{build_grid, random_field, ScalarField};
use fuyau_core::hessian::{sigma, Endomorphism};
use fuyau_core::operator::{extract_lrho, residual, ProblemSpec};
use fuyau_core::solver::{continuity_march, MarchConfig};
use fuyau_core::verify::{
    ibp_identity, ibp_mismatch, maclaurin_field_check, manufacture, reference_profile,
    reference_rho, reference_state, scale_sweep, sigma2_rewrite_check, stokes_invariant,
    third_order_contraction_check, torsion_curvature_check, ColumnRule, ManufacturedCase,
    SweepFamily, SweepRow, SweepTable, SWEEP_FACTOR,
};
use rand::Rng;

fn manufactured(n: usize, res: usize, k: usize, gamma: f64) -> ManufacturedCase {
    let grid = build_grid(n, res).unwrap();
    // n = 3 needs a larger normalization for the reference state to be admissible.
    let star = reference_state(&grid, if n == 2 { 100.0 } else { 1000.0 }, 0.01);
    manufacture(&star, k, gamma, 1.0, reference_rho(&grid, 0.002)).unwrap()
}

#[test]
fn residual_always_integrates_to_zero() {
    let mut rng = seeded(1000);
    let grid = build_grid(2, 8).unwrap();
    let mu = random_field(&grid, 2, 5.0, &mut rng);
    let problem = ProblemSpec::new(1, 2.0, 0.8, reference_rho(&grid, 0.3), mu, 50.0).unwrap();
    let coeffs = extract_lrho(&problem.rho);
    for _ in 0..1000 {
        let amp = rng.gen_range(0.01..1.0);
        let shift = rng.gen_range(0.0..6.0);
        let u = random_field(&grid, 3, amp, &mut rng).map(|v| v + shift);
        let t = rng.gen_range(0.0..=1.0);
        let r = residual(&u, t, &problem, &coeffs);
        let stokes = stokes_invariant(&u, t, &problem, &coeffs);
        assert!(stokes <= 1e-10 * (1.0 + r.sup_norm()), "{stokes:e}");
    }
}

#[test]
fn integration_by_parts_holds_at_the_solution() {
    for (n, res, k, gamma) in [(2, 8, 1, 2.0), (3, 8, 1, 2.0), (3, 8, 2, 3.5)] {
        let case = manufactured(n, res, k, gamma);
        let kg = k as f64 + gamma;
        for p in [kg + 1.0, kg + 2.0, 2.0 * kg] {
            let (lhs, rhs) = ibp_identity(&case.u_star, p, &case.problem, &case.coeffs).unwrap();
            assert!(
                ibp_mismatch(lhs, rhs) <= 1e-8,
                "n={n} k={k} p={p}: {lhs} vs {rhs}"
            );
            assert!(lhs.abs() > 0.0);
        }
        let profile = reference_profile(case.u_star.grid());
        let off = case.u_star.zip_map(&profile, |u, f| u + 0.05 * f * f);
        let (lhs, rhs) = ibp_identity(&off, kg + 1.0, &case.problem, &case.coeffs).unwrap();
        assert!(ibp_mismatch(lhs, rhs) > 1e-3, "negative control passed");
        match ibp_identity(&case.u_star, gamma, &case.problem, &case.coeffs) {
            Err(ProblemError::ExponentTooSmall { .. }) => {}
            other => panic!("expected a rejected exponent, got {other:?}"),
        }
    }
}

#[test]
fn manufactured_problems_are_solved_by_their_state() {
    let case = manufactured(2, 8, 1, 2.0);
    assert!(case.margins.admissible());
    let mass = case.u_star.map(f64::exp).integrate();
    assert_eq!(case.problem.scale, mass);
    assert!(case.mu_mean.abs() <= 1e-10 * (1.0 + case.problem.mu.sup_norm()));
    let r = residual(&case.u_star, 1.0, &case.problem, &case.coeffs);
    assert!(r.sup_norm() <= 1e-9 * (1.0 + case.problem.mu.sup_norm()));
    let (u, _) = continuity_march(
        &case.problem,
        &case.coeffs,
        &case.constants,
        &MarchConfig::default(),
    )
    .unwrap();
    assert!(u.zip_map(&case.u_star, |a, b| a - b).sup_norm() <= 1e-7);

    let grid = case.u_star.grid();
    let steep = reference_state(grid, 1.0, 3.0);
    match manufacture(&steep, 1, 2.0, 1.0, reference_rho(grid, 0.002)) {
        Err(ProblemError::InadmissibleState { .. }) => {}
        other => panic!(
            "expected an inadmissible state, got {:?}",
            other.map(|_| ())
        ),
    }
}

#[test]
fn reference_profile_is_alias_free() {
    for (n, res, k) in [(2, 8, 1), (3, 8, 1), (3, 8, 2)] {
        let grid = build_grid(n, res).unwrap();
        let phi = reference_profile(&grid);
        assert!(phi.integrate().abs() < 1e-15);
        let hess = phi.complex_hessian();
        let s = grid.scale();
        let mean = hess
            .values()
            .iter()
            .map(|h| sigma(k + 1, &Endomorphism::conformal(h, 0.0, s)))
            .fold(0.0, |a, b| a + b)
            / grid.len() as f64;
        assert!(mean.abs() < 1e-12, "n={n} k={k}: {mean:e}");
    }
}

#[test]
fn sigma2_rewrite_holds_only_at_solutions() {
    for (n, res) in [(2, 8), (3, 6)] {
        let case = manufactured(n, res, 1, 2.0);
        let d = sigma2_rewrite_check(&case.u_star, &case.problem, &case.coeffs).unwrap();
        assert!(d <= 1e-7, "n={n}: {d:e}");
        let profile = reference_profile(case.u_star.grid());
        let off = case.u_star.zip_map(&profile, |u, f| u + 0.05 * f);
        assert!(sigma2_rewrite_check(&off, &case.problem, &case.coeffs).unwrap() > 1e-3);
    }
    let case = manufactured(3, 6, 2, 3.0);
    match sigma2_rewrite_check(&case.u_star, &case.problem, &case.coeffs) {
        Err(ProblemError::RequiresStandardCase { k: 2, .. }) => {}
        other => panic!("expected a rejected case, got {other:?}"),
    }
}

#[test]
fn conformal_torsion_and_curvature_match_closed_forms() {
    for (n, res) in [(2, 8), (3, 8)] {
        let grid = build_grid(n, res).unwrap();
        for amp in [0.005, 0.01, 0.02] {
            // Both sides differentiate e^u spectrally, so the state has to stay resolved.
            let u = reference_state(&grid, 10.0, amp);
            let d = torsion_curvature_check(&u);
            assert!(d <= 1e-9, "n={n} amp={amp}: {d:e}");
        }
    }
}

#[test]
fn pointwise_inequalities_hold_on_random_states() {
    let mut rng = seeded(22);
    for amp in [0.01, 0.8] {
        let grid = build_grid(2, 8).unwrap();
        let u = random_field(&grid, 2, amp, &mut rng);
        for (report, orders) in [
            (third_order_contraction_check(&u), 1),
            (maclaurin_field_check(&u), 2),
        ] {
            assert_eq!(report.evaluations, grid.len() * orders);
            assert_eq!(report.violations, 0);
            assert!(report.max_ratio <= 1.0 + 1e-12 && report.max_ratio > 0.0);
        }
    }
    let grid = build_grid(3, 6).unwrap();
    let u = random_field(&grid, 2, 0.8, &mut rng);
    let maclaurin = maclaurin_field_check(&u);
    assert_eq!(maclaurin.evaluations, grid.len() * 3);
    assert_eq!(maclaurin.violations, 0);
}

#[test]
fn third_order_bound_holds_at_solutions_but_not_everywhere_in_three_dimensions() {
    let case = manufactured(3, 6, 1, 2.0);
    let at_solution = third_order_contraction_check(&case.u_star);
    assert_eq!(at_solution.evaluations, case.u_star.values().len() * 2);
    assert_eq!(at_solution.violations, 0);
    // For n ≥ 3 the diagonal cross terms Σ_{p≠q} ∇_i u_{p̄p} ∇_ī u_{q̄q} are not
    // dominated by |∇∇̄∇u|²; with ∇_i u_{q̄p} = δ_pq and ℓ = 2 the ratio is n − 1.
    let u = random_field(case.u_star.grid(), 2, 0.8, &mut seeded(22));
    let off = third_order_contraction_check(&u);
    assert!(off.violations > 0);
    assert!(
        off.max_ratio > 1.5 && off.max_ratio <= 2.0 + 1e-9,
        "{}",
        off.max_ratio
    );
}

#[test]
fn manufactured_sweep_keeps_scaled_estimates_bounded() {
    let grid = build_grid(2, 8).unwrap();
    let family = SweepFamily::Manufactured {
        profile: reference_profile(&grid),
        amplitude: 0.01,
        k: 1,
        gamma: 2.0,
        alpha: 1.0,
        rho: reference_rho(&grid, 0.002),
    };
    let scales = [100.0, 400.0, 1600.0];
    let table = scale_sweep(&family, &scales, &MarchConfig::default(), false).unwrap();
    assert_eq!(
        table.rows.iter().map(|r| r.scale).collect::<Vec<_>>(),
        scales
    );
    for row in &table.rows {
        assert!(row.recovery_error.unwrap() <= 1e-7);
        assert_eq!(row.wall_ms, 0);
        assert_eq!(row.sandwich_violations, 0);
    }
    let summary = table.summary();
    assert!(summary.pass, "{summary:?}");
    let csv = table.to_csv();
    assert_eq!(csv.lines().next(), Some(SweepTable::CSV_HEADER));
    assert_eq!(csv.lines().count(), 1 + scales.len());
}

fn row(scale: f64, c2: f64, c3: f64) -> SweepRow {
    SweepRow {
        scale,
        sup_eu_over_m: 1.0,
        m_over_inf_eu: 1.0,
        c1_diag: 1.0,
        c2_diag: c2,
        c3_diag: c3,
        newton_total: 1,
        wall_ms: 0,
        recovery_error: None,
        sandwich_violations: 0,
    }
}

#[test]
fn column_rules_judge_by_ratio() {
    // Rows out of order: the summary sorts by M before picking the first value.
    let decaying = SweepTable {
        rows: vec![row(4.0, 1.0, 0.01), row(1.0, 1.0, 1.0), row(2.0, 1.0, 0.1)],
    };
    let s = decaying.summary();
    let c3 = s.columns.iter().find(|c| c.name == "c3_diag").unwrap();
    assert_eq!(c3.rule, ColumnRule::Bounded);
    assert_eq!(c3.ratio, 1.0);
    assert!(s.pass);

    let growing = SweepTable {
        rows: vec![row(1.0, 1.0, 0.1), row(2.0, 1.0, 1.0)],
    };
    let c3 = growing
        .summary()
        .columns
        .into_iter()
        .find(|c| c.name == "c3_diag")
        .unwrap();
    assert!((c3.ratio - 10.0).abs() < 1e-12 && !c3.pass);

    let spread = SweepTable {
        rows: vec![
            row(1.0, 1.0, 1.0),
            row(2.0, 1.0 / (SWEEP_FACTOR + 0.5), 1.0),
        ],
    };
    let s = spread.summary();
    let c2 = s.columns.iter().find(|c| c.name == "c2_diag").unwrap();
    assert_eq!(c2.rule, ColumnRule::Stable);
    assert!(!c2.pass && !s.pass);

    let zero = SweepTable {
        rows: vec![row(1.0, 0.0, 0.0), row(2.0, 0.0, 0.0)],
    };
    assert!(zero.summary().pass);

    let mut bad = row(2.0, 1.0, 1.0);
    bad.sandwich_violations = 3;
    let s = SweepTable {
        rows: vec![row(1.0, 1.0, 1.0), bad],
    }
    .summary();
    assert_eq!(s.sandwich_violations, 3);
    assert!(!s.pass);
}

#[test]
fn constant_states_have_trivial_identities() {
    let grid = build_grid(2, 8).unwrap();
    let u = ScalarField::constant(&grid, 1.5);
    assert!(torsion_curvature_check(&u) <= 1e-12);
    assert_eq!(maclaurin_field_check(&u).violations, 0);
}
