use proptest::prelude::*;

use refstd_core::lcm::{lcm_hci_estimate, population_moments, LcmEstimate};
use refstd_core::methods::{
    crs_and, crs_or, decomposition, discrepant_analysis, igs, unified_igs_equivalence, MethodId,
};
use refstd_core::oracle::OutcomeTable;
use refstd_core::population::{
    admissible_bounds, is_jointly_feasible, joint_distribution, validate, youden, BoundsContext,
    PopulationSpec,
};
use refstd_core::sweep::{self, ExportFormat, SweepAxis, SweepParam};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Accuracies and prevalence with J_X > 0, no dependence.
fn hci_spec() -> impl Strategy<Value = PopulationSpec> {
    (
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.001..0.999f64,
    )
        .prop_filter_map(
            "J_X must be positive",
            |(se_x, u, se_z1, sp_z1, se_z2, sp_z2, eta)| {
                let sp_x = 1.0 - se_x + u * se_x;
                let spec = PopulationSpec {
                    se_x,
                    sp_x,
                    se_z1,
                    sp_z1,
                    se_z2,
                    sp_z2,
                    eta,
                    xi: 0.0,
                    eps: 0.0,
                };
                (youden(se_x, sp_x).value() > 1e-9).then_some(spec)
            },
        )
}

/// Any valid spec, covariances placed uniformly inside their box.
fn valid_spec() -> impl Strategy<Value = PopulationSpec> {
    (hci_spec(), 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(spec, s, t)| {
        let b = admissible_bounds(&spec, BoundsContext::BasicJoint).unwrap();
        spec.with_covariances(
            b.xi_lo + s * (b.xi_hi - b.xi_lo),
            b.eps_lo + t * (b.eps_hi - b.eps_lo),
        )
    })
}

/// Interior specs keep every reference probability away from 0 and 1.
fn interior_spec() -> impl Strategy<Value = PopulationSpec> {
    valid_spec().prop_filter("interior", |s| {
        [s.se_x, s.sp_x, s.se_z1, s.sp_z1, s.se_z2, s.sp_z2]
            .iter()
            .all(|v| *v > 0.01 && *v < 0.99)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn joint_table_is_a_distribution(spec in valid_spec()) {
        prop_assert!(validate(&spec).is_empty(), "{}", validate(&spec));
        let joint = joint_distribution(&spec).unwrap();
        prop_assert!(close(joint.total(), 1.0, 1e-12));
        for (_, p) in joint.iter() {
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&p));
        }
        prop_assert!(close(joint.probability(|o| o.y), spec.eta, 1e-12));
    }

    #[test]
    fn marginals_recover_inputs(spec in valid_spec()) {
        let t = OutcomeTable::new(&spec).unwrap();
        let cond = |event: &dyn Fn(&refstd_core::population::Outcome) -> bool, y: bool| {
            t.probability(|o| o.y == y && event(o)) / t.probability(|o| o.y == y)
        };
        prop_assert!(close(cond(&|o| o.x, true), spec.se_x, 1e-12));
        prop_assert!(close(cond(&|o| !o.x, false), spec.sp_x, 1e-12));
        prop_assert!(close(cond(&|o| o.z1, true), spec.se_z1, 1e-12));
        prop_assert!(close(cond(&|o| !o.z1, false), spec.sp_z1, 1e-12));
        prop_assert!(close(cond(&|o| o.z2, true), spec.se_z2, 1e-12));
        prop_assert!(close(cond(&|o| !o.z2, false), spec.sp_z2, 1e-12));
        prop_assert!(close(t.conditional_covariance(|o| o.x, |o| o.z1, true), spec.xi, 1e-12));
        prop_assert!(close(t.conditional_covariance(|o| o.x, |o| o.z1, false), spec.eps, 1e-12));
        for y in [true, false] {
            prop_assert!(close(t.conditional_covariance(|o| o.x, |o| o.z2, y), 0.0, 1e-12));
            prop_assert!(close(t.conditional_covariance(|o| o.z1, |o| o.z2, y), 0.0, 1e-12));
        }
    }

    #[test]
    fn box_bounds_are_exactly_the_nonnegative_tables(spec in hci_spec()) {
        let b = admissible_bounds(&spec, BoundsContext::BasicJoint).unwrap();
        prop_assert!(b.xi_lo <= 0.0 && 0.0 <= b.xi_hi);
        prop_assert!(b.eps_lo <= 0.0 && 0.0 <= b.eps_hi);
        let min_cell = |xi: f64, eps: f64| {
            refstd_core::population::JointDistribution::from_spec_unchecked(&spec.with_covariances(xi, eps)).min_cell()
        };
        for (xi, eps) in [(b.xi_lo, 0.0), (b.xi_hi, 0.0), (0.0, b.eps_lo), (0.0, b.eps_hi)] {
            prop_assert!(min_cell(xi, eps).abs() < 1e-12, "boundary ({xi}, {eps})");
        }
        for (xi, eps) in [
            (b.xi_lo - 1e-9, 0.0),
            (b.xi_hi + 1e-9, 0.0),
            (0.0, b.eps_lo - 1e-9),
            (0.0, b.eps_hi + 1e-9),
        ] {
            prop_assert!(min_cell(xi, eps) < 0.0, "outside ({xi}, {eps})");
        }
    }

    #[test]
    fn youden_is_monotone_and_antisymmetric(se in 0.0..=1.0f64, sp in 0.0..=1.0f64, d in 0.0..0.1f64) {
        let j = youden(se, sp).value();
        prop_assert!(close(youden(1.0 - se, 1.0 - sp).value(), -j, 1e-15));
        prop_assert!(youden((se + d).min(1.0), sp).value() >= j);
        prop_assert!(youden(se, (sp + d).min(1.0)).value() >= j);
    }

    #[test]
    fn deviations_are_estimate_minus_truth(spec in interior_spec()) {
        for r in [igs(&spec), crs_and(&spec), crs_or(&spec), discrepant_analysis(&spec)] {
            let r = r.unwrap();
            prop_assert!(close(r.delta_se, r.se - spec.se_x, 1e-12));
            prop_assert!(close(r.delta_sp, r.sp - spec.sp_x, 1e-12));
            prop_assert_eq!(r.hci_assumed, spec.is_hci());
        }
    }

    #[test]
    fn unified_reformulation_matches(spec in interior_spec()) {
        for (method, direct) in [
            (MethodId::CrsAnd, crs_and(&spec).unwrap()),
            (MethodId::CrsOr, crs_or(&spec).unwrap()),
            (MethodId::Da, discrepant_analysis(&spec).unwrap()),
        ] {
            let u = unified_igs_equivalence(&spec, method).unwrap();
            prop_assert!(close(u.delta_se, direct.delta_se, 1e-12));
            prop_assert!(close(u.delta_sp, direct.delta_sp, 1e-12));
        }
    }

    #[test]
    fn independent_tests_never_look_better(spec in hci_spec()) {
        for method in [MethodId::Igs, MethodId::CrsAnd, MethodId::CrsOr] {
            if let Ok(r) = refstd_core::evaluate(&spec, method) {
                prop_assert!(r.delta_se <= 0.0 && r.delta_sp <= 0.0, "{method}: {r:?}");
            }
        }
    }

    #[test]
    fn dependence_term_orders_the_deviations(spec in interior_spec()) {
        for method in [MethodId::Igs, MethodId::CrsAnd, MethodId::CrsOr] {
            let d = decomposition(&spec, method).unwrap();
            let dep = refstd_core::evaluate(&spec, method).unwrap();
            let hci = refstd_core::evaluate(&spec.hci(), method).unwrap();
            prop_assert!(close(dep.delta_se - hci.delta_se, d.se_dependence_term(), 1e-12));
            prop_assert!(close(dep.delta_sp - hci.delta_sp, d.sp_dependence_term(), 1e-12));
            // the ordering and threshold columns, away from exact ties
            if d.dependence.abs() > 1e-9 {
                prop_assert_eq!(dep.delta_se < hci.delta_se, d.dependence < 0.0);
                prop_assert_eq!(dep.delta_sp < hci.delta_sp, d.dependence < 0.0);
            }
            if (d.dependence - d.se_overestimation_threshold()).abs() > 1e-9 {
                prop_assert_eq!(dep.delta_se > 0.0, d.dependence > d.se_overestimation_threshold());
            }
            if (d.dependence - d.sp_overestimation_threshold()).abs() > 1e-9 {
                prop_assert_eq!(dep.delta_sp > 0.0, d.dependence > d.sp_overestimation_threshold());
            }
        }
    }

    #[test]
    fn latent_class_branch_and_clamping(spec in valid_spec()) {
        let Ok(m) = population_moments(&spec) else { return Ok(()) };
        let Ok(e) = lcm_hci_estimate(&m) else { return Ok(()) };
        check_estimate(&e)?;
    }

    #[test]
    fn half_plane_skips_form_one_tail(spec in hci_spec(), points in 5usize..40) {
        let b = admissible_bounds(&spec, BoundsContext::BasicJoint).unwrap();
        prop_assume!(b.xi_hi - b.xi_lo > 1e-6);
        let axis = SweepAxis::new(SweepParam::Xi, b.xi_lo, b.xi_hi, points);
        for context in [BoundsContext::LcmHci, BoundsContext::LcmHciBar] {
            let inside: Vec<bool> = axis
                .values()
                .map(|xi| is_jointly_feasible(&spec.with_covariances(xi, 0.0), context))
                .collect();
            let changes = inside.windows(2).filter(|w| w[0] != w[1]).count();
            prop_assert!(changes <= 1, "{context:?}: {inside:?}");
            match context {
                BoundsContext::LcmHci => prop_assert!(inside.last() == Some(&true) || changes == 0),
                _ => prop_assert!(inside.first() == Some(&true) || changes == 0),
            }
        }
    }
}

fn check_estimate(e: &LcmEstimate) -> Result<(), TestCaseError> {
    let r = &e.raw;
    prop_assert!(r.eta_hat <= 0.5);
    for (se, sp) in [(r.se1, r.sp1), (r.se2, r.sp2), (r.se3, r.sp3)] {
        prop_assert!(se >= 1.0 - sp - 1e-12);
    }
    let raws = [r.se1, r.se2, r.se3, r.sp1, r.sp2, r.sp3, r.eta_hat];
    let outside = raws.iter().any(|v| !(0.0..=1.0).contains(v));
    prop_assert_eq!(e.clamped, outside);
    for v in [e.se1, e.se2, e.se3, e.sp1, e.sp2, e.sp3, e.eta_hat] {
        prop_assert!((0.0..=1.0).contains(&v));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sweep_exports_round_trip(spec in valid_spec(), points in 2usize..12, param in 0usize..7) {
        let parameter = SweepParam::ALL[param];
        let (lo, hi) = if parameter.is_covariance() { (-0.1, 0.1) } else { (0.05, 0.95) };
        let axis = SweepAxis::new(parameter, lo, hi, points);
        let r = sweep::sweep(&spec, &axis, &MethodId::ALL).unwrap();
        let json = sweep::export(&r, ExportFormat::Json);
        let back = sweep::import(&json).unwrap();
        prop_assert_eq!(&back, &sweep::SweepData::Full(r.clone()));
        let csv = sweep::export(&r, ExportFormat::Csv);
        let via_json = sweep::import(&csv).unwrap().export(ExportFormat::Json);
        prop_assert_eq!(sweep::import(&via_json).unwrap().export(ExportFormat::Csv), csv);
    }
}

#[test]
fn deviation_zero_conditions() {
    let base = PopulationSpec::baseline();
    let with = |f: &dyn Fn(&mut PopulationSpec)| {
        let mut s = base;
        f(&mut s);
        s
    };
    assert_eq!(igs(&with(&|s| s.sp_z1 = 1.0)).unwrap().delta_se, 0.0);
    assert_eq!(igs(&with(&|s| s.se_z1 = 1.0)).unwrap().delta_sp, 0.0);
    assert_eq!(crs_and(&with(&|s| s.sp_z1 = 1.0)).unwrap().delta_se, 0.0);
    assert_eq!(crs_and(&with(&|s| s.sp_z2 = 1.0)).unwrap().delta_se, 0.0);
    assert_eq!(
        crs_and(&with(&|s| {
            s.se_z1 = 1.0;
            s.se_z2 = 1.0
        }))
        .unwrap()
        .delta_sp,
        0.0
    );
    assert_eq!(
        crs_or(&with(&|s| {
            s.sp_z1 = 1.0;
            s.sp_z2 = 1.0
        }))
        .unwrap()
        .delta_se,
        0.0
    );
    assert_eq!(crs_or(&with(&|s| s.se_z1 = 1.0)).unwrap().delta_sp, 0.0);
    assert_eq!(crs_or(&with(&|s| s.se_z2 = 1.0)).unwrap().delta_sp, 0.0);
}

#[test]
fn discrepant_analysis_is_not_additive_in_the_covariances() {
    let base = PopulationSpec::baseline();
    let hci = discrepant_analysis(&base).unwrap().delta_se;
    let shift = |t: f64| {
        discrepant_analysis(&base.with_covariances(t, 0.0))
            .unwrap()
            .delta_se
            - hci
    };
    let (a, b, c) = (shift(0.0), shift(0.02), shift(0.04));
    let curvature = a - 2.0 * b + c;
    assert!(curvature.abs() > 1e-6, "second difference {curvature}");
}
