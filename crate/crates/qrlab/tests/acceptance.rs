//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Every tolerance is pinned in code here; nothing is deferred to later
//! calibration.

use qr_core::divergence::{
    divergence_profile, fit_growth, Classification, DivergenceParams, PairStrategy,
};
use qr_core::path::check_qg;
use qr_core::redirect::{build_ray, redirect_case1, redirect_sweep, RaySpec, SweepOptions};
use qr_core::{grow_ball, parse_group_spec, DistanceOracle, GroupSpec};
use qrlab::tables;

const BUDGET: usize = 2_000_000;
/// Fitted log-log exponent admitted as linear growth.
const EXPONENT_TOLERANCE: f64 = 1.25;
/// Allowed spread of measured multiplicative constants across a sweep.
const SWEEP_SPREAD: f64 = 1.25;

fn spec(text: &str) -> GroupSpec {
    parse_group_spec(text).unwrap()
}

fn closed(text: &str) -> DistanceOracle {
    DistanceOracle::closed_form(spec(text)).unwrap()
}

#[test]
fn criterion_1_ball_closed_forms() {
    let z2 = spec("z^2");
    for r in 0..=20u32 {
        let ball = grow_ball(&z2, r, BUDGET).unwrap();
        let expected = 2 * (r as usize) * (r as usize) + 2 * (r as usize) + 1;
        assert_eq!(ball.len(), expected, "z^2 ball size at r = {r}");
    }
    let free2 = spec("free:2");
    let ball = grow_ball(&free2, 8, BUDGET).unwrap();
    for r in 1..=8u32 {
        assert_eq!(ball.sphere(r).len(), 4 * 3usize.pow(r - 1), "free:2 sphere at r = {r}");
    }
    println!("criterion 1 PASS: |B_r| = 2r^2+2r+1 on z^2 (r <= 20), |S_r| = 4*3^(r-1) on free:2 (r <= 8)");
}

struct ProfileRun {
    family: &'static str,
    profile: qr_core::divergence::Profile,
    fit: Option<qr_core::divergence::GrowthFit>,
}

fn profile_z2() -> ProfileRun {
    let oracle = closed("z^2");
    let params = DivergenceParams::canonical(PairStrategy::AllSpherePairs);
    let profile = divergence_profile(&oracle, &[4, 8, 12, 16, 20, 24], &params, 96, BUDGET).unwrap();
    let fit = fit_growth(&profile.values()).ok();
    ProfileRun { family: "z^2", profile, fit }
}

fn profile_sampled(family: &'static str) -> ProfileRun {
    let spec = spec(family);
    let oracle = DistanceOracle::grown(&spec, 8, BUDGET).unwrap();
    let params = DivergenceParams::canonical(PairStrategy::Sample { count: 200, seed: 42 });
    let profile = divergence_profile(&oracle, &[4, 5, 6, 7, 8], &params, 32, BUDGET).unwrap();
    let fit = fit_growth(&profile.values()).ok();
    ProfileRun { family, profile, fit }
}

fn profile_free2() -> ProfileRun {
    let oracle = closed("free:2");
    let params = DivergenceParams::canonical(PairStrategy::AllSpherePairs);
    let profile = divergence_profile(&oracle, &[4, 8], &params, 32, BUDGET).unwrap();
    let fit = fit_growth(&profile.values()).ok();
    ProfileRun { family: "free:2", profile, fit }
}

#[test]
fn criterion_2_divergence_dichotomy() {
    let mut failures = Vec::new();

    for run in [profile_z2(), profile_sampled("heis"), profile_sampled("sol:2,1,1,1")] {
        let fit = run.fit.as_ref().expect("fit available");
        let exponent = fit.exponent.unwrap_or(f64::NAN);
        let ok = fit.classification == Classification::Linear && exponent <= EXPONENT_TOLERANCE;
        println!(
            "criterion 2 [{}]: classification={} exponent={exponent:.4} (tolerance {EXPONENT_TOLERANCE}) -> {}",
            run.family,
            fit.classification,
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failures.push(format!(
                "{}: classification {} with exponent {exponent:.4}",
                run.family, fit.classification
            ));
        }
    }

    let free2 = profile_free2();
    let fit = free2.fit.as_ref().expect("fit available");
    // delta r - gamma >= 1 first holds at r = 6, so of the profiled radii
    // r = 4 stays connected and r = 8 must disconnect.
    let r4_finite = free2.profile.points[0].best.value.finite().is_some();
    let r8_disconnected = free2.profile.points[1].best.value.is_disconnected();
    let ok = fit.classification == Classification::DisconnectedAtScale && r4_finite && r8_disconnected;
    println!(
        "criterion 2 [free:2]: classification={} r4_finite={r4_finite} r8_disconnected={r8_disconnected} -> {}",
        fit.classification,
        if ok { "PASS" } else { "FAIL" }
    );
    if !ok {
        failures.push(format!("free:2 classified {}", fit.classification));
    }

    assert!(failures.is_empty(), "criterion 2 FAIL: {}", failures.join("; "));
    println!("criterion 2 PASS: divergence dichotomy at desk scale");
}

#[test]
fn criterion_3_projection_surgery_bound() {
    for family in ["z^2", "free:2"] {
        let summary = qr_core::trials::projection_trials(&closed(family), 200, 7, &[0.0, 2.0]);
        assert_eq!(summary.attempted, 200, "{family}: trial count");
        assert!(
            summary.passed(),
            "criterion 3 FAIL [{family}]: {:?}",
            summary.first_failure
        );
        println!(
            "criterion 3 [{family}]: 200 trials pass (3, Q) for Q in {{0, 2}}, max measured q {:.4}",
            summary.max_q
        );
    }
    println!("criterion 3 PASS: projection surgery bound");
}

#[test]
fn criterion_4_shorten_path_contract() {
    let summary = qr_core::trials::shorten_trials(&closed("z^2"), 100, 11);
    assert_eq!(summary.attempted, 100);
    assert!(summary.passed(), "criterion 4 FAIL: {:?}", summary.first_failure);
    assert!(summary.max_q.is_finite());
    println!(
        "criterion 4 PASS: 100 shortenings keep endpoints, length and the rho*r neighborhood; max L {:.4}",
        summary.max_q
    );
}

#[test]
fn criterion_5_annulus_cross_ratio() {
    let summary = qr_core::trials::annulus_trials(&closed("z^2"), 100, 13);
    assert_eq!(summary.attempted, 100);
    assert!(summary.passed(), "criterion 5 FAIL: {:?}", summary.first_failure);
    println!("criterion 5 PASS: 100 annulus concatenations respect the cross-pair ratio bound");
}

#[test]
fn criterion_6_redirect11_bound() {
    let oracle = closed("z^2");
    let beta = build_ray(&oracle, &RaySpec::PeriodicWord("xy".into()), 96).unwrap();
    let mut checked = 0;
    for gamma_word in ["x", "y"] {
        let gamma = build_ray(&oracle, &RaySpec::PeriodicWord(gamma_word.into()), 96).unwrap();
        assert_eq!(gamma.report.q, 1.0, "axis rays are geodesics (q = 1)");
        for r_n in [8u32, 16, 32] {
            let out = redirect_case1(&oracle, &gamma.path, &beta.path, r_n, 0.75, 0.0).unwrap();
            let check = check_qg(&out.path, 9.0, 0.0, &oracle).unwrap();
            assert!(
                check.passed(),
                "criterion 6 FAIL [{gamma_word}, r_n={r_n}]: measured {} at {:?}",
                check.report().q,
                check.report().witness
            );
            assert!(
                out.coincidence_radius as f64 >= 0.25 * r_n as f64,
                "criterion 6 FAIL [{gamma_word}, r_n={r_n}]: coincidence radius {}",
                out.coincidence_radius
            );
            checked += 1;
        }
    }
    println!("criterion 6 PASS: {checked} instances pass (9q, 0) with coincidence radius >= r_n/4");
}

fn z2_sweep() -> qr_core::redirect::SweepOutcome {
    let oracle = closed("z^2");
    redirect_sweep(
        &oracle,
        &RaySpec::PeriodicWord("x".into()),
        &RaySpec::PeriodicWord("y".into()),
        &[36, 72, 144],
        &SweepOptions::default(),
    )
    .unwrap()
}

#[test]
fn criterion_7_redirect_sweep_bounded() {
    let out = z2_sweep();
    assert!(out.verdict.bounded, "criterion 7 FAIL: verdict {:?}", out.verdict);
    assert!(
        out.verdict.max_q <= SWEEP_SPREAD * out.verdict.min_q,
        "criterion 7 FAIL: q spread [{}, {}]",
        out.verdict.min_q,
        out.verdict.max_q
    );
    let c = out.verdict.c_used;
    for report in &out.reports {
        let s = report.s;
        let t_radius = (35 * s as u64 / 72) as usize;
        assert!(
            report.coincidence_prefix >= t_radius,
            "criterion 7 FAIL: s={s} coincides only through {}",
            report.coincidence_prefix
        );
        // The final path runs along alpha = the x-axis through the prefix.
        for i in 0..=t_radius {
            assert_eq!(
                report.final_path.get(i).encode(),
                format!("{i};0"),
                "s={s}: prefix identity"
            );
        }
        // And along beta = the y-axis from the landing index.
        let e_idx = ((1.0 + c) * s as f64).floor() as usize;
        for k in 0..report.final_path.len_vertices() - report.landing_index {
            assert_eq!(
                report.final_path.get(report.landing_index + k).encode(),
                format!("0;{}", e_idx + k),
                "s={s}: tail identity"
            );
        }
    }
    println!(
        "criterion 7 PASS: verdict {} with q in [{:.4}, {:.4}] over s = 36, 72, 144 (C = {:.2})",
        out.verdict.label(),
        out.verdict.min_q,
        out.verdict.max_q,
        c
    );
}

#[test]
fn criterion_8_tree_negative_control() {
    let oracle = closed("free:2");
    let err = redirect_sweep(
        &oracle,
        &RaySpec::PeriodicWord("a".into()),
        &RaySpec::PeriodicWord("b".into()),
        &[8, 16],
        &SweepOptions::default(),
    )
    .unwrap_err();
    assert_eq!(err.s, Some(8), "failure is tagged with the first radius");
    match err.source {
        qr_core::redirect::RedirectError::DivergencePathNotFound { info, .. } => {
            assert!(info.proven, "tree separation is proven, not a budget artifact");
        }
        other => panic!("criterion 8 FAIL: expected a divergence-path failure, got {other}"),
    }
    println!("criterion 8 PASS: free:2 sweep fails at the divergence-path step with a proven disconnect");
}

#[test]
fn criterion_9_determinism() {
    let csv_of = |run: &ProfileRun| {
        tables::divergence_csv(&spec(run.family), &run.profile).unwrap()
    };
    for make in [profile_z2 as fn() -> ProfileRun, || profile_sampled("heis"), || profile_sampled("sol:2,1,1,1"), profile_free2 as fn() -> ProfileRun] {
        let a = csv_of(&make());
        let b = csv_of(&make());
        assert_eq!(a.into_bytes(), b.into_bytes(), "criterion 9 FAIL: profile CSVs differ");
    }
    let z2 = spec("z^2");
    let s1 = z2_sweep();
    let s2 = z2_sweep();
    let c1 = tables::redirect_csv(&z2, &s1.reports, &s1.verdict).unwrap();
    let c2 = tables::redirect_csv(&z2, &s2.reports, &s2.verdict).unwrap();
    assert_eq!(c1.into_bytes(), c2.into_bytes(), "criterion 9 FAIL: sweep CSVs differ");
    println!("criterion 9 PASS: profile and sweep CSVs are byte-identical across reruns");
}
