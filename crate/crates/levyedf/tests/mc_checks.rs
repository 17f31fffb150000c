//! Monte Carlo cross-checks beyond the acceptance battery: confidence-band
//! coverage, the small-alpha behaviour of the cutoff variances, and a mesh
//! regime where the one-step bias tracks the `Delta^(1/8)` envelope exactly.

use levyedf::estimator::{confidence_band, estimate, CutoffPsi};
use levyedf::exec;
use levyedf::limitlaw::{bias_study, stats, BiasMethod, BiasStudyConfig};
use levyedf::models::{LevyModel, Region, RhoFunction};
use levyedf::pathsim::{
    CoefficientSpec, ObservationScheme, RngStream, SimOptions, Simulator,
};

#[test]
fn confidence_band_coverage() {
    // Pure-jump finite-activity paths; pointwise 90% band at t = 1 should
    // cover N_rho(1) for roughly 90% of replications.
    let model = LevyModel::exp_jump().unwrap();
    let rho = RhoFunction::poly(2.0).unwrap();
    let scheme = ObservationScheme::new(100_000, 0.01, 0.1).unwrap();
    let sim = Simulator::new(
        &model,
        CoefficientSpec::zero(),
        scheme,
        SimOptions { u_cut: Some(0.0), gaussian_small_jumps: false },
    )
    .unwrap();
    let truth = model.n_rho(&rho, 1.0).unwrap();
    let m = 1000u64;
    let root = RngStream::root(4_815_162_342);
    let hits: Vec<bool> = exec::map_indexed(m, |r| {
        let path = sim.simulate(root.replication(r)).unwrap();
        let ldf = estimate(&path, &rho);
        let (lo, hi) = confidence_band(&ldf, &rho, 1.0, 0.9).unwrap();
        lo <= truth && truth <= hi
    });
    let coverage = hits.iter().filter(|&&h| h).count() as f64 / m as f64;
    assert!(
        (0.87..=0.93).contains(&coverage),
        "coverage {coverage} outside [0.87, 0.93]"
    );
}

#[test]
fn bias_rate_is_exact_for_unit_activity_index() {
    // For a tempered stable density with beta = 1 and f = 1 and x^2, the
    // truncation loss is ~ 2 c v_n, so the one-step bias itself scales like
    // Delta^(1/8) and the ratio stabilizes without any saturation tricks.
    let model = LevyModel::stable_tempered(0.5, 1.0, 1.0).unwrap();
    let cfg = BiasStudyConfig {
        gamma: 0.5,
        deltas: (4..=14).map(|k| 2f64.powi(-k)).collect(),
        t_grid: (0..81).map(|i| -5.0 + 0.125 * i as f64).collect(),
        method: BiasMethod::ExactOneJump,
        seed: 0,
    };
    let rows = bias_study(&model, |x| (x * x).min(1.0), 1.0, &cfg).unwrap();
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let median = stats::quantile_sorted(&ratios, 0.5);
    for r in &ratios {
        assert!(
            r / median <= 1.1 && median / r <= 1.1,
            "ratio {r} strays from median {median}"
        );
        assert!((0.40..0.55).contains(r), "ratio {r} outside the frozen window");
    }
}

#[test]
fn cutoff_variances_increase_to_the_full_time_change() {
    // H_{rho_alpha}(t, t) with rho_alpha = rho psi_alpha is nondecreasing as
    // alpha decreases and is dominated by H_rho(t, t).
    let model = LevyModel::stable_tempered(0.5, 0.5, 1.0).unwrap();
    let rho = RhoFunction::poly(5.0).unwrap();
    let slack = 2.0 * model.quad_config().abs_tol;
    for t in [-0.5, 0.5, 1.0, 3.0, f64::INFINITY] {
        let h_full = model.time_change(&rho, t).unwrap();
        let mut prev = -slack;
        for alpha in [1.0, 0.5, 0.1] {
            let cutoff = CutoffPsi::new(alpha).unwrap();
            let h_alpha = model
                .integrate_weighted_with_breaks(
                    |x| {
                        let c = cutoff.large(x);
                        rho.squared(x) * c * c
                    },
                    Region::half_line(t),
                    &cutoff.breakpoints(),
                )
                .unwrap();
            assert!(
                h_alpha >= prev - slack,
                "H_alpha not monotone at t = {t}, alpha = {alpha}"
            );
            assert!(
                h_alpha <= h_full + slack,
                "H_alpha exceeds H at t = {t}, alpha = {alpha}"
            );
            prev = h_alpha;
        }
        // at alpha = 0.1 nearly all of the rho^2 mass is recovered
        if h_full > 1e-6 {
            assert!(prev > 0.5 * h_full, "alpha = 0.1 recovers too little at t = {t}");
        }
    }
}

#[test]
fn finite_activity_pipeline_tracks_the_limit() {
    // Full harness on the finite-activity model with a diffusion component:
    // marginal variances near H(t, t) and sup statistics compatible with the
    // sampled limit.
    use levyedf::limitlaw::{
        run_clt_experiment, ConditionsSpec, ExperimentConfig, GridSpec, SchemeSpec,
    };
    use levyedf::models::{ModelSpec, RhoSpec};
    let cfg = ExperimentConfig {
        model: ModelSpec::ExpJump,
        rho: RhoSpec::Poly { p: 5.0 },
        coeffs: CoefficientSpec::constant(0.05, 0.2).unwrap(),
        scheme: SchemeSpec { n: 20_000, delta_n: Some(0.01), y: None, gamma: 0.3 },
        replications: 300,
        grid: GridSpec::Quantiles { count: 21 },
        probe_ts: vec![1.0, 2.0],
        alphas: vec![1.0, 0.5],
        limit_paths: 3_000,
        seed: 1_234_567,
        conditions: Some(ConditionsSpec { beta: 0.5, zeta: 0.02, tau: 0.05 }),
        u_cut: None,
    };
    let report = run_clt_experiment(&cfg).unwrap();
    assert_eq!(report.conforming, Some(false));
    assert!(!report.degenerate);
    for t0 in [1.0, 2.0] {
        let stat = report
            .marginals
            .iter()
            .find(|s| s.t == t0)
            .expect("probe in grid");
        let ratio = stat.variance / stat.h;
        // M = 300: SE of the ratio ~ sqrt(2/299) ~ 8%
        assert!((ratio - 1.0).abs() < 0.25, "var ratio {ratio} at t0 = {t0}");
        assert!(stat.normality_p.unwrap() > 0.01);
        assert!(stat.mean.abs() < 4.0 * (stat.h / 300.0f64).sqrt() + 0.05);
    }
    assert!(report.sup_ks.p_value > 0.01, "sup KS p = {}", report.sup_ks.p_value);
}

#[test]
fn jump_times_strictly_increase_within_intervals() {
    let model = LevyModel::exp_jump().unwrap();
    let scheme = ObservationScheme::new(2_000, 0.5, 0.1).unwrap();
    let sim = Simulator::new(
        &model,
        CoefficientSpec::zero(),
        scheme,
        SimOptions { u_cut: Some(0.0), gaussian_small_jumps: false },
    )
    .unwrap();
    let path = sim.simulate(RngStream::root(99)).unwrap();
    assert!(path.jumps().len() > 500);
    for pair in path.jumps().windows(2) {
        if pair[0].interval == pair[1].interval {
            assert!(pair[0].time < pair[1].time);
        }
        let i = pair[1].interval as f64;
        let dt = scheme.delta_n();
        assert!(pair[1].time > i * dt && pair[1].time <= (i + 1.0) * dt);
    }
    // every logged jump clears the cutoff
    assert!(path.jumps().iter().all(|j| j.size.abs() > path.meta().u_cut));
}

#[test]
fn truncated_levy_increment_mean_matches_restricted_first_moment() {
    // E[L_Delta] = Delta * integral of x over {|x| > v_n}; one-sided model.
    let model = LevyModel::exp_jump().unwrap();
    let scheme = ObservationScheme::new(200_000, 0.5, 1.0 / 0.5f64.powf(0.125)).unwrap();
    assert!((scheme.v_n() - 1.0).abs() < 1e-12);
    let sim = levyedf::pathsim::truncated_levy_simulator(&model, scheme).unwrap();
    let path = sim.simulate(RngStream::root(7)).unwrap();
    let mean =
        path.increments().iter().sum::<f64>() / path.increments().len() as f64;
    let first_moment = model
        .integrate_weighted(|x| x, Region::abs_above(scheme.v_n()))
        .unwrap();
    let expected = scheme.delta_n() * first_moment;
    // var per increment ~ Delta * second restricted moment
    let second = model
        .integrate_weighted(|x| x * x, Region::abs_above(scheme.v_n()))
        .unwrap();
    let se = (scheme.delta_n() * second / path.increments().len() as f64).sqrt();
    assert!(
        (mean - expected).abs() < 3.0 * se,
        "mean {mean} vs expected {expected} (se {se})"
    );
}
