use bidcraft::environments::{BudgetRegime, EnvKind, EnvironmentSpec, Pattern};
use bidcraft::harness::*;

fn small_sweep() -> SweepConfig {
    SweepConfig {
        patterns: vec![Pattern::Sinusoidal],
        alphas: vec![0.3, 0.7],
        horizons: vec![200, 400],
        policies: vec![PolicySpec::new(PolicyKind::ArOmd), PolicySpec::new(PolicyKind::Oracle)],
        runs: 2,
        base_seed: 5,
        output_path: None,
        timing: false,
        beta: 2.0 / 3.0,
    }
}

#[test]
fn results_csv_round_trips() {
    let out = run_sweep(&small_sweep(), Some(1), None).unwrap();
    assert!(out.failures.is_empty());
    assert_eq!(out.rows.len(), 2 * 2 * 2 * 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    write_results_csv(&out.rows, std::fs::File::create(&path).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER.join(","));
    let back = read_results_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, out.rows);
    for row in back.iter().filter(|r| r.policy == "oracle") {
        assert_eq!(row.final_regret_expected, 0.0);
        assert_eq!(row.wall_ms, 0.0);
    }
}

#[test]
fn sweep_config_json_names_bad_fields() {
    let err = serde_json::from_str::<SweepConfig>(
        r#"{"patterns": ["constant"], "alphas": [0.5], "horizons": [10], "policies": [], "speed": 1}"#,
    )
    .unwrap_err();
    assert!(err.to_string().contains("speed"));
    let mut config = small_sweep();
    config.alphas = vec![0.5, -0.1];
    let err = config.validate().unwrap_err();
    assert!(err.is_config());
    assert!(err.to_string().contains("alphas[1]"), "{err}");
}

#[test]
fn trace_csv_matches_header_and_rounds() {
    let env = EnvironmentSpec::for_pattern(Pattern::Linear, 300, 0.5, 3);
    let trace = run_episode(&PolicySpec::new(PolicyKind::ArProd), &env).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    trace.save_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
    assert_eq!(lines.count(), 300);
    assert_eq!(trace.metadata.batch_starts.as_ref().unwrap()[0], 0);
    assert!(trace.final_regret_expected() >= -1e-9);
}

#[test]
fn oracle_cannot_play_the_pacing_market() {
    let env = EnvironmentSpec::budget_pacing(Pattern::Constant, BudgetRegime::Sufficient, 100, 0.5, 1);
    let err = run_episode(&PolicySpec::new(PolicyKind::Oracle), &env).unwrap_err();
    assert!(err.is_config(), "{err}");
}

#[test]
fn pacing_episode_conserves_budget() {
    let env = EnvironmentSpec::budget_pacing(Pattern::Sinusoidal, BudgetRegime::Insufficient, 800, 0.5, 9);
    let ep = run_pacing_episode(&PolicySpec::new(PolicyKind::Hedge), &env).unwrap();
    assert!(ep.budget_conserved());
    assert!(ep.total_spent > 0.0);
    assert_eq!(ep.trace.len(), 800);
}

#[test]
fn lower_bound_instances_meet_their_budgets() {
    let vt = LowerBoundInstance::Variation {
        horizon: 2000,
        variation: 20.0,
    };
    let trace = run_episode(&PolicySpec::new(PolicyKind::Oracle), &vt.environment(4)).unwrap();
    assert!(trace.measured_variation() <= 20.0 + 1e-9);
    assert_eq!(trace.final_regret_expected(), 0.0);
    let lt = LowerBoundInstance::Switching {
        horizon: 2000,
        switches: 40,
    };
    let env = lt.environment(4);
    assert_eq!(env.kind, EnvKind::LowerBoundLt);
    let trace = run_episode(&PolicySpec::new(PolicyKind::Hedge), &env).unwrap();
    assert!(trace.measured_switches() <= 40);
    assert_eq!(lt.bound(), 5.0);
}

#[test]
fn slopes_recover_a_known_power_law() {
    let rows: Vec<ResultRow> = [1000usize, 2000, 4000, 8000]
        .iter()
        .flat_map(|&t| {
            (0..3).map(move |run| ResultRow {
                pattern: "constant".into(),
                alpha: 0.5,
                horizon: t,
                policy: "synthetic".into(),
                seed: run,
                final_regret_expected: 3.0 * (t as f64).powf(0.75),
                final_regret_realized: 0.0,
                variation_measured: 0.0,
                switches_measured: 0,
                wall_ms: 0.0,
            })
        })
        .collect();
    let fits = slope_reports(&rows, SlopeMode::MeanThenLog);
    assert_eq!(fits.len(), 1);
    assert!((fits[0].slope - 0.75).abs() < 1e-12);
    assert!((fits[0].intercept - 3f64.ln()).abs() < 1e-9);
}
