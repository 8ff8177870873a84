use std::path::Path;

use microstates::cli::config::{ConcentrationConfig, ExtractConfig, EntropyConfig};
use microstates::cli::report::Report;
use microstates::cli::{main_with_args, EXIT_BUDGET, EXIT_CHECKS_FAILED, EXIT_CONFIG, EXIT_OK};
use microstates::extraction::{Proposal, ExtractionResult};
use microstates::words::StarMonomial;
use microstates::zones::{CenterSet, ConstraintMode, Zone};
use num_complex::Complex64;
use tempfile::TempDir;

fn run(args: &[&str], out: &Path) -> i32 {
    let mut all = vec!["microstates".to_string()];
    all.extend(args.iter().map(|s| s.to_string()));
    all.extend(["--out".to_string(), out.display().to_string()]);
    main_with_args(all)
}

fn write_config(dir: &TempDir, name: &str, value: &impl serde::Serialize) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.display().to_string()
}

fn small_extract() -> ExtractConfig {
    let mut c = ExtractConfig::default();
    c.extraction.cover.samples = 20_000;
    c.extraction.words = 2;
    c.schedule = vec![(1, 16), (2, 32)];
    c
}

#[test]
fn validate_passes_and_writes_reports() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["validate"], dir.path()), EXIT_OK);
    let report = Report::load(&dir.path().join("report.json")).unwrap();
    assert!(report.pass);
    assert_eq!(report.command, "validate");
    assert!(dir.path().join("tables/validate.csv").exists());
    assert!(dir.path().join("timing.json").exists());
}

#[test]
fn filter_selects_a_module() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["validate", "--filter", "zones"], dir.path()), EXIT_OK);
    let report = Report::load(&dir.path().join("report.json")).unwrap();
    assert!(!report.checks.is_empty());
    assert!(report.checks.iter().all(|c| c.name.starts_with("zones")));
}

#[test]
fn injected_violation_fails_with_its_name() {
    let dir = TempDir::new().unwrap();
    let code = run(&["validate", "--inject-violation", "moments.semicircle_matches_quadrature"], dir.path());
    assert_eq!(code, EXIT_CHECKS_FAILED);
    let report = Report::load(&dir.path().join("report.json")).unwrap();
    let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    assert_eq!(failed, ["moments.semicircle_matches_quadrature"]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["validate", "--inject-violation", "no.such.check"], dir.path()), EXIT_CONFIG);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"unexpected": true}"#).unwrap();
    assert_eq!(run(&["entropy", "--config", bad.to_str().unwrap()], dir.path()), EXIT_CONFIG);
    let wrong_version = EntropyConfig {
        schema_version: 99,
        ..EntropyConfig::default()
    };
    let path = write_config(&dir, "v.json", &wrong_version);
    assert_eq!(run(&["entropy", "--config", &path], dir.path()), EXIT_CONFIG);
    assert_eq!(run(&["entropy", "--config", "/nonexistent/config.json"], dir.path()), EXIT_CONFIG);
    assert_eq!(run(&["no-such-command"], dir.path()), EXIT_CONFIG);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let config = ConcentrationConfig {
        k_list: vec![4, 8],
        samples: 1000,
        reference_k: 8,
        reference_samples: 10,
        bootstrap: 200,
        ..ConcentrationConfig::default()
    };
    let path = write_config(&dir, "c.json", &config);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["concentration", "--config", &path, "--seed", "5"], &a);
    run(&["concentration", "--config", &path, "--seed", "5", "--threads", "2"], &b);
    for file in ["report.json", "tables/concentration.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let report = Report::load(&a.join("report.json")).unwrap();
    assert_eq!(report.config["run"]["seed"], 5);
}

#[test]
fn extraction_artifact_resumes_to_the_same_values() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "x.json", &small_extract());
    let first = dir.path().join("first");
    run(&["extract", "--config", &path], &first);
    let artifact = first.join("extraction.json");
    let original = ExtractionResult::from_json(&std::fs::read_to_string(&artifact).unwrap()).unwrap();
    assert_eq!(original.steps.len(), 2);

    let mut resumed = small_extract();
    resumed.resume = Some(artifact);
    let path = write_config(&dir, "r.json", &resumed);
    let second = dir.path().join("second");
    run(&["extract", "--config", &path], &second);
    let again = ExtractionResult::from_json(&std::fs::read_to_string(second.join("extraction.json")).unwrap()).unwrap();
    assert_eq!(again.values(), original.values());
}

#[test]
fn infeasible_zone_is_reported_at_the_first_word() {
    let dir = TempDir::new().unwrap();
    let mut config = small_extract();
    // No self-adjoint contraction has trace near 0.9i.
    config.zone = Zone::ball(1, 1.0)
        .unwrap()
        .with_constraint(
            StarMonomial::power(1, 1),
            CenterSet::disc(Complex64::new(0.0, 0.9), 0.05),
            ConstraintMode::Neighborhood,
        )
        .unwrap();
    config.reference = None;
    let path = write_config(&dir, "x.json", &config);
    assert_eq!(run(&["extract", "--config", &path], dir.path()), EXIT_CHECKS_FAILED);
    let report = Report::load(&dir.path().join("report.json")).unwrap();
    let check = report.check("extraction_complete").unwrap();
    assert!(!check.pass);
    assert!(check.detail.contains("word 1"), "{}", check.detail);
}

#[test]
fn exhausted_search_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let mut config = small_extract();
    config.selection.proposal = Proposal::UniformBall;
    config.selection.budget = 1;
    // Ball samples have tr x² near 1/2, outside 1/4 of the semicircle value.
    config.extraction.words = 4;
    config.extraction.cover.samples = 100_000;
    config.schedule = vec![(4, 64)];
    let path = write_config(&dir, "x.json", &config);
    assert_eq!(run(&["extract", "--config", &path], dir.path()), EXIT_BUDGET);
}

#[test]
fn csv_format_is_accepted() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["validate", "--filter", "words", "--format", "csv"], dir.path()), EXIT_OK);
}
