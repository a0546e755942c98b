use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mechlab::analysis::{fit_lpm, Model, RegressionSpec, TypePair};
use mechlab::sim::dataset::{read_csv, read_files};
use mechlab::sim::{run_experiment, ExperimentPlan, GridCell, PopulationSpec};
use mechlab::BuiltinMechanism;

fn mechlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn repo_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn show_mechanism_matches_golden_render() {
    for name in ["2x2-I", "2x2-E", "3x3-I", "3x3-E"] {
        let out = mechlab(&["show-mechanism", "--name", name]);
        assert!(out.status.success());
        let golden = std::fs::read_to_string(
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/render_{name}.txt")),
        )
        .unwrap();
        assert_eq!(stdout(&out), golden);
    }
}

#[test]
fn mechanism_files_render_like_builtins() {
    let out = mechlab(&["show-mechanism", "--file", path_str(&repo_file("configs/3x3-E.toml"))]);
    assert!(out.status.success(), "{}", stderr(&out));
    let builtin = stdout(&mechlab(&["show-mechanism", "--name", "3x3-E"]));
    let body = |s: &str| s.lines().skip(1).map(str::to_string).collect::<Vec<_>>();
    assert_eq!(body(&stdout(&out)), body(&builtin));

    let eq = mechlab(&["equilibria", "--file", path_str(&repo_file("configs/2x2-I.toml")), "--format", "csv"]);
    let builtin = mechlab(&["equilibria", "--name", "2x2-I", "--format", "csv"]);
    assert_eq!(stdout(&eq), stdout(&builtin));
}

#[test]
fn malformed_mechanism_file_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("malformed.toml");
    std::fs::write(&bad, "name = \"x\"\noutcomes = [\"a\"]\ninference = \"sometimes\"\n").unwrap();
    let out = mechlab(&["show-mechanism", "--file", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3, column 13"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_code_two() {
    assert_eq!(mechlab(&["verify-prop1", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(mechlab(&["show-mechanism"]).status.code(), Some(2));
    assert_eq!(mechlab(&["show-mechanism", "--name", "2x2-I", "--file", "x"]).status.code(), Some(2));
    assert_eq!(mechlab(&["equilibria", "--name", "2x2-I", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(mechlab(&["report", "--bogus"]).status.code(), Some(2));
    assert_eq!(mechlab(&["analyze", "--data", "x", "--out", "y", "--model", "nope"]).status.code(), Some(2));
    let help = stdout(&mechlab(&["simulate", "--help"]));
    for flag in ["--config", "--seed", "--out", "--threads"] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn unknown_mechanism_is_a_domain_failure() {
    let out = mechlab(&["show-mechanism", "--name", "4x4"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown mechanism"));
}

#[test]
fn equilibria_listing_flags() {
    let text = stdout(&mechlab(&["equilibria", "--name", "2x2-I"]));
    assert!(text.contains("worker1[B->A E->B] worker2[B->A E->B] [dominant-strategy]"));
    assert!(text.contains("worker1[B->B E->B] worker2[B->B E->B] [dominant-strategy]"));
    let text = stdout(&mechlab(&["equilibria", "--name", "3x3-E"]));
    assert!(text.contains("worker1[B->E E->E] worker2[B->E E->E] [ex-post only]"));
    assert!(text.contains("worker1[B->B E->E] worker2[B->B E->E] [dominant-strategy]"));
}

#[test]
fn verify_prop1_passes() {
    let out = mechlab(&["verify-prop1", "--trials", "200", "--seed", "7"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("seed: 7\n"));
    assert!(text.contains("PASS: 200/200 random trials passed, principal-worker instance passed"), "{text}");
}

#[test]
fn simulate_reference_preset_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("run.csv");
    let out = mechlab(&["simulate", "--config", path_str(&repo_file("configs/reference.toml")), "--out", path_str(&out_csv)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("seed: 0\n") && text.contains("sessions: 14\n") && text.contains("subjects: 159\n"), "{text}");
    let ds = read_files(&out_csv).unwrap();
    assert_eq!(ds.meta.sessions.len(), 14);
    assert_eq!(ds.meta.master_seed, Some(0));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[[sessions]]\nmechanism = \"2x2-E\"\nsession_sizes = [10]\n").unwrap();
    let out = mechlab(&["simulate", "--config", path_str(&bad), "--out", path_str(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("n_subjects=10"), "{}", stderr(&out));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn simulate_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: Option<&str>| {
        let p = dir.path().join(name);
        let mut args = vec!["simulate", "--seed", "11", "--out", path_str(&p)];
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        let out = mechlab(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        (std::fs::read(&p).unwrap(), std::fs::read(dir.path().join(format!("{name}.meta.toml"))).unwrap())
    };
    let a = run("a.csv", None);
    let b = run("b.csv", None);
    let one = run("one.csv", Some("1"));
    let eight = run("eight.csv", Some("8"));
    assert_eq!(a, b);
    assert_eq!(a, one);
    assert_eq!(a, eight);
}

#[test]
fn analyze_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(mechlab(&["simulate", "--seed", "2", "--out", path_str(&data)]).status.success());
    let out_dir = dir.path().join("results");
    let out = mechlab(&["analyze", "--data", path_str(&data), "--out", path_str(&out_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["regressions.csv", "regressions.txt", "rates.csv", "rates.txt", "histogram.csv", "rank_tests.csv", "rank_tests.txt"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let table = std::fs::read_to_string(out_dir.join("regressions.txt")).unwrap();
    for needle in ["VARIABLES", "2x2-E", "3x3-I", "3x3-E", "Constant", "Observations", "log likelihood", "*** p<0.01"] {
        assert!(table.contains(needle), "{needle} missing");
    }
    let csv = std::fs::read_to_string(out_dir.join("regressions.csv")).unwrap();
    assert!(csv.starts_with("model,term,coef,se,p,n_obs,n_clusters,r2,log_likelihood\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("eq-wo,")).count(), 6);

    let interval = mechlab(&[
        "analyze",
        "--data",
        path_str(&data),
        "--out",
        path_str(&dir.path().join("iv")),
        "--model",
        "eq-wo",
        "--censoring",
        "interval",
    ]);
    assert!(interval.status.success(), "{}", stderr(&interval));
}

#[test]
fn analyze_schema_violation_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(mechlab(&["simulate", "--seed", "2", "--out", path_str(&data)]).status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    let broken = text.replacen("lie_flag", "lying", 1);
    std::fs::write(&data, broken).unwrap();
    let out = mechlab(&["analyze", "--data", path_str(&data), "--out", path_str(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("lie_flag"), "{}", stderr(&out));

    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut fields: Vec<&str> = lines[1].split(',').collect();
    fields[6] = "Q";
    lines[1] = fields.join(",");
    std::fs::write(&data, lines.join("\n") + "\n").unwrap();
    let out = mechlab(&["analyze", "--data", path_str(&data), "--out", path_str(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("true_type"), "{}", stderr(&out));
}

#[test]
fn all_truthteller_data_gives_zero_mechanism_effects_on_truthful_equilibrium() {
    let plan = ExperimentPlan { population: PopulationSpec::truthtellers(), ..ExperimentPlan::calibrated(4) };
    let ds = run_experiment(&plan).unwrap();
    let fit = fit_lpm(&ds, &RegressionSpec::standard(Model::EqTruthful)).unwrap();
    for name in ["2x2-E", "3x3-I", "3x3-E"] {
        assert_eq!(fit.coef_of(name).unwrap(), 0.0, "{name}");
    }
    assert_eq!(fit.coef_of("Constant").unwrap(), 1.0);
}

#[test]
fn coordinators_with_two_beginners_leave_the_staffer_one() {
    let plan = ExperimentPlan {
        grid: vec![GridCell::new(BuiltinMechanism::DirectImplicit, &[12, 12, 12])],
        population: PopulationSpec::coordinators(),
        ..ExperimentPlan::calibrated(9)
    };
    let ds = run_experiment(&plan).unwrap();
    let text = mechlab::sim::dataset::to_csv_string(&ds).unwrap();
    let ds = read_csv(text.as_bytes()).unwrap();
    let bb: Vec<_> = ds.non_practice().filter(|r| TypePair::of(r.types()) == TypePair::TwoBeginners).collect();
    assert!(!bb.is_empty());
    let mean = bb.iter().map(|r| r.staffer.payoff as f64).sum::<f64>() / bb.len() as f64;
    assert_eq!(mean, 1.0);
}
