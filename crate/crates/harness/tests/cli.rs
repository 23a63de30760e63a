use qeopt_harness::config::ExperimentConfig;
use qeopt_harness::output::*;
use qeopt_harness::report::check_detail_consistency;
use qeopt_harness::runner::{self, RunRecord};
use qeopt_harness::seeds::{Ensemble, RunCoord};
use qeopt_harness::studies::{self, AggregateRow, DetailRow, GapRow, InstanceRow, OptimalRow, RunOptions, ScalingRow};
use qeopt_harness::HarnessError;
use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qeopt"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"
method = "qesa"
n = [3, 4]
instances = 3
repeats = 4
master_seed = 11
detail = true
[lengths]
values = [1, 3, 8, 20, 50]
[scaling]
instances = 2
repeats = 5
"#;

fn read_bytes(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names.iter().map(|n| std::fs::read(dir.join(n)).unwrap()).collect()
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let files = [AGGREGATE_FILE, INSTANCE_FILE, DETAIL_FILE, OPTIMAL_FILE, SCALING_FILE, LEDGER_FILE];
    let mut outputs = Vec::new();
    for workers in [1, 2, 5] {
        let dir = tmp.path().join(format!("w{workers}"));
        let mut opts = RunOptions::to_dir(&dir, "scaling");
        opts.workers = Some(workers);
        studies::scaling_study(&cfg, &opts).unwrap();
        outputs.push(read_bytes(&dir, &files));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn one_instance_one_repeat_one_step_costs_one_proposal() {
    let mut cfg = ExperimentConfig::from_toml("method = \"sa\"\nn = [5]\ninstances = 1\nrepeats = 1\n[lengths]\nvalues = [1]\n").unwrap();
    cfg.detail = true;
    let out = studies::probability_sweep(&cfg, &RunOptions::in_memory("t")).unwrap();
    assert_eq!(out.aggregate.len(), 1);
    assert_eq!(out.aggregate[0].proposals, 1);
    assert_eq!(out.details.len(), 1);
    assert_eq!(out.details[0].proposals, 1);
}

#[test]
fn proposal_accounting_matches_grid() {
    let cfg = ExperimentConfig::from_toml(
        r#"
method = "qept"
n = [4]
instances = 2
repeats = 3
[lengths]
values = [2, 7]
[tempering]
replicas = 3
quantum_replicas = [0, 2]
"#,
    )
    .unwrap();
    let out = studies::probability_sweep(&cfg, &RunOptions::in_memory("t")).unwrap();
    assert_eq!(out.aggregate.len(), 4);
    for row in &out.aggregate {
        assert_eq!(row.proposals, 2 * 3 * row.length * 3, "{row:?}");
        assert_eq!(row.runs, 6);
        assert_eq!(row.replicas, 3);
    }
}

#[test]
fn effort_columns_follow_the_formula() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let out = studies::effort_sweep(&cfg, &RunOptions::in_memory("t")).unwrap();
    for r in &out.aggregate {
        let p_s = r.successes as f64 / r.runs as f64;
        assert_eq!(r.p_s, p_s);
        let expect = if p_s >= 1.0 {
            1.0
        } else if p_s <= 0.0 {
            f64::INFINITY
        } else {
            ((1.0f64 - 0.99).ln() / (1.0 - p_s).ln()).max(1.0)
        };
        if expect.is_finite() {
            assert!((r.repeats_r - expect).abs() < 1e-12 * expect);
            assert!((r.effort - expect * r.length as f64).abs() < 1e-9 * r.effort);
        } else {
            assert!(r.effort.is_infinite());
        }
        assert!(r.effort_lower <= r.effort && r.effort <= r.effort_upper, "{r:?}");
    }
}

#[test]
fn resume_skips_completed_tasks_and_matches_fresh_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let a = tmp.path().join("a");
    let first = studies::effort_sweep(&cfg, &RunOptions::to_dir(&a, "sweep-effort")).unwrap();
    assert_eq!(first.tasks_resumed, 0);
    let before = read_bytes(&a, &[AGGREGATE_FILE, DETAIL_FILE]);

    // Drop the tail of the progress log as an interrupted run would.
    let log = a.join(PROGRESS_FILE);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let keep = lines.len() / 2;
    let mut torn = lines[..keep].join("\n");
    torn.push_str("\n{\"partial");
    std::fs::write(&log, torn).unwrap();

    let second = studies::effort_sweep(&cfg, &RunOptions::to_dir(&a, "sweep-effort")).unwrap();
    assert!(second.tasks_resumed > 0 && second.tasks_resumed < second.tasks_total);
    assert_eq!(before, read_bytes(&a, &[AGGREGATE_FILE, DETAIL_FILE]));

    let third = studies::effort_sweep(&cfg, &RunOptions::to_dir(&a, "sweep-effort")).unwrap();
    assert_eq!(third.tasks_resumed, third.tasks_total);

    let mut fresh = RunOptions::to_dir(&a, "sweep-effort");
    fresh.fresh = true;
    let fourth = studies::effort_sweep(&cfg, &fresh).unwrap();
    assert_eq!(fourth.tasks_resumed, 0);
    assert_eq!(before, read_bytes(&a, &[AGGREGATE_FILE, DETAIL_FILE]));
}

#[test]
fn progress_from_a_different_config_is_ignored() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    studies::effort_sweep(&cfg, &RunOptions::to_dir(tmp.path(), "s")).unwrap();
    let mut other = cfg.clone();
    other.master_seed += 1;
    let out = studies::effort_sweep(&other, &RunOptions::to_dir(tmp.path(), "s")).unwrap();
    assert_eq!(out.tasks_resumed, 0);
}

#[test]
fn tables_round_trip_and_reject_wrong_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let out = studies::scaling_study(&cfg, &RunOptions::to_dir(tmp.path(), "scaling")).unwrap();
    let d = tmp.path();
    let agg: Vec<AggregateRow> = read_table(&d.join(AGGREGATE_FILE), SWEEP_SCHEMA).unwrap();
    assert_eq!(agg, out.aggregate);
    let inst: Vec<InstanceRow> = read_table(&d.join(INSTANCE_FILE), INSTANCE_SCHEMA).unwrap();
    assert_eq!(inst, out.instances);
    let det: Vec<DetailRow> = read_table(&d.join(DETAIL_FILE), DETAIL_SCHEMA).unwrap();
    assert_eq!(det, out.details);
    let opt: Vec<OptimalRow> = read_table(&d.join(OPTIMAL_FILE), OPTIMAL_SCHEMA).unwrap();
    assert_eq!(opt, out.optimal);
    let sc: Vec<ScalingRow> = read_table(&d.join(SCALING_FILE), SCALING_SCHEMA).unwrap();
    assert_eq!(sc, out.scaling);

    let text = std::fs::read_to_string(d.join(AGGREGATE_FILE)).unwrap();
    assert!(text.starts_with(&format!("#schema={SWEEP_SCHEMA}\n#units=")));
    let bumped = text.replacen(SWEEP_SCHEMA, "qeopt-sweep/999", 1);
    std::fs::write(d.join("bumped.csv"), bumped).unwrap();
    let err = read_table::<AggregateRow>(&d.join("bumped.csv"), SWEEP_SCHEMA).unwrap_err();
    assert!(matches!(err, HarnessError::Schema(_)), "{err}");
    assert_eq!(err.exit_code(), 2);

    let manifest = Manifest::read(d).unwrap();
    assert_eq!(manifest.schema, MANIFEST_SCHEMA);
    assert_eq!(manifest.config_hash, cfg.hash());
    for f in &manifest.files {
        assert!(d.join(f).exists(), "{f}");
    }
    let report = qeopt_harness::report::report(d).unwrap();
    assert!(report.contains("scaling"));
}

#[test]
fn eval_instances_are_disjoint_from_tuning_instances() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let out = studies::scaling_study(&cfg, &RunOptions::in_memory("t")).unwrap();
    let seeds = |e: Ensemble| -> BTreeSet<u64> {
        out.ledger.iter().filter(|r| r.ensemble == e).map(|r| r.instance_seed).collect()
    };
    let tune = seeds(Ensemble::Tune);
    let eval = seeds(Ensemble::Eval);
    assert_eq!(tune.len(), 2 * 3);
    assert_eq!(eval.len(), 2 * 2);
    assert!(tune.is_disjoint(&eval));
    let keys: BTreeSet<&str> = out.ledger.iter().map(|r| r.stream_key.as_str()).collect();
    assert_eq!(keys.len(), out.ledger.len());
    for s in &out.scaling {
        assert_eq!(s.length, (s.ell_star.round() as u64).max(1));
        assert_eq!(s.runs, 2 * 5);
        assert!((s.effort_sigma - (s.effort_upper - s.effort_lower) / 4.0).abs() < 1e-9 * s.effort_upper.max(1.0));
    }
}

#[test]
fn ledger_coordinates_replay_detail_rows() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let out = studies::scaling_study(&cfg, &RunOptions::in_memory("t")).unwrap();
    assert_eq!(out.ledger.len(), out.details.len());
    for (row, d) in out.ledger.iter().zip(&out.details).step_by(7) {
        let coord = RunCoord {
            series: row.series.clone(),
            n: row.n,
            ensemble: row.ensemble,
            instance: row.instance,
            length: row.length,
            repeat: row.repeat,
        };
        let rec = runner::replay(&cfg, &coord).unwrap();
        assert_eq!(
            rec,
            RunRecord {
                repeat: d.repeat,
                success: d.success,
                best_energy: d.best_energy,
                final_energy: d.final_energy,
                proposals: d.proposals,
            }
        );
    }
    check_detail_consistency(&out.aggregate, &out.details).unwrap();
}

#[test]
fn gap_study_reports_uniform_and_quantum_rows() {
    let cfg = ExperimentConfig::from_toml(
        r#"
method = "mcmc"
n = [3, 4]
instances = 2
[gap]
kernels = ["local", "uniform", "quantum"]
temperatures = [0.5, 2.0]
"#,
    )
    .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let out = studies::gap_study(&cfg, &RunOptions::to_dir(tmp.path(), "gap")).unwrap();
    assert_eq!(out.gap.len(), 2 * 2 * 3 * 2);
    for r in &out.gap {
        assert!(r.delta > 0.0 && r.delta <= 1.0 + 1e-12, "{r:?}");
        if let (Some(lo), Some(hi)) = (r.tau_lower, r.tau_upper) {
            assert!(lo <= hi);
        }
    }
    for key in out.gap.chunks(2) {
        assert_eq!(key.iter().filter(|r| r.is_min).count(), 1);
        let min = key.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min);
        assert_eq!(key.iter().find(|r| r.is_min).unwrap().delta, min);
    }
    let back: Vec<GapRow> = read_table(&tmp.path().join(GAP_FILE), GAP_SCHEMA).unwrap();
    assert_eq!(back, out.gap);
}

#[test]
fn cli_cap_violation_keeps_partial_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "method = \"qesa\"\nn = [3, 15]\ninstances = 2\nrepeats = 2\n[lengths]\nvalues = [2, 4, 8, 16, 32]\n",
    );
    let out = tmp.path().join("out");
    let status = bin()
        .args(["sweep-effort", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    let agg: Vec<AggregateRow> = read_table(&out.join(AGGREGATE_FILE), SWEEP_SCHEMA).unwrap();
    assert!(!agg.is_empty());
    assert!(agg.iter().all(|r| r.n == 3));
    let manifest = Manifest::read(&out).unwrap();
    assert!(manifest.failures.iter().any(|f| f.kind == "cap"));
}

#[test]
fn cli_rejects_unknown_config_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "method = \"sa\"\nn = [4]\nrepeat = 3\n");
    let status = bin().args(["sweep-prob", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_gen_run_replay_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write_config(
        d,
        "method = \"sa\"\nn = [5]\ninstances = 2\nrepeats = 3\nmaster_seed = 4\ndetail = true\n[lengths]\nvalues = [1, 3, 9, 27, 81]\n",
    );
    let gen = bin()
        .args(["gen", "--n", "5", "--count", "2", "--seed", "4", "--out"])
        .arg(d.join("inst"))
        .output()
        .unwrap();
    assert!(gen.status.success());
    let files: Vec<String> = String::from_utf8(gen.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(files.len(), 2);

    let run_dir = d.join("run");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&run_dir)
        .arg("--instance")
        .args(&files)
        .status()
        .unwrap();
    assert!(status.success());
    let sweep_dir = d.join("sweep");
    let status = bin()
        .args(["sweep-effort", "--workers", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&sweep_dir)
        .status()
        .unwrap();
    assert!(status.success());
    // Files written by `gen` are the same instances the sweep derives.
    assert_eq!(
        std::fs::read(run_dir.join(AGGREGATE_FILE)).unwrap(),
        std::fs::read(sweep_dir.join(AGGREGATE_FILE)).unwrap()
    );

    let detail: Vec<DetailRow> = read_table(&sweep_dir.join(DETAIL_FILE), DETAIL_SCHEMA).unwrap();
    let d0 = &detail[4];
    let replay = bin()
        .args(["replay", "--series", "sa", "--n", "5", "--ensemble", "tune"])
        .args(["--instance", &d0.instance.to_string()])
        .args(["--length", &d0.length.to_string()])
        .args(["--repeat", &d0.repeat.to_string()])
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(replay.status.success());
    let rec: RunRecord = serde_json::from_slice(&replay.stdout).unwrap();
    assert_eq!(rec.best_energy, d0.best_energy);
    assert_eq!(rec.success, d0.success);

    let report = bin().arg("report").arg("--dir").arg(&sweep_dir).output().unwrap();
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("optimal length"), "{text}");
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(!cfg.series().is_empty());
            count += 1;
        }
    }
    assert!(count >= 5);
}
