use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use swarm_synth::pipeline::{EvaluationSummary, StandaloneConfig};
use swarm_synth::TaskId;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_swarm-synth"));
    c.env_remove("SWARM_SYNTH_SEED").env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[track_caller]
fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SIM: [&str; 6] = ["--horizon", "20", "--arena-side", "8", "--robots", "5"];

#[test]
fn stepwise_pipeline_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);

    ok(&[
        "gen-data", "--task", "A", "--runs", "12", "--max-robots", "6", "--horizon", "20", "--arena-side", "8",
        "--validation-runs", "4", "--seed", "3", "--out", p(&d("data")),
    ]);
    for f in ["config.json", "dataset.csv", "events.csv", "vs1.csv", "vs2.csv", "vs3.csv"] {
        assert!(d("data").join(f).is_file(), "missing {f}");
    }

    ok(&[
        "train-model1", "--data", p(&d("data")), "--validation", p(&d("data").join("vs1.csv")),
        "--epochs", "5", "--lr", "1e-3", "--seed", "3", "--out", p(&d("model1.json")),
    ]);
    assert!(d("model1.history.csv").is_file());

    ok(&[
        "extract-sdes", "--model1", p(&d("model1.json")), "--explored-from", p(&d("data")),
        "--population", "20", "--generations", "5", "--out", p(&d("sdes.json")),
    ]);
    ok(&[
        "estimate-model2", "--events", p(&d("data")), "--convergence", p(&d("convergence.csv")),
        "--out", p(&d("model2.json")),
    ]);
    let conv = fs::read_to_string(d("convergence.csv")).unwrap();
    assert_eq!(conv.lines().next(), Some("batch,l1_change"));
    // one row per run that logged at least one event
    let rows = conv.lines().count() - 1;
    assert!((1..=12).contains(&rows), "{rows} convergence rows");

    ok(&[
        "optimize", "--model2", p(&d("model2.json")), "--sdes", p(&d("sdes.json")), "--epsilon", "0.05",
        "--population", "10", "--generations", "4", "--out", p(&d("policy.json")),
    ]);
    assert!(d("policy.history.csv").is_file());

    let text = ok(&[
        "verify", "--model2", p(&d("model2.json")), "--policy", p(&d("policy.json")), "--sdes", p(&d("sdes.json")),
        "--out", p(&d("verify")),
    ]);
    assert!(text.contains("P 2.2"));
    assert!(d("verify").join("verify.json").is_file());

    let run_dir = d("run");
    let policy = d("policy.json");
    let mut eval = vec!["evaluate", "--policy", p(&policy), "--runs", "3", "--out"];
    let opt_out = run_dir.join("optimized");
    eval.push(p(&opt_out));
    eval.extend(SIM);
    ok(&eval);
    let rnd_out = run_dir.join("random");
    let mut eval = vec!["evaluate", "--task", "A", "--runs", "3", "--out", p(&rnd_out)];
    eval.extend(SIM);
    ok(&eval);

    let listed = ok(&["report", "--run", p(&run_dir), "--format", "csv"]);
    assert_eq!(listed.lines().count(), 2);
    let boxplot = fs::read_to_string(run_dir.join("report").join("boxplot.csv")).unwrap();
    let lines: Vec<&str> = boxplot.lines().collect();
    assert_eq!(lines[0], "condition,n_runs,min,q1,median,q3,max");
    assert!(lines[1].starts_with("optimized,3,") && lines[2].starts_with("random,3,"));

    ok(&["report", "--run", p(&run_dir), "--format", "json", "--out", p(&d("json"))]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d("json").join("report.json")).unwrap()).unwrap();
    let summary = EvaluationSummary::read_dir(&opt_out).unwrap();
    let reported = json.to_string();
    assert!(reported.contains("optimized"));
    let median = json["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "optimized")
        .map(|c| c["summary"]["quartiles"]["median"].as_f64().unwrap())
        .unwrap();
    assert_eq!(median, summary.quartiles.median);
}

fn tiny_standalone() -> StandaloneConfig {
    let mut cfg = StandaloneConfig::desk(TaskId::A).with_seed(17);
    cfg.data.n_runs = 8;
    cfg.data.max_robots = 5;
    cfg.data.config = cfg.data.config.with_horizon(20.0);
    cfg.validation_runs = 3;
    cfg.train.epochs = 3;
    cfg.extract.ga.population_size = 10;
    cfg.extract.ga.generations = 3;
    cfg.optimize.population_size = 10;
    cfg.optimize.generations = 3;
    cfg.eval.n_runs = 2;
    cfg.eval.config = cfg.eval.config.with_robots(4).with_horizon(10.0);
    cfg.random_baseline = true;
    cfg
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn standalone_from_config_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.json");
    fs::write(&config, serde_json::to_string_pretty(&tiny_standalone()).unwrap()).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["standalone", "--config", p(&config), "--out", p(&a)]);
    ok(&["standalone", "--config", p(&config), "--out", p(&b)]);
    for f in [
        "config.json", "model1.json", "model2.json", "sdes.json", "policy.json", "verify.json", "history.csv",
        "eval/summary.csv", "eval/series.csv",
    ] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), fb.len());
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between identical runs");
    }

    ok(&["report", "--run", p(&a)]);
    let boxplot = fs::read_to_string(a.join("report").join("boxplot.csv")).unwrap();
    assert!(boxplot.contains("\neval,2,") && boxplot.contains("\neval_random,2,"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, env: Option<&str>, flag: Option<&str>| -> Vec<u8> {
        let out = dir.path().join(name);
        let mut args = vec!["gen-data", "--task", "A", "--runs", "3", "--min-robots", "4", "--max-robots", "6", "--horizon", "10"];
        args.extend(["--validation-runs", "0", "--out", p(&out)]);
        if let Some(s) = flag {
            args.extend(["--seed", s]);
        }
        let mut c = bin();
        c.args(&args);
        if let Some(s) = env {
            c.env("SWARM_SYNTH_SEED", s);
        }
        assert!(c.output().unwrap().status.success());
        fs::read(out.join("events.csv")).unwrap()
    };
    let from_env = gen("env", Some("5"), None);
    assert_eq!(from_env, gen("flag", None, Some("5")));
    assert_eq!(gen("flag_wins", Some("9"), Some("5")), from_env);
    assert_ne!(gen("other", Some("6"), None), from_env);
    assert_eq!(gen("default", None, None), gen("zero", None, Some("0")));

    let mut c = bin();
    c.args(["gen-data", "--runs", "1", "--out", p(&dir.path().join("bad"))]).env("SWARM_SYNTH_SEED", "abc");
    assert_eq!(c.output().unwrap().status.code(), Some(1));
}

#[test]
fn exit_codes_distinguish_usage_validation_and_stage_failures() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["standalone", "--help"]).status.code(), Some(0));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["evaluate", "--out"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = run(&["verify", "--model2", p(&missing), "--policy", p(&missing), "--sdes", p(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));

    let cfg = dir.path().join("c.json");
    fs::write(&cfg, serde_json::to_string(&tiny_standalone()).unwrap()).unwrap();
    let out = run(&["standalone", "--config", p(&cfg), "--sdes", "", "--out", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));

    let conflict = run(&["gen-data", "--config", p(&dir.path().join("data.json")), "--out", p(&dir.path().join("y"))]);
    assert_eq!(conflict.status.code(), Some(1));

    // a degenerate evaluation arena only fails once the evaluation stage runs
    let mut broken = tiny_standalone();
    broken.eval.arena = swarm_synth::datalog::ArenaSpec::Square { side: 0.0 };
    fs::write(&cfg, serde_json::to_string(&broken).unwrap()).unwrap();
    let staged = dir.path().join("staged");
    let out = run(&["standalone", "--config", p(&cfg), "--out", p(&staged)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("evaluate"));
    assert!(staged.join("policy.json").is_file());
}

#[test]
fn task_flag_must_agree_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("data.json");
    let opts = swarm_synth::datalog::DatasetOptions::for_config(swarm_synth::sim::TaskConfig::default_for(TaskId::A));
    fs::write(&cfg, serde_json::to_string(&opts).unwrap()).unwrap();
    let out = run(&["gen-data", "--config", p(&cfg), "--task", "C", "--runs", "1", "--out", p(&dir.path().join("z"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("task"));
}
