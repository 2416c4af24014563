use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

/// Runs the binary from inside `cwd` with the data dir pinned to `data`.
fn dynabo(cwd: &Path, data: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynabo"))
        .args(args)
        .current_dir(cwd)
        .env("DYNABO_DATA_DIR", data)
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

struct Dirs {
    cwd: tempfile::TempDir,
    data: tempfile::TempDir,
}

impl Dirs {
    fn new() -> Self {
        Self {
            cwd: tempfile::tempdir().unwrap(),
            data: tempfile::tempdir().unwrap(),
        }
    }

    fn run(&self, args: &[&str]) -> Output {
        dynabo(self.cwd.path(), self.data.path(), args)
    }

    fn write(&self, name: &str, body: &Value) -> String {
        let path = self.data.path().join(name);
        fs::write(&path, body.to_string()).unwrap();
        path.to_string_lossy().into_owned()
    }

    fn assert_cwd_untouched(&self) {
        assert_eq!(fs::read_dir(self.cwd.path()).unwrap().count(), 0);
    }
}

fn small_run_config() -> Value {
    json!({
        "objective": "branin",
        "budget": 14,
        "seed": 1,
        "gp": {"restarts": 1, "evals_per_start": 40},
        "optimizer": {"pool_size": 300}
    })
}

fn small_spec() -> Value {
    json!({
        "objective": "branin",
        "seeds": 2,
        "budget": 12,
        "timing": {"fixed": [6, 9]},
        "corpus": {"seeds": 1, "iters": 20, "pool_size": 200},
        "clusters": 5,
        "base": {"gp": {"restarts": 1, "evals_per_start": 40}, "optimizer": {"pool_size": 300}}
    })
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let d = Dirs::new();
    let out = d.run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    for sub in ["corpus", "bench", "run", "serve", "plot"] {
        assert!(text(&out.stdout).contains(sub), "{sub}");
        assert_eq!(d.run(&[sub, "--help"]).status.code(), Some(0), "{sub}");
    }
    let out = d.run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("Usage"));
    assert_eq!(d.run(&["run"]).status.code(), Some(1));
    assert_eq!(d.run(&[]).status.code(), Some(1));
    assert_eq!(d.run(&["run", "--config", "x.json", "--seed", "seven"]).status.code(), Some(1));
    d.assert_cwd_untouched();
}

#[test]
fn runtime_failures_exit_2() {
    let d = Dirs::new();
    let missing = d.data.path().join("nowhere").join("cfg.json");
    let out = d.run(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains(missing.to_str().unwrap()));

    let bad = d.write("bad.json", &json!({"objective": "branin", "budget": 0}));
    let out = d.run(&["run", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("budget"));

    let unknown = d.write("unknown.json", &json!({"objective": "nope", "budget": 10}));
    assert_eq!(d.run(&["run", "--config", &unknown]).status.code(), Some(2));
    d.assert_cwd_untouched();
}

#[test]
fn identical_runs_write_identical_event_logs() {
    let d = Dirs::new();
    let cfg = d.write("cfg.json", &small_run_config());
    let a = d.data.path().join("a");
    let b = d.data.path().join("b");
    for out in [&a, &b] {
        let res = d.run(&["run", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap(), "--json"]);
        assert_eq!(res.status.code(), Some(0), "{}", text(&res.stderr));
        let summary: Value = serde_json::from_slice(&res.stdout).unwrap();
        assert_eq!(summary["trials"], 14);
    }
    let events = fs::read(a.join("events.jsonl")).unwrap();
    assert!(!events.is_empty());
    assert_eq!(events, fs::read(b.join("events.jsonl")).unwrap());
    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    assert!(results.starts_with("iteration,incumbent_loss,regret\n"));
    assert_eq!(results.lines().count(), 15);
    let last = serde_json::from_str::<Value>(text(&events).lines().last().unwrap()).unwrap();
    assert_eq!(last["kind"], "finished");

    // without --out the run lands under the data dir
    let res = d.run(&["run", "--config", &cfg, "--seed", "8"]);
    assert_eq!(res.status.code(), Some(0));
    let other = fs::read(d.data.path().join("runs/branin-seed8/events.jsonl")).unwrap();
    assert_ne!(other, events);

    let svg = d.data.path().join("run.svg");
    let res = d.run(&[
        "plot",
        "--input",
        a.join("results.csv").to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", text(&res.stderr));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    d.assert_cwd_untouched();
}

#[test]
fn corpus_and_bench_commands() {
    let d = Dirs::new();
    let corpus_args = ["--objective", "branin", "--seeds", "1", "--iters", "20", "--pool", "200"];
    let mut args = vec!["corpus", "generate", "--json"];
    args.extend(corpus_args);
    let res = d.run(&args);
    assert_eq!(res.status.code(), Some(0), "{}", text(&res.stderr));
    let gen: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(gen["entries"].as_u64().unwrap() > 0);

    let mut args = vec!["corpus", "cluster", "--json", "--clusters", "4"];
    args.extend(corpus_args);
    let res = d.run(&args);
    assert_eq!(res.status.code(), Some(0), "{}", text(&res.stderr));
    let clustered: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(clustered["clusters"], 4);
    let medians: Vec<f64> = serde_json::from_value(clustered["median_losses"].clone()).unwrap();
    assert!(medians.windows(2).all(|w| w[0] <= w[1]));

    let spec = d.write("spec.json", &small_spec());
    let sweep_out = d.data.path().join("sweep");
    let res = d.run(&["bench", "sweep-tau", "--spec", &spec, "--out", sweep_out.to_str().unwrap(), "--json"]);
    assert_eq!(res.status.code(), Some(0), "{}", text(&res.stderr));
    let csv = fs::read_to_string(sweep_out.join("sweep.csv")).unwrap();
    // one row per (τ, policy, seed)
    assert_eq!(csv.lines().count(), 1 + 8 * 2);

    let run_out = d.data.path().join("bench");
    let res = d.run(&["bench", "run", "--spec", &spec, "--out", run_out.to_str().unwrap(), "--json"]);
    assert_eq!(res.status.code(), Some(0), "{}", text(&res.stderr));
    let summary: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(summary["comparisons"].as_array().unwrap().len(), 3);
    for f in ["results.csv", "summary.csv", "regret.svg", "comparisons.json"] {
        assert!(run_out.join(f).exists(), "{f}");
    }
    let results = fs::read_to_string(run_out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 4 * 2 * 12);

    let svg = d.data.path().join("bench.svg");
    let res = d.run(&[
        "bench",
        "plot",
        "--input",
        run_out.join("summary.csv").to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    assert!(fs::read_to_string(svg).unwrap().contains("dynabo_gated"));
    d.assert_cwd_untouched();
}
