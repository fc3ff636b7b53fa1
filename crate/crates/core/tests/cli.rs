use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use zipsel::cli::{RunManifest, EXIT_INPUT, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE};

fn zipsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zipsel"))
        .args(args)
        .env_remove("ZIPSEL_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    pool: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let pool = dir.path().join("pool.jsonl");
        let out = zipsel(&[
            "synth", "--n-base", "30", "--dup-fraction", "0.5", "--near-dup-fraction", "0.2",
            "--doc-bytes", "200", "--seed", "3", "--out", p(&pool),
        ]);
        assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
        Self { dir, pool }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn select(&self, out: &str, extra: &[&str]) -> (Output, PathBuf) {
        let out_path = self.path(out);
        let mut args = vec![
            "select", "--input", p(&self.pool), "--budget", "samples:10", "--k1", "30", "--k2",
            "10", "--k3", "4", "--out", p(&out_path),
        ];
        args.extend_from_slice(extra);
        (zipsel(&args), out_path)
    }
}

fn manifest_of(out: &Path) -> RunManifest {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    RunManifest::from_json(&fs::read_to_string(PathBuf::from(name)).unwrap()).unwrap()
}

fn ids_of(jsonl: &Path) -> Vec<String> {
    fs::read_to_string(jsonl)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_owned())
        .collect()
}

#[test]
fn synth_writes_labelled_pool() {
    let fx = Fixture::new();
    let text = fs::read_to_string(&fx.pool).unwrap();
    // 30 bases, 15 exact and 6 near duplicates
    assert_eq!(text.lines().count(), 51);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["messages"].is_array());
    assert!(first.get("origin").is_some());
}

#[test]
fn select_writes_output_and_manifest() {
    let fx = Fixture::new();
    let (out, sel) = fx.select("sel.jsonl", &["--threads", "2"]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest_of(&sel);
    assert_eq!(m.selected_ids.len(), 10);
    assert_eq!(ids_of(&sel), m.selected_ids);
    assert!(m.budget_met);
    assert!(!m.trajectory.is_empty());
    assert_eq!(m.input.samples, 51);
    assert_eq!(m.input.sha256.len(), 64);
    assert_eq!(m.config.threads, 2);
    assert!(m.final_set_ratio.unwrap() > 0.0);

    // thread count does not change the result
    let (_, sel1) = fx.select("sel1.jsonl", &["--threads", "1"]);
    assert_eq!(manifest_of(&sel1).selected_ids, m.selected_ids);
}

#[test]
fn keep_input_order_reorders_only_the_output() {
    let fx = Fixture::new();
    let (_, a) = fx.select("a.jsonl", &[]);
    let (_, b) = fx.select("b.jsonl", &["--keep-input-order"]);
    let ma = manifest_of(&a);
    assert_eq!(manifest_of(&b).selected_ids, ma.selected_ids);

    let pool_ids = ids_of(&fx.pool);
    let pos = |id: &String| pool_ids.iter().position(|x| x == id).unwrap();
    let ordered: Vec<usize> = ids_of(&b).iter().map(pos).collect();
    assert!(ordered.windows(2).all(|w| w[0] < w[1]));
    let mut sorted = ids_of(&a);
    sorted.sort_by_key(pos);
    assert_eq!(sorted, ids_of(&b));
}

#[test]
fn random_strategy_is_seeded() {
    let fx = Fixture::new();
    let (o1, a) = fx.select("a.jsonl", &["--strategy", "random", "--seed", "4"]);
    let (_, b) = fx.select("b.jsonl", &["--strategy", "random", "--seed", "4"]);
    assert_eq!(code(&o1), EXIT_OK);
    assert_eq!(ids_of(&a), ids_of(&b));
    assert_eq!(ids_of(&a).len(), 10);
}

#[test]
fn exhausted_pool_warns_and_succeeds() {
    let fx = Fixture::new();
    let out_path = fx.path("all.jsonl");
    let out = zipsel(&[
        "select", "--input", p(&fx.pool), "--budget", "samples:500", "--k1", "60", "--k2", "20",
        "--k3", "10", "--out", p(&out_path),
    ]);
    assert_eq!(code(&out), EXIT_OK);
    let m = manifest_of(&out_path);
    assert_eq!(m.selected_ids.len(), 51);
    assert!(!m.budget_met);
    assert!(m.warnings.iter().any(|w| w.contains("exhausted")));
}

#[test]
fn pair_mode_selects_whole_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pairs.jsonl");
    let lines: Vec<String> = (0..6)
        .map(|i| {
            serde_json::json!({
                "id": format!("p{i}"),
                "chosen": [{"role": "user", "content": format!("question {i} about topic {}", i * 7)},
                           {"role": "assistant", "content": format!("a careful answer number {i}")}],
                "rejected": [{"role": "user", "content": format!("question {i} about topic {}", i * 7)},
                             {"role": "assistant", "content": "no"}],
            })
            .to_string()
        })
        .collect();
    fs::write(&pool, lines.join("\n")).unwrap();
    let out_path = dir.path().join("sel.jsonl");
    let out = zipsel(&[
        "select", "--input", p(&pool), "--mode", "pair", "--budget", "samples:3", "--k1", "6",
        "--k2", "4", "--k3", "2", "--out", p(&out_path),
    ]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    for line in fs::read_to_string(&out_path).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["chosen"].is_array() && v["rejected"].is_array());
    }
    assert_eq!(manifest_of(&out_path).selected_ids.len(), 3);

    // the same file is not a valid single-mode pool
    let out = zipsel(&[
        "select", "--input", p(&pool), "--budget", "samples:3", "--out", p(&out_path),
    ]);
    assert_eq!(code(&out), EXIT_INPUT);
}

#[test]
fn score_emits_csv() {
    let fx = Fixture::new();
    let out = zipsel(&["score", "--input", p(&fx.pool)]);
    assert_eq!(code(&out), EXIT_OK);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("id,bytes,compressed_bytes,ratio"));
    let rows: Vec<&str> = rows.collect();
    assert_eq!(rows.len(), 51);
    let cols: Vec<&str> = rows[0].split(',').collect();
    let ratio: f64 = cols[3].parse().unwrap();
    let expect = cols[1].parse::<f64>().unwrap() / cols[2].parse::<f64>().unwrap();
    assert_eq!(ratio, expect);
}

#[test]
fn stats_reports_histogram() {
    let fx = Fixture::new();
    let (_, sel) = fx.select("sel.jsonl", &[]);
    let (_, rnd) = fx.select("rnd.jsonl", &["--strategy", "random"]);
    let manifest = fx.path("sel.jsonl.manifest.json");
    let reference = fx.path("rnd.jsonl.manifest.json");
    let hist = fx.path("hist.csv");
    let out = zipsel(&[
        "stats", "--input", p(&fx.pool), "--manifest", p(&manifest), "--reference",
        p(&reference), "--histogram", p(&hist),
    ]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["selected"], 10);
    let bins = report["token_histogram"].as_array().unwrap();
    assert_eq!(bins.len(), 30);
    let total: u64 = bins.iter().map(|b| b["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 10);
    assert_eq!(report["reference_histogram"].as_array().unwrap().len(), 30);
    assert_eq!(fs::read_to_string(hist).unwrap().lines().count(), 31);
    assert!(sel.exists() && rnd.exists());
}

#[test]
fn analyze_fits_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("versions.csv");
    fs::write(
        &csv,
        "label,compression_ratio,training_loss,performance\n\
         x1,3.1,1.42,6.1\nx2,2.95,1.37,6.4\nx3,2.81,1.33,6.6\nx4,2.7,1.30,6.9\nx5,2.92,1.38,6.2\n",
    )
    .unwrap();
    let out = zipsel(&["analyze", "--input", p(&csv)]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["anomalies"], serde_json::json!(["x5"]));
    assert_eq!(report["fits"].as_array().unwrap().len(), 3);

    fs::write(&csv, "label,compression_ratio\nx1,abc\n").unwrap();
    assert_eq!(code(&zipsel(&["analyze", "--input", p(&csv)])), EXIT_INPUT);
}

#[test]
fn sweep_writes_grid() {
    let fx = Fixture::new();
    let out_dir = fx.path("sweep");
    let out = zipsel(&[
        "sweep", "--input", p(&fx.pool), "--budget", "samples:8", "--k1", "20,40", "--k2", "10",
        "--k3", "2,5", "--out-dir", p(&out_dir),
    ]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(out_dir.join("k1-40_k2-10_k3-5.manifest.json").exists());
}

#[test]
fn oracle_reports_gap() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("tiny.jsonl");
    let out = zipsel(&[
        "synth", "--n-base", "8", "--dup-fraction", "0.25", "--near-dup-fraction", "0.25",
        "--doc-bytes", "150", "--seed", "1", "--out", p(&pool),
    ]);
    assert_eq!(code(&out), EXIT_OK);
    let out = zipsel(&["oracle", "--input", p(&pool), "--k", "4", "--k2", "6", "--k3", "2"]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["relative_gap"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["exhaustive_ids"].as_array().unwrap().len(), 4);
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let fx = Fixture::new();
    let (_, sel) = fx.select("sel.jsonl", &[]);
    let manifest = fx.path("sel.jsonl.manifest.json");
    let out = zipsel(&["replay", "--manifest", p(&manifest), "--input", p(&fx.pool), "--threads", "3"]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));

    let mut m = manifest_of(&sel);
    m.selected_ids.swap(0, 1);
    let tampered = fx.path("tampered.json");
    fs::write(&tampered, serde_json::to_string(&m).unwrap()).unwrap();
    let out = zipsel(&["replay", "--manifest", p(&tampered), "--input", p(&fx.pool)]);
    assert_eq!(code(&out), EXIT_INTERNAL);

    let other = fx.path("other.jsonl");
    fs::write(&other, "{\"messages\":[{\"role\":\"user\",\"content\":\"x\"}]}\n").unwrap();
    let out = zipsel(&["replay", "--manifest", p(&manifest), "--input", p(&other)]);
    assert_eq!(code(&out), EXIT_INPUT);
}

#[test]
fn usage_errors_exit_1() {
    let fx = Fixture::new();
    let out_path = fx.path("o.jsonl");
    for args in [
        vec!["select", "--input", p(&fx.pool), "--budget", "pages:3", "--out", p(&out_path)],
        vec!["select", "--input", p(&fx.pool), "--budget", "samples:3", "--k1", "5", "--k2",
             "10", "--out", p(&out_path)],
        vec!["select", "--input", p(&fx.pool), "--budget", "samples:3", "--threads", "0",
             "--out", p(&out_path)],
        vec!["select", "--input", p(&fx.pool), "--budget", "samples:3", "--level", "12",
             "--out", p(&out_path)],
        vec!["frobnicate"],
    ] {
        assert_eq!(code(&zipsel(&args)), EXIT_USAGE, "{args:?}");
    }
}

#[test]
fn input_errors_exit_2_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("bad.jsonl");
    fs::write(
        &pool,
        "{\"id\":\"a\",\"messages\":[{\"role\":\"user\",\"content\":\"hi\"}]}\n{not json}\n",
    )
    .unwrap();
    let out_path = dir.path().join("o.jsonl");
    let out = zipsel(&["select", "--input", p(&pool), "--budget", "samples:1", "--out", p(&out_path)]);
    assert_eq!(code(&out), EXIT_INPUT);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert!(!out_path.exists());

    let missing = dir.path().join("nope.jsonl");
    let out = zipsel(&["score", "--input", p(&missing)]);
    assert_eq!(code(&out), EXIT_INPUT);
}

#[test]
fn threads_env_is_honoured() {
    let fx = Fixture::new();
    let out_path = fx.path("env.jsonl");
    let out = Command::new(env!("CARGO_BIN_EXE_zipsel"))
        .args(["select", "--input", p(&fx.pool), "--budget", "samples:5", "--k1", "30",
               "--k2", "10", "--k3", "4", "--out", p(&out_path)])
        .env("ZIPSEL_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&out), EXIT_OK);
    assert_eq!(manifest_of(&out_path).config.threads, 3);
}
