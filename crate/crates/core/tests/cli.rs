use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn slukit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slukit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = slukit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Work(TempDir);

impl Work {
    fn new() -> Self {
        Work(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

fn lines(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn generate_encode_decode_round_trip() {
    let w = Work::new();
    ok(&["generate", "--limit", "200", "--out", &w.s("c.jsonl")]);
    assert_eq!(lines(&w.path("c.jsonl")).len(), 200);
    assert!(w.path("c.jsonl.manifest.json").exists());

    ok(&["encode", "--input", &w.s("c.jsonl"), "--out", &w.s("e.jsonl")]);
    ok(&["decode", "--strict", "--input", &w.s("e.jsonl"), "--out", &w.s("d.jsonl")]);
    let a: Vec<serde_json::Value> = lines(&w.path("c.jsonl")).iter().map(|l| serde_json::from_str(l).unwrap()).collect();
    let b: Vec<serde_json::Value> = lines(&w.path("d.jsonl")).iter().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(a, b);

    ok(&["encode", "--input", &w.s("d.jsonl"), "--out", &w.s("e2.jsonl")]);
    assert_eq!(fs::read(w.path("e.jsonl")).unwrap(), fs::read(w.path("e2.jsonl")).unwrap());

    let report = ok(&["score", "--ref", &w.s("c.jsonl"), "--hyp", &w.s("e.jsonl"), "--model", "self"]);
    assert_eq!(report, "Model\tGroup\tWER\tCER\tF1\tN\nself\tAll\t0.00\t0.00\t100.00\t200\n");
}

#[test]
fn manifest_records_seed_and_hash() {
    let w = Work::new();
    ok(&["generate", "--sample", "10", "--seed", "3", "--out", &w.s("c.jsonl")]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.path("c.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["subcommand"], "generate");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn noisy_scoring_grouped_and_correlated() {
    let w = Work::new();
    let sweep = concat!(env!("CARGO_MANIFEST_DIR"), "/data/noise_sweep.json");
    ok(&["generate", "--sample", "400", "--seed", "1", "--out", &w.s("c.jsonl")]);
    ok(&["corrupt", "--input", &w.s("c.jsonl"), "--profile", sweep, "--pick", "mixed", "--out", &w.s("n.jsonl")]);
    let report = ok(&[
        "score",
        "--ref",
        &w.s("c.jsonl"),
        "--hyp",
        &w.s("n.jsonl"),
        "--group-by",
        "meta.noise",
        "--scores-out",
        &w.s("s.jsonl"),
    ]);
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("system\tmixed\t"));
    assert!(rows[2].starts_with("system\tAll\t"));

    let block = ok(&["correlate", "--scores", &w.s("s.jsonl"), "--x", "wer", "--y", "cer"]);
    assert!(block.starts_with("wer~cer\tn\tr\tr_s\n"), "{block}");

    let study = ok(&["correlate", "--sweep", sweep, "--ref", &w.s("c.jsonl")]);
    assert!(study.starts_with("profile\tn\tmean_wer"), "{study}");
    assert_eq!(study.lines().count(), 5);
}

#[test]
fn perturb_lm_and_curriculum() {
    let w = Work::new();
    ok(&["generate", "--sample", "300", "--seed", "2", "--out", &w.s("c.jsonl")]);
    ok(&["perturb", "oov", "--input", &w.s("c.jsonl"), "--step", "2", "--out", &w.s("o.jsonl"), "--report", &w.s("o.tsv")]);
    let stats = fs::read_to_string(w.path("o.tsv")).unwrap();
    assert!(stats.starts_with("step\tword_types\twords\tpct_types\tpct_tokens\nStep 2\t"), "{stats}");

    ok(&["perturb", "syntax", "--input", &w.s("c.jsonl"), "--out", &w.s("y.jsonl")]);
    ok(&[
        "perturb",
        "split",
        "--input",
        &w.s("c.jsonl"),
        "--threshold",
        "6",
        "--long-out",
        &w.s("long.jsonl"),
        "--short-out",
        &w.s("short.jsonl"),
    ]);
    assert_eq!(lines(&w.path("long.jsonl")).len() + lines(&w.path("short.jsonl")).len(), 300);

    let lm = ok(&["lm", "stats", "--train", &w.s("c.jsonl"), "--test", &w.s("o.jsonl")]);
    let mut it = lm.lines();
    assert_eq!(it.next(), Some("utterances\twords\tperplexity\toov_types\toov_tokens"));
    let row: Vec<&str> = it.next().unwrap().split('\t').collect();
    assert_eq!(row[0], "300");
    assert!(row[3].parse::<usize>().unwrap() > 0);

    ok(&["curriculum", "--input", &w.s("c.jsonl"), "--threshold", "50", "--out-dir", &w.s("stages")]);
    for name in ["data2", "data3", "data4", "data4_star"] {
        assert!(w.path(&format!("stages/{name}.jsonl")).exists(), "{name}");
    }
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.path("stages/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["threshold"], 50.0);
    assert_eq!(m["stages"].as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes() {
    let w = Work::new();
    assert_eq!(slukit(&["encode", "--input", &w.s("missing.jsonl")]).status.code(), Some(2));
    assert_eq!(slukit(&["generate", "--limit", "1", "--sample", "1"]).status.code(), Some(1));
    fs::write(w.path("bad.jsonl"), "{\"id\":\"1\",\"enriched\":\"@ allume ^la @\"}\n").unwrap();
    assert_eq!(slukit(&["decode", "--strict", "--input", &w.s("bad.jsonl")]).status.code(), Some(1));
    assert!(slukit(&["decode", "--input", &w.s("bad.jsonl")]).status.success());
    assert_eq!(slukit(&["--help"]).status.code(), Some(0));
}

#[test]
fn manifest_records_effective_seed() {
    let w = Work::new();
    let sweep = concat!(env!("CARGO_MANIFEST_DIR"), "/data/noise_sweep.json");
    ok(&["generate", "--sample", "5", "--out", &w.s("c.jsonl")]);
    ok(&["corrupt", "--input", &w.s("c.jsonl"), "--profile", sweep, "--pick", "mixed", "--out", &w.s("n.jsonl")]);
    let read = |name: &str| -> serde_json::Value { serde_json::from_str(&fs::read_to_string(w.path(name)).unwrap()).unwrap() };
    assert_eq!(read("c.jsonl.manifest.json")["seed"], 0);
    assert!(read("n.jsonl.manifest.json")["seed"].is_u64());
}
