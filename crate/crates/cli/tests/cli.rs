use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn dppc(verb: &str, config: &Value, out: &Path, extra: &[&str]) -> Output {
    let dir = out.parent().unwrap();
    let cfg = dir.join(format!("{verb}.json"));
    std::fs::write(&cfg, serde_json::to_vec(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dppc"))
        .arg(verb)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn writes_summary_and_tables_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({"experiment": "palm", "seed": 5, "params": {"cases": 4}});
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(dppc("palm", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(dppc("palm", &cfg, &b, &[]).status.code(), Some(0));
    for f in ["summary.json", "cases.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    let summary: Value = serde_json::from_slice(&read(&a.join("summary.json"))).unwrap();
    assert_eq!(summary["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["config"]["params"]["cases"], 4);
    // defaults are echoed in resolved form
    assert_eq!(summary["config"]["params"]["points"], 3);
    let leftovers: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with('.'))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn sample_batches_are_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({"experiment": "sample", "seed": 3,
        "ground": {"domain": "interval", "a": -1, "b": 1, "nodes": 6},
        "kernel": {"type": "sine"}, "params": {"count": 2000, "write_limit": 50}});
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert_eq!(dppc("sample", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(dppc("sample", &cfg, &b, &[]).status.code(), Some(0));
    dppc("sample", &cfg, &c, &["--seed", "4"]);
    let (sa, sb, sc) = (read(&a.join("samples.csv")), read(&b.join("samples.csv")), read(&c.join("samples.csv")));
    assert_eq!(sa, sb);
    assert_ne!(sa, sc);
    let text = String::from_utf8(sa).unwrap();
    assert!(text.starts_with("# seed=3 count=2000"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // a failing assertion
    let strict = json!({"experiment": "fredholm", "ground": {"domain": "interval", "a": 0, "b": 1, "nodes": 10},
        "kernel": {"type": "sine"}, "params": {"nodes": [4, 8], "digits": 12}});
    let out = dppc("fredholm", &strict, &tmp.path().join("f"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    assert!(tmp.path().join("f/summary.json").exists());
    // schema violation
    let bad = json!({"experiment": "palm", "params": {"cases": -1}});
    let out = dppc("palm", &bad, &tmp.path().join("g"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
    // verb mismatch
    let out = dppc("jacobi", &json!({"experiment": "palm"}), &tmp.path().join("h"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({"experiment": "fredholm", "ground": {"domain": "interval", "a": 0, "b": 1, "nodes": 10},
        "kernel": {"type": "sine"}, "params": {"nodes": [20, 40], "phi": "0.5", "reference": 0.125}});
    let out = tmp.path().join("k");
    assert_eq!(dppc("fredholm", &cfg, &out, &["--kernel", "ope:3:exp(-(x^2))"]).status.code(), Some(0));
    let summary: Value = serde_json::from_slice(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["config"]["kernel"], json!({"type": "ope", "n": 3, "weight": "exp(-(x^2))"}));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let value: Value = serde_json::from_slice(&read(&path)).unwrap();
        let cfg = dppc_cli::ExperimentConfig::from_json(&value).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(format!("{}.json", cfg.experiment), path.file_name().unwrap().to_str().unwrap());
        seen += 1;
    }
    assert_eq!(seen, dppc_cli::Verb::ALL.len());
}
