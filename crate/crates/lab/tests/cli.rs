use std::path::Path;
use std::process::Command;

fn dampwave(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dampwave")).args(args).output().unwrap();
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    (out.status.code().unwrap_or(-1), text)
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn config_errors_exit_64_with_named_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[model]\nkind = \"nlw\"\nrho = 2.5\n[noise]\nq = 1.0\n");
    let (code, text) = dampwave(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 64, "{text}");
    assert!(text.contains("growth condition") && text.contains("rho < 2"), "{text}");
    assert!(text.contains("divergent B_1"), "{text}");

    let cfg = write(dir.path(), "typo.toml", "[model]\nrhoo = 1.0\n");
    let (code, _) = dampwave(&["simulate", "--config", &cfg]);
    assert_eq!(code, 64);

    let (code, _) = dampwave(&["mix", "--no-such-flag", "1"]);
    assert_eq!(code, 64);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = dampwave(&["selftest", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let v = read_json(&dir.path().join("verdict.json"));
    assert_eq!(v["status"], "pass");
    assert!(dir.path().join("manifest.toml").exists());
}

#[test]
fn cubic_graph_reports_exact_rates() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = dampwave(&["fw-graph", "--model", "cubic", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let v = read_json(&dir.path().join("verdict.json"));
    assert_eq!(v["metrics"]["V(0)"].as_f64(), Some(4.5));
    assert_eq!(v["metrics"]["V(3)"].as_f64(), Some(0.0));
    let net = read_json(&dir.path().join("network.json"));
    let rate0 = net["nodes"].as_array().unwrap().iter().find(|n| n["label"] == "0").unwrap()["rate"].as_f64();
    assert_eq!(rate0, Some(4.5));
}

#[test]
fn rerun_from_manifest_reproduces_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let (code, text) = dampwave(&["simulate", "--model", "ou", "--seed", "5", "--out", first.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let manifest = std::fs::read_to_string(first.join("manifest.toml")).unwrap();
    assert!(manifest.contains("content_hash"));
    let second = dir.path().join("b");
    let (code, text) =
        dampwave(&["simulate", "--config", first.join("manifest.toml").to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(!text.contains("differs"), "{text}");
    let hash = |p: &Path| {
        let m: toml::Value = toml::from_str(&std::fs::read_to_string(p.join("manifest.toml")).unwrap()).unwrap();
        m["run"]["content_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash(&first), hash(&second));
    assert_eq!(std::fs::read(first.join("verdict.json")).unwrap(), std::fs::read(second.join("verdict.json")).unwrap());
}

#[test]
fn dt_rule_violation_is_a_config_error() {
    let (code, text) = dampwave(&["simulate", "--dt", "0.5", "--out", "/dev/null/x"]);
    assert_eq!(code, 64, "{text}");
    assert!(text.contains("0.5/sqrt(lambda_M)"), "{text}");
}
