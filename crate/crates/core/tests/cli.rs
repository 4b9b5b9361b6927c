use std::process::Command;

fn stablepot(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stablepot")).args(args).output().unwrap()
}

#[test]
fn kernel_command_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.json");
    std::fs::write(
        &cfg,
        r#"{"domain":{"type":"ball","center":[0,0],"radius":1},"seed":1,"alpha":1,"query":"martin","pairs":[[[0,0],[1,0]]]}"#,
    )
    .unwrap();
    let out = dir.path().join("k");
    let o = stablepot(&["kernel", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("k.json")).unwrap()).unwrap();
    assert_eq!(json["command"], "kernel");
    let csv = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
    let last: f64 = csv.lines().nth(1).unwrap().split(',').last().unwrap().parse().unwrap();
    assert_eq!(last, 1.0);
}

#[test]
fn missing_seed_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.json");
    std::fs::write(&cfg, r#"{"domain":{"type":"box","min":[0,0],"max":[1,1]},"alpha":1,"x":[0.5,0.5],"phi":"one"}"#).unwrap();
    let out = dir.path().join("w");
    let o = stablepot(&["wos", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(dir.path().join("w.error.json").exists());
}

#[test]
fn mismatched_command_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"command":"gauge","seed":3}"#).unwrap();
    let out = dir.path().join("c");
    let o = stablepot(&["check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
