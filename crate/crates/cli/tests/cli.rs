use std::path::{Path, PathBuf};
use std::process::Command;

const TWISTED: &str = "[domain]\nresolution = 8\nt_nodes = 33\n[metric]\nkind = twisted_flat\nc = 0.5\n[forcing]\nepsilon = 0.5\n";

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn pscslice() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pscslice"))
}

#[test]
fn check_angle_writes_report_to_env_dir() {
    let dir = scratch("cli_env");
    let ini = dir.join("tw.ini");
    std::fs::write(&ini, TWISTED).unwrap();
    let out_dir = dir.join("elsewhere");
    let st = pscslice()
        .arg("check-angle")
        .arg(&ini)
        .env("SLICEPSC_OUT_DIR", &out_dir)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(out_dir.join("tw.report.json").exists());
    assert!(out_dir.join("tw.timing.txt").exists());
}

#[test]
fn batch_exits_with_worst_code() {
    let dir = scratch("cli_batch");
    std::fs::write(dir.join("a.ini"), TWISTED).unwrap();
    std::fs::write(dir.join("b.ini"), TWISTED.replace("c = 0.5", "c = 1.0")).unwrap();
    let out = pscslice()
        .args(["batch", "--stage", "check-angle"])
        .arg(&dir)
        .env_remove("SLICEPSC_OUT_DIR")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[exit 0]") && text.contains("[exit 2]"), "{text}");
}

#[test]
fn bad_config_exits_four() {
    let dir = scratch("cli_bad");
    let ini = dir.join("bad.ini");
    std::fs::write(&ini, "[domain]\nresolution = 8\nt_nodes = 9\n[metric]\nkind = nope\n").unwrap();
    let out = pscslice().arg("certify").arg(&ini).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.ini:5"));
}

#[test]
fn missing_config_exits_five() {
    let out = pscslice().arg("solve").arg("/nonexistent/x.ini").output().unwrap();
    assert_eq!(out.status.code(), Some(5));
}
