use std::path::Path;
use std::process::Command;

use h2s_core::fixtures;
use h2s_core::model_io::serialize_model;
use h2s_core::plan::Plan;

fn h2s() -> Command {
    Command::new(env!("CARGO_BIN_EXE_h2s"))
}

fn write_fixture(dir: &Path, name: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{name}.seg.json"));
    std::fs::write(&path, serialize_model(&fixtures::by_name(name).unwrap())).unwrap();
    path
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let out = h2s().args(["plan", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = h2s().arg("nonsense").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_failure_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = h2s()
        .args(["pipeline", "--input"])
        .arg(dir.path().join("absent.seg.json"))
        .arg("--outdir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.seg.json"));
}

#[test]
fn stepwise_commands_match_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "two_cuboids");
    let view = "4,3,5,0.5,0.5,0.5,0,1,0,40";
    let d = |p: &str| dir.path().join(p);

    let fit = h2s().arg("fit").arg("--input").arg(&input).output().unwrap();
    assert!(fit.status.success());
    let fitted: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert_eq!(fitted["primitives"].as_array().unwrap().len(), 2);

    let ok = |c: &mut Command| assert!(c.status().unwrap().success());
    ok(h2s().arg("plan").arg("--input").arg(&input).arg("--output").arg(d("plan.json")));
    ok(h2s()
        .arg("compile")
        .arg("--plan")
        .arg(d("plan.json"))
        .args(["--view", view, "--size", "800x600", "--ability", "apprentice", "--output"])
        .arg(d("tutorial.json")));
    ok(h2s().arg("render").arg("--tutorial").arg(d("tutorial.json")).arg("--outdir").arg(d("sheets")));
    ok(h2s()
        .arg("pipeline")
        .arg("--input")
        .arg(&input)
        .args(["--view", view, "--size", "800x600", "--ability", "apprentice", "--outdir"])
        .arg(d("all")));

    for f in ["plan.json", "tutorial.json"] {
        assert_eq!(std::fs::read(d(f)).unwrap(), std::fs::read(d("all").join(f)).unwrap(), "{f}");
    }
    for f in ["step_000.svg", "contact_sheet.svg"] {
        let a = std::fs::read(d("sheets").join(f)).unwrap();
        assert_eq!(a, std::fs::read(d("all").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn time_limit_keeps_incumbent_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "mixer");
    let out = dir.path().join("plan.json");
    let status = h2s()
        .arg("plan")
        .arg("--input")
        .arg(&input)
        .args(["--time-limit", "0", "--output"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let plan = Plan::from_document(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!plan.selection.optimal);
    assert_eq!(plan.selection.chosen.len(), plan.primitives.len() - plan.custom_parts().len());
}

#[test]
fn dumps_candidates_and_relations() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "two_cuboids");
    let cands = dir.path().join("cands.json");
    let out = h2s()
        .arg("plan")
        .arg("--input")
        .arg(&input)
        .arg("--dump-relations")
        .arg("--dump-candidates")
        .arg(&cands)
        .args(["--output", "/dev/null"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let rels: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rels.as_array().unwrap().len(), 1);
    let set: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cands).unwrap()).unwrap();
    assert_eq!(set["candidates"].as_array().unwrap().len(), 7);
}
