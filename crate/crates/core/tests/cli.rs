use std::path::Path;
use std::process::Command;

fn chipguide(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_chipguide"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn y_build_then_trace_then_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let build = dir.path().join("build");
    let out = chipguide(&["y-build", "--bias-gauss", "0,6,0", "--out", arg(&build)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let layout = build.join("layout.json");
    assert!(layout.exists());

    let trace = dir.path().join("trace");
    let out = chipguide(&[
        "minima-trace",
        "--layout",
        arg(&layout),
        "--x",
        "-100:900:26",
        "--y-range",
        "-400:400",
        "--z-range",
        "1:400",
        "--grid",
        "61",
        "--out",
        arg(&trace),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(trace.join("minima_trace.csv")).unwrap();
    assert!(csv.starts_with("x_um,track_id,y_um,z_um,v_uk,b_g,omega1,omega2,barrier_uk\n"));
    assert!(csv.lines().count() > 26);

    let again = dir.path().join("again");
    let out = chipguide(&[
        "rerun",
        arg(&trace.join("manifest.json")),
        "--out",
        arg(&again),
        "--threads",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["minima_trace.csv", "trace_summary.json"] {
        assert_eq!(
            std::fs::read(trace.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn classify_prints_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = chipguide(&["classify", "--d-um", "200", "--out", arg(dir.path())]);
    assert!(out.status.success());
    let line = String::from_utf8(out.stdout).unwrap();
    assert_eq!(line.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["case"], "side_by_side");
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    // The layout is not used by classify.
    let out = chipguide(&[
        "classify",
        "--d-um",
        "100",
        "--layout",
        concat!(env!("CARGO_MANIFEST_DIR"), "/data/y_splitter.json"),
        "--out",
        arg(dir.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!dir.path().join("manifest.json").exists());

    let out = chipguide(&[
        "field-map",
        "--x",
        "0:1:2",
        "--y",
        "0:1:2",
        "--z",
        "1:2:2",
        "--out",
        arg(dir.path()),
    ]);
    assert!(!out.status.success(), "field-map needs a layout");
}
