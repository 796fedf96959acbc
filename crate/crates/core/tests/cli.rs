use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cmvc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmvc")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn sample(dir: &Path) {
    let o = cmvc(&["synth", "--frames", "10", "--seed", "3", "--out", "v.y"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

const GEOM: [&str; 6] = ["--input", "v.y", "--width", "64", "--height", "48"];

#[test]
fn roundtrip_defaults_report_bpp_and_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmvc(&["roundtrip"], dir.path());
    assert!(o.status.success());
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["bpp"].as_f64().unwrap() > 0.0);
    assert!(report["psnr"].as_f64().unwrap() > 10.0);
    assert_eq!(report["point"]["metric_name"], "psnr");
}

#[test]
fn roundtrip_csv_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmvc(&["roundtrip", "--report", "csv", "--out", "r.csv"], dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("key,value\n"));
    assert!(csv.lines().any(|l| l.starts_with("psnr,")));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "roundtrip");
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["outputs"][0]["path"], "r.csv");
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn keyframes_with_two_prints_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    sample(dir.path());
    let mut args = vec!["keyframes"];
    args.extend(GEOM);
    args.extend(["--keyframes", "2"]);
    let o = cmvc(&args, dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0,9\n");
}

#[test]
fn encode_decode_evaluate_bdrate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sample(d);
    let mut decoded = Vec::new();
    for q in ["64", "128", "256"] {
        let (s, out) = (format!("s{q}.cmvc"), format!("d{q}.y"));
        let mut args = vec!["encode"];
        args.extend(GEOM);
        args.extend(["--keyframes", "3", "--quality", q, "--out", &s]);
        assert!(cmvc(&args, d).status.success());
        assert!(d.join(format!("{s}.report.json")).exists());
        assert!(d.join(format!("{s}.manifest.json")).exists());
        assert!(cmvc(&["decode", "--input", &s, "--out", &out], d).status.success());
        assert_eq!(fs::metadata(d.join(&out)).unwrap().len(), 64 * 48 * 10);
        decoded.push((s, out));
    }
    let o = cmvc(&["inspect", "--input", "s64.cmvc"], d);
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["header"]["frame_count"], 10);

    let mut args = vec!["evaluate"];
    args.extend(GEOM);
    for (s, out) in &decoded {
        args.extend(["--decoded", out, "--stream", s]);
    }
    args.extend(["--curve-out", "curve.csv", "--out", "eval.json"]);
    let o = cmvc(&args, d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 3);
    assert_eq!(report["curve"]["points"].as_array().unwrap().len(), 3);

    let o = cmvc(&["bdrate", "--anchor", "curve.csv", "--test", "curve.csv"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "0.0\n");
}

#[test]
fn evaluate_ingests_external_metric_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sample(d);
    for q in ["64", "256"] {
        let mut args = vec!["roundtrip"];
        args.extend(GEOM);
        let (s, out) = (format!("s{q}.cmvc"), format!("d{q}.y"));
        args.extend(["--quality", q, "--stream-out", &s, "--decoded-out", &out]);
        assert!(cmvc(&args, d).status.success());
    }
    fs::write(d.join("dists.csv"), "video_id,metric_name,value\nlo,dists,0.31\nhi,dists,0.22\n").unwrap();
    let mut args = vec!["evaluate"];
    args.extend(GEOM);
    args.extend([
        "--decoded",
        "d64.y",
        "--stream",
        "s64.cmvc",
        "--decoded",
        "d256.y",
        "--stream",
        "s256.cmvc",
        "--metric-table",
        "dists.csv",
        "--video-id",
        "lo",
        "--video-id",
        "hi",
        "--table-metric",
        "dists",
        "--lower-better",
    ]);
    let o = cmvc(&args, d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let points = report["curve"]["points"].as_array().unwrap();
    assert_eq!(points[0]["distortion"], 0.31);
    assert_eq!(points[1]["distortion"], 0.22);
    assert_eq!(points[0]["higher_better"], false);
}

#[test]
fn bdrate_halved_rates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.csv"), "rate_bpp,distortion\n0.01,30\n0.02,33\n0.04,36\n0.08,39\n").unwrap();
    fs::write(d.join("b.csv"), "rate_bpp,distortion\n0.005,30\n0.01,33\n0.02,36\n0.04,39\n").unwrap();
    let o = cmvc(&["bdrate", "--anchor", "a.csv", "--test", "b.csv", "--out", "bd.json"], d);
    assert_eq!(stdout(&o), "-50.0\n");
    assert!(d.join("bd.json.manifest.json").exists());
}

#[test]
fn tt2v_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sample(d);
    fs::write(d.join("t.txt"), "[keyframe 0]\nwaves\n[keyframe 1]\nfoam\n[clip 0]\nthe tide comes in\n").unwrap();
    let mut args = vec!["encode"];
    args.extend(GEOM);
    args.extend(["--mode", "tt2v", "--text", "t.txt", "--out", "t.cmvc"]);
    assert!(cmvc(&args, d).status.success());
    assert!(cmvc(&["decode", "--input", "t.cmvc", "--out", "t.y"], d).status.success());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sample(d);
    // Usage errors.
    assert_eq!(cmvc(&["encode"], d).status.code(), Some(2));
    assert_eq!(cmvc(&["keyframes", "--input", "v.y"], d).status.code(), Some(2));
    assert_eq!(cmvc(&["roundtrip", "--quality", "100"], d).status.code(), Some(2));
    let mut args = vec!["encode"];
    args.extend(GEOM);
    args.extend(["--mode", "tt2v", "--out", "x.cmvc"]);
    assert_eq!(cmvc(&args, d).status.code(), Some(2));
    // Input and format errors.
    let o = cmvc(&["keyframes", "--input", "v.y", "--width", "63", "--height", "48"], d);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty() && !o.stderr.is_empty());
    assert_eq!(cmvc(&["decode", "--input", "v.y", "--out", "o.y"], d).status.code(), Some(3));
    assert_eq!(cmvc(&["decode", "--input", "missing", "--out", "o.y"], d).status.code(), Some(3));
    // Backend errors.
    let o = cmvc(&["roundtrip", "--backend", "external:exit 3"], d);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn jobs_do_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = ["roundtrip", "--keyframes", "5", "--optimize", "--steps", "5"];
    let mut outs = Vec::new();
    for jobs in ["1", "3"] {
        let stream = format!("s{jobs}");
        let mut args = base.to_vec();
        args.extend(["--jobs", jobs, "--stream-out", &stream]);
        let o = cmvc(&args, d);
        assert!(o.status.success());
        outs.push((fs::read(d.join(&stream)).unwrap(), o.stdout));
    }
    assert_eq!(outs[0], outs[1]);
}
