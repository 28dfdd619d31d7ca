use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ptx(name: &str) -> String {
    root().join("crates/core/tests/fixtures/ptx").join(name).display().to_string()
}

fn demo_model() -> String {
    root().join("models/k20_demo.json").display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpukalc"))
        .args(args)
        .env_remove("GPUKALC_PROFILE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn vector_add(extra: &[&str]) -> Output {
    let p = ptx("vectorAdd.ptx");
    let mut args = vec!["predict", "--profile", "k20", "--ptx", &p, "--kernel", "vectorAdd"];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn predict_json_matches_golden() {
    let model = demo_model();
    let o = vector_add(&["--blocks", "196", "--tpb", "256", "--model", &model, "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/vector_add_k20.json")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn predict_json_has_time_power_energy() {
    let model = demo_model();
    let o = vector_add(&["--blocks", "196", "--tpb", "256", "--model", &model, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let r = &v[0];
    for key in ["t_kernel_us", "power_w", "energy_uj", "d_kernel_cycles", "d_total_cycles"] {
        assert!(r[key].as_f64().unwrap().is_finite(), "{key}");
    }
    for key in ["gm_penalty", "sm_penalty", "cm_penalty", "launch_overhead_us"] {
        assert!(r["penalties"][key].is_number(), "{key}");
    }
    let (t, w, e) = (r["t_kernel_us"].as_f64().unwrap(), r["power_w"].as_f64().unwrap(), r["energy_uj"].as_f64().unwrap());
    assert!((e - t * w).abs() <= 1e-9 * e);
    assert_eq!(r["importances"].as_array().unwrap().len(), 5);
}

#[test]
fn missing_blocks_is_a_usage_error() {
    let o = vector_add(&["--tpb", "256"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--blocks"));
    assert!(o.stdout.is_empty());
}

#[test]
fn csv_has_one_row_per_config() {
    let o = vector_add(&["--blocks", "13,26", "--tpb", "256", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<_> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("profile,kernel,n_blocks"));
    assert!(lines[1].contains(",13,256,") && lines[2].contains(",26,256,"));
}

#[test]
fn stage_errors_name_the_stage() {
    let p = ptx("loop.ptx");
    let o = run(&["predict", "--profile", "k20", "--ptx", &p, "--kernel", "saxpy_loop", "--blocks", "13", "--tpb", "256"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("schedule: ") && err.contains("LOOP"), "{err}");
    assert_eq!(err.matches("no iteration count").count(), 1, "{err}");
    assert!(o.stdout.is_empty());

    let o = run(&["predict", "--profile", "k20", "--ptx", &p, "--kernel", "nope", "--blocks", "1", "--tpb", "32"]);
    assert!(stderr(&o).contains("parse: "), "{}", stderr(&o));

    let o = run(&["predict", "--profile", "k20", "--ptx", &p, "--kernel", "saxpy_loop", "--blocks", "1", "--tpb", "4096", "--loops", "LOOP=4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn loop_counts_are_accepted() {
    let p = ptx("loop.ptx");
    let o = run(&[
        "predict", "--profile", "k20", "--ptx", &p, "--kernel", "saxpy_loop", "--blocks", "13", "--tpb", "256",
        "--loops", "LOOP=64", "--format", "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bad = run(&["predict", "--profile", "k20", "--ptx", &p, "--kernel", "saxpy_loop", "--blocks", "1", "--tpb", "1", "--loops", "LOOP"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn trace_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let t = trace.display().to_string();
    let o = vector_add(&["--blocks", "13", "--tpb", "256", "--trace", &t]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("node,resource,start,duration\n"));
    assert!(text.lines().count() > 1);
}

#[test]
fn features_header_and_illustration_counts() {
    let p = ptx("nn.ptx");
    let o = run(&["features", "--profile", "k20", "--ptx", &p, "--kernel", "euclid", "--blocks", "78", "--tpb", "1024"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut rows = csv::Reader::from_reader(out.as_bytes());
    let header: Vec<String> = rows.headers().unwrap().iter().map(String::from).collect();
    let names: Vec<String> = gpukalc::pfea::Feature::ALL.iter().map(|f| f.name().to_string()).collect();
    assert_eq!(header, names);
    let rec = rows.records().next().unwrap().unwrap();
    let col = |n: &str| rec[header.iter().position(|h| h == n).unwrap()].parse::<f64>().unwrap();
    assert_eq!(col("comp_inst_sm"), 57.0);
    assert_eq!(col("waves"), 3.0);
}

#[test]
fn features_can_carry_labels() {
    let p = ptx("nn.ptx");
    let args = ["features", "--profile", "k20", "--ptx", &p, "--kernel", "euclid", "--blocks", "13,26", "--tpb", "256"];
    let o = run(&[&args[..], &["--labels", "50.5,61"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().next().unwrap().ends_with(",power_w"));
    let (fv, labels) = gpukalc::pfea::features_from_csv::<f64>(&out).unwrap();
    assert_eq!((fv.len(), labels.unwrap()), (2, vec![50.5, 61.0]));
    let o = run(&[&args[..], &["--labels", "50.5"]].concat());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn empty_kernel_has_zero_instruction_counts() {
    let p = ptx("empty.ptx");
    let o = run(&["features", "--profile", "k20", "--ptx", &p, "--kernel", "emptyKernel", "--blocks", "1", "--tpb", "32"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (fv, labels) = gpukalc::pfea::features_from_csv::<f64>(&stdout(&o)).unwrap();
    assert!(labels.is_none());
    for name in ["comp_inst_sm", "glob_inst_sm", "shar_inst_sm", "glob_load_sm", "glob_store_sm"] {
        assert_eq!(fv[0].by_name(name).unwrap(), 0.0, "{name}");
    }
}

#[test]
fn gen_microbench_writes_sources() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    let o = run(&["gen-microbench", "--kind", "all", "--out", &d]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), gpukalc::fit::MicrobenchKind::ALL.len());
    let chase = std::fs::read_to_string(dir.path().join("pointer_chase_global.cu")).unwrap();
    assert!(chase.contains("j=d_arr[j]"));
    let o = run(&["gen-microbench", "--kind", "warp_shuffle", "--out", &d]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("warp_shuffle"));
}

#[test]
fn fit_linear_on_an_exact_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("line.csv");
    std::fs::write(&path, "x,y\n0,1\n1,3\n2,5\n3,7\n").unwrap();
    let p = path.display().to_string();
    let o = run(&["fit", "--model", "linear", "--csv", &p]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["model"]["slope"], 2.0);
    assert_eq!(v["model"]["intercept"], 1.0);
    assert_eq!(v["r2"], 1.0);
}

fn write_series(dir: &Path, name: &str, pts: impl Iterator<Item = (f64, f64)>) {
    let mut s = String::from("x,y\n");
    for (x, y) in pts {
        s.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(dir.join(name), s).unwrap();
}

/// Noiseless series from the shipped K20 models.
fn k20_measurements(dir: &Path) {
    let p: gpukalc::Profile = gpukalc::arch::builtin_profile("k20").unwrap();
    let lat = p.penalty_models.global_latency.clone();
    let fine = (0..120).map(|i| f64::from(i) * 256.0 + 1.0);
    let coarse = (6..400).map(|i| f64::from(i) * 6000.0 + 1.0);
    write_series(dir, "global_latency.csv", fine.chain(coarse).map(|x| (x, lat.eval(x))));
    let lo = p.penalty_models.launch_overhead;
    write_series(dir, "launch_overhead.csv", (1..=32).map(|i| f64::from(i) * 8192.0).map(|x| (x, lo.eval(x))));
    let g = p.throughput_models.global;
    write_series(dir, "global_throughput.csv", (1..=60).map(|i| f64::from(i) * 500.0).map(|x| (x, g.eval(x))));
    let s = p.throughput_models.shared;
    write_series(dir, "shared_throughput.csv", (1..=60).map(|i| f64::from(i) * 5000.0).map(|x| (x, s.eval(x))));
}

#[test]
fn setup_reports_missing_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json").display().to_string();
    let m = dir.path().display().to_string();
    let o = run(&["setup", "--measurements", &m, "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for f in ["global_latency.csv", "launch_overhead.csv", "global_throughput.csv", "shared_throughput.csv"] {
        assert!(err.contains(f), "{err}");
    }
}

#[test]
fn setup_is_deterministic_and_usable() {
    let meas = tempfile::tempdir().unwrap();
    k20_measurements(meas.path());
    let out = tempfile::tempdir().unwrap();
    let m = meas.path().display().to_string();
    let a = out.path().join("mygpu.json");
    let b = out.path().join("again.json");
    for path in [&a, &b] {
        let p = path.display().to_string();
        let o = run(&["setup", "--measurements", &m, "--name", "My GPU", "--out", &p]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let fitted: gpukalc::Profile = gpukalc::arch::load_profile(&a).unwrap();
    let truth: gpukalc::Profile = gpukalc::arch::builtin_profile("k20").unwrap();
    let (fg, tg) = (fitted.throughput_models.global, truth.throughput_models.global);
    assert!((fg.a / tg.a - 1.0).abs() < 0.02 && (fg.c / tg.c - 1.0).abs() < 0.02);
    let (fl, tl) = (&fitted.penalty_models.global_latency, &truth.penalty_models.global_latency);
    for (f, t) in fl.segments.iter().zip(&tl.segments) {
        assert!((f.slope - t.slope).abs() <= 0.01 * t.slope.abs() + 1e-9, "{f:?} vs {t:?}");
        assert!((f.intercept - t.intercept).abs() <= 0.01 * t.intercept.abs(), "{f:?} vs {t:?}");
    }

    let p = ptx("vectorAdd.ptx");
    let by_path = a.display().to_string();
    let o = run(&["predict", "--profile", &by_path, "--ptx", &p, "--kernel", "vectorAdd", "--blocks", "13", "--tpb", "256"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("My GPU"));

    let o = Command::new(env!("CARGO_BIN_EXE_gpukalc"))
        .args(["predict", "--profile", "mygpu", "--ptx", &p, "--kernel", "vectorAdd", "--blocks", "13", "--tpb", "256"])
        .env("GPUKALC_PROFILE_DIR", out.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("My GPU"));
}

#[test]
fn unknown_profile_lists_builtins() {
    let p = ptx("vectorAdd.ptx");
    let o = run(&["predict", "--profile", "nope", "--ptx", &p, "--kernel", "vectorAdd", "--blocks", "1", "--tpb", "32"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("k20"), "{}", stderr(&o));
}
