use std::path::Path;
use std::process::Command;

use spinrelax::io::parse_trace;

const BIN: &str = env!("CARGO_BIN_EXE_spinrelax");

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const PAPER_BETA: &str =
    "beta = [[0.105, 0.105, 0.07, 0.72], [0.25, 0.25, 0.25, 0.25], [0.25, 0.25, 0.25, 0.25], [0.25, 0.25, 0.25, 0.25]]";

#[test]
fn decompose_linewidth_at_ten_kelvin() {
    let (code, out, err) = run(&["decompose-linewidth", "--temperature", "10"]);
    assert_eq!(code, 0, "{err}");
    let row = out
        .lines()
        .find(|l| l.starts_with("10,"))
        .expect("row for 10 K");
    let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    let gamma_h = cols[1];
    let fraction = cols[6];
    assert!((24e3..=28e3).contains(&gamma_h), "{gamma_h}");
    assert!((0.20..=0.30).contains(&fraction), "{fraction}");
    assert!((fraction - 0.2477).abs() < 1e-3);
}

#[test]
fn validate_flags_bad_row_sum() {
    let dir = tempfile::tempdir().unwrap();
    let good = format!("[system]\nsite_label = \"SiteII\"\nt_opt = 1.3e-3\n{PAPER_BETA}\n");
    let p = write(dir.path(), "good.toml", &good);
    assert_eq!(run(&["validate", "--config", &p]).0, 0);
    let bad = good.replace("[0.105, 0.105", "[0.3, 0.105");
    let p = write(dir.path(), "bad.toml", &bad);
    let (code, _, err) = run(&["validate", "--config", &p]);
    assert_eq!(code, 2);
    assert!(err.contains("beta row 1e"), "{err}");
}

#[test]
fn validate_reports_trace_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "t.csv",
        "# kind = HoleArea\nt_s,y\n0,1\n1,1\n0.5,1\n",
    );
    let (code, _, err) = run(&["validate", "--trace", &p]);
    assert_eq!(code, 2);
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn unknown_flag_prints_usage() {
    let (code, _, err) = run(&["simulate", "--frobnicate"]);
    assert_eq!(code, 64);
    assert!(err.contains("Usage"));
    assert_eq!(run(&["no-such-command"]).0, 64);
}

#[test]
fn echo_fit_from_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    let (code, _, err) = run(&[
        "gen-synthetic",
        "--model",
        "Echo2P",
        "--fix",
        "gamma_h=320",
        "--free",
        "gamma_h",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let trace = out.join("synthetic.csv");
    let (code, json, err) = run(&[
        "fit",
        "--model",
        "Echo2P",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let g = v["params"]["gamma_h"]["value"].as_f64().unwrap();
    assert!((g / 320.0 - 1.0).abs() < 1e-9, "{g}");
    assert!(v["params"]["gamma_h"]["stderr"].is_number());
}

#[test]
fn simulate_output_is_ingestible_for_every_model() {
    for model in [
        "FFHoleDecay",
        "SLRHoleDecay",
        "SLR3PE",
        "Echo2P",
        "OffsetExponential",
        "PowerLawRate",
        "GammaHvsT",
        "EchoTrainCorrection",
        "LorentzianProfile",
    ] {
        let (code, csv, err) = run(&["simulate", "--model", model]);
        assert_eq!(code, 0, "{model}: {err}");
        let tr = parse_trace(&csv).unwrap_or_else(|e| panic!("{model}: {e}"));
        assert!(tr.len() > 10);
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "seed = 11\n[model]\nname = \"FFHoleDecay\"\n[synthetic]\ntruth = { t_ff = 1.91e-3 }\nnoise = 0.01\nabscissa = { start = 0.0, end = 6e-3, n_points = 50 }\ntemperature_K = 1.8\n",
    );
    let mut outputs = Vec::new();
    for run_dir in ["a", "b"] {
        let out = dir.path().join(run_dir);
        let o = out.to_str().unwrap();
        assert_eq!(run(&["gen-synthetic", "--config", &cfg, "--out", o]).0, 0);
        let trace = out.join("synthetic.csv");
        let fit_dir = out.join("fit");
        let (code, _, err) = run(&[
            "fit",
            "--config",
            &cfg,
            "--trace",
            trace.to_str().unwrap(),
            "--out",
            fit_dir.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        outputs.push([
            std::fs::read(out.join("synthetic.csv")).unwrap(),
            std::fs::read(out.join("truth.json")).unwrap(),
            std::fs::read(fit_dir.join("fit.json")).unwrap(),
        ]);
    }
    assert_eq!(outputs[0], outputs[1]);
    let other = dir.path().join("c");
    run(&[
        "gen-synthetic",
        "--config",
        &cfg,
        "--seed",
        "12",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_ne!(
        std::fs::read(other.join("synthetic.csv")).unwrap(),
        outputs[0][0]
    );
}

#[test]
fn fit_series_writes_one_record_per_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    for (i, g) in ["200", "400"].iter().enumerate() {
        let out = dir.path().join(format!("g{i}"));
        let fix = format!("gamma_h={g}");
        run(&[
            "gen-synthetic",
            "--model",
            "Echo2P",
            "--fix",
            &fix,
            "--free",
            "gamma_h",
            "--out",
            out.to_str().unwrap(),
        ]);
        traces.push(out.join("synthetic.csv").to_str().unwrap().to_string());
    }
    let (code, json, err) = run(&[
        "fit-series",
        "--model",
        "Echo2P",
        "--trace",
        &traces[0],
        "--trace",
        &traces[1],
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    assert!((arr[1]["params"]["gamma_h"]["value"].as_f64().unwrap() - 400.0).abs() < 1e-6);
}

#[test]
fn degenerate_fit_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("# kind = EchoTrain\nn,y\n");
    for n in 1..=20 {
        body.push_str(&format!("{n},0.8\n"));
    }
    let p = write(dir.path(), "flat.csv", &body);
    let (code, _, err) = run(&["fit", "--model", "EchoTrainCorrection", "--trace", &p]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn deconvolve_recovers_simulated_hole() {
    use spinrelax::chirp::{simulate_chirped_transmission, ChirpReadout, HoleProfile};
    use spinrelax::io::format_trace;

    let dir = tempfile::tempdir().unwrap();
    let chirp = ChirpReadout::new(2e6, 60e-6).unwrap();
    let hole = HoleProfile {
        center: 1e5,
        fwhm: 56.6e3,
        depth: 0.5,
        baseline_absorption: 0.3,
    };
    let tr = simulate_chirped_transmission(&hole, &chirp).unwrap();
    let p = write(dir.path(), "chirp.csv", &format_trace(&tr));
    let cfg = write(
        dir.path(),
        "c.toml",
        "[chirp]\nspan_Hz = 2e6\nduration_s = 60e-6\n",
    );
    let out = dir.path().join("out");
    let (code, _, err) = run(&[
        "deconvolve",
        "--config",
        &cfg,
        "--trace",
        &p,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("profile_fit.json")).unwrap())
            .unwrap();
    let fwhm = v["params"]["fwhm"]["value"].as_f64().unwrap();
    assert!((fwhm / 56.6e3 - 1.0).abs() < 0.02, "{fwhm}");
    let profile = parse_trace(&std::fs::read_to_string(out.join("profile.csv")).unwrap()).unwrap();
    assert_eq!(profile.metadata["axis"], "frequency");

    let (code, _, _) = run(&["deconvolve", "--config", &cfg, "--trace", &p]);
    assert_eq!(code, 2);
}
