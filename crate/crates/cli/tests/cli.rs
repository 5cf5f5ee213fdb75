//! End-to-end tests of the `zresid` binary: subcommand contracts, exit
//! codes, determinism, and bit-for-bit parity with library-level results.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zresid::gof::{run_method, TestMethod};
use zresid::sim::{generate_dataset, SimConfig};
use zresid::{fit_ppl, save_csv, CovariateSelector, FitControl, ModelSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zresid"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn zresid");
    assert!(
        out.status.success(),
        "zresid {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().expect("spawn zresid").status.code().unwrap_or(-1)
}

fn write_sim_csv(dir: &Path, seed: u64) -> PathBuf {
    let cfg = SimConfig::baseline(25, 0.0, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = generate_dataset(&cfg, &mut rng).unwrap();
    let path = dir.join("sim.csv");
    save_csv(&ds, &path).unwrap();
    path
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn fit_writes_json_with_three_coefficients_and_theta() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sim_csv(dir.path(), 1);
    let out = dir.path().join("fit.json");
    run_ok(&[
        "fit",
        "--data",
        &s(&data),
        "--covariate",
        "x1",
        "--covariate",
        "x2:log",
        "--covariate",
        "x3",
        "--out",
        &s(&out),
    ]);
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(fit["beta"].as_array().unwrap().len(), 3);
    assert!(fit["theta"].as_f64().unwrap() >= 0.0);
    assert_eq!(fit["term_names"][1], "log(x2)");
    assert_eq!(fit["converged"], true);
}

#[test]
fn fit_missing_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "time,status\n1,1\n").unwrap();
    let code = exit_code(&[
        "fit",
        "--data",
        &s(&data),
        "--out",
        &s(&dir.path().join("f.json")),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn bad_flag_usage_exits_2() {
    assert_eq!(exit_code(&["fit", "--nope"]), 2);
}

#[test]
fn residuals_and_test_are_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sim_csv(dir.path(), 2);
    let fit = dir.path().join("fit.json");
    run_ok(&[
        "fit", "--data", &s(&data), "--covariate", "x1", "--covariate", "x2:log",
        "--covariate", "x3", "--out", &s(&fit),
    ]);

    let r1 = dir.path().join("r1.csv");
    let r2 = dir.path().join("r2.csv");
    for (out, seed) in [(&r1, "77"), (&r2, "77")] {
        run_ok(&[
            "residuals", "--fit", &s(&fit), "--data", &s(&data), "--kind", "z", "--seed", seed,
            "--out", &s(out),
        ]);
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());

    let t1 = dir.path().join("t1.json");
    let t2 = dir.path().join("t2.json");
    for out in [&t1, &t2] {
        run_ok(&[
            "test", "--fit", &s(&fit), "--data", &s(&data), "--method", "z-sw", "--seed", "5",
            "--replicates", "12", "--out", &s(out),
        ]);
    }
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());

    let parsed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&t1).unwrap()).unwrap();
    assert_eq!(parsed["p_values"].as_array().unwrap().len(), 12);
    assert!(parsed["p_min"].as_f64().unwrap() <= 1.0);
}

#[test]
fn single_replicate_pmin_equals_p() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sim_csv(dir.path(), 3);
    let fit = dir.path().join("fit.json");
    run_ok(&[
        "fit", "--data", &s(&data), "--covariate", "x1", "--covariate", "x2:log",
        "--covariate", "x3", "--out", &s(&fit),
    ]);
    let t = dir.path().join("t.json");
    run_ok(&[
        "test", "--fit", &s(&fit), "--data", &s(&data), "--method", "z-aov-lp", "--seed", "9",
        "--out", &s(&t),
    ]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
    assert_eq!(v["replicates"], 1);
    let p = v["p_values"][0].as_f64().unwrap();
    assert_eq!(v["p_min"].as_f64().unwrap(), p);
    assert_eq!(v["report"]["p_value"].as_f64().unwrap(), p);
}

#[test]
fn cli_test_matches_library_bit_for_bit() {
    // simulate → fit (CLI) → z-aov-cov (CLI) must equal the library path on
    // the same fit file.
    let dir = tempfile::tempdir().unwrap();
    let data = write_sim_csv(dir.path(), 4);
    let fit_path = dir.path().join("fit.json");
    run_ok(&[
        "fit", "--data", &s(&data), "--covariate", "x1", "--covariate", "x2",
        "--covariate", "x3", "--out", &s(&fit_path),
    ]);
    let t = dir.path().join("t.json");
    run_ok(&[
        "test", "--fit", &s(&fit_path), "--data", &s(&data), "--method", "z-aov-cov", "--cov",
        "x2:log", "--seed", "31", "--replicates", "8", "--out", &s(&t),
    ]);
    let cli_out: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();

    // Library side: same dataset, same fit JSON, same derived seeds.
    let ds = zresid::load_csv(&data, &zresid::CsvSchema::canonical()).unwrap();
    let fit: zresid::FrailtyFit =
        serde_json::from_str(&std::fs::read_to_string(&fit_path).unwrap()).unwrap();
    let method = TestMethod::ZAovCov(CovariateSelector::log("x2"));
    for j in 0..8u64 {
        let seed_j = zresid::seed::derive(31, &[j]);
        let report = run_method(&fit, &ds, &method, 10, seed_j).unwrap();
        let cli_p = cli_out["p_values"][j as usize].as_f64().unwrap();
        assert_eq!(report.p_value, cli_p, "replicate {j}");
    }

    // And the CLI fit equals a library fit on the same data.
    let spec = ModelSpec::new(
        vec![
            CovariateSelector::identity("x1"),
            CovariateSelector::identity("x2"),
            CovariateSelector::identity("x3"),
        ],
        true,
    );
    let lib_fit = fit_ppl(&ds, &spec, &FitControl::default()).unwrap();
    assert_eq!(lib_fit.beta, fit.beta);
    assert_eq!(lib_fit.theta, fit.theta);
}

#[test]
fn plots_write_svg_and_matching_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sim_csv(dir.path(), 5);
    let fit = dir.path().join("fit.json");
    run_ok(&[
        "fit", "--data", &s(&data), "--covariate", "x1", "--covariate", "x2:log",
        "--covariate", "x3", "--out", &s(&fit),
    ]);

    let n = 500; // 20 clusters × 25
    for (kind, extra) in [
        ("qq", vec!["--seed", "1"]),
        ("chf45", vec![]),
        ("scatter-lowess", vec!["--seed", "1", "--x", "x2:log"]),
        ("grouped-box", vec!["--seed", "1", "--x", "LP"]),
        ("pvalue-hist", vec!["--seed", "1", "--method", "z-sw", "--replicates", "40"]),
    ] {
        let svg = dir.path().join(format!("{kind}.svg"));
        let csv = dir.path().join(format!("{kind}.csv"));
        let mut args = vec![
            "plot".to_string(),
            "--kind".into(),
            kind.into(),
            "--fit".into(),
            s(&fit),
            "--data".into(),
            s(&data),
            "--svg".into(),
            s(&svg),
            "--csv".into(),
            s(&csv),
        ];
        args.extend(extra.iter().map(|e| e.to_string()));
        let out = bin().args(&args).output().unwrap();
        assert!(out.status.success(), "plot {kind}: {}", String::from_utf8_lossy(&out.stderr));

        let svg_text = std::fs::read_to_string(&svg).unwrap();
        assert!(svg_text.starts_with("<svg"));
        assert!(svg_text.contains("width=\"640\" height=\"480\""));
        let csv_text = std::fs::read_to_string(&csv).unwrap();
        match kind {
            "qq" | "scatter-lowess" => assert_eq!(csv_text.lines().count(), n + 1),
            "pvalue-hist" => assert_eq!(csv_text.lines().count(), 21),
            "grouped-box" => assert!(csv_text.lines().count() <= 11),
            _ => assert!(csv_text.lines().count() > 1),
        }
    }

    // Z-based plots without --seed are a validation error.
    assert_eq!(
        exit_code(&[
            "plot", "--kind", "qq", "--fit", &s(&fit), "--data", &s(&data), "--svg",
            &s(&dir.path().join("x.svg")), "--csv", &s(&dir.path().join("x.csv")),
        ]),
        2
    );
}

#[test]
fn simulate_runs_a_tiny_grid_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.json");
    std::fs::write(
        &config,
        r#"{
  "seed": 11,
  "grid": {
    "cluster_sizes": [10],
    "censor_targets": [0.0],
    "n_replicates": 6,
    "n_pilot": 5000,
    "models": ["true"],
    "tests": [{"method": "z-sw"}, {"method": "z-aov-lp"}]
  }
}"#,
    )
    .unwrap();

    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    for (out, par) in [(&out1, "1"), (&out2, "2")] {
        run_ok(&["simulate", "--config", &s(&config), "--out-dir", &s(out), "--parallelism", par]);
    }
    let csv1 = std::fs::read(out1.join("rejection_rates.csv")).unwrap();
    let csv2 = std::fs::read(out2.join("rejection_rates.csv")).unwrap();
    assert_eq!(csv1, csv2, "rejection table depends on parallelism");

    let text = String::from_utf8(csv1).unwrap();
    assert_eq!(text.lines().next().unwrap(), "cluster_size,censor_target,model,test,n_used,n_failed,rejection_rate,mc_se");
    assert_eq!(text.lines().count(), 3); // header + 2 tests × 1 model × 1 cell
    assert!(out1.join("manifest.json").exists());
}
