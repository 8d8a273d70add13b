use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spl")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn derive_linear_clamp_gives_half_square_penalty() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = spl(&[
        "derive",
        "--pipeline",
        "from-weight",
        "--input",
        "linear-clamp",
        "--lambda",
        "1",
        "--out",
        out,
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = table(&dir.path().join("r_sp.csv"));
    assert_eq!(header, ["v", "r_sp"]);
    for r in rows {
        let v = f(&r[0]);
        assert!((f(&r[1]) - (1.0 - v).powi(2) / 2.0).abs() < 1e-6, "{r:?}");
    }
    let report = json(&dir.path().join("validation.json"));
    assert_eq!(report["report"]["verdict"], true);
    assert_eq!(report["config"]["derive"]["input"], "linear-clamp");
    assert!(dir.path().join("latent.csv").exists() && dir.path().join("weight.csv").exists());
}

#[test]
fn derive_neg_log_gives_inverse_weight() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = spl(&[
        "derive",
        "--pipeline",
        "from-regularizer",
        "--input",
        "neg-log",
        "--out",
        out,
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (_, rows) = table(&dir.path().join("weight.csv"));
    for r in rows {
        let l = f(&r[0]);
        let expected = if l <= 1.0 { 1.0 } else { 1.0 / l };
        assert!((f(&r[1]) - expected).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn derive_from_samples_and_malformed_samples() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("w.csv");
    let rows: String = (0..=40)
        .map(|i| format!("{},{}\n", i as f64 * 0.2, (-(i as f64) * 0.2).exp()))
        .collect();
    fs::write(&good, format!("x,value\n{rows}")).unwrap();
    let out = dir.path().join("good");
    let res = spl(&[
        "derive",
        "--pipeline",
        "from-weight",
        "--input",
        good.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,value\n0,1\n0.5,oops\n").unwrap();
    let res = spl(&[
        "derive",
        "--pipeline",
        "from-weight",
        "--input",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}

#[test]
fn derive_rejects_increasing_weight_with_code_two() {
    let dir = TempDir::new().unwrap();
    let up = dir.path().join("up.csv");
    fs::write(&up, "x,value\n0,0.5\n1,1\n8,0\n").unwrap();
    let res = spl(&[
        "derive",
        "--pipeline",
        "from-weight",
        "--input",
        up.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn validate_catalog_and_nonconvex_penalty() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    for name in ["hard", "linear", "log", "exp"] {
        let res = spl(&["validate", "--regularizer", name, "--out", out]);
        assert_eq!(code(&res), 0, "{name}: {}", String::from_utf8_lossy(&res.stderr));
        assert_eq!(json(&dir.path().join("validation.json"))["report"]["verdict"], true);
    }
    let bumpy = dir.path().join("r.csv");
    fs::write(&bumpy, "x,value\n0,1\n0.5,0\n0.6,0.5\n1,0\n").unwrap();
    let res = spl(&[
        "validate",
        "--pipeline",
        "from-regularizer",
        "--input",
        bumpy.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(code(&res), 2);
    let res = spl(&["validate", "--regularizer", "nope", "--out", out]);
    assert_eq!(code(&res), 1);
}

#[test]
fn curriculum_order_lattice_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let res = spl(&[
        "curriculum",
        "--region",
        r#"{"kind":"halfspace","k":[1,-1]}"#,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = table(&dir.path().join("lattice.csv"));
    assert_eq!(header, ["l1", "l2", "F", "Fnew", "side"]);
    assert_eq!(rows.len(), 441);
    let big_f = |l: f64| 1.0 - (-l).exp();
    for r in &rows {
        let (l1, l2) = (f(&r[0]), f(&r[1]));
        let expected = if l1 <= l2 {
            big_f(l1) + big_f(l2)
        } else {
            2.0 * big_f(0.5 * (l1 + l2))
        };
        assert!((f(&r[3]) - expected).abs() <= 1e-3, "{r:?}");
        assert_eq!(r[4], if l1 <= l2 { "unaffected" } else { "penalized" });
    }
    let summary = json(&dir.path().join("summary.json"));
    assert!(summary["max_excess"].as_f64().unwrap() > 0.0);
    assert!(!summary["boundary_samples"].as_array().unwrap().is_empty());
}

#[test]
fn curriculum_full_space_is_singular_unless_check_disabled() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let region = r#"{"kind":"full","dim":2}"#;
    assert_eq!(code(&spl(&["curriculum", "--region", region, "--out", out])), 2);
    let res = spl(&["curriculum", "--region", region, "--no-check", "--out", out]);
    assert_eq!(code(&res), 0);
    let (_, rows) = table(&dir.path().join("lattice.csv"));
    assert!(rows.iter().all(|r| r[2] == r[3]));
}

#[test]
fn curriculum_groups_use_the_mean_loss() {
    let dir = TempDir::new().unwrap();
    let res = spl(&[
        "curriculum",
        "--region",
        r#"{"kind":"groups","partition":[[0,1]]}"#,
        "--lambda",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    let (_, rows) = table(&dir.path().join("lattice.csv"));
    for r in rows {
        let m = 0.5 * (f(&r[0]) + f(&r[1]));
        assert!((f(&r[3]) - 2.0 * 2.0 * (1.0 - (-m / 2.0).exp())).abs() < 1e-9);
    }
}

#[test]
fn config_file_merges_with_flags() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"region":{{"kind":"halfspace","k":[1,-1]}},"lattice":5,"lambda":0.5,"out":{:?}}}"#,
            out
        ),
    )
    .unwrap();
    let res = spl(&["curriculum", "--config", cfg.to_str().unwrap(), "--lattice", "3"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (_, rows) = table(&out.join("lattice.csv"));
    assert_eq!(rows.len(), 9);
    let echo = &json(&out.join("summary.json"))["config"];
    assert_eq!(echo["curriculum"]["lattice"], 3);
    assert_eq!(echo["curriculum"]["lambda"], 0.5);

    fs::write(&cfg, r#"{"region":{"kind":"halfspace","k":[1,-1]},"typo":1}"#).unwrap();
    let res = spl(&[
        "curriculum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("typo"));
}

#[test]
fn fit_hard_excludes_exactly_the_planted_outliers() {
    let dir = TempDir::new().unwrap();
    let data = data_file("outliers.csv");
    let res = spl(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--regularizer",
        "hard",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let result = json(&dir.path().join("result.json"));
    let planted = json(&data_file("outliers.json"))["outliers"].clone();
    assert_eq!(result["excluded"], planted);
    for i in planted.as_array().unwrap() {
        assert_eq!(result["v"][i.as_u64().unwrap() as usize], 0.0);
    }
    let (header, _) = table(&dir.path().join("trace.csv"));
    assert_eq!(header, ["iter", "lambda", "spl_objective", "latent_objective"]);
}

#[test]
fn fit_portion_schedule_runs_three_stages() {
    let dir = TempDir::new().unwrap();
    let data = data_file("outliers.csv");
    let res = spl(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--schedule",
        "portion",
        "--fractions",
        "0.3,0.6,1.0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    let result = json(&dir.path().join("result.json"));
    assert_eq!(result["stage_lambdas"].as_array().unwrap().len(), 3);
    let (_, rows) = table(&dir.path().join("trace.csv"));
    let lambdas: Vec<f64> = rows.iter().map(|r| f(&r[1])).collect();
    assert!(lambdas.windows(2).all(|p| p[1] >= p[0]));
}

#[test]
fn fit_cross_check_and_iteration_cap() {
    let dir = TempDir::new().unwrap();
    let data = data_file("outliers.csv");
    let out = dir.path().to_str().unwrap();
    let res = spl(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--regularizer",
        "exp",
        "--cross-check",
        "--out",
        out,
    ]);
    assert_eq!(code(&res), 0);
    let result = json(&dir.path().join("result.json"));
    assert!(result["cross_check"]["gradient_norm"].as_f64().unwrap() <= 1e-6);
    let res = spl(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--regularizer",
        "exp",
        "--max-inner",
        "1",
        "--out",
        out,
    ]);
    assert_eq!(code(&res), 3);
    assert_eq!(json(&dir.path().join("result.json"))["hit_cap"], true);
    let res = spl(&["fit", "--data", "/nonexistent.csv", "--out", out]);
    assert_eq!(code(&res), 1);
}

#[test]
fn compare_default_suite_and_determinism() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&spl(&["compare", "--out", out])), 0);
    let first_csv = fs::read(dir.path().join("compare.csv")).unwrap();
    let first_json = fs::read(dir.path().join("compare.json")).unwrap();
    assert_eq!(code(&spl(&["compare", "--out", out])), 0);
    assert_eq!(first_csv, fs::read(dir.path().join("compare.csv")).unwrap());
    assert_eq!(first_json, fs::read(dir.path().join("compare.json")).unwrap());
    let report = json(&dir.path().join("compare.json"));
    for s in report["summary"].as_array().unwrap() {
        if s["method"] != "ridge" {
            assert_eq!(s["wins"], s["seeds"]);
        }
    }
    assert_eq!(report["per_seed"].as_array().unwrap().len(), 10);
}

#[test]
fn compare_without_outliers_matches_ridge() {
    let dir = TempDir::new().unwrap();
    let res = spl(&[
        "compare",
        "--outlier-fraction",
        "0",
        "--regularizers",
        "hard",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    let (_, rows) = table(&dir.path().join("compare.csv"));
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][1], "ridge");
        assert!((f(&pair[0][2]) - f(&pair[1][2])).abs() <= 1e-6);
    }
    assert_eq!(
        code(&spl(&["compare", "--n", "0", "--out", dir.path().to_str().unwrap()])),
        1
    );
}
