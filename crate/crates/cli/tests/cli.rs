use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ::aqua::scenario::{spring_balance, support_design, SPRING_D_SUPPORT};
use aqua_cli::formats::{read_constraints, read_model, write_constraints, write_model, DesignDocument, MatrixFile};
use tempfile::TempDir;

fn aqua(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aqua")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenario(dir: &Path, args: &[&str]) -> (PathBuf, PathBuf) {
    let mut all = vec!["scenario"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", s(dir)]);
    let out = aqua(&all);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (dir.join("model.csv"), dir.join("constraints.json"))
}

fn model_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

fn write_json(path: &Path, value: &impl serde::Serialize) {
    std::fs::write(path, serde_json::to_string(value).unwrap()).unwrap();
}

/// `d` on the diagonal, `o` elsewhere.
fn compound(m: usize, d: f64, o: f64) -> MatrixFile {
    MatrixFile {
        matrix: (0..m).map(|i| (0..m).map(|j| if i == j { d } else { o }).collect()).collect(),
    }
}

#[test]
fn scenario_sizes() {
    let tmp = TempDir::new().unwrap();
    let (m, _) = scenario(&tmp.path().join("spring"), &["spring-balance", "--m", "6"]);
    assert_eq!(model_rows(&m), 64);
    let (m, _) = scenario(&tmp.path().join("fine"), &["scheffe", "--step", "0.025"]);
    assert_eq!(model_rows(&m), 861);
    let (m, _) = scenario(&tmp.path().join("coarse"), &["scheffe", "--step", "0.5"]);
    assert_eq!(model_rows(&m), 6);
    let (m, c) = scenario(&tmp.path().join("tall"), &["synthetic-tall", "--n", "300", "--strata", "4"]);
    assert_eq!(model_rows(&m), 300);
    assert_eq!(read_constraints(&c).unwrap().n(), 300);
}

#[test]
fn tabulated_design_has_full_efficiency() {
    let tmp = TempDir::new().unwrap();
    let (model, cons) = scenario(tmp.path(), &["spring-balance", "--m", "6", "--N", "7"]);
    let design = tmp.path().join("design.json");
    let weights = support_design::<f64>(&SPRING_D_SUPPORT, 7.0);
    write_json(&design, &DesignDocument::new("manual", "D".into(), weights));
    let anchor = tmp.path().join("mstar.json");
    write_json(&anchor, &compound(6, 4.0, 2.0));
    let out_doc = tmp.path().join("eval.json");
    let out = aqua(&[
        "eval", "--model", s(&model), "--constraints", s(&cons), "--design", s(&design), "--anchor", s(&anchor),
        "--out", s(&out_doc),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = DesignDocument::read(&out_doc).unwrap();
    assert_eq!(doc.schema, "aqua/1");
    assert!((doc.efficiency_bound.unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn exact_design_at_a_replicable_size() {
    let tmp = TempDir::new().unwrap();
    let (model, cons) = scenario(tmp.path(), &["spring-balance", "--m", "6", "--N", "10"]);
    let exact = tmp.path().join("exact.json");
    let selected = tmp.path().join("selected.csv");
    let out = aqua(&[
        "exact", "--model", s(&model), "--constraints", s(&cons), "--criterion", "A", "--out", s(&exact), "--csv",
        s(&selected),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = DesignDocument::read(&exact).unwrap();
    assert_eq!(doc.weights.iter().sum::<f64>(), 10.0);
    assert!(doc.weights.iter().all(|w| w.fract() == 0.0));
    assert!(selected.exists());

    let anchor = tmp.path().join("mstar.json");
    write_json(&anchor, &compound(6, 5.0, 2.0));
    let eval = tmp.path().join("eval.json");
    let out = aqua(&[
        "eval", "--model", s(&model), "--constraints", s(&cons), "--criterion", "A", "--design", s(&exact),
        "--anchor", s(&anchor), "--out", s(&eval),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(DesignDocument::read(&eval).unwrap().efficiency_bound.unwrap() >= 0.98);
}

#[test]
fn rounding_equal_weights() {
    let tmp = TempDir::new().unwrap();
    let design = tmp.path().join("approx.json");
    let mut w = vec![0.0; 15];
    for v in w.iter_mut().take(10) {
        *v = 0.1;
    }
    write_json(&design, &DesignDocument::new("approx", "D".into(), w));
    let out_doc = tmp.path().join("round.json");
    let out = aqua(&["round", "--design", s(&design), "--N", "10", "--out", s(&out_doc)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = DesignDocument::read(&out_doc).unwrap();
    assert_eq!(&doc.weights[..10], &[1.0; 10]);
    assert!(doc.weights[10..].iter().all(|&v| v == 0.0));

    let out = aqua(&["round", "--design", s(&design), "--N", "9"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn files_round_trip_exactly() {
    let tmp = TempDir::new().unwrap();
    let sc = spring_balance::<f64>(4, 9).unwrap();
    let model = tmp.path().join("model.csv");
    let cons = tmp.path().join("constraints.json");
    write_model(&model, &sc.problem).unwrap();
    write_constraints(&cons, &sc.constraints).unwrap();
    let p = read_model(&model).unwrap();
    let c = read_constraints(&cons).unwrap();
    assert_eq!(p.regressors().unwrap(), sc.problem.regressors().unwrap());
    assert_eq!(c.rows(), sc.constraints.rows());
    assert_eq!(c.lower(), sc.constraints.lower());
    assert_eq!(c.upper(), sc.constraints.upper());
    assert_eq!(c.integer(), sc.constraints.integer());

    let model2 = tmp.path().join("model2.csv");
    write_model(&model2, &p).unwrap();
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&model2).unwrap());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let (model, cons) = scenario(tmp.path(), &["spring-balance", "--m", "4", "--N", "9"]);

    assert_eq!(code(&aqua(&["exact", "--model", s(&model), "--criterion", "Q", "--N", "5"])), 1);
    assert_eq!(code(&aqua(&["exact", "--model", s(&model)])), 1);

    let text = std::fs::read_to_string(&cons).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().insert("colour".into(), "red".into());
    let extra = tmp.path().join("extra.json");
    std::fs::write(&extra, v.to_string()).unwrap();
    assert_eq!(code(&aqua(&["exact", "--model", s(&model), "--constraints", s(&extra)])), 1);

    let n = read_model(&model).unwrap().n();
    let infeasible = serde_json::json!({
        "schema": "aqua/1",
        "n": n,
        "rows": [{"sparse": [[0, 1.0]], "sense": "ge", "rhs": 3.0}],
        "bounds": vec![(0.0, Some(1.0)); n],
    });
    let bad = tmp.path().join("infeasible.json");
    write_json(&bad, &infeasible);
    assert_eq!(code(&aqua(&["exact", "--model", s(&model), "--constraints", s(&bad)])), 2);

    let capped = tmp.path().join("capped.json");
    let out = aqua(&[
        "exact", "--model", s(&model), "--constraints", s(&cons), "--criterion", "A", "--node-cap", "1", "--gap",
        "0", "--out", s(&capped),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(DesignDocument::read(&capped).is_ok());
}

#[test]
fn export_writes_versioned_json() {
    let tmp = TempDir::new().unwrap();
    let (model, cons) = scenario(tmp.path(), &["spring-balance", "--m", "4", "--N", "9"]);
    let path = tmp.path().join("micqp.json");
    let out = aqua(&["export", "--model", s(&model), "--constraints", s(&cons), "--out", s(&path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = ::aqua::MicqpDocument::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc.schema, "aqua/1");
    assert_eq!(code(&aqua(&["export", "--model", s(&model), "--constraints", s(&cons)])), 1);
}
