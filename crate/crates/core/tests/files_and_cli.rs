use nilcarnot::catalog::{
    algebra_to_json, direct_product, fixture, free_step2, load_algebra, parse_algebra, save_algebra, FixtureName,
};
use nilcarnot::cli::run;
use nilcarnot::scalar::qi;
use nilcarnot::{GradedAlgebra, VecQ};
use serde_json::Value;

fn assert_same(a: &GradedAlgebra, b: &GradedAlgebra) {
    assert_eq!(a.labels(), b.labels());
    assert_eq!(a.weights(), b.weights());
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            let (x, y): (VecQ, VecQ) = (a.basis_vector(i), a.basis_vector(j));
            assert_eq!(a.bracket(&x, &y).unwrap(), b.bracket(&x, &y).unwrap());
        }
    }
}

fn call(args: &[&str]) -> (i32, Value, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("nilcarnot").chain(args.iter().copied()), &mut out, &mut err);
    let report = serde_json::from_slice(&out).unwrap_or(Value::Null);
    (code, report, String::from_utf8(err).unwrap())
}

#[test]
fn algebras_round_trip_through_json() {
    let mut algebras: Vec<_> = FixtureName::ALL.iter().map(|&n| fixture(n)).collect();
    algebras.push(free_step2(5));
    algebras.push(direct_product(&fixture(FixtureName::Heisenberg3), &fixture(FixtureName::Engel4), &qi(3)).unwrap());
    for alg in algebras {
        let text = algebra_to_json(&alg).unwrap();
        assert_same(&parse_algebra(&text).unwrap(), &alg);
    }
}

#[test]
fn algebras_survive_the_file_system() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ladder5.json");
    let alg = fixture(FixtureName::Ladder5);
    save_algebra(&alg, &path).unwrap();
    assert_same(&load_algebra(&path).unwrap(), &alg);
    assert!(load_algebra(dir.path().join("missing.json")).is_err());
}

#[test]
fn malformed_files_are_rejected() {
    let bad = [
        r#"{"dim": 2, "labels": ["x"], "weights": [[1,1]], "brackets": []}"#,
        r#"{"dim": 1, "labels": ["x"], "weights": [[1,0]], "brackets": []}"#,
        r#"{"dim": 2, "labels": ["x","y"], "weights": [[1,1],[1,1]], "brackets": [[1,0,0,1,1]]}"#,
        r#"{"dim": 2, "labels": ["x","x"], "weights": [[1,1],[1,1]], "brackets": []}"#,
        "not json",
    ];
    for text in bad {
        assert!(parse_algebra(text).is_err(), "{text}");
    }
}

#[test]
fn exit_codes_follow_check_outcomes() {
    let (code, report, _) = call(&["maps", "automorphism", "--fixture", "heisprod4", "--map", "shear:2=0.5*q1"]);
    assert_eq!(code, 0);
    assert_eq!(report["schema"], "1");
    let (code, report, _) = call(&["maps", "automorphism", "--fixture", "heisprod4", "--map", "shear:2=q1^2"]);
    assert_eq!(code, 1);
    assert!(report["checks"].as_array().unwrap().iter().any(|c| c["status"] == "fail"));
    let (code, _, err) = call(&["maps", "automorphism", "--fixture", "heisprod4", "--map", "shear:2=q1^"]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
    let (code, _, _) = call(&["classify"]);
    assert_eq!(code, 2);
    let (code, _, _) = call(&["classify", "--algebra", "/nonexistent/file.json"]);
    assert_eq!(code, 2);
}

#[test]
fn algebra_files_feed_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("heis.json");
    save_algebra(&fixture(FixtureName::Heisprod4), &path).unwrap();
    let (code, report, _) = call(&["classify", "--algebra", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report["algebra"]["dim"], 4);
}

#[test]
fn reports_are_byte_identical_apart_from_timing() {
    let args = ["shear", "--fixture", "ladder5", "--component", "1=sign(q1)*sqrt(abs(q1))", "--verify", "--samples", "30", "--seed", "11"];
    let (_, mut a, _) = call(&args);
    let (_, mut b, _) = call(&args);
    a["wall_clock_ms"] = Value::Null;
    b["wall_clock_ms"] = Value::Null;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
