use std::path::Path;
use std::process::{Command, Output};

fn spand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spand"))
        .args(args)
        .env_remove("SPAND_OUT_DIR")
        .output()
        .expect("spawn spand")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn exact_preconditioner_converges_in_one_step() {
    let out = spand(&["solve", "--laplacian", "32", "--eps", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["n_cg"], 1);
    assert_eq!(v["n"], 1024);
    assert_eq!(v["jacobi"], false);
}

#[test]
fn second_order_on_64_grid() {
    let out = spand(&["solve", "--laplacian", "64", "--rho", "1", "--eps", "0.01", "--scheme", "second-full"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["converged"], true);
    assert!(v["n_cg"].as_u64().unwrap() <= 8, "{}", v["n_cg"]);
    assert_eq!(v["scheme"], "second-full");
}

#[test]
fn missing_matrix_file_is_input_error() {
    let out = spand(&["solve", "--matrix", "definitely-missing.mtx"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_matrix_file_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.mtx");
    std::fs::write(&p, "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n").unwrap();
    let out = spand(&["solve", "--matrix", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn file_input_is_prescaled_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.mtx");
    let a = spand::laplacian_2d(12);
    spand::write_matrix_market(&p, &a).unwrap();
    let out = spand(&["solve", "--matrix", p.to_str().unwrap(), "--eps", "0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["jacobi"], true);
    let out = spand(&["solve", "--matrix", p.to_str().unwrap(), "--no-jacobi"]);
    assert_eq!(json(&out)["jacobi"], false);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(spand(&["bench"]).status.code(), Some(1));
    assert_eq!(spand(&["solve", "--laplacian", "8", "--eps", "2"]).status.code(), Some(1));
    assert_eq!(spand(&["solve"]).status.code(), Some(1));
    assert_eq!(spand(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(spand(&["forward-error", "--d", "20", "--rho", "100"]).status.code(), Some(1));
    assert_eq!(spand(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_writes_csv_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_spand"))
        .args(["bench", "--d", "24", "--eps", "0.1", "--skip-levels", "0"])
        .env("SPAND_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(headers, ["d", "n", "rho", "eps", "scheme", "mu", "n_cg", "converged", "t_f", "t_s", "t_t"]);
    let schemes: Vec<String> = rdr.records().map(|r| r.unwrap()[4].to_string()).collect();
    assert_eq!(schemes, ["first", "second-full", "second-superfine"]);
}

#[test]
fn forward_error_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fe.csv");
    let out = spand(&[
        "forward-error", "--d", "20", "--eps", "0", "--scheme", "first", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(Path::new(&path)).unwrap();
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        assert!(r[4].parse::<f64>().unwrap() <= 1e-10);
        rows += 1;
    }
    assert_eq!(rows, spand::sparse::p_sequence(20).len());
}

#[test]
fn verify_single_suite() {
    let out = spand(&["verify", "--only", "rate-identity"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("PASS rate-identity"));
    assert!(!err.contains("theorem"));
}

#[test]
fn verify_catches_flipped_correction_sign() {
    let out = spand(&["verify", "--only", "theorem", "--inject-sign-flip"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theorem"));
}

#[test]
fn deterministic_reports() {
    let strip = |o: Output| {
        let mut v = json(&o);
        for k in ["t_f", "t_s", "t_t"] {
            v[k] = serde_json::Value::Null;
        }
        v
    };
    let args = ["solve", "--laplacian", "40", "--rho", "100", "--seed", "3", "--eps", "0.05", "--skip-levels", "1"];
    assert_eq!(strip(spand(&args)), strip(spand(&args)));
}
