//! The `qgrad` binary end to end.

use std::io::Write;
use std::process::{Command, Output};

use qgrad_cli::table::{RUN_COLUMNS, WALL_MS_COLUMN};

fn qgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgrad")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect()
}

/// CSV text with the wall-time column blanked.
fn without_wall_time(text: &str) -> Vec<Vec<String>> {
    data_rows(text)
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(i, v)| if i == WALL_MS_COLUMN { String::new() } else { v.to_string() })
                .collect()
        })
        .collect()
}

#[test]
fn run_header_is_pinned() {
    let out = qgrad(&["gradient", "--function", "linear_d3", "--seed", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: qgrad-runs/1"));
    assert_eq!(
        lines.next(),
        Some("run_id,seed,function,method,d,n,N_or_m,a,q,epsilon,rho,error_linf,error_maxnorm,success,sim_calls,theory_cost,wall_ms")
    );
    assert_eq!(RUN_COLUMNS.len(), 17);
}

#[test]
fn linear_gradient_is_exact_on_every_seed() {
    let out = qgrad(&["gradient", "--function", "linear_d3", "--epsilon", "0.1", "--seeds", "10", "--jobs", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 10);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(&row[1], i.to_string().as_str());
        assert_eq!(&row[11], "0");
        assert_eq!(&row[13], "true");
    }
}

#[test]
fn missing_function_is_a_usage_error() {
    let out = qgrad(&["gradient", "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--function"));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_function_and_flags_are_rejected() {
    assert_eq!(qgrad(&["gradient", "--function", "nope"]).status.code(), Some(2));
    assert_eq!(qgrad(&["gradient", "--function", "poly_d2", "--colour", "red"]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical_modulo_wall_time() {
    for args in [
        &["gradient", "--function", "expcos_d2", "--seeds", "4"][..],
        &["hessian", "--function", "quartic_d3", "--method", "findiff", "--seeds", "2"],
        &["sparse-hessian", "--function", "quad_sparse_d8", "--sparsity", "2", "--modulus", "7", "--seeds", "3"],
    ] {
        let serial = qgrad(&[args, &["--jobs", "1"]].concat());
        let parallel = qgrad(&[args, &["--jobs", "3"]].concat());
        assert!(serial.status.success() && parallel.status.success(), "{args:?}");
        assert_eq!(without_wall_time(&stdout(&serial)), without_wall_time(&stdout(&parallel)), "{args:?}");
    }
    let a = qgrad(&["query-ledger", "--sparse-dims", "8"]);
    let b = qgrad(&["query-ledger", "--sparse-dims", "8"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_merges_under_flags() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "# gradient defaults\nfunction = linear_d3\nepsilon = 0.2\nseeds = 2").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("runs.csv");
    let path = file.path().to_str().unwrap();
    let out = qgrad(&["gradient", "--config", path, "--epsilon", "0.1", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let rows = data_rows(&std::fs::read_to_string(&out_path).unwrap());
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| &r[2] == "linear_d3" && &r[9] == "0.1"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "function = linear_d3\ncolour = red").unwrap();
    let out = qgrad(&["gradient", "--config", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn verify_bounds_exit_code_follows_asserted_checks() {
    // The pi^2/6 cap holds for m <= 2 only.
    let small = qgrad(&["verify-bounds", "--m-range", "1..2", "--fraction-samples", "2000"]);
    assert!(small.status.success(), "{}", String::from_utf8_lossy(&small.stderr));
    let wide = qgrad(&["verify-bounds", "--m-range", "1..4", "--n-range", "4..6", "--fraction-samples", "2000"]);
    assert_eq!(wide.status.code(), Some(1));
    let rows = data_rows(&stdout(&wide));
    assert!(rows.iter().filter(|r| &r[0] == "coeff_bound").all(|r| &r[7] == "true"));
    let failing: Vec<&str> = rows.iter().filter(|r| &r[7] == "false" && &r[8] == "true").map(|r| &r[1]).collect();
    assert_eq!(failing, ["3", "4"]);
    assert_eq!(qgrad(&["verify-bounds", "--m-range", "4..2"]).status.code(), Some(2));
}

#[test]
fn data_failures_keep_exit_code_zero() {
    // Two nonzeros per row cannot be recovered with s = 1; the rows say so.
    let out = qgrad(&["sparse-hessian", "--function", "quad_sparse_d8", "--sparsity", "1", "--modulus", "7", "--seeds", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| &r[13] == "false"));
}

#[test]
fn resource_failures_are_run_failures() {
    let out = qgrad(&["gradient", "--function", "poly_d2", "--amplitude-cap", "64"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn spectral_sweep_stays_under_its_bound() {
    let out = qgrad(&["spectral-error-sweep", "--n-range", "4..12"]);
    assert!(out.status.success());
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| &r[7] == "true"));
    let errors: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]));
}
