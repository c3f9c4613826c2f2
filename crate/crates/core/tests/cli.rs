use std::fs;
use std::process::{Command, Output};

fn modile(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modile")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn table_has_nine_rows() {
    let o = modile(&["table", "--dist", "normal:0,1", "--variant", "corrected"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 10);
    assert!(text.contains("0.9,1.09861228867,1.28155156554,0.861592112416,closed_form_corrected,"));
}

#[test]
fn split_table_falls_back_to_numeric_solver() {
    let o = modile(&["table", "--dist", "split:0.3:normal:0,1", "--tau", "0.3", "--h1", "1", "--h2", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("numeric_foc"));
}

#[test]
fn bad_input_exits_nonzero_with_diagnostic() {
    let o = modile(&["table", "--dist", "normal:0,-1"]);
    assert!(!o.status.success());
    let o = modile(&["table", "--dist", "normal:0,1", "--taus", "0.5,1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("tau = 1.5"), "{err}");
    let o = modile(&["analyze", "/nonexistent/prices.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_byte_deterministic() {
    let args = ["simulate", "--dist", "laplace:1,2", "--n", "2000", "--reps", "8", "--seed", "7", "--format", "json"];
    let a = modile(&args);
    let b = modile(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["kind"], "estimation_study");
    assert_eq!(v["data"]["records"].as_array().unwrap().len(), 9);
}

#[test]
fn rates_reports_slope_and_constant() {
    let o = modile(&["rates", "--dist", "normal:0,1", "--ns", "200,800,3200,12800", "--reps", "20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# slope: "));
    assert!(text.contains("# theorem2_constant: 2.0218"));
}

#[test]
fn estimate_from_input_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("values.csv");
    let mut text = String::from("id,value\n");
    for i in 0..101 {
        text.push_str(&format!("{i},{}\n", i as f64 / 100.0));
    }
    fs::write(&path, text).unwrap();
    let o = modile(&["estimate", "--input", path.to_str().unwrap(), "--tau", "0.5", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["data"]["table"]["rows"][0]["quantile"], 0.5);
}

#[test]
fn analyze_writes_table_summary_and_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    fs::write(&prices, "date,close\n2024-01-02,100\n2024-01-03,101\n2024-01-04,99.5\n2024-01-05,100.2\n").unwrap();
    let out = dir.path().join("result.csv");
    let o = modile(&["analyze", prices.to_str().unwrap(), "--taus", "0.25:0.75:0.25", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(&out).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let summary = fs::read_to_string(dir.path().join("result.summary.csv")).unwrap();
    assert!(summary.starts_with("n,mean,median,std,skewness,kurtosis,min,max\n3,"));

    let plot = dir.path().join("plot.csv");
    let o = modile(&["table", "--dist", "gamma:8,7", "--plot-data", plot.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(plot).unwrap().lines().count(), 28);
}

#[test]
fn verify_succeeds() {
    let o = modile(&["verify", "--draws", "200000"]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn conservative_reports_cells_and_signals_violations() {
    let o = modile(&["conservative", "--alpha", "2", "--taus", "0.99,0.999"]);
    assert!(o.status.success());
    let o = modile(&["conservative", "--alpha", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).lines().count(), 4);
}
