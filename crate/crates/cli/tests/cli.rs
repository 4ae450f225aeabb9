use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ddro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddro"))
        .args(args)
        .env_remove("DDRO_THREADS")
        .output()
        .expect("run ddro")
}

fn json_field(line: &str, key: &str) -> String {
    let pattern = format!("\"{key}\":");
    let start = line.find(&pattern).unwrap_or_else(|| panic!("{key} missing in {line}")) + pattern.len();
    let rest = &line[start..];
    let end = if rest.starts_with('[') {
        rest.find(']').unwrap() + 1
    } else {
        rest.find([',', '}']).unwrap()
    };
    rest[..end].to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_saa_linear_picks_a_vertex() {
    let o = ddro(&["solve", "--synthetic", "--m", "2", "--n", "10", "--approach", "saa", "--rho", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    assert_eq!(json_field(&line, "status"), "\"optimal\"");
    let x: Vec<f64> = json_field(&line, "x")
        .trim_matches(['[', ']'])
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(x.len(), 2);
    assert!(x.iter().any(|&w| w > 1.0 - 1e-6), "{x:?}");
}

#[test]
fn zero_radius_wdroa_matches_saa() {
    let common = ["--synthetic", "--m", "4", "--n", "12", "--seed", "3"];
    let a = ddro(&[&["solve", "--approach", "saa"][..], &common[..]].concat());
    let b = ddro(&[&["solve", "--approach", "wdroa", "--eps", "0"][..], &common[..]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let ja: f64 = json_field(&stdout(&a), "objective").parse().unwrap();
    let jb: f64 = json_field(&stdout(&b), "objective").parse().unwrap();
    assert!((ja - jb).abs() <= 1e-6, "{ja} vs {jb}");
}

#[test]
fn unsupported_configuration_exits_2() {
    let o = ddro(&[
        "solve", "--synthetic", "--m", "3", "--n", "8", "--approach", "wdros", "--support", "limited", "--p", "2",
        "--eps", "0.1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p = 2"));
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(ddro(&["solve", "--approach", "nope", "--synthetic"]).status.code(), Some(2));
    assert_eq!(ddro(&["solve", "--approach", "saa"]).status.code(), Some(2));
    assert_eq!(ddro(&["solve", "--synthetic", "--approach", "wdroa", "--eps", "-1"]).status.code(), Some(2));
}

#[test]
fn solve_reads_csv_and_var_wdroa() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let o = ddro(&["gen-data", "--m", "3", "--n", "25", "--seed", "4", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = ddro(&["solve", "--data", path.to_str().unwrap(), "--approach", "var-wdroa", "--eps", "0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j: f64 = json_field(&stdout(&o), "objective").parse().unwrap();
    assert!(j > 0.0);
    let o = ddro(&["solve", "--data", dir.path().join("missing.csv").to_str().unwrap(), "--approach", "saa"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_data_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = ddro(&["gen-data", "--m", "10", "--n", "30", "--seed", "1", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = fs::read_to_string(&a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 31);
    assert!(lines[0].starts_with("xi_1,") && lines[0].ends_with("xi_10"));
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 10));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let o = ddro(&["gen-data", "--m", "0", "--n", "30", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn run_sweep(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "sweep", "--runs", "2", "--n", "10", "--m", "3", "--eps-points", "3", "--eval-n", "2000", "--seed", "5",
        "--out",
    ];
    args.push(dir.to_str().unwrap());
    args.extend_from_slice(extra);
    ddro(&args)
}

#[test]
fn sweep_smoke_files_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run_sweep(&a, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(run_sweep(&b, &["--threads", "1"]).status.code(), Some(0));
    for name in [
        "records.csv",
        "summary.csv",
        "fig_oos_portfolio.svg",
        "fig_oos_comprehensive.svg",
        "fig_tau_diff.svg",
        "fig_portfolio_diff.svg",
    ] {
        assert!(a.join(name).is_file(), "{name} missing");
    }
    let records = fs::read_to_string(a.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 2 * 3 * 2);
    assert_eq!(fs::read(a.join("records.csv")).unwrap(), fs::read(b.join("records.csv")).unwrap());
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "eps,approach,mean_j_hat,mean_oos_portfolio,q20_oos_portfolio,q80_oos_portfolio,mean_oos_comprehensive,\
         q20_oos_comprehensive,q80_oos_comprehensive,reliability_portfolio,reliability_comprehensive,mean_tau_diff,\
         mean_portfolio_linf_diff"
    );
    assert_eq!(stdout(&o).lines().count(), 3 * 2);
    let svg = fs::read_to_string(a.join("fig_oos_portfolio.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("WDROA") && !svg.contains("NaN"));
}

#[test]
fn sweep_records_satisfy_bench_invariants() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_sweep(dir.path(), &[]).status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    // Rows alternate S, A for each (eps, run).
    for pair in rows.chunks(2) {
        assert_eq!((pair[0][2].as_str(), pair[1][2].as_str()), ("S", "A"));
        assert_eq!(pair[0][..2], pair[1][..2]);
        let (js, ja): (f64, f64) = (pair[0][4].parse().unwrap(), pair[1][4].parse().unwrap());
        assert!(js <= ja + 1e-6);
        for r in pair {
            let (port, comp): (f64, f64) = (r[5].parse().unwrap(), r[6].parse().unwrap());
            assert!(comp >= port - 1e-9);
        }
    }
}

#[test]
fn sweep_rejects_unsupported_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_sweep(&dir.path().join("x"), &["--support", "limited", "--p", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("x").exists());
}
