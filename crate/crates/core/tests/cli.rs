use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rbffd::harness::{read_records, RECORDS_HEADER};

fn rbffd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbffd")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = rbffd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn nodes_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nodes.txt");
    ok(&["nodes", "--h", "0.08", "--seed", "1", "--preset", "c2", "--out", out.to_str().unwrap()]);
    let text = fs::read_to_string(&out).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("# d=2 h=0.08 N="), "{header}");
    let lines = data_lines(&out);
    let n: usize = header.rsplit('=').next().unwrap().parse().unwrap();
    assert_eq!(lines.len(), n);
    assert!((n as f64 - 1093.0).abs() <= 0.15 * 1093.0);
    let mut boundary = 0;
    for line in &lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(f.len(), 4);
        let (x, y): (f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        assert!(x.hypot(y) <= 1.5 + 1e-12);
        match f[2] {
            "b" => {
                boundary += 1;
                assert!((x.hypot(y) - 1.5).abs() < 1e-12);
            }
            "i" => {}
            other => panic!("kind {other}"),
        }
        assert!(["2", "4", "6"].contains(&f[3]));
    }
    assert_eq!(boundary, 118);
}

#[test]
fn solve_writes_all_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout = ok(&[
        "solve", "--n", "1500", "--preset", "c2", "--repeats", "1", "--dump-weights", "--dump-matrix",
        "--out-dir", d.to_str().unwrap(),
    ]);
    assert!(stdout.contains("order_spec=c2"));

    let records = fs::read_to_string(d.join("records.csv")).unwrap();
    assert_eq!(records.lines().next().unwrap(), RECORDS_HEADER);
    let rec = read_records(records.as_bytes()).unwrap().remove(0);
    assert_eq!(rec.case, "peak");
    assert_eq!(rec.n, rec.n_interior + rec.n_boundary);

    let solution = fs::read_to_string(d.join("solution.txt")).unwrap();
    assert_eq!(solution.lines().next().unwrap(), "# x y u_h u_exact abs_err");
    let rows = data_lines(&d.join("solution.txt"));
    assert_eq!(rows.len(), rec.n);
    let column = |k: usize| {
        rows.iter()
            .map(|l| l.split_whitespace().nth(k).unwrap().parse::<f64>().unwrap().abs())
            .fold(0.0, f64::max)
    };
    let rel = column(4) / column(3);
    assert!((rel - rec.e_inf).abs() <= 1e-12 * rel, "{rel} vs {}", rec.e_inf);

    let weights = data_lines(&d.join("weights.txt"));
    assert_eq!(weights.len(), rec.n_interior);
    let mut entries = 0;
    for line in &weights {
        let f: Vec<&str> = line.split_whitespace().collect();
        let n: usize = f[1].parse().unwrap();
        assert!([12, 30, 56].contains(&n));
        assert_eq!(f.len(), 2 + 2 * n);
        assert_eq!(f[0], f[2], "stencil must start with its center");
        entries += n;
    }

    let matrix = fs::read_to_string(d.join("matrix.txt")).unwrap();
    let header: Vec<usize> = matrix.lines().next().unwrap()[2..]
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(header, vec![rec.n, rec.nnz]);
    assert_eq!(matrix.lines().count() - 1, rec.nnz);
    assert_eq!(rec.nnz, entries + rec.n_boundary);
}

#[test]
fn report_refits_records() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = d.join("records.csv");
    let mut text = String::from(RECORDS_HEADER);
    text.push('\n');
    for (n, e) in [(1000, 1e-1), (10_000, 1e-3), (100_000, 1e-5)] {
        text.push_str(&format!("peak,{n},{n},0,0.01,uniform-2,1,{e},{e},{e},{},0,0,0,0,0\n", 12 * n));
    }
    fs::write(&csv, text).unwrap();
    let json = d.join("rates.json");
    let stdout = ok(&["report", csv.to_str().unwrap(), "--fit-min-n", "1000", "--json", json.to_str().unwrap()]);
    assert!(stdout.contains("uniform-2"));
    let rates: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    let k = rates[0]["k_n"].as_f64().unwrap();
    assert!((k + 2.0).abs() < 1e-12);
    assert!((rates[0]["k_h"].as_f64().unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn report_rejects_bad_header() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("records.csv");
    fs::write(&csv, "case,N\npeak,10\n").unwrap();
    assert!(!rbffd(&["report", csv.to_str().unwrap()]).status.success());
}

#[test]
fn invalid_inputs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n.txt");
    assert!(!rbffd(&["nodes", "--h", "0.1", "--preset", "c9", "--out", out.to_str().unwrap()]).status.success());
    assert!(!rbffd(&["nodes", "--h", "-1", "--out", out.to_str().unwrap()]).status.success());

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[sweep]\nrepeat = 3\n").unwrap();
    assert!(!rbffd(&["converge", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()])
        .status
        .success());
}

#[test]
fn converge_writes_report_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("sweep.toml");
    fs::write(
        &cfg,
        "[discretization]\nn_ladder = [800, 1600]\nseed = 3\n\n\
         [refinement]\npresets = [\"uniform-2\", \"c3\"]\n\n\
         [sweep]\nrepeats = 2\nfit_min_n = 500\n",
    )
    .unwrap();
    let stdout = ok(&["converge", "--config", cfg.to_str().unwrap(), "--out-dir", d.to_str().unwrap()]);
    assert!(stdout.contains("fit over N >= 500"));
    let records = read_records(fs::File::open(d.join("records.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.seed == 3));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["complete"], true);
    assert_eq!(report["rates"].as_array().unwrap().len(), 2);
    for f in ["report.txt", "fig_convergence.csv", "fig_convergence_refined.csv", "fig_times.csv", "plots.gp"] {
        assert!(d.join(f).exists(), "{f}");
    }
}
