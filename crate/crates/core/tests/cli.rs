use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_re-sysid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, snr: &str) {
    let o = bin(&["simulate", "--seed", "5", "--snr-db", snr, "--out", p(dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&bin(&["--help"])), 0);
    assert_eq!(code(&bin(&["fit"])), 2);
    assert_eq!(code(&bin(&["estimate", "--u", "u.txt"])), 2);
    assert_eq!(code(&bin(&["sweep", "--trials", "many"])), 2);
}

#[test]
fn simulate_then_estimate_from_files() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "20");
    for f in ["u.txt", "y.txt", "ybar.txt", "theta.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let out = dir.path().join("est");
    let o = bin(&[
        "estimate",
        "--u",
        p(&dir.path().join("u.txt")),
        "--y",
        p(&dir.path().join("y.txt")),
        "--max-len",
        "80",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("d* = ") && text.contains("selected from"), "{text}");
    assert!(out.join("theta.csv").exists() && out.join("bound_grid.csv").exists());
}

#[test]
fn known_variance_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "15");
    let (u, y) = (dir.path().join("u.txt"), dir.path().join("y.txt"));
    let o = bin(&["estimate", "--u", p(&u), "--y", p(&y), "--sigma-known", "0.01", "--max-len", "80", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("(known)"));
    let o = bin(&["estimate", "--u", p(&u), "--y", p(&y), "--sigma-known", "-1", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_and_short_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0.5\nabc\n1.0\n").unwrap();
    let o = bin(&["estimate", "--u", p(&bad), "--y", p(&bad), "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.txt"));

    let short = dir.path().join("short.txt");
    fs::write(&short, (0..50).map(|i| format!("{}\n", if i % 3 == 0 { 1 } else { -1 })).collect::<String>()).unwrap();
    let o = bin(&["estimate", "--u", p(&short), "--y", p(&short), "--max-len", "100", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    let o = bin(&["online", "--u", p(&short), "--y", p(&short), "--sigma-known", "0.1", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn exact_fit_has_no_feasible_variance() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("u.txt");
    let text: String = (0..200).map(|i| format!("{}\n", if (i * 7) % 5 < 2 { 1.0 } else { -1.0 })).collect();
    fs::write(&f, text).unwrap();
    let o = bin(&["estimate", "--u", p(&f), "--y", p(&f), "--sigma-known", "0.1", "--max-len", "5", "--out", p(dir.path())]);
    assert_eq!(code(&o), 3);
}

#[test]
fn online_stops_and_validates_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["online", "--seed", "3", "--snr-db", "15", "--epsilon", "1.0", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("ratio below epsilon"));
    let trace = dir.path().join("online_trace.csv");
    assert_eq!(csv_rows(&trace), 1);
    let header = fs::read_to_string(&trace).unwrap();
    assert!(header.starts_with("N,d_star,m_star,ratio,stopped"));
    for eps in ["0", "1.5", "-0.1"] {
        assert_eq!(code(&bin(&["online", "--seed", "3", "--epsilon", eps, "--out", p(dir.path())])), 2, "{eps}");
    }
}

#[test]
fn sweep_writes_one_row_per_snr_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["sweep", "--seed", "2", "--trials", "3", "--snr-db", "10,20", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&dir.path().join("delay_table.csv")), 2 * 3);
    assert_eq!(csv_rows(&dir.path().join("trials.csv")), 3 * 2 * 3);
    assert!(dir.path().join("joint_table.csv").exists());

    let only = dir.path().join("re");
    let o = bin(&["sweep", "--seed", "2", "--trials", "2", "--snr-db", "12", "--methods", "re", "--sigma-known", "--out", p(&only)]);
    assert_eq!(code(&o), 0);
    assert_eq!(csv_rows(&only.join("order_table.csv")), 1);

    let base = dir.path().join("base");
    let o = bin(&["sweep", "--seed", "2", "--trials", "2", "--snr-db", "12", "--methods", "aic,bic", "--out", p(&base)]);
    assert_eq!(code(&o), 0);
    assert!(!base.join("joint_table.csv").exists());
    assert_eq!(code(&bin(&["sweep", "--methods", "mdl", "--out", p(&base)])), 2);
}

#[test]
fn seeded_runs_repeat() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(a.path(), "10");
    simulate(b.path(), "10");
    assert_eq!(fs::read(a.path().join("y.txt")).unwrap(), fs::read(b.path().join("y.txt")).unwrap());
}
