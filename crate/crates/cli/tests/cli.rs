use std::path::PathBuf;
use std::process::{Command, Output};

fn imkg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imkg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("imkg-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn check_232a_prints_order_and_flags() {
    let o = imkg(&["methods", "check", "IMKG232a"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("order 2\n"), "{s}");
    assert!(s.contains("I or A  A\n"), "{s}");
    assert!(s.contains("VI      Y\n"), "{s}");
    assert!(s.contains("SD      Y\n"), "{s}");
}

#[test]
fn inconsistent_record_exits_one_with_diagnostics() {
    let o = imkg(&["methods", "check", "243a"]);
    assert_eq!(o.status.code(), Some(1));
    let s = stdout(&o);
    assert!(s.contains("as_printed_inconsistent"), "{s}");
    assert!(s.contains("b.chat"), "{s}");
}

#[test]
fn usage_errors_exit_two() {
    let o = imkg(&["methods", "check", "IMKG999z"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("usage"));
    assert_eq!(imkg(&["stability", "hmap", "232a"]).status.code(), Some(2));
    assert_eq!(imkg(&["frobnicate"]).status.code(), Some(2));
    let out = scratch("never.csv");
    let o = imkg(&["integrate", "hevi", "232a", "--dt", "0.1", "--tend", "1", "-o", out.to_str().unwrap(), "--set", "kq=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hmap_row_count_and_determinism() {
    let a = scratch("g1.csv");
    let b = scratch("g2.csv");
    for path in [&a, &b] {
        let o = imkg(&[
            "stability", "hmap", "IMKG232b", "--xmax", "2.5", "--zmax", "50", "--nx", "251", "--nz", "501", "-o",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next(), Some("x,z,rho"));
    assert_eq!(text.lines().count(), 125751 + 1);
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
}

#[test]
fn poly_reports_axis_limit_and_class() {
    let s = stdout(&imkg(&["stability", "poly", "232a"]));
    assert!(s.contains("r0 2.0000000"), "{s}");
    assert!(s.contains("class KGO"), "{s}");
}

#[test]
fn derived_tableau_reads_back() {
    let path = scratch("343.txt");
    let o = imkg(&[
        "derive", "imkg3q4", "--d2", "1", "--d3", "1", "--alpha2", "0.6666666666666666", "--beta1", "0", "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = imkg(&["methods", "check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("order 3\n"), "{s}");
    assert!(s.contains("I or A  I\n"), "{s}");
}

#[test]
fn integrate_and_converge_write_csv() {
    let traj = scratch("traj.csv");
    let o = imkg(&["integrate", "hevi", "343a", "--dt", "0.125", "--tend", "1", "-o", traj.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("final_error"));
    let text = std::fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("t,re_u1,"));
    assert_eq!(text.lines().count(), 1 + 9);

    let conv = scratch("conv.csv");
    let o = imkg(&["converge", "hevi", "232a", "--dts", "0.0625,0.125,0.03125", "-o", conv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&conv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "dt,error");
    assert!(rows[1].starts_with("1.2500000000000000e-1,"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn column_snapshot() {
    let traj = scratch("col.csv");
    let snap = scratch("snap.csv");
    let o = imkg(&[
        "integrate", "column", "232a", "--dt", "0.5", "--tend", "2", "-o", traj.to_str().unwrap(), "--snapshot",
        snap.to_str().unwrap(), "--set", "layers=6",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&snap).unwrap();
    assert_eq!(text.lines().next(), Some("eta,w,phi,p,mu"));
    assert_eq!(text.lines().count(), 1 + 7 + 6);
}
