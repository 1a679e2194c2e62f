use std::path::PathBuf;
use std::process::{Command, Output};

fn bizoo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bizoo"))
        .args(args)
        .env_remove("BIZOO_TOL")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bizoo-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn zoo_list_has_thirteen_well_posed_rows() {
    let o = bizoo(&["zoo", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.contains("well-posed ")).count(), 13);
    assert_eq!(text.lines().filter(|l| l.contains("forbidden ")).count(), 5);
    assert!(text.contains("18 rows, 13 well-posed, 5 forbidden"));
}

#[test]
fn riquier_with_constant_data_is_incompatible() {
    let o = bizoo(&["solve", "--problem", "riquier", "--domain", "square:16", "--rhs", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn forbidden_composition_exits_three() {
    let o = bizoo(&["solve", "--problem", "d_n", "--domain", "square:16", "--rhs", "x"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("forbidden composition"));
}

#[test]
fn usage_errors_print_the_grammar() {
    for args in [
        &["solve", "--problem", "navier", "--domain", "square:8", "--rhs", "2*q"][..],
        &["frobnicate"][..],
        &["solve", "--problem", "navier", "--domain", "disk:8", "--rhs", "1"][..],
    ] {
        let o = bizoo(args);
        assert_eq!(o.status.code(), Some(64), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("expr := term"));
    }
    assert_eq!(bizoo(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_writes_report_and_field() {
    let (out, dump) = (scratch("navier.json"), scratch("navier.csv"));
    let o = bizoo(&[
        "solve",
        "--problem",
        "navier",
        "--domain",
        "square:16",
        "--rhs",
        "4*pi^4*sin(pi*x)*sin(pi*y)",
        "--out",
        out.to_str().unwrap(),
        "--dump",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["problem", "n", "h", "residuals", "constraints", "iterations", "wall_time_ms"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert_eq!(report["n"], 16);
    let csv = std::fs::read_to_string(&dump).unwrap();
    assert!(csv.starts_with("i,j,x,y,value\n"));
    assert_eq!(csv.lines().count(), 257);
}

#[test]
fn domain_file_round_trip_and_constants() {
    let file = scratch("rect.json");
    let o = bizoo(&[
        "domain", "make", "--shape", "rectangle", "--width", "3", "--height", "1", "--n", "8", "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("192 cells"));
    let o = bizoo(&["constants", "--domain", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let a: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(a["bound_ok"], true);
}

#[test]
fn tolerance_comes_from_the_environment() {
    let run = |tol: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_bizoo"))
            .args(["solve", "--problem", "laplace_dirichlet", "--domain", "square:32", "--rhs", "1"])
            .env("BIZOO_TOL", tol)
            .output()
            .unwrap();
        let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        r["iterations"].as_u64().unwrap()
    };
    assert!(run("1e-3") < run("1e-12"));
}

#[test]
fn helmholtz_and_check() {
    let o = bizoo(&["helmholtz", "--domain", "annulus:12", "--field", "y,x*x"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("harmonic"));
    let a = bizoo(&["check"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(stdout(&a), stdout(&bizoo(&["check"])));
}

#[test]
fn convergence_table() {
    let o = bizoo(&["convergence", "--manufactured", "poisson_dirichlet", "--levels", "8,16", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let t: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(t["rows"].as_array().unwrap().len(), 2);
    assert!(t["rows"][1]["l2_order"].as_f64().unwrap() > 1.8);
    let o = bizoo(&["convergence", "--manufactured", "poisson_dirichlet", "--levels", "10"]);
    assert_eq!(o.status.code(), Some(64));
}
