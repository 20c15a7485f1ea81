use std::path::PathBuf;
use std::process::{Command, Output};

fn opfrelax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opfrelax")).args(args).output().expect("binary runs")
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("opfrelax-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn missing_case_exits_with_two() {
    let out = opfrelax(&["solve", "--case", "no_such_case.m"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_case.m"));
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(opfrelax(&["solve", "--case", "case9", "--relaxation", "r7"]).status.code(), Some(2));
    assert_eq!(opfrelax(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn solve_reports_json() {
    let out = opfrelax(&["solve", "--case", "case9", "--relaxation", "rch"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["case"], "case9");
    assert_eq!(v["relaxation"], "rch");
    assert_eq!(v["status"], "optimal");
    let obj = v["objective"].as_f64().unwrap();
    assert!((obj - 5297.4).abs() <= 0.01 * 5297.4, "{obj}");
    assert!(v["iterations"].as_u64().unwrap() > 0);
}

#[test]
fn compare_prints_csv_table() {
    let out = opfrelax(&["compare", "--case", "case9", "--relaxation", "r1,r2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "relaxation,status,objective,eig_ratio,cycle_residual,exact,iterations,seconds"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "r1");
    assert_eq!(rows[1][0], "r2");
    let r1: f64 = rows[0][2].parse().unwrap();
    let r2: f64 = rows[1][2].parse().unwrap();
    assert!(r2 <= r1 + 1e-6 * r1.abs());
}

#[test]
fn chordal_info_counts_cliques() {
    let out = opfrelax(&["chordal-info", "--case", "case14"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["buses"], 14);
    assert_eq!(v["edges"], 20);
    let sizes = v["clique_sizes"].as_object().unwrap();
    let total: u64 = sizes.values().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(total, v["cliques"].as_u64().unwrap());
}

#[test]
fn saved_solution_recovers_voltages() {
    let dir = scratch_dir("recover");
    let sol = dir.join("case9_r1.json");
    let out = opfrelax(&["solve", "--case", "case9", "--save-solution", sol.to_str().unwrap()]);
    assert!(out.status.success());
    let out = opfrelax(&["recover", "--solution", sol.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["exact"], true);
    let volts = v["voltage"]["v"].as_array().unwrap();
    assert_eq!(volts.len(), 9);
    for x in volts {
        let (re, im) = (x[0].as_f64().unwrap(), x[1].as_f64().unwrap());
        let mag = re.hypot(im);
        assert!((0.9 - 1e-6..=1.1 + 1e-6).contains(&mag), "{mag}");
    }
}

#[test]
fn projection_writes_point_clouds() {
    let dir = scratch_dir("project");
    let out = opfrelax(&[
        "project", "--plane", "p", "--directions", "8", "--grid", "32", "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["r1.csv", "r2.csv", "nonconvex.csv", "edge_rank1.csv", "plot.gp"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let r1 = std::fs::read_to_string(dir.join("r1.csv")).unwrap();
    assert_eq!(r1.lines().count(), 9);
}

#[test]
fn exported_program_solves_to_same_objective() {
    let dir = scratch_dir("export");
    let prog = dir.join("case9_r2.json");
    let out = opfrelax(&["export", "--case", "case9", "--relaxation", "r2", "--out", prog.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let solved = opfrelax(&["solve-program", "--program", prog.to_str().unwrap()]);
    assert!(solved.status.success(), "{}", String::from_utf8_lossy(&solved.stderr));
    let reference = json(&opfrelax(&["solve", "--case", "case9", "--relaxation", "r2"]));
    let a = json(&solved)["objective"].as_f64().unwrap();
    let b = reference["objective"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
}
