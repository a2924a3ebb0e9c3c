use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cgfem(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgfem"))
        .args(args)
        .env("CGFEM_OUT", out)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

const SMALL: [&str; 9] = ["smooth", "--methods", "fem,cgfem", "--degrees", "1,2", "--sizes", "4,8", "--mesh", "uniform,perturbed"];

#[test]
fn smooth_csv_is_byte_identical_without_timings() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut args = SMALL.to_vec();
    args.push("--no-timings");
    let oa = cgfem(&args, a.path());
    let ob = cgfem(&args, b.path());
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    assert!(ob.status.success());
    let ca = fs::read(a.path().join("smooth.csv")).unwrap();
    let cb = fs::read(b.path().join("smooth.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert_eq!(text.lines().next(), Some("method,k,mesh,N,h,dof,EE,SCN,assembly_s,solve_s"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 2 * 2 * 2);
    assert_eq!(text.lines().filter(|l| l.starts_with("#slope,")).count(), 2 * 2 * 2);
    let stdout = String::from_utf8_lossy(&oa.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("#slope,")).count(), 8);
}

#[test]
fn out_flag_overrides_the_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = cgfem(
        &["smooth", "--methods", "fem", "--degrees", "1", "--sizes", "4", "--mesh", "uniform", "--out", flag_dir.path().to_str().unwrap()],
        env_dir.path(),
    );
    assert!(o.status.success());
    assert!(flag_dir.path().join("smooth.csv").exists());
    assert!(!env_dir.path().join("smooth.csv").exists());
}

#[test]
fn failed_records_give_exit_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = cgfem(&["smooth", "--methods", "cgfem", "--degrees", "2", "--sizes", "2", "--mesh", "uniform", "--no-timings"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let text = fs::read_to_string(dir.path().join("smooth.csv")).unwrap();
    assert!(text.contains("\ncgfem,2,uniform,2,5e-1,0,NaN,NaN,"));
    assert!(text.lines().any(|l| l.starts_with("#error,cgfem,2,uniform,2,")));
}

#[test]
fn invalid_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["crack", "--degrees", "2"],
        vec!["crack", "--mesh", "perturbed"],
        vec!["smooth", "--sizes", "0"],
        vec!["smooth", "--methods", "xfem"],
        vec!["plot", "missing.csv"],
    ] {
        let o = cgfem(&args, dir.path());
        assert!(!o.status.success(), "{args:?}");
        assert_ne!(o.status.code(), Some(3), "{args:?}");
    }
}

#[test]
fn crack_suite_runs_at_a_coarse_level() {
    let dir = tempfile::tempdir().unwrap();
    let o = cgfem(&["crack", "--sizes", "1,2", "--no-timings", "--no-scn"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("crack.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3 * 2);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("crack")));
    assert!(rows.iter().any(|r| r.starts_with("cgfem,1,crack,9,")));
}

#[test]
fn plot_skips_malformed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("smooth.csv");
    fs::write(
        &csv,
        "method,k,mesh,N,h,dof,EE,SCN,assembly_s,solve_s\n\
         fem,1,uniform,4,2.5e-1,25,1e-1,1e2,0,0\n\
         fem,1,uniform,8,1.25e-1,81,5e-2,4e2,0,0\n\
         fem,1,uniform,eight\n\
         #slope,fem,1,uniform,EE,1,SCN,-2\n",
    )
    .unwrap();
    let out = dir.path().join("plots");
    let o = cgfem(&["plot", csv.to_str().unwrap(), "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("skipped 1 malformed row(s)"));
    for name in ["smooth_ee.svg", "smooth_ee.dat", "smooth_scn.svg", "smooth_scn.dat"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let svg = fs::read_to_string(out.join("smooth_ee.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}
