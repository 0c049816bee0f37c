use std::path::PathBuf;
use std::process::Command;

use rosegan::{GridDensity, QuadRule};

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_rosegan"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rosegan-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn cli_reports_errors_as_json() {
    let dir = scratch("err");
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, r#"{"unknown_key": 1}"#).unwrap();
    let out = Command::new(bin()).args(["bounds", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["kind"], "ConfigInvalid");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn grid_density_file_target() {
    let dir = scratch("file");
    let g = GridDensity::from_fn(1, 33, QuadRule::Trapezoid, |y| 1.0 + y[0]).unwrap().normalize().unwrap();
    std::fs::write(dir.join("f.json"), g.to_json()).unwrap();
    let cfg = format!(r#"{{"target":{{"file":{:?}}},"n":100,"seed":1}}"#, dir.join("f.json"));
    std::fs::write(dir.join("c.json"), cfg).unwrap();
    let out = Command::new(bin()).arg("sample").arg("--config").arg(dir.join("c.json")).arg("--out").arg(&dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(csv.lines().skip(1).all(|l| (0.0..=1.0).contains(&l.parse::<f64>().unwrap())));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn bounds_command_example() {
    let dir = scratch("bounds");
    let cfg = dir.join("b.json");
    std::fs::write(
        &cfg,
        r#"{"command":"bounds","hypothesis":{"dim":2,"k":3,"alpha":0.5,"K":2.0,"family":"bernstein_triangular","degree":3},"n":1000,"delta":0.1}"#,
    )
    .unwrap();
    let out = Command::new(bin()).arg("bounds").arg("--config").arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("bounds.json")).unwrap()).unwrap();
    assert_eq!(v["regularity_ok"], true);
    assert_eq!(v["B1"].as_f64().unwrap() + v["B2"].as_f64().unwrap(), 1.0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn flags_override_config() {
    let dir = scratch("flags");
    let cfg = dir.join("r.json");
    std::fs::write(
        &cfg,
        r#"{"target":{"generator":[-0.1]},"hypothesis":{"dim":1,"k":3,"alpha":0.5,"K":2.0,"family":"bernstein_triangular","degree":2},"n_grid":[64,128],"trials":4,"net":{"shape":[3]}}"#,
    )
    .unwrap();
    let run = |extra: &[&str], out: &str| {
        Command::new(bin())
            .arg("rate")
            .arg("--config")
            .arg(&cfg)
            .args(extra)
            .arg("--out")
            .arg(dir.join(out))
            .output()
            .unwrap()
    };
    let missing = run(&[], "a");
    assert!(!missing.status.success());
    let ok = run(&["--seed", "3", "--delta", "0.25", "--beta", "0.5", "--exact-integral"], "b");
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("b/bounds.json")).unwrap()).unwrap();
    assert_eq!(b["inputs"]["delta"], 0.25);
    assert_eq!(b["inputs"]["exact_integral"], true);
    let csv = std::fs::read_to_string(dir.join("b/rate.csv")).unwrap();
    assert!(csv.starts_with("n,trials,mean,std,q05,q50,q95,bound_C_over_sqrt_n,thm54_threshold,exceed_frac\n"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn fit_gradient_strategy_flag() {
    let dir = scratch("grad");
    let cfg = dir.join("f.json");
    std::fs::write(
        &cfg,
        r#"{"target":{"density":{"family":"tilted","dim":1}},"hypothesis":{"dim":1,"k":3,"alpha":0.5,"K":2.0,"family":"bernstein_triangular","degree":2},"n":300,"seed":2,"gradient":{"max_iter":5,"step":0.5,"tol":1e-9,"fd_step":1e-6}}"#,
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["fit", "--strategy", "grad", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(v["strategy"], "alternating_gradient");
    assert_eq!(v["converged"], false);
    assert!(String::from_utf8_lossy(&out.stdout).contains("warning"));
    let _ = std::fs::remove_dir_all(&dir);
}
