//! End-to-end checks of the `sepr` binary: output schemas, determinism of
//! seeded simulation commands, and the exit-code contract.

use std::process::{Command, Output};

fn sepr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepr")).args(args).output().expect("spawn sepr")
}

fn stdout_of(args: &[&str]) -> String {
    let out = sepr(args);
    assert!(
        out.status.success(),
        "sepr {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout is utf-8")
}

fn json_of(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&stdout_of(args)).expect("stdout parses as json")
}

fn tmp(name: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("sepr-cli-{}-{name}", std::process::id()))
}

#[test]
fn gap_reports_the_closed_form_next_to_the_solver() {
    let doc = json_of(&["gap", "--box", "4x4", "--boundary", "open"]);
    assert_eq!(doc["n"], 16);
    assert_eq!(doc["psi"].as_array().unwrap().len(), 16);
    let lambda = doc["lambda"].as_f64().unwrap();
    let closed = doc["closed_form"]["lambda"].as_f64().unwrap();
    assert!((lambda - closed).abs() <= 1e-12, "solver {lambda} vs closed form {closed}");
    assert!(doc["overlap"].as_f64().unwrap() > 0.0);
}

#[test]
fn gap_honors_a_density_override_on_network_files() {
    // Two reservoir vertices on a 3-path, written in the documented schema.
    let path = tmp("net.json");
    std::fs::write(
        &path,
        r#"{"vertices": 3, "edges": [[0,1,1.0],[1,2,1.0]], "kappa": {"0": 0.5}, "rho": 0.4}"#,
    )
    .unwrap();
    let doc = json_of(&["gap", "--net", path.to_str().unwrap(), "--rho", "0.3"]);
    assert_eq!(doc["rho"].as_f64().unwrap(), 0.3);
    assert!(doc["closed_form"].is_null(), "file networks carry no closed form");
    std::fs::remove_file(&path).ok();
}

#[test]
fn survival_csv_lists_every_vertex() {
    let text = stdout_of(&["survival", "--box", "2x2", "--points", "5"]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,znorm2,z_0,z_1,z_2,z_3"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn bounds_csv_keeps_the_documented_columns() {
    let text = stdout_of(&["bounds", "--box", "3", "--points", "6"]);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("t,tv_lower,l2_upper,sep_lower,sup_upper,znorm2_t,znorm2_half_t")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for w in rows.windows(2) {
        assert!(w[1][1] <= w[0][1], "tv_lower must decay along the grid");
    }
    for r in &rows {
        assert!(r[3] >= r[1], "sep_lower dominates tv_lower");
    }
}

#[test]
fn mix_sandwiches_the_exact_time() {
    let doc = json_of(&["mix", "--box", "3", "--eps", "0.25"]);
    let lower = doc["lower"]["bisect"].as_f64().unwrap();
    let upper = doc["upper"]["bisect"].as_f64().unwrap();
    let exact = doc["exact"]["tv_from_x_star"].as_f64().unwrap();
    assert!(
        lower <= exact + 1e-9 && exact <= upper + 1e-9,
        "exact {exact} escapes [{lower}, {upper}]"
    );
    let window = doc["window"]["window"].as_f64().unwrap();
    assert!(window <= doc["window"]["width_bound"].as_f64().unwrap());
}

#[test]
fn profile_covers_the_requested_sizes() {
    let text = stdout_of(&["profile", "--sizes", "2,4,8", "--eps", "0.25"]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,lambda,overlap,t_upper,t_lower,product_value"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.iter().map(|r| r[0] as usize).collect::<Vec<_>>(), vec![2, 4, 8]);
    for w in rows.windows(2) {
        assert!(w[1][5] > w[0][5], "the product condition value must grow");
    }
}

#[test]
fn seeded_simulations_rerun_bit_identically() {
    let (a, b, c) = (tmp("sst-a.csv"), tmp("sst-b.csv"), tmp("sst-c.csv"));
    let args = |out: &std::path::Path, seed: &str| {
        vec![
            "simulate".to_string(),
            "sst".into(),
            "--box".into(),
            "2".into(),
            "--trials".into(),
            "4000".into(),
            "--seed".into(),
            seed.into(),
            "--tmin".into(),
            "0.2".into(),
            "--tmax".into(),
            "2.0".into(),
            "--points".into(),
            "4".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let run = |argv: Vec<String>| {
        let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
        stdout_of(&refs);
    };
    run(args(&a, "7"));
    run(args(&b, "7"));
    run(args(&c, "8"));
    let (da, db, dc) =
        (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(da, db, "same seed must reproduce the same bytes");
    assert_ne!(da, dc, "a different seed must move the estimates");
    for p in [a, b, c] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn nd_covariances_stay_nonpositive_within_noise() {
    let text =
        stdout_of(&["simulate", "nd", "--box", "3", "--t", "0.7", "--trials", "20000", "--seed", "1"]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("i,j,cov_hat,radius,flag"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3, "a 3-path has three vertex pairs");
    for row in rows {
        assert!(row.ends_with(",false"), "unexpected positive covariance: {row}");
    }
}

#[test]
fn killed_and_coupled_emit_their_headers() {
    let killed = stdout_of(&[
        "simulate", "killed", "--box", "2", "--tmin", "0.2", "--tmax", "1.0", "--points", "3",
        "--trials", "2000", "--seed", "3",
    ]);
    assert_eq!(killed.lines().next(), Some("t,p_hat,stderr"));
    assert_eq!(killed.lines().count(), 4);

    let coupled = stdout_of(&[
        "simulate", "coupled", "--box", "2", "--x0", "10", "--tmin", "0.3", "--tmax", "0.9",
        "--points", "2", "--trials", "500", "--seed", "5",
    ]);
    assert_eq!(
        coupled.lines().next(),
        Some("t,z_total_mean,z_total_stderr,xstar_0,xstar_1,x_0,x_1,y_0,y_1,z_0,z_1")
    );
    assert_eq!(coupled.lines().count(), 3);
}

#[test]
fn verify_quick_passes_and_exits_zero() {
    let out = sepr(&["verify", "--quick"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10, "one line per criterion:\n{text}");
    assert!(lines.iter().all(|l| l.contains("PASS")), "unexpected failure:\n{text}");
}

#[test]
fn size_caps_exit_two() {
    let out = sepr(&["gap", "--box", "70x70"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn bad_inputs_exit_one() {
    for argv in [
        vec!["gap", "--net", "/nonexistent/net.json"],
        vec!["gap"],
        vec!["bounds", "--box", "2", "--points", "1"],
        vec!["gap", "--box", "3", "--boundary", "open,open"],
        vec!["gap", "--box", "0x2"],
        vec!["mix", "--box", "2", "--eps", "1.5"],
        vec!["simulate", "killed", "--box", "2", "--start", "9"],
        vec!["simulate", "coupled", "--box", "2", "--x0", "101"],
        vec!["gap", "--box", "2", "--no-such-flag"],
    ] {
        let out = sepr(&argv);
        assert_eq!(
            out.status.code(),
            Some(1),
            "sepr {argv:?} should exit 1: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
