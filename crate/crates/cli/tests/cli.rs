use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use semicosmo_cli::RunConfig;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semicosmo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn header_value(csv: &str, key: &str) -> Option<String> {
    let prefix = format!("# {key}: ");
    csv.lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Small, fast configuration for the energy-density command.
const SMALL_RHO: &str = r#"
[grid]
z_min = 0.0
z_max = 0.5
z_points = 3
[massive]
mass = 1.0
"#;

#[test]
fn background_header_carries_provenance() {
    let o = run(&["background"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = stdout(&o);
    assert_eq!(
        header_value(&s, "config_sha256").unwrap(),
        RunConfig::default().hash()
    );
    assert_eq!(
        header_value(&s, "tool").unwrap(),
        format!("semicosmo {}", env!("CARGO_PKG_VERSION"))
    );
    assert_eq!(header_value(&s, "command").unwrap(), "background");
    let tol = header_value(&s, "tolerances").unwrap();
    assert!(
        tol.contains("quad_rel_tol=1e-5") && tol.contains("ode_rtol=1e-10"),
        "{tol}"
    );
    let consts = header_value(&s, "constants").unwrap();
    for key in [
        "hbar_c_ev_m=",
        "boltzmann_ev_per_k=",
        "newton_constant=6.7",
        "rho0=1.7",
    ] {
        assert!(consts.contains(key), "{consts}");
    }
    let body: Vec<&str> = s.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(body[0].starts_with("z,a,t,tau,hubble,"));
    assert_eq!(body.len(), 1 + RunConfig::default().grid.z_points);
    // z = 0 row: a = 1 and H = H0.
    let first: Vec<f64> = body[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[1], 1.0);
    assert!((first[4] - 1.0).abs() < 1e-12);
}

#[test]
fn hash_is_sha256_of_canonical_config() {
    let h = RunConfig::default().hash();
    assert_eq!(h.len(), 64);
    assert!(h.chars().all(|c| c.is_ascii_hexdigit()));
    let mut other = RunConfig::default();
    other.grid.z_points = 12;
    assert_ne!(other.hash(), h);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rho.toml", SMALL_RHO);
    for args in [
        vec!["background"],
        vec!["rho", "--config", &cfg],
        vec!["sle", "--config", &cfg],
        vec!["scan", "--epsilon", "0,1e-16,-1e-17"],
        vec!["friedmann", "--epsilon", "1e-16", "--format", "jsonl"],
    ] {
        let (a, b) = (run(&args), run(&args));
        assert_eq!(
            a.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&a.stderr)
        );
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bg.csv");
    let o = run(&["background", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read(&out).unwrap(), run(&["background"]).stdout);
}

#[test]
fn config_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.grid.z_points = 5;
    cfg.grid.k = vec![0.5, 2.0];
    cfg.massless.thermal = false;
    cfg.friedmann.epsilon = vec![-1e-17, 0.0, 3e-16];
    let text = cfg.to_toml();
    let back = RunConfig::from_toml(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_toml(), text);
    let path = write(dir.path(), "cfg.toml", &text);
    let s = stdout(&run(&["background", "--config", &path]));
    assert_eq!(header_value(&s, "config_sha256").unwrap(), cfg.hash());
    // An empty file is the default configuration.
    let empty = write(dir.path(), "empty.toml", "");
    let s = stdout(&run(&["background", "--config", &empty]));
    assert_eq!(
        header_value(&s, "config_sha256").unwrap(),
        RunConfig::default().hash()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_configs_round_trip(
        om in 0.0f64..1.0,
        eps in proptest::collection::vec(-1e-10f64..1e-10, 1..4),
        n in 1usize..50,
        tol in 1e-14f64..1e-2,
        thermal in any::<bool>(),
        temp in 0.1f64..10.0,
    ) {
        let mut cfg = RunConfig::default();
        cfg.cosmology.omega_m = om;
        cfg.friedmann.epsilon = eps;
        cfg.grid.z_points = n;
        cfg.tolerances.quad_rel_tol = tol;
        cfg.massless.thermal = thermal;
        cfg.massless.temperature_k = temp;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}

#[test]
fn tolerance_flag_overrides_and_changes_the_hash() {
    let s = stdout(&run(&["background", "--tolerance", "1e-7"]));
    let tol = header_value(&s, "tolerances").unwrap();
    assert!(
        tol.contains("quad_rel_tol=1e-7") && tol.contains("ode_rtol=1e-7"),
        "{tol}"
    );
    assert_ne!(
        header_value(&s, "config_sha256").unwrap(),
        RunConfig::default().hash()
    );
}

#[test]
fn configuration_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        vec![
            "background".to_string(),
            "--config".into(),
            dir.path().join("missing.toml").to_str().unwrap().into(),
        ],
        vec![
            "background".into(),
            "--config".into(),
            write(dir.path(), "bad.toml", "[grid\n"),
        ],
        vec![
            "background".into(),
            "--config".into(),
            write(dir.path(), "unknown.toml", "[grid]\nzz = 1\n"),
        ],
        vec![
            "background".into(),
            "--config".into(),
            write(dir.path(), "neg.toml", "[cosmology]\nhubble_ev = -1.0\n"),
        ],
        vec!["background".into(), "--tolerance".into(), "-1".into()],
        vec!["friedmann".into(), "--epsilon".into(), "nan".into()],
        vec!["frobnicate".into()],
    ];
    for args in cases {
        let o = Command::new(env!("CARGO_BIN_EXE_semicosmo"))
            .args(&args)
            .output()
            .unwrap();
        assert_eq!(
            o.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn numerical_failure_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    // Far too many oscillations for a direct mode solve.
    let cfg = write(
        dir.path(),
        "heavy.toml",
        "[massive]\nmass = 1e7\n[massless]\nenabled = false\n[grid]\nk = [1.0]\n",
    );
    let o = run(&["modes", "--config", &cfg]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(o.stdout.is_empty());
}

#[test]
fn single_divergent_epsilon_exits_with_3_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let o = run(&[
        "friedmann",
        "--epsilon=-1e-17",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = std::fs::read_to_string(&out).unwrap();
    assert!(header_value(&s, "divergence[-1e-17]")
        .unwrap()
        .starts_with("z="));
    assert!(s.lines().filter(|l| !l.starts_with('#')).count() > 1);
    // Several ε: the divergence is reported in the header only.
    let o = run(&["friedmann", "--epsilon=-1e-17,1e-16"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(header_value(&stdout(&o), "divergence[-1e-17]").is_some());
    // A stable single ε exits normally.
    assert_eq!(
        run(&["friedmann", "--epsilon", "1e-16"]).status.code(),
        Some(0)
    );
}

#[test]
fn jsonl_matches_csv() {
    let args = ["scan", "--epsilon", "0,1e-16,-1e-17"];
    let csv = stdout(&run(&args));
    let jsonl = stdout(&run(&[&args[..], &["--format", "jsonl"]].concat()));
    let mut lines = jsonl.lines();
    let meta: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(
        meta["meta"]["config_sha256"],
        header_value(&csv, "config_sha256").unwrap()
    );
    assert_eq!(meta["meta"]["command"], "scan");
    let mut body = csv.lines().filter(|l| !l.starts_with('#'));
    let columns: Vec<&str> = body.next().unwrap().split(',').collect();
    let mut rows = 0;
    for (j, c) in lines.zip(body) {
        let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(j).unwrap();
        assert_eq!(obj.len(), columns.len());
        // Column order is kept in the raw line.
        let pos: Vec<usize> = columns
            .iter()
            .map(|c| j.find(&format!("\"{c}\":")).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{j}");
        for (col, cell) in columns.iter().zip(c.split(',')) {
            let v = &obj[*col];
            match cell.parse::<f64>() {
                Ok(x) if x.is_finite() => assert_eq!(v.as_f64().unwrap(), x, "{col}"),
                Ok(_) => assert!(v.is_null(), "{col}"),
                Err(_) => assert_eq!(
                    v.as_str().map(str::to_string).unwrap_or(v.to_string()),
                    cell,
                    "{col}"
                ),
            }
        }
        rows += 1;
    }
    assert_eq!(rows, 3);
    let statuses: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(statuses, ["ok", "ok", "diverged"]);
}

#[test]
fn every_subcommand_runs_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rho.toml", SMALL_RHO);
    for cmd in ["background", "modes", "sle", "rho", "friedmann", "scan"] {
        let o = run(&[cmd, "--config", &cfg]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_eq!(header_value(&stdout(&o), "command").unwrap(), cmd);
    }
}
