use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fuelgames"));
    c.env_remove("FUELGAMES_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn field(line: &str, i: usize) -> f64 {
    line.split(',').nth(i).unwrap().parse().unwrap()
}

#[test]
fn thresholds_row() {
    let o = run(&["thresholds", "--n", "2", "--alpha", "2", "--cost", "quadratic"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "N,alpha,c_N");
    assert!(lines[1].starts_with("2,2,4.7071"), "{}", lines[1]);
    // Twelve significant digits.
    assert_eq!(lines[1].split(',').nth(2).unwrap().replace('.', "").len(), 12);
}

#[test]
fn tables_cover_every_cell() {
    let o = run(&["tables", "--n", "2..100", "--alpha", "0.2,2,20", "--cost", "quadratic"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "N,alpha,c_N,v_N,c,v_star");
    assert_eq!(lines.len(), 1 + 99 * 3);
    let row = lines.iter().find(|l| l.starts_with("2,2,")).unwrap();
    assert!((field(row, 2) - 4.7071).abs() < 1e-4);
    assert!((field(row, 3) - 0.1247).abs() < 1e-4);
    assert!((field(row, 4) - 1.4975).abs() < 1e-4);
    assert!((field(row, 5) - 0.2250).abs() < 1e-4);
}

#[test]
fn geometry_conditions_report() {
    let o = run(&["validate-geometry", "--n", "4"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("S.a OK, S.b OK, S.c OK"), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("N,S_a,S_b,S_c,det,rank\n"));
}

#[test]
fn geometry_determinant_report() {
    let o = run(&["validate-geometry", "--n", "4"]);
    assert!(stderr(&o).contains("S.a OK, S.b OK, S.c OK, det=3"), "{}", stderr(&o));
}

#[test]
fn value_charges_own_jump() {
    let o = run(&["value", "--n", "2", "--alpha", "2", "--x0", "0,8", "--player", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let far = field(stdout(&o).lines().nth(1).unwrap(), 1);
    let c2 = 4.707104445325443;
    let o = run(&["value", "--n", "2", "--alpha", "2", "--x0", &format!("0,{c2}"), "--player", "2"]);
    let edge = field(stdout(&o).lines().nth(1).unwrap(), 1);
    assert!((far - (8.0 - c2 + edge)).abs() < 1e-9);

    let o = run(&["value", "--n", "2", "--alpha", "1", "--alpha2", "2", "--x0", "0,1"]);
    assert!(o.status.success());
    let o = run(&["value", "--n", "2", "--alpha", "2", "--case", "4", "--x0", "-3,3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn exit_codes() {
    let bad_alpha = run(&["thresholds", "--n", "2", "--alpha", "-1"]);
    assert_eq!(bad_alpha.status.code(), Some(2));
    assert!(stderr(&bad_alpha).contains("alpha"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["thresholds", "--alpha", "2"]).status.code(), Some(2));
    assert_eq!(run(&["value", "--n", "3", "--alpha", "2", "--x0", "1,2"]).status.code(), Some(2));
    assert_eq!(run(&["value", "--n", "2", "--alpha", "2", "--case", "7"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("h.csv");
    std::fs::write(&table, "x,h\n-2,4\n0,0\n1,1\n").unwrap();
    let o = run(&["thresholds", "--n", "2", "--alpha", "2", "--cost", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cost table"));

    // A discount this small leaves no representable sign change.
    let o = run(&["thresholds", "--n", "2", "--alpha", "1e-30"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical failure"));
}

#[test]
fn tabulated_cost_file() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("h.csv");
    let rows: Vec<String> = (-40..=40)
        .map(|i| {
            let x = i as f64 * 0.25;
            format!("{x},{}", x * x)
        })
        .collect();
    std::fs::write(&table, format!("x,h\n{}\n", rows.join("\n"))).unwrap();
    let o = run(&["thresholds", "--n", "1,2", "--alpha", "2", "--cost", table.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!((field(lines[1], 2) - 1.4975026).abs() < 1e-6);
    assert!((field(lines[2], 2) - 4.7071044).abs() < 1e-5);
}

fn manifest(out: &Path) -> serde_json::Value {
    let mut p = out.as_os_str().to_owned();
    p.push(".manifest.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("t.csv");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"command": "thresholds", "n": "2..3", "alpha": [2], "out": {:?}}}"#,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 3);
    let m = manifest(&out);
    assert_eq!(m["command"], "thresholds");
    assert_eq!(m["seed"], 42);
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["version"].is_string());

    let o = run(&["--config", cfg.to_str().unwrap(), "thresholds", "--n", "5"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("5,2,"));

    std::fs::write(&cfg, r#"{"command": "thresholds", "colour": 3}"#).unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"command": "sing"}"#).unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["--config", dir.path().join("missing.json").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &[
            "simulate",
            "--n",
            "3",
            "--alpha",
            "2",
            "--x0",
            "4,-4,0",
            "--paths",
            "4",
            "--horizon",
            "0.5",
            "--stride",
            "50",
        ],
        &["simulate", "--n", "2", "--alpha", "2", "--mode", "payoff", "--paths", "64", "--horizon", "2"],
        &["eps-ne", "--n", "2,4,8,16", "--alpha", "2", "--paths", "64", "--horizon", "2", "--dt", "0.005"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("a{k}.csv"));
        let b = dir.path().join(format!("b{k}.csv"));
        for (path, threads) in [(&a, "1"), (&b, "3")] {
            let o = bin()
                .args(*args)
                .args(["--out", path.to_str().unwrap()])
                .env("FUELGAMES_THREADS", threads)
                .output()
                .unwrap();
            assert!(o.status.success(), "{}", stderr(&o));
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{args:?}");
        assert_eq!(manifest(&b)["threads"], 3);
    }
    let traj = std::fs::read_to_string(dir.path().join("a0.csv")).unwrap();
    assert!(traj.starts_with("path,step,t,x1,x2,x3,eta1,eta2,eta3,eta4,eta5,eta6\n"));
    let eps = std::fs::read_to_string(dir.path().join("a2.csv")).unwrap();
    let lines: Vec<&str> = eps.lines().collect();
    assert_eq!(lines[0], "N,cost_mfg,stderr_mfg,cost_dev,stderr_dev,gain,slope");
    assert_eq!(lines.len(), 5);
    assert!(!lines[1].ends_with(','), "slope present with four sizes");
}

#[test]
fn thread_variable_is_checked() {
    let o = bin()
        .args(["thresholds", "--n", "2", "--alpha", "2"])
        .env("FUELGAMES_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mean_field_modes() {
    let o = run(&["mfg", "--alpha", "2", "--m0", "1", "--x0", "1,1.5,6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,value,control");
    assert!((field(lines[1], 1) - 0.2250443).abs() < 1e-6);
    assert!((field(lines[3], 2) + (5.0 - 1.4975026)).abs() < 1e-6);

    let o = run(&["mfg", "--alpha", "2", "--mode", "stationary", "--paths", "400", "--dt", "0.005"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("c,ks,paths,horizon\n"));
    let o = run(&["mfg", "--alpha", "2", "--mode", "stationary", "--horizon", "1", "--paths", "10"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&[
        "mfg",
        "--alpha",
        "2",
        "--mode",
        "fixed-point",
        "--law",
        "two-point:3",
        "--paths",
        "200",
        "--horizon",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,mean");
    // The two-point law is mirrored, so the initial mean is zero up to rounding.
    assert!(field(lines[1], 1).abs() < 1e-12);
    let o = run(&[
        "mfg",
        "--alpha",
        "2",
        "--mode",
        "payoff",
        "--paths",
        "200",
        "--horizon",
        "4",
        "--dt",
        "0.005",
    ]);
    assert!(o.status.success());
    assert_eq!(
        run(&["mfg", "--alpha", "2", "--mode", "fixed-point", "--law", "cauchy"]).status.code(),
        Some(2)
    );
}
