use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hessval(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hessval"))
        .args(args)
        .current_dir(dir)
        .env_remove("HESSVAL_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

/// `(s, value)` rows of a profile table, skipping metadata and header.
fn rows(text: &str) -> Vec<(f64, f64)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

/// The `value` column of the row named `quantity`.
fn quantity(text: &str, name: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(&format!("{name},"))).unwrap();
    line.split(',').nth(1).unwrap().parse().unwrap()
}

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    write(&dir, "cone.json", r#"{"type": "radial_cone_u", "dim": 2, "t": 0.5}"#);
    write(&dir, "hat.csv", "# support=1, class=H_1^2\ns,value\n0,1\n1,0\n");
    write(&dir, "q.json", r#"{"type": "quadratic", "q": [[2, 0], [0, 1]], "b": [0, 0], "c": 0}"#);
    write(&dir, "box.json", r#"{"kind": "box", "lo": [0, 0], "hi": [1, 2]}"#);
    write(&dir, "ball.json", r#"{"kind": "ball", "center": [0, 0], "radius": 1}"#);
    dir
}

#[test]
fn cone_closed_form_example() {
    let dir = setup();
    let o = hessval(&["valuate", "--fn", "cone.json", "--zeta", "hat.csv", "--j", "1", "--route", "closed-form"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("quantity,value,est_error"));
    let v = quantity(&text, "Z_1");
    assert!((v - 2.0 * std::f64::consts::PI * 0.375).abs() < 1e-12);
    assert!(text.contains("Z_1,2.3561944901923448e0,0.0000000000000000e0"));
}

#[test]
fn routes_agree_on_the_cone() {
    let dir = setup();
    let mut values = Vec::new();
    for route in ["closed-form", "quadrature", "moreau"] {
        let o = hessval(&["valuate", "--fn", "cone.json", "--zeta", "hat.csv", "--j", "1", "--route", route], dir.path());
        assert!(o.status.success());
        values.push(quantity(&stdout(&o), "Z_1"));
    }
    for v in &values[1..] {
        assert!((v - values[0]).abs() <= 1e-4 * values[0]);
    }
}

#[test]
fn dual_valuation_of_the_conjugate() {
    let dir = setup();
    write(&dir, "qstar.json", r#"{"type": "quadratic", "q": [[0.5, 0], [0, 1]], "b": [0, 0], "c": 0}"#);
    let p = hessval(&["valuate", "--fn", "q.json", "--zeta", "hat.csv", "--j", "1"], dir.path());
    let d = hessval(&["valuate", "--fn", "qstar.json", "--zeta", "hat.csv", "--j", "1", "--side", "dual"], dir.path());
    let (p, d) = (quantity(&stdout(&p), "Z_1"), quantity(&stdout(&d), "Zstar_1"));
    assert!((p - d).abs() <= 1e-9 * p);
}

#[test]
fn exact_measure_of_a_box() {
    let dir = setup();
    let o = hessval(&["measure", "--fn", "q.json", "--region", "box.json"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("region,j,value,mc_stderr"));
    // densities 1, tr Q = 3, det Q = 2 on a box of area 2
    for (j, want) in [(0, 2.0), (1, 6.0), (2, 4.0)] {
        let line = text.lines().find(|l| l.starts_with(&format!("box,{j},"))).unwrap();
        let v: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((v - want).abs() < 1e-12, "{line}");
    }
}

#[test]
fn monte_carlo_measure_is_reproducible_and_seeded() {
    let dir = setup();
    let args = ["measure", "--fn", "q.json", "--region", "ball.json", "--method", "ps", "--samples", "20000"];
    let a = hessval(&args, dir.path());
    let b = hessval(&args, dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    // Φ_j(u, B²) = π [Q]_j: π, 3π, 2π
    for (j, want) in [(0, 1.0), (1, 3.0), (2, 2.0)] {
        let line = text.lines().find(|l| l.starts_with(&format!("ball,{j},"))).unwrap();
        let cells: Vec<f64> = line.split(',').skip(2).map(|c| c.parse().unwrap()).collect();
        assert!((cells[0] - want * std::f64::consts::PI).abs() <= 4.0 * cells[1], "{line}");
    }
    let env = Command::new(env!("CARGO_BIN_EXE_hessval"))
        .args(args)
        .current_dir(dir.path())
        .env("HESSVAL_SEED", "7")
        .output()
        .unwrap();
    assert_ne!(env.stdout, a.stdout);
    assert!(stdout(&env).contains("seed=7"));
    let flag = hessval(&[&args[..], &["--seed", "7"]].concat(), dir.path());
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn transforms_round_trip() {
    let dir = setup();
    let o = hessval(&["transform", "--fn", "q.json", "--op", "legendre", "--out", "star.json"], dir.path());
    assert!(o.status.success());
    let o = hessval(&["transform", "--fn", "star.json", "--op", "legendre"], dir.path());
    let back: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((back["q"][0][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((back["q"][1][1].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let o = hessval(&["transform", "--fn", "q.json", "--op", "moreau", "--lambda", "2"], dir.path());
    let env: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((env["q"][0][0].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn decomposition_of_a_sum() {
    let dir = setup();
    write(
        &dir,
        "val.json",
        r#"[{"dim": 2, "j": 1, "zeta": {"kind": "hat", "width": 1.0}},
            {"dim": 2, "j": 2, "zeta": {"kind": "hat", "width": 1.0}}]"#,
    );
    write(&dir, "plain_hat.csv", "s,value\n0,1\n1,0\n");
    let o = hessval(&["decompose", "--fn", "q.json", "--valuation", "val.json"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let z1 = quantity(&stdout(&hessval(&["valuate", "--fn", "q.json", "--zeta", "hat.csv", "--j", "1"], dir.path())), "Z_1");
    let z2 = quantity(&stdout(&hessval(&["valuate", "--fn", "q.json", "--zeta", "plain_hat.csv", "--j", "2"], dir.path())), "Z_2");
    assert!(quantity(&text, "Z_0").abs() < 1e-8);
    assert!((quantity(&text, "Z_1") - z1).abs() < 1e-8 * z1);
    assert!((quantity(&text, "Z_2") - z2).abs() < 1e-8 * z2);
}

#[test]
fn zeta_recovery_round_trip() {
    let dir = setup();
    // a C¹ bump sampled finely, as a profile file
    let bump = |s: f64| if (s - 0.5).abs() < 0.4 { (1.0 - ((s - 0.5) / 0.4).powi(2)).powi(2) } else { 0.0 };
    let mut text = String::from("s,value\n");
    for k in 0..=900 {
        let s = k as f64 / 1000.0;
        text.push_str(&format!("{s},{}\n", bump(s)));
    }
    write(&dir, "bump.csv", &text);
    for (input, f) in [("hat.csv", Box::new(|s: f64| (1.0 - s).max(0.0)) as Box<dyn Fn(f64) -> f64>), ("bump.csv", Box::new(bump))] {
        for n in ["2", "3"] {
            let o = hessval(&["recover-zeta", "--from-zeta", input, "--n", n, "--out", "z.csv"], dir.path());
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            let o = hessval(&["recover-zeta", "--cone-values", "z.csv", "--n", n], dir.path());
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            let text = stdout(&o);
            assert!(text.starts_with("# support="));
            let gap = rows(&text).iter().filter(|(s, _)| *s >= 0.05).map(|(s, v)| (v - f(*s)).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-3, "{input} n={n}: {gap}");
        }
    }
}

#[test]
fn abel_round_trip() {
    let dir = setup();
    write(&dir, "bump.json", r#"{"kind": "bump", "center": 0.5, "half_width": 0.4}"#);
    let o = hessval(&["abel", "--forward", "--input", "bump.json", "--out", "xi.csv"], dir.path());
    assert!(o.status.success());
    let o = hessval(&["abel", "--inverse", "--input", "xi.csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bump = |s: f64| if (s - 0.5).abs() < 0.4 { (1.0 - ((s - 0.5) / 0.4).powi(2)).powi(2) } else { 0.0 };
    let gap = rows(&stdout(&o)).iter().map(|(s, v)| (v - bump(*s)).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-3, "{gap}");
}

#[test]
fn json_output_parses() {
    let dir = setup();
    let o = hessval(&["valuate", "--fn", "cone.json", "--zeta", "hat.csv", "--j", "1", "--route", "closed-form", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"][0]["quantity"], "Z_1");
    assert!((v["rows"][0]["value"].as_f64().unwrap() - 2.356194490192345).abs() < 1e-15);
}

#[test]
fn exit_codes() {
    let dir = setup();
    // malformed flags
    assert_eq!(hessval(&["valuate", "--fn"], dir.path()).status.code(), Some(64));
    assert_eq!(hessval(&["frobnicate"], dir.path()).status.code(), Some(64));
    assert_eq!(hessval(&["abel", "--input", "hat.csv"], dir.path()).status.code(), Some(64));
    // invalid input
    assert_eq!(hessval(&["valuate", "--fn", "missing.json", "--zeta", "hat.csv", "--j", "1"], dir.path()).status.code(), Some(1));
    write(&dir, "bad.json", r#"{"type": "quadratic", "q": [[-1, 0], [0, 1]], "b": [0, 0], "c": 0}"#);
    assert_eq!(hessval(&["valuate", "--fn", "bad.json", "--zeta", "hat.csv", "--j", "1"], dir.path()).status.code(), Some(1));
    assert_eq!(hessval(&["valuate", "--fn", "cone.json", "--zeta", "hat.csv", "--j", "5"], dir.path()).status.code(), Some(1));
    // the profile is tagged H_1^2, so degree 2 is refused
    let o = hessval(&["valuate", "--fn", "q.json", "--zeta", "hat.csv", "--j", "2"], dir.path());
    assert!(matches!(o.status.code(), Some(1) | Some(2)));
    // cone values whose recovered profile does not satisfy the class limits
    write(&dir, "spike.csv", "t,value\n0,0\n0.00001,5\n0.5,1\n1,0\n");
    let o = hessval(&["recover-zeta", "--cone-values", "spike.csv", "--n", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("certification"));
    assert_eq!(hessval(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn fast_selfcheck_passes_and_is_deterministic() {
    let dir = setup();
    let a = hessval(&["selfcheck", "--suite", "fast"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    let text = stdout(&a);
    assert_eq!(text.lines().filter(|l| l.contains(",pass,")).count(), 9);
    let b = hessval(&["selfcheck", "--suite", "fast"], dir.path());
    assert_eq!(a.stdout, b.stdout);
}
