use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CUBIC: &str = "[nonlinearity]\nform = \"odd\"\n[[nonlinearity.a]]\ncoeff = \"1\"\nexponent = 3.0\n";
const COS_CUBIC: &str = "[nonlinearity]\nform = \"odd\"\n[[nonlinearity.a]]\ncoeff = \"cos(x)\"\nexponent = 3.0\n";

fn run(cmd: &str, config: &str, dir: &TempDir, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.path().join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_wavewell"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (o, out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn linear_wave_conserves_energy() {
    let dir = TempDir::new().unwrap();
    let cfg = "[domain]\nmodes = 32\n[data]\nkind = \"manual\"\nu0 = \"sin(x)\"\n[solver]\nt_end = 6.283185307179586\nrecord_every = 50\n";
    let (o, out) = run("simulate", cfg, &dir, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&out.join("timeseries.csv"));
    assert_eq!(header, "t,E,J,I,B,psi,psi_dot,grad_sq,dt");
    assert!(rows.len() > 100);
    for r in &rows {
        assert_eq!(r.len(), 9);
        assert!((r[1] - std::f64::consts::PI / 4.0).abs() <= 1e-6);
    }
    let text = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.lines().nth(1).unwrap().starts_with("0.0000000000000000e0,7.853981633974"));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["run"]["verdict"], "ran_to_t_end");
    assert_eq!(s["config"]["solver"]["dt"], 1e-3);
}

#[test]
fn malformed_exponent_chain_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = "[nonlinearity]\n[[nonlinearity.a]]\ncoeff = \"cos(x)\"\nexponent = 3.0\n[[nonlinearity.a]]\ncoeff = \"1\"\nexponent = 2.0\n[data]\nkind = \"manual\"\nu0 = \"sin(x)\"\n";
    let (o, _) = run("simulate", cfg, &dir, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exponent-order"));
}

#[test]
fn parse_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run("simulate", "[domain]\nmodes = \"many\"\n", &dir, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let cfg = format!("{}[data]\nkind = \"manual\"\nu0 = \"sin(x\"\n", CUBIC);
    let (o, _) = run("simulate", &cfg, &dir, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("data.u0"));
}

#[test]
fn signed_pair_blows_up_and_margins_recompute() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("[domain]\nmodes = 32\n{COS_CUBIC}[data]\nkind = \"signed\"\nk_target = 20.0\nsigma = 0.5\n[solver]\nt_end = 20.0\n[well]\nn_directions = 32\n");
    let (o, out) = run("simulate", &cfg, &dir, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["run"]["verdict"], "blowup_detected");
    assert_eq!(s["run"]["agreement"], true);
    assert_eq!(s["run"]["comparison"]["passed"], true);

    // inequality margins from the first CSV row
    let (_, rows) = csv(&out.join("timeseries.csv"));
    let r = &rows[0];
    let (e, i, psi, cross) = (r[1], r[3], r[5], 0.5 * r[6]);
    let c = 1.0f64;
    let p = 3.0;
    let g = c * (p - 1.0) / (2.0 * (p + 1.0));
    let arbitrary = e.min(g * psi + (c * (p - 1.0)).sqrt() / (p + 1.0) * cross - e);
    let positive = psi.sqrt().min(cross).min(e).min(g * psi + 0.5 * cross * cross / psi - e);
    let product = e.min(c * (p - 1.0) / ((1.0 + c) * (p + 1.0)) * cross - e).min(cross).min(-i);
    let cond = &s["run"]["conditions"];
    for (name, want) in [("arbitrary_sign", arbitrary), ("positive_product", positive), ("product_bound", product)] {
        let got = cond[name]["margin"].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "{name}: {got} vs {want}");
    }
}

#[test]
fn depth_report_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("[domain]\nmodes = 32\n{CUBIC}[well]\nn_directions = 64\n");
    let (o, out) = run("depth", &cfg, &dir, &["--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(out.join("well.json")).unwrap();
    let w = json(&out.join("well.json"));
    let xi = w["well"]["xi0"].as_f64().unwrap();
    let dl = w["well"]["d_lower"].as_f64().unwrap();
    assert!((dl - xi * xi / 4.0).abs() <= 1e-14 * dl);
    assert!(w["well"]["d_upper"].as_f64().unwrap() >= dl);
    assert_eq!(w["well"]["seed"], 7);
    let (o, out) = run("depth", &cfg, &dir, &["--seed", "7", "--threads", "2"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(out.join("well.json")).unwrap(), first);

    let flat = "[nonlinearity]\n[[nonlinearity.a]]\ncoeff = \"-1\"\nexponent = 3.0\n";
    let (o, _) = run("depth", flat, &dir, &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simulate_is_deterministic() {
    let cfg = format!("[domain]\nmodes = 16\n{COS_CUBIC}[data]\nkind = \"positive\"\nk_target = 5.0\n[solver]\nt_end = 5.0\n[well]\nn_directions = 32\n");
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (_, oa) = run("simulate", &cfg, &a, &[]);
    let (_, ob) = run("simulate", &cfg, &b, &["--threads", "3"]);
    for f in ["timeseries.csv", "summary.json"] {
        assert_eq!(std::fs::read(oa.join(f)).unwrap(), std::fs::read(ob.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn classify_examples() {
    let dir = TempDir::new().unwrap();
    let base = format!("[domain]\nmodes = 32\n{CUBIC}[well]\nn_directions = 32\n");
    let (o, out) = run("classify", &format!("{base}[data]\nkind = \"manual\"\n"), &dir, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&out.join("classification.json"));
    assert_eq!(c["classification"]["region"], "zero");
    for k in ["arbitrary_sign", "positive_product", "quotient_bound", "norm_bound", "product_bound", "beyond_earlier"] {
        assert_eq!(c["conditions"][k]["holds"], false, "{k}");
    }

    let (_, out) = run("classify", &format!("{base}[data]\nkind = \"manual\"\nu0 = \"0.5*sin(x)\"\n"), &dir, &[]);
    let c = json(&out.join("classification.json"));
    assert_eq!(c["classification"]["region"], "w_interior");
    assert_eq!(c["conditions"]["regime"], "subcritical_stable");

    let cos = format!("[domain]\nmodes = 32\n{COS_CUBIC}[data]\nkind = \"positive\"\nk_target = 3.0\n");
    let (o, out) = run("classify", &cos, &dir, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&out.join("classification.json"));
    assert_eq!(c["conditions"]["positive_product"]["holds"], true);
    assert_eq!(c["data"]["provenance"]["kind"], "positive");
}

#[test]
fn ode_closed_form_blowup() {
    let dir = TempDir::new().unwrap();
    let cfg = "[ode]\ngamma = 2.0\npsi0 = 1.0\ndpsi0 = 1.0\nt_max = 2.0\n";
    let (o, out) = run("verify-ode", cfg, &dir, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("ode.json"));
    assert_eq!(r["outcome"], "blow_up");
    assert!((r["blowup_time"].as_f64().unwrap() - 1.0).abs() <= 1e-3);
    assert_eq!(r["closed_form_blowup_time"], 1.0);
    assert_eq!(r["concavity"]["passed"], true);
    let (header, rows) = csv(&out.join("ode.csv"));
    assert_eq!(header, "t,psi,psi_dot");
    assert!((rows[500][1] - 2.0).abs() < 1e-8);

    let (o, _) = run("verify-ode", "[ode]\ngamma = 2.0\nalpha = 1.0\npsi0 = 1.0\ndpsi0 = 1.0\nt_max = 2.0\n", &dir, &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run("sweep", &format!("{CUBIC}[sweep]\namplitude = []\n"), &dir, &[]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("index,amplitude,"));
}

/// First amplitude of `A sin x` that blows up within `t = 20` for the unit
/// cubic source, frozen from a reference run.
const TRANSITION_AMPLITUDE: f64 = 1.1;

#[test]
fn amplitude_sweep_has_monotone_transition() {
    let dir = TempDir::new().unwrap();
    let amps: Vec<String> = (1..=30).map(|k| format!("{:.1}", k as f64 / 10.0)).collect();
    let cfg = format!(
        "[domain]\nmodes = 32\n{CUBIC}[data]\nkind = \"manual\"\nu0 = \"sin(x)\"\n[solver]\nt_end = 20.0\nrecord_every = 100\n[well]\nn_directions = 32\n[sweep]\namplitude = [{}]\n",
        amps.join(", ")
    );
    let (o, out) = run("sweep", &cfg, &dir, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 30);
    let blown: Vec<bool> = rows.iter().map(|r| r[4] == "blowup_detected").collect();
    let first = blown.iter().position(|&b| b).unwrap();
    assert!(blown[..first].iter().all(|&b| !b) && blown[first..].iter().all(|&b| b));
    assert!(rows[..first].iter().all(|r| r[4] == "ran_to_t_end"));
    let a: f64 = rows[first][1].parse().unwrap();
    assert!((a - TRANSITION_AMPLITUDE).abs() < 1e-12, "transition at {a}");
    for r in &rows {
        assert!(out.join(r[14]).exists());
    }
}
