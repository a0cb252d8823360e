use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use nalgebra::DVector;
use serde_json::Value;

use reach_codesign::aero::AeroTable;
use reach_codesign::flight::{linearize, trim, Design};
use reach_codesign::lti::TimeGrid;
use reach_codesign::reach::{sample_directions, system_fingerprint, ReachKernel, ReachSet};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_reach-codesign")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&o.stdout))
    })
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn table(&self) -> PathBuf {
        self.path().join("t.json")
    }
}

/// Working directory holding a default table as `t.json`.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let o = run(dir.path(), &["gen-aero", "--out", "t.json"]);
        assert_eq!(code(&o), 0);
        Fixture { dir }
    })
}

fn workdir() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    std::fs::copy(fixture().table(), d.path().join("t.json")).unwrap();
    d
}

#[test]
fn gen_aero_default_resolution_and_repeatability() {
    let f = fixture();
    let doc = read_json(f.table());
    for key in ["lift", "drag", "moment"] {
        assert_eq!(doc[key].as_array().unwrap().len(), 7776);
    }
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["gen-aero", "--out", "again.json"])), 0);
    assert_eq!(
        std::fs::read(d.path().join("again.json")).unwrap(),
        std::fs::read(f.table()).unwrap()
    );
    assert_eq!(code(&run(d.path(), &["gen-aero", "--out", "x.json", "--resolution", "1"])), 1);
}

#[test]
fn trim_contract_and_validation() {
    let d = workdir();
    let o = run(d.path(), &["trim", "--table", "t.json", "--design", "5,12", "--airspeed", "200", "--gamma", "0"]);
    assert_eq!(code(&o), 0);
    let j = stdout_json(&o);
    assert!(j["residual_norm"].as_f64().unwrap() < 1e-8);
    assert!(j["regularity"]["invertible"].as_bool().unwrap());
    assert_eq!(j["config"]["design"], serde_json::json!([5.0, 12.0]));

    let o = run(d.path(), &["trim", "--table", "t.json", "--design", "2,12"]);
    assert_eq!(code(&o), 1);

    let o = run(d.path(), &["trim", "--table", "t.json", "--design", "5,12", "--airspeed", "200", "--gamma", "0.1745"]);
    assert_eq!(code(&o), 0);
    let j = stdout_json(&o);
    let gap = j["theta0"].as_f64().unwrap() - j["alpha0"].as_f64().unwrap();
    assert_eq!(gap, 0.1745);
}

#[test]
fn trim_numerical_failure_exits_two() {
    let d = workdir();
    let o = run(d.path(), &["trim", "--table", "t.json", "--design", "3,10", "--airspeed", "190", "--gamma", "0.1745"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta_th"));
}

#[test]
fn reach_vertices_volume_and_metrics_round_trip() {
    let d = workdir();
    let o = run(d.path(), &["reach", "--table", "t.json", "--directions", "64", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let printed = stdout_json(&o)["volume"].as_f64().unwrap();
    let doc = read_json(d.path().join("reach.json"));
    assert_eq!(doc["vertices"].as_array().unwrap().len(), 64);
    assert_eq!(doc["config"]["reach"]["directions"], 64);
    let o = run(d.path(), &["metrics", "--reach", "reach.json", "--volume"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["volume"].as_f64().unwrap(), printed);
}

fn write_set(path: &Path, vertices: Vec<DVector<f64>>, directions: Vec<DVector<f64>>, fingerprint: &str) {
    let set = ReachSet {
        vertices,
        directions,
        horizon: TimeGrid::horizon(1.0, 10).unwrap(),
        system_fingerprint: fingerprint.into(),
        seed: 0,
    };
    std::fs::write(path, set.to_json().unwrap()).unwrap();
}

#[test]
fn metrics_on_cube_and_symmetric_fixtures() {
    let d = tempfile::tempdir().unwrap();
    let cube: Vec<DVector<f64>> = (0..16usize)
        .map(|m| DVector::from_fn(4, |i, _| ((m >> i) & 1) as f64))
        .collect();
    let dirs = sample_directions(4, 16, 0);
    write_set(&d.path().join("cube.json"), cube, dirs, "fixture");
    let o = run(d.path(), &["metrics", "--reach", "cube.json", "--volume"]);
    assert_eq!(code(&o), 0);
    assert!((stdout_json(&o)["volume"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let half: [[f64; 4]; 5] = [
        [0.3, -1.2, 0.7, 0.1],
        [-0.5, 0.4, -1.9, 0.8],
        [1.1, 0.2, 0.05, -0.6],
        [0.0, 0.9, 1.3, 1.4],
        [0.6, -0.3, -0.2, 0.9],
    ];
    let mut sym = Vec::new();
    for p in half {
        let v = DVector::from_row_slice(&p);
        sym.push(-&v);
        sym.push(v);
    }
    let max_q = sym.iter().map(|v| v[2].abs()).fold(0.0, f64::max);
    let dirs = sample_directions(4, sym.len(), 1);
    write_set(&d.path().join("sym.json"), sym, dirs, "fixture");
    let o = run(d.path(), &["metrics", "--reach", "sym.json", "--projection", "0,0,1,0", "--from-vertices"]);
    assert_eq!(code(&o), 0);
    assert!((stdout_json(&o)["projection"].as_f64().unwrap() - 2.0 * max_q).abs() < 1e-12);

    let o = run(d.path(), &["metrics", "--reach", "sym.json"]);
    assert_eq!(code(&o), 1);
    let o = run(d.path(), &["metrics", "--reach", "sym.json", "--projection", "0,0,1,0"]);
    assert_eq!(code(&o), 1, "synthesis needs --table and --design");
}

#[test]
fn vertex_and_synthesized_projection_agree_on_sampled_direction() {
    let d = workdir();
    let table = AeroTable::from_json(&std::fs::read_to_string(d.path().join("t.json")).unwrap()).unwrap();
    let design = Design::new(6.0, 14.0).unwrap();
    let t = trim(&design, &table, &table.params, 200.0, 0.0).unwrap();
    let (sys, bx) = linearize(&design, &table, &table.params, &t).unwrap();
    let grid = TimeGrid::horizon(2.0, 200).unwrap();
    let kernel = ReachKernel::new(&sys, &grid).unwrap();
    let v = DVector::from_row_slice(&[0.0, 0.0, 0.6, 0.8]);
    let mut dirs = sample_directions(4, 30, 5);
    dirs.push(v.clone());
    dirs.push(-&v);
    let vertices = dirs.iter().map(|c| kernel.extreme_point(&bx, c).unwrap()).collect();
    let set = ReachSet {
        vertices,
        directions: dirs,
        horizon: grid,
        system_fingerprint: system_fingerprint(&sys, &bx),
        seed: 5,
    };
    std::fs::write(d.path().join("r.json"), set.to_json().unwrap()).unwrap();
    let base = ["metrics", "--reach", "r.json", "--projection", "0,0,0.6,0.8"];
    let o = run(d.path(), &base);
    assert_eq!(code(&o), 1);
    let mut synth = base.to_vec();
    synth.extend(["--table", "t.json", "--design", "6,14"]);
    let o = run(d.path(), &synth);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = stdout_json(&o)["projection"].as_f64().unwrap();
    let mut from_v = base.to_vec();
    from_v.push("--from-vertices");
    let b = stdout_json(&run(d.path(), &from_v))["projection"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");

    // a different design does not match the stored fingerprint
    let mut wrong = base.to_vec();
    wrong.extend(["--table", "t.json", "--design", "5,12"]);
    assert_eq!(code(&run(d.path(), &wrong)), 1);
}

#[test]
fn optimize_volume_improves_and_validates_problem() {
    let d = workdir();
    let o = run(d.path(), &["optimize", "--table", "t.json", "--problem", "vm"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(d.path().join("opt.json"));
    let status = doc["status"].as_str().unwrap();
    assert!(status == "converged" || status == "max_iter");
    let hist = doc["objective_history"].as_array().unwrap();
    assert!(hist.last().unwrap().as_f64().unwrap() >= hist[0].as_f64().unwrap());
    assert_eq!(doc["problem"]["kind"], "vm");
    assert!(doc["config"]["table"]["sha256"].is_string());

    assert_eq!(code(&run(d.path(), &["optimize", "--table", "t.json", "--problem", "bogus"])), 1);
    assert_eq!(
        code(&run(d.path(), &["optimize", "--table", "t.json", "--problem", "dm", "--d0", "8,12"])),
        1
    );
}

#[test]
fn zero_margin_constraint_is_feasible_at_start() {
    let d = workdir();
    let o = run(
        d.path(),
        &["optimize", "--table", "t.json", "--problem", "vmdc", "--kappa", "0", "--max-iter", "2", "--out", "k.json"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(d.path().join("k.json"));
    assert!(doc["per_iteration"][0]["g"].as_f64().unwrap() >= 0.0);
    assert_eq!(doc["problem"]["kappa"], 0.0);
}

#[test]
fn default_and_explicit_direction() {
    let d = workdir();
    let o = run(
        d.path(),
        &["optimize", "--table", "t.json", "--problem", "dm", "--max-iter", "1", "--out", "a.json"],
    );
    assert_eq!(code(&o), 0);
    let v = read_json(d.path().join("a.json"))["problem"]["v"].clone();
    let a = 110f64.to_radians();
    assert_eq!(v, serde_json::json!([0.0, 0.0, a.cos(), a.sin()]));

    let o = run(
        d.path(),
        &["optimize", "--table", "t.json", "--problem", "dm", "--v", "0,0,-0.342,0.940", "--max-iter", "1", "--out", "b.json"],
    );
    assert_eq!(code(&o), 0);
    let v: Vec<f64> = serde_json::from_value(read_json(d.path().join("b.json"))["problem"]["v"].clone()).unwrap();
    assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn track_presets_zero_reference_and_baseline() {
    let d = workdir();
    let o = run(
        d.path(),
        &["track", "--table", "t.json", "--mode", "lq", "--ref", "velocity=4", "--weights", "paper-lq-velocity", "--csv", "a.csv", "--report", "a.json"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = read_json(d.path().join("a.json"));
    assert_eq!(a["config"]["weights"]["q"][0], serde_json::json!([1000.0, 0.0, 0.0, 0.0]));
    assert_eq!(a["config"]["weights"]["q"][3][3], 0.0);
    assert_eq!(a["config"]["weights"]["r"], serde_json::json!([[1000.0, 0.0], [0.0, 1000.0]]));

    let csv = std::fs::read_to_string(d.path().join("a.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,V,alpha,Q,theta,delta_th,delta_e");
    assert_eq!(lines.count(), 3001);

    let o = run(
        d.path(),
        &["track", "--table", "t.json", "--mode", "lq", "--ref", "velocity=0", "--csv", "z.csv", "--report", "z.json"],
    );
    assert_eq!(code(&o), 0);
    let z = read_json(d.path().join("z.json"));
    assert_eq!(z["tracking_error_l2"], 0.0);
    assert_eq!(z["control_cost_l2"], 0.0);

    let o = run(
        d.path(),
        &["track", "--table", "t.json", "--mode", "lq", "--ref", "velocity=4", "--design", "6,15", "--baseline", "a.json", "--csv", "b.csv", "--report", "b.json"],
    );
    assert_eq!(code(&o), 0);
    let b = read_json(d.path().join("b.json"));
    let pct = |base: f64, v: f64| (base - v) / base * 100.0;
    let imp = &b["improvement"];
    let te = pct(a["tracking_error_l2"].as_f64().unwrap(), b["tracking_error_l2"].as_f64().unwrap());
    assert!((imp["tracking_error_pct"].as_f64().unwrap() - te).abs() < 1e-9);
    let cc = pct(a["control_cost_l2"].as_f64().unwrap(), b["control_cost_l2"].as_f64().unwrap());
    assert!((imp["control_cost_pct"].as_f64().unwrap() - cc).abs() < 1e-9);
    assert_eq!(imp["state_error_pct"].as_array().unwrap().len(), 4);
}

#[test]
fn track_plot_data_and_modes() {
    let d = workdir();
    let o = run(
        d.path(),
        &["track", "--table", "t.json", "--mode", "lqi", "--ref", "pitch=0.5", "--emit-plot-data", "--csv", "p.csv", "--report", "p.json"],
    );
    assert_eq!(code(&o), 0);
    let va = std::fs::read_to_string(d.path().join("p_V_alpha.csv")).unwrap();
    assert!(va.starts_with("V,alpha\n"));
    assert!(d.path().join("p_Q_theta.csv").exists());
    assert_eq!(read_json(d.path().join("p.json"))["config"]["weights"]["preset"], "paper-lqi-pitch");

    assert_eq!(code(&run(d.path(), &["track", "--table", "t.json", "--mode", "lq"])), 1);
    assert_eq!(code(&run(d.path(), &["track", "--table", "t.json", "--mode", "pid", "--ref", "pitch=1"])), 1);
    assert_eq!(
        code(&run(d.path(), &["track", "--table", "t.json", "--mode", "lq", "--ref", "roll=1"])),
        1
    );
}

#[test]
fn usage_and_write_failures() {
    let d = workdir();
    assert_eq!(code(&run(d.path(), &["--no-such-flag"])), 1);
    assert_eq!(code(&run(d.path(), &["reach"])), 1);
    assert_eq!(code(&run(d.path(), &["reach", "--table", "missing.json"])), 1);
    assert_eq!(code(&run(d.path(), &["--help"])), 0);
    let o = run(d.path(), &["reach", "--table", "t.json", "--out", "no/such/dir/r.json"]);
    assert_eq!(code(&o), 2);
    let o = Command::new(bin())
        .current_dir(d.path())
        .env("REACH_CODESIGN_THREADS", "many")
        .args(["reach", "--table", "t.json"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}
