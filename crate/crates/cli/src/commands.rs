use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use reach_codesign::aero::{generate_table, AeroAxes, AeroTable, AircraftParams, SurrogateConfig};
use reach_codesign::control::{
    default_maneuver, simulate_linear_tracking, simulate_nonlinear_tracking, trajectory_csv,
    NonlinearRun, PerformanceReport, Reference, TrackingMode, TrackingTask, WeightSpec,
};
use reach_codesign::flight::{check_trim_regularity, linearize, trim_jacobian, Design, TrimPoint};
use reach_codesign::lti::{LtiSystem, Trajectory};
use reach_codesign::optim::{
    default_direction, optimize_design, DesignContext, OptProblem, OptResult, ProblemKind, Status,
};
use reach_codesign::reach::{
    sample_reach_set, system_fingerprint, InputBox, ReachConfig, ReachKernel, ReachSet,
};
use reach_codesign::{flight, Error};

use crate::{FlightArgs, GenAeroArgs, MetricsArgs, OptimizeArgs, ReachArgs, SamplingArgs, TrackArgs, TrimArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable inputs or out-of-range values.
    Usage(String),
    /// Trim, Riccati, optimizer or simulation failure.
    Numerical(String),
    Write(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) | CliError::Write(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Write(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_list(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let vals = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| usage(format!("{what}: cannot parse {s:?}")))?;
    if vals.len() != n {
        return Err(usage(format!("{what}: expected {n} values, got {}", vals.len())));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(usage(format!("{what}: values must be finite")));
    }
    Ok(vals)
}

fn parse_design(s: &str) -> Result<Design> {
    let v = parse_list(s, 2, "design")?;
    Ok(Design::new(v[0], v[1])?)
}

fn parse_direction(s: &str) -> Result<[f64; 4]> {
    let v = parse_list(s, 4, "direction")?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(usage("direction must be nonzero"));
    }
    Ok([v[0] / norm, v[1] / norm, v[2] / norm, v[3] / norm])
}

fn read_text(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Write(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("serialization: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("plain data serializes")
}

struct LoadedTable {
    table: AeroTable,
    path: String,
    sha256: String,
}

impl LoadedTable {
    fn load(path: &str) -> Result<Self> {
        let text = read_text(path)?;
        let table =
            AeroTable::from_json(&text).map_err(|e| usage(format!("table {path}: {e}")))?;
        Ok(Self {
            table,
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    fn config(&self) -> Value {
        json!({ "path": self.path, "sha256": self.sha256 })
    }
}

struct Flight {
    table: LoadedTable,
    design: Design,
    airspeed: f64,
    gamma: f64,
}

impl Flight {
    fn from_args(a: &FlightArgs) -> Result<Self> {
        let design = parse_design(&a.design)?;
        Ok(Self {
            table: LoadedTable::load(&a.table)?,
            design,
            airspeed: a.airspeed,
            gamma: a.gamma,
        })
    }

    fn config(&self) -> Value {
        json!({
            "table": self.table.config(),
            "design": self.design.to_array(),
            "airspeed": self.airspeed,
            "gamma": self.gamma,
        })
    }

    fn trim(&self) -> Result<TrimPoint> {
        let t = &self.table.table;
        Ok(flight::trim(&self.design, t, &t.params, self.airspeed, self.gamma)?)
    }

    fn model(&self) -> Result<(TrimPoint, LtiSystem, InputBox)> {
        let tp = self.trim()?;
        let t = &self.table.table;
        let (sys, bx) = linearize(&self.design, t, &t.params, &tp)?;
        Ok((tp, sys, bx))
    }
}

fn reach_config(s: &SamplingArgs) -> Result<ReachConfig> {
    let cfg = ReachConfig {
        horizon: s.horizon,
        n_steps: s.steps,
        directions: s.directions,
        seed: s.seed,
    };
    cfg.grid()?;
    Ok(cfg)
}

/// `<stem>_<suffix>.csv` beside `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn pair_csv(header: &str, points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = format!("{header}\n");
    for (a, b) in points {
        out.push_str(&format!("{a:.11e},{b:.11e}\n"));
    }
    out
}

fn write_plot_pairs(base: &Path, states: &[DVector<f64>]) -> Result<()> {
    write_text(
        &sibling(base, "V_alpha"),
        &pair_csv("V,alpha", states.iter().map(|x| (x[0], x[1]))),
    )?;
    write_text(
        &sibling(base, "Q_theta"),
        &pair_csv("Q,theta", states.iter().map(|x| (x[2], x[3]))),
    )
}

pub fn gen_aero(a: &GenAeroArgs) -> Result<()> {
    let axes = AeroAxes::uniform(a.resolution)?;
    let table = generate_table(&axes, &AircraftParams::default(), &SurrogateConfig::default())?;
    let text = table
        .to_json()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_text(Path::new(&a.out), &text)?;
    println!("{}", json!({ "out": a.out, "resolution": a.resolution, "entries": table.lift.len() }));
    Ok(())
}

#[derive(Serialize)]
struct TrimOutput {
    config: Value,
    #[serde(flatten)]
    trim: TrimPoint,
    regularity: flight::RegularityReport,
}

pub fn trim(a: &TrimArgs) -> Result<()> {
    let fl = Flight::from_args(&a.flight)?;
    let tp = fl.trim()?;
    let t = &fl.table.table;
    let jac = trim_jacobian(&fl.design, t, &t.params, &tp)?;
    let out = TrimOutput {
        config: fl.config(),
        trim: tp,
        regularity: check_trim_regularity(&jac),
    };
    let text = serde_json::to_string_pretty(&out)
        .map_err(|e| CliError::Numerical(format!("serialization: {e}")))?;
    if let Some(path) = &a.out {
        write_text(Path::new(path), &format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(())
}

pub fn reach(a: &ReachArgs) -> Result<()> {
    let fl = Flight::from_args(&a.flight)?;
    let cfg = reach_config(&a.sampling)?;
    let (_, sys, bx) = fl.model()?;
    let set = sample_reach_set(&sys, &bx, cfg.directions, &cfg.grid()?, cfg.seed)?;
    let vol = set.volume();
    if let Some(w) = &vol.warning {
        log::warn!("{w}");
    }
    let mut doc: Value = serde_json::from_str(&set.to_json()?)
        .map_err(|e| CliError::Numerical(format!("serialization: {e}")))?;
    let mut config = fl.config();
    config["reach"] = to_value(&cfg);
    doc["config"] = config;
    doc["volume"] = json!(vol.volume);
    let out = Path::new(&a.out);
    write_json(out, &doc)?;
    if a.emit_plot_data {
        write_plot_pairs(out, &set.vertices)?;
    }
    println!("{}", json!({ "out": a.out, "vertices": set.vertices.len(), "volume": vol.volume }));
    Ok(())
}

pub fn metrics(a: &MetricsArgs) -> Result<()> {
    if !a.volume && a.projection.is_none() {
        return Err(usage("nothing to compute; pass --volume and/or --projection"));
    }
    let set = ReachSet::from_json(&read_text(&a.reach)?)
        .map_err(|e| usage(format!("reach set {}: {e}", a.reach)))?;
    let mut config = json!({ "reach": a.reach, "from_vertices": a.from_vertices });
    let mut out = serde_json::Map::new();
    if a.volume {
        let vol = set.volume();
        if let Some(w) = &vol.warning {
            log::warn!("{w}");
        }
        out.insert("volume".into(), json!(vol.volume));
    }
    if let Some(p) = &a.projection {
        let v = parse_direction(p)?;
        if v.len() != set.vertices[0].len() {
            return Err(usage("projection dimension does not match the reach set"));
        }
        let vd = DVector::from_row_slice(&v);
        config["projection"] = json!(v);
        let value = if a.from_vertices {
            set.vertex_interval_length(&vd)
        } else {
            let (Some(table), Some(design)) = (&a.table, &a.design) else {
                return Err(usage(
                    "synthesized projection needs --table and --design (or use --from-vertices)",
                ));
            };
            let fl = Flight {
                table: LoadedTable::load(table)?,
                design: parse_design(design)?,
                airspeed: a.airspeed,
                gamma: a.gamma,
            };
            let (_, sys, bx) = fl.model()?;
            if system_fingerprint(&sys, &bx) != set.system_fingerprint {
                return Err(usage(
                    "reach set was not produced by this table, design and flight condition",
                ));
            }
            config["flight"] = fl.config();
            ReachKernel::new(&sys, &set.horizon)?.support_length(&bx, &vd)?
        };
        out.insert("projection".into(), json!(value));
    }
    out.insert("config".into(), config);
    println!("{}", Value::Object(out));
    Ok(())
}

#[derive(Serialize)]
struct OptimizeOutput<'a> {
    config: Value,
    #[serde(flatten)]
    result: &'a OptResult,
}

pub fn optimize(a: &OptimizeArgs) -> Result<()> {
    let kind: ProblemKind = a.problem.parse()?;
    let table = LoadedTable::load(&a.table)?;
    let d0 = parse_design(&a.d0)?;
    let cfg = reach_config(&a.sampling)?;
    let mut problem = OptProblem::new(kind, d0);
    problem.reach_config = cfg;
    if kind != ProblemKind::Vm {
        problem.v = Some(match &a.v {
            Some(s) => parse_direction(s)?,
            None => default_direction(),
        });
    } else if a.v.is_some() {
        log::warn!("--v is ignored by the volume problem");
    }
    if kind == ProblemKind::Vmdc {
        if let Some(k) = a.kappa {
            problem.kappa = Some(k);
        }
    } else if a.kappa.is_some() {
        log::warn!("--kappa only applies to vmdc");
    }
    if let Some(n) = a.max_iter {
        problem.settings.max_iter = n;
    }
    problem.validate()?;

    let mut ctx = DesignContext::new(&table.table, cfg);
    ctx.airspeed = a.airspeed;
    ctx.gamma = a.gamma;
    let result = optimize_design(&problem, &ctx)?;
    let config = json!({
        "table": table.config(),
        "airspeed": a.airspeed,
        "gamma": a.gamma,
    });
    write_json(Path::new(&a.out), &OptimizeOutput { config, result: &result })?;
    println!(
        "{}",
        json!({
            "out": a.out,
            "status": result.status,
            "d_star": result.d_star,
            "initial_objective": result.objective_history[0],
            "final_objective": result.final_objective(),
            "kkt_residual": result.kkt_residual,
        })
    );
    match result.status {
        Status::Converged | Status::MaxIter => Ok(()),
        Status::LineSearchFailure | Status::Infeasible => Err(CliError::Numerical(format!(
            "optimizer stopped with status {:?}; best iterate written to {}",
            result.status, a.out
        ))),
    }
}

#[derive(Serialize)]
struct TrackOutput {
    config: Value,
    #[serde(flatten)]
    report: PerformanceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    maneuver: Option<NonlinearRun>,
}

fn weights_for(a: &TrackArgs, default_preset: &str, n_q: usize) -> Result<(WeightSpec, Value)> {
    let preset = a.weights.as_deref().unwrap_or(default_preset);
    let base = WeightSpec::preset(preset)?;
    let q: Vec<f64> = match &a.q {
        Some(s) => parse_list(s, n_q, "q")?,
        None => (0..base.q().nrows()).map(|i| base.q()[(i, i)]).collect(),
    };
    let r: Vec<f64> = match &a.r {
        Some(s) => parse_list(s, 2, "r")?,
        None => (0..base.r().nrows()).map(|i| base.r()[(i, i)]).collect(),
    };
    let w = if a.q.is_some() || a.r.is_some() {
        WeightSpec::diagonal(&q, &r)?
    } else {
        base
    };
    let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    };
    let cfg = json!({
        "preset": if a.q.is_some() || a.r.is_some() { Value::Null } else { json!(preset) },
        "q": rows(w.q()),
        "r": rows(w.r()),
    });
    Ok((w, cfg))
}

pub fn track(a: &TrackArgs) -> Result<()> {
    let fl = Flight::from_args(&a.flight)?;
    let baseline = match &a.baseline {
        Some(p) => Some(
            serde_json::from_str::<PerformanceReport>(&read_text(p)?)
                .map_err(|e| usage(format!("baseline {p}: {e}")))?,
        ),
        None => None,
    };
    let mut config = fl.config();
    config["mode"] = json!(a.mode);
    config["baseline"] = json!(a.baseline);

    let (traj, report, maneuver): (Trajectory, PerformanceReport, Option<NonlinearRun>) =
        match a.mode.as_str() {
            "lq" | "lqi" => {
                let reference: Reference = a
                    .reference
                    .as_deref()
                    .ok_or_else(|| usage("--ref is required for linear tracking"))?
                    .parse()?;
                let (mode, n_q) = if a.mode == "lq" {
                    (TrackingMode::LqFinite, 4)
                } else {
                    (TrackingMode::Lqi, 5)
                };
                let preset = format!(
                    "paper-{}-{}",
                    a.mode,
                    match reference.channel {
                        reach_codesign::control::Channel::Velocity => "velocity",
                        reach_codesign::control::Channel::Pitch => "pitch",
                    }
                );
                let (w, wcfg) = weights_for(a, &preset, n_q)?;
                let mut task = TrackingTask::new(mode, reference);
                task.duration = a.duration;
                task.n_steps = a.steps;
                let (tp, sys, bx) = fl.model()?;
                let (traj, rep) = simulate_linear_tracking(&sys, &bx, &task, &w)?;
                config["task"] = to_value(&task);
                config["weights"] = wcfg;
                config["trim"] = to_value(&tp);
                (traj, rep, None)
            }
            "nonlinear" => {
                if a.reference.is_some() {
                    log::warn!("--ref is ignored by the nonlinear maneuver");
                }
                let (w, wcfg) = weights_for(a, "paper-nonlinear", 5)?;
                let phases = default_maneuver();
                let t = &fl.table.table;
                let (traj, rep, run) =
                    simulate_nonlinear_tracking(&fl.design, t, &t.params, &phases, &w, a.dt, None)?;
                config["phases"] = to_value(&phases);
                config["dt"] = json!(a.dt);
                config["weights"] = wcfg;
                (traj, rep, Some(run))
            }
            other => return Err(usage(format!("unknown mode {other:?}; use lq, lqi or nonlinear"))),
        };

    let report = match &baseline {
        Some(b) => report.with_baseline(b)?,
        None => report,
    };
    let csv = Path::new(&a.csv);
    write_text(csv, &trajectory_csv(&traj))?;
    if a.emit_plot_data {
        write_plot_pairs(csv, &traj.states)?;
    }
    let out = TrackOutput {
        config,
        report,
        maneuver,
    };
    write_json(Path::new(&a.report), &out)?;
    println!(
        "{}",
        json!({
            "csv": a.csv,
            "report": a.report,
            "tracking_error_l2": out.report.tracking_error_l2,
            "control_cost_l2": out.report.control_cost_l2,
        })
    );
    Ok(())
}
