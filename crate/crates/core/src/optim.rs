//! Finite-difference SQP over the two planform variables, and the design
//! problems built on reachable-set metrics:
//!
//! * `Vm`: maximize hull volume of the sampled reachable set.
//! * `Dm`: maximize the support length along a direction `v`.
//! * `Vmdc`: maximize volume subject to
//!   `support_length(d, v) ≥ (1 + κ) · support_length(d0, v)`.
//!
//! The solver works in box-normalized coordinates `s ∈ [0, 1]²`, with the
//! objective scaled by `|f(d0)|` and the constraint by the baseline
//! projection. Quadratic subproblems have at most five linear constraints in
//! two unknowns and are solved exactly by enumerating active sets.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aero::{AeroTable, AircraftParams};
use crate::error::{Error, Result};
use crate::flight::{linearize, trim, Design, DESIGN_BOUNDS};
use crate::lti::LtiSystem;
use crate::reach::{sample_reach_set, InputBox, ReachConfig, ReachKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Vm,
    Dm,
    Vmdc,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vm" => Ok(Self::Vm),
            "dm" => Ok(Self::Dm),
            "vmdc" => Ok(Self::Vmdc),
            other => Err(Error::invalid(format!(
                "unknown problem {other:?}; use vm, dm or vmdc"
            ))),
        }
    }
}

/// `[0, 0, cos 110°, sin 110°]`: the pitch-rate/pitch-angle diagonal.
pub fn default_direction() -> [f64; 4] {
    let a = 110f64.to_radians();
    [0.0, 0.0, a.cos(), a.sin()]
}

pub const DEFAULT_KAPPA: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqpSettings {
    /// Finite-difference step in design units [m].
    pub fd_step: f64,
    pub max_iter: usize,
    /// Stop when the accepted step is below this in every coordinate [m].
    pub step_tol: f64,
    /// Stop when the relative objective change is below this.
    pub f_tol: f64,
    pub max_backtracks: usize,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self {
            fd_step: 0.05,
            max_iter: 100,
            step_tol: 1e-3,
            f_tol: 1e-6,
            max_backtracks: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptProblem {
    pub kind: ProblemKind,
    /// Unit direction for `Dm` and `Vmdc`.
    pub v: Option<[f64; 4]>,
    /// Required relative projection gain for `Vmdc`.
    pub kappa: Option<f64>,
    pub d0: Design,
    pub bounds: [(f64, f64); 2],
    pub reach_config: ReachConfig,
    /// Projection along `v` at `d0`; filled in by [`DesignContext::prepare`].
    pub baseline_projection: Option<f64>,
    pub settings: SqpSettings,
}

impl OptProblem {
    pub fn new(kind: ProblemKind, d0: Design) -> Self {
        Self {
            kind,
            v: (kind != ProblemKind::Vm).then(default_direction),
            kappa: (kind == ProblemKind::Vmdc).then_some(DEFAULT_KAPPA),
            d0,
            bounds: DESIGN_BOUNDS,
            reach_config: ReachConfig::default(),
            baseline_projection: None,
            settings: SqpSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::invalid(format!("bad bounds on design variable {i}")));
            }
        }
        let d0 = self.d0.to_array();
        if (0..2).any(|i| d0[i] < self.bounds[i].0 || d0[i] > self.bounds[i].1) {
            return Err(Error::invalid("d0 lies outside the design bounds"));
        }
        if let Some(v) = self.v {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("v must be unit norm, |v| = {norm}")));
            }
        } else if self.kind != ProblemKind::Vm {
            return Err(Error::invalid("dm and vmdc need a direction v"));
        }
        if self.kind == ProblemKind::Vmdc {
            match self.kappa {
                Some(k) if k >= 0.0 && k <= 1.0 => {}
                _ => return Err(Error::invalid("vmdc needs kappa in [0, 1]")),
            }
        }
        Ok(())
    }
}

/// Objective and optional constraint value at one design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub g: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    LineSearchFailure,
    /// Restoration could not reach the constraint's feasible region.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub d: [f64; 2],
    pub f: f64,
    pub g: Option<f64>,
    pub merit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub problem: OptProblem,
    pub d_star: [f64; 2],
    pub objective_history: Vec<f64>,
    pub constraint_values: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    pub per_iteration: Vec<IterationRecord>,
}

impl OptResult {
    pub fn d_star(&self) -> Design {
        Design::from_array(self.d_star)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().expect("history starts at d0")
    }
}

fn wrap(d: [f64; 2], e: Error) -> Error {
    match e {
        Error::Evaluation { .. } => e,
        other => Error::Evaluation {
            c: d[0],
            w: d[1],
            source: Box::new(other),
        },
    }
}

fn stencil(d: [f64; 2], h: f64, bounds: &[(f64, f64); 2], i: usize) -> ([f64; 2], [f64; 2]) {
    let (lo, hi) = bounds[i];
    let mut plus = d;
    let mut minus = d;
    if d[i] + h <= hi && d[i] - h >= lo {
        plus[i] += h;
        minus[i] -= h;
    } else if d[i] + h <= hi {
        plus[i] += h;
    } else {
        minus[i] -= h;
    }
    (plus, minus)
}

/// Central differences with step `h`, one-sided where `d ± h` would leave
/// `bounds`. The four probes are evaluated concurrently.
pub fn fd_gradient<F>(f: F, d: [f64; 2], h: f64, bounds: &[(f64, f64); 2]) -> Result<[f64; 2]>
where
    F: Fn([f64; 2]) -> Result<f64> + Sync,
{
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let probes: Vec<[f64; 2]> = (0..2)
        .flat_map(|i| {
            let (p, m) = stencil(d, h, bounds, i);
            [p, m]
        })
        .collect();
    let vals = probes
        .par_iter()
        .map(|&p| f(p).map_err(|e| wrap(p, e)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(std::array::from_fn(|i| {
        (vals[2 * i] - vals[2 * i + 1]) / (probes[2 * i][i] - probes[2 * i + 1][i])
    }))
}

/// Exact solution of `min cᵀp + ½pᵀHp` s.t. `aᵢᵀp ≥ bᵢ` by active-set
/// enumeration. Returns `p` and the multipliers.
fn solve_qp(
    h: &Matrix2<f64>,
    c: &Vector2<f64>,
    cons: &[(Vector2<f64>, f64)],
) -> Option<(Vector2<f64>, Vec<f64>)> {
    let feasible = |p: &Vector2<f64>| cons.iter().all(|(a, b)| a.dot(p) >= b - 1e-10);
    let value = |p: &Vector2<f64>| c.dot(p) + 0.5 * p.dot(&(h * p));
    let mut best: Option<(f64, Vector2<f64>, Vec<f64>)> = None;
    let mut consider = |p: Vector2<f64>, lam: Vec<f64>| {
        if lam.iter().all(|&l| l >= -1e-12) && feasible(&p) {
            let v = value(&p);
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, p, lam));
            }
        }
    };
    let m = cons.len();
    if let Some(hinv) = h.try_inverse() {
        consider(-hinv * c, vec![0.0; m]);
        for i in 0..m {
            let (a, b) = cons[i];
            // H p + c = λ a, aᵀp = b
            let ha = hinv * a;
            let denom = a.dot(&ha);
            if denom.abs() < 1e-300 {
                continue;
            }
            let lam = (b + a.dot(&(hinv * c))) / denom;
            let p = hinv * (lam * a - c);
            let mut l = vec![0.0; m];
            l[i] = lam;
            consider(p, l);
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            let (ai, bi) = cons[i];
            let (aj, bj) = cons[j];
            let mat = Matrix2::new(ai[0], ai[1], aj[0], aj[1]);
            let Some(inv) = mat.try_inverse() else {
                continue;
            };
            if mat.determinant().abs() < 1e-14 {
                continue;
            }
            let p = inv * Vector2::new(bi, bj);
            // [aᵢ aⱼ] λ = H p + c
            let lam = mat.transpose().try_inverse()? * (h * p + c);
            let mut l = vec![0.0; m];
            l[i] = lam[0];
            l[j] = lam[1];
            consider(p, l);
        }
    }
    best.map(|(_, p, l)| (p, l))
}

/// Memoized evaluator in normalized coordinates.
struct Scaled<'a, F> {
    eval: &'a F,
    bounds: [(f64, f64); 2],
    f_scale: f64,
    g_scale: f64,
    cache: Mutex<HashMap<[u64; 2], Evaluation>>,
    count: Mutex<usize>,
}

impl<F> Scaled<'_, F>
where
    F: Fn(Design) -> Result<Evaluation> + Sync,
{
    fn to_design(&self, s: [f64; 2]) -> [f64; 2] {
        std::array::from_fn(|i| {
            let (lo, hi) = self.bounds[i];
            (lo + s[i].clamp(0.0, 1.0) * (hi - lo)).clamp(lo, hi)
        })
    }

    fn width(&self, i: usize) -> f64 {
        self.bounds[i].1 - self.bounds[i].0
    }

    fn raw(&self, d: [f64; 2]) -> Result<Evaluation> {
        let key = [d[0].to_bits(), d[1].to_bits()];
        if let Some(e) = self.cache.lock().unwrap().get(&key) {
            return Ok(*e);
        }
        let e = (self.eval)(Design::from_array(d)).map_err(|e| wrap(d, e))?;
        if !e.f.is_finite() || e.g.is_some_and(|g| !g.is_finite()) {
            return Err(wrap(d, Error::Diverged { time: f64::NAN }));
        }
        *self.count.lock().unwrap() += 1;
        self.cache.lock().unwrap().insert(key, e);
        Ok(e)
    }

    /// Minimization objective and constraint in scaled units.
    fn at(&self, s: [f64; 2]) -> Result<(f64, f64)> {
        let e = self.raw(self.to_design(s))?;
        Ok((-e.f / self.f_scale, e.g.unwrap_or(0.0) / self.g_scale))
    }

    /// Gradients of the scaled objective and constraint in `s`.
    fn grads(&self, s: [f64; 2], h: f64) -> Result<(Vector2<f64>, Vector2<f64>)> {
        let d = self.to_design(s);
        let probes: Vec<[f64; 2]> = (0..2)
            .flat_map(|i| {
                let (p, m) = stencil(d, h, &self.bounds, i);
                [p, m]
            })
            .collect();
        let vals = probes
            .par_iter()
            .map(|&p| self.raw(p))
            .collect::<Result<Vec<_>>>()?;
        let mut gf = Vector2::zeros();
        let mut gg = Vector2::zeros();
        for i in 0..2 {
            let span = probes[2 * i][i] - probes[2 * i + 1][i];
            let (p, m) = (vals[2 * i], vals[2 * i + 1]);
            gf[i] = -(p.f - m.f) / span / self.f_scale * self.width(i);
            gg[i] = (p.g.unwrap_or(0.0) - m.g.unwrap_or(0.0)) / span / self.g_scale * self.width(i);
        }
        Ok((gf, gg))
    }
}

fn box_constraints(s: [f64; 2]) -> Vec<(Vector2<f64>, f64)> {
    vec![
        (Vector2::new(1.0, 0.0), -s[0]),
        (Vector2::new(-1.0, 0.0), s[0] - 1.0),
        (Vector2::new(0.0, 1.0), -s[1]),
        (Vector2::new(0.0, -1.0), s[1] - 1.0),
    ]
}

/// Largest value of `g + ∇gᵀp` over the box.
fn best_linearized(s: [f64; 2], g: f64, grad: &Vector2<f64>) -> f64 {
    g + (0..2)
        .map(|i| {
            if grad[i] > 0.0 {
                grad[i] * (1.0 - s[i])
            } else {
                -grad[i] * s[i]
            }
        })
        .sum::<f64>()
}

fn projected_residual(s: [f64; 2], grad: &Vector2<f64>) -> f64 {
    (0..2)
        .map(|i| {
            let gi = grad[i];
            if (s[i] <= 1e-9 && gi > 0.0) || (s[i] >= 1.0 - 1e-9 && gi < 0.0) {
                0.0
            } else {
                gi.abs()
            }
        })
        .fold(0.0, f64::max)
}

struct Iterate {
    s: [f64; 2],
    phi: f64,
    g: f64,
    gf: Vector2<f64>,
    gg: Vector2<f64>,
}

fn bfgs_update(h: &mut Matrix2<f64>, step: &Vector2<f64>, y: &Vector2<f64>) {
    let hs = *h * step;
    let shs = step.dot(&hs);
    if shs <= 1e-16 {
        return;
    }
    let sy = step.dot(y);
    // Powell damping keeps H positive definite
    let theta = if sy >= 0.2 * shs {
        1.0
    } else {
        0.8 * shs / (shs - sy)
    };
    let r = theta * y + (1.0 - theta) * hs;
    let sr = step.dot(&r);
    if sr <= 1e-16 {
        return;
    }
    *h = *h - hs * hs.transpose() / shs + r * r.transpose() / sr;
    *h = (*h + h.transpose()) * 0.5;
}

/// SQP for maximizing `f` subject to `g ≥ 0` (when the problem has a
/// constraint) and the design box.
pub fn solve<F>(problem: &OptProblem, eval: &F) -> Result<OptResult>
where
    F: Fn(Design) -> Result<Evaluation> + Sync,
{
    problem.validate()?;
    let set = problem.settings;
    let constrained = problem.kind == ProblemKind::Vmdc;
    let d0 = problem.d0.to_array();
    let base = eval(problem.d0).map_err(|e| wrap(d0, e))?;
    let f_scale = if base.f.abs() > 0.0 {
        base.f.abs()
    } else {
        1.0
    };
    let g_scale = match problem.baseline_projection {
        Some(b) if b > 0.0 => b,
        _ => 1.0,
    };
    let sc = Scaled {
        eval,
        bounds: problem.bounds,
        f_scale,
        g_scale,
        cache: Mutex::new(HashMap::new()),
        count: Mutex::new(0),
    };
    let s0: [f64; 2] = std::array::from_fn(|i| {
        let (lo, hi) = problem.bounds[i];
        (d0[i] - lo) / (hi - lo)
    });
    let h_s = set.fd_step;

    let point = |s: [f64; 2]| -> Result<Iterate> {
        let (phi, g) = sc.at(s)?;
        let (gf, gg) = sc.grads(s, h_s)?;
        Ok(Iterate { s, phi, g, gf, gg })
    };
    let record = |it: &Iterate, merit: f64| {
        let d = sc.to_design(it.s);
        IterationRecord {
            d,
            f: -it.phi * f_scale,
            g: constrained.then_some(it.g * g_scale),
            merit,
        }
    };

    let mut it = point(s0)?;
    let mut history = vec![record(&it, it.phi)];
    let status;
    let mut iterations = 0;

    // Restoration: climb the constraint until it is satisfied.
    if constrained && it.g < 0.0 {
        let mut hess = Matrix2::identity() * (it.gg.norm() / 0.2).max(1e-8);
        let mut restored = false;
        for _ in 0..set.max_iter {
            iterations += 1;
            let Some((p, _)) = solve_qp(&hess, &(-it.gg), &box_constraints(it.s)) else {
                break;
            };
            if p.amax() < 1e-12 {
                break;
            }
            let mut alpha = 1.0;
            let mut next = None;
            for _ in 0..=set.max_backtracks {
                let s = [it.s[0] + alpha * p[0], it.s[1] + alpha * p[1]];
                if let Ok((_, g)) = sc.at(s) {
                    if -g <= -it.g - 1e-4 * alpha * it.gg.dot(&p) {
                        next = Some(point(s)?);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some(n) = next else { break };
            bfgs_update(&mut hess, &(alpha * p), &(-(n.gg - it.gg)));
            it = n;
            history.push(record(&it, it.phi + (-it.g).max(0.0)));
            if it.g >= 0.0 {
                restored = true;
                break;
            }
        }
        if !restored {
            log::warn!(
                "restoration phase ended infeasible, g = {:e}",
                it.g * g_scale
            );
            return Ok(finish(
                problem,
                &sc,
                &it,
                &history,
                iterations,
                Status::Infeasible,
                0.0,
            ));
        }
    }

    let mut hess = Matrix2::identity() * (it.gf.norm() / 0.2).max(1e-8);
    let mut mu = 0.0f64;
    let mut lambda = 0.0;
    let merit = |phi: f64, g: f64, mu: f64| phi + mu * (-g).max(0.0);
    let mut main_iters = 0;
    loop {
        if main_iters == set.max_iter {
            status = Status::MaxIter;
            break;
        }
        main_iters += 1;
        iterations += 1;
        let mut cons = box_constraints(it.s);
        if constrained {
            let target = best_linearized(it.s, it.g, &it.gg).min(0.0);
            cons.push((it.gg, target - it.g));
        }
        let Some((p, lams)) = solve_qp(&hess, &it.gf, &cons) else {
            status = Status::LineSearchFailure;
            break;
        };
        if constrained {
            lambda = lams[4];
            mu = mu.max(1.5 * lambda + 1e-3);
        }
        let step_m: f64 = (0..2)
            .map(|i| (p[i] * sc.width(i)).abs())
            .fold(0.0, f64::max);
        if step_m < set.step_tol {
            status = Status::Converged;
            break;
        }
        let m0 = merit(it.phi, it.g, mu);
        let slope = it.gf.dot(&p) - mu * (-it.g).max(0.0);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=set.max_backtracks {
            let s = [
                (it.s[0] + alpha * p[0]).clamp(0.0, 1.0),
                (it.s[1] + alpha * p[1]).clamp(0.0, 1.0),
            ];
            match sc.at(s) {
                Ok((phi, g)) if merit(phi, g, mu) <= m0 + 1e-4 * alpha * slope.min(0.0) => {
                    accepted = Some(s);
                    break;
                }
                Ok(_) => {}
                Err(e) => log::debug!("trial design rejected: {e}"),
            }
            alpha *= 0.5;
        }
        let Some(s_new) = accepted else {
            status = Status::LineSearchFailure;
            break;
        };
        let next = point(s_new)?;
        let step = Vector2::new(next.s[0] - it.s[0], next.s[1] - it.s[1]);
        let y = (next.gf - lambda * next.gg) - (it.gf - lambda * it.gg);
        bfgs_update(&mut hess, &step, &y);
        let df = (next.phi - it.phi).abs() / it.phi.abs().max(1e-12);
        let moved: f64 = (0..2)
            .map(|i| (step[i] * sc.width(i)).abs())
            .fold(0.0, f64::max);
        it = next;
        history.push(record(&it, merit(it.phi, it.g, mu)));
        if moved < set.step_tol || df < set.f_tol {
            status = Status::Converged;
            break;
        }
    }

    // KKT multiplier at the final point from the local subproblem.
    if constrained {
        let mut cons = box_constraints(it.s);
        cons.push((it.gg, -it.g));
        if let Some((_, lams)) = solve_qp(&hess, &it.gf, &cons) {
            lambda = lams[4];
        }
        if it.g.abs() > 1e-6 {
            lambda = 0.0;
        }
    }
    Ok(finish(
        problem, &sc, &it, &history, iterations, status, lambda,
    ))
}

fn finish<F>(
    problem: &OptProblem,
    sc: &Scaled<'_, F>,
    it: &Iterate,
    history: &[IterationRecord],
    iterations: usize,
    status: Status,
    lambda: f64,
) -> OptResult
where
    F: Fn(Design) -> Result<Evaluation> + Sync,
{
    let lagrangian = it.gf - lambda * it.gg;
    OptResult {
        problem: *problem,
        d_star: sc.to_design(it.s),
        objective_history: history.iter().map(|r| r.f).collect(),
        constraint_values: history.iter().filter_map(|r| r.g).collect(),
        kkt_residual: projected_residual(it.s, &lagrangian),
        iterations,
        evaluations: *sc.count.lock().unwrap(),
        status,
        per_iteration: history.to_vec(),
    }
}

/// Everything needed to turn a design into a linear model and reach metrics.
#[derive(Debug, Clone, Copy)]
pub struct DesignContext<'a> {
    pub table: &'a AeroTable,
    pub params: AircraftParams,
    pub airspeed: f64,
    pub gamma: f64,
    pub reach: ReachConfig,
}

impl<'a> DesignContext<'a> {
    pub fn new(table: &'a AeroTable, reach: ReachConfig) -> Self {
        Self {
            table,
            params: table.params,
            airspeed: 200.0,
            gamma: 0.0,
            reach,
        }
    }

    pub fn model(&self, d: &Design) -> Result<(LtiSystem, InputBox)> {
        let t = trim(d, self.table, &self.params, self.airspeed, self.gamma)?;
        linearize(d, self.table, &self.params, &t)
    }

    /// Fills in the baseline projection for direction-aware problems.
    pub fn prepare(&self, problem: &mut OptProblem) -> Result<()> {
        problem.reach_config = self.reach;
        if let Some(v) = problem.v {
            problem.baseline_projection = Some(objective_dm(&problem.d0, &v, self)?);
        }
        Ok(())
    }

    /// Objective and constraint values for `problem` at `d`.
    pub fn evaluate(&self, problem: &OptProblem, d: Design) -> Result<Evaluation> {
        let (sys, bx) = self.model(&d)?;
        match problem.kind {
            ProblemKind::Vm => Ok(Evaluation {
                f: volume_metric(&sys, &bx, &self.reach)?,
                g: None,
            }),
            ProblemKind::Dm => Ok(Evaluation {
                f: projection_metric(&sys, &bx, &self.reach, &problem.v.expect("validated"))?,
                g: None,
            }),
            ProblemKind::Vmdc => {
                let v = problem.v.expect("validated");
                let baseline = problem
                    .baseline_projection
                    .ok_or_else(|| Error::invalid("vmdc needs a baseline projection"))?;
                let proj = projection_metric(&sys, &bx, &self.reach, &v)?;
                Ok(Evaluation {
                    f: volume_metric(&sys, &bx, &self.reach)?,
                    g: Some(proj - (1.0 + problem.kappa.expect("validated")) * baseline),
                })
            }
        }
    }
}

/// Hull volume of the sampled reachable set.
pub fn volume_metric(sys: &LtiSystem, bx: &InputBox, cfg: &ReachConfig) -> Result<f64> {
    let set = sample_reach_set(sys, bx, cfg.directions, &cfg.grid()?, cfg.seed)?;
    Ok(set.volume().volume)
}

pub fn projection_metric(
    sys: &LtiSystem,
    bx: &InputBox,
    cfg: &ReachConfig,
    v: &[f64; 4],
) -> Result<f64> {
    ReachKernel::new(sys, &cfg.grid()?)?.support_length(bx, &DVector::from_row_slice(v))
}

pub fn objective_vm(d: &Design, ctx: &DesignContext) -> Result<f64> {
    let (sys, bx) = ctx.model(d)?;
    volume_metric(&sys, &bx, &ctx.reach)
}

pub fn objective_dm(d: &Design, v: &[f64; 4], ctx: &DesignContext) -> Result<f64> {
    let (sys, bx) = ctx.model(d)?;
    projection_metric(&sys, &bx, &ctx.reach, v)
}

/// `objective_dm(d) - (1 + κ)·baseline`; feasible when nonnegative.
pub fn constraint_vmdc(
    d: &Design,
    v: &[f64; 4],
    kappa: f64,
    baseline: f64,
    ctx: &DesignContext,
) -> Result<f64> {
    Ok(objective_dm(d, v, ctx)? - (1.0 + kappa) * baseline)
}

/// Prepares and solves one design problem on the surrogate.
pub fn optimize_design(problem: &OptProblem, ctx: &DesignContext) -> Result<OptResult> {
    let mut problem = *problem;
    ctx.prepare(&mut problem)?;
    let prob = problem;
    solve(&prob, &|d| ctx.evaluate(&prob, d))
}
