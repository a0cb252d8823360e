//! Linear time-invariant systems `ẋ = A x + B u`.
//!
//! Trajectories are propagated with an exact zero-order-hold discretization,
//! which is exact for the piecewise-constant inputs used throughout the crate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LONGITUDINAL_STATES: [&str; 4] = ["V", "alpha", "Q", "theta"];
pub const LONGITUDINAL_INPUTS: [&str; 2] = ["delta_th", "delta_e"];

/// Continuous-time LTI system with labelled states and inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    state_labels: Vec<String>,
    input_labels: Vec<String>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::invalid(format!(
                "state matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::invalid(format!(
                "input matrix has {} rows, expected {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if a.nrows() == 0 || b.ncols() == 0 {
            return Err(Error::invalid(
                "system must have at least one state and one input",
            ));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("system matrices contain non-finite entries"));
        }
        let state_labels = (0..a.nrows()).map(|i| format!("x{i}")).collect();
        let input_labels = (0..b.ncols()).map(|i| format!("u{i}")).collect();
        Ok(Self {
            a,
            b,
            state_labels,
            input_labels,
        })
    }

    /// Four-state longitudinal model with the (V, α, Q, θ) / (δth, δe) labels.
    pub fn longitudinal(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.shape() != (4, 4) || b.shape() != (4, 2) {
            return Err(Error::invalid("longitudinal model must be 4x4 / 4x2"));
        }
        let mut sys = Self::new(a, b)?;
        sys.state_labels = LONGITUDINAL_STATES.iter().map(|s| s.to_string()).collect();
        sys.input_labels = LONGITUDINAL_INPUTS.iter().map(|s| s.to_string()).collect();
        Ok(sys)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
}

/// Uniform time grid `t0, t0 + dt, ..., t_final`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_final: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_final: f64, n_steps: usize) -> Result<Self> {
        let grid = Self {
            t0,
            t_final,
            n_steps,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid on `[0, horizon]`.
    pub fn horizon(horizon: f64, n_steps: usize) -> Result<Self> {
        Self::new(0.0, horizon, n_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t0.is_finite() || !self.t_final.is_finite() {
            return Err(Error::invalid("time grid bounds must be finite"));
        }
        if self.t_final <= self.t0 {
            return Err(Error::invalid(format!(
                "t_final ({}) must exceed t0 ({})",
                self.t_final, self.t0
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.t_final - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Midpoint of step `k`.
    pub fn midpoint(&self, k: usize) -> f64 {
        self.t0 + (k as f64 + 0.5) * self.dt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// One input per step, held constant over `[times[k], times[k+1])`.
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states
            .last()
            .expect("trajectory has at least one state")
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential `e^{m t}` by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::invalid("expm needs a square matrix"));
    }
    if !t.is_finite() || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("expm input must be finite"));
    }
    let n = m.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    if t == 0.0 {
        return Ok(ident);
    }
    let mut a = m * t;
    let norm = one_norm(&a);
    if norm == 0.0 {
        return Ok(ident);
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 0 {
        a /= 2f64.powi(squarings);
    }

    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::invalid("expm: singular Padé denominator"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Zero-order-hold discretization over one step of length `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub a_d: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
    pub dt: f64,
}

impl Discretized {
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a_d * x + &self.b_d * u
    }
}

/// Exact ZOH discretization via the exponential of `[[A, B], [0, 0]]·dt`.
pub fn discretize(sys: &LtiSystem, dt: f64) -> Result<Discretized> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!(
            "discretization step must be positive, got {dt}"
        )));
    }
    let n = sys.n_states();
    let m = sys.n_inputs();
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(sys.a());
    aug.view_mut((0, n), (n, m)).copy_from(sys.b());
    let e = expm(&aug, dt)?;
    Ok(Discretized {
        a_d: e.view((0, 0), (n, n)).into_owned(),
        b_d: e.view((0, n), (n, m)).into_owned(),
        dt,
    })
}

/// Propagates `x0` under piecewise-constant inputs on a uniform grid.
pub fn propagate_pwc(
    sys: &LtiSystem,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    grid: &TimeGrid,
) -> Result<Trajectory> {
    grid.validate()?;
    if inputs.len() != grid.n_steps {
        return Err(Error::invalid(format!(
            "got {} inputs for {} steps",
            inputs.len(),
            grid.n_steps
        )));
    }
    if x0.len() != sys.n_states() {
        return Err(Error::invalid("initial state has wrong dimension"));
    }
    if let Some(u) = inputs.iter().find(|u| u.len() != sys.n_inputs()) {
        return Err(Error::invalid(format!(
            "input of dimension {} for a system with {} inputs",
            u.len(),
            sys.n_inputs()
        )));
    }
    let disc = discretize(sys, grid.dt())?;
    let mut states = Vec::with_capacity(grid.n_steps + 1);
    states.push(x0.clone());
    for u in inputs {
        let next = disc.step(states.last().unwrap(), u);
        states.push(next);
    }
    Ok(Trajectory {
        times: grid.times(),
        states,
        inputs: inputs.to_vec(),
    })
}
