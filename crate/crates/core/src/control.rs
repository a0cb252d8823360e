//! LQ tracking, LQR/LQI gains, saturated closed-loop simulation, and L2
//! performance metrics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::aero::AeroQuery;
use crate::aero::{AeroTable, AircraftParams};
use crate::error::{Error, Result};
use crate::flight::{
    self, linearize, nonlinear_rhs_with, physical_input_box, Design, TableLookup, TrimPoint,
};
use crate::lti::{LtiSystem, TimeGrid, Trajectory, LONGITUDINAL_STATES};
use crate::reach::InputBox;

const BLOWUP_NORM: f64 = 1e12;

/// Quadratic weights `xᵀQx + uᵀRu`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax())
}

impl WeightSpec {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if q.iter().chain(r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        if !is_symmetric(&q) || !is_symmetric(&r) {
            return Err(Error::invalid(
                "weight matrices must be square and symmetric",
            ));
        }
        if q.symmetric_eigenvalues().min() < -1e-12 {
            return Err(Error::invalid("Q must be nonnegative definite"));
        }
        if r.symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::invalid("R must be positive definite"));
        }
        Ok(Self { q, r })
    }

    pub fn diagonal(q: &[f64], r: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal(&DVector::from_row_slice(q)),
            DMatrix::from_diagonal(&DVector::from_row_slice(r)),
        )
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Named weight sets for the velocity/pitch tracking and the two-phase
    /// nonlinear maneuver.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-lq-velocity" => Self::diagonal(&[1000.0, 0.0, 0.0, 0.0], &[1000.0, 1000.0]),
            "paper-lq-pitch" => Self::diagonal(&[0.0, 0.0, 0.0, 1000.0], &[100.0, 100.0]),
            "paper-lqi-velocity" => Self::diagonal(&[1.0; 5], &[0.1, 0.1]),
            "paper-lqi-pitch" => Self::diagonal(&[0.0, 1.0, 0.0, 1.0, 100.0], &[0.1, 10.0]),
            "paper-nonlinear" => Self::diagonal(&[1.0, 100.0, 1.0, 100.0, 100.0], &[0.1, 1000.0]),
            other => Err(Error::invalid(format!("unknown weight preset {other:?}"))),
        }
    }

    pub const PRESETS: [&'static str; 5] = [
        "paper-lq-velocity",
        "paper-lq-pitch",
        "paper-lqi-velocity",
        "paper-lqi-pitch",
        "paper-nonlinear",
    ];

    fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        if self.q.nrows() != n || self.r.nrows() != m {
            return Err(Error::invalid(format!(
                "weights are {}x{} / {}x{}, system needs {n}x{n} / {m}x{m}",
                self.q.nrows(),
                self.q.ncols(),
                self.r.nrows(),
                self.r.ncols()
            )));
        }
        Ok(())
    }
}

/// Trapezoidal `(∫ Σᵢ σᵢ(t)² dt)^{1/2}` on a uniform grid.
pub fn l2_norm(signal: &[DVector<f64>], dt: f64) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::invalid("empty signal"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt must be positive"));
    }
    let sq: Vec<f64> = signal.iter().map(|s| s.norm_squared()).collect();
    if sq.len() == 1 {
        return Ok(0.0);
    }
    let inner: f64 = sq[1..sq.len() - 1].iter().sum();
    let integral = dt * (0.5 * (sq[0] + sq[sq.len() - 1]) + inner);
    Ok(integral.max(0.0).sqrt())
}

fn care_residual(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    a.transpose() * p + p * a - p * s * p + q
}

fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `AᵀX + XA = -C` through the Kronecker form.
fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let big = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_column_slice((-c).as_slice());
    let x = big.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    Some((&x + x.transpose()) * 0.5)
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = h.nrows();
    let mut z = h.clone();
    for _ in 0..100 {
        let inv = z.clone().try_inverse()?;
        let det = z.determinant().abs();
        let c = if det > 0.0 && det.is_finite() {
            det.powf(1.0 / n as f64)
        } else {
            1.0
        };
        let next = (&z / c + &inv * c) * 0.5;
        let delta = (&next - &z).norm();
        z = next;
        if !z.iter().all(|v| v.is_finite()) {
            return None;
        }
        if delta <= 1e-13 * z.norm() {
            return Some(z);
        }
    }
    Some(z)
}

/// Stabilizing solution of `AᵀP + PA - PBR⁻¹BᵀP + Q = 0`.
///
/// The stable invariant subspace of the Hamiltonian comes from its matrix
/// sign function; Newton-Kleinman steps then polish the result.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square()
        || b.nrows() != n
        || q.shape() != (n, n)
        || r.shape() != (b.ncols(), b.ncols())
    {
        return Err(Error::invalid("inconsistent CARE dimensions"));
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Riccati("R is singular".into()))?;
    let s = b * &r_inv * b.transpose();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let w = matrix_sign(&h).ok_or_else(|| {
        Error::Riccati("Hamiltonian has eigenvalues on the imaginary axis".into())
    })?;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n))
        .copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&(-w.view((n, 0), (n, n))));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Riccati(format!("invariant subspace solve failed: {e}")))?;
    let mut p = (&p + p.transpose()) * 0.5;

    let tol = |p: &DMatrix<f64>| 1e-8 * (1.0 + p.norm());
    for _ in 0..30 {
        let res = care_residual(a, &s, q, &p).norm();
        if res < 1e-3 * tol(&p) {
            break;
        }
        let k = &r_inv * b.transpose() * &p;
        let ac = a - b * &k;
        if max_real_eigenvalue(&ac) >= 0.0 {
            break;
        }
        let c = q + k.transpose() * r * &k;
        match solve_lyapunov(&ac, &c) {
            Some(next) if care_residual(a, &s, q, &next).norm() < res => p = next,
            _ => break,
        }
    }

    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::Riccati("non-finite solution".into()));
    }
    let res = care_residual(a, &s, q, &p).norm();
    if res >= tol(&p) {
        return Err(Error::Riccati(format!("residual {res:e} too large")));
    }
    let closed = a - &s * &p;
    let lead = max_real_eigenvalue(&closed);
    if lead >= 0.0 {
        return Err(Error::Riccati(format!(
            "closed loop not Hurwitz (max real part {lead:e}); pair not stabilizable"
        )));
    }
    Ok(p)
}

/// State feedback gain `K = R⁻¹BᵀP` for `u = -Kx`.
pub fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &WeightSpec) -> Result<DMatrix<f64>> {
    w.check_dims(a.nrows(), b.ncols())?;
    let p = solve_care(a, b, &w.q, &w.r)?;
    let r_inv =
        w.r.clone()
            .try_inverse()
            .expect("R checked positive definite");
    Ok(r_inv * b.transpose() * p)
}

/// `Â = [[A, 0], [C, 0]]`, `B̂ = [[B], [0]]`.
pub fn augment_integrator(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c_row: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if c_row.len() != n || b.nrows() != n {
        return Err(Error::invalid("output row must match the state dimension"));
    }
    let mut ah = DMatrix::zeros(n + 1, n + 1);
    ah.view_mut((0, 0), (n, n)).copy_from(a);
    for j in 0..n {
        ah[(n, j)] = c_row[j];
    }
    let mut bh = DMatrix::zeros(n + 1, b.ncols());
    bh.view_mut((0, 0), (n, b.ncols())).copy_from(b);
    Ok((ah, bh))
}

/// Riccati and adjoint solutions of the finite-horizon tracking problem on
/// the half-step grid `t_0, t_0 + dt/2, ..., T`.
#[derive(Debug, Clone)]
pub struct LqSchedule {
    pub grid: TimeGrid,
    pub p: Vec<DMatrix<f64>>,
    pub b: Vec<DVector<f64>>,
    feedback: DMatrix<f64>,
}

impl LqSchedule {
    /// `u = -R⁻¹Bᵀ(P x - b)` at half-step index `j`.
    pub fn control(&self, j: usize, x: &DVector<f64>) -> DVector<f64> {
        -(&self.feedback * (&self.p[j] * x - &self.b[j]))
    }

    pub fn gain(&self, j: usize) -> DMatrix<f64> {
        &self.feedback * &self.p[j]
    }
}

/// Backward RK4 of `-Ṗ = AᵀP + PA - PSP + Q`, `-ḃ = (A - SP)ᵀb + Q x_ref`
/// with `P(T) = 0`, `b(T) = 0`. `x_ref` holds one state per grid time.
pub fn solve_lq_tracking(
    sys: &LtiSystem,
    weights: &WeightSpec,
    x_ref: &[DVector<f64>],
    grid: &TimeGrid,
) -> Result<LqSchedule> {
    grid.validate()?;
    let n = sys.n_states();
    weights.check_dims(n, sys.n_inputs())?;
    if x_ref.len() != grid.n_steps + 1 || x_ref.iter().any(|x| x.len() != n) {
        return Err(Error::invalid(
            "reference must hold one state per grid time",
        ));
    }
    let a = sys.a();
    let r_inv = weights
        .r
        .clone()
        .try_inverse()
        .expect("R checked positive definite");
    let feedback = &r_inv * sys.b().transpose();
    let s = sys.b() * &feedback;
    let q = &weights.q;
    let half = grid.n_steps * 2;
    let reference = |j: usize| -> DVector<f64> {
        if j % 2 == 0 {
            x_ref[j / 2].clone()
        } else {
            (&x_ref[j / 2] + &x_ref[j / 2 + 1]) * 0.5
        }
    };
    let dp = |p: &DMatrix<f64>| a.transpose() * p + p * a - p * &s * p + q;
    let db = |p: &DMatrix<f64>, b: &DVector<f64>, xr: &DVector<f64>| {
        (a - &s * p).transpose() * b + q * xr
    };

    let h = grid.dt() / 4.0;
    let mut ps = vec![DMatrix::zeros(n, n); half + 1];
    let mut bs = vec![DVector::zeros(n); half + 1];
    // each RK4 step spans one half-step; the midpoint reference is the average
    for j in (0..half).rev() {
        let (p, b) = (&ps[j + 1], &bs[j + 1]);
        let (r1, r3) = (reference(j + 1), reference(j));
        let r2 = (&r1 + &r3) * 0.5;
        let step = 2.0 * h;
        let k1p = dp(p);
        let k1b = db(p, b, &r1);
        let p2 = p + &k1p * (step / 2.0);
        let b2 = b + &k1b * (step / 2.0);
        let k2p = dp(&p2);
        let k2b = db(&p2, &b2, &r2);
        let p3 = p + &k2p * (step / 2.0);
        let b3 = b + &k2b * (step / 2.0);
        let k3p = dp(&p3);
        let k3b = db(&p3, &b3, &r2);
        let p4 = p + &k3p * step;
        let b4 = b + &k3b * step;
        let k4p = dp(&p4);
        let k4b = db(&p4, &b4, &r3);
        let pn = p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (step / 6.0);
        let bn = b + (k1b + k2b * 2.0 + k3b * 2.0 + k4b) * (step / 6.0);
        let norm = pn.norm();
        if !(norm <= BLOWUP_NORM) || !bn.iter().all(|v| v.is_finite()) {
            return Err(Error::HorizonTooLong { norm });
        }
        ps[j] = (&pn + pn.transpose()) * 0.5;
        bs[j] = bn;
    }
    Ok(LqSchedule {
        grid: *grid,
        p: ps,
        b: bs,
        feedback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Velocity,
    Pitch,
}

impl Channel {
    pub fn state_index(self) -> usize {
        match self {
            Channel::Velocity => 0,
            Channel::Pitch => 3,
        }
    }

    pub fn output_row(self) -> DVector<f64> {
        let mut c = DVector::zeros(4);
        c[self.state_index()] = 1.0;
        c
    }
}

/// Constant reference on one channel, as a perturbation from trim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub channel: Channel,
    pub value: f64,
}

impl std::str::FromStr for Reference {
    type Err = Error;

    /// `velocity=4` or `pitch=0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, value) = s
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("reference {s:?} is not channel=value")))?;
        let channel = match name.trim() {
            "velocity" => Channel::Velocity,
            "pitch" => Channel::Pitch,
            other => {
                return Err(Error::invalid(format!(
                    "unknown reference channel {other:?}"
                )))
            }
        };
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad reference value in {s:?}")))?;
        if !value.is_finite() {
            return Err(Error::invalid("reference value must be finite"));
        }
        Ok(Self { channel, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    LqFinite,
    Lqi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingTask {
    pub mode: TrackingMode,
    pub reference: Reference,
    pub duration: f64,
    pub n_steps: usize,
}

impl TrackingTask {
    pub fn new(mode: TrackingMode, reference: Reference) -> Self {
        Self {
            mode,
            reference,
            duration: 30.0,
            n_steps: 3000,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::horizon(self.duration, self.n_steps)
    }
}

/// Percent reductions against a baseline; positive means lower than baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub tracking_error_pct: Option<f64>,
    pub control_cost_pct: Option<f64>,
    pub state_error_pct: Vec<Option<f64>>,
}

pub fn percent_improvement(baseline: f64, value: f64) -> Option<f64> {
    if baseline == 0.0 {
        (value == 0.0).then_some(0.0)
    } else {
        Some((baseline - value) / baseline * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub tracking_error_l2: f64,
    pub control_cost_l2: f64,
    pub state_labels: Vec<String>,
    pub state_error_l2: Vec<f64>,
    pub saturation_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement: Option<Improvement>,
}

impl PerformanceReport {
    pub fn with_baseline(mut self, baseline: &PerformanceReport) -> Result<Self> {
        if baseline.state_error_l2.len() != self.state_error_l2.len() {
            return Err(Error::invalid(
                "baseline report has a different state layout",
            ));
        }
        self.improvement = Some(Improvement {
            tracking_error_pct: percent_improvement(
                baseline.tracking_error_l2,
                self.tracking_error_l2,
            ),
            control_cost_pct: percent_improvement(baseline.control_cost_l2, self.control_cost_l2),
            state_error_pct: baseline
                .state_error_l2
                .iter()
                .zip(&self.state_error_l2)
                .map(|(b, v)| percent_improvement(*b, *v))
                .collect(),
        });
        Ok(self)
    }
}

fn rk4_step<F>(x: &DVector<f64>, dt: f64, mut f: F) -> Result<DVector<f64>>
where
    F: FnMut(usize, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(0, x)?;
    let k2 = f(1, &(x + &k1 * (dt / 2.0)))?;
    let k3 = f(1, &(x + &k2 * (dt / 2.0)))?;
    let k4 = f(2, &(x + &k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

fn saturation_fraction(inputs: &[DVector<f64>], bounds: &InputBox) -> f64 {
    if inputs.is_empty() {
        return 0.0;
    }
    inputs.iter().filter(|u| bounds.on_boundary(u)).count() as f64 / inputs.len() as f64
}

fn per_state_l2(deviation: &[DVector<f64>], dt: f64) -> Result<Vec<f64>> {
    (0..deviation[0].len())
        .map(|i| {
            let s: Vec<DVector<f64>> = deviation
                .iter()
                .map(|d| DVector::from_element(1, d[i]))
                .collect();
            l2_norm(&s, dt)
        })
        .collect()
}

/// Closed-loop simulation of the linear model from `x = 0`, with the control
/// clipped to `bounds` at every RK4 stage.
pub fn simulate_linear_tracking(
    sys: &LtiSystem,
    bounds: &InputBox,
    task: &TrackingTask,
    weights: &WeightSpec,
) -> Result<(Trajectory, PerformanceReport)> {
    let grid = task.grid()?;
    let n = sys.n_states();
    if n != 4 || bounds.len() != sys.n_inputs() {
        return Err(Error::invalid(
            "tracking needs the 4-state longitudinal model",
        ));
    }
    let dt = grid.dt();
    let channel = task.reference.channel;
    let r = task.reference.value;
    let c_row = channel.output_row();
    let x_ref = &c_row * r;

    let mut states = vec![DVector::zeros(n)];
    let mut inputs = Vec::with_capacity(grid.n_steps);
    match task.mode {
        TrackingMode::LqFinite => {
            let refs = vec![x_ref.clone(); grid.n_steps + 1];
            let sched = solve_lq_tracking(sys, weights, &refs, &grid)?;
            let mut x = DVector::zeros(n);
            for k in 0..grid.n_steps {
                inputs.push(bounds.clip(&sched.control(2 * k, &x)));
                x = rk4_step(&x, dt, |stage, xs| {
                    let u = bounds.clip(&sched.control(2 * k + stage, xs));
                    Ok(sys.derivative(xs, &u))
                })?;
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(Error::Diverged {
                        time: grid.time(k + 1),
                    });
                }
                states.push(x.clone());
            }
        }
        TrackingMode::Lqi => {
            let (ah, bh) = augment_integrator(sys.a(), sys.b(), &c_row)?;
            let k_gain = lqr_gain(&ah, &bh, weights)?;
            let mut xh = DVector::zeros(n + 1);
            let law = |xh: &DVector<f64>| bounds.clip(&-(&k_gain * xh));
            for k in 0..grid.n_steps {
                inputs.push(law(&xh));
                xh = rk4_step(&xh, dt, |_, xs| {
                    let u = law(xs);
                    let mut d = &ah * xs + &bh * u;
                    d[n] -= r;
                    Ok(d)
                })?;
                if !xh.iter().all(|v| v.is_finite()) {
                    return Err(Error::Diverged {
                        time: grid.time(k + 1),
                    });
                }
                states.push(xh.rows(0, n).into_owned());
            }
        }
    }

    let deviation: Vec<DVector<f64>> = states.iter().map(|x| x - &x_ref).collect();
    let tracked: Vec<DVector<f64>> = deviation
        .iter()
        .map(|d| DVector::from_element(1, d[channel.state_index()]))
        .collect();
    let report = PerformanceReport {
        tracking_error_l2: l2_norm(&tracked, dt)?,
        control_cost_l2: l2_norm(&inputs, dt)?,
        state_labels: LONGITUDINAL_STATES.iter().map(|s| s.to_string()).collect(),
        state_error_l2: per_state_l2(&deviation, dt)?,
        saturation_fraction: saturation_fraction(&inputs, bounds),
        improvement: None,
    };
    Ok((
        Trajectory {
            times: grid.times(),
            states,
            inputs,
        },
        report,
    ))
}

/// One segment of the nonlinear maneuver: hold trim at `airspeed` and
/// flight-path angle `gamma` for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub airspeed: f64,
    pub gamma: f64,
    pub duration: f64,
}

/// Climb at 10° and 190 m/s for 20 s, then level at 210 m/s for 20 s.
pub fn default_maneuver() -> Vec<Phase> {
    vec![
        Phase {
            airspeed: 190.0,
            gamma: 10f64.to_radians(),
            duration: 20.0,
        },
        Phase {
            airspeed: 210.0,
            gamma: 0.0,
            duration: 20.0,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearRun {
    pub trims: Vec<TrimPoint>,
    /// Grid index at which each phase starts.
    pub phase_start: Vec<usize>,
    pub initial_trim: TrimPoint,
    /// Fraction of recorded samples whose flight state or elevator lay
    /// outside the aerodynamic table, where loads were extrapolated.
    pub table_excursion_fraction: f64,
}

impl NonlinearRun {
    pub fn phase_at(&self, k: usize) -> usize {
        self.phase_start.iter().rposition(|&s| s <= k).unwrap_or(0)
    }
}

/// Two-controller LQI maneuver on the nonlinear model.
///
/// Each phase is trimmed and linearized on its own, and an LQI gain with an
/// integrator on pitch-angle deviation is computed from the augmented model.
/// The integrator restarts at zero when the controller switches. The
/// applied input `u_trim + Δu` is clipped to the physical ranges at every
/// RK4 stage. Unless `initial_state` is given, the run starts from level
/// trim at the first phase's airspeed.
///
/// Deviations in the report are measured from the active phase's trim
/// state, and the control cost is taken over `Δu` as applied.
pub fn simulate_nonlinear_tracking(
    design: &Design,
    table: &AeroTable,
    params: &AircraftParams,
    phases: &[Phase],
    weights: &WeightSpec,
    dt: f64,
    initial_state: Option<&DVector<f64>>,
) -> Result<(Trajectory, PerformanceReport, NonlinearRun)> {
    if phases.is_empty() {
        return Err(Error::invalid("maneuver needs at least one phase"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt must be positive"));
    }
    weights.check_dims(5, 2)?;
    let physical = physical_input_box();
    let theta_row = Channel::Pitch.output_row();

    let mut trims = Vec::new();
    let mut gains = Vec::new();
    let mut phase_start = Vec::new();
    let mut total = 0usize;
    for ph in phases {
        let t = flight::trim(design, table, params, ph.airspeed, ph.gamma)?;
        let (sys, _) = linearize(design, table, params, &t)?;
        let (ah, bh) = augment_integrator(sys.a(), sys.b(), &theta_row)?;
        gains.push(lqr_gain(&ah, &bh, weights)?);
        trims.push(t);
        let steps = (ph.duration / dt).round() as usize;
        if steps == 0 || ((steps as f64) * dt - ph.duration).abs() > 1e-9 * ph.duration.max(1.0) {
            return Err(Error::invalid(format!(
                "phase duration {} is not a whole number of steps of {dt}",
                ph.duration
            )));
        }
        phase_start.push(total);
        total += steps;
    }
    let initial_trim = flight::trim(design, table, params, phases[0].airspeed, 0.0)?;
    let x0 = match initial_state {
        Some(x) if x.len() == 4 => x.clone(),
        Some(_) => return Err(Error::invalid("initial state must be a 4-vector")),
        None => initial_trim.state(),
    };
    let grid = TimeGrid::new(0.0, total as f64 * dt, total)?;

    let mut x = x0;
    let mut z = 0.0;
    let mut states = vec![x.clone()];
    let mut inputs = Vec::with_capacity(total);
    let mut deviation = Vec::with_capacity(total + 1);
    let mut delta_u = Vec::with_capacity(total);
    let mut excursions = 0usize;
    for k in 0..total {
        let p = phase_start.iter().rposition(|&s| s <= k).unwrap_or(0);
        if phase_start[p] == k {
            z = 0.0;
        }
        let (tr, gain) = (&trims[p], &gains[p]);
        let (xt, ut) = (tr.state(), tr.inputs());
        let law = |xs: &DVector<f64>, zs: f64| {
            let mut aug = DVector::zeros(5);
            aug.rows_mut(0, 4).copy_from(&(xs - &xt));
            aug[4] = zs;
            physical.clip(&(&ut - gain * aug))
        };
        deviation.push(&x - &xt);
        let u = law(&x, z);
        let query = AeroQuery {
            v: x[0],
            alpha: x[1],
            c: design.c,
            w: design.w,
            delta_e: u[1],
        };
        if !table.contains(&query) {
            excursions += 1;
        }
        delta_u.push(&u - &ut);
        inputs.push(u);

        let mut xz = DVector::zeros(5);
        xz.rows_mut(0, 4).copy_from(&x);
        xz[4] = z;
        let time = grid.time(k);
        let next = rk4_step(&xz, dt, |_, s| {
            let xs = s.rows(0, 4).into_owned();
            let u = law(&xs, s[4]);
            let f = nonlinear_rhs_with(&xs, &u, design, table, params, TableLookup::Extrapolate)
                .map_err(|e| match e {
                    Error::OutOfDomain { .. } | Error::InvalidArgument(_) => {
                        log::warn!("state left the physical envelope near t = {time}: {e}");
                        Error::Diverged { time }
                    }
                    other => other,
                })?;
            let mut d = DVector::zeros(5);
            d.rows_mut(0, 4).copy_from(&f);
            d[4] = xs[3] - xt[3];
            Ok(d)
        })?;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged {
                time: grid.time(k + 1),
            });
        }
        x = next.rows(0, 4).into_owned();
        z = next[4];
        states.push(x.clone());
    }
    let last = trims.len() - 1;
    deviation.push(&x - trims[last].state());

    let report = PerformanceReport {
        tracking_error_l2: l2_norm(&deviation, dt)?,
        control_cost_l2: l2_norm(&delta_u, dt)?,
        state_labels: LONGITUDINAL_STATES.iter().map(|s| s.to_string()).collect(),
        state_error_l2: per_state_l2(&deviation, dt)?,
        saturation_fraction: saturation_fraction(&inputs, &physical),
        improvement: None,
    };
    Ok((
        Trajectory {
            times: grid.times(),
            states,
            inputs,
        },
        report,
        NonlinearRun {
            trims,
            phase_start,
            initial_trim,
            table_excursion_fraction: excursions as f64 / total as f64,
        },
    ))
}

/// Trajectory as CSV with header `t,V,alpha,Q,theta,delta_th,delta_e` and
/// 12 significant digits. The final row repeats the last applied input.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let fmt = |v: f64| format!("{v:.11e}");
    let mut out = String::from("t,V,alpha,Q,theta,delta_th,delta_e\n");
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let u = traj
            .inputs
            .get(k)
            .or_else(|| traj.inputs.last())
            .cloned()
            .unwrap_or_else(|| DVector::zeros(2));
        let row: Vec<String> = std::iter::once(*t)
            .chain(x.iter().copied())
            .chain(u.iter().copied())
            .map(fmt)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
