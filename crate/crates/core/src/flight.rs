//! Nonlinear longitudinal dynamics, trim, and linearization.
//!
//! State `x = (V, α, Q, θ)`, inputs `u = (δth, δe)`:
//!
//! ```text
//! V̇ = F cos α / m - D / m - g sin(θ - α)
//! α̇ = -F sin α / (m V) - L / (m V) + g cos(θ - α) / V + Q
//! Q̇ = (M + F·arm) / J_y
//! θ̇ = Q
//! ```
//!
//! with thrust `F = δth · F_max` and `(L, D, M)` interpolated from an
//! [`AeroTable`]. Forces are in the wind frame with `X = -D`, `Z = -L`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::aero::{stability_derivatives, AeroQuery, AeroTable, AircraftParams, DerivativeSteps};
use crate::error::{Error, Result};
use crate::lti::LtiSystem;
use crate::reach::InputBox;

/// Elevator deflection limit [rad].
pub const ELEVATOR_LIMIT: f64 = 0.523;
/// Throttle range.
pub const THROTTLE_RANGE: (f64, f64) = (0.0, 1.0);
/// Pitch-attitude clip used by the trim iteration [rad].
pub const PITCH_LIMIT: f64 = std::f64::consts::FRAC_PI_2;
/// Design box for center half-span `c` and wing half-span `w` [m].
pub const DESIGN_BOUNDS: [(f64, f64); 2] = [(3.0, 7.0), (10.0, 20.0)];

pub const TRIM_TOLERANCE: f64 = 1e-8;
pub const TRIM_MAX_ITER: usize = 50;

/// Planform design: center half-span `c` and wing half-span `w`, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub c: f64,
    pub w: f64,
}

impl Design {
    pub fn new(c: f64, w: f64) -> Result<Self> {
        let d = Self { c, w };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v, (lo, hi)) in [
            ("c", self.c, DESIGN_BOUNDS[0]),
            ("w", self.w, DESIGN_BOUNDS[1]),
        ] {
            if !(v >= lo && v <= hi) {
                return Err(Error::invalid(format!(
                    "design {name} = {v} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.c, self.w]
    }

    pub fn from_array(x: [f64; 2]) -> Self {
        Self { c: x[0], w: x[1] }
    }
}

/// Equilibrium flight condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimPoint {
    pub v0: f64,
    pub alpha0: f64,
    pub q0: f64,
    pub theta0: f64,
    pub dth0: f64,
    pub de0: f64,
    pub gamma0: f64,
    pub residual_norm: f64,
}

impl TrimPoint {
    pub fn state(&self) -> DVector<f64> {
        DVector::from_row_slice(&[self.v0, self.alpha0, self.q0, self.theta0])
    }

    pub fn inputs(&self) -> DVector<f64> {
        DVector::from_row_slice(&[self.dth0, self.de0])
    }

    /// Perturbation input box that keeps absolute inputs in their ranges.
    pub fn input_box(&self) -> Result<InputBox> {
        InputBox::from_slices(
            &[THROTTLE_RANGE.0 - self.dth0, -ELEVATOR_LIMIT - self.de0],
            &[THROTTLE_RANGE.1 - self.dth0, ELEVATOR_LIMIT - self.de0],
        )
    }
}

/// Physical input box in absolute terms.
pub fn physical_input_box() -> InputBox {
    InputBox::from_slices(
        &[THROTTLE_RANGE.0, -ELEVATOR_LIMIT],
        &[THROTTLE_RANGE.1, ELEVATOR_LIMIT],
    )
    .expect("constant box is valid")
}

/// How aerodynamic lookups treat flight states outside the table box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableLookup {
    /// Out-of-box queries are errors.
    #[default]
    Strict,
    /// Continue linearly from the boundary cell, up to the physical ranges.
    Extrapolate,
}

fn rhs_array(
    x: [f64; 4],
    u: [f64; 2],
    design: &Design,
    table: &AeroTable,
    params: &AircraftParams,
    lookup: TableLookup,
) -> Result<[f64; 4]> {
    let [v, alpha, q, theta] = x;
    let [dth, de] = u;
    if !(v > 0.0) {
        return Err(Error::invalid(format!(
            "airspeed must be positive, got {v}"
        )));
    }
    let query = AeroQuery {
        v,
        alpha,
        c: design.c,
        w: design.w,
        delta_e: de,
    };
    let loads = match lookup {
        TableLookup::Strict => table.interpolate(&query)?,
        TableLookup::Extrapolate => table.interpolate_extrapolated(&query)?,
    };
    let m = params.mass;
    let g = params.g;
    let thrust = dth * params.max_thrust;
    let gamma = theta - alpha;
    Ok([
        thrust * alpha.cos() / m - loads.drag / m - g * gamma.sin(),
        -thrust * alpha.sin() / (m * v) - loads.lift / (m * v) + g * gamma.cos() / v + q,
        (loads.moment + thrust * params.thrust_moment_arm) / params.j_y,
        q,
    ])
}

/// Right-hand side of the nonlinear longitudinal model.
pub fn nonlinear_rhs(
    state: &DVector<f64>,
    inputs: &DVector<f64>,
    design: &Design,
    table: &AeroTable,
    params: &AircraftParams,
) -> Result<DVector<f64>> {
    nonlinear_rhs_with(state, inputs, design, table, params, TableLookup::Strict)
}

pub fn nonlinear_rhs_with(
    state: &DVector<f64>,
    inputs: &DVector<f64>,
    design: &Design,
    table: &AeroTable,
    params: &AircraftParams,
    lookup: TableLookup,
) -> Result<DVector<f64>> {
    if state.len() != 4 || inputs.len() != 2 {
        return Err(Error::invalid(
            "state must be a 4-vector and inputs a 2-vector",
        ));
    }
    let f = rhs_array(
        [state[0], state[1], state[2], state[3]],
        [inputs[0], inputs[1]],
        design,
        table,
        params,
        lookup,
    )?;
    Ok(DVector::from_row_slice(&f))
}

/// Trim unknowns `y = (α, δe, δth, θ)`.
#[derive(Debug, Clone, Copy)]
struct TrimProblem<'a> {
    design: &'a Design,
    table: &'a AeroTable,
    params: &'a AircraftParams,
    v0: f64,
    gamma: f64,
    lower: [f64; 4],
    upper: [f64; 4],
}

impl TrimProblem<'_> {
    fn residual(&self, y: [f64; 4]) -> Result<[f64; 4]> {
        let [alpha, de, dth, theta] = y;
        let f = rhs_array(
            [self.v0, alpha, 0.0, theta],
            [dth, de],
            self.design,
            self.table,
            self.params,
            TableLookup::Strict,
        )?;
        Ok([f[0], f[1], f[2], theta - alpha - self.gamma])
    }

    fn clip(&self, y: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| y[i].clamp(self.lower[i], self.upper[i]))
    }

    /// Central differences for the first three rows, kept inside the clip
    /// box; the constraint row is exact.
    fn jacobian(&self, y: [f64; 4]) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(4, 4);
        for j in 0..4 {
            let h = 1e-6 * (1.0 + y[j].abs());
            let mut yp = y;
            let mut ym = y;
            yp[j] = (y[j] + h).min(self.upper[j]);
            ym[j] = (y[j] - h).max(self.lower[j]);
            let fp = self.residual(yp)?;
            let fm = self.residual(ym)?;
            for i in 0..3 {
                jac[(i, j)] = (fp[i] - fm[i]) / (yp[j] - ym[j]);
            }
        }
        jac.row_mut(3).copy_from_slice(&[-1.0, 0.0, 0.0, 1.0]);
        Ok(jac)
    }
}

fn inf_norm(r: &[f64; 4]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `(α, θ)` with `θ - α == γ` in floating point. Rounding ties can make
/// that unreachable for a fixed `α`, so `α` may move by a few ulps too.
fn constrained_pair(alpha: f64, gamma: f64) -> (f64, f64) {
    let mut a_up = alpha;
    let mut a_down = alpha;
    for _ in 0..4 {
        for a in [a_up, a_down] {
            let guess = a + gamma;
            let (mut up, mut down) = (guess, guess);
            for _ in 0..8 {
                if up - a == gamma {
                    return (a, up);
                }
                if down - a == gamma {
                    return (a, down);
                }
                up = up.next_up();
                down = down.next_down();
            }
        }
        a_up = a_up.next_up();
        a_down = a_down.next_down();
    }
    (alpha, alpha + gamma)
}

const TRIM_UNKNOWNS: [&str; 4] = ["alpha", "delta_e", "delta_th", "theta"];

/// Newton iteration for the equilibrium at airspeed `v0` and flight-path
/// angle `gamma`.
pub fn trim(
    design: &Design,
    table: &AeroTable,
    params: &AircraftParams,
    v0: f64,
    gamma: f64,
) -> Result<TrimPoint> {
    if !v0.is_finite() || !gamma.is_finite() {
        return Err(Error::invalid(
            "airspeed and flight-path angle must be finite",
        ));
    }
    if !table.in_domain(0, v0) {
        let (lo, hi) = table.axes.bounds(0);
        return Err(Error::OutOfDomain {
            axis: "V",
            value: v0,
            lower: lo,
            upper: hi,
        });
    }
    let (alo, ahi) = table.axes.bounds(1);
    let (elo, ehi) = table.axes.bounds(4);
    let prob = TrimProblem {
        design,
        table,
        params,
        v0,
        gamma,
        lower: [
            alo,
            elo.max(-ELEVATOR_LIMIT),
            THROTTLE_RANGE.0,
            -PITCH_LIMIT,
        ],
        upper: [ahi, ehi.min(ELEVATOR_LIMIT), THROTTLE_RANGE.1, PITCH_LIMIT],
    };
    let mut y = prob.clip([0.05, 0.0, 0.5, 0.05 + gamma]);
    let mut r = prob.residual(y)?;
    let mut norm = inf_norm(&r);
    let mut iterations = 0;
    while norm >= TRIM_TOLERANCE {
        if iterations == TRIM_MAX_ITER {
            return Err(Error::TrimFailure {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let jac = prob.jacobian(y)?;
        let rhs = -DVector::from_row_slice(&r);
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(Error::TrimFailure {
                iterations,
                residual: norm,
            });
        };
        // damped step: halve until the residual decreases
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial = prob.clip(std::array::from_fn(|i| y[i] + scale * step[i]));
            let rt = prob.residual(trial)?;
            let nt = inf_norm(&rt);
            if nt < norm {
                accepted = Some((trial, rt, nt));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, rt, nt)) = accepted else {
            // stalled against a bound: the equilibrium needs more authority
            if let Some(i) = (0..4).find(|&i| y[i] <= prob.lower[i] || y[i] >= prob.upper[i]) {
                return Err(Error::SaturatedTrim {
                    variable: TRIM_UNKNOWNS[i],
                    value: y[i],
                });
            }
            return Err(Error::TrimFailure {
                iterations,
                residual: norm,
            });
        };
        y = trial;
        r = rt;
        norm = nt;
    }

    // Tighten the constraint row to hold exactly.
    (y[0], y[3]) = constrained_pair(y[0], gamma);
    r = prob.residual(y)?;
    norm = inf_norm(&r);
    if norm >= TRIM_TOLERANCE {
        return Err(Error::TrimFailure {
            iterations,
            residual: norm,
        });
    }

    for i in 0..4 {
        if y[i] <= prob.lower[i] || y[i] >= prob.upper[i] {
            return Err(Error::SaturatedTrim {
                variable: TRIM_UNKNOWNS[i],
                value: y[i],
            });
        }
    }
    log::debug!(
        "trim at V={v0} gamma={gamma} for ({}, {}): {iterations} iterations, residual {norm:e}",
        design.c,
        design.w
    );
    Ok(TrimPoint {
        v0,
        alpha0: y[0],
        q0: 0.0,
        theta0: y[3],
        dth0: y[2],
        de0: y[1],
        gamma0: gamma,
        residual_norm: norm,
    })
}

fn trim_unknowns(t: &TrimPoint) -> [f64; 4] {
    [t.alpha0, t.de0, t.dth0, t.theta0]
}

fn trim_problem<'a>(
    design: &'a Design,
    table: &'a AeroTable,
    params: &'a AircraftParams,
    t: &TrimPoint,
) -> TrimProblem<'a> {
    TrimProblem {
        design,
        table,
        params,
        v0: t.v0,
        gamma: t.gamma0,
        lower: [f64::NEG_INFINITY; 4],
        upper: [f64::INFINITY; 4],
    }
}

/// `∂F/∂y` at a trim point, `y = (α, δe, δth, θ)`.
pub fn trim_jacobian(
    design: &Design,
    table: &AeroTable,
    params: &AircraftParams,
    trim: &TrimPoint,
) -> Result<DMatrix<f64>> {
    trim_problem(design, table, params, trim).jacobian(trim_unknowns(trim))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub condition_number: f64,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
    pub invertible: bool,
}

/// Invertible when the smallest singular value exceeds `1e-10` times the
/// largest.
pub fn check_trim_regularity(jac: &DMatrix<f64>) -> RegularityReport {
    let sv = jac.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    RegularityReport {
        condition_number: if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        },
        smallest_singular_value: smin,
        largest_singular_value: smax,
        invertible: smin > 1e-10 * smax,
    }
}

/// Trim sensitivity to the design predicted by the implicit function
/// theorem: `dy/dd = -(∂F/∂y)⁻¹ ∂F/∂d`, with `∂F/∂d` by central differences
/// of step `h`. Columns follow `(c, w)`.
pub fn trim_sensitivity(
    design: &Design,
    table: &AeroTable,
    params: &AircraftParams,
    trim: &TrimPoint,
    h: f64,
) -> Result<DMatrix<f64>> {
    let y = trim_unknowns(trim);
    let jac = trim_jacobian(design, table, params, trim)?;
    let mut fd = DMatrix::zeros(4, 2);
    for k in 0..2 {
        let mut dp = design.to_array();
        let mut dm = design.to_array();
        dp[k] += h;
        dm[k] -= h;
        let (dp, dm) = (Design::from_array(dp), Design::from_array(dm));
        let fp = trim_problem(&dp, table, params, trim).residual(y)?;
        let fm = trim_problem(&dm, table, params, trim).residual(y)?;
        for i in 0..4 {
            fd[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac.lu().solve(&(-fd)).ok_or_else(|| Error::TrimFailure {
        iterations: 0,
        residual: trim.residual_norm,
    })
}

/// Linear model about `trim`, as perturbations `Δx`, `Δu`, and the
/// perturbation input box.
///
/// The angle-of-attack column and the throttle entry of the `α̇` row carry
/// the thrust and gravity terms of the exact Jacobian, so the model is the
/// true first-order expansion of the nonlinear dynamics.
pub fn linearize(
    design: &Design,
    table: &AeroTable,
    params: &AircraftParams,
    trim: &TrimPoint,
) -> Result<(LtiSystem, InputBox)> {
    linearize_with(design, table, params, trim, &DerivativeSteps::default())
}

pub fn linearize_with(
    design: &Design,
    table: &AeroTable,
    params: &AircraftParams,
    trim: &TrimPoint,
    steps: &DerivativeSteps,
) -> Result<(LtiSystem, InputBox)> {
    let sd = stability_derivatives(table, design, trim, steps, params)?;
    let (v0, a0, g0) = (trim.v0, trim.alpha0, trim.gamma0);
    let g = params.g;
    let accel = trim.dth0 * params.max_thrust / params.mass;
    let x_alpha = sd.x_alpha - accel * a0.sin() + g * g0.cos();
    let z_alpha = sd.z_alpha - accel * a0.cos() + g * g0.sin();
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        sd.x_v,      x_alpha,      0.0,                   -g * g0.cos(),
        sd.z_v / v0, z_alpha / v0, 1.0 + sd.z_q / v0,     -g * g0.sin() / v0,
        sd.m_v,      sd.m_alpha,   sd.m_q,                0.0,
        0.0,         0.0,          1.0,                   0.0,
    ]);
    #[rustfmt::skip]
    let b = DMatrix::from_row_slice(4, 2, &[
        sd.x_dth * a0.cos(),       sd.x_de,
        -sd.x_dth * a0.sin() / v0, sd.z_de / v0,
        sd.m_dth,                  sd.m_de,
        0.0,                       0.0,
    ]);
    Ok((LtiSystem::longitudinal(a, b)?, trim.input_box()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aero::{generate_table, AeroAxes, SurrogateConfig};
    use std::sync::OnceLock;

    fn table() -> &'static AeroTable {
        static T: OnceLock<AeroTable> = OnceLock::new();
        T.get_or_init(|| {
            generate_table(
                &AeroAxes::uniform(6).unwrap(),
                &AircraftParams::default(),
                &SurrogateConfig::default(),
            )
            .unwrap()
        })
    }

    fn base() -> Design {
        Design::new(5.0, 12.0).unwrap()
    }

    fn level(d: &Design) -> TrimPoint {
        trim(d, table(), &table().params, 200.0, 0.0).unwrap()
    }

    // Hand-coded duplicate of the equations of motion.
    fn oracle_rhs(x: [f64; 4], u: [f64; 2], d: &Design) -> [f64; 4] {
        let t = table();
        let p = &t.params;
        let l = t
            .interpolate(&AeroQuery {
                v: x[0],
                alpha: x[1],
                c: d.c,
                w: d.w,
                delta_e: u[1],
            })
            .unwrap();
        let f = u[0] * p.max_thrust;
        let vdot = f / p.mass * x[1].cos() - l.drag / p.mass - p.g * (x[3] - x[1]).sin();
        let adot = -f / (p.mass * x[0]) * x[1].sin() - l.lift / (p.mass * x[0])
            + p.g / x[0] * (x[3] - x[1]).cos()
            + x[2];
        [vdot, adot, l.moment / p.j_y, x[2]]
    }

    #[test]
    fn design_box_is_enforced() {
        assert!(Design::new(2.0, 12.0).is_err());
        assert!(Design::new(5.0, 20.5).is_err());
        assert!(Design::new(7.0, 10.0).is_ok());
    }

    #[test]
    fn level_trim_converges() {
        let t = level(&base());
        assert!(t.residual_norm < 1e-8);
        assert_eq!(t.theta0, t.alpha0);
        assert_eq!(t.q0, 0.0);
        let f = nonlinear_rhs(&t.state(), &t.inputs(), &base(), table(), &table().params).unwrap();
        assert!(f.rows(0, 3).amax() < 1e-8);
        assert_eq!(f[3], 0.0);
    }

    #[test]
    fn climb_trim_holds_flight_path_exactly() {
        let t = trim(&base(), table(), &table().params, 200.0, 0.1).unwrap();
        assert_eq!(t.theta0 - t.alpha0, 0.1);
        assert!(t.residual_norm < 1e-8);
    }

    #[test]
    fn pitch_rate_passes_through() {
        let t = level(&base());
        let mut x = t.state();
        x[2] = 0.1;
        let f = nonlinear_rhs(&x, &t.inputs(), &base(), table(), &table().params).unwrap();
        assert_eq!(f[3], 0.1);
    }

    #[test]
    fn rhs_matches_duplicate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = [
                rng.random_range(120.0..280.0),
                rng.random_range(-0.05..0.25),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.3..0.3),
            ];
            let u = [rng.random_range(0.0..1.0), rng.random_range(-0.5..0.5)];
            let d = Design::new(rng.random_range(3.0..7.0), rng.random_range(10.0..20.0)).unwrap();
            let got = nonlinear_rhs(
                &DVector::from_row_slice(&x),
                &DVector::from_row_slice(&u),
                &d,
                table(),
                &table().params,
            )
            .unwrap();
            let want = oracle_rhs(x, u, &d);
            for i in 0..4 {
                assert!((got[i] - want[i]).abs() <= 1e-12 * (1.0 + want[i].abs()));
            }
        }
    }

    #[test]
    fn out_of_table_query_is_reported() {
        let x = DVector::from_row_slice(&[400.0, 0.0, 0.0, 0.0]);
        let u = DVector::from_row_slice(&[0.5, 0.0]);
        let err = nonlinear_rhs(&x, &u, &base(), table(), &table().params);
        assert!(matches!(err, Err(Error::OutOfDomain { axis: "V", .. })));
    }

    // Coarse-to-fine grid search on the residual, independent of Newton.
    fn grid_search(d: &Design, v0: f64) -> [f64; 4] {
        let t = table();
        let p = &t.params;
        let cost = |y: [f64; 3]| {
            let f = oracle_rhs([v0, y[0], 0.0, y[0]], [y[2], y[1]], d);
            (f[0] / 10.0).powi(2) + f[1].powi(2) + f[2].powi(2)
        };
        let _ = p;
        let mut center = [0.05, 0.0, 0.5];
        let mut half = [0.1, 0.3, 0.5];
        while half.iter().any(|&h| h > 1e-5) {
            let mut best = (f64::INFINITY, center);
            for i in -10..=10 {
                for j in -10..=10 {
                    for k in -10..=10 {
                        let y = [
                            center[0] + half[0] * i as f64 / 10.0,
                            center[1] + half[1] * j as f64 / 10.0,
                            (center[2] + half[2] * k as f64 / 10.0).clamp(0.0, 1.0),
                        ];
                        let c = cost(y);
                        if c < best.0 {
                            best = (c, y);
                        }
                    }
                }
            }
            center = best.1;
            half = half.map(|h| h * 0.25);
        }
        [center[0], center[1], center[2], center[0]]
    }

    #[test]
    fn trim_matches_grid_search() {
        for (c, w) in [(5.0, 12.0), (7.0, 10.5), (7.0, 18.0)] {
            let d = Design::new(c, w).unwrap();
            let t = level(&d);
            let o = grid_search(&d, 200.0);
            assert!((t.alpha0 - o[0]).abs() < 1e-3, "alpha {c},{w}");
            assert!((t.de0 - o[1]).abs() < 1e-3, "de {c},{w}");
            assert!((t.dth0 - o[2]).abs() < 1e-3, "dth {c},{w}");
        }
    }

    #[test]
    fn jacobian_structure() {
        let t = level(&base());
        let jac = trim_jacobian(&base(), table(), &table().params, &t).unwrap();
        assert_eq!(
            jac.row(3).iter().copied().collect::<Vec<_>>(),
            vec![-1.0, 0.0, 0.0, 1.0]
        );
        assert!(jac[(2, 2)].abs() < 1e-10);
        let det = jac.determinant();
        assert!(det.abs() > 1e-12);
        let report = check_trim_regularity(&jac);
        assert!(report.invertible);
        assert!(report.condition_number.is_finite());
    }

    #[test]
    fn regularity_examples() {
        let r = check_trim_regularity(&DMatrix::identity(4, 4));
        assert!((r.condition_number - 1.0).abs() < 1e-12 && r.invertible);
        let mut m = DMatrix::identity(4, 4);
        m[(3, 3)] = 0.0;
        assert!(!check_trim_regularity(&m).invertible);
    }

    #[test]
    fn implicit_function_sensitivity() {
        let d = base();
        let t = level(&d);
        let h = 0.05;
        let pred = trim_sensitivity(&d, table(), &table().params, &t, h).unwrap();
        for k in 0..2 {
            let mut dp = d.to_array();
            let mut dm = d.to_array();
            dp[k] += h;
            dm[k] -= h;
            let tp = level(&Design::from_array(dp));
            let tm = level(&Design::from_array(dm));
            let fd = [
                (tp.alpha0 - tm.alpha0) / (2.0 * h),
                (tp.de0 - tm.de0) / (2.0 * h),
                (tp.dth0 - tm.dth0) / (2.0 * h),
                (tp.theta0 - tm.theta0) / (2.0 * h),
            ];
            for i in 0..4 {
                let rel = (pred[(i, k)] - fd[i]).abs() / fd[i].abs().max(1e-12);
                assert!(rel < 0.05, "entry ({i},{k}): {} vs {}", pred[(i, k)], fd[i]);
            }
        }
    }

    #[test]
    fn linear_model_structure_and_box() {
        let d = base();
        let t = level(&d);
        let (sys, bx) = linearize(&d, table(), &table().params, &t).unwrap();
        let a = sys.a();
        let b = sys.b();
        assert_eq!(
            [a[(3, 0)], a[(3, 1)], a[(3, 2)], a[(3, 3)]],
            [0.0, 0.0, 1.0, 0.0]
        );
        assert_eq!([b[(3, 0)], b[(3, 1)]], [0.0, 0.0]);
        assert!(bx.contains_origin_strictly());

        let mut t2 = t;
        t2.dth0 = 0.4;
        t2.de0 = -0.02;
        let bx = t2.input_box().unwrap();
        assert!((bx.lower()[0] + 0.4).abs() < 1e-15 && (bx.upper()[0] - 0.6).abs() < 1e-15);
        assert!((bx.lower()[1] + 0.503).abs() < 1e-12 && (bx.upper()[1] - 0.543).abs() < 1e-12);
    }

    #[test]
    fn linearization_error_is_second_order() {
        let d = base();
        let t = level(&d);
        let p = &table().params;
        let (sys, _) = linearize(&d, table(), p, &t).unwrap();
        let f0 = nonlinear_rhs(&t.state(), &t.inputs(), &d, table(), p).unwrap();
        let dx = DVector::from_row_slice(&[2.0, 0.01, 0.01, 0.01]);
        let du = DVector::from_row_slice(&[0.05, 0.01]);
        let err = |h: f64| {
            let f = nonlinear_rhs(
                &(t.state() + &dx * h),
                &(t.inputs() + &du * h),
                &d,
                table(),
                p,
            )
            .unwrap();
            (f - &f0 - sys.derivative(&(&dx * h), &(&du * h))).norm()
        };
        for h in [0.4, 0.2, 0.1] {
            let ratio = err(h) / err(h / 2.0);
            assert!((3.0..=5.0).contains(&ratio), "h={h}: ratio {ratio}");
        }
    }
}
