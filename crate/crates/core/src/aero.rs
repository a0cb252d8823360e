//! Aerodynamic data: an analytic planform surrogate, tabulated on a regular
//! 5-axis grid `(V, α, c, w, δe)`, with multilinear lookup and stability
//! derivatives.
//!
//! Surrogate, for center half-span `c` and wing half-span `w`:
//!
//! ```text
//! span          b   = 2 (c + w)
//! area          S   = 2 (c ℓ_c + w ℓ_w)
//! aspect ratio  AR  = b² / S
//! mean chord    c̄   = S / b
//! C_L = C_L0 + C_Lα α + C_Lδe δe,          C_Lα = 2π AR / (AR + 2)
//! C_D = C_D0 + C_L² / (π AR e)
//! C_m = C_m0 - SM(c) C_Lα α + C_mδe(c) δe,  SM(c) = SM0 + SM1 (c - c_ref)
//!                                          C_mδe(c) = C_mδe,ref c / c_ref
//! L = q̄ S C_L,  D = q̄ S C_D,  M = q̄ S c̄ C_m,  q̄ = ½ ρ V²
//! ```
//!
//! The pitching moment is taken about the center of gravity, nose-up
//! positive. Positive elevator deflection is trailing-edge down: more lift,
//! nose-down moment.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight::{Design, TrimPoint};

/// Axis order of the table layout.
pub const AXIS_NAMES: [&str; 5] = ["V", "alpha", "c", "w", "delta_e"];
pub const LAYOUT: &str = "row-major V,alpha,c,w,delta_e";

/// Default sweep bounds `(lower, upper)` per axis.
pub const DEFAULT_BOUNDS: [(f64, f64); 5] = [
    (100.0, 295.0),
    (-0.0873, 0.2618),
    (3.0, 7.0),
    (10.0, 20.0),
    (-0.523, 0.523),
];

/// Range over which the surrogate is considered physically meaningful.
pub const PHYSICAL_BOUNDS: [(f64, f64); 5] = [
    (50.0, 340.0),
    (-0.35, 0.35),
    (1.0, 10.0),
    (5.0, 30.0),
    (-0.6, 0.6),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroAxes {
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub c: Vec<f64>,
    pub w: Vec<f64>,
    pub delta_e: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

impl AeroAxes {
    /// Default bounds with `resolution` evenly spaced points per axis.
    pub fn uniform(resolution: usize) -> Result<Self> {
        Self::with_bounds(DEFAULT_BOUNDS, resolution)
    }

    pub fn with_bounds(bounds: [(f64, f64); 5], resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::invalid(format!(
                "each axis needs at least 2 points, got {resolution}"
            )));
        }
        let [v, alpha, c, w, delta_e] = bounds.map(|(lo, hi)| linspace(lo, hi, resolution));
        let axes = Self {
            v,
            alpha,
            c,
            w,
            delta_e,
        };
        axes.validate()?;
        Ok(axes)
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.v,
            1 => &self.alpha,
            2 => &self.c,
            3 => &self.w,
            4 => &self.delta_e,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn shape(&self) -> [usize; 5] {
        std::array::from_fn(|i| self.axis(i).len())
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let a = self.axis(i);
        (a[0], a[a.len() - 1])
    }

    /// Strictly increasing, at least 2 points, finite.
    pub fn validate(&self) -> Result<()> {
        for (i, name) in AXIS_NAMES.iter().enumerate() {
            let a = self.axis(i);
            if a.len() < 2 {
                return Err(Error::invalid(format!(
                    "axis {name} needs at least 2 points"
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!(
                    "axis {name} has non-finite entries"
                )));
            }
            if a.windows(2).any(|p| p[1] <= p[0]) {
                return Err(Error::invalid(format!(
                    "axis {name} is not strictly increasing"
                )));
            }
        }
        Ok(())
    }

    fn check_physical(&self) -> Result<()> {
        for (i, name) in AXIS_NAMES.iter().enumerate() {
            let (lo, hi) = self.bounds(i);
            let (plo, phi) = PHYSICAL_BOUNDS[i];
            if lo < plo || hi > phi {
                return Err(Error::invalid(format!(
                    "axis {name} spans [{lo}, {hi}], outside the physical range [{plo}, {phi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftParams {
    pub mass: f64,
    pub j_y: f64,
    pub g: f64,
    pub max_thrust: f64,
    pub rho: f64,
    pub thrust_moment_arm: f64,
}

impl Default for AircraftParams {
    fn default() -> Self {
        Self {
            mass: 158_757.0,
            j_y: 1.5e7,
            g: 9.81,
            max_thrust: 427_000.0,
            rho: 0.4135,
            thrust_moment_arm: 0.0,
        }
    }
}

impl AircraftParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("j_y", self.j_y),
            ("g", self.g),
            ("max_thrust", self.max_thrust),
            ("rho", self.rho),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.thrust_moment_arm.is_finite() {
            return Err(Error::invalid("thrust_moment_arm must be finite"));
        }
        Ok(())
    }
}

/// Constants of the analytic surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Chord scale of the center body, ℓ_c [m].
    pub center_chord: f64,
    /// Chord scale of the outer wing, ℓ_w [m].
    pub wing_chord: f64,
    pub cl0: f64,
    pub cl_de: f64,
    pub cd0: f64,
    pub oswald: f64,
    pub cm0: f64,
    pub static_margin_ref: f64,
    /// Change of static margin per meter of center half-span.
    pub static_margin_slope: f64,
    pub cm_de_ref: f64,
    /// Center half-span at which the reference values apply [m].
    pub c_ref: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            center_chord: 30.0,
            wing_chord: 8.0,
            cl0: 0.1,
            cl_de: 0.25,
            cd0: 0.006,
            oswald: 0.9,
            cm0: 0.01,
            static_margin_ref: 0.05,
            static_margin_slope: 0.01,
            cm_de_ref: -0.4,
            c_ref: 5.0,
        }
    }
}

/// Planform quantities derived from a design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Planform {
    pub span: f64,
    pub area: f64,
    pub aspect_ratio: f64,
    pub mean_chord: f64,
}

/// Nondimensional coefficients at one flight condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub cl: f64,
    pub cd: f64,
    pub cm: f64,
}

/// Dimensional loads: lift and drag in N, pitching moment in N·m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loads {
    pub lift: f64,
    pub drag: f64,
    pub moment: f64,
}

impl SurrogateConfig {
    pub fn planform(&self, c: f64, w: f64) -> Planform {
        let span = 2.0 * (c + w);
        let area = 2.0 * (c * self.center_chord + w * self.wing_chord);
        Planform {
            span,
            area,
            aspect_ratio: span * span / area,
            mean_chord: area / span,
        }
    }

    pub fn lift_slope(&self, aspect_ratio: f64) -> f64 {
        2.0 * PI * aspect_ratio / (aspect_ratio + 2.0)
    }

    pub fn static_margin(&self, c: f64) -> f64 {
        self.static_margin_ref + self.static_margin_slope * (c - self.c_ref)
    }

    pub fn elevator_moment_slope(&self, c: f64) -> f64 {
        self.cm_de_ref * c / self.c_ref
    }

    pub fn coefficients(&self, alpha: f64, c: f64, w: f64, delta_e: f64) -> Coefficients {
        let p = self.planform(c, w);
        let cla = self.lift_slope(p.aspect_ratio);
        let cl = self.cl0 + cla * alpha + self.cl_de * delta_e;
        let cd = self.cd0 + cl * cl / (PI * p.aspect_ratio * self.oswald);
        let cm = self.cm0 - self.static_margin(c) * cla * alpha
            + self.elevator_moment_slope(c) * delta_e;
        Coefficients { cl, cd, cm }
    }

    pub fn loads(&self, rho: f64, v: f64, alpha: f64, c: f64, w: f64, delta_e: f64) -> Loads {
        let p = self.planform(c, w);
        let k = self.coefficients(alpha, c, w, delta_e);
        let qs = 0.5 * rho * v * v * p.area;
        Loads {
            lift: qs * k.cl,
            drag: qs * k.cd,
            moment: qs * p.mean_chord * k.cm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.center_chord,
            self.wing_chord,
            self.cl0,
            self.cl_de,
            self.cd0,
            self.oswald,
            self.cm0,
            self.static_margin_ref,
            self.static_margin_slope,
            self.cm_de_ref,
            self.c_ref,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("surrogate constants must be finite"));
        }
        if self.center_chord <= 0.0 || self.wing_chord <= 0.0 || self.c_ref <= 0.0 {
            return Err(Error::invalid("chord scales and c_ref must be positive"));
        }
        if self.cd0 <= 0.0 || self.oswald <= 0.0 {
            return Err(Error::invalid("cd0 and oswald must be positive"));
        }
        Ok(())
    }
}

/// Lift, drag and moment tabulated on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroTable {
    pub axes: AeroAxes,
    pub layout: String,
    pub lift: Vec<f64>,
    pub drag: Vec<f64>,
    pub moment: Vec<f64>,
    pub surrogate_config: SurrogateConfig,
    pub params: AircraftParams,
}

fn strides(shape: [usize; 5]) -> [usize; 5] {
    let mut s = [1usize; 5];
    for i in (0..4).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Tabulates the surrogate on `axes`. Rows are filled in parallel; each
/// entry depends only on its own coordinates.
pub fn generate_table(
    axes: &AeroAxes,
    params: &AircraftParams,
    config: &SurrogateConfig,
) -> Result<AeroTable> {
    axes.validate()?;
    axes.check_physical()?;
    params.validate()?;
    config.validate()?;
    let shape = axes.shape();
    let st = strides(shape);
    let entries: Vec<Loads> = (0..axes.len())
        .into_par_iter()
        .map(|flat| {
            let idx: [usize; 5] = std::array::from_fn(|i| (flat / st[i]) % shape[i]);
            config.loads(
                params.rho,
                axes.v[idx[0]],
                axes.alpha[idx[1]],
                axes.c[idx[2]],
                axes.w[idx[3]],
                axes.delta_e[idx[4]],
            )
        })
        .collect();
    let table = AeroTable {
        axes: axes.clone(),
        layout: LAYOUT.to_string(),
        lift: entries.iter().map(|l| l.lift).collect(),
        drag: entries.iter().map(|l| l.drag).collect(),
        moment: entries.iter().map(|l| l.moment).collect(),
        surrogate_config: *config,
        params: *params,
    };
    table.validate()?;
    Ok(table)
}

/// Query point of the table, in axis order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroQuery {
    pub v: f64,
    pub alpha: f64,
    pub c: f64,
    pub w: f64,
    pub delta_e: f64,
}

impl AeroQuery {
    fn coords(&self) -> [f64; 5] {
        [self.v, self.alpha, self.c, self.w, self.delta_e]
    }
}

impl AeroTable {
    pub fn validate(&self) -> Result<()> {
        self.axes
            .validate()
            .map_err(|e| Error::Format(e.to_string()))?;
        if self.layout != LAYOUT {
            return Err(Error::Format(format!(
                "unsupported layout {:?}",
                self.layout
            )));
        }
        let n = self.axes.len();
        for (name, data) in [
            ("lift", &self.lift),
            ("drag", &self.drag),
            ("moment", &self.moment),
        ] {
            if data.len() != n {
                return Err(Error::Format(format!(
                    "{name} has {} entries, expected {n}",
                    data.len()
                )));
            }
            if data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format(format!("{name} has non-finite entries")));
            }
        }
        self.params
            .validate()
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: AeroTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn flat_index(&self, idx: [usize; 5]) -> usize {
        let st = strides(self.axes.shape());
        idx.iter().zip(st.iter()).map(|(i, s)| i * s).sum()
    }

    /// Stored values at a grid node.
    pub fn node(&self, idx: [usize; 5]) -> Loads {
        let k = self.flat_index(idx);
        Loads {
            lift: self.lift[k],
            drag: self.drag[k],
            moment: self.moment[k],
        }
    }

    pub fn in_domain(&self, axis: usize, value: f64) -> bool {
        let (lo, hi) = self.axes.bounds(axis);
        value >= lo && value <= hi
    }

    /// 5-linear interpolation over the enclosing cell.
    pub fn interpolate(&self, q: &AeroQuery) -> Result<Loads> {
        self.lookup(q, false)
    }

    /// Like [`interpolate`](Self::interpolate), but flight-state axes
    /// (`V`, `α`, `δe`) continue linearly past the table edge using the
    /// boundary cell, up to [`PHYSICAL_BOUNDS`]. Geometry must still lie
    /// inside the table.
    pub fn interpolate_extrapolated(&self, q: &AeroQuery) -> Result<Loads> {
        self.lookup(q, true)
    }

    /// Whether every coordinate of `q` lies inside the table box.
    pub fn contains(&self, q: &AeroQuery) -> bool {
        let coords = q.coords();
        (0..5).all(|i| self.in_domain(i, coords[i]))
    }

    fn lookup(&self, q: &AeroQuery, extrapolate: bool) -> Result<Loads> {
        let coords = q.coords();
        let mut lower = [0usize; 5];
        let mut frac = [0.0f64; 5];
        for i in 0..5 {
            let axis = self.axes.axis(i);
            let x = coords[i];
            let (lo, hi) = if extrapolate && i != 2 && i != 3 {
                PHYSICAL_BOUNDS[i]
            } else {
                self.axes.bounds(i)
            };
            if !(x >= lo && x <= hi) {
                return Err(Error::OutOfDomain {
                    axis: AXIS_NAMES[i],
                    value: x,
                    lower: lo,
                    upper: hi,
                });
            }
            // last index with axis[j] <= x, kept inside the final cell
            let j = axis.partition_point(|&a| a <= x).saturating_sub(1);
            let j = j.min(axis.len() - 2);
            lower[i] = j;
            frac[i] = (x - axis[j]) / (axis[j + 1] - axis[j]);
        }
        let st = strides(self.axes.shape());
        let base: usize = lower.iter().zip(st.iter()).map(|(i, s)| i * s).sum();
        let (mut lift, mut drag, mut moment) = (0.0, 0.0, 0.0);
        for corner in 0..32usize {
            let mut weight = 1.0;
            let mut offset = 0;
            for i in 0..5 {
                if corner >> i & 1 == 1 {
                    weight *= frac[i];
                    offset += st[i];
                } else {
                    weight *= 1.0 - frac[i];
                }
            }
            if weight == 0.0 {
                continue;
            }
            let k = base + offset;
            lift += weight * self.lift[k];
            drag += weight * self.drag[k];
            moment += weight * self.moment[k];
        }
        Ok(Loads { lift, drag, moment })
    }
}

pub fn interpolate(table: &AeroTable, q: &AeroQuery) -> Result<Loads> {
    table.interpolate(q)
}

/// Finite-difference steps for stability derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSteps {
    pub dv: f64,
    pub dalpha: f64,
    pub dde: f64,
}

impl Default for DerivativeSteps {
    fn default() -> Self {
        Self {
            dv: 0.1,
            dalpha: 1e-3,
            dde: 1e-3,
        }
    }
}

/// Aerodynamic and control derivatives normalized by mass (force rows) and
/// pitch inertia (moment row), wind frame with `X = -D`, `Z = -L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityDerivatives {
    pub x_v: f64,
    pub x_alpha: f64,
    pub z_v: f64,
    pub z_alpha: f64,
    pub m_v: f64,
    pub m_alpha: f64,
    pub x_dth: f64,
    pub x_de: f64,
    pub z_de: f64,
    pub m_dth: f64,
    pub m_de: f64,
    pub z_q: f64,
    pub m_q: f64,
}

/// Central differences of the interpolated loads at the trim condition.
pub fn stability_derivatives(
    table: &AeroTable,
    design: &Design,
    trim: &TrimPoint,
    steps: &DerivativeSteps,
    params: &AircraftParams,
) -> Result<StabilityDerivatives> {
    let base = AeroQuery {
        v: trim.v0,
        alpha: trim.alpha0,
        c: design.c,
        w: design.w,
        delta_e: trim.de0,
    };
    let probes = [(0usize, steps.dv), (1, steps.dalpha), (4, steps.dde)];
    let mut grads = [[0.0; 3]; 3];
    for (slot, &(axis, h)) in probes.iter().enumerate() {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("derivative steps must be positive"));
        }
        let mut coords = base.coords();
        let x = coords[axis];
        let (lo, hi) = table.axes.bounds(axis);
        if x - h < lo || x + h > hi {
            return Err(Error::OutOfDomain {
                axis: AXIS_NAMES[axis],
                value: x,
                lower: lo + h,
                upper: hi - h,
            });
        }
        coords[axis] = x + h;
        let plus = table.interpolate(&query_from(coords))?;
        coords[axis] = x - h;
        let minus = table.interpolate(&query_from(coords))?;
        grads[slot] = [
            (plus.lift - minus.lift) / (2.0 * h),
            (plus.drag - minus.drag) / (2.0 * h),
            (plus.moment - minus.moment) / (2.0 * h),
        ];
    }
    let m = params.mass;
    let jy = params.j_y;
    let [dv, da, dde] = grads;
    Ok(StabilityDerivatives {
        x_v: -dv[1] / m,
        x_alpha: -da[1] / m,
        z_v: -dv[0] / m,
        z_alpha: -da[0] / m,
        m_v: dv[2] / jy,
        m_alpha: da[2] / jy,
        x_dth: params.max_thrust / m,
        x_de: -dde[1] / m,
        z_de: -dde[0] / m,
        m_dth: params.max_thrust * params.thrust_moment_arm / jy,
        m_de: dde[2] / jy,
        z_q: 0.0,
        m_q: 0.0,
    })
}

fn query_from(c: [f64; 5]) -> AeroQuery {
    AeroQuery {
        v: c[0],
        alpha: c[1],
        c: c[2],
        w: c[3],
        delta_e: c[4],
    }
}
