//! Reachable sets of LTI systems under box-bounded inputs.
//!
//! Exposed points of the time-`T` reachable set from the origin are reached by
//! bang-bang inputs: for a direction `c`, each input channel sits at its upper
//! bound while the switching function `ψ(t; c) = cᵀ e^{A(T-t)} B` is
//! nonnegative and at its lower bound otherwise. Sampling `k` directions and
//! taking the hull of the resulting endpoints gives an inner approximation of
//! the reachable set whose volume and directional extent drive design.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hull::{hull_volume, HullVolume};
use crate::json;
use crate::lp;
use crate::lti::{discretize, expm, Discretized, LtiSystem, TimeGrid};

/// Smallest direction count that can span a 4-simplex.
pub const MIN_DIRECTIONS: usize = 5;

/// Componentwise input bounds `lower ≤ u ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl InputBox {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid(
                "input bounds must have equal, nonzero length",
            ));
        }
        if lower.iter().chain(upper.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("input bounds must be finite"));
        }
        if lower.iter().zip(upper.iter()).any(|(lo, hi)| lo > hi) {
            return Err(Error::invalid("lower input bound exceeds upper bound"));
        }
        Ok(Self { lower, upper })
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self> {
        Self::new(
            DVector::from_row_slice(lower),
            DVector::from_row_slice(upper),
        )
    }

    /// `[-r, r]` in every channel.
    pub fn symmetric(radius: &DVector<f64>) -> Result<Self> {
        Self::new(-radius, radius.clone())
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) / 2.0
    }

    pub fn half_range(&self) -> DVector<f64> {
        (&self.upper - &self.lower) / 2.0
    }

    pub fn clip(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |i, _| u[i].clamp(self.lower[i], self.upper[i]))
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        u.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// True when any channel of `u` sits exactly on a bound.
    pub fn on_boundary(&self, u: &DVector<f64>) -> bool {
        u.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .any(|(v, (lo, hi))| *v == *lo || *v == *hi)
    }

    pub fn contains_origin_strictly(&self) -> bool {
        self.lower.iter().all(|&lo| lo < 0.0) && self.upper.iter().all(|&hi| hi > 0.0)
    }
}

/// Reach-sampling configuration shared by the design problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachConfig {
    pub horizon: f64,
    pub n_steps: usize,
    pub directions: usize,
    pub seed: u64,
}

impl Default for ReachConfig {
    fn default() -> Self {
        Self {
            horizon: 2.0,
            n_steps: 200,
            directions: 256,
            seed: 0,
        }
    }
}

impl ReachConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::horizon(self.horizon, self.n_steps)
    }
}

/// Per-system precomputation for fast extreme-point synthesis on one grid.
///
/// `switching[k] = e^{A (T - t_k^mid)} B`, so `ψ_k(c) = switching[k]ᵀ c`.
#[derive(Debug, Clone)]
pub struct ReachKernel {
    grid: TimeGrid,
    disc: Discretized,
    switching: Vec<DMatrix<f64>>,
}

impl ReachKernel {
    pub fn new(sys: &LtiSystem, grid: &TimeGrid) -> Result<Self> {
        grid.validate()?;
        let dt = grid.dt();
        let disc = discretize(sys, dt)?;
        let half = expm(sys.a(), dt / 2.0)?;
        let n = grid.n_steps;
        let mut switching = vec![DMatrix::zeros(sys.n_states(), sys.n_inputs()); n];
        switching[n - 1] = &half * sys.b();
        for k in (0..n - 1).rev() {
            switching[k] = &disc.a_d * &switching[k + 1];
        }
        Ok(Self {
            grid: *grid,
            disc,
            switching,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_states(&self) -> usize {
        self.disc.a_d.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.disc.b_d.ncols()
    }

    fn check_direction(&self, c: &DVector<f64>) -> Result<()> {
        if c.len() != self.n_states() {
            return Err(Error::invalid(format!(
                "direction has dimension {}, expected {}",
                c.len(),
                self.n_states()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) || c.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("direction must be finite and nonzero"));
        }
        Ok(())
    }

    pub fn switching(&self, c: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.check_direction(c)?;
        Ok(self.switching.iter().map(|m| m.tr_mul(c)).collect())
    }

    pub fn bangbang(&self, bounds: &InputBox, c: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        if bounds.len() != self.n_inputs() {
            return Err(Error::invalid(
                "input box dimension does not match the system",
            ));
        }
        Ok(self
            .switching(c)?
            .into_iter()
            .map(|psi| {
                DVector::from_fn(psi.len(), |i, _| {
                    if psi[i] >= 0.0 {
                        bounds.upper[i]
                    } else {
                        bounds.lower[i]
                    }
                })
            })
            .collect())
    }

    /// State at `T` reached from the origin under `inputs`.
    pub fn endpoint(&self, inputs: &[DVector<f64>]) -> DVector<f64> {
        inputs.iter().fold(DVector::zeros(self.n_states()), |x, u| {
            self.disc.step(&x, u)
        })
    }

    pub fn extreme_point(&self, bounds: &InputBox, c: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.endpoint(&self.bangbang(bounds, c)?))
    }

    /// Support value `h(c) = cᵀ x*(c)`.
    pub fn support(&self, bounds: &InputBox, c: &DVector<f64>) -> Result<f64> {
        Ok(c.dot(&self.extreme_point(bounds, c)?))
    }

    pub fn support_length(&self, bounds: &InputBox, v: &DVector<f64>) -> Result<f64> {
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "projection direction must be unit, |v| = {norm}"
            )));
        }
        let neg = -v;
        Ok(self.support(bounds, v)? + self.support(bounds, &neg)?)
    }
}

/// `ψ(t_k; c)` at the midpoint of every step of `grid`.
pub fn switching_function(
    sys: &LtiSystem,
    c: &DVector<f64>,
    grid: &TimeGrid,
) -> Result<Vec<DVector<f64>>> {
    ReachKernel::new(sys, grid)?.switching(c)
}

/// Extremal input for direction `c`; ties `ψ = 0` map to the upper bound.
pub fn bangbang_control(
    sys: &LtiSystem,
    bounds: &InputBox,
    c: &DVector<f64>,
    grid: &TimeGrid,
) -> Result<Vec<DVector<f64>>> {
    ReachKernel::new(sys, grid)?.bangbang(bounds, c)
}

pub fn extreme_point(
    sys: &LtiSystem,
    bounds: &InputBox,
    c: &DVector<f64>,
    grid: &TimeGrid,
) -> Result<DVector<f64>> {
    ReachKernel::new(sys, grid)?.extreme_point(bounds, c)
}

/// Length of the projection of the reachable set onto `span(v)`:
/// `h(v) + h(-v)`.
pub fn support_length(
    sys: &LtiSystem,
    bounds: &InputBox,
    v: &DVector<f64>,
    grid: &TimeGrid,
) -> Result<f64> {
    ReachKernel::new(sys, grid)?.support_length(bounds, v)
}

/// `k` unit directions, uniform on the sphere, from a seeded stream. A
/// shorter request is a prefix of a longer one with the same seed.
pub fn sample_directions(dim: usize, k: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let g = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let norm = g.norm();
        if norm > 1e-12 {
            out.push(g / norm);
        }
    }
    out
}

/// SHA-256 over the dimensions, `A`, `B` (row-major) and the input bounds.
pub fn system_fingerprint(sys: &LtiSystem, bounds: &InputBox) -> String {
    let mut h = Sha256::new();
    h.update((sys.n_states() as u64).to_le_bytes());
    h.update((sys.n_inputs() as u64).to_le_bytes());
    for m in [sys.a(), sys.b()] {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                h.update(m[(i, j)].to_le_bytes());
            }
        }
    }
    for v in bounds.lower().iter().chain(bounds.upper().iter()) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Sampled extreme points of the reachable set at the grid's final time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachSet {
    pub vertices: Vec<DVector<f64>>,
    pub directions: Vec<DVector<f64>>,
    pub horizon: TimeGrid,
    pub system_fingerprint: String,
    pub seed: u64,
}

impl ReachSet {
    pub fn volume(&self) -> HullVolume {
        hull_volume(&self.vertices)
    }

    /// Extent of the stored vertices along `v`.
    pub fn vertex_interval_length(&self, v: &DVector<f64>) -> f64 {
        let (lo, hi) = self
            .vertices
            .iter()
            .map(|x| v.dot(x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s), hi.max(s))
            });
        hi - lo
    }

    /// Largest violation of "vertex `i` maximizes `c_iᵀx` over all vertices".
    pub fn support_consistency_gap(&self) -> f64 {
        self.directions
            .iter()
            .zip(&self.vertices)
            .map(|(c, x)| {
                let own = c.dot(x);
                self.vertices
                    .iter()
                    .map(|y| c.dot(y) - own)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ReachSetFile::from(self);
        if file
            .vertices
            .iter()
            .chain(&file.directions)
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("reach set contains non-finite values"));
        }
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ReachSetFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HorizonFile {
    #[serde(serialize_with = "json::f64_17")]
    t0: f64,
    #[serde(serialize_with = "json::f64_17")]
    t_final: f64,
    n_steps: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReachSetFile {
    seed: u64,
    horizon: HorizonFile,
    #[serde(serialize_with = "json::vecs_17")]
    directions: Vec<Vec<f64>>,
    #[serde(serialize_with = "json::vecs_17")]
    vertices: Vec<Vec<f64>>,
    system_fingerprint: String,
}

impl From<&ReachSet> for ReachSetFile {
    fn from(r: &ReachSet) -> Self {
        let rows = |v: &[DVector<f64>]| v.iter().map(|x| x.iter().copied().collect()).collect();
        Self {
            seed: r.seed,
            horizon: HorizonFile {
                t0: r.horizon.t0,
                t_final: r.horizon.t_final,
                n_steps: r.horizon.n_steps,
            },
            directions: rows(&r.directions),
            vertices: rows(&r.vertices),
            system_fingerprint: r.system_fingerprint.clone(),
        }
    }
}

impl TryFrom<ReachSetFile> for ReachSet {
    type Error = Error;

    fn try_from(f: ReachSetFile) -> Result<Self> {
        let horizon = TimeGrid::new(f.horizon.t0, f.horizon.t_final, f.horizon.n_steps)?;
        if f.vertices.len() != f.directions.len() {
            return Err(Error::Format(format!(
                "{} vertices but {} directions",
                f.vertices.len(),
                f.directions.len()
            )));
        }
        let dim = f.vertices.first().map(|v| v.len()).unwrap_or(0);
        if f.vertices
            .iter()
            .chain(&f.directions)
            .any(|v| v.len() != dim || dim == 0)
        {
            return Err(Error::Format("inconsistent vector dimensions".into()));
        }
        let cols = |rows: Vec<Vec<f64>>| rows.into_iter().map(DVector::from_vec).collect();
        Ok(ReachSet {
            vertices: cols(f.vertices),
            directions: cols(f.directions),
            horizon,
            system_fingerprint: f.system_fingerprint,
            seed: f.seed,
        })
    }
}

/// Samples `k` directions and synthesizes the extreme point of each.
/// Directions are evaluated in parallel; the output order is the draw order.
pub fn sample_reach_set(
    sys: &LtiSystem,
    bounds: &InputBox,
    k: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<ReachSet> {
    if k < MIN_DIRECTIONS {
        return Err(Error::invalid(format!(
            "need at least {MIN_DIRECTIONS} directions, got {k}"
        )));
    }
    let kernel = ReachKernel::new(sys, grid)?;
    let directions = sample_directions(sys.n_states(), k, seed);
    let vertices = directions
        .par_iter()
        .map(|c| kernel.extreme_point(bounds, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReachSet {
        vertices,
        directions,
        horizon: *grid,
        system_fingerprint: system_fingerprint(sys, bounds),
        seed,
    })
}

/// True if `x` is within ℓ1 distance `tol` of the hull of the set's vertices.
pub fn contains(set: &ReachSet, x: &DVector<f64>, tol: f64) -> bool {
    match lp::l1_distance_to_hull(&set.vertices, x) {
        Some(d) => d <= tol,
        None => false,
    }
}
