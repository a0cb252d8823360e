//! Convex hulls and exact hull volumes in `d` dimensions.
//!
//! The hull is built incrementally: an initial simplex, then every remaining
//! point (farthest from the simplex centroid first) replaces the facets it
//! sees with a cone over the horizon ridges. The volume is the sum of the
//! simplices spanned by each facet and the interior point.
//!
//! Coordinates are first mapped affinely onto `[-1, 1]^d` so the coplanarity
//! tolerance does not depend on per-axis units; the volume is rescaled at the
//! end.

use std::collections::HashMap;

use nalgebra::DVector;

/// Relative coplanarity tolerance in normalized coordinates.
const PLANE_EPS: f64 = 1e-10;

/// Why a point set has zero hull volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateHull {
    /// Fewer than `d + 1` points.
    TooFewPoints { points: usize, dim: usize },
    /// Points span an affine subspace of dimension `rank < d`.
    RankDeficient { rank: usize, dim: usize },
}

impl std::fmt::Display for DegenerateHull {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DegenerateHull::TooFewPoints { points, dim } => {
                write!(f, "{points} points cannot span a {dim}-dimensional hull")
            }
            DegenerateHull::RankDeficient { rank, dim } => {
                write!(f, "points span only {rank} of {dim} dimensions")
            }
        }
    }
}

/// Hull volume together with the degeneracy flag, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullVolume {
    pub volume: f64,
    pub warning: Option<DegenerateHull>,
}

#[derive(Debug, Clone)]
struct Facet {
    verts: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
    alive: bool,
}

impl Facet {
    fn distance(&self, p: &[f64]) -> f64 {
        dot(&self.normal, p) - self.offset
    }
}

/// Convex hull of a point cloud, stored as simplicial facets.
#[derive(Debug, Clone)]
pub struct ConvexHull {
    dim: usize,
    /// Normalized coordinates.
    points: Vec<Vec<f64>>,
    center: Vec<f64>,
    half_width: Vec<f64>,
    interior: Vec<f64>,
    facets: Vec<Facet>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Determinant by Gaussian elimination with partial pivoting; consumes `m`.
fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for k in col..n {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
    }
    det
}

/// Vector orthogonal to the `d - 1` rows, by cofactor expansion.
fn generalized_cross(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|skip| {
            let minor: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|&(j, _)| j != skip)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            let sign = if skip % 2 == 0 { 1.0 } else { -1.0 };
            sign * determinant(minor)
        })
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl ConvexHull {
    /// Builds the hull, or reports why the point set is degenerate.
    pub fn new(points: &[DVector<f64>]) -> Result<Self, DegenerateHull> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        assert!(
            points.iter().all(|p| p.len() == dim),
            "hull points must share one dimension"
        );
        if dim < 2 || points.len() < dim + 1 {
            return Err(DegenerateHull::TooFewPoints {
                points: points.len(),
                dim,
            });
        }

        let mut center = vec![0.0; dim];
        let mut half_width = vec![0.0; dim];
        for j in 0..dim {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[j]), hi.max(p[j]))
                });
            center[j] = 0.5 * (lo + hi);
            half_width[j] = 0.5 * (hi - lo);
        }
        let flat_axes = half_width.iter().filter(|&&w| w <= 0.0).count();
        if flat_axes > 0 {
            return Err(DegenerateHull::RankDeficient {
                rank: dim - flat_axes,
                dim,
            });
        }
        let normalized: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                (0..dim)
                    .map(|j| (p[j] - center[j]) / half_width[j])
                    .collect()
            })
            .collect();

        let simplex = initial_simplex(&normalized, dim)?;
        let interior: Vec<f64> = (0..dim)
            .map(|j| simplex.iter().map(|&i| normalized[i][j]).sum::<f64>() / (dim + 1) as f64)
            .collect();

        let mut hull = ConvexHull {
            dim,
            points: normalized,
            center,
            half_width,
            interior,
            facets: Vec::new(),
        };
        for skip in 0..=dim {
            let verts: Vec<usize> = simplex
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip)
                .map(|(_, &i)| i)
                .collect();
            let facet = hull.make_facet(verts);
            hull.facets.push(facet);
        }

        // Farthest points first so interior points are discarded early.
        let mut order: Vec<usize> = (0..hull.points.len())
            .filter(|i| !simplex.contains(i))
            .collect();
        let dist2: Vec<f64> = hull
            .points
            .iter()
            .map(|p| {
                let d = sub(p, &hull.interior);
                dot(&d, &d)
            })
            .collect();
        order.sort_by(|&a, &b| dist2[b].total_cmp(&dist2[a]).then(a.cmp(&b)));

        for idx in order {
            hull.insert(idx);
        }
        Ok(hull)
    }

    fn make_facet(&self, mut verts: Vec<usize>) -> Facet {
        verts.sort_unstable();
        let base = &self.points[verts[0]];
        let rows: Vec<Vec<f64>> = verts[1..]
            .iter()
            .map(|&i| sub(&self.points[i], base))
            .collect();
        let mut normal = generalized_cross(&rows, self.dim);
        let norm = dot(&normal, &normal).sqrt();
        if norm > 0.0 {
            normal.iter_mut().for_each(|v| *v /= norm);
        }
        let mut offset = dot(&normal, base);
        if dot(&normal, &self.interior) > offset {
            normal.iter_mut().for_each(|v| *v = -*v);
            offset = -offset;
        }
        Facet {
            verts,
            normal,
            offset,
            alive: true,
        }
    }

    fn insert(&mut self, idx: usize) {
        let p = self.points[idx].clone();
        let visible: Vec<usize> = self
            .facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && f.distance(&p) > PLANE_EPS)
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            return;
        }

        // Ridges seen once among the visible facets form the horizon.
        let mut ridges: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut ridge_order: Vec<Vec<usize>> = Vec::new();
        for &fi in &visible {
            let verts = &self.facets[fi].verts;
            for skip in 0..verts.len() {
                let ridge: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                let count = ridges.entry(ridge.clone()).or_insert(0);
                if *count == 0 {
                    ridge_order.push(ridge);
                }
                *count += 1;
            }
        }
        for &fi in &visible {
            self.facets[fi].alive = false;
        }
        for ridge in ridge_order {
            if ridges[&ridge] == 1 {
                let mut verts = ridge;
                verts.push(idx);
                let facet = self.make_facet(verts);
                self.facets.push(facet);
            }
        }
        if self.facets.len() > 4 * self.facets.iter().filter(|f| f.alive).count() + 64 {
            self.facets.retain(|f| f.alive);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.alive).count()
    }

    /// Indices of input points that are hull vertices.
    pub fn vertex_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .facets
            .iter()
            .filter(|f| f.alive)
            .flat_map(|f| f.verts.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Euclidean volume in the original coordinates.
    pub fn volume(&self) -> f64 {
        let normalized: f64 = self
            .facets
            .iter()
            .filter(|f| f.alive)
            .map(|f| {
                let rows: Vec<Vec<f64>> = f
                    .verts
                    .iter()
                    .map(|&i| sub(&self.points[i], &self.interior))
                    .collect();
                determinant(rows).abs()
            })
            .sum::<f64>()
            / factorial(self.dim);
        normalized * self.half_width.iter().product::<f64>()
    }

    /// True when `x` lies inside every facet half-space (up to `tol`, in
    /// original units along each normal).
    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        let p: Vec<f64> = (0..self.dim)
            .map(|j| (x[j] - self.center[j]) / self.half_width[j])
            .collect();
        self.facets.iter().filter(|f| f.alive).all(|f| {
            // Distance in normalized units, converted back by the normal's
            // stretch factor.
            let stretch = f
                .normal
                .iter()
                .zip(&self.half_width)
                .map(|(n, w)| (n / w).powi(2))
                .sum::<f64>()
                .sqrt();
            f.distance(&p) / stretch <= tol
        })
    }
}

fn initial_simplex(points: &[Vec<f64>], dim: usize) -> Result<Vec<usize>, DegenerateHull> {
    let first = (0..points.len())
        .min_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)))
        .unwrap();
    let mut chosen = vec![first];
    // Orthonormal basis of the affine span of the chosen points.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let origin = points[first].clone();
    while chosen.len() < dim + 1 {
        let mut best = None;
        let mut best_norm = 0.0;
        let mut best_resid = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let mut r = sub(p, &origin);
            for e in &basis {
                let c = dot(&r, e);
                r.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
            }
            let n = dot(&r, &r).sqrt();
            if n > best_norm {
                best_norm = n;
                best = Some(i);
                best_resid = r;
            }
        }
        match best {
            Some(i) if best_norm > 1e-9 => {
                best_resid.iter_mut().for_each(|x| *x /= best_norm);
                basis.push(best_resid);
                chosen.push(i);
            }
            _ => {
                return Err(DegenerateHull::RankDeficient {
                    rank: chosen.len() - 1,
                    dim,
                })
            }
        }
    }
    Ok(chosen)
}

/// Volume of the convex hull of `points`; zero (with a warning) for
/// degenerate sets.
pub fn hull_volume(points: &[DVector<f64>]) -> HullVolume {
    if let Some(p) = points.first() {
        if p.len() == 1 && points.len() >= 2 {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[0]), hi.max(p[0]))
                });
            return HullVolume {
                volume: hi - lo,
                warning: None,
            };
        }
    }
    match ConvexHull::new(points) {
        Ok(hull) => HullVolume {
            volume: hull.volume(),
            warning: None,
        },
        Err(reason) => {
            log::warn!("degenerate hull, volume set to 0: {reason}");
            HullVolume {
                volume: 0.0,
                warning: Some(reason),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn cube_vertices(dim: usize) -> Vec<DVector<f64>> {
        (0..1usize << dim)
            .map(|mask| DVector::from_fn(dim, |j, _| ((mask >> j) & 1) as f64))
            .collect()
    }

    #[test]
    fn unit_hypercube() {
        let h = hull_volume(&cube_vertices(4));
        assert!(h.warning.is_none());
        assert!((h.volume - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cross_polytope() {
        let mut pts = Vec::new();
        for j in 0..4 {
            let mut p = DVector::zeros(4);
            p[j] = 1.0;
            pts.push(p.clone());
            pts.push(-p);
        }
        let h = hull_volume(&pts);
        assert!((h.volume - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn lower_dimensions() {
        assert!((hull_volume(&cube_vertices(2)).volume - 1.0).abs() < 1e-12);
        assert!((hull_volume(&cube_vertices(3)).volume - 1.0).abs() < 1e-12);
        let seg = hull_volume(&[v(&[-1.0]), v(&[0.2]), v(&[3.0])]);
        assert_eq!(seg.volume, 4.0);
    }

    #[test]
    fn scaled_box_volume() {
        let pts: Vec<_> = cube_vertices(4)
            .into_iter()
            .map(|p| DVector::from_fn(4, |j, _| p[j] * [20.0, 0.05, 0.3, 0.1][j]))
            .collect();
        let h = hull_volume(&pts);
        assert_relative_eq!(h.volume, 20.0 * 0.05 * 0.3 * 0.1, max_relative = 1e-10);
    }

    #[test]
    fn simplex_volume() {
        let mut pts = vec![DVector::zeros(4)];
        for j in 0..4 {
            let mut p = DVector::zeros(4);
            p[j] = 2.0;
            pts.push(p);
        }
        assert_relative_eq!(hull_volume(&pts).volume, 16.0 / 24.0, max_relative = 1e-12);
    }

    #[test]
    fn too_few_points_is_flagged() {
        let pts = vec![v(&[0.0, 0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0, 0.0])];
        let h = hull_volume(&pts);
        assert_eq!(h.volume, 0.0);
        assert!(matches!(
            h.warning,
            Some(DegenerateHull::TooFewPoints { .. })
        ));
    }

    #[test]
    fn rank_deficient_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // all points in the hyperplane x0 + x1 + x2 + x3 = 1
        let pts: Vec<_> = (0..40)
            .map(|_| {
                let mut p = DVector::from_fn(4, |_, _| rng.random_range(0.0..1.0));
                p[3] = 1.0 - p[0] - p[1] - p[2];
                p
            })
            .collect();
        let h = hull_volume(&pts);
        assert_eq!(h.volume, 0.0);
        assert!(matches!(
            h.warning,
            Some(DegenerateHull::RankDeficient { rank: 3, dim: 4 })
        ));
    }

    #[test]
    fn interior_points_do_not_change_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts = cube_vertices(4);
        for _ in 0..200 {
            pts.push(DVector::from_fn(4, |_, _| rng.random_range(0.01..0.99)));
        }
        let hull = ConvexHull::new(&pts).unwrap();
        assert!((hull.volume() - 1.0).abs() < 1e-9);
        assert_eq!(hull.vertex_indices(), (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn order_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pts: Vec<_> = (0..150)
            .map(|_| DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let base = hull_volume(&pts).volume;
        for _ in 0..5 {
            pts.shuffle(&mut rng);
            assert_relative_eq!(hull_volume(&pts).volume, base, max_relative = 1e-12);
        }
    }

    #[test]
    fn contains_point_matches_geometry() {
        let hull = ConvexHull::new(&cube_vertices(4)).unwrap();
        assert!(hull.contains_point(&v(&[0.5, 0.5, 0.5, 0.5]), 1e-12));
        assert!(hull.contains_point(&v(&[1.0, 0.0, 0.3, 0.9]), 1e-12));
        assert!(!hull.contains_point(&v(&[1.1, 0.5, 0.5, 0.5]), 1e-6));
    }
}
