//! Dense simplex method for the hull-membership linear program
//!
//! ```text
//! minimize   Σ_j (e⁺_j + e⁻_j)
//! subject to Σ_i λ_i p_i + e⁺ - e⁻ = x,   Σ_i λ_i = 1,   λ, e⁺, e⁻ ≥ 0
//! ```
//!
//! whose optimum is the ℓ1 distance from `x` to the convex hull of the `p_i`.

use nalgebra::DVector;

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 10_000;

/// ℓ1 distance from `x` to `conv(points)`, or `None` if the simplex method
/// hit its pivot limit.
pub fn l1_distance_to_hull(points: &[DVector<f64>], x: &DVector<f64>) -> Option<f64> {
    let k = points.len();
    if k == 0 {
        return None;
    }
    let d = x.len();
    // columns: λ_0..λ_{k-1}, e⁺_0..e⁺_{d-1}, e⁻_0..e⁻_{d-1}, rhs
    let ncols = k + 2 * d + 1;
    let rhs = ncols - 1;
    let rows = d + 1;
    let mut t = vec![vec![0.0; ncols]; rows];
    let mut basis = vec![0usize; rows];

    // Row d is Σλ = 1 with λ_0 basic; rows 0..d have λ_0 eliminated.
    for j in 0..d {
        let row = &mut t[j];
        for (i, p) in points.iter().enumerate() {
            row[i] = p[j] - points[0][j];
        }
        row[k + j] = 1.0;
        row[k + d + j] = -1.0;
        row[rhs] = x[j] - points[0][j];
        if row[rhs] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            basis[j] = k + d + j;
        } else {
            basis[j] = k + j;
        }
    }
    for i in 0..k {
        t[d][i] = 1.0;
    }
    t[d][rhs] = 1.0;
    basis[d] = 0;

    let cost = |col: usize| if col >= k && col < rhs { 1.0 } else { 0.0 };

    // Reduced costs r_c = c_c - c_Bᵀ column_c.
    let mut reduced: Vec<f64> = (0..rhs)
        .map(|c| cost(c) - (0..rows).map(|r| cost(basis[r]) * t[r][c]).sum::<f64>())
        .collect();
    let mut objective: f64 = (0..rows).map(|r| cost(basis[r]) * t[r][rhs]).sum();

    let mut degenerate_run = 0usize;
    for _ in 0..MAX_PIVOTS {
        // Dantzig's rule, switching to Bland's after a long degenerate run.
        let entering = if degenerate_run < 50 {
            let (col, &rc) = reduced
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            (rc < -PIVOT_EPS).then_some(col)
        } else {
            reduced.iter().position(|&rc| rc < -PIVOT_EPS)
        };
        let Some(col) = entering else {
            return Some(objective.max(0.0));
        };

        let mut leaving = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..rows {
            let a = t[r][col];
            if a > PIVOT_EPS {
                let ratio = t[r][rhs] / a;
                let better = ratio < best_ratio - 1e-15
                    || (ratio <= best_ratio + 1e-15
                        && leaving.is_some_and(|l: usize| basis[r] < basis[l]));
                if better {
                    best_ratio = ratio;
                    leaving = Some(r);
                }
            }
        }
        // Objective is bounded below by zero, so a ray is a numerical artefact.
        let r = leaving?;
        degenerate_run = if best_ratio <= 1e-15 {
            degenerate_run + 1
        } else {
            0
        };

        let pivot = t[r][col];
        t[r].iter_mut().for_each(|v| *v /= pivot);
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r {
                let f = row[col];
                if f != 0.0 {
                    row.iter_mut()
                        .zip(&pivot_row)
                        .for_each(|(v, p)| *v -= f * p);
                }
            }
        }
        let f = reduced[col];
        reduced
            .iter_mut()
            .zip(&pivot_row)
            .for_each(|(v, p)| *v -= f * p);
        objective += f * pivot_row[rhs];
        basis[r] = col;
    }
    None
}
