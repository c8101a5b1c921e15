//! 2-Wasserstein distances between planar point clouds.
//!
//! Ground cost is squared Euclidean throughout. The exact solver is the test
//! oracle and the default for small clouds: equal-cardinality uniform pairs
//! reduce to linear assignment, everything else to an LP on the transport
//! polytope (capped). Sinkhorn is the production path for large instances.

mod assignment;
mod lp;
mod sinkhorn;

pub use assignment::solve_assignment;
pub use lp::{solve_transport, solve_uniform_quota, RawPlan};
pub use sinkhorn::{sinkhorn_plan, SinkhornOutput, SinkhornParams};

use crate::error::{Error, Result};
use crate::measures::{sq_dist, Dataset, PointCloud};
use rayon::prelude::*;

/// Default cardinality cap for the exact solver.
pub const DEFAULT_EXACT_CAP: usize = 64;

/// A coupling between two clouds with its transported squared-distance total.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    matrix: Vec<f64>,
    rows: usize,
    cols: usize,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// Barycentric projection of source atom `i` through the plan: the
    /// mass-weighted average of its transported images. `None` when the row
    /// carries no mass.
    pub fn barycentric_projection(&self, i: usize, targets: &[[f64; 2]]) -> Option<[f64; 2]> {
        let mut acc = [0.0, 0.0];
        let mut mass = 0.0;
        for (j, t) in targets.iter().enumerate() {
            let p = self.get(i, j);
            acc[0] += p * t[0];
            acc[1] += p * t[1];
            mass += p;
        }
        (mass > 0.0).then(|| [acc[0] / mass, acc[1] / mass])
    }
}

/// Squared diameter of the union of two supports. Scale reference for the
/// relative Sinkhorn regularization.
pub fn union_diameter_sq(a: &PointCloud, b: &PointCloud) -> f64 {
    let pts: Vec<[f64; 2]> = a.points().iter().chain(b.points().iter()).copied().collect();
    let mut d2: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d2 = d2.max(sq_dist(pts[i], pts[j]));
        }
    }
    d2
}

fn cost_matrix(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for p in a.points() {
        for q in b.points() {
            c.push(sq_dist(*p, *q));
        }
    }
    c
}

/// Exact 2-Wasserstein distance with the default size cap.
pub fn w2_exact(a: &PointCloud, b: &PointCloud) -> Result<(f64, TransportPlan)> {
    w2_exact_capped(a, b, DEFAULT_EXACT_CAP)
}

/// Exact 2-Wasserstein distance.
///
/// Equal-cardinality uniform pairs use the assignment fast path (an optimal
/// plan is a permutation); the general case solves the transport LP. Both
/// sides are limited to `cap` support points.
pub fn w2_exact_capped(a: &PointCloud, b: &PointCloud, cap: usize) -> Result<(f64, TransportPlan)> {
    if a.len() > cap || b.len() > cap {
        return Err(Error::ExactSizeCap {
            rows: a.len(),
            cols: b.len(),
            cap,
        });
    }
    let n = a.len();
    if n == b.len() && a.is_uniform() && b.is_uniform() {
        let cost = cost_matrix(a, b);
        let (perm, total) = solve_assignment(n, |i, j| cost[i * n + j]);
        let w = 1.0 / n as f64;
        let mut matrix = vec![0.0; n * n];
        for (i, &j) in perm.iter().enumerate() {
            matrix[i * n + j] = w;
        }
        let cost_total = total * w;
        return Ok((
            cost_total.sqrt(),
            TransportPlan {
                matrix,
                rows: n,
                cols: n,
                cost: cost_total,
                converged: true,
                iterations: n,
            },
        ));
    }
    let cost = cost_matrix(a, b);
    let plan = solve_transport(a.weights(), b.weights(), &cost)?;
    Ok((
        plan.cost.max(0.0).sqrt(),
        TransportPlan {
            matrix: plan.flow,
            rows: plan.rows,
            cols: plan.cols,
            cost: plan.cost,
            converged: true,
            iterations: plan.augmentations,
        },
    ))
}

/// Entropic 2-Wasserstein proxy: the square root of the plan cost
/// `<pi_eps, C>` on the converged regularized coupling.
pub fn w2_sinkhorn(
    a: &PointCloud,
    b: &PointCloud,
    params: &SinkhornParams,
) -> Result<(f64, TransportPlan)> {
    if params.epsilon_rel <= 0.0 || !params.epsilon_rel.is_finite() {
        return Err(Error::BadEpsilon(params.epsilon_rel));
    }
    let diam_sq = union_diameter_sq(a, b);
    if diam_sq == 0.0 {
        // all support points coincide; the transport is free
        let mut matrix = vec![0.0; a.len() * b.len()];
        for i in 0..a.len() {
            for j in 0..b.len() {
                matrix[i * b.len() + j] = a.weights()[i] * b.weights()[j];
            }
        }
        return Ok((
            0.0,
            TransportPlan {
                matrix,
                rows: a.len(),
                cols: b.len(),
                cost: 0.0,
                converged: true,
                iterations: 0,
            },
        ));
    }
    let epsilon = params.epsilon_rel * diam_sq;
    let cost = cost_matrix(a, b);
    let out = sinkhorn_plan(
        a.weights(),
        b.weights(),
        &cost,
        epsilon,
        params.max_iter,
        params.tol,
    )?;
    let mut value = out.cost;
    if params.debias {
        let self_cost = |c: &PointCloud| -> Result<f64> {
            let cm = cost_matrix(c, c);
            Ok(sinkhorn_plan(
                c.weights(),
                c.weights(),
                &cm,
                epsilon,
                params.max_iter,
                params.tol,
            )?
            .cost)
        };
        value -= 0.5 * (self_cost(a)? + self_cost(b)?);
    }
    Ok((
        value.max(0.0).sqrt(),
        TransportPlan {
            matrix: out.plan,
            rows: a.len(),
            cols: b.len(),
            cost: out.cost,
            converged: out.converged,
            iterations: out.iterations,
        },
    ))
}

/// Index-matched L2 between ordered uniform clouds of equal cardinality:
/// `sqrt(mean_j ||a_j - b_j||^2)`.
///
/// This equals the true W2 exactly when the identity matching is optimal
/// (tightly clustered annotation pairs); in general it is only an upper
/// bound, which is why it is a separate explicit call rather than a silent
/// substitution inside the solvers.
pub fn ordered_l2(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if !a.ordered() || !b.ordered() {
        return Err(Error::UnorderedInput);
    }
    if a.len() != b.len() {
        return Err(Error::CardinalityMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if !a.is_uniform() || !b.is_uniform() {
        return Err(Error::NonUniformWeights);
    }
    let total: f64 = a
        .points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| sq_dist(*p, *q))
        .sum();
    Ok((total / a.len() as f64).sqrt())
}

/// Solver selection for pairwise and downstream consumers.
#[derive(Debug, Clone, PartialEq)]
pub enum OtMethod {
    Exact { cap: usize },
    Sinkhorn(SinkhornParams),
}

impl OtMethod {
    pub fn exact() -> Self {
        OtMethod::Exact {
            cap: DEFAULT_EXACT_CAP,
        }
    }

    pub fn sinkhorn() -> Self {
        OtMethod::Sinkhorn(SinkhornParams::default())
    }

    /// Stable identifier used in cache fingerprints and reports.
    pub fn fingerprint(&self) -> String {
        match self {
            OtMethod::Exact { cap } => format!("exact-cap{cap}"),
            OtMethod::Sinkhorn(p) => format!(
                "sinkhorn-eps{:e}-it{}-tol{:e}{}",
                p.epsilon_rel,
                p.max_iter,
                p.tol,
                if p.debias { "-debiased" } else { "" }
            ),
        }
    }

    /// Distance between two clouds under this method.
    pub fn distance(&self, a: &PointCloud, b: &PointCloud) -> Result<f64> {
        match self {
            OtMethod::Exact { cap } => Ok(w2_exact_capped(a, b, *cap)?.0),
            OtMethod::Sinkhorn(p) => Ok(w2_sinkhorn(a, b, p)?.0),
        }
    }

    /// Distance and plan under this method.
    pub fn solve(&self, a: &PointCloud, b: &PointCloud) -> Result<(f64, TransportPlan)> {
        match self {
            OtMethod::Exact { cap } => w2_exact_capped(a, b, *cap),
            OtMethod::Sinkhorn(p) => w2_sinkhorn(a, b, p),
        }
    }
}

/// Symmetric pairwise W2 matrix over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    method: String,
}

impl DistanceMatrix {
    /// Validate and wrap raw values (row-major `n x n`).
    pub fn from_values(n: usize, values: Vec<f64>, method: String) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::BadMatrix {
                reason: format!("{} values for n = {n}", values.len()),
            });
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::BadMatrix {
                    reason: format!("nonzero diagonal at {i}"),
                });
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::BadMatrix {
                        reason: format!("bad entry at ({i}, {j}): {v}"),
                    });
                }
                if (v - values[j * n + i]).abs() > 1e-9 {
                    return Err(Error::BadMatrix {
                        reason: format!("asymmetry at ({i}, {j})"),
                    });
                }
            }
        }
        Ok(Self { n, values, method })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Method fingerprint recorded at construction.
    pub fn method(&self) -> &str {
        &self.method
    }
}

/// Pairwise distance matrix of Algorithm-style graph construction: entry
/// `(i, j)` is the chosen-method W2 between clouds `i` and `j`. Only `i < j`
/// is solved; results are mirrored, so the matrix is exactly symmetric and
/// identical for any parallelism.
pub fn pairwise_matrix(d: &Dataset, method: &OtMethod, parallel: bool) -> Result<DistanceMatrix> {
    let n = d.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let solve_one = |&(i, j): &(usize, usize)| -> Result<f64> {
        method
            .distance(d.cloud(i), d.cloud(j))
            .map_err(|e| Error::PairSolve {
                i,
                j,
                source: Box::new(e),
            })
    };
    let distances: Vec<f64> = if parallel {
        pairs
            .par_iter()
            .map(solve_one)
            .collect::<Result<Vec<_>>>()?
    } else {
        pairs.iter().map(solve_one).collect::<Result<Vec<_>>>()?
    };
    let mut values = vec![0.0; n * n];
    for (&(i, j), &dist) in pairs.iter().zip(&distances) {
        values[i * n + j] = dist;
        values[j * n + i] = dist;
    }
    DistanceMatrix::from_values(n, values, method.fingerprint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::PointCloud;

    fn cloud(pts: &[[f64; 2]]) -> PointCloud {
        PointCloud::uniform(pts.to_vec(), false).unwrap()
    }

    #[test]
    fn translation_distance_is_translation_norm() {
        let a = cloud(&[[0.0, 0.0], [1.0, 0.0], [0.5, 2.0]]);
        let b = a.translate([3.0, 4.0]);
        let (d, plan) = w2_exact(&a, &b).unwrap();
        assert!((d - 5.0).abs() < 1e-12, "d = {d}");
        assert!(plan.converged);
    }

    #[test]
    fn two_point_identity_matching() {
        let a = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = cloud(&[[0.0, 1.0], [1.0, 1.0]]);
        // identity matching costs 1 per point; the swap costs 2 per point
        let (d, _) = w2_exact(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn self_distance_zero() {
        let a = cloud(&[[0.3, 0.7], [2.0, -1.0], [5.0, 5.0]]);
        let (d, _) = w2_exact(&a, &a).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn unequal_cardinality_via_lp() {
        // Dirac vs two half-mass atoms at distance 1 each side
        let a = cloud(&[[0.0, 0.0]]);
        let b = cloud(&[[-1.0, 0.0], [1.0, 0.0]]);
        let (d, plan) = w2_exact(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let rows = plan.row_sums();
        assert!((rows[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_cap_is_enforced() {
        let big: Vec<[f64; 2]> = (0..65).map(|i| [i as f64, 0.0]).collect();
        let a = cloud(&big);
        assert!(matches!(
            w2_exact(&a, &a),
            Err(Error::ExactSizeCap { .. })
        ));
    }

    #[test]
    fn sinkhorn_close_to_exact_on_two_point_case() {
        let a = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = cloud(&[[0.0, 1.0], [1.0, 1.0]]);
        let (d, plan) = w2_sinkhorn(&a, &b, &SinkhornParams::default()).unwrap();
        assert!(plan.converged);
        assert!((d - 1.0).abs() / 1.0 < 0.05, "d = {d}");
    }

    #[test]
    fn sinkhorn_self_distance_small_and_near_diagonal() {
        let a = cloud(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let (d, plan) = w2_sinkhorn(&a, &a, &SinkhornParams::default()).unwrap();
        // bias bound: cost <= eps * log-ish factor; generous envelope
        let eps = 1e-2 * union_diameter_sq(&a, &a);
        assert!(d * d <= 10.0 * eps, "d^2 = {} vs eps {eps}", d * d);
        for i in 0..3 {
            let diag = plan.get(i, i);
            for j in 0..3 {
                if i != j {
                    assert!(diag > plan.get(i, j));
                }
            }
        }
    }

    #[test]
    fn sinkhorn_gap_shrinks_with_epsilon() {
        let a = cloud(&[[0.0, 0.0], [1.3, 0.2], [0.4, 0.9], [2.0, 1.1]]);
        let b = cloud(&[[0.1, 0.2], [1.0, 0.0], [0.3, 1.2], [1.8, 0.8]]);
        let (exact, _) = w2_exact(&a, &b).unwrap();
        let mut gaps = Vec::new();
        for eps in [1e-1, 1e-2, 1e-3] {
            let (d, _) = w2_sinkhorn(&a, &b, &SinkhornParams::with_epsilon_rel(eps)).unwrap();
            gaps.push((d - exact).abs());
        }
        assert!(gaps[0] >= gaps[1] - 1e-12 && gaps[1] >= gaps[2] - 1e-12, "gaps = {gaps:?}");
    }

    #[test]
    fn identical_clouds_coincident_support() {
        let a = cloud(&[[2.0, 2.0], [2.0, 2.0]]);
        let (d, plan) = w2_sinkhorn(&a, &a, &SinkhornParams::default()).unwrap();
        assert_eq!(d, 0.0);
        assert!(plan.converged);
    }

    #[test]
    fn pairwise_identical_clouds_all_zero() {
        let c = cloud(&[[0.0, 0.0], [1.0, 1.0]]);
        let d = Dataset::new(vec![c.clone(), c.clone(), c]).unwrap();
        let m = pairwise_matrix(&d, &OtMethod::exact(), false).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pairwise_translation_pair() {
        let a = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = a.translate([3.0, 4.0]);
        let d = Dataset::new(vec![a, b]).unwrap();
        let m = pairwise_matrix(&d, &OtMethod::exact(), true).unwrap();
        assert!((m.get(0, 1) - 5.0).abs() < 1e-12);
        assert!((m.get(1, 0) - 5.0).abs() < 1e-12);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn pairwise_parallel_matches_sequential() {
        let clouds: Vec<PointCloud> = (0..6)
            .map(|i| {
                cloud(&[
                    [i as f64, 0.0],
                    [0.0, (i * i) as f64 * 0.1],
                    [1.0 + i as f64 * 0.3, 2.0],
                ])
            })
            .collect();
        let d = Dataset::new(clouds).unwrap();
        let seq = pairwise_matrix(&d, &OtMethod::exact(), false).unwrap();
        let par = pairwise_matrix(&d, &OtMethod::exact(), true).unwrap();
        assert_eq!(seq.values(), par.values());
    }

    #[test]
    fn pairwise_error_names_pair() {
        let small = cloud(&[[0.0, 0.0]]);
        let big: Vec<[f64; 2]> = (0..65).map(|i| [i as f64, 0.0]).collect();
        let d = Dataset::new(vec![small, cloud(&big)]).unwrap();
        match pairwise_matrix(&d, &OtMethod::exact(), false) {
            Err(Error::PairSolve { i: 0, j: 1, .. }) => {}
            other => panic!("expected PairSolve, got {other:?}"),
        }
    }

    #[test]
    fn ordered_l2_bounds_w2_and_matches_on_identity() {
        let a = PointCloud::uniform(vec![[0.0, 0.0], [5.0, 0.0]], true).unwrap();
        let b = PointCloud::uniform(vec![[0.1, 0.1], [5.1, 0.2]], true).unwrap();
        let l2 = ordered_l2(&a, &b).unwrap();
        let (w2, _) = w2_exact(&a, &b).unwrap();
        assert!((l2 - w2).abs() < 1e-12, "identity matching is optimal here");

        // swapped labels: L2 sees the permutation, W2 does not
        let swapped = PointCloud::uniform(vec![[5.0, 0.0], [0.0, 0.0]], true).unwrap();
        let l2 = ordered_l2(&a, &swapped).unwrap();
        let (w2, _) = w2_exact(&a, &swapped).unwrap();
        assert_eq!(w2, 0.0);
        assert!(l2 > 4.9);

        let unordered = PointCloud::uniform(vec![[0.0, 0.0], [5.0, 0.0]], false).unwrap();
        assert!(matches!(
            ordered_l2(&unordered, &unordered),
            Err(Error::UnorderedInput)
        ));
    }

    #[test]
    fn mean_displacement_lower_bound() {
        let a = cloud(&[[0.0, 0.0], [2.0, 1.0], [4.0, -1.0]]);
        let b = cloud(&[[1.0, 3.0], [5.0, 2.0], [2.0, 6.0]]);
        let (d, _) = w2_exact(&a, &b).unwrap();
        let ma = a.mean();
        let mb = b.mean();
        let shift = sq_dist(ma, mb).sqrt();
        assert!(d >= shift - 1e-12);
    }

    #[test]
    fn scaling_covariance() {
        let a = cloud(&[[0.0, 0.0], [1.0, 2.0], [3.0, 1.0]]);
        let b = cloud(&[[0.5, 0.5], [2.0, 2.0], [1.0, 0.0]]);
        let (d, _) = w2_exact(&a, &b).unwrap();
        let c = 3.7;
        let scale = |c0: &PointCloud, f: f64| {
            PointCloud::uniform(
                c0.points().iter().map(|p| [p[0] * f, p[1] * f]).collect(),
                false,
            )
            .unwrap()
        };
        let (ds, _) = w2_exact(&scale(&a, c), &scale(&b, c)).unwrap();
        assert!((ds - c * d).abs() <= 1e-9 * (c * d));
    }
}
