//! Weighted free-support Wasserstein barycenters and uniform simplex
//! coordinates.
//!
//! The barycenter of measures `mu_i` under convex weights `lambda` minimizes
//! `sum_i lambda_i W2^2(mu_i, mu)`. For discrete free-support measures the
//! minimizer is found by a fixed-point iteration: solve a transport plan from
//! the current support to every input, then move each support point to the
//! lambda-weighted average of its barycentric projections. Each half-step is
//! a coordinate descent on the joint functional, so the recorded objective
//! trace is non-increasing.

use crate::error::{Error, Result};
use crate::measures::{sq_dist, PointCloud};
use crate::ot::{self, SinkhornParams, TransportPlan};
use rand::Rng;

/// Convex weights over the vertices of a simplex of measures.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricCoordinates {
    lambda: Vec<f64>,
}

pub const COORDINATE_SUM_TOL: f64 = 1e-12;

impl BarycentricCoordinates {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::BadCoordinates {
                reason: "no entries".into(),
            });
        }
        if lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::BadCoordinates {
                reason: "negative or non-finite entry".into(),
            });
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > COORDINATE_SUM_TOL {
            return Err(Error::BadCoordinates {
                reason: format!("entries sum to {sum}"),
            });
        }
        Ok(Self { lambda })
    }

    pub fn one_hot(m: usize, index: usize) -> Result<Self> {
        if index >= m {
            return Err(Error::BadCoordinates {
                reason: format!("one-hot index {index} out of range {m}"),
            });
        }
        let mut lambda = vec![0.0; m];
        lambda[index] = 1.0;
        Self::new(lambda)
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }

    pub fn get(&self, i: usize) -> f64 {
        self.lambda[i]
    }

    /// Index of the largest coordinate, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.lambda.iter().enumerate() {
            if l > self.lambda[best] {
                best = i;
            }
        }
        best
    }
}

/// Draw uniform barycentric coordinates on the `(m-1)`-simplex, i.e.
/// Dir(1, ..., 1), via normalized exponentials. Deterministic given the rng.
pub fn sample_dirichlet<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<BarycentricCoordinates> {
    if m == 0 {
        return Err(Error::BadCoordinates {
            reason: "m = 0".into(),
        });
    }
    let mut lambda: Vec<f64> = (0..m)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let sum: f64 = lambda.iter().sum();
    if sum > 0.0 {
        for l in &mut lambda {
            *l /= sum;
        }
    } else {
        lambda.fill(1.0 / m as f64);
    }
    BarycentricCoordinates::new(lambda)
}

/// Where the fixed-point iteration starts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// The input measure with the largest coordinate (default). Makes
    /// one-hot coordinates exact at iteration zero.
    LargestCoordinate,
    /// Pointwise lambda-weighted mean of the supports; requires all
    /// cardinalities equal to the support size.
    PointwiseMean,
    /// A caller-chosen input index.
    Input(usize),
}

#[derive(Debug, Clone)]
pub struct BarycenterParams {
    /// Support size of the output; defaults to the init measure's
    /// cardinality (the common `s` when inputs agree).
    pub support_size: Option<usize>,
    pub init: InitStrategy,
    /// Convergence threshold on support displacement, relative to the
    /// diameter of the union of input supports.
    pub tol_rel: f64,
    pub max_iter: usize,
    /// Inner solves are exact up to this cardinality, Sinkhorn beyond it.
    pub exact_cap: usize,
    pub sinkhorn: SinkhornParams,
}

impl Default for BarycenterParams {
    fn default() -> Self {
        Self {
            support_size: None,
            init: InitStrategy::LargestCoordinate,
            tol_rel: 1e-6,
            max_iter: 100,
            exact_cap: ot::DEFAULT_EXACT_CAP,
            sinkhorn: SinkhornParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub cloud: PointCloud,
    /// Final value of `sum_i lambda_i W2^2(mu_i, cloud)`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at each iterate, including the final one. Non-increasing.
    pub objective_trace: Vec<f64>,
}

fn union_diameter(measures: &[PointCloud]) -> f64 {
    let pts: Vec<[f64; 2]> = measures
        .iter()
        .flat_map(|c| c.points().iter().copied())
        .collect();
    let mut d2: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d2 = d2.max(sq_dist(pts[i], pts[j]));
        }
    }
    d2.sqrt()
}

fn init_support(
    measures: &[PointCloud],
    coords: &BarycentricCoordinates,
    params: &BarycenterParams,
) -> Result<Vec<[f64; 2]>> {
    let pick_cyclic = |idx: usize, size: usize| -> Vec<[f64; 2]> {
        let pts = measures[idx].points();
        (0..size).map(|j| pts[j % pts.len()]).collect()
    };
    match &params.init {
        InitStrategy::LargestCoordinate => {
            let idx = coords.argmax();
            let size = params.support_size.unwrap_or(measures[idx].len());
            Ok(pick_cyclic(idx, size))
        }
        InitStrategy::Input(idx) => {
            if *idx >= measures.len() {
                return Err(Error::BadParameter {
                    name: "init",
                    reason: format!("input index {idx} out of range"),
                });
            }
            let size = params.support_size.unwrap_or(measures[*idx].len());
            Ok(pick_cyclic(*idx, size))
        }
        InitStrategy::PointwiseMean => {
            let size = params.support_size.unwrap_or(measures[0].len());
            if measures.iter().any(|m| m.len() != size) {
                return Err(Error::BadParameter {
                    name: "init",
                    reason: "pointwise-mean init needs all cardinalities equal to the support size"
                        .into(),
                });
            }
            Ok((0..size)
                .map(|j| {
                    let mut p = [0.0, 0.0];
                    for (m, &l) in measures.iter().zip(coords.as_slice()) {
                        p[0] += l * m.points()[j][0];
                        p[1] += l * m.points()[j][1];
                    }
                    p
                })
                .collect())
        }
    }
}

/// One inner transport solve from the current (uniform) support to an input.
fn inner_plan(
    support: &PointCloud,
    target: &PointCloud,
    params: &BarycenterParams,
) -> Result<TransportPlan> {
    let small = support.len() <= params.exact_cap && target.len() <= params.exact_cap;
    if small {
        Ok(ot::w2_exact_capped(support, target, params.exact_cap)?.1)
    } else {
        Ok(ot::w2_sinkhorn(support, target, &params.sinkhorn)?.1)
    }
}

/// Weighted free-support Wasserstein barycenter by fixed-point iteration.
///
/// Alternates (a) transport plans from the current barycenter support to
/// every input, (b) moving each support point to the lambda-weighted average
/// of its transported images. Stops when the largest support displacement
/// falls below `tol_rel * diameter` or after `max_iter` rounds; in the latter
/// case the result is returned with `converged = false`.
pub fn free_support_barycenter(
    measures: &[PointCloud],
    coords: &BarycentricCoordinates,
    params: &BarycenterParams,
) -> Result<BarycenterResult> {
    if measures.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if measures.len() != coords.len() {
        return Err(Error::CoordinateCountMismatch {
            measures: measures.len(),
            coords: coords.len(),
        });
    }
    if params.support_size == Some(0) {
        return Err(Error::BadParameter {
            name: "support_size",
            reason: "must be >= 1".into(),
        });
    }
    let ordered = measures[0].ordered();
    let mut support = init_support(measures, coords, params)?;
    let diam = union_diameter(measures);
    let tol = if diam > 0.0 {
        params.tol_rel * diam
    } else {
        params.tol_rel
    };

    let lambda = coords.as_slice();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let current = PointCloud::uniform(support.clone(), ordered)?;
        let mut objective = 0.0;
        let mut pulled = vec![[0.0f64, 0.0f64]; support.len()];
        for (measure, &l) in measures.iter().zip(lambda) {
            let plan = inner_plan(&current, measure, params)?;
            objective += l * plan.cost;
            if l == 0.0 {
                continue;
            }
            for (j, acc) in pulled.iter_mut().enumerate() {
                let proj = plan
                    .barycentric_projection(j, measure.points())
                    .unwrap_or(support[j]);
                acc[0] += l * proj[0];
                acc[1] += l * proj[1];
            }
        }
        trace.push(objective);

        if converged || iterations >= params.max_iter {
            return Ok(BarycenterResult {
                cloud: current,
                objective,
                iterations,
                converged,
                objective_trace: trace,
            });
        }

        let displacement = support
            .iter()
            .zip(&pulled)
            .map(|(a, b)| sq_dist(*a, *b).sqrt())
            .fold(0.0f64, f64::max);
        support = pulled;
        iterations += 1;
        if displacement < tol {
            converged = true; // one more pass records the final objective
        }
    }
}

/// Closed-form barycenter for ordered uniform clouds of equal cardinality:
/// point `j` of the output is the coordinate-wise weighted mean of point `j`
/// across inputs. Matches the free-support solution whenever the identity
/// matching is optimal between all pairs.
pub fn ordered_barycenter(
    measures: &[PointCloud],
    coords: &BarycentricCoordinates,
) -> Result<PointCloud> {
    if measures.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if measures.len() != coords.len() {
        return Err(Error::CoordinateCountMismatch {
            measures: measures.len(),
            coords: coords.len(),
        });
    }
    let s = measures[0].len();
    for m in measures {
        if !m.ordered() {
            return Err(Error::UnorderedInput);
        }
        if m.len() != s {
            return Err(Error::CardinalityMismatch {
                left: s,
                right: m.len(),
            });
        }
        if !m.is_uniform() {
            return Err(Error::NonUniformWeights);
        }
    }
    let lambda = coords.as_slice();
    let points = (0..s)
        .map(|j| {
            let mut p = [0.0, 0.0];
            for (m, &l) in measures.iter().zip(lambda) {
                p[0] += l * m.points()[j][0];
                p[1] += l * m.points()[j][1];
            }
            p
        })
        .collect();
    PointCloud::uniform(points, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uc(pts: &[[f64; 2]], ordered: bool) -> PointCloud {
        PointCloud::uniform(pts.to_vec(), ordered).unwrap()
    }

    #[test]
    fn dirichlet_m1_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = sample_dirichlet(1, &mut rng).unwrap();
        assert_eq!(c.as_slice(), &[1.0]);
    }

    #[test]
    fn dirichlet_rejects_m0() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_dirichlet(0, &mut rng).is_err());
    }

    #[test]
    fn dirichlet_deterministic_given_seed() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            sample_dirichlet(4, &mut rng).unwrap()
        };
        assert_eq!(draw().as_slice(), draw().as_slice());
    }

    #[test]
    fn dirichlet_mean_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut mean = [0.0f64; 3];
        for _ in 0..n {
            let c = sample_dirichlet(3, &mut rng).unwrap();
            for (m, l) in mean.iter_mut().zip(c.as_slice()) {
                *m += l;
            }
        }
        for m in mean {
            assert!((m / n as f64 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn dirichlet_two_marginal_is_uniform() {
        // Dir(1,1) first coordinate ~ Uniform(0,1): Kolmogorov-Smirnov check
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n)
            .map(|_| sample_dirichlet(2, &mut rng).unwrap().get(0))
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let lo = (x - (i + 1) as f64 / n as f64).abs();
                let hi = (x - i as f64 / n as f64).abs();
                lo.max(hi)
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn one_hot_recovers_vertex() {
        let a = uc(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], false);
        let b = a.translate([5.0, 5.0]);
        let c = a.translate([-2.0, 3.0]);
        let measures = vec![a, b.clone(), c];
        for i in 0..3 {
            let coords = BarycentricCoordinates::one_hot(3, i).unwrap();
            let r =
                free_support_barycenter(&measures, &coords, &BarycenterParams::default()).unwrap();
            let (d, _) = crate::ot::w2_exact(&r.cloud, &measures[i]).unwrap();
            assert!(d <= 1e-9, "vertex {i}: distance {d}");
            assert!(r.converged);
        }
        let coords = BarycentricCoordinates::one_hot(3, 1).unwrap();
        let o = ordered_barycenter(
            &measures
                .iter()
                .map(|m| uc(m.points(), true))
                .collect::<Vec<_>>(),
            &coords,
        )
        .unwrap();
        assert_eq!(o.points(), b.points());
    }

    #[test]
    fn two_diracs_midpoint() {
        let a = uc(&[[0.0, 0.0]], false);
        let b = uc(&[[2.0, 0.0]], false);
        let coords = BarycentricCoordinates::new(vec![0.5, 0.5]).unwrap();
        let params = BarycenterParams {
            support_size: Some(1),
            ..Default::default()
        };
        let r = free_support_barycenter(&[a, b], &coords, &params).unwrap();
        assert!(r.converged);
        let p = r.cloud.points()[0];
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn translate_family_closed_form() {
        let base = uc(
            &[[0.0, 0.0], [1.0, 0.2], [0.3, 1.1], [2.0, 0.7], [1.5, 1.5]],
            false,
        );
        let shifts = [[0.0, 0.0], [3.0, 1.0], [-1.0, 2.0]];
        let measures: Vec<PointCloud> = shifts.iter().map(|t| base.translate(*t)).collect();
        let coords = BarycentricCoordinates::new(vec![0.2, 0.5, 0.3]).unwrap();
        let r = free_support_barycenter(&measures, &coords, &BarycenterParams::default()).unwrap();
        let expect_shift = [
            0.2 * 0.0 + 0.5 * 3.0 + 0.3 * (-1.0),
            0.2 * 0.0 + 0.5 * 1.0 + 0.3 * 2.0,
        ];
        let expected = base.translate(expect_shift);
        let (d, _) = crate::ot::w2_exact(&r.cloud, &expected).unwrap();
        assert!(d < 1e-6, "distance to closed form {d}");

        // ordered shortcut agrees with the same closed form
        let ordered: Vec<PointCloud> = measures.iter().map(|m| uc(m.points(), true)).collect();
        let o = ordered_barycenter(&ordered, &coords).unwrap();
        for (p, q) in o.points().iter().zip(expected.points()) {
            assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_trace_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let m = 2 + (rng.random::<u32>() % 3) as usize;
            let s = 2 + (rng.random::<u32>() % 4) as usize;
            let measures: Vec<PointCloud> = (0..m)
                .map(|_| {
                    uc(
                        &(0..s)
                            .map(|_| [rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0])
                            .collect::<Vec<_>>(),
                        false,
                    )
                })
                .collect();
            let coords = sample_dirichlet(m, &mut rng).unwrap();
            let r =
                free_support_barycenter(&measures, &coords, &BarycenterParams::default()).unwrap();
            for w in r.objective_trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-9,
                    "trace increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn translation_equivariance() {
        let a = uc(&[[0.0, 0.0], [1.0, 1.0]], false);
        let b = uc(&[[2.0, 0.0], [0.0, 2.0]], false);
        let coords = BarycentricCoordinates::new(vec![0.6, 0.4]).unwrap();
        let r0 = free_support_barycenter(&[a.clone(), b.clone()], &coords, &Default::default())
            .unwrap();
        let t = [10.0, -3.0];
        let r1 = free_support_barycenter(&[a.translate(t), b.translate(t)], &coords, &Default::default())
            .unwrap();
        for (p, q) in r0.cloud.points().iter().zip(r1.cloud.points()) {
            assert!((p[0] + t[0] - q[0]).abs() < 1e-9);
            assert!((p[1] + t[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn joint_permutation_invariance() {
        let a = uc(&[[0.0, 0.0], [1.0, 0.0]], false);
        let b = uc(&[[0.0, 1.0], [1.0, 1.0]], false);
        let c = uc(&[[2.0, 2.0], [3.0, 2.0]], false);
        let coords = BarycentricCoordinates::new(vec![0.5, 0.3, 0.2]).unwrap();
        let permuted = BarycentricCoordinates::new(vec![0.3, 0.2, 0.5]).unwrap();
        let r0 = free_support_barycenter(
            &[a.clone(), b.clone(), c.clone()],
            &coords,
            &Default::default(),
        )
        .unwrap();
        let r1 = free_support_barycenter(&[b, c, a], &permuted, &Default::default()).unwrap();
        let (d, _) = crate::ot::w2_exact(&r0.cloud, &r1.cloud).unwrap();
        assert!(d < 1e-12, "permutation changed the barycenter by {d}");
    }

    #[test]
    fn coordinate_count_mismatch_rejected() {
        let a = uc(&[[0.0, 0.0]], false);
        let coords = BarycentricCoordinates::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            free_support_barycenter(&[a], &coords, &Default::default()),
            Err(Error::CoordinateCountMismatch { .. })
        ));
    }

    #[test]
    fn ordered_barycenter_rejects_bad_inputs() {
        let a = uc(&[[0.0, 0.0]], false);
        let coords = BarycentricCoordinates::one_hot(1, 0).unwrap();
        assert!(matches!(
            ordered_barycenter(&[a], &coords),
            Err(Error::UnorderedInput)
        ));
        let a = uc(&[[0.0, 0.0]], true);
        let b = uc(&[[0.0, 0.0], [1.0, 1.0]], true);
        let coords = BarycentricCoordinates::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            ordered_barycenter(&[a, b], &coords),
            Err(Error::CardinalityMismatch { .. })
        ));
    }

    #[test]
    fn ordered_midpoint_of_keypoint_pairs() {
        let a = uc(&[[0.0, 0.0], [2.0, 2.0]], true);
        let b = uc(&[[1.0, 0.0], [4.0, 0.0]], true);
        let coords = BarycentricCoordinates::new(vec![0.5, 0.5]).unwrap();
        let o = ordered_barycenter(&[a, b], &coords).unwrap();
        assert_eq!(o.points(), &[[0.5, 0.0], [3.0, 1.0]]);
    }
}
