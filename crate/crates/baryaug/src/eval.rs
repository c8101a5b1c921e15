//! Quality metrics over sets of clouds and the covering-bound verifier.
//!
//! `meta_w2` is a nested optimal transport: the ground metric between set
//! elements is itself the pairwise W2 between clouds, and the set-level
//! problem is solved exactly on the squared ground costs. `knn_kl` is the
//! k-nearest-neighbor divergence estimator evaluated in the same metric
//! space. `verify_covering_bound` Monte-Carlo-checks that the W2 distance
//! between the uniform barycentric measure of a simplex and the discrete
//! uniform measure on its vertices stays below `(1/2k) * sum r_i^2`.

use crate::barycenter::{free_support_barycenter, sample_dirichlet, BarycenterParams};
use crate::error::{Error, Result};
use crate::measures::{Dataset, PointCloud};
use crate::ot::{solve_transport, solve_uniform_quota, OtMethod};
use crate::sampler::substream;
use rayon::prelude::*;
use serde::Serialize;

/// Upper limit per side for the set-level LP when no fast path applies.
const META_LP_CAP: usize = 2048;

/// Summary emitted by the CLI `eval` command.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub meta_w2: f64,
    pub kl_estimate: Option<f64>,
    pub size_a: usize,
    pub size_b: usize,
    /// Cloud-level solver fingerprint.
    pub ground_method: String,
    /// kNN divergence parameters, when computed.
    pub kl_k: Option<usize>,
    pub kl_dim_eff: Option<f64>,
}

/// Squared cloud-level distances between all pairs of the two sets.
fn ground_costs_sq(a: &Dataset, b: &Dataset, ground: &OtMethod) -> Result<Vec<f64>> {
    let (na, nb) = (a.len(), b.len());
    (0..na * nb)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / nb, idx % nb);
            ground
                .distance(a.cloud(i), b.cloud(j))
                .map(|d| d * d)
                .map_err(|e| Error::PairSolve {
                    i,
                    j,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// 2-Wasserstein distance between the uniform empirical measures over two
/// sets of clouds, with pairwise W2 as the ground metric.
///
/// Equal-size sets reduce to linear assignment; when one size divides the
/// other the quota solver applies; anything else goes through the transport
/// LP (capped at 2048 per side).
pub fn meta_w2(a: &Dataset, b: &Dataset, ground: &OtMethod) -> Result<f64> {
    let (na, nb) = (a.len(), b.len());
    let costs = ground_costs_sq(a, b, ground)?;
    let value = if na == nb {
        let (_, total) = crate::ot::solve_assignment(na, |i, j| costs[i * nb + j]);
        total / na as f64
    } else if na > nb && na % nb == 0 {
        solve_uniform_quota(na, nb, &costs)?.1
    } else if nb > na && nb % na == 0 {
        let mut t = vec![0.0; na * nb];
        for i in 0..na {
            for j in 0..nb {
                t[j * na + i] = costs[i * nb + j];
            }
        }
        solve_uniform_quota(nb, na, &t)?.1
    } else {
        if na > META_LP_CAP || nb > META_LP_CAP {
            return Err(Error::ExactSizeCap {
                rows: na,
                cols: nb,
                cap: META_LP_CAP,
            });
        }
        let wa = vec![1.0 / na as f64; na];
        let wb = vec![1.0 / nb as f64; nb];
        solve_transport(&wa, &wb, &costs)?.cost
    };
    Ok(value.max(0.0).sqrt())
}

/// k-nearest-neighbor KL divergence estimate between the distributions
/// underlying two sets of clouds, evaluated in the W2 metric space:
///
/// `KL ~= (dim_eff / |A|) * sum_a ln(s_k(a) / r_k(a)) + ln(|B| / (|A| - 1))`
///
/// where `r_k` is the k-th NN distance within A and `s_k` the k-th NN
/// distance from A to B. `dim_eff` defaults to twice the cloud cardinality
/// (the ambient coordinate count). The estimator may be negative.
pub fn knn_kl(
    a: &Dataset,
    b: &Dataset,
    k: usize,
    dim_eff: Option<f64>,
    ground: &OtMethod,
) -> Result<f64> {
    let (na, nb) = (a.len(), b.len());
    if k == 0 || na <= k || nb < k {
        return Err(Error::SetTooSmall {
            k,
            size_a: na,
            size_b: nb,
        });
    }
    let dim = dim_eff.unwrap_or(2.0 * a.cloud(0).len() as f64);

    let within = crate::ot::pairwise_matrix(a, ground, true)?;
    let cross = ground_costs_sq(a, b, ground)?;

    // distances can vanish on duplicate clouds; floor keeps logs finite
    let floor = 1e-12 * (a.diameter() + 1.0);
    let kth = |mut d: Vec<f64>| -> f64 {
        d.sort_by(|x, y| x.partial_cmp(y).unwrap());
        d[k - 1].max(floor)
    };

    let mut log_sum = 0.0;
    for i in 0..na {
        let r: Vec<f64> = (0..na).filter(|&j| j != i).map(|j| within.get(i, j)).collect();
        let s: Vec<f64> = (0..nb).map(|j| cross[i * nb + j].sqrt()).collect();
        log_sum += (kth(s) / kth(r)).ln();
    }
    Ok(dim / na as f64 * log_sum + (nb as f64 / (na as f64 - 1.0)).ln())
}

/// Outcome of the covering-bound check.
#[derive(Debug, Clone, Serialize)]
pub struct CoveringCheck {
    /// `(1/2k) * sum_i r_i^2` with `r_i = W2(vertex_i, interior)`.
    pub bound: f64,
    /// Monte-Carlo estimate of `W2^2` between the uniform barycentric
    /// measure of the simplex and the discrete uniform vertex measure.
    pub mc_estimate: f64,
    pub std_error: f64,
    /// `mc_estimate <= bound + 3 * std_error`.
    pub holds: bool,
    /// Actual draws used (requested count rounded up to fill batches).
    pub n_draws: usize,
}

const MC_BATCHES: usize = 20;

/// Monte-Carlo verification that barycentric samples stay within the
/// root-mean-square radius envelope of their simplex.
///
/// The uniform measure over the simplex is realized by Dir(1, ..., 1)
/// barycenters — exactly the sampler's output distribution. The estimate is
/// the mean over batches of the exact empirical OT to the vertex measure;
/// the margin is three standard errors of the batch means.
pub fn verify_covering_bound(
    vertices: &[PointCloud],
    interior: &PointCloud,
    n_mc: usize,
    seed: u64,
) -> Result<CoveringCheck> {
    if vertices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_mc == 0 {
        return Err(Error::EmptySampleRequest);
    }
    let k = vertices.len();
    let exact = OtMethod::exact();

    let radii_sq: Vec<f64> = vertices
        .iter()
        .map(|v| exact.distance(v, interior).map(|d| d * d))
        .collect::<Result<_>>()?;
    let bound = radii_sq.iter().sum::<f64>() / (2.0 * k as f64);

    // batch size a multiple of k so the quota fast path stays exact
    let per_batch = n_mc.div_ceil(MC_BATCHES * k).max(1) * k;
    let n_draws = per_batch * MC_BATCHES;

    let params = BarycenterParams::default();
    let batch_values: Vec<f64> = (0..MC_BATCHES)
        .into_par_iter()
        .map(|batch| -> Result<f64> {
            let mut costs = vec![0.0; per_batch * k];
            for t in 0..per_batch {
                let draw = (batch * per_batch + t) as u64;
                let mut rng = substream(seed, draw);
                let lambda = sample_dirichlet(k, &mut rng)?;
                let sample = free_support_barycenter(vertices, &lambda, &params)?.cloud;
                for (j, v) in vertices.iter().enumerate() {
                    let d = exact.distance(&sample, v)?;
                    costs[t * k + j] = d * d;
                }
            }
            Ok(solve_uniform_quota(per_batch, k, &costs)?.1)
        })
        .collect::<Result<_>>()?;

    let mean = batch_values.iter().sum::<f64>() / MC_BATCHES as f64;
    let var = batch_values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (MC_BATCHES as f64 - 1.0);
    let std_error = (var / MC_BATCHES as f64).sqrt();

    Ok(CoveringCheck {
        bound,
        mc_estimate: mean,
        std_error,
        holds: mean <= bound + 3.0 * std_error,
        n_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uc(pts: &[[f64; 2]]) -> PointCloud {
        PointCloud::uniform(pts.to_vec(), false).unwrap()
    }

    #[test]
    fn meta_w2_self_is_zero() {
        let d = Dataset::new(vec![
            uc(&[[0.0, 0.0], [1.0, 0.0]]),
            uc(&[[0.0, 1.0], [1.0, 1.0]]),
        ])
        .unwrap();
        let v = meta_w2(&d, &d, &OtMethod::exact()).unwrap();
        assert!(v.abs() < 1e-12, "meta_w2(A, A) = {v}");
    }

    #[test]
    fn singletons_reduce_to_cloud_distance() {
        let c = uc(&[[0.0, 0.0], [1.0, 0.0]]);
        let a = Dataset::new(vec![c.clone()]).unwrap();
        let b = Dataset::new(vec![c.translate([3.0, 4.0])]).unwrap();
        let v = meta_w2(&a, &b, &OtMethod::exact()).unwrap();
        assert!((v - 5.0).abs() < 1e-12, "meta = {v}");
    }

    #[test]
    fn equal_size_assignment_matches_lp() {
        let mut state = 0xabcdef12345u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mk = |next: &mut dyn FnMut() -> f64| {
            uc(&[
                [next() * 3.0, next() * 3.0],
                [next() * 3.0, next() * 3.0],
                [next() * 3.0, next() * 3.0],
            ])
        };
        let a = Dataset::new((0..10).map(|_| mk(&mut next)).collect()).unwrap();
        let b = Dataset::new((0..10).map(|_| mk(&mut next)).collect()).unwrap();
        let ground = OtMethod::exact();
        let via_assignment = meta_w2(&a, &b, &ground).unwrap();
        // force the LP path through raw costs
        let costs = ground_costs_sq(&a, &b, &ground).unwrap();
        let w = vec![0.1; 10];
        let via_lp = solve_transport(&w, &w, &costs).unwrap().cost.sqrt();
        assert!(
            (via_assignment - via_lp).abs() < 1e-9,
            "{via_assignment} vs {via_lp}"
        );
    }

    #[test]
    fn divisible_sizes_use_quota_and_agree_with_lp() {
        let mut state = 0x77777777u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mk = |next: &mut dyn FnMut() -> f64| {
            uc(&[[next() * 2.0, next() * 2.0], [next() * 2.0, next() * 2.0]])
        };
        let a = Dataset::new((0..8).map(|_| mk(&mut next)).collect()).unwrap();
        let b = Dataset::new((0..4).map(|_| mk(&mut next)).collect()).unwrap();
        let ground = OtMethod::exact();
        let fast = meta_w2(&a, &b, &ground).unwrap();
        let costs = ground_costs_sq(&a, &b, &ground).unwrap();
        let lp = solve_transport(&vec![1.0 / 8.0; 8], &vec![0.25; 4], &costs)
            .unwrap()
            .cost
            .max(0.0)
            .sqrt();
        assert!((fast - lp).abs() < 1e-9, "{fast} vs {lp}");
    }

    #[test]
    fn knn_kl_rejects_small_sets() {
        let d = Dataset::new(vec![uc(&[[0.0, 0.0]]), uc(&[[1.0, 0.0]])]).unwrap();
        assert!(matches!(
            knn_kl(&d, &d, 2, None, &OtMethod::exact()),
            Err(Error::SetTooSmall { .. })
        ));
    }

    #[test]
    fn knn_kl_orders_shifted_sets() {
        let mut state = 0x13572468u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mk = |next: &mut dyn FnMut() -> f64, shift: f64| {
            uc(&[
                [next() + shift, next()],
                [next() + shift, next()],
            ])
        };
        let a = Dataset::new((0..40).map(|_| mk(&mut next, 0.0)).collect()).unwrap();
        let matched = Dataset::new((0..40).map(|_| mk(&mut next, 0.0)).collect()).unwrap();
        let shifted = Dataset::new((0..40).map(|_| mk(&mut next, 50.0)).collect()).unwrap();
        let ground = OtMethod::exact();
        let kl_matched = knn_kl(&a, &matched, 3, None, &ground).unwrap();
        let kl_shifted = knn_kl(&a, &shifted, 3, None, &ground).unwrap();
        assert!(
            kl_shifted > kl_matched + 1.0,
            "matched {kl_matched}, shifted {kl_shifted}"
        );
    }

    #[test]
    fn covering_single_vertex_trivial() {
        let v = uc(&[[1.0, 2.0]]);
        let check = verify_covering_bound(&[v.clone()], &v, 100, 3).unwrap();
        assert_eq!(check.bound, 0.0);
        assert!(check.mc_estimate.abs() < 1e-18);
        assert!(check.holds);
    }

    #[test]
    fn covering_two_diracs_matches_segment_oracle() {
        // Uniform on a segment of length d vs endpoints: W2^2 = d^2/12 by
        // direct integration; the bound is d^2/8.
        let d = 2.0_f64;
        let a = uc(&[[0.0, 0.0]]);
        let b = uc(&[[d, 0.0]]);
        let mid = uc(&[[d / 2.0, 0.0]]);
        let check = verify_covering_bound(&[a, b], &mid, 4000, 17).unwrap();
        assert!((check.bound - d * d / 8.0).abs() < 1e-12);
        let oracle = d * d / 12.0;
        assert!(
            (check.mc_estimate - oracle).abs() < 0.02 * oracle + 3.0 * check.std_error,
            "estimate {} vs oracle {oracle}",
            check.mc_estimate
        );
        assert!(check.holds);
    }

    #[test]
    fn covering_triangle_matches_grid_oracle() {
        // Equilateral triangle of Diracs: uniform-on-hull equals the
        // Dirichlet barycenter distribution, and by symmetry the exact OT to
        // the corners is the nearest-corner quadrature.
        let corners = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        let verts: Vec<PointCloud> = corners.iter().map(|c| uc(&[*c])).collect();
        let centroid = uc(&[[
            (corners[0][0] + corners[1][0] + corners[2][0]) / 3.0,
            (corners[0][1] + corners[1][1] + corners[2][1]) / 3.0,
        ]]);

        // quadrature over a barycentric grid of subtriangle centroids
        let m = 120;
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..m {
            for j in 0..(m - i) {
                for &(di, dj, w) in &[(1.0 / 3.0, 1.0 / 3.0, 1.0), (2.0 / 3.0, 2.0 / 3.0, 0.0)] {
                    // upward subtriangle centroid, then the inverted one if any
                    let exists = if w == 1.0 { true } else { j + 1 < m - i };
                    if !exists {
                        continue;
                    }
                    let l1 = (i as f64 + di) / m as f64;
                    let l2 = (j as f64 + dj) / m as f64;
                    let l0 = 1.0 - l1 - l2;
                    let p = [
                        l0 * corners[0][0] + l1 * corners[1][0] + l2 * corners[2][0],
                        l0 * corners[0][1] + l1 * corners[1][1] + l2 * corners[2][1],
                    ];
                    let best = corners
                        .iter()
                        .map(|c| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2))
                        .fold(f64::INFINITY, f64::min);
                    acc += best;
                    count += 1;
                }
            }
        }
        let oracle = acc / count as f64;

        let check = verify_covering_bound(&verts, &centroid, 6000, 23).unwrap();
        let r_sq = (0.5f64.powi(2) + (3f64.sqrt() / 2.0 / 3.0).powi(2)) * 3.0;
        assert!((check.bound - r_sq / 6.0).abs() < 1e-12);
        assert!(
            (check.mc_estimate - oracle).abs() < 0.05 * oracle + 3.0 * check.std_error,
            "estimate {} vs oracle {oracle}",
            check.mc_estimate
        );
        assert!(check.holds);
    }
}
