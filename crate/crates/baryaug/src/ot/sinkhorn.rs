//! Entropic-regularized transport via log-domain Sinkhorn iterations.
//!
//! The regularization strength is parameterized relative to the squared
//! diameter of the union of the two supports, so the solver behaves the same
//! under rescaling of the data. The reported value is the plan cost
//! `<pi_eps, C>` without the entropy term; an optional debiasing subtracts
//! the self-transport costs (Sinkhorn divergence).

use crate::error::{Error, Result};

/// Tuning for [`sinkhorn_plan`] and the public `w2_sinkhorn`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornParams {
    /// Regularization as a fraction of the squared union diameter.
    pub epsilon_rel: f64,
    pub max_iter: usize,
    /// Convergence threshold on the max marginal residual.
    pub tol: f64,
    /// Subtract self-transport bias (off by default; the raw plan cost is
    /// the ranking proxy used for graph construction).
    pub debias: bool,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            epsilon_rel: 1e-2,
            max_iter: 2000,
            tol: 1e-7,
            debias: false,
        }
    }
}

impl SinkhornParams {
    pub fn with_epsilon_rel(epsilon_rel: f64) -> Self {
        Self {
            epsilon_rel,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub plan: Vec<f64>, // rows x cols row-major
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Log-domain Sinkhorn on explicit marginals and a dense cost matrix.
///
/// `epsilon` here is absolute. Zero-mass atoms are allowed; their potentials
/// pin to -inf and the corresponding plan entries vanish.
pub fn sinkhorn_plan(
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornOutput> {
    let m = a.len();
    let n = b.len();
    assert_eq!(cost.len(), m * n, "cost matrix shape mismatch");
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::BadEpsilon(epsilon));
    }

    let log_a: Vec<f64> = a.iter().map(|&w| w.ln()).collect(); // ln 0 = -inf is fine
    let log_b: Vec<f64> = b.iter().map(|&w| w.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut scratch = vec![0.0; m.max(n)];

    // Epsilon scaling: anneal from a coarse regularization down to the
    // target, carrying the potentials across stages. The fixed point at the
    // target epsilon is unchanged; small-epsilon problems just reach it in
    // far fewer iterations than a cold start.
    let cost_max = cost.iter().copied().fold(0.0f64, f64::max);
    let mut stages = Vec::new();
    let mut e = cost_max / 4.0;
    while e > epsilon {
        stages.push(e);
        e /= 4.0;
    }
    stages.push(epsilon);
    let warm_tol = tol.max(1e-4);
    let warm_budget = 200usize;

    let mut iterations = 0;
    let mut converged = false;
    for (stage, &eps) in stages.iter().enumerate() {
        let last = stage + 1 == stages.len();
        let stage_tol = if last { tol } else { warm_tol };
        let mut stage_iters = 0;
        while iterations < max_iter && (last || stage_iters < warm_budget) {
            // f-update then g-update; after the g-update column marginals
            // are exact, so the residual to watch is the row one. In the
            // Gibbs form pi_ij = a_i b_j exp((f_i + g_j - C_ij)/eps) the row
            // constraint pins exp(f_i/eps) = 1 / sum_j b_j exp((g_j - C_ij)/eps).
            for i in 0..m {
                if !log_a[i].is_finite() {
                    f[i] = 0.0; // zero-mass atom: plan entries vanish regardless
                    continue;
                }
                for (j, s) in scratch.iter_mut().take(n).enumerate() {
                    *s = (g[j] - cost[i * n + j]) / eps + log_b[j];
                }
                f[i] = -eps * logsumexp(&scratch[..n]);
            }
            for j in 0..n {
                if !log_b[j].is_finite() {
                    g[j] = 0.0;
                    continue;
                }
                for (i, s) in scratch.iter_mut().take(m).enumerate() {
                    *s = (f[i] - cost[i * n + j]) / eps + log_a[i];
                }
                g[j] = -eps * logsumexp(&scratch[..m]);
            }
            iterations += 1;
            stage_iters += 1;

            if f.iter().chain(g.iter()).any(|x| x.is_nan()) {
                return Err(Error::SinkhornDiverged);
            }

            let mut residual: f64 = 0.0;
            for i in 0..m {
                let mut row = 0.0;
                for j in 0..n {
                    row += plan_entry(&f, &g, cost, &log_a, &log_b, eps, i, j, n);
                }
                residual = residual.max((row - a[i]).abs());
            }
            if residual < stage_tol {
                converged = last;
                break;
            }
        }
    }

    let mut plan = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            plan[i * n + j] = plan_entry(&f, &g, cost, &log_a, &log_b, epsilon, i, j, n);
        }
    }
    round_to_polytope(&mut plan, a, b);
    let cost_total: f64 = plan
        .iter()
        .zip(cost.iter())
        .map(|(p, c)| p * c)
        .sum();
    if !cost_total.is_finite() {
        return Err(Error::SinkhornDiverged);
    }
    Ok(SinkhornOutput {
        plan,
        cost: cost_total,
        iterations,
        converged,
    })
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn plan_entry(
    f: &[f64],
    g: &[f64],
    cost: &[f64],
    log_a: &[f64],
    log_b: &[f64],
    epsilon: f64,
    i: usize,
    j: usize,
    n: usize,
) -> f64 {
    // pi_ij = a_i b_j exp((f_i + g_j - C_ij)/eps) in the Gibbs-kernel form
    let e = (f[i] + g[j] - cost[i * n + j]) / epsilon + log_a[i] + log_b[j];
    e.exp()
}

/// Round an approximate coupling onto the transport polytope: scale rows and
/// columns down to their marginals, then spread the leftover mass as an
/// outer product of the deficits. Marginals become exact up to roundoff, so
/// early-stopped plans still satisfy the feasibility invariant; the cost
/// correction is on the order of the pre-rounding residual.
fn round_to_polytope(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let m = a.len();
    let n = b.len();
    for i in 0..m {
        let row: f64 = plan[i * n..(i + 1) * n].iter().sum();
        if row > a[i] && row > 0.0 {
            let scale = a[i] / row;
            for p in &mut plan[i * n..(i + 1) * n] {
                *p *= scale;
            }
        }
    }
    for j in 0..n {
        let col: f64 = (0..m).map(|i| plan[i * n + j]).sum();
        if col > b[j] && col > 0.0 {
            let scale = b[j] / col;
            for i in 0..m {
                plan[i * n + j] *= scale;
            }
        }
    }
    let err_a: Vec<f64> = (0..m)
        .map(|i| (a[i] - plan[i * n..(i + 1) * n].iter().sum::<f64>()).max(0.0))
        .collect();
    let err_b: Vec<f64> = (0..n)
        .map(|j| (b[j] - (0..m).map(|i| plan[i * n + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = err_a.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            for j in 0..n {
                plan[i * n + j] += err_a[i] * err_b[j] / total;
            }
        }
    }
}

fn logsumexp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}
