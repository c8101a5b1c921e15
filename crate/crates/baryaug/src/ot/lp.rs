//! Exact optimal transport on the discrete transport polytope.
//!
//! Two solvers share this module:
//! - [`solve_transport`]: successive shortest augmenting paths with node
//!   potentials on the bipartite supply/demand network. Handles arbitrary
//!   nonnegative marginals and rectangular cost matrices.
//! - [`solve_uniform_quota`]: a specialization for uniform source mass `1/n`
//!   against `k` uniform sinks with `k | n`, where the augmenting-path search
//!   collapses onto the `k` sinks. Orders of magnitude faster when `n >> k`,
//!   which is the Monte-Carlo regime of the covering-bound verifier.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Dense coupling returned by the LP solvers.
#[derive(Debug, Clone)]
pub struct RawPlan {
    pub flow: Vec<f64>, // rows x cols, row-major
    pub rows: usize,
    pub cols: usize,
    pub cost: f64,
    pub augmentations: usize,
}

const MASS_EPS_REL: f64 = 1e-12;

/// Exact minimum-cost transport between `supply` and `demand` under `cost`
/// (row-major `supply.len() x demand.len()`, all entries finite nonnegative).
///
/// Marginal sums must agree up to rounding; the smaller side is topped off
/// internally so the flow is feasible to machine precision.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<RawPlan> {
    let m = supply.len();
    let n = demand.len();
    assert_eq!(cost.len(), m * n, "cost matrix shape mismatch");
    let total: f64 = supply.iter().sum();
    let mass_eps = total.max(1.0) * MASS_EPS_REL;

    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();
    let mut flow = vec![0.0; m * n];
    let mut pot = vec![0.0; m + n];
    let mut augmentations = 0usize;
    let max_aug = 32 * (m + n) + 256;

    // Dijkstra state reused across rounds.
    let mut dist = vec![f64::INFINITY; m + n];
    let mut parent = vec![usize::MAX; m + n];
    let mut done = vec![false; m + n];

    loop {
        let pending: f64 = rem_s.iter().sum();
        if pending <= mass_eps {
            break;
        }
        if augmentations >= max_aug {
            return Err(Error::TransportStalled {
                remaining: pending,
            });
        }

        // Multi-source Dijkstra over the residual network with reduced costs.
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
        for (i, &r) in rem_s.iter().enumerate() {
            if r > mass_eps {
                dist[i] = 0.0;
                heap.push(HeapItem(0.0, i));
            }
        }
        let mut target = usize::MAX;
        while let Some(HeapItem(d, node)) = heap.pop() {
            if done[node] || d > dist[node] {
                continue;
            }
            done[node] = true;
            if node >= m && rem_d[node - m] > mass_eps {
                target = node;
                break;
            }
            if node < m {
                let i = node;
                for j in 0..n {
                    let sink = m + j;
                    if done[sink] {
                        continue;
                    }
                    let rc = cost[i * n + j] + pot[i] - pot[sink];
                    let nd = d + rc.max(0.0);
                    if nd < dist[sink] {
                        dist[sink] = nd;
                        parent[sink] = i;
                        heap.push(HeapItem(nd, sink));
                    }
                }
            } else {
                let j = node - m;
                for i in 0..m {
                    if done[i] || flow[i * n + j] <= 0.0 {
                        continue;
                    }
                    let rc = -cost[i * n + j] + pot[node] - pot[i];
                    let nd = d + rc.max(0.0);
                    if nd < dist[i] {
                        dist[i] = nd;
                        parent[i] = node;
                        heap.push(HeapItem(nd, i));
                    }
                }
            }
        }
        if target == usize::MAX {
            return Err(Error::TransportStalled { remaining: pending });
        }

        // Bottleneck along the path.
        let mut bottleneck = rem_d[target - m];
        let mut node = target;
        while parent[node] != usize::MAX {
            let prev = parent[node];
            if node >= m {
                // forward arc prev(source) -> node(sink): uncapacitated
            } else {
                // backward arc prev(sink) -> node(source): capped by flow
                bottleneck = bottleneck.min(flow[node * n + (prev - m)]);
            }
            node = prev;
        }
        bottleneck = bottleneck.min(rem_s[node]);

        // Augment.
        let start = node;
        let mut node = target;
        while parent[node] != usize::MAX {
            let prev = parent[node];
            if node >= m {
                flow[prev * n + (node - m)] += bottleneck;
            } else {
                flow[node * n + (prev - m)] -= bottleneck;
            }
            node = prev;
        }
        rem_s[start] -= bottleneck;
        rem_d[target - m] -= bottleneck;

        // Johnson potential update keeps reduced costs nonnegative.
        let dt = dist[target];
        for v in 0..m + n {
            pot[v] += dist[v].min(dt);
        }
        augmentations += 1;
    }

    let cost_total = flow
        .iter()
        .zip(cost.iter())
        .map(|(f, c)| f * c)
        .sum::<f64>();
    Ok(RawPlan {
        flow,
        rows: m,
        cols: n,
        cost: cost_total,
        augmentations,
    })
}

/// Min-heap item over f64 distances.
struct HeapItem(f64, usize);

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 && self.1 == other.1
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Exact OT for `n` uniform sources (mass `1/n`) against `k` uniform sinks
/// (mass `1/k`) when `k` divides `n`. `cost` is row-major `n x k`.
///
/// Integrality of the scaled polytope means an optimal plan assigns each
/// source wholly to one sink with per-sink quota `n/k`; the augmenting-path
/// search then runs on the `k`-node sink graph with lazily maintained
/// best-swap heaps.
///
/// Returns `(source_to_sink, transport_cost)` where the cost already carries
/// the `1/n` mass factor.
pub fn solve_uniform_quota(n: usize, k: usize, cost: &[f64]) -> Result<(Vec<usize>, f64)> {
    assert_eq!(cost.len(), n * k, "cost matrix shape mismatch");
    if k == 0 || n == 0 || n % k != 0 {
        return Err(Error::BadParameter {
            name: "quota",
            reason: format!("need k | n, got n = {n}, k = {k}"),
        });
    }
    let quota = n / k;
    let mut assignment = vec![usize::MAX; n];
    let mut counts = vec![0usize; k];
    let mut v = vec![0.0; k]; // sink potentials

    // swap_heaps[j][j2]: candidates (C[x][j2] - C[x][j], x) for x assigned to j.
    let mut swap_heaps: Vec<Vec<BinaryHeap<HeapItem>>> = (0..k)
        .map(|_| (0..k).map(|_| BinaryHeap::new()).collect())
        .collect();

    let mut dist = vec![0.0f64; k];
    let mut via_source = vec![usize::MAX; k]; // source realizing the swap into j
    let mut from_sink = vec![usize::MAX; k];
    let mut visited = vec![false; k];

    for i in 0..n {
        for j in 0..k {
            dist[j] = cost[i * k + j] - v[j];
            via_source[j] = usize::MAX;
            from_sink[j] = usize::MAX;
            visited[j] = false;
        }
        let target;
        loop {
            let mut best = usize::MAX;
            for j in 0..k {
                if !visited[j] && (best == usize::MAX || dist[j] < dist[best]) {
                    best = j;
                }
            }
            debug_assert!(best != usize::MAX, "sink graph exhausted before quota");
            let j = best;
            visited[j] = true;
            if counts[j] < quota {
                target = j;
                break;
            }
            // Relax swaps out of j using the cheapest currently assigned source.
            for j2 in 0..k {
                if visited[j2] {
                    continue;
                }
                let heap = &mut swap_heaps[j][j2];
                let top = loop {
                    match heap.peek() {
                        Some(&HeapItem(val, x)) => {
                            if assignment[x] == j {
                                break Some((val, x));
                            }
                            heap.pop(); // stale entry
                        }
                        None => break None,
                    }
                };
                if let Some((delta, x)) = top {
                    // reduced swap weight; nonnegative by complementary slackness
                    let w = delta + v[j] - v[j2];
                    let nd = dist[j] + w.max(0.0);
                    if nd < dist[j2] {
                        dist[j2] = nd;
                        via_source[j2] = x;
                        from_sink[j2] = j;
                    }
                }
            }
        }

        // Dual update over scanned sinks.
        let dt = dist[target];
        for j in 0..k {
            if visited[j] {
                v[j] += dist[j] - dt;
            }
        }

        // Walk the path backwards, moving swap sources, then place i.
        let mut j = target;
        while from_sink[j] != usize::MAX {
            let x = via_source[j];
            let j_prev = from_sink[j];
            debug_assert_eq!(assignment[x], j_prev);
            assignment[x] = j;
            counts[j] += 1;
            counts[j_prev] -= 1;
            for j2 in 0..k {
                if j2 != j {
                    swap_heaps[j][j2].push(HeapItem(cost[x * k + j2] - cost[x * k + j], x));
                }
            }
            j = j_prev;
        }
        assignment[i] = j;
        counts[j] += 1;
        for j2 in 0..k {
            if j2 != j {
                swap_heaps[j][j2].push(HeapItem(cost[i * k + j2] - cost[i * k + j], i));
            }
        }
    }

    let total: f64 = (0..n).map(|i| cost[i * k + assignment[i]]).sum();
    Ok((assignment, total / n as f64))
}
