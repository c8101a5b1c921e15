//! Exact linear assignment via shortest augmenting paths with potentials.
//!
//! O(n^3) for a square cost matrix. By Birkhoff's theorem an optimal
//! transport plan between equal-cardinality uniform measures is a
//! permutation, so this doubles as the exact W2 solver for that case.

/// Minimum-cost perfect matching on a square `n x n` cost matrix.
///
/// `cost(i, j)` must be finite. Returns `(row_to_col, total_cost)`.
pub fn solve_assignment<F>(n: usize, cost: F) -> (Vec<usize>, f64)
where
    F: Fn(usize, usize) -> f64,
{
    assert!(n > 0, "assignment needs at least one row");
    const INF: f64 = f64::INFINITY;

    // 1-based arrays; column 0 is the virtual start of each augmenting path.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_to_row = vec![0usize; n + 1]; // 0 = unmatched
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        col_to_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_to_row[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_to_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_to_row[j0] == 0 {
                break;
            }
        }
        // Unwind the alternating path.
        while j0 != 0 {
            let j1 = way[j0];
            col_to_row[j0] = col_to_row[j1];
            j0 = j1;
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_to_row[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost(i, row_to_col[i])).sum();
    (row_to_col, total)
}
