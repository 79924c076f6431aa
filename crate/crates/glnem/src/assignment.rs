//! Linear sum assignment by the Hungarian method with potentials, O(n³).

use crate::linalg::Mat;

/// Minimizing assignment of rows to columns of a square cost matrix.
/// Returns `row_to_col`.
pub fn solve_min(cost: &Mat) -> Vec<usize> {
    let n = cost.rows();
    assert_eq!(cost.cols(), n, "assignment needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    // Shortest augmenting paths with dual potentials; indices are 1-based
    // internally with 0 as the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // column -> row
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            row_to_col[matched_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Maximizing assignment.
pub fn solve_max(score: &Mat) -> Vec<usize> {
    let neg = Mat::from_fn(score.rows(), score.cols(), |i, j| -score.at(i, j));
    solve_min(&neg)
}
