//! Optimal assignment between latent-state labelings.
//!
//! Used to align posterior samples of label-switching-prone fits against a
//! reference before averaging or scoring. The ordered prior never needs
//! this: its states cannot permute.

use crate::error::{Error, Result};
use crate::matrix::StochasticMatrix;

/// Kuhn–Munkres with potentials, O(n³). `cost` is row-major n×n; returns
/// for every row the column assigned to it in a minimum-cost perfect
/// matching.
pub fn hungarian_min(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "square cost matrix required");
    let inf = f64::INFINITY;
    // 1-based internals; index 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut assigned_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=n {
        if assigned_row[j] > 0 {
            out[assigned_row[j] - 1] = j - 1;
        }
    }
    out
}

/// Permutation aligning `candidate` rows to `reference` rows: entry r is
/// the candidate row assigned to reference row r, minimizing the total L1
/// row distance.
pub fn align_states(
    reference: &StochasticMatrix,
    candidate: &StochasticMatrix,
) -> Result<Vec<usize>> {
    if reference.height() != candidate.height() || reference.width() != candidate.width() {
        return Err(Error::DimensionMismatch(
            "alignment requires matching shapes".into(),
        ));
    }
    let k = reference.height();
    let mut cost = vec![0.0; k * k];
    for r in 0..k {
        for c in 0..k {
            cost[r * k + c] = reference
                .row(r)
                .iter()
                .zip(candidate.row(c))
                .map(|(x, y)| (x - y).abs())
                .sum();
        }
    }
    Ok(hungarian_min(&cost, k))
}
