//! Exact rectangular linear assignment.
//!
//! Shortest-augmenting-path formulation with dual potentials (the
//! Jonker-Volgenant flavor of the Hungarian method), O(rows^2 * cols).
//! Used to place connected elements: rows are placement slots, columns
//! are surface elements, and the profit is the linearized objective gain.

use crate::scalar::Real;

/// Maximum-profit assignment of each row to a distinct column
/// (`rows <= cols`). Returns the chosen column per row.
pub fn max_profit_assignment<T: Real>(profit: &[Vec<T>]) -> Vec<usize> {
    let rows = profit.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = profit[0].len();
    assert!(
        rows <= cols,
        "assignment needs at least as many columns ({cols}) as rows ({rows})"
    );
    debug_assert!(profit.iter().all(|r| r.len() == cols));

    // Minimize cost = -profit with potentials ys (rows) and yt (columns);
    // column `cols` is the virtual start of each augmenting path.
    let cost = |r: usize, c: usize| -profit[r][c];
    let mut job: Vec<Option<usize>> = vec![None; cols + 1];
    let mut ys = vec![T::zero(); rows];
    let mut yt = vec![T::zero(); cols + 1];

    for row in 0..rows {
        let mut cur = cols;
        job[cur] = Some(row);
        let mut min_to = vec![T::infinity(); cols + 1];
        let mut prev: Vec<Option<usize>> = vec![None; cols + 1];
        let mut in_tree = vec![false; cols + 1];

        while let Some(j) = job[cur] {
            in_tree[cur] = true;
            let mut delta = T::infinity();
            let mut next = cols;
            for c in 0..cols {
                if !in_tree[c] {
                    let reduced = cost(j, c) - ys[j] - yt[c];
                    if reduced < min_to[c] {
                        min_to[c] = reduced;
                        prev[c] = Some(cur);
                    }
                    if min_to[c] < delta {
                        delta = min_to[c];
                        next = c;
                    }
                }
            }
            for c in 0..=cols {
                if in_tree[c] {
                    if let Some(jc) = job[c] {
                        ys[jc] += delta;
                    }
                    yt[c] -= delta;
                } else {
                    min_to[c] -= delta;
                }
            }
            cur = next;
        }

        // Augment along the recorded path back to the virtual column.
        while cur != cols {
            let p = prev[cur].expect("augmenting path is connected");
            job[cur] = job[p];
            cur = p;
        }
    }

    let mut out = vec![usize::MAX; rows];
    for c in 0..cols {
        if let Some(r) = job[c] {
            out[r] = c;
        }
    }
    debug_assert!(out.iter().all(|&c| c != usize::MAX));
    out
}
