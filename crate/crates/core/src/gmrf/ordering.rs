//! Minimum-degree fill-reducing ordering on the explicit elimination graph.

use std::collections::BTreeSet;

use super::sparse::CsrMatrix;

/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
/// Ties go to the lowest original index.
pub fn minimum_degree_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    // Make the graph symmetric even if the pattern is not.
    for i in 0..n {
        for k in 0..adj[i].len() {
            let j = adj[i][k];
            if adj[j].binary_search(&i).is_err() {
                let pos = adj[j].binary_search(&i).unwrap_err();
                adj[j].insert(pos, i);
            }
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (adj[i].len(), i)).collect();
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some((_, p)) = queue.pop_first() {
        eliminated[p] = true;
        perm.push(p);
        let clique = std::mem::take(&mut adj[p]);
        for &v in &clique {
            queue.remove(&(adj[v].len(), v));
            merged.clear();
            let (mut x, mut y) = (0, 0);
            let (av, ap) = (&adj[v], &clique);
            while x < av.len() || y < ap.len() {
                let next = match (av.get(x), ap.get(y)) {
                    (Some(&s), Some(&t)) if s == t => {
                        x += 1;
                        y += 1;
                        s
                    }
                    (Some(&s), Some(&t)) if s < t => {
                        x += 1;
                        s
                    }
                    (Some(_), Some(&t)) | (None, Some(&t)) => {
                        y += 1;
                        t
                    }
                    (Some(&s), None) => {
                        x += 1;
                        s
                    }
                    (None, None) => unreachable!(),
                };
                if next != v && next != p && !eliminated[next] {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[v], &mut merged);
            queue.insert((adj[v].len(), v));
        }
    }
    perm
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}
