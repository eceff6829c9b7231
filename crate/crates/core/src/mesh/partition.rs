use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SurfaceMesh;
use crate::error::{Error, Result};

/// Element-wise decomposition of a mesh into parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshPartition {
    pub n_parts: usize,
    pub part_of_element: Vec<usize>,
    /// Per part: nodes touched by this part and at least one other, sorted.
    pub shared_nodes: Vec<Vec<usize>>,
    part_elements: Vec<Vec<usize>>,
    part_nodes: Vec<Vec<usize>>,
}

impl MeshPartition {
    pub fn from_assignment(mesh: &SurfaceMesh, n_parts: usize, part_of_element: Vec<usize>) -> Result<Self> {
        if part_of_element.len() != mesh.n_elements() {
            return Err(Error::Argument("partition assignment length differs from element count".into()));
        }
        if n_parts == 0 || part_of_element.iter().any(|&p| p >= n_parts) {
            return Err(Error::Argument("partition id out of range".into()));
        }
        let mut part_elements = vec![Vec::new(); n_parts];
        let mut node_parts: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_nodes()];
        for (e, &p) in part_of_element.iter().enumerate() {
            part_elements[p].push(e);
            for &v in &mesh.triangles()[e] {
                if !node_parts[v].contains(&p) {
                    node_parts[v].push(p);
                }
            }
        }
        let mut part_nodes = vec![Vec::new(); n_parts];
        let mut shared_nodes = vec![Vec::new(); n_parts];
        for (v, parts) in node_parts.iter().enumerate() {
            for &p in parts {
                part_nodes[p].push(v);
                if parts.len() > 1 {
                    shared_nodes[p].push(v);
                }
            }
        }
        Ok(Self {
            n_parts,
            part_of_element,
            shared_nodes,
            part_elements,
            part_nodes,
        })
    }

    pub fn elements(&self, part: usize) -> &[usize] {
        &self.part_elements[part]
    }

    /// Sorted nodes touched by elements of `part`.
    pub fn nodes(&self, part: usize) -> &[usize] {
        &self.part_nodes[part]
    }

    pub fn part_sizes(&self) -> Vec<usize> {
        self.part_elements.iter().map(Vec::len).collect()
    }
}

/// Greedy region-growing partition with balanced part sizes.
///
/// Seeds are spread by repeated farthest-element search on the element dual
/// graph, starting from a seeded random element. Parts then grow one element
/// per round in breadth-first order up to `ceil(M / n_parts)` elements, and a
/// boundary smoothing pass moves elements surrounded by another part.
pub fn partition_mesh(mesh: &SurfaceMesh, n_parts: usize, seed: u64) -> Result<MeshPartition> {
    let m = mesh.n_elements();
    if n_parts == 0 || n_parts > m {
        return Err(Error::Argument(format!(
            "n_parts must be in 1..={m} (got {n_parts})"
        )));
    }
    if n_parts == 1 {
        return MeshPartition::from_assignment(mesh, 1, vec![0; m]);
    }
    let dual = dual_graph(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut seeds = vec![rng.random_range(0..m)];
    while seeds.len() < n_parts {
        let dist = bfs_distance(&dual, &seeds);
        let next = (0..m)
            .filter(|e| !seeds.contains(e))
            .max_by(|&a, &b| dist[a].cmp(&dist[b]).then(b.cmp(&a)))
            .expect("n_parts <= m");
        seeds.push(next);
    }

    const UNASSIGNED: usize = usize::MAX;
    let cap = m.div_ceil(n_parts);
    let mut part = vec![UNASSIGNED; m];
    let mut size = vec![0usize; n_parts];
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); n_parts];
    for (p, &s) in seeds.iter().enumerate() {
        part[s] = p;
        size[p] = 1;
        queues[p].extend(dual[s].iter().copied());
    }
    let mut progress = true;
    while progress {
        progress = false;
        for p in 0..n_parts {
            if size[p] >= cap {
                continue;
            }
            while let Some(e) = queues[p].pop_front() {
                if part[e] == UNASSIGNED {
                    part[e] = p;
                    size[p] += 1;
                    queues[p].extend(dual[e].iter().copied().filter(|&n| part[n] == UNASSIGNED));
                    progress = true;
                    break;
                }
            }
        }
    }

    // Leftovers: attach to the smallest adjacent part, then to the smallest
    // part overall for regions unreachable from any part.
    loop {
        let mut changed = false;
        let mut any_left = false;
        for e in 0..m {
            if part[e] != UNASSIGNED {
                continue;
            }
            any_left = true;
            if let Some(p) = dual[e]
                .iter()
                .map(|&n| part[n])
                .filter(|&p| p != UNASSIGNED)
                .min_by_key(|&p| (size[p], p))
            {
                part[e] = p;
                size[p] += 1;
                changed = true;
            }
        }
        if !any_left {
            break;
        }
        if !changed {
            let e = part.iter().position(|&p| p == UNASSIGNED).unwrap();
            let p = (0..n_parts).min_by_key(|&p| (size[p], p)).unwrap();
            part[e] = p;
            size[p] += 1;
        }
    }

    // Diffuse elements out of oversized parts: any boundary move to a part
    // at least two elements smaller lowers the size variance, so this ends.
    while size.iter().any(|&s| s > cap) {
        let mut order: Vec<usize> = (0..n_parts).collect();
        order.sort_by_key(|&p| (usize::MAX - size[p], p));
        let mv = order.iter().find_map(|&big| {
            (0..m).filter(|&e| part[e] == big).find_map(|e| {
                dual[e]
                    .iter()
                    .map(|&n| part[n])
                    .filter(|&q| size[q] + 1 < size[big])
                    .min_by_key(|&q| (size[q], q))
                    .map(|q| (e, big, q))
            })
        });
        let Some((e, from, to)) = mv else { break };
        part[e] = to;
        size[to] += 1;
        size[from] -= 1;
    }

    let floor = m / n_parts;
    for _ in 0..2 {
        for e in 0..m {
            let own = part[e];
            let mut votes: HashMap<usize, usize> = HashMap::new();
            for &n in &dual[e] {
                *votes.entry(part[n]).or_default() += 1;
            }
            let own_votes = votes.get(&own).copied().unwrap_or(0);
            let best = votes
                .iter()
                .filter(|&(&p, _)| p != own)
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&p, &c)| (p, c));
            if let Some((q, c)) = best {
                if c >= 2 && c > own_votes && size[q] < cap && size[own] > floor {
                    part[e] = q;
                    size[q] += 1;
                    size[own] -= 1;
                }
            }
        }
    }

    MeshPartition::from_assignment(mesh, n_parts, part)
}

/// Element adjacency through shared edges, sorted.
fn dual_graph(mesh: &SurfaceMesh) -> Vec<Vec<usize>> {
    let mut edge_elems: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (e, t) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edge_elems.entry((a.min(b), a.max(b))).or_default().push(e);
        }
    }
    let mut dual = vec![Vec::new(); mesh.n_elements()];
    for elems in edge_elems.values() {
        if let [a, b] = elems[..] {
            dual[a].push(b);
            dual[b].push(a);
        }
    }
    for d in &mut dual {
        d.sort_unstable();
        d.dedup();
    }
    dual
}

fn bfs_distance(dual: &[Vec<usize>], sources: &[usize]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; dual.len()];
    let mut q = VecDeque::new();
    for &s in sources {
        dist[s] = 0;
        q.push_back(s);
    }
    while let Some(e) = q.pop_front() {
        for &n in &dual[e] {
            if dist[n] == usize::MAX {
                dist[n] = dist[e] + 1;
                q.push_back(n);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_cylinder_mesh;

    fn check_invariants(mesh: &SurfaceMesh, p: &MeshPartition) {
        let mut covered = vec![false; mesh.n_nodes()];
        for part in 0..p.n_parts {
            for &v in p.nodes(part) {
                covered[v] = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
        let node_elems = mesh.node_elements();
        for v in 0..mesh.n_nodes() {
            let mut parts: Vec<usize> = node_elems[v].iter().map(|&e| p.part_of_element[e]).collect();
            parts.sort_unstable();
            parts.dedup();
            for part in 0..p.n_parts {
                let listed = p.shared_nodes[part].binary_search(&v).is_ok();
                assert_eq!(listed, parts.len() > 1 && parts.contains(&part));
            }
        }
        let cap = mesh.n_elements().div_ceil(p.n_parts) as f64 * 1.1;
        assert!(p.part_sizes().iter().all(|&s| s as f64 <= cap), "{:?}", p.part_sizes());
    }

    #[test]
    fn single_part_has_no_shared_nodes() {
        let m = generate_cylinder_mesh(2.0, 3.0, 8, 5).unwrap();
        let p = partition_mesh(&m, 1, 0).unwrap();
        assert!(p.shared_nodes[0].is_empty());
        check_invariants(&m, &p);
    }

    #[test]
    fn strip_splits_evenly_for_every_seed() {
        let m = generate_cylinder_mesh(2.0, 1.0, 3, 2).unwrap();
        for seed in 0..64 {
            let p = partition_mesh(&m, 2, seed).unwrap();
            assert_eq!(p.part_sizes(), vec![3, 3], "seed {seed}");
        }
    }

    #[test]
    fn invariants_on_cylinders() {
        let m = generate_cylinder_mesh(4.0, 30.0, 24, 30).unwrap();
        for n in [1, 2, 3, 4, 7, 12] {
            for seed in [0, 17] {
                let p = partition_mesh(&m, n, seed).unwrap();
                check_invariants(&m, &p);
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let m = generate_cylinder_mesh(4.0, 30.0, 16, 20).unwrap();
        assert_eq!(partition_mesh(&m, 5, 3).unwrap(), partition_mesh(&m, 5, 3).unwrap());
    }

    #[test]
    fn too_many_parts() {
        let m = generate_cylinder_mesh(2.0, 1.0, 3, 2).unwrap();
        assert!(partition_mesh(&m, 7, 0).is_err());
        assert!(partition_mesh(&m, 0, 0).is_err());
        assert!(partition_mesh(&m, 6, 0).is_ok());
    }
}
