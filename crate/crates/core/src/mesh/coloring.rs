use super::SurfaceMesh;

/// Element colors such that no two elements sharing a node have equal color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub color_of: Vec<usize>,
    pub n_colors: usize,
}

impl Coloring {
    /// Element indices grouped by color, ascending within each group.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_colors];
        for (e, &c) in self.color_of.iter().enumerate() {
            groups[c].push(e);
        }
        groups
    }
}

/// Greedy first-fit coloring in ascending element order.
pub fn mesh_coloring(mesh: &SurfaceMesh) -> Coloring {
    let node_elems = mesh.node_elements();
    let m = mesh.n_elements();
    let mut color_of = vec![usize::MAX; m];
    let mut used: Vec<usize> = Vec::new();
    let mut n_colors = 0;
    for e in 0..m {
        used.clear();
        for &v in &mesh.triangles()[e] {
            for &other in &node_elems[v] {
                if color_of[other] != usize::MAX {
                    used.push(color_of[other]);
                }
            }
        }
        used.sort_unstable();
        used.dedup();
        let c = used
            .iter()
            .enumerate()
            .find(|&(i, &c)| i != c)
            .map(|(i, _)| i)
            .unwrap_or(used.len());
        color_of[e] = c;
        n_colors = n_colors.max(c + 1);
    }
    Coloring { color_of, n_colors }
}
