//! Multilevel interior/interface clustering (the spaND ordering).
//!
//! A nested-dissection tree of depth `ℓ` is built by recursive vertex-separator
//! bisection of the adjacency graph. Tree nodes are numbered heap-style from 1
//! (node `k` has children `2k`, `2k+1`; its depth is `⌊log₂ k⌋`). Every vertex is
//! owned by exactly one node: a leaf (depth `ℓ`) or the separator of an
//! internal node.
//!
//! Elimination proceeds in phases `l = ℓ, ℓ−1, …, 0`. In phase `l` the vertices
//! owned by depth-`l` nodes are the interiors. Every still-active separator
//! vertex of a shallower node `N` is clustered with the vertices of `N` that
//! face the same depth-`l` subtree, giving the level-`l` interfaces. Between
//! phases, interfaces of `N` merge pairwise (two sibling subtrees become their
//! parent) until `N` itself turns into an interior.
//!
//! Which subtree a separator vertex faces is decided by a label: the leaf it is
//! attached to, chosen by descending from `N` and following the majority of
//! already-labelled neighbors (deeper separators are labelled first).

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::sparse::SparseSymMatrix;

/// Largest part may hold at most this fraction of the non-separator vertices.
const BALANCE: f64 = 0.6;

/// `round(log₂(n / 25))`, at least 1.
pub fn default_levels(n: usize) -> usize {
    let l = ((n.max(1) as f64) / 25.0).log2().round();
    if l.is_finite() && l >= 1.0 {
        l as usize
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterKind {
    Interior,
    Interface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    /// Elimination phase (tree depth) the cluster belongs to.
    pub level: usize,
    pub kind: ClusterKind,
    /// Separator node owning the dofs (the interior's own node for interiors).
    pub node: usize,
    /// Depth-`level` subtree the interface faces (equal to `node` for interiors).
    pub facing: usize,
    pub dofs: Vec<usize>,
    /// Clusters of the same level connected by an edge of `A`.
    pub neighbors: Vec<usize>,
    /// Level-`(level − 1)` cluster absorbing this interface; `None` for interiors.
    pub promotion: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionHierarchy {
    pub n: usize,
    pub levels: usize,
    /// Owning tree node per vertex.
    pub owner: Vec<usize>,
    /// Leaf label per vertex.
    pub label: Vec<usize>,
    /// All clusters, ids ascending from phase `ℓ` down to phase 0.
    pub clusters: Vec<Cluster>,
    /// Cluster ids per phase, indexed by level.
    pub by_level: Vec<Vec<usize>>,
}

#[inline]
pub(crate) fn depth_of(node: usize) -> usize {
    (usize::BITS - 1 - node.leading_zeros()) as usize
}

#[inline]
fn ancestor_at(node: usize, depth: usize) -> usize {
    node >> (depth_of(node) - depth)
}

impl PartitionHierarchy {
    pub fn cluster(&self, id: usize) -> &Cluster {
        &self.clusters[id]
    }

    /// Clusters active in phase `level`.
    pub fn level(&self, level: usize) -> impl Iterator<Item = &Cluster> {
        self.by_level[level].iter().map(move |&id| &self.clusters[id])
    }

    pub fn interiors(&self, level: usize) -> impl Iterator<Item = &Cluster> {
        self.level(level).filter(|c| c.kind == ClusterKind::Interior)
    }

    pub fn interfaces(&self, level: usize) -> impl Iterator<Item = &Cluster> {
        self.level(level).filter(|c| c.kind == ClusterKind::Interface)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn write_json<W: Write>(&self, w: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(w, self)
    }
}

/// Builds the hierarchy with `levels` dissection levels (at least 1).
pub fn build_hierarchy(a: &SparseSymMatrix, levels: usize) -> PartitionHierarchy {
    let levels = levels.max(1);
    let n = a.n();
    let mut owner = vec![0usize; n];
    let mut sep_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();

    // recursive bisection, breadth first so node numbering is natural
    let mut bis = Bisector::new(a);
    let mut queue = VecDeque::new();
    queue.push_back((1usize, (0..n).collect::<Vec<_>>()));
    while let Some((node, verts)) = queue.pop_front() {
        if depth_of(node) == levels {
            for &v in &verts {
                owner[v] = node;
            }
            continue;
        }
        let (left, sep, right) = bis.bisect(&verts);
        for &v in &sep {
            owner[v] = node;
        }
        sep_of.insert(node, sep);
        queue.push_back((2 * node, left));
        queue.push_back((2 * node + 1, right));
    }

    let label = leaf_labels(a, &owner, &sep_of, levels);

    // clusters per phase
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); levels + 1];
    let mut key_to_id: Vec<BTreeMap<(usize, usize), usize>> = vec![BTreeMap::new(); levels + 1];
    let mut where_at = vec![usize::MAX; n];
    for l in (0..=levels).rev() {
        let mut groups: BTreeMap<(u8, usize, usize), Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            let node = owner[v];
            let d = depth_of(node);
            if d > l {
                continue;
            }
            let key = if d == l { (0, node, node) } else { (1, node, ancestor_at(label[v], l)) };
            groups.entry(key).or_default().push(v);
        }
        for ((kind, node, facing), dofs) in groups {
            let id = clusters.len();
            for &v in &dofs {
                where_at[v] = id;
            }
            clusters.push(Cluster {
                id,
                level: l,
                kind: if kind == 0 { ClusterKind::Interior } else { ClusterKind::Interface },
                node,
                facing,
                dofs,
                neighbors: Vec::new(),
                promotion: None,
            });
            key_to_id[l].insert((node, facing), id);
            by_level[l].push(id);
        }
        for &id in &by_level[l] {
            let mut nb: Vec<usize> = clusters[id]
                .dofs
                .iter()
                .flat_map(|&v| a.neighbors(v))
                .filter(|&u| depth_of(owner[u]) <= l)
                .map(|u| where_at[u])
                .filter(|&c| c != id)
                .collect();
            nb.sort_unstable();
            nb.dedup();
            clusters[id].neighbors = nb;
        }
    }
    for l in 1..=levels {
        for &id in &by_level[l] {
            let c = &clusters[id];
            if c.kind == ClusterKind::Interior {
                continue;
            }
            let target = if depth_of(c.node) == l - 1 { (c.node, c.node) } else { (c.node, c.facing >> 1) };
            clusters[id].promotion = key_to_id[l - 1].get(&target).copied();
        }
    }

    PartitionHierarchy { n, levels, owner, label, clusters, by_level }
}

fn leaf_labels(
    a: &SparseSymMatrix,
    owner: &[usize],
    sep_of: &BTreeMap<usize, Vec<usize>>,
    levels: usize,
) -> Vec<usize> {
    const UNSET: usize = 0;
    let mut label: Vec<usize> =
        owner.iter().map(|&o| if depth_of(o) == levels { o } else { UNSET }).collect();
    // deepest separators first
    let mut nodes: Vec<usize> = sep_of.keys().copied().collect();
    nodes.sort_by_key(|&k| (std::cmp::Reverse(depth_of(k)), k));
    for node in nodes {
        let dn = depth_of(node);
        for &v in &sep_of[&node] {
            let known: Vec<usize> = a
                .neighbors(v)
                .filter(|&u| depth_of(owner[u]) > dn && label[u] != UNSET)
                .map(|u| label[u])
                .filter(|&lab| ancestor_at(lab, dn) == node)
                .collect();
            let mut cur = node;
            for d in dn + 1..=levels {
                let c0 = 2 * cur;
                let (mut v0, mut v1) = (0usize, 0usize);
                for &lab in &known {
                    if ancestor_at(lab, d - 1) != cur {
                        continue;
                    }
                    if ancestor_at(lab, d) == c0 {
                        v0 += 1;
                    } else {
                        v1 += 1;
                    }
                }
                cur = if v1 > v0 { c0 + 1 } else { c0 };
            }
            label[v] = cur;
        }
    }
    label
}

/// Scratch state for repeated bisections over subsets of one graph.
struct Bisector<'a> {
    a: &'a SparseSymMatrix,
    local: Vec<usize>,
    level_of: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl<'a> Bisector<'a> {
    fn new(a: &'a SparseSymMatrix) -> Self {
        Bisector { a, local: vec![NONE; a.n()], level_of: vec![NONE; a.n()] }
    }

    /// Splits `verts` into `(left, separator, right)`, each sorted.
    fn bisect(&mut self, verts: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        if verts.is_empty() {
            return (Vec::new(), Vec::new(), Vec::new());
        }
        for (i, &v) in verts.iter().enumerate() {
            self.local[v] = i;
        }

        // level structure: components in order of their smallest vertex, each
        // rooted at a pseudo-peripheral vertex
        let mut levels: Vec<Vec<usize>> = Vec::new();
        let mut comp_starts: Vec<usize> = Vec::new();
        let mut seen = vec![false; verts.len()];
        for &start in verts {
            if seen[self.local[start]] {
                continue;
            }
            let root = self.pseudo_peripheral(start);
            comp_starts.push(levels.len());
            for lvl in self.bfs_levels(root) {
                for &v in &lvl {
                    seen[self.local[v]] = true;
                }
                levels.push(lvl);
            }
        }

        let total = verts.len();
        let mut prefix = Vec::with_capacity(levels.len() + 1);
        prefix.push(0usize);
        for l in &levels {
            prefix.push(prefix.last().unwrap() + l.len());
        }
        // candidates: (separator level index or boundary, left count, sep size)
        #[derive(Clone, Copy)]
        enum Cut {
            Level(usize),
            Boundary(usize),
        }
        let mut best: Option<(bool, usize, f64, Cut)> = None;
        let mut consider = |cut: Cut, left: usize, sep: usize| {
            let rest = total - sep;
            let right = rest - left;
            let imbalance = if rest == 0 { 0.0 } else { left.max(right) as f64 / rest as f64 };
            let balanced = imbalance <= BALANCE + 1e-12;
            let better = match best {
                None => true,
                Some((bb, bs, bi, _)) => match (balanced, bb) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => sep < bs || (sep == bs && imbalance < bi),
                    (false, false) => imbalance < bi || (imbalance == bi && sep < bs),
                },
            };
            if better {
                best = Some((balanced, sep, imbalance, cut));
            }
        };
        for (k, l) in levels.iter().enumerate() {
            consider(Cut::Level(k), prefix[k], l.len());
        }
        for &s in comp_starts.iter().skip(1) {
            consider(Cut::Boundary(s), prefix[s], 0);
        }

        let (sep_lo, sep_hi) = match best.expect("nonempty vertex set").3 {
            Cut::Level(k) => (k, k + 1),
            Cut::Boundary(s) => (s, s),
        };
        // side: 0 left, 1 separator, 2 right
        let mut side = vec![0u8; total];
        for (k, l) in levels.iter().enumerate() {
            let s = if k < sep_lo {
                0
            } else if k < sep_hi {
                1
            } else {
                2
            };
            for &v in l {
                side[self.local[v]] = s;
            }
        }
        self.refine(verts, &mut side);

        let mut out = (Vec::new(), Vec::new(), Vec::new());
        for &v in verts {
            match side[self.local[v]] {
                0 => out.0.push(v),
                1 => out.1.push(v),
                _ => out.2.push(v),
            }
        }
        for &v in verts {
            self.local[v] = NONE;
        }
        out
    }

    /// Moves separator vertices lacking a neighbor on one side to the other side.
    fn refine(&self, verts: &[usize], side: &mut [u8]) {
        let mut count = [0usize; 3];
        for &s in side.iter() {
            count[s as usize] += 1;
        }
        for &v in verts {
            let lv = self.local[v];
            if side[lv] != 1 {
                continue;
            }
            let (mut touches_l, mut touches_r) = (false, false);
            for u in self.a.neighbors(v) {
                let lu = self.local[u];
                if lu == NONE {
                    continue;
                }
                match side[lu] {
                    0 => touches_l = true,
                    2 => touches_r = true,
                    _ => {}
                }
            }
            let to = match (touches_l, touches_r) {
                (true, true) => continue,
                (true, false) => 0,
                (false, true) => 2,
                (false, false) => {
                    if count[0] <= count[2] {
                        0
                    } else {
                        2
                    }
                }
            };
            side[lv] = to;
            count[1] -= 1;
            count[to as usize] += 1;
        }
    }

    fn bfs_levels(&mut self, root: usize) -> Vec<Vec<usize>> {
        let mut levels = vec![vec![root]];
        let mut touched = vec![root];
        self.level_of[root] = 0;
        loop {
            let mut next = Vec::new();
            for &v in levels.last().unwrap() {
                for u in self.a.neighbors(v) {
                    if self.local[u] != NONE && self.level_of[u] == NONE {
                        self.level_of[u] = levels.len();
                        next.push(u);
                        touched.push(u);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        for v in touched {
            self.level_of[v] = NONE;
        }
        levels
    }

    /// George–Liu pseudo-peripheral vertex of the component containing `start`.
    fn pseudo_peripheral(&mut self, start: usize) -> usize {
        let mut root = start;
        let mut ecc = self.bfs_levels(root).len();
        loop {
            let levels = self.bfs_levels(root);
            let last = levels.last().unwrap();
            let cand = *last
                .iter()
                .min_by_key(|&&v| (self.local_degree(v), v))
                .expect("nonempty level");
            let e = self.bfs_levels(cand).len();
            if e > ecc {
                root = cand;
                ecc = e;
            } else {
                return root;
            }
        }
    }

    fn local_degree(&self, v: usize) -> usize {
        self.a.neighbors(v).filter(|&u| self.local[u] != NONE).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::laplacian_2d;

    fn path(n: usize) -> SparseSymMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseSymMatrix::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn levels_formula() {
        assert_eq!(default_levels(6400), 8);
        assert_eq!(default_levels(25), 1);
        assert_eq!(default_levels(2), 1);
        assert_eq!(default_levels(160_000), 13);
    }

    #[test]
    fn path_bisection() {
        let h = build_hierarchy(&path(9), 1);
        let interiors: Vec<_> = h.interiors(1).map(|c| c.dofs.clone()).collect();
        assert_eq!(interiors, vec![vec![0, 1, 2, 3], vec![5, 6, 7, 8]]);
        let ifaces: Vec<_> = h.interfaces(1).map(|c| c.dofs.clone()).collect();
        assert_eq!(ifaces, vec![vec![4]]);
        let root: Vec<_> = h.interiors(0).map(|c| c.dofs.clone()).collect();
        assert_eq!(root, vec![vec![4]]);
    }

    #[test]
    fn grid_structure() {
        let a = laplacian_2d(8);
        let h = build_hierarchy(&a, 2);
        for l in 0..=2 {
            for c in h.interiors(l) {
                for &nb in &c.neighbors {
                    assert_eq!(h.cluster(nb).kind, ClusterKind::Interface);
                }
            }
        }
        let mut all: Vec<usize> = h.level(2).flat_map(|c| c.dofs.iter().copied()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn promotion_preserves_dofs() {
        let a = laplacian_2d(16);
        let h = build_hierarchy(&a, 3);
        for l in 1..=3 {
            for c in h.interfaces(l) {
                let p = h.cluster(c.promotion.expect("interface promoted"));
                assert_eq!(p.level, l - 1);
                assert!(c.dofs.iter().all(|d| p.dofs.binary_search(d).is_ok()));
            }
        }
    }

    #[test]
    fn disconnected_graph() {
        let a = SparseSymMatrix::identity(10);
        let h = build_hierarchy(&a, 2);
        assert!(h.clusters.iter().all(|c| !c.dofs.is_empty()));
        assert_eq!(h.interfaces(2).count(), 0);
        assert_eq!(h.interiors(2).map(|c| c.dofs.len()).sum::<usize>(), 10);
    }
}
