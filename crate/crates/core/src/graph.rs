//! Undirected graphs, the free index set of a graph-constrained precision
//! matrix, and the clique covers that drive block Gibbs.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numkernel::Rng;

/// Simple undirected graph on vertices `0..p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    p: usize,
    adjacency: Vec<bool>,
}

impl Graph {
    pub fn empty(p: usize) -> Self {
        Self { p, adjacency: vec![false; p * p] }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            for j in i + 1..p {
                g.set_edge(i, j, true);
            }
        }
        g
    }

    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(p);
        for &(i, j) in edges {
            if i >= p || j >= p || i == j {
                return Err(Error::InvalidParameter(format!("edge ({i}, {j}) invalid for p = {p}")));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.p + j]
    }

    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        assert!(i != j, "self loops are not allowed");
        self.adjacency[i * self.p + j] = present;
        self.adjacency[j * self.p + i] = present;
    }

    pub fn toggle_edge(&mut self, i: usize, j: usize) {
        let present = self.has_edge(i, j);
        self.set_edge(i, j, !present);
    }

    /// Edges `(i, j)` with `i < j` in row-wise order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p).flat_map(move |i| (i + 1..self.p).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.p).filter(|&u| self.has_edge(v, u)).count()
    }

    pub fn is_clique(&self, vertices: &[usize]) -> bool {
        vertices.iter().enumerate().all(|(a, &u)| vertices[a + 1..].iter().all(|&v| u != v && self.has_edge(u, v)))
    }

    /// Edge-list text: first line `p`, then one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.p);
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let p: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("vertex count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => edges.push((i, j)),
                _ => return Err(Error::Parse(format!("bad edge line {line:?}"))),
            }
        }
        Self::from_edges(p, &edges)
    }
}

/// Ordered free index set: every diagonal pair plus every edge, row-wise
/// over the upper triangle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeIndexSet {
    p: usize,
    pairs: Vec<(usize, usize)>,
    lookup: Vec<usize>,
}

impl FreeIndexSet {
    pub fn new(g: &Graph) -> Self {
        Self::build(g.p(), |i, j| i == j || g.has_edge(i, j))
    }

    /// Every upper-triangular pair.
    pub fn full(p: usize) -> Self {
        Self::build(p, |_, _| true)
    }

    fn build(p: usize, keep: impl Fn(usize, usize) -> bool) -> Self {
        let mut pairs = Vec::new();
        let mut lookup = vec![usize::MAX; p * p];
        for i in 0..p {
            for j in i..p {
                if keep(i, j) {
                    lookup[i * p + j] = pairs.len();
                    lookup[j * p + i] = pairs.len();
                    pairs.push((i, j));
                }
            }
        }
        Self { p, pairs, lookup }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Position of `(i, j)` (either order), if free.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.lookup[i * self.p + j];
        (k != usize::MAX).then_some(k)
    }

    /// Column labels `i_j`.
    pub fn labels(&self) -> Vec<String> {
        self.pairs.iter().map(|(i, j)| format!("{i}_{j}")).collect()
    }
}

pub fn free_index_set(g: &Graph) -> FreeIndexSet {
    FreeIndexSet::new(g)
}

/// Ordered list of vertex sets; each is a clique with sorted vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueCover {
    pub cliques: Vec<Vec<usize>>,
}

impl CliqueCover {
    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    /// Checks that every block is a clique of `g` and that the blocks cover
    /// every free pair (diagonals included).
    pub fn validate(&self, g: &Graph) -> Result<()> {
        let p = g.p();
        let mut covered = vec![false; p * p];
        for clique in &self.cliques {
            if clique.is_empty() || clique.iter().any(|&v| v >= p) || !g.is_clique(clique) {
                return Err(Error::InvalidParameter(format!("block {clique:?} is not a clique")));
            }
            for &u in clique {
                for &v in clique {
                    covered[u * p + v] = true;
                }
            }
        }
        for &(i, j) in FreeIndexSet::new(g).pairs() {
            if !covered[i * p + j] {
                return Err(Error::InvalidParameter(format!("free pair ({i}, {j}) is not covered")));
            }
        }
        Ok(())
    }
}

/// Includes each unordered pair independently with probability `s`.
pub fn random_graph(rng: &mut Rng, p: usize, s: f64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("edge probability s = {s}")));
    }
    let mut g = Graph::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            if rng.random_bool(s) {
                g.set_edge(i, j, true);
            }
        }
    }
    Ok(g)
}

#[derive(Clone)]
struct BitSet(Vec<u64>);

impl BitSet {
    fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn remove(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
    fn and(&self, other: &BitSet) -> BitSet {
        BitSet(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }
    fn and_not(&self, other: &BitSet) -> BitSet {
        BitSet(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }
    fn count_and(&self, other: &BitSet) -> u32 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a & b).count_ones()).sum()
    }
    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                (bits != 0).then(|| {
                    let t = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    w * 64 + t
                })
            })
        })
    }
}

/// All maximal cliques (Bron–Kerbosch with Tomita pivoting), sorted.
/// Isolated vertices appear as singletons.
pub fn maximal_cliques(g: &Graph) -> CliqueCover {
    let p = g.p();
    let neighbours: Vec<BitSet> = (0..p)
        .map(|v| {
            let mut b = BitSet::new(p);
            (0..p).filter(|&u| g.has_edge(v, u)).for_each(|u| b.insert(u));
            b
        })
        .collect();
    let mut all = BitSet::new(p);
    (0..p).for_each(|v| all.insert(v));

    fn expand(r: &mut Vec<usize>, mut cand: BitSet, mut excl: BitSet, nb: &[BitSet], out: &mut Vec<Vec<usize>>) {
        if cand.is_empty() {
            if excl.is_empty() {
                let mut c = r.clone();
                c.sort_unstable();
                out.push(c);
            }
            return;
        }
        let pivot = cand.iter().chain(excl.iter()).max_by_key(|&u| cand.count_and(&nb[u])).expect("non-empty");
        let branch: Vec<usize> = cand.and_not(&nb[pivot]).iter().collect();
        for v in branch {
            r.push(v);
            expand(r, cand.and(&nb[v]), excl.and(&nb[v]), nb, out);
            r.pop();
            cand.remove(v);
            excl.insert(v);
        }
    }

    let mut out = Vec::new();
    if p > 0 {
        expand(&mut Vec::new(), all, BitSet::new(p), &neighbours, &mut out);
    }
    out.sort();
    CliqueCover { cliques: out }
}

/// One 2-clique per edge plus a singleton for every isolated vertex.
pub fn edgewise_cover(g: &Graph) -> CliqueCover {
    let mut cliques: Vec<Vec<usize>> = g.edges().map(|(i, j)| vec![i, j]).collect();
    cliques.extend((0..g.p()).filter(|&v| g.degree(v) == 0).map(|v| vec![v]));
    CliqueCover { cliques }
}

/// Greedy cover by maximal cliques.
///
/// Vertices are visited in a uniformly random order. Scanning the permuted
/// upper triangle row by row, every edge not yet inside an emitted clique
/// seeds a clique which is grown by testing all vertices in permuted order.
/// Vertices left uncovered are appended as singletons.
pub fn heuristic_clique_cover(rng: &mut Rng, g: &Graph) -> CliqueCover {
    let p = g.p();
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    heuristic_clique_cover_with_order(g, &order)
}

pub(crate) fn heuristic_clique_cover_with_order(g: &Graph, order: &[usize]) -> CliqueCover {
    let p = g.p();
    let mut covered = vec![false; p * p];
    let mut vertex_used = vec![false; p];
    let mut cliques = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            let (u, v) = (order[a], order[b]);
            if !g.has_edge(u, v) || covered[u * p + v] {
                continue;
            }
            let mut clique = vec![u, v];
            for &w in order {
                if w != u && w != v && clique.iter().all(|&c| g.has_edge(c, w)) {
                    clique.push(w);
                }
            }
            for &x in &clique {
                vertex_used[x] = true;
                for &y in &clique {
                    covered[x * p + y] = true;
                }
            }
            clique.sort_unstable();
            cliques.push(clique);
        }
    }
    cliques.extend((0..p).filter(|&v| !vertex_used[v]).map(|v| vec![v]));
    CliqueCover { cliques }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    fn brute_force_maximal_cliques(g: &Graph) -> Vec<Vec<usize>> {
        let p = g.p();
        let cliques: Vec<Vec<usize>> = (1u32..(1 << p))
            .map(|mask| (0..p).filter(|&v| mask & (1 << v) != 0).collect::<Vec<_>>())
            .filter(|c| g.is_clique(c))
            .collect();
        let mut maximal: Vec<Vec<usize>> = cliques
            .iter()
            .filter(|c| !(0..p).any(|w| !c.contains(&w) && c.iter().all(|&u| g.has_edge(u, w))))
            .cloned()
            .collect();
        maximal.sort();
        maximal
    }

    #[test]
    fn random_graph_extremes() {
        let mut rng = Rng::seed_from_u64(0);
        assert_eq!(random_graph(&mut rng, 6, 0.0).unwrap().edge_count(), 0);
        assert_eq!(random_graph(&mut rng, 6, 1.0).unwrap(), Graph::complete(6));
        assert!(random_graph(&mut rng, 6, 1.5).is_err());
    }

    #[test]
    fn random_graph_edge_count_is_binomial() {
        let mut rng = Rng::seed_from_u64(11);
        let g = random_graph(&mut rng, 50, 0.5).unwrap();
        // Binomial(1225, 0.5): mean 612.5, sd 17.5.
        let e = g.edge_count() as f64;
        assert!((e - 612.5).abs() < 3.0 * 17.5, "{e}");
    }

    #[test]
    fn maximal_clique_examples() {
        assert_eq!(maximal_cliques(&Graph::empty(3)).cliques, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(maximal_cliques(&Graph::complete(4)).cliques, vec![vec![0, 1, 2, 3]]);
        assert_eq!(maximal_cliques(&path3()).cliques, vec![vec![0, 1], vec![1, 2]]);
    }

    #[test]
    fn maximal_cliques_match_brute_force() {
        let mut rng = Rng::seed_from_u64(3);
        for p in 1..=8 {
            for s in [0.2, 0.5, 0.8] {
                let g = random_graph(&mut rng, p, s).unwrap();
                assert_eq!(maximal_cliques(&g).cliques, brute_force_maximal_cliques(&g), "{g:?}");
            }
        }
    }

    #[test]
    fn edgewise_examples() {
        assert_eq!(edgewise_cover(&path3()).cliques, vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(edgewise_cover(&Graph::complete(3)).cliques, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(edgewise_cover(&Graph::empty(2)).cliques, vec![vec![0], vec![1]]);
    }

    #[test]
    fn heuristic_examples() {
        let mut rng = Rng::seed_from_u64(5);
        for _ in 0..5 {
            assert_eq!(heuristic_clique_cover(&mut rng, &Graph::complete(5)).cliques, vec![vec![0, 1, 2, 3, 4]]);
            assert_eq!(heuristic_clique_cover(&mut rng, &Graph::empty(3)).cliques, vec![vec![0], vec![1], vec![2]]);
        }
    }

    #[test]
    fn heuristic_path_all_permutations() {
        let g = path3();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for order in perms {
            let mut cover = heuristic_clique_cover_with_order(&g, &order);
            cover.cliques.sort();
            assert_eq!(cover.cliques, vec![vec![0, 1], vec![1, 2]], "order {order:?}");
        }
    }

    #[test]
    fn heuristic_is_deterministic_given_seed() {
        let g = random_graph(&mut Rng::seed_from_u64(1), 20, 0.4).unwrap();
        let a = heuristic_clique_cover(&mut Rng::seed_from_u64(9), &g);
        let b = heuristic_clique_cover(&mut Rng::seed_from_u64(9), &g);
        assert_eq!(a, b);
    }

    #[test]
    fn free_index_set_examples() {
        assert_eq!(free_index_set(&Graph::empty(2)).pairs(), &[(0, 0), (1, 1)]);
        assert_eq!(free_index_set(&Graph::complete(2)).pairs(), &[(0, 0), (0, 1), (1, 1)]);
        let f = free_index_set(&path3());
        assert_eq!(f.pairs(), &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)]);
        assert_eq!(f.index_of(2, 1), Some(3));
        assert_eq!(f.index_of(0, 2), None);
        assert_eq!(f.labels()[1], "0_1");
    }

    #[test]
    fn edge_list_round_trip() {
        let g = random_graph(&mut Rng::seed_from_u64(4), 9, 0.5).unwrap();
        assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        assert!(Graph::parse_edge_list("3\n0 3\n").is_err());
        assert!(Graph::parse_edge_list("3\n0 1 2\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use crate::numkernel::Rng;

        proptest! {
            #[test]
            fn every_cover_is_valid(p in 1usize..14, s in 0.0f64..1.0, seed in any::<u64>()) {
                let mut rng = Rng::seed_from_u64(seed);
                let g = random_graph(&mut rng, p, s).unwrap();
                let hcc = heuristic_clique_cover(&mut rng, &g);
                for cover in [maximal_cliques(&g), edgewise_cover(&g), hcc.clone()] {
                    prop_assert!(cover.validate(&g).is_ok());
                }
                let singletons = hcc.cliques.iter().filter(|c| c.len() == 1).count();
                prop_assert!(hcc.len() - singletons <= g.edge_count());
                for c in &hcc.cliques {
                    let extendable = (0..p).any(|w| !c.contains(&w) && c.iter().all(|&u| g.has_edge(u, w)));
                    prop_assert!(!extendable, "clique {:?} not maximal", c);
                }
            }
        }
    }
}
