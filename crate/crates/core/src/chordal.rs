//! Chordality testing, clique decompositions, enumeration of decomposable
//! models, and the chain / double-chain benchmark graphs.

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::EdgeSet;

/// Largest `p` accepted by [`enumerate_decomposable`].
pub const ENUMERATION_CAP: usize = 7;

/// Maximal cliques in perfect-elimination order plus the separator of each
/// clique after the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueDecomposition {
    p: usize,
    cliques: Vec<Vec<usize>>,
    separators: Vec<Vec<usize>>,
}

impl CliqueDecomposition {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Vertex sets, each sorted ascending.
    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    /// `separators()[i]` belongs to `cliques()[i + 1]`. Empty when the graph
    /// is disconnected at that point.
    pub fn separators(&self) -> &[Vec<usize>] {
        &self.separators
    }

    pub fn max_clique_size(&self) -> usize {
        self.cliques.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Every pair inside some clique.
    pub fn edge_set(&self) -> EdgeSet {
        let mut edges = EdgeSet::empty(self.p);
        for clique in &self.cliques {
            for (a, b) in clique.iter().tuple_combinations() {
                edges.insert(*a, *b).expect("clique vertices are in range");
            }
        }
        edges
    }
}

/// Maximum cardinality search; ties go to the lowest vertex index.
/// Returns vertices in visit order.
pub fn maximum_cardinality_search(edges: &EdgeSet) -> Vec<usize> {
    let p = edges.p();
    let adj = edges.neighbors();
    let mut weight = vec![0usize; p];
    let mut visited = vec![false; p];
    let mut order = Vec::with_capacity(p);
    for _ in 0..p {
        let mut next = usize::MAX;
        for v in 0..p {
            if !visited[v] && (next == usize::MAX || weight[v] > weight[next]) {
                next = v;
            }
        }
        visited[next] = true;
        order.push(next);
        for &u in &adj[next] {
            if !visited[u] {
                weight[u] += 1;
            }
        }
    }
    order
}

/// For each vertex, its neighbours visited before it (ascending), given a
/// visit order.
fn earlier_neighbors(edges: &EdgeSet, order: &[usize]) -> Vec<Vec<usize>> {
    let mut position = vec![0; order.len()];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    edges
        .neighbors()
        .into_iter()
        .enumerate()
        .map(|(v, nbrs)| {
            nbrs.into_iter()
                .filter(|&u| position[u] < position[v])
                .collect()
        })
        .collect()
}

/// A perfect elimination ordering if the graph is chordal.
///
/// The ordering is the reverse of the maximum cardinality search visit order;
/// each vertex's neighbours later in the ordering form a clique.
pub fn perfect_elimination_ordering(edges: &EdgeSet) -> Option<Vec<usize>> {
    let order = maximum_cardinality_search(edges);
    let p = edges.p();
    let adj = edges.adjacency();
    let mut position = vec![0; p];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    let earlier = earlier_neighbors(edges, &order);
    for v in 0..p {
        let Some(&parent) = earlier[v].iter().max_by_key(|&&u| position[u]) else {
            continue;
        };
        let ok = earlier[v]
            .iter()
            .filter(|&&u| u != parent)
            .all(|&u| adj[u * p + parent]);
        if !ok {
            return None;
        }
    }
    Some(order.into_iter().rev().collect())
}

pub fn is_chordal(edges: &EdgeSet) -> bool {
    perfect_elimination_ordering(edges).is_some()
}

pub fn clique_decomposition(edges: &EdgeSet) -> Result<CliqueDecomposition> {
    if !is_chordal(edges) {
        return Err(Error::NotDecomposable);
    }
    let order = maximum_cardinality_search(edges);
    let earlier = earlier_neighbors(edges, &order);
    let candidates: Vec<Vec<usize>> = order
        .iter()
        .map(|&v| {
            let mut c = earlier[v].clone();
            c.push(v);
            c.sort_unstable();
            c
        })
        .collect();
    let is_subset = |a: &[usize], b: &[usize]| a.iter().all(|x| b.binary_search(x).is_ok());
    let cliques: Vec<Vec<usize>> = candidates
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            !candidates
                .iter()
                .enumerate()
                .any(|(j, other)| j != *i && other.len() > c.len() && is_subset(c, other))
        })
        .map(|(_, c)| c.clone())
        .collect();

    let mut seen = vec![false; edges.p()];
    let mut separators = Vec::with_capacity(cliques.len().saturating_sub(1));
    for (i, clique) in cliques.iter().enumerate() {
        if i > 0 {
            separators.push(clique.iter().copied().filter(|&v| seen[v]).collect());
        }
        for &v in clique {
            seen[v] = true;
        }
    }
    Ok(CliqueDecomposition {
        p: edges.p(),
        cliques,
        separators,
    })
}

/// Size of the largest clique of an arbitrary graph (Bron–Kerbosch with pivoting).
pub fn max_clique_size(edges: &EdgeSet) -> usize {
    if let Ok(decomposition) = clique_decomposition(edges) {
        return decomposition.max_clique_size();
    }
    let adj = edges.neighbors();
    let p = edges.p();
    let mut best = if p > 0 { 1 } else { 0 };
    fn expand(
        adj: &[Vec<usize>],
        size: usize,
        mut candidates: Vec<usize>,
        mut excluded: Vec<usize>,
        best: &mut usize,
    ) {
        if candidates.is_empty() {
            *best = (*best).max(size);
            return;
        }
        if size + candidates.len() <= *best {
            return;
        }
        let pivot = candidates
            .iter()
            .chain(excluded.iter())
            .copied()
            .max_by_key(|&u| candidates.iter().filter(|c| adj[u].binary_search(c).is_ok()).count())
            .expect("non-empty");
        let branch: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|v| adj[pivot].binary_search(v).is_err())
            .collect();
        for v in branch {
            let keep = |set: &[usize]| -> Vec<usize> {
                set.iter().copied().filter(|u| adj[v].binary_search(u).is_ok()).collect()
            };
            expand(adj, size + 1, keep(&candidates), keep(&excluded), best);
            candidates.retain(|&u| u != v);
            excluded.push(v);
        }
    }
    expand(&adj, 0, (0..p).collect(), Vec::new(), &mut best);
    best
}

/// All decomposable edge sets on `p` nodes with at most `q` edges, ordered by
/// size and then lexicographically.
pub fn enumerate_decomposable(p: usize, q: usize) -> Result<Vec<EdgeSet>> {
    enumerate_decomposable_with_cap(p, q, ENUMERATION_CAP)
}

pub fn enumerate_decomposable_with_cap(p: usize, q: usize, cap: usize) -> Result<Vec<EdgeSet>> {
    if p > cap {
        return Err(Error::EnumerationTooLarge { p, cap });
    }
    let pairs: Vec<(usize, usize)> = EdgeSet::complete(p).iter().collect();
    let mut models = Vec::new();
    for size in 0..=q.min(pairs.len()) {
        let combos: Vec<Vec<usize>> = (0..pairs.len()).combinations(size).collect();
        let chordal: Vec<EdgeSet> = combos
            .par_iter()
            .filter_map(|combo| {
                let e = EdgeSet::from_pairs(p, combo.iter().map(|&i| pairs[i]))
                    .expect("pairs are valid");
                is_chordal(&e).then_some(e)
            })
            .collect();
        models.extend(chordal);
    }
    Ok(models)
}

/// `{j, j+1}` for every `j`.
pub fn chain_edges(p: usize) -> Result<EdgeSet> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("chain needs p >= 2, got {p}")));
    }
    EdgeSet::from_pairs(p, (0..p - 1).map(|j| (j, j + 1)))
}

/// `{j, j+1}` and `{j, j+2}` for every `j`.
pub fn double_chain_edges(p: usize) -> Result<EdgeSet> {
    if p < 3 {
        return Err(Error::InvalidArgument(format!(
            "double chain needs p >= 3, got {p}"
        )));
    }
    EdgeSet::from_pairs(
        p,
        (0..p - 1)
            .map(|j| (j, j + 1))
            .chain((0..p - 2).map(|j| (j, j + 2))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn es(p: usize, pairs: &[(usize, usize)]) -> EdgeSet {
        EdgeSet::from_pairs(p, pairs.iter().copied()).unwrap()
    }

    /// No induced cycle of length >= 4, checked over every vertex subset.
    fn brute_force_chordal(e: &EdgeSet) -> bool {
        let p = e.p();
        for mask in 0u32..(1 << p) {
            let verts: Vec<usize> = (0..p).filter(|v| mask & (1 << v) != 0).collect();
            if verts.len() < 4 {
                continue;
            }
            let deg_two = verts.iter().all(|&v| {
                verts.iter().filter(|&&u| e.contains(u, v)).count() == 2
            });
            if !deg_two {
                continue;
            }
            // connected 2-regular induced subgraph = chordless cycle
            let mut seen = vec![verts[0]];
            let mut stack = vec![verts[0]];
            while let Some(v) = stack.pop() {
                for &u in &verts {
                    if e.contains(u, v) && !seen.contains(&u) {
                        seen.push(u);
                        stack.push(u);
                    }
                }
            }
            if seen.len() == verts.len() {
                return false;
            }
        }
        true
    }

    fn brute_force_maximal_cliques(e: &EdgeSet) -> Vec<Vec<usize>> {
        let p = e.p();
        let is_clique = |vs: &[usize]| vs.iter().tuple_combinations().all(|(a, b)| e.contains(*a, *b));
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        for mask in 1u32..(1 << p) {
            let vs: Vec<usize> = (0..p).filter(|v| mask & (1 << v) != 0).collect();
            if !is_clique(&vs) {
                continue;
            }
            let maximal = (0..p).filter(|v| !vs.contains(v)).all(|v| {
                let mut bigger = vs.clone();
                bigger.push(v);
                !is_clique(&bigger)
            });
            if maximal {
                cliques.push(vs);
            }
        }
        cliques.sort();
        cliques
    }

    #[test]
    fn chain_and_cycle() {
        assert!(is_chordal(&chain_edges(6).unwrap()));
        let square = es(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        assert!(!is_chordal(&square));
        assert!(!brute_force_chordal(&square));
        assert!(matches!(clique_decomposition(&square), Err(Error::NotDecomposable)));
    }

    #[test]
    fn double_chain_is_chordal_by_brute_force() {
        let dc = double_chain_edges(6).unwrap();
        assert!(brute_force_chordal(&dc));
        assert!(is_chordal(&dc));
    }

    #[test]
    fn peo_certifies_chordality() {
        let dc = double_chain_edges(7).unwrap();
        let peo = perfect_elimination_ordering(&dc).unwrap();
        let mut pos = vec![0; 7];
        for (i, &v) in peo.iter().enumerate() {
            pos[v] = i;
        }
        for &v in &peo {
            let later: Vec<usize> = (0..7).filter(|&u| dc.contains(u, v) && pos[u] > pos[v]).collect();
            for (a, b) in later.iter().tuple_combinations() {
                assert!(dc.contains(*a, *b));
            }
        }
    }

    #[test]
    fn chain_decomposition() {
        let d = clique_decomposition(&chain_edges(4).unwrap()).unwrap();
        assert_eq!(d.cliques(), &[vec![0, 1], vec![1, 2], vec![2, 3]]);
        assert_eq!(d.separators(), &[vec![1], vec![2]]);
    }

    #[test]
    fn double_chain_decomposition_matches_brute_force() {
        let e = double_chain_edges(5).unwrap();
        let d = clique_decomposition(&e).unwrap();
        assert_eq!(d.cliques(), &[vec![0, 1, 2], vec![1, 2, 3], vec![2, 3, 4]]);
        assert_eq!(d.separators(), &[vec![1, 2], vec![2, 3]]);
        let mut got = d.cliques().to_vec();
        got.sort();
        assert_eq!(got, brute_force_maximal_cliques(&e));
    }

    #[test]
    fn complete_and_empty_decompositions() {
        let d = clique_decomposition(&EdgeSet::complete(3)).unwrap();
        assert_eq!(d.cliques(), &[vec![0, 1, 2]]);
        assert!(d.separators().is_empty());
        let d = clique_decomposition(&EdgeSet::empty(3)).unwrap();
        assert_eq!(d.cliques().len(), 3);
        assert!(d.separators().iter().all(Vec::is_empty));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_decomposable(3, 3).unwrap().len(), 8);
        assert_eq!(enumerate_decomposable(4, 1).unwrap().len(), 7);
        let all4 = enumerate_decomposable(4, 6).unwrap();
        let brute = (0u32..64)
            .filter(|mask| {
                let pairs: Vec<_> = EdgeSet::complete(4).iter().collect();
                let e = EdgeSet::from_pairs(
                    4,
                    (0..6).filter(|i| mask & (1 << i) != 0).map(|i| pairs[i]),
                )
                .unwrap();
                brute_force_chordal(&e)
            })
            .count();
        assert_eq!(brute, 61);
        assert_eq!(all4.len(), 61);
    }

    #[test]
    fn enumeration_matches_brute_force_up_to_five() {
        for p in 1..=5 {
            let pairs: Vec<_> = EdgeSet::complete(p).iter().collect();
            let m = pairs.len();
            for q in [0, 2, m] {
                let expected = (0u32..(1 << m))
                    .filter(|mask| mask.count_ones() as usize <= q)
                    .filter(|mask| {
                        let e = EdgeSet::from_pairs(
                            p,
                            (0..m).filter(|i| mask & (1 << i) != 0).map(|i| pairs[i]),
                        )
                        .unwrap();
                        brute_force_chordal(&e)
                    })
                    .count();
                let got = enumerate_decomposable(p, q).unwrap();
                assert_eq!(got.len(), expected, "p={p} q={q}");
                assert!(got.iter().all(|e| e.len() <= q && is_chordal(e)));
                assert!(got.windows(2).all(|w| w[0] < w[1]), "canonical order");
            }
        }
    }

    #[test]
    fn enumeration_cap() {
        assert!(matches!(
            enumerate_decomposable(8, 2),
            Err(Error::EnumerationTooLarge { p: 8, cap: 7 })
        ));
    }

    #[test]
    fn decompositions_reassemble_and_satisfy_running_intersection() {
        for e in enumerate_decomposable(5, 10).unwrap() {
            let d = clique_decomposition(&e).unwrap();
            assert_eq!(d.edge_set(), e);
            assert_eq!(d.separators().len(), d.cliques().len() - 1);
            let mut covered = vec![false; 5];
            for c in d.cliques() {
                for &v in c {
                    covered[v] = true;
                }
            }
            assert!(covered.iter().all(|&c| c));
            for (i, sep) in d.separators().iter().enumerate() {
                assert!(d.cliques()[..=i]
                    .iter()
                    .any(|c| sep.iter().all(|v| c.contains(v))));
            }
            let mut got = d.cliques().to_vec();
            got.sort();
            assert_eq!(got, brute_force_maximal_cliques(&e), "{e}");
        }
    }

    #[test]
    fn benchmark_families() {
        assert_eq!(chain_edges(6).unwrap().len(), 5);
        assert_eq!(double_chain_edges(6).unwrap().len(), 9);
        assert_eq!(chain_edges(2).unwrap().iter().collect::<Vec<_>>(), vec![(0, 1)]);
        assert!(chain_edges(1).is_err());
        assert!(double_chain_edges(2).is_err());
        for p in 2..=50 {
            assert!(is_chordal(&chain_edges(p).unwrap()));
            if p >= 3 {
                assert!(is_chordal(&double_chain_edges(p).unwrap()));
            }
        }
    }

    #[test]
    fn max_clique_of_non_chordal_graph() {
        // 4-cycle plus a triangle hanging off node 0
        let e = es(6, &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (0, 5), (4, 5)]);
        assert!(!is_chordal(&e));
        assert_eq!(max_clique_size(&e), 3);
        assert_eq!(max_clique_size(&EdgeSet::complete(5)), 5);
        assert_eq!(max_clique_size(&EdgeSet::empty(3)), 1);
    }
}
