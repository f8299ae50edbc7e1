//! `{i}`-graphs over a quasipotential matrix.
//!
//! An `{i}`-graph gives every node except the root `i` exactly one outgoing
//! arrow and has no cycles, so following arrows always ends at `i`. Its
//! weight is the sum of `V(m, n)` over its arrows. The minimal weight is a
//! minimum spanning arborescence of the reversed graph, found with
//! Chu-Liu/Edmonds. Weights are summed in node order from the original
//! matrix so that equal graphs give bit-identical totals.

use crate::error::{Error, Result};
use crate::prelude::*;

/// Which arrow sets `W(i)` minimizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphVariant {
    /// Freidlin-Wentzell `{i}`-graphs.
    #[default]
    Arborescence,
    /// Hamiltonian chains `m_1 -> ... -> m_l` ending at `i`.
    Chain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WGraph {
    pub variant: GraphVariant,
    /// `W(i)`, `+inf` when no finite graph exists.
    pub w: Vec<f64>,
    /// Successor of each node in the optimal graph for root `i` (`None` at the root).
    pub arrows: Vec<Option<Vec<Option<usize>>>>,
    /// Whether the brute-force enumeration was run and agreed.
    pub cross_checked: bool,
}

const BRUTE_FORCE_MAX: usize = 6;

fn check_square(v: &[Vec<f64>]) -> Result<usize> {
    let n = v.len();
    if v.iter().any(|r| r.len() != n) {
        return Err(Error::input("quasipotential matrix must be square"));
    }
    for (i, r) in v.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            if i != j && (x.is_nan() || *x < 0.0) {
                return Err(Error::input(alloc::format!("V({i}, {j}) = {x} must be nonnegative")));
            }
        }
    }
    Ok(n)
}

/// Weight of a successor map, summed in node order.
pub fn graph_weight(v: &[Vec<f64>], succ: &[Option<usize>]) -> f64 {
    let mut acc = 0.0;
    for (m, s) in succ.iter().enumerate() {
        if let Some(n) = s {
            acc += v[m][*n];
        }
    }
    acc
}

/// `W(i)` for every root. With `Arborescence` and at most six nodes the
/// result is cross-checked against exhaustive enumeration; a disagreement is
/// an error.
pub fn w_graph_weights(v: &[Vec<f64>], variant: GraphVariant) -> Result<WGraph> {
    let n = check_square(v)?;
    let mut w = Vec::with_capacity(n);
    let mut arrows = Vec::with_capacity(n);
    for root in 0..n {
        let succ = match variant {
            GraphVariant::Arborescence => min_in_arborescence(v, root),
            GraphVariant::Chain => min_chain(v, root),
        };
        w.push(succ.as_ref().map_or(f64::INFINITY, |s| graph_weight(v, s)));
        arrows.push(succ);
    }
    let cross_checked = variant == GraphVariant::Arborescence && n <= BRUTE_FORCE_MAX;
    if cross_checked {
        for root in 0..n {
            let brute = brute_force_w(v, root)?;
            if brute != w[root] {
                return Err(Error::NoConvergence(alloc::format!(
                    "root {root}: Edmonds gives {}, enumeration gives {brute}",
                    w[root]
                )));
            }
        }
    }
    Ok(WGraph { variant, w, arrows, cross_checked })
}

/// Cheapest `{root}`-graph by enumerating every successor map.
pub fn brute_force_w(v: &[Vec<f64>], root: usize) -> Result<f64> {
    let n = check_square(v)?;
    if n > BRUTE_FORCE_MAX + 2 {
        return Err(Error::input("enumeration is limited to eight nodes"));
    }
    if n <= 1 {
        return Ok(0.0);
    }
    let others: Vec<usize> = (0..n).filter(|m| *m != root).collect();
    let k = others.len();
    // each non-root node picks one of the n - 1 other nodes
    let mut choice = vec![0usize; k];
    let mut best = f64::INFINITY;
    let mut succ = vec![None; n];
    loop {
        for (c, &m) in choice.iter().zip(&others) {
            let t = if *c >= m { c + 1 } else { *c };
            succ[m] = Some(t);
        }
        if reaches_root(&succ, root) && others.iter().all(|&m| v[m][succ[m].unwrap()].is_finite()) {
            best = best.min(graph_weight(v, &succ));
        }
        let mut d = 0;
        loop {
            if d == k {
                return Ok(best);
            }
            choice[d] += 1;
            if choice[d] < n - 1 {
                break;
            }
            choice[d] = 0;
            d += 1;
        }
    }
}

fn reaches_root(succ: &[Option<usize>], root: usize) -> bool {
    let n = succ.len();
    (0..n).all(|start| {
        let mut x = start;
        for _ in 0..n {
            if x == root {
                return true;
            }
            match succ[x] {
                Some(y) => x = y,
                None => return false,
            }
        }
        x == root
    })
}

/// Minimum `{root}`-graph as a successor map.
pub fn min_in_arborescence(v: &[Vec<f64>], root: usize) -> Option<Vec<Option<usize>>> {
    let n = v.len();
    // reversed graph: an arrow m -> s becomes an edge s -> m entering m
    let cost: Vec<Vec<f64>> =
        (0..n).map(|a| (0..n).map(|b| if a == b { f64::INFINITY } else { v[b][a] }).collect()).collect();
    let parent = edmonds(&cost, root)?;
    Some(parent.into_iter().enumerate().map(|(m, p)| if m == root { None } else { Some(p) }).collect())
}

/// Chu-Liu/Edmonds on `cost[u][v]` (edge `u -> v`); returns the parent of
/// every node, the root's entry being the root itself.
fn edmonds(cost: &[Vec<f64>], root: usize) -> Option<Vec<usize>> {
    let n = cost.len();
    let mut parent = vec![root; n];
    for v in 0..n {
        if v == root {
            continue;
        }
        let (mut best, mut arg) = (f64::INFINITY, None);
        for u in 0..n {
            if u != v && cost[u][v] < best {
                best = cost[u][v];
                arg = Some(u);
            }
        }
        parent[v] = arg?;
    }
    let cycle = find_cycle(&parent, root);
    let Some(cycle) = cycle else {
        return Some(parent);
    };
    let mut in_cycle = vec![false; n];
    for &c in &cycle {
        in_cycle[c] = true;
    }
    // contracted node ids: outside nodes keep their order, the cycle is last
    let mut id = vec![0usize; n];
    let mut k = 0;
    for v in 0..n {
        if !in_cycle[v] {
            id[v] = k;
            k += 1;
        }
    }
    let c = k;
    for &v in &cycle {
        id[v] = c;
    }
    let m = k + 1;
    let mut sub = vec![vec![f64::INFINITY; m]; m];
    let mut origin = vec![vec![(0usize, 0usize); m]; m];
    for u in 0..n {
        for v in 0..n {
            if u == v || !cost[u][v].is_finite() || (in_cycle[u] && in_cycle[v]) {
                continue;
            }
            let w = if in_cycle[v] { cost[u][v] - cost[parent[v]][v] } else { cost[u][v] };
            let (a, b) = (id[u], id[v]);
            if w < sub[a][b] {
                sub[a][b] = w;
                origin[a][b] = (u, v);
            }
        }
    }
    let sub_parent = edmonds(&sub, id[root])?;
    let mut out = parent.clone();
    for b in 0..m {
        if b == id[root] {
            continue;
        }
        let (u, v) = origin[sub_parent[b]][b];
        out[v] = u;
    }
    Some(out)
}

fn find_cycle(parent: &[usize], root: usize) -> Option<Vec<usize>> {
    let n = parent.len();
    let mut color = vec![0u8; n];
    for s in 0..n {
        if color[s] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut x = s;
        while color[x] == 0 && x != root {
            color[x] = 1;
            path.push(x);
            x = parent[x];
        }
        if x != root && color[x] == 1 {
            let pos = path.iter().position(|p| *p == x).unwrap();
            return Some(path[pos..].to_vec());
        }
        for p in path {
            color[p] = 2;
        }
    }
    None
}

/// Cheapest Hamiltonian chain ending at `root` (Held-Karp).
fn min_chain(v: &[Vec<f64>], root: usize) -> Option<Vec<Option<usize>>> {
    let n = v.len();
    if n == 1 {
        return Some(vec![None]);
    }
    if n > 16 {
        return None;
    }
    let full = (1usize << n) - 1;
    // best[s][j]: cheapest chain covering set s that ends at j, built backwards from root
    let mut best = vec![vec![f64::INFINITY; n]; 1 << n];
    let mut prev = vec![vec![usize::MAX; n]; 1 << n];
    best[1 << root][root] = 0.0;
    for s in 0..=full {
        if s & (1 << root) == 0 {
            continue;
        }
        for j in 0..n {
            let b = best[s][j];
            if !b.is_finite() {
                continue;
            }
            for m in 0..n {
                if s & (1 << m) != 0 || !v[m][j].is_finite() {
                    continue;
                }
                let t = s | (1 << m);
                if b + v[m][j] < best[t][m] {
                    best[t][m] = b + v[m][j];
                    prev[t][m] = j;
                }
            }
        }
    }
    let start = (0..n).filter(|j| best[full][*j].is_finite()).min_by(|a, b| best[full][*a].total_cmp(&best[full][*b]))?;
    let mut succ = vec![None; n];
    let (mut s, mut j) = (full, start);
    while j != root {
        let nx = prev[s][j];
        succ[j] = Some(nx);
        s &= !(1 << j);
        j = nx;
    }
    Some(succ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, uniform};

    #[test]
    fn single_node_is_empty_graph() {
        let g = w_graph_weights(&[vec![0.0]], GraphVariant::Arborescence).unwrap();
        assert_eq!(g.w, vec![0.0]);
    }

    #[test]
    fn two_nodes_use_the_single_arrow() {
        let v = vec![vec![0.0, 5.0 / 6.0], vec![16.0 / 3.0, 0.0]];
        let g = w_graph_weights(&v, GraphVariant::Arborescence).unwrap();
        assert_eq!(g.w, vec![16.0 / 3.0, 5.0 / 6.0]);
        let c = w_graph_weights(&v, GraphVariant::Chain).unwrap();
        assert_eq!(c.w, g.w);
    }

    #[test]
    fn edmonds_matches_enumeration_on_random_instances() {
        let mut rng = stream(99, 0);
        for trial in 0..100 {
            let n = 2 + trial % 5;
            let v: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if i == j {
                                0.0
                            } else if uniform(&mut rng) < 0.1 {
                                f64::INFINITY
                            } else {
                                10.0 * uniform(&mut rng)
                            }
                        })
                        .collect()
                })
                .collect();
            let g = w_graph_weights(&v, GraphVariant::Arborescence).unwrap();
            assert!(g.cross_checked);
        }
    }

    #[test]
    fn disconnected_root_is_infinite() {
        let inf = f64::INFINITY;
        let v = vec![vec![0.0, 1.0, inf], vec![1.0, 0.0, inf], vec![inf, inf, 0.0]];
        let g = w_graph_weights(&v, GraphVariant::Arborescence).unwrap();
        assert!(g.w.iter().all(|w| w.is_infinite()));
    }

    #[test]
    fn chain_can_cost_more_than_tree() {
        // star into node 0 is cheap, any chain must use an expensive arrow
        let v = vec![vec![0.0, 9.0, 9.0], vec![1.0, 0.0, 9.0], vec![1.0, 9.0, 0.0]];
        let t = w_graph_weights(&v, GraphVariant::Arborescence).unwrap();
        let c = w_graph_weights(&v, GraphVariant::Chain).unwrap();
        assert_eq!(t.w[0], 2.0);
        assert_eq!(c.w[0], 10.0);
    }
}
