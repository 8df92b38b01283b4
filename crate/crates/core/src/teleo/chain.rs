use std::collections::{HashMap, VecDeque};

use num_traits::{One, Zero};
use petgraph::graph::{DiGraph, NodeIndex};

use crate::prob::Rational;

/// Minimal non-negative solution of `h = b + M h`, where row `u` of `M` is
/// `edges[u]`. Nodes that cannot reach a node with `b > 0` get 0; the rest
/// is solved exactly, one strongly connected component at a time in
/// reverse topological order.
pub fn solve_reachability(b: &[Rational], edges: &[Vec<(usize, Rational)>]) -> Vec<Rational> {
    let n = b.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, row) in edges.iter().enumerate() {
        for (v, w) in row {
            if !w.is_zero() {
                preds[*v].push(u);
            }
        }
    }
    let mut live: Vec<bool> = b.iter().map(|x| !x.is_zero()).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&u| live[u]).collect();
    while let Some(v) = queue.pop_front() {
        for &u in &preds[v] {
            if !live[u] {
                live[u] = true;
                queue.push_back(u);
            }
        }
    }

    let mut graph: DiGraph<(), ()> = DiGraph::with_capacity(n, 0);
    for _ in 0..n {
        graph.add_node(());
    }
    for (u, row) in edges.iter().enumerate() {
        if !live[u] {
            continue;
        }
        for (v, w) in row {
            if live[*v] && !w.is_zero() {
                graph.add_edge(NodeIndex::new(u), NodeIndex::new(*v), ());
            }
        }
    }

    let mut values = vec![Rational::zero(); n];
    for comp in petgraph::algo::tarjan_scc(&graph) {
        let comp: Vec<usize> = comp.into_iter().map(|ix| ix.index()).collect();
        if !live[comp[0]] {
            continue;
        }
        let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(k, &u)| (u, k)).collect();
        let m = comp.len();
        let mut a = vec![vec![Rational::zero(); m]; m];
        let mut rhs = vec![Rational::zero(); m];
        for (k, &u) in comp.iter().enumerate() {
            a[k][k] += Rational::one();
            rhs[k] += &b[u];
            for (v, w) in &edges[u] {
                if !live[*v] {
                    continue;
                }
                match local.get(v) {
                    Some(&j) => a[k][j] -= w,
                    None => rhs[k] += w * &values[*v],
                }
            }
        }
        let solved = gauss(a, rhs);
        for (k, &u) in comp.iter().enumerate() {
            values[u] = solved[k].clone();
        }
    }
    values
}

/// Exact Gaussian elimination. The systems built above are nonsingular:
/// from every remaining node there is positive probability of leaving the
/// component or hitting `b > 0`.
fn gauss(mut a: Vec<Vec<Rational>>, mut rhs: Vec<Rational>) -> Vec<Rational> {
    let m = rhs.len();
    if m == 1 {
        assert!(!a[0][0].is_zero(), "singular system after zero elimination");
        return vec![&rhs[0] / &a[0][0]];
    }
    for col in 0..m {
        let pivot = (col..m).find(|&r| !a[r][col].is_zero()).expect("singular system after zero elimination");
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let inv = Rational::one() / &a[col][col];
        for r in 0..m {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] * &inv;
            for c in col..m {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
            let delta = &factor * &rhs[col];
            rhs[r] -= delta;
        }
    }
    (0..m).map(|k| &rhs[k] / &a[k][k]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::parse_rational;

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn geometric_loop() {
        // h0 = 3/4 + 1/4 h0  →  1
        let v = solve_reachability(&[r("3/4")], &[vec![(0, r("1/4"))]]);
        assert_eq!(v, vec![r("1")]);
    }

    #[test]
    fn spurious_solution_is_avoided() {
        // h0 = h0 admits any constant; the minimal solution is 0
        let v = solve_reachability(&[r("0")], &[vec![(0, r("1"))]]);
        assert_eq!(v, vec![r("0")]);
    }

    #[test]
    fn two_component_chain() {
        // h0 = 1/2 h1 + 1/2 h2, h1 = 1/2 + 1/2 h1, h2 = 0 (sink)
        let v = solve_reachability(
            &[r("0"), r("1/2"), r("0")],
            &[vec![(1, r("1/2")), (2, r("1/2"))], vec![(1, r("1/2"))], vec![(2, r("1"))]],
        );
        assert_eq!(v, vec![r("1/2"), r("1"), r("0")]);
    }

    #[test]
    fn coupled_cycle() {
        // h0 = 1/4 + 1/2 h1, h1 = 1/3 h0 + 1/3
        let v = solve_reachability(&[r("1/4"), r("1/3")], &[vec![(1, r("1/2"))], vec![(0, r("1/3"))]]);
        // h0 = 1/4 + 1/6 h0 + 1/6 → h0 = (5/12)/(5/6) = 1/2, h1 = 1/2
        assert_eq!(v, vec![r("1/2"), r("1/2")]);
    }
}
