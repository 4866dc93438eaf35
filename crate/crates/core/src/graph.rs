//! Small directed-graph helpers on dense `usize` node ids.
//!
//! Simple-cycle enumeration follows Johnson's algorithm: cycles are reported
//! rooted at their least node, once each, and self-loops are reported as
//! one-node cycles.

use std::collections::BTreeSet;
use std::ops::ControlFlow;

/// Enumerates every elementary cycle of the graph given by `adj`.
///
/// The visitor receives the node sequence `[v0, v1, .., vk]` where `v0` is the
/// least node of the cycle and the closing edge `vk -> v0` is implied. The
/// visitor may stop the enumeration early by returning `ControlFlow::Break`.
pub fn simple_cycles<F>(adj: &[Vec<usize>], mut visit: F) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    let n = adj.len();
    let mut state = Johnson {
        adj,
        in_scc: vec![false; n],
        blocked: vec![false; n],
        blocked_by: vec![BTreeSet::new(); n],
        stack: Vec::new(),
    };
    for s in 0..n {
        let scc = component_of(adj, s);
        if scc.len() == 1 && !adj[s].contains(&s) {
            continue;
        }
        for v in 0..n {
            state.in_scc[v] = false;
            state.blocked[v] = false;
            state.blocked_by[v].clear();
        }
        for &v in &scc {
            state.in_scc[v] = true;
        }
        state.circuit(s, s, &mut visit)?;
    }
    ControlFlow::Continue(())
}

struct Johnson<'a> {
    adj: &'a [Vec<usize>],
    in_scc: Vec<bool>,
    blocked: Vec<bool>,
    blocked_by: Vec<BTreeSet<usize>>,
    stack: Vec<usize>,
}

impl Johnson<'_> {
    fn unblock(&mut self, v: usize) {
        let mut work = vec![v];
        while let Some(u) = work.pop() {
            if !self.blocked[u] {
                continue;
            }
            self.blocked[u] = false;
            let waiting = std::mem::take(&mut self.blocked_by[u]);
            work.extend(waiting);
        }
    }

    fn circuit<F>(&mut self, v: usize, s: usize, visit: &mut F) -> ControlFlow<(), bool>
    where
        F: FnMut(&[usize]) -> ControlFlow<()>,
    {
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        let adj = self.adj;
        for &w in &adj[v] {
            if !self.in_scc[w] {
                continue;
            }
            if w == s {
                if let ControlFlow::Break(()) = visit(&self.stack) {
                    return ControlFlow::Break(());
                }
                found = true;
            } else if !self.blocked[w] {
                match self.circuit(w, s, visit) {
                    ControlFlow::Break(()) => return ControlFlow::Break(()),
                    ControlFlow::Continue(true) => found = true,
                    ControlFlow::Continue(false) => {}
                }
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in &adj[v] {
                if self.in_scc[w] {
                    self.blocked_by[w].insert(v);
                }
            }
        }
        self.stack.pop();
        ControlFlow::Continue(found)
    }
}

/// Strongly connected component of `s` in the subgraph induced by nodes `>= s`.
fn component_of(adj: &[Vec<usize>], s: usize) -> Vec<usize> {
    let forward = reach(adj, s, |_, w| w >= s);
    let n = adj.len();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, outs) in adj.iter().enumerate() {
        if v < s {
            continue;
        }
        for &w in outs {
            if w >= s {
                reverse[w].push(v);
            }
        }
    }
    let backward = reach(&reverse, s, |_, _| true);
    forward.into_iter().filter(|v| backward.binary_search(v).is_ok()).collect()
}

/// Sorted list of nodes reachable from `start` (including `start`).
pub fn reach<P>(adj: &[Vec<usize>], start: usize, allow: P) -> Vec<usize>
where
    P: Fn(usize, usize) -> bool,
{
    let mut seen = vec![false; adj.len()];
    let mut work = vec![start];
    seen[start] = true;
    while let Some(v) = work.pop() {
        for &w in &adj[v] {
            if !seen[w] && allow(v, w) {
                seen[w] = true;
                work.push(w);
            }
        }
    }
    (0..adj.len()).filter(|&v| seen[v]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn collect(adj: &[Vec<usize>]) -> BTreeSet<Vec<usize>> {
        let mut out = BTreeSet::new();
        let _ = simple_cycles(adj, |c| {
            out.insert(c.to_vec());
            ControlFlow::Continue(())
        });
        out
    }

    /// Brute force: every sequence of distinct nodes whose least element comes
    /// first and whose consecutive edges (plus the closing edge) exist.
    fn brute(adj: &[Vec<usize>]) -> BTreeSet<Vec<usize>> {
        use itertools::Itertools;
        let n = adj.len();
        let mut out = BTreeSet::new();
        for k in 1..=n {
            for perm in (0..n).permutations(k) {
                if perm.iter().any(|&v| v < perm[0]) {
                    continue;
                }
                let closed = (0..k).all(|i| adj[perm[i]].contains(&perm[(i + 1) % k]));
                if closed {
                    out.insert(perm);
                }
            }
        }
        out
    }

    #[test]
    fn triangle_with_chord() {
        let adj = vec![vec![1], vec![2, 0], vec![0]];
        let cycles = collect(&adj);
        assert_eq!(cycles, [vec![0, 1], vec![0, 1, 2]].into_iter().collect::<BTreeSet<_>>());
    }

    #[test]
    fn self_loops_are_one_node_cycles() {
        let adj = vec![vec![0, 1], vec![1]];
        assert_eq!(collect(&adj), [vec![0], vec![1]].into_iter().collect::<BTreeSet<_>>());
    }

    #[test]
    fn early_stop() {
        let adj = vec![vec![0, 1], vec![0, 1]];
        let mut count = 0;
        let flow = simple_cycles(&adj, |_| {
            count += 1;
            ControlFlow::Break(())
        });
        assert!(flow.is_break());
        assert_eq!(count, 1);
    }

    proptest! {
        #[test]
        fn matches_permutation_oracle(n in 1usize..6, bits in proptest::collection::vec(any::<bool>(), 36)) {
            let adj: Vec<Vec<usize>> = (0..n)
                .map(|i| (0..n).filter(|&j| bits[i * 6 + j]).collect())
                .collect();
            prop_assert_eq!(collect(&adj), brute(&adj));
        }
    }
}
