//! Deterministic ω-automata with labeled edges.
//!
//! An [`Automaton`] is read either as a deterministic Büchi automaton (the
//! specification) or as its complement, a deterministic co-Büchi automaton
//! with the same graph. Edges carry single propositions; the special
//! proposition [`TOP`] matches every symbol.

mod decompose;
mod io;
mod switching;

pub use decompose::{
    group_by_initial_prop, partition, required_certificates, run_fragments, triplet_feasible, triplets_of,
    triplets_of_set, Decomposition, Obligations, PartitionKey, PartitionSummary, RunFragment, Triplet,
};
pub use io::{AutomatonJson, TransitionJson};
pub use switching::{build_switching, SwitchState, SwitchingAutomaton};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Automaton state identifier.
pub type State = String;
/// Atomic proposition identifier.
pub type Prop = String;

/// The proposition that matches every symbol (`⊤`).
pub const TOP: &str = "true";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Acceptance {
    Buchi,
    Cobuchi,
}

/// Set of propositions labeling the edge between two states, `σ(q, q')`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeLabel(pub BTreeSet<Prop>);

impl EdgeLabel {
    pub fn top() -> Self {
        EdgeLabel([TOP.to_string()].into_iter().collect())
    }

    pub fn is_top(&self) -> bool {
        self.0.contains(TOP)
    }

    pub fn props(&self) -> impl Iterator<Item = &Prop> {
        self.0.iter()
    }

    pub fn union(&self, other: &EdgeLabel) -> EdgeLabel {
        if self.is_top() || other.is_top() {
            return EdgeLabel::top();
        }
        EdgeLabel(self.0.union(&other.0).cloned().collect())
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(String::as_str).collect();
        write!(f, "{}", parts.join("|"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Automaton {
    states: BTreeSet<State>,
    initial: BTreeSet<State>,
    alphabet: BTreeSet<Prop>,
    finals: BTreeSet<State>,
    acceptance: Acceptance,
    delta: BTreeMap<State, BTreeMap<Prop, State>>,
}

impl Automaton {
    /// Builds and validates an automaton. `transitions` lists
    /// `(from, proposition, to)` triples; [`TOP`] may be used as a proposition
    /// without appearing in the alphabet.
    pub fn new(
        states: impl IntoIterator<Item = State>,
        initial: impl IntoIterator<Item = State>,
        alphabet: impl IntoIterator<Item = Prop>,
        finals: impl IntoIterator<Item = State>,
        acceptance: Acceptance,
        transitions: impl IntoIterator<Item = (State, Prop, State)>,
    ) -> Result<Self> {
        let states: BTreeSet<State> = states.into_iter().collect();
        let initial: BTreeSet<State> = initial.into_iter().collect();
        let alphabet: BTreeSet<Prop> = alphabet.into_iter().collect();
        let finals: BTreeSet<State> = finals.into_iter().collect();
        if states.is_empty() {
            return Err(Error::MalformedAutomaton("no states".into()));
        }
        if initial.is_empty() {
            return Err(Error::MalformedAutomaton("no initial state".into()));
        }
        if alphabet.contains(TOP) {
            return Err(Error::MalformedAutomaton(format!("`{TOP}` is reserved and cannot be in the alphabet")));
        }
        for q in initial.iter().chain(&finals) {
            if !states.contains(q) {
                return Err(Error::UnknownState(q.clone()));
            }
        }
        let mut delta: BTreeMap<State, BTreeMap<Prop, State>> = BTreeMap::new();
        for (from, prop, to) in transitions {
            if !states.contains(&from) {
                return Err(Error::UnknownState(from));
            }
            if !states.contains(&to) {
                return Err(Error::UnknownState(to));
            }
            if prop != TOP && !alphabet.contains(&prop) {
                return Err(Error::UnknownProposition(prop));
            }
            let row = delta.entry(from.clone()).or_default();
            match row.get(&prop) {
                Some(existing) if *existing != to => {
                    return Err(Error::NonDeterministic { state: from, prop });
                }
                _ => {
                    row.insert(prop, to);
                }
            }
        }
        for (q, row) in &delta {
            if let Some(top_target) = row.get(TOP) {
                if let Some((p, _)) = row.iter().find(|(p, t)| p.as_str() != TOP && *t != top_target) {
                    return Err(Error::NonDeterministic { state: q.clone(), prop: p.clone() });
                }
            }
        }
        Ok(Automaton { states, initial, alphabet, finals, acceptance, delta })
    }

    pub fn states(&self) -> &BTreeSet<State> {
        &self.states
    }

    pub fn initial(&self) -> &BTreeSet<State> {
        &self.initial
    }

    pub fn alphabet(&self) -> &BTreeSet<Prop> {
        &self.alphabet
    }

    pub fn finals(&self) -> &BTreeSet<State> {
        &self.finals
    }

    pub fn acceptance(&self) -> Acceptance {
        self.acceptance
    }

    /// The automaton with the opposite acceptance condition over the same
    /// graph. For deterministic automata this accepts the complement language.
    pub fn complement(&self) -> Automaton {
        let mut c = self.clone();
        c.acceptance = match self.acceptance {
            Acceptance::Buchi => Acceptance::Cobuchi,
            Acceptance::Cobuchi => Acceptance::Buchi,
        };
        c
    }

    /// Outgoing `(proposition, target)` pairs of `q`, in proposition order.
    pub fn transitions_from(&self, q: &str) -> impl Iterator<Item = (&Prop, &State)> {
        self.delta.get(q).into_iter().flat_map(|row| row.iter())
    }

    /// `δ(q, symbol)`, falling back to a `⊤` edge.
    pub fn step(&self, q: &str, symbol: &str) -> Option<&State> {
        let row = self.delta.get(q)?;
        row.get(symbol).or_else(|| row.get(TOP))
    }

    /// `σ(q, q')`: the propositions leading from `q` to `q'`.
    pub fn edge_label(&self, q: &str, q2: &str) -> Option<EdgeLabel> {
        let props: BTreeSet<Prop> =
            self.transitions_from(q).filter(|(_, t)| t.as_str() == q2).map(|(p, _)| p.clone()).collect();
        if props.is_empty() {
            None
        } else if props.contains(TOP) {
            Some(EdgeLabel::top())
        } else {
            Some(EdgeLabel(props))
        }
    }

    /// `Δ(q)`: every state reachable from `q` in one step, self included when
    /// `q` has a self-loop.
    pub fn successors(&self, q: &str) -> Result<BTreeSet<State>> {
        if !self.states.contains(q) {
            return Err(Error::UnknownState(q.to_string()));
        }
        Ok(self.transitions_from(q).map(|(_, t)| t.clone()).collect())
    }

    /// Dense index of each state (in lexicographic order) and the adjacency
    /// of the graph without self-loops.
    pub(crate) fn indexed_graph(&self) -> (Vec<&State>, Vec<Vec<usize>>) {
        let names: Vec<&State> = self.states.iter().collect();
        let index: BTreeMap<&State, usize> = names.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let adj = names
            .iter()
            .map(|q| {
                let targets: BTreeSet<usize> =
                    self.transitions_from(q).filter(|(_, t)| t != q).map(|(_, t)| index[t]).collect();
                targets.into_iter().collect()
            })
            .collect();
        (names, adj)
    }

    pub fn has_self_loop(&self, q: &str) -> bool {
        self.transitions_from(q).any(|(_, t)| t == q)
    }

    /// Graphviz rendering; multi-proposition edges are joined with `|`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph automaton {\n  rankdir=LR;\n");
        for q in &self.states {
            let shape = if self.finals.contains(q) { "doublecircle" } else { "circle" };
            out.push_str(&format!("  \"{q}\" [shape={shape}];\n"));
        }
        for (i, q) in self.initial.iter().enumerate() {
            out.push_str(&format!("  __init{i} [shape=point];\n  __init{i} -> \"{q}\";\n"));
        }
        for q in &self.states {
            let targets: BTreeSet<&State> = self.transitions_from(q).map(|(_, t)| t).collect();
            for t in targets {
                let label = self.edge_label(q, t).expect("target came from an edge");
                out.push_str(&format!("  \"{q}\" -> \"{t}\" [label=\"{label}\"];\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::example1;
    use super::*;

    #[test]
    fn successors_of_example_states() {
        let a = example1();
        let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(a.successors("q1").unwrap(), set(&["q2", "q4"]));
        assert_eq!(a.successors("q3").unwrap(), set(&["q3"]));
        assert_eq!(a.successors("q0").unwrap(), set(&["q1", "q3", "q4"]));
        assert!(matches!(a.successors("zz"), Err(Error::UnknownState(_))));
    }

    #[test]
    fn edge_labels_are_set_valued() {
        let a = example1();
        assert_eq!(a.edge_label("q0", "q3").unwrap().to_string(), "p1|p3");
        assert!(a.edge_label("q3", "q3").unwrap().is_top());
        assert!(a.edge_label("q2", "q1").is_none());
    }

    #[test]
    fn top_edges_match_every_symbol() {
        let a = example1();
        assert_eq!(a.step("q3", "p2").map(String::as_str), Some("q3"));
        assert_eq!(a.step("q0", "p2").map(String::as_str), Some("q4"));
        assert_eq!(a.step("q2", "p0"), None);
    }

    #[test]
    fn rejects_nondeterminism() {
        let err = Automaton::new(
            ["a".to_string(), "b".to_string()],
            ["a".to_string()],
            ["p".to_string()],
            [],
            Acceptance::Buchi,
            [("a".to_string(), "p".to_string(), "a".to_string()), ("a".to_string(), "p".to_string(), "b".to_string())],
        );
        assert!(matches!(err, Err(Error::NonDeterministic { .. })));
    }

    #[test]
    fn rejects_top_conflicting_with_other_edges() {
        let err = Automaton::new(
            ["a".to_string(), "b".to_string()],
            ["a".to_string()],
            ["p".to_string()],
            [],
            Acceptance::Buchi,
            [("a".to_string(), TOP.to_string(), "a".to_string()), ("a".to_string(), "p".to_string(), "b".to_string())],
        );
        assert!(matches!(err, Err(Error::NonDeterministic { .. })));
    }

    #[test]
    fn rejects_unknown_symbols_and_states() {
        let mk = |p: &str, to: &str| {
            Automaton::new(
                ["a".to_string()],
                ["a".to_string()],
                ["p".to_string()],
                [],
                Acceptance::Buchi,
                [("a".to_string(), p.to_string(), to.to_string())],
            )
        };
        assert!(matches!(mk("x", "a"), Err(Error::UnknownProposition(_))));
        assert!(matches!(mk("p", "z"), Err(Error::UnknownState(_))));
    }

    #[test]
    fn complement_flips_acceptance_only() {
        let a = example1();
        let c = a.complement();
        assert_eq!(c.acceptance(), Acceptance::Buchi);
        assert_eq!(c.complement(), a);
    }

    #[test]
    fn dot_joins_props() {
        let dot = example1().to_dot();
        assert!(dot.contains("\"q0\" -> \"q3\" [label=\"p1|p3\"]"));
        assert!(dot.contains("\"q3\" [shape=doublecircle]"));
    }
}
