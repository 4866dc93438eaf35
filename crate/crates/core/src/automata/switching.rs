//! The switching automaton that selects which certificate's controller runs.
//!
//! States are either an initial pair `(q0, Δ(q0))` or a partition key
//! `(q, q', Δ(q'))`. Reading `σ(q', q'')` moves to `(q', q'', Δ(q''))`, except
//! that a self-loop `q' -> q'` keeps the current key: the obligation of the
//! triplet being tracked stays active while the automaton waits in `q'`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Automaton, PartitionKey, Prop, State, TOP};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchState {
    Initial { state: State, successors: BTreeSet<State> },
    Edge(PartitionKey),
}

impl SwitchState {
    /// The automaton state the switching state currently sits in.
    pub fn current(&self) -> &State {
        match self {
            SwitchState::Initial { state, .. } => state,
            SwitchState::Edge(k) => &k.target,
        }
    }

    /// `μ`: the bucket whose certificate is active, if any.
    pub fn key(&self) -> Option<&PartitionKey> {
        match self {
            SwitchState::Initial { .. } => None,
            SwitchState::Edge(k) => Some(k),
        }
    }
}

impl fmt::Display for SwitchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchState::Initial { state, successors } => {
                let s: Vec<&str> = successors.iter().map(String::as_str).collect();
                write!(f, "({},{{{}}})", state, s.join(","))
            }
            SwitchState::Edge(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingAutomaton {
    states: BTreeSet<SwitchState>,
    initial: Vec<SwitchState>,
    delta: BTreeMap<SwitchState, BTreeMap<Prop, SwitchState>>,
}

/// Builds the switching automaton of `a`, keeping reachable states only.
pub fn build_switching(a: &Automaton) -> Result<SwitchingAutomaton> {
    let mut initial = Vec::new();
    for q0 in a.initial() {
        initial.push(SwitchState::Initial { state: q0.clone(), successors: a.successors(q0)? });
    }
    let mut states: BTreeSet<SwitchState> = initial.iter().cloned().collect();
    let mut delta: BTreeMap<SwitchState, BTreeMap<Prop, SwitchState>> = BTreeMap::new();
    let mut queue: VecDeque<SwitchState> = initial.iter().cloned().collect();
    while let Some(s) = queue.pop_front() {
        let here = s.current().clone();
        let mut row = BTreeMap::new();
        for (prop, next) in a.transitions_from(&here) {
            let target = match &s {
                SwitchState::Edge(_) if *next == here => s.clone(),
                _ => SwitchState::Edge(PartitionKey::of(a, &here, next)?),
            };
            if states.insert(target.clone()) {
                queue.push_back(target.clone());
            }
            row.insert(prop.clone(), target);
        }
        delta.insert(s, row);
    }
    Ok(SwitchingAutomaton { states, initial, delta })
}

impl SwitchingAutomaton {
    pub fn states(&self) -> &BTreeSet<SwitchState> {
        &self.states
    }

    pub fn initial(&self) -> &[SwitchState] {
        &self.initial
    }

    pub fn transitions_from(&self, s: &SwitchState) -> impl Iterator<Item = (&Prop, &SwitchState)> {
        self.delta.get(s).into_iter().flat_map(|row| row.iter())
    }

    /// `δ_m(s, symbol)`, falling back to a `⊤` transition.
    pub fn step(&self, s: &SwitchState, symbol: &str) -> Result<&SwitchState> {
        let row = self.delta.get(s);
        row.and_then(|r| r.get(symbol).or_else(|| r.get(TOP)))
            .ok_or_else(|| Error::MissingTransition { state: s.to_string(), prop: symbol.to_string() })
    }

    pub fn to_dot(&self) -> String {
        let ids: BTreeMap<&SwitchState, usize> = self.states.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut out = String::from("digraph switching {\n  rankdir=LR;\n");
        for (s, i) in &ids {
            out.push_str(&format!("  m{i} [label=\"{s}\"];\n"));
        }
        for (k, s) in self.initial.iter().enumerate() {
            out.push_str(&format!("  __init{k} [shape=point];\n  __init{k} -> m{};\n", ids[s]));
        }
        for s in &self.states {
            let mut grouped: BTreeMap<&SwitchState, Vec<&str>> = BTreeMap::new();
            for (p, t) in self.transitions_from(s) {
                grouped.entry(t).or_default().push(p);
            }
            for (t, props) in grouped {
                out.push_str(&format!("  m{} -> m{} [label=\"{}\"];\n", ids[s], ids[t], props.join("|")));
            }
        }
        out.push_str("}\n");
        out
    }
}
