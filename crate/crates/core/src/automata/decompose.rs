//! Decomposition of the complement automaton into accepting run fragments,
//! triplets, and partition buckets.
//!
//! A run fragment is the finite serialization of a lasso-shaped accepting run:
//! a simple prefix path from an initial state, a junction edge into a final
//! state `f`, a simple cycle through `f`, and a trailing copy of `f`. Prefix
//! and cycle avoid self-loops; a self-loop on `f` is the one-state cycle.
//! The junction edge is never a self-loop, which keeps each lasso canonical.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Automaton, EdgeLabel, Prop, State};
use crate::error::{Error, Result};
use crate::system::LabelingFunction;

/// Serialized lasso `(prefix.., loop.., loop[0])`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunFragment(pub Vec<State>);

impl fmt::Display for RunFragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.join(","))
    }
}

/// A window `(q, q', q'')` of three consecutive fragment states.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet(pub State, pub State, pub State);

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0, self.1, self.2)
    }
}

/// Bucket key `(q, q', Δ(q'))`; all triplets sharing it share one certificate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartitionKey {
    pub source: State,
    pub target: State,
    pub successors: BTreeSet<State>,
}

impl fmt::Display for PartitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let succ: Vec<&str> = self.successors.iter().map(String::as_str).collect();
        write!(f, "({},{},{{{}}})", self.source, self.target, succ.join(","))
    }
}

impl PartitionKey {
    pub fn of(a: &Automaton, source: &str, target: &str) -> Result<Self> {
        Ok(PartitionKey { source: source.to_string(), target: target.to_string(), successors: a.successors(target)? })
    }

    /// `σ(q, q')`, the label whose region must start below the level set.
    pub fn source_label(&self, a: &Automaton) -> Result<EdgeLabel> {
        a.edge_label(&self.source, &self.target)
            .ok_or_else(|| Error::NoEdge { from: self.source.clone(), to: self.target.clone() })
    }

    /// Label of the merged unsafe region: every edge leaving `q'` except its
    /// self-loop, plus the self-loop when a triplet of the bucket ends on it.
    pub fn target_label(&self, a: &Automaton, triplets: &BTreeSet<Triplet>) -> Result<EdgeLabel> {
        let keep_self = triplets.iter().any(|t| t.2 == self.target);
        let mut label: Option<EdgeLabel> = None;
        for q2 in &self.successors {
            if *q2 == self.target && !keep_self {
                continue;
            }
            let l = a
                .edge_label(&self.target, q2)
                .ok_or_else(|| Error::NoEdge { from: self.target.clone(), to: q2.clone() })?;
            label = Some(match label {
                None => l,
                Some(acc) => acc.union(&l),
            });
        }
        Ok(label.unwrap_or_else(|| EdgeLabel(BTreeSet::new())))
    }
}

/// All run fragments of `a`, sorted lexicographically.
pub fn run_fragments(a: &Automaton) -> Vec<RunFragment> {
    let (names, adj) = a.indexed_graph();
    let finals: Vec<usize> = (0..names.len()).filter(|&i| a.finals().contains(names[i])).collect();

    let mut loops: Vec<Vec<usize>> = Vec::new();
    for &f in &finals {
        if a.has_self_loop(names[f]) {
            loops.push(vec![f]);
        }
        let mut path = vec![f];
        let mut on_path = vec![false; names.len()];
        on_path[f] = true;
        cycles_through(&adj, f, &mut path, &mut on_path, &mut loops);
    }

    let mut out = BTreeSet::new();
    for q0 in a.initial() {
        let start = names.iter().position(|n| *n == q0).expect("initial state is a state");
        let mut path = vec![start];
        let mut on_path = vec![false; names.len()];
        on_path[start] = true;
        let mut prefixes = Vec::new();
        simple_paths(&adj, &mut path, &mut on_path, &mut prefixes);
        for prefix in &prefixes {
            let last = *prefix.last().expect("prefix is non-empty");
            for cycle in &loops {
                if adj[last].contains(&cycle[0]) {
                    let states = prefix
                        .iter()
                        .chain(cycle.iter())
                        .chain(std::iter::once(&cycle[0]))
                        .map(|&i| names[i].clone())
                        .collect();
                    out.insert(RunFragment(states));
                }
            }
        }
    }
    out.into_iter().collect()
}

fn cycles_through(
    adj: &[Vec<usize>],
    f: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    let v = *path.last().unwrap();
    for &w in &adj[v] {
        if w == f {
            if path.len() >= 2 {
                out.push(path.clone());
            }
        } else if !on_path[w] {
            on_path[w] = true;
            path.push(w);
            cycles_through(adj, f, path, on_path, out);
            path.pop();
            on_path[w] = false;
        }
    }
}

fn simple_paths(adj: &[Vec<usize>], path: &mut Vec<usize>, on_path: &mut [bool], out: &mut Vec<Vec<usize>>) {
    out.push(path.clone());
    let v = *path.last().unwrap();
    for &w in &adj[v] {
        if !on_path[w] {
            on_path[w] = true;
            path.push(w);
            simple_paths(adj, path, on_path, out);
            path.pop();
            on_path[w] = false;
        }
    }
}

/// `R^p`: fragments grouped by the label of their first edge. A fragment
/// whose first edge carries several propositions (or `⊤`) appears under each.
/// Every alphabet proposition is a key, possibly with no fragments.
pub fn group_by_initial_prop(a: &Automaton, fragments: &[RunFragment]) -> Result<BTreeMap<Prop, Vec<RunFragment>>> {
    let mut out: BTreeMap<Prop, Vec<RunFragment>> = a.alphabet().iter().map(|p| (p.clone(), Vec::new())).collect();
    for frag in fragments {
        let (q0, q1) = (&frag.0[0], &frag.0[1]);
        let label = a.edge_label(q0, q1).ok_or_else(|| Error::NoEdge { from: q0.clone(), to: q1.clone() })?;
        let props: Vec<Prop> =
            if label.is_top() { a.alphabet().iter().cloned().collect() } else { label.0.iter().cloned().collect() };
        for p in props {
            out.get_mut(&p).ok_or_else(|| Error::UnknownProposition(p.clone()))?.push(frag.clone());
        }
    }
    Ok(out)
}

/// Length-3 windows of a fragment, in order.
pub fn triplets_of(fragment: &RunFragment) -> Vec<Triplet> {
    fragment.0.windows(3).map(|w| Triplet(w[0].clone(), w[1].clone(), w[2].clone())).collect()
}

pub fn triplets_of_set<'a>(fragments: impl IntoIterator<Item = &'a RunFragment>) -> BTreeSet<Triplet> {
    fragments.into_iter().flat_map(triplets_of).collect()
}

/// Buckets triplets by `(q, q', Δ(q'))`.
pub fn partition(a: &Automaton, triplets: &BTreeSet<Triplet>) -> Result<BTreeMap<PartitionKey, BTreeSet<Triplet>>> {
    let mut out: BTreeMap<PartitionKey, BTreeSet<Triplet>> = BTreeMap::new();
    for t in triplets {
        let key = PartitionKey::of(a, &t.0, &t.1)?;
        out.entry(key).or_default().insert(t.clone());
    }
    Ok(out)
}

/// A triplet admits a certificate only when the region of its first edge
/// and the region of its second edge are disjoint.
pub fn triplet_feasible(a: &Automaton, t: &Triplet, labeling: &LabelingFunction) -> Result<bool> {
    let first = a.edge_label(&t.0, &t.1).ok_or_else(|| Error::NoEdge { from: t.0.clone(), to: t.1.clone() })?;
    let second = a.edge_label(&t.1, &t.2).ok_or_else(|| Error::NoEdge { from: t.1.clone(), to: t.2.clone() })?;
    Ok(!labeling.labels_intersect(&first, &second)?)
}

fn bucket_feasible(
    a: &Automaton,
    key: &PartitionKey,
    triplets: &BTreeSet<Triplet>,
    labeling: &LabelingFunction,
) -> Result<bool> {
    let src = key.source_label(a)?;
    let dst = key.target_label(a, triplets)?;
    Ok(!labeling.labels_intersect(&src, &dst)?)
}

/// Which buckets need a certificate so that every proposition that can be
/// guaranteed is guaranteed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obligations {
    /// A minimum set of buckets hitting every fragment of a guaranteed proposition.
    pub required: Vec<PartitionKey>,
    /// Propositions whose every fragment contains a feasible bucket.
    pub guaranteed: Vec<Prop>,
    /// Propositions with a fragment that no certificate can block.
    pub unguaranteed: Vec<Prop>,
}

pub fn required_certificates(a: &Automaton, labeling: &LabelingFunction) -> Result<Obligations> {
    let fragments = run_fragments(a);
    let by_prop = group_by_initial_prop(a, &fragments)?;
    let all = triplets_of_set(&fragments);
    let buckets = partition(a, &all)?;
    let mut feasible_keys: Vec<PartitionKey> = Vec::new();
    for (k, ts) in &buckets {
        if bucket_feasible(a, k, ts, labeling)? {
            feasible_keys.push(k.clone());
        }
    }

    let hits = |frag: &RunFragment| -> BTreeSet<usize> {
        triplets_of(frag)
            .iter()
            .filter_map(|t| {
                let key = PartitionKey::of(a, &t.0, &t.1).ok()?;
                feasible_keys.iter().position(|k| *k == key)
            })
            .collect()
    };

    let mut guaranteed = Vec::new();
    let mut unguaranteed = Vec::new();
    let mut must_hit: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    for (p, frags) in &by_prop {
        let sets: Vec<BTreeSet<usize>> = frags.iter().map(hits).collect();
        if sets.iter().all(|s| !s.is_empty()) {
            guaranteed.push(p.clone());
            must_hit.extend(sets);
        } else {
            unguaranteed.push(p.clone());
        }
    }

    let chosen = min_hitting_set(feasible_keys.len(), &must_hit);
    Ok(Obligations {
        required: chosen.into_iter().map(|i| feasible_keys[i].clone()).collect(),
        guaranteed,
        unguaranteed,
    })
}

/// Smallest index set meeting every set in `sets`; exact for up to 20
/// candidates, greedy beyond.
fn min_hitting_set(n: usize, sets: &BTreeSet<BTreeSet<usize>>) -> Vec<usize> {
    if sets.is_empty() {
        return Vec::new();
    }
    if n <= 20 {
        let mut best: Option<u32> = None;
        for mask in 0u32..(1u32 << n) {
            let size = mask.count_ones();
            if best.is_some_and(|b| b.count_ones() <= size) {
                continue;
            }
            if sets.iter().all(|s| s.iter().any(|&i| mask & (1 << i) != 0)) {
                best = Some(mask);
            }
        }
        if let Some(mask) = best {
            return (0..n).filter(|i| mask & (1 << i) != 0).collect();
        }
    }
    let mut remaining: Vec<&BTreeSet<usize>> = sets.iter().collect();
    let mut chosen = BTreeSet::new();
    while !remaining.is_empty() {
        let pick = (0..n)
            .max_by_key(|i| (remaining.iter().filter(|s| s.contains(i)).count(), std::cmp::Reverse(*i)))
            .expect("non-empty candidate list");
        chosen.insert(pick);
        remaining.retain(|s| !s.contains(&pick));
    }
    chosen.into_iter().collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub key: PartitionKey,
    pub triplets: Vec<Triplet>,
    pub source_label: EdgeLabel,
    pub target_label: EdgeLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasible: Option<bool>,
}

/// Everything `decompose` reports about an automaton.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    pub fragments: Vec<RunFragment>,
    pub fragments_by_prop: BTreeMap<Prop, Vec<RunFragment>>,
    pub triplets_by_prop: BTreeMap<Prop, BTreeSet<Triplet>>,
    pub partitions: Vec<PartitionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obligations: Option<Obligations>,
}

impl Decomposition {
    pub fn compute(a: &Automaton, labeling: Option<&LabelingFunction>) -> Result<Self> {
        let fragments = run_fragments(a);
        let fragments_by_prop = group_by_initial_prop(a, &fragments)?;
        let triplets_by_prop = fragments_by_prop.iter().map(|(p, fs)| (p.clone(), triplets_of_set(fs))).collect();
        let all = triplets_of_set(&fragments);
        let mut partitions = Vec::new();
        for (key, ts) in partition(a, &all)? {
            let source_label = key.source_label(a)?;
            let target_label = key.target_label(a, &ts)?;
            let feasible = match labeling {
                Some(l) => Some(!l.labels_intersect(&source_label, &target_label)?),
                None => None,
            };
            partitions.push(PartitionSummary {
                key,
                triplets: ts.into_iter().collect(),
                source_label,
                target_label,
                feasible,
            });
        }
        let obligations = labeling.map(|l| required_certificates(a, l)).transpose()?;
        Ok(Decomposition { fragments, fragments_by_prop, triplets_by_prop, partitions, obligations })
    }
}
