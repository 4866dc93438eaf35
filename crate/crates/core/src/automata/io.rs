//! JSON form of automata.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Acceptance, Automaton};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransitionJson {
    pub from: String,
    pub props: Vec<String>,
    pub to: String,
}

/// `{states, initial, alphabet, final, acceptance, transitions}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AutomatonJson {
    pub states: Vec<String>,
    pub initial: Vec<String>,
    pub alphabet: Vec<String>,
    #[serde(rename = "final")]
    pub finals: Vec<String>,
    pub acceptance: Acceptance,
    pub transitions: Vec<TransitionJson>,
}

impl TryFrom<AutomatonJson> for Automaton {
    type Error = Error;

    fn try_from(j: AutomatonJson) -> Result<Self> {
        let mut edges = Vec::new();
        for t in j.transitions {
            if t.props.is_empty() {
                return Err(Error::MalformedAutomaton(format!(
                    "transition {} -> {} has no propositions",
                    t.from, t.to
                )));
            }
            for p in t.props {
                edges.push((t.from.clone(), p, t.to.clone()));
            }
        }
        Automaton::new(j.states, j.initial, j.alphabet, j.finals, j.acceptance, edges)
    }
}

impl From<&Automaton> for AutomatonJson {
    fn from(a: &Automaton) -> Self {
        let mut transitions = Vec::new();
        for q in a.states() {
            let targets: std::collections::BTreeSet<&String> = a.transitions_from(q).map(|(_, t)| t).collect();
            for t in targets {
                let label = a.edge_label(q, t).expect("target came from an edge");
                transitions.push(TransitionJson {
                    from: q.clone(),
                    props: label.0.into_iter().collect(),
                    to: t.clone(),
                });
            }
        }
        AutomatonJson {
            states: a.states().iter().cloned().collect(),
            initial: a.initial().iter().cloned().collect(),
            alphabet: a.alphabet().iter().cloned().collect(),
            finals: a.finals().iter().cloned().collect(),
            acceptance: a.acceptance(),
            transitions,
        }
    }
}

impl Automaton {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: AutomatonJson = serde_json::from_str(s)?;
        Automaton::try_from(j)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Automaton::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&AutomatonJson::from(self)).expect("automaton serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::example1;
    use super::*;

    #[test]
    fn json_round_trip() {
        let a = example1();
        let back = Automaton::from_json_str(&a.to_json_string()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn parses_schema() {
        let a = Automaton::from_json_str(
            r#"{"states":["a","b"],"initial":["a"],"alphabet":["p","r"],"final":["b"],
                "acceptance":"cobuchi",
                "transitions":[{"from":"a","props":["p","r"],"to":"b"},{"from":"b","props":["true"],"to":"b"}]}"#,
        )
        .unwrap();
        assert_eq!(a.edge_label("a", "b").unwrap().to_string(), "p|r");
        assert_eq!(a.acceptance(), Acceptance::Cobuchi);
    }

    #[test]
    fn rejects_bad_acceptance() {
        let r = Automaton::from_json_str(
            r#"{"states":["a"],"initial":["a"],"alphabet":[],"final":[],"acceptance":"rabin","transitions":[]}"#,
        );
        assert!(matches!(r, Err(Error::Json(_))));
    }
}
