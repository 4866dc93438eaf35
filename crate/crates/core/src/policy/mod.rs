//! Hybrid switching controllers, closed-loop simulation and trace monitoring.

mod controller;

pub use controller::{BlockController, ControllerSpec, Reference};

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::automata::{build_switching, Automaton, PartitionKey, Prop, State, SwitchState, SwitchingAutomaton};
use crate::barrier::{ComposedCertificate, LocalCertificate};
use crate::error::{Error, Result};
use crate::system::{InterconnectedSystem, LabelingFunction, Subsystem};

/// One block controller per subsystem. Subsystems that share an `Arc`
/// share the compiled controller.
#[derive(Clone, Debug)]
pub struct NetworkController {
    blocks: Vec<Arc<BlockController>>,
}

impl NetworkController {
    pub fn new(blocks: Vec<Arc<BlockController>>) -> Self {
        NetworkController { blocks }
    }

    /// Compiles the controller of each certificate for its subsystem.
    /// `certs` holds either one certificate for every subsystem or one per
    /// subsystem.
    pub fn from_certificates(sys: &InterconnectedSystem, certs: &[Arc<LocalCertificate>]) -> Result<Self> {
        let n = sys.n();
        if certs.len() != 1 && certs.len() != n {
            return Err(Error::Config(format!("{} certificates for {n} subsystems", certs.len())));
        }
        let mut cache: HashMap<(*const Subsystem, *const LocalCertificate), Arc<BlockController>> = HashMap::new();
        let mut blocks = Vec::with_capacity(n);
        for i in 0..n {
            let cert = &certs[if certs.len() == 1 { 0 } else { i }];
            let sub = sys.subsystem(i);
            let key = (Arc::as_ptr(sub), Arc::as_ptr(cert));
            if let Some(b) = cache.get(&key) {
                blocks.push(b.clone());
                continue;
            }
            let spec = cert.controller.as_ref().ok_or_else(|| {
                Error::Config(format!("certificate {} has no controller", cert.key.as_deref().unwrap_or("?")))
            })?;
            let b = Arc::new(BlockController::compile(spec, Some(cert.clone()), sub.clone())?);
            cache.insert(key, b.clone());
            blocks.push(b);
        }
        Ok(NetworkController { blocks })
    }

    /// Zero input projected onto every subsystem's input set.
    pub fn fallback(sys: &InterconnectedSystem) -> Self {
        let mut cache: HashMap<*const Subsystem, Arc<BlockController>> = HashMap::new();
        let blocks = sys
            .subsystems()
            .iter()
            .map(|s| {
                cache.entry(Arc::as_ptr(s)).or_insert_with(|| Arc::new(BlockController::fallback(s.clone()))).clone()
            })
            .collect();
        NetworkController { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// The stacked input `u(x)` of the whole network.
    pub fn input(&self, sys: &InterconnectedSystem, x: &[f64]) -> Result<Vec<f64>> {
        if self.blocks.len() != sys.n() || x.len() != sys.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "controller for {} blocks applied to a {}-block system with state length {}",
                self.blocks.len(),
                sys.n(),
                x.len()
            )));
        }
        let parts: Vec<Vec<f64>> = self.blocks.par_iter().enumerate().map(|(i, b)| b.input(sys.block(x, i))).collect();
        Ok(parts.concat())
    }
}

/// `ρ(x, q_m) = u_{μ(q_m')}(x)`: the switching automaton plus a controller
/// per partition key, with a fallback where no certificate is bound.
#[derive(Clone, Debug)]
pub struct HybridPolicy {
    switching: SwitchingAutomaton,
    controllers: BTreeMap<PartitionKey, NetworkController>,
    fallback: NetworkController,
}

/// Result of [`policy_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyStep {
    pub input: Vec<f64>,
    pub next: SwitchState,
    /// True when no controller is bound to the new switching state.
    pub fallback: bool,
}

impl HybridPolicy {
    pub fn new(
        switching: SwitchingAutomaton,
        controllers: BTreeMap<PartitionKey, NetworkController>,
        fallback: NetworkController,
    ) -> Self {
        HybridPolicy { switching, controllers, fallback }
    }

    /// Builds the switching automaton of `a` (Büchi acceptance, i.e. the
    /// complement of the specification) and binds each key's certificates.
    pub fn from_certificates(
        a: &Automaton,
        sys: &InterconnectedSystem,
        certs: &[(PartitionKey, Vec<Arc<LocalCertificate>>)],
    ) -> Result<Self> {
        let switching = build_switching(a)?;
        let mut controllers = BTreeMap::new();
        for (key, cs) in certs {
            if !switching.states().iter().any(|s| s.key() == Some(key)) {
                return Err(Error::Config(format!("partition key {key} is not a state of the switching automaton")));
            }
            controllers.insert(key.clone(), NetworkController::from_certificates(sys, cs)?);
        }
        Ok(HybridPolicy::new(switching, controllers, NetworkController::fallback(sys)))
    }

    pub fn switching(&self) -> &SwitchingAutomaton {
        &self.switching
    }

    pub fn controllers(&self) -> &BTreeMap<PartitionKey, NetworkController> {
        &self.controllers
    }

    /// The controller active in switching state `s`.
    pub fn controller_for(&self, s: &SwitchState) -> (&NetworkController, bool) {
        match s.key().and_then(|k| self.controllers.get(k)) {
            Some(c) => (c, false),
            None => (&self.fallback, true),
        }
    }
}

/// Reads `L(x)` in switching state `q_m`, moves to `q_m'` and evaluates the
/// controller bound to `q_m'` at `x`.
pub fn policy_step(
    p: &HybridPolicy,
    sys: &InterconnectedSystem,
    labeling: &LabelingFunction,
    x: &[f64],
    q_m: &SwitchState,
) -> Result<PolicyStep> {
    let label = labeling.label(x)?;
    let next = p.switching.step(q_m, label)?.clone();
    let (ctrl, fallback) = p.controller_for(&next);
    Ok(PolicyStep { input: ctrl.input(sys, x)?, next, fallback })
}

/// A closed-loop run. `labels[k] = L(x(k))` and `switching[k]` is the
/// switching state after reading `labels[k]`; its controller produced
/// `inputs[k]`. The last label and switching state belong to the final
/// state, which has no input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub block_count: usize,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub switching: Vec<SwitchState>,
    pub labels: Vec<Prop>,
    /// Composed barrier value per state, when a certificate was supplied.
    pub barrier: Option<Vec<f64>>,
    /// Steps whose input came from the fallback controller.
    pub fallback_steps: Vec<usize>,
}

/// Rolls the closed loop forward for `horizon` steps from `x0`, starting in
/// the first initial state of the switching automaton.
pub fn simulate(
    sys: &InterconnectedSystem,
    p: &HybridPolicy,
    labeling: &LabelingFunction,
    x0: &[f64],
    horizon: usize,
    barrier: Option<&ComposedCertificate>,
) -> Result<Trace> {
    if horizon == 0 {
        return Err(Error::Config("the horizon must be at least 1".into()));
    }
    if x0.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, system has {} states",
            x0.len(),
            sys.state_dim()
        )));
    }
    let mut q =
        p.switching.initial().first().cloned().ok_or_else(|| Error::MalformedAutomaton("no initial state".into()))?;
    let mut trace = Trace {
        block_count: sys.n(),
        states: Vec::with_capacity(horizon + 1),
        inputs: Vec::with_capacity(horizon),
        switching: Vec::with_capacity(horizon + 1),
        labels: Vec::with_capacity(horizon + 1),
        barrier: barrier.map(|_| Vec::with_capacity(horizon + 1)),
        fallback_steps: Vec::new(),
    };
    let mut x = x0.to_vec();
    for k in 0..=horizon {
        if let (Some(values), Some(c)) = (trace.barrier.as_mut(), barrier) {
            values.push(c.eval(&x)?);
        }
        let label = labeling.label(&x)?.clone();
        q = p.switching.step(&q, &label)?.clone();
        trace.labels.push(label);
        trace.switching.push(q.clone());
        if k == horizon {
            trace.states.push(x);
            break;
        }
        let (ctrl, fallback) = p.controller_for(&q);
        if fallback {
            trace.fallback_steps.push(k);
        }
        let u = ctrl.input(sys, &x)?;
        let next = sys.step(&x, &u)?;
        trace.states.push(std::mem::replace(&mut x, next));
        trace.inputs.push(u);
    }
    Ok(trace)
}

/// Per-step minimum and maximum over all state components.
pub fn envelope(t: &Trace) -> Vec<(f64, f64)> {
    t.states
        .iter()
        .map(|x| x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v))))
        .collect()
}

impl Trace {
    /// CSV with columns `step, q_m, label, min, max`, then `barrier` when
    /// recorded and `x0..` when `full` is set.
    pub fn write_csv(&self, path: impl AsRef<Path>, full: bool) -> Result<()> {
        let file = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        self.write_csv_to(file, full)
    }

    pub fn write_csv_to<W: Write>(&self, out: W, full: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["step", "q_m", "label", "min", "max"].iter().map(|s| s.to_string()).collect();
        if self.barrier.is_some() {
            header.push("barrier".into());
        }
        if full {
            header.extend((0..self.states.first().map_or(0, Vec::len)).map(|i| format!("x{i}")));
        }
        w.write_record(&header)?;
        for (k, (lo, hi)) in envelope(self).into_iter().enumerate() {
            let mut row = vec![
                k.to_string(),
                self.switching[k].to_string(),
                self.labels[k].clone(),
                lo.to_string(),
                hi.to_string(),
            ];
            if let Some(b) = &self.barrier {
                row.push(b[k].to_string());
            }
            if full {
                row.extend(self.states[k].iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Writes `step, min, max`.
pub fn write_envelope_csv(t: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["step", "min", "max"])?;
    for (k, (lo, hi)) in envelope(t).into_iter().enumerate() {
        w.write_record([k.to_string(), lo.to_string(), hi.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

/// Run of the complement automaton from one initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRun {
    pub initial: State,
    /// `q(0) = initial`, `q(k+1) = δ(q(k), L(x(k)))`.
    pub states: Vec<State>,
    /// Indices `k` with `q(k)` final.
    pub final_visits: Vec<usize>,
    /// Label index at which the run had no transition, if it got stuck.
    pub stuck_at: Option<usize>,
}

/// Finite-horizon evidence for the specification: the complement automaton
/// must not reach a final state along the observed labels. Passing is a
/// surrogate, not a proof of the infinite-horizon property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub runs: Vec<MonitorRun>,
    pub pass: bool,
    pub steps: usize,
    pub fallback_steps: usize,
    pub note: String,
}

impl MonitorReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Relabels the trace with `labeling` and runs `a` on the labels.
pub fn monitor_trace(t: &Trace, a: &Automaton, labeling: &LabelingFunction) -> Result<MonitorReport> {
    let labels: Vec<Prop> = t.states.iter().map(|x| labeling.label(x).cloned()).collect::<Result<_>>()?;
    let mut r = monitor_labels(&labels, a)?;
    r.fallback_steps = t.fallback_steps.len();
    Ok(r)
}

/// Runs `a` on a label sequence.
pub fn monitor_labels(labels: &[Prop], a: &Automaton) -> Result<MonitorReport> {
    for l in labels {
        if l != crate::automata::TOP && !a.alphabet().contains(l) {
            return Err(Error::UnknownProposition(l.clone()));
        }
    }
    let runs: Vec<MonitorRun> = a
        .initial()
        .iter()
        .map(|q0| {
            let mut states = vec![q0.clone()];
            let mut stuck_at = None;
            for (k, l) in labels.iter().enumerate() {
                match a.step(states.last().unwrap(), l) {
                    Some(q) => states.push(q.clone()),
                    None => {
                        stuck_at = Some(k);
                        break;
                    }
                }
            }
            let final_visits =
                states.iter().enumerate().filter(|(_, q)| a.finals().contains(*q)).map(|(k, _)| k).collect();
            MonitorRun { initial: q0.clone(), states, final_visits, stuck_at }
        })
        .collect();
    let pass = runs.iter().all(|r| r.final_visits.is_empty());
    Ok(MonitorReport {
        runs,
        pass,
        steps: labels.len(),
        fallback_steps: 0,
        note: "finite-horizon surrogate: pass means no final state of the complement automaton was visited".into(),
    })
}
