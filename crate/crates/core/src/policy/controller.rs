//! Local controllers `u_i(x_i)` attached to barrier certificates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::barrier::LocalCertificate;
use crate::error::{Error, Result};
use crate::geometry::norm_inf;
use crate::poly::Polynomial;
use crate::system::{InputSpec, Subsystem};

/// Reference internal input `w*` used by the determinized rule.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// Centroid of the internal-input set.
    #[default]
    Centroid,
    /// Every component equal to the given value.
    Uniform(f64),
    /// An explicit vector.
    Point(Vec<f64>),
}

impl Reference {
    pub fn resolve(&self, s: &Subsystem) -> Result<Vec<f64>> {
        let w = match self {
            Reference::Centroid => s.internal_region.centroid().unwrap_or_default(),
            Reference::Uniform(v) => vec![*v; s.internal_dim],
            Reference::Point(p) => p.clone(),
        };
        if w.len() != s.internal_dim {
            return Err(Error::Config(format!(
                "reference internal input has length {}, subsystem expects {}",
                w.len(),
                s.internal_dim
            )));
        }
        Ok(w)
    }
}

/// How a certificate's controller is described in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerSpec {
    /// One polynomial per input component, clamped to the input box.
    Polynomial(Vec<Polynomial>),
    /// Smallest input of a finite set, in ascending order, whose predicted
    /// successor at `w*` satisfies the certificate's decrease inequality.
    /// When no input qualifies, the input with the least violation is used.
    /// An input box needs an explicit candidate list.
    Determinized {
        #[serde(default)]
        reference: Reference,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        candidates: Option<Vec<Vec<f64>>>,
    },
    Constant(Vec<f64>),
}

#[derive(Debug)]
enum Kind {
    Polynomial(Vec<Polynomial>),
    Constant(Vec<f64>),
    Determinized {
        cert: Arc<LocalCertificate>,
        w_ref: Vec<f64>,
        w_summary: Option<Vec<f64>>,
        w_norm: f64,
        candidates: Vec<Vec<f64>>,
    },
}

/// A controller ready to evaluate on one subsystem.
#[derive(Debug)]
pub struct BlockController {
    kind: Kind,
    subsystem: Arc<Subsystem>,
}

impl BlockController {
    pub fn compile(
        spec: &ControllerSpec,
        cert: Option<Arc<LocalCertificate>>,
        subsystem: Arc<Subsystem>,
    ) -> Result<Self> {
        let nu = subsystem.input_dim();
        let kind = match spec {
            ControllerSpec::Polynomial(ps) => {
                if ps.len() != nu || ps.iter().any(|p| p.dim() != subsystem.state_dim) {
                    return Err(Error::Config(format!(
                        "polynomial controller needs {nu} components in {} variables",
                        subsystem.state_dim
                    )));
                }
                Kind::Polynomial(ps.clone())
            }
            ControllerSpec::Constant(u) => {
                if u.len() != nu {
                    return Err(Error::Config(format!("constant input has length {}, expected {nu}", u.len())));
                }
                Kind::Constant(subsystem.inputs.project(u))
            }
            ControllerSpec::Determinized { reference, candidates } => {
                let cert = cert.ok_or_else(|| Error::Config("the determinized rule needs a certificate".into()))?;
                let mut candidates = match (candidates, &subsystem.inputs) {
                    (Some(c), inputs) => {
                        if c.is_empty() || c.iter().any(|u| u.len() != nu || !inputs.contains(u)) {
                            return Err(Error::Config("determinized candidates must be admissible inputs".into()));
                        }
                        c.clone()
                    }
                    (None, InputSpec::Finite(set)) => set.clone(),
                    (None, InputSpec::Box(_)) => {
                        return Err(Error::Config(
                            "the determinized rule over an input box needs a candidate list".into(),
                        ))
                    }
                };
                candidates.sort_by(|a, b| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                let w_ref = reference.resolve(&subsystem)?;
                let w_norm = norm_inf(&w_ref);
                let w_summary = subsystem.dynamics.summarize_internal(&w_ref);
                Kind::Determinized { cert, w_ref, w_summary, w_norm, candidates }
            }
        };
        Ok(BlockController { kind, subsystem })
    }

    /// Zero input projected onto the input set.
    pub fn fallback(subsystem: Arc<Subsystem>) -> Self {
        let zero = vec![0.0; subsystem.input_dim()];
        BlockController { kind: Kind::Constant(subsystem.inputs.project(&zero)), subsystem }
    }

    pub fn subsystem(&self) -> &Arc<Subsystem> {
        &self.subsystem
    }

    /// `u(x)`.
    pub fn input(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Polynomial(ps) => {
                let raw: Vec<f64> = ps.iter().map(|p| p.eval(x)).collect();
                self.subsystem.inputs.project(&raw)
            }
            Kind::Constant(u) => u.clone(),
            Kind::Determinized { cert, w_ref, w_summary, w_norm, candidates } => {
                let b = cert.barrier.eval(x);
                let rhs = cert.decrease_bound(b, *w_norm);
                let mut best: Option<(f64, &Vec<f64>)> = None;
                let mut next = vec![0.0; self.subsystem.state_dim];
                for u in candidates {
                    match w_summary {
                        Some(sm) => self.subsystem.dynamics.step_summarized(x, sm, u, &mut next),
                        None => self.subsystem.dynamics.step(x, w_ref, u, &mut next),
                    }
                    let excess = cert.barrier.eval(&next) - rhs;
                    if excess <= 0.0 {
                        return u.clone();
                    }
                    if best.is_none_or(|(e, _)| excess < e) {
                        best = Some((excess, u));
                    }
                }
                best.map(|(_, u)| u.clone()).unwrap_or_default()
            }
        }
    }
}
