//! Control subsystems, their interconnection, and labeling functions.

mod builders;
mod custom;
pub mod expr;
mod labeling;
mod network;

pub use builders::{
    build_kuramoto_network, build_room_network, kuramoto_subsystem, room_subsystem, KuramotoDynamics, KuramotoKernel,
    KuramotoParams, RoomDynamics, RoomParams,
};
pub use custom::{CustomSystemJson, LabelingJson, SubsystemJson};
pub use labeling::LabelingFunction;
pub use network::{step_interconnected, InterconnectedSystem, NetworkKernel, Wiring};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Hyperbox, Region};

/// One-step transition map `x⁺ = f(x, w, u)` of a subsystem.
pub trait Dynamics: Send + Sync + fmt::Debug {
    /// Writes `f(x, w, u)` into `next` (length = state dimension).
    fn step(&self, x: &[f64], w: &[f64], u: &[f64], next: &mut [f64]);

    /// A short summary of `w` from which [`Dynamics::step_summarized`] can
    /// compute the update, or `None` when the full vector is needed.
    fn summarize_internal(&self, _w: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `f(x, w, u)` given `summarize_internal(w)`. Only called when
    /// `summarize_internal` returned a summary.
    fn step_summarized(&self, _x: &[f64], _summary: &[f64], _u: &[f64], _next: &mut [f64]) {
        panic!("step_summarized called on dynamics without an internal summary")
    }
}

/// Output map `h(x)`.
pub trait OutputMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

/// `h(x) = x`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOutput(pub usize);

impl OutputMap for IdentityOutput {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
}

/// Input set `U`: a box or a finite list of input vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputSpec {
    Box(Hyperbox),
    Finite(Vec<Vec<f64>>),
}

impl InputSpec {
    pub fn dim(&self) -> usize {
        match self {
            InputSpec::Box(b) => b.dim(),
            InputSpec::Finite(v) => v.first().map_or(0, Vec::len),
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        match self {
            InputSpec::Box(b) => b.contains(u),
            InputSpec::Finite(v) => v.iter().any(|c| c.as_slice() == u),
        }
    }

    /// Closest admissible input (per-axis clamp for boxes, nearest element
    /// in the infinity norm for finite sets).
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        match self {
            InputSpec::Box(b) => u.iter().enumerate().map(|(i, v)| v.clamp(b.lo()[i], b.hi()[i])).collect(),
            InputSpec::Finite(v) => v
                .iter()
                .min_by(|a, b| {
                    let da = crate::geometry::norm_inf(&diff(a, u));
                    let db = crate::geometry::norm_inf(&diff(b, u));
                    da.total_cmp(&db)
                })
                .cloned()
                .unwrap_or_default(),
        }
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// A control subsystem `S_i = (X_i, W_i, U_i, f_i, Y_i, h_i)`.
#[derive(Clone, Debug)]
pub struct Subsystem {
    pub name: String,
    pub state_dim: usize,
    pub internal_dim: usize,
    pub inputs: InputSpec,
    pub state_region: Region,
    pub internal_region: Region,
    pub output: Arc<dyn OutputMap>,
    pub dynamics: Arc<dyn Dynamics>,
}

/// Result of one subsystem step; leaving the declared regions is flagged
/// rather than treated as an error.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub next: Vec<f64>,
    pub in_domain: bool,
}

impl Subsystem {
    pub fn new(
        name: impl Into<String>,
        state_region: Region,
        internal_region: Region,
        inputs: InputSpec,
        output: Arc<dyn OutputMap>,
        dynamics: Arc<dyn Dynamics>,
    ) -> Result<Self> {
        let name = name.into();
        let state_dim =
            state_region.dim().ok_or_else(|| Error::InvalidSystem(format!("{name}: empty state region")))?;
        let internal_dim = internal_region.dim().unwrap_or(0);
        if let InputSpec::Finite(v) = &inputs {
            if v.is_empty() {
                return Err(Error::InvalidSystem(format!("{name}: empty input set")));
            }
            if v.iter().any(|u| u.len() != v[0].len()) {
                return Err(Error::InvalidSystem(format!("{name}: input vectors differ in length")));
            }
        }
        Ok(Subsystem { name, state_dim, internal_dim, inputs, state_region, internal_region, output, dynamics })
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output.dim()
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.output.dim()];
        self.output.eval(x, &mut y);
        y
    }

    /// `f(x, w, u)` without dimension checks.
    #[inline]
    pub fn apply(&self, x: &[f64], w: &[f64], u: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.state_dim];
        self.dynamics.step(x, w, u, &mut next);
        next
    }

    /// One checked step.
    pub fn step(&self, x: &[f64], w: &[f64], u: &[f64]) -> Result<Step> {
        self.check_dims(x, w, u)?;
        let next = self.apply(x, w, u);
        let in_domain = self.state_region.contains(x)
            && (self.internal_dim == 0 || self.internal_region.contains(w))
            && self.inputs.contains(u);
        Ok(Step { next, in_domain })
    }

    fn check_dims(&self, x: &[f64], w: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.state_dim || w.len() != self.internal_dim || u.len() != self.input_dim() {
            return Err(Error::InvalidSystem(format!(
                "{}: expected (x, w, u) of lengths ({}, {}, {}), got ({}, {}, {})",
                self.name,
                self.state_dim,
                self.internal_dim,
                self.input_dim(),
                x.len(),
                w.len(),
                u.len()
            )));
        }
        Ok(())
    }
}

/// `step_subsystem(s, x, u, w)`: convenience wrapper around [`Subsystem::step`].
pub fn step_subsystem(s: &Subsystem, x: &[f64], u: &[f64], w: &[f64]) -> Result<Step> {
    s.step(x, w, u)
}
