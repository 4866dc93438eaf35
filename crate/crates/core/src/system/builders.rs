//! Ready-made networks: a ring of heated rooms and all-to-all Kuramoto
//! oscillators.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    Dynamics, IdentityOutput, InputSpec, InterconnectedSystem, LabelingFunction, NetworkKernel, Subsystem, Wiring,
};
use crate::error::{Error, Result};
use crate::geometry::{Hyperbox, Region};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoomParams {
    /// Heat exchange with each neighbor.
    pub alpha: f64,
    /// Heat exchange with the environment.
    pub alpha_e: f64,
    /// Heater coefficient.
    pub alpha_h: f64,
    pub t_env: f64,
    pub t_heater: f64,
}

impl Default for RoomParams {
    fn default() -> Self {
        RoomParams { alpha: 0.05, alpha_e: 0.008, alpha_h: 0.0036, t_env: 15.0, t_heater: 55.0 }
    }
}

/// `T⁺ = a T + α (w_1 + w_2) + α_e T_e + α_h T_h u` with
/// `a = 1 - 2α - α_e - α_h u`.
#[derive(Debug, Clone, Copy)]
pub struct RoomDynamics(pub RoomParams);

impl Dynamics for RoomDynamics {
    #[inline]
    fn step(&self, x: &[f64], w: &[f64], u: &[f64], next: &mut [f64]) {
        let p = &self.0;
        let a = 1.0 - 2.0 * p.alpha - p.alpha_e - p.alpha_h * u[0];
        next[0] = a * x[0] + p.alpha * (w[0] + w[1]) + p.alpha_e * p.t_env + p.alpha_h * p.t_heater * u[0];
    }
}

/// One room: `X = [0, 45]`, `W = [0, 45]^2`, `U = [0, 1]`.
pub fn room_subsystem(params: RoomParams) -> Result<Subsystem> {
    Subsystem::new(
        "room",
        Region::interval(0.0, 45.0)?,
        Region::cube(0.0, 45.0, 2)?,
        InputSpec::Box(Hyperbox::interval(0.0, 1.0)?),
        Arc::new(IdentityOutput(1)),
        Arc::new(RoomDynamics(params)),
    )
}

/// Ring of `n` rooms sharing one subsystem description, with the labeling
/// `p0: [20.5, 22.5]^n`, `p1: [0, 20]^n`, `p2: [23, 45]^n`, `p3` elsewhere.
pub fn build_room_network(n: usize, params: RoomParams) -> Result<(InterconnectedSystem, LabelingFunction)> {
    if n < 3 {
        return Err(Error::InvalidSystem("the room ring needs at least 3 rooms".into()));
    }
    let room = Arc::new(room_subsystem(params)?);
    let sys = InterconnectedSystem::new(vec![room; n], Wiring::Ring)?;
    let labeling = LabelingFunction::new(
        Region::cube(0.0, 45.0, n)?,
        vec![
            ("p0".into(), Region::cube(20.5, 22.5, n)?),
            ("p1".into(), Region::cube(0.0, 20.0, n)?),
            ("p2".into(), Region::cube(23.0, 45.0, n)?),
        ],
        Some("p3".into()),
    )?;
    Ok((sys, labeling))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KuramotoParams {
    /// Sampling time.
    pub tau: f64,
    /// Coupling strength.
    pub coupling: f64,
    /// Natural frequency.
    pub omega: f64,
    /// Finite input set.
    pub inputs: Vec<f64>,
}

impl Default for KuramotoParams {
    fn default() -> Self {
        KuramotoParams { tau: 0.2, coupling: 1.0, omega: 1.0, inputs: (-6..=6).map(|k| k as f64 / 10.0).collect() }
    }
}

/// Local oscillator update with the other `n - 1` phases as internal input:
/// `θ⁺ = θ + τΩ + (τK/n) Σ_j sin(w_j - θ) + u`, wrapped to `[0, 2π)`.
#[derive(Debug, Clone)]
pub struct KuramotoDynamics {
    pub params: KuramotoParams,
    pub n: usize,
}

impl Dynamics for KuramotoDynamics {
    fn step(&self, x: &[f64], w: &[f64], u: &[f64], next: &mut [f64]) {
        let p = &self.params;
        let theta = x[0];
        let coupling: f64 = w.iter().map(|wj| (wj - theta).sin()).sum();
        let raw = theta + p.tau * p.omega + p.tau * p.coupling / self.n as f64 * coupling + u[0];
        next[0] = raw.rem_euclid(TWO_PI);
    }

    /// `(Σ sin w_j, Σ cos w_j)`.
    fn summarize_internal(&self, w: &[f64]) -> Option<Vec<f64>> {
        let (s, c) = w.iter().fold((0.0, 0.0), |(s, c), t| (s + t.sin(), c + t.cos()));
        Some(vec![s, c])
    }

    fn step_summarized(&self, x: &[f64], summary: &[f64], u: &[f64], next: &mut [f64]) {
        let p = &self.params;
        let (si, ci) = x[0].sin_cos();
        let coupling = ci * summary[0] - si * summary[1];
        let raw = x[0] + p.tau * p.omega + p.tau * p.coupling / self.n as f64 * coupling + u[0];
        next[0] = raw.rem_euclid(TWO_PI);
    }
}

/// Whole-network oscillator update in `O(n)`, using
/// `Σ_j sin(θ_j - θ_i) = cos θ_i Σ_j sin θ_j - sin θ_i Σ_j cos θ_j`.
#[derive(Debug, Clone)]
pub struct KuramotoKernel {
    pub params: KuramotoParams,
}

impl NetworkKernel for KuramotoKernel {
    fn step(&self, x: &[f64], u: &[f64], next: &mut [f64]) {
        let p = &self.params;
        let n = x.len() as f64;
        let (s, c) = x.iter().fold((0.0, 0.0), |(s, c), t| (s + t.sin(), c + t.cos()));
        let gain = p.tau * p.coupling / n;
        for i in 0..x.len() {
            let (si, ci) = x[i].sin_cos();
            let raw = x[i] + p.tau * p.omega + gain * (ci * s - si * c) + u[i];
            next[i] = raw.rem_euclid(TWO_PI);
        }
    }
}

/// One oscillator in a network of `n`: `X = [0, 2π]`, `W = [0, 2π]^(n-1)`.
pub fn kuramoto_subsystem(params: &KuramotoParams, n: usize) -> Result<Subsystem> {
    if params.inputs.is_empty() {
        return Err(Error::InvalidSystem("the oscillator input set is empty".into()));
    }
    Subsystem::new(
        "oscillator",
        Region::interval(0.0, TWO_PI)?,
        Region::cube(0.0, TWO_PI, n - 1)?,
        InputSpec::Finite(params.inputs.iter().map(|&v| vec![v]).collect()),
        Arc::new(IdentityOutput(1)),
        Arc::new(KuramotoDynamics { params: params.clone(), n }),
    )
}

/// All-to-all network of `n` oscillators with the fast kernel installed and
/// the labeling `p0..p5` on the six phase bands, `p6` elsewhere.
pub fn build_kuramoto_network(n: usize, params: KuramotoParams) -> Result<(InterconnectedSystem, LabelingFunction)> {
    if n < 2 {
        return Err(Error::InvalidSystem("the oscillator network needs at least 2 oscillators".into()));
    }
    let osc = Arc::new(kuramoto_subsystem(&params, n)?);
    let sys =
        InterconnectedSystem::new(vec![osc; n], Wiring::Complete)?.with_kernel(Arc::new(KuramotoKernel { params }));
    let bands = [
        (0.0, PI / 3.0),
        (5.0 * PI / 12.0, 7.0 * PI / 12.0),
        (2.0 * PI / 3.0, PI),
        (PI, 4.0 * PI / 3.0),
        (17.0 * PI / 12.0, 19.0 * PI / 12.0),
        (5.0 * PI / 3.0, TWO_PI),
    ];
    let entries = bands
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| Ok((format!("p{k}"), Region::cube(lo, hi, n)?)))
        .collect::<Result<Vec<_>>>()?;
    let labeling = LabelingFunction::new(Region::cube(0.0, TWO_PI, n)?, entries, Some("p6".into()))?;
    Ok((sys, labeling))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_step_matches_hand_computation() {
        let room = room_subsystem(RoomParams::default()).unwrap();
        let u = -0.002398 * 21.5 + 0.5357;
        let next = room.step(&[21.5], &[21.5, 21.5], &[u]).unwrap();
        assert!((next.next[0] - 21.5064).abs() < 1e-4, "{}", next.next[0]);
        assert!(next.in_domain);
    }

    #[test]
    fn room_step_flags_out_of_domain() {
        let room = room_subsystem(RoomParams::default()).unwrap();
        assert!(!room.step(&[50.0], &[21.0, 21.0], &[0.5]).unwrap().in_domain);
        assert!(room.step(&[21.0], &[21.0], &[0.5]).is_err());
    }

    #[test]
    fn two_oscillators() {
        let (sys, _) = build_kuramoto_network(2, KuramotoParams::default()).unwrap();
        let next = sys.step(&[0.0, PI], &[0.0, 0.0]).unwrap();
        assert!((next[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn summarized_step_matches_full_step() {
        let s = kuramoto_subsystem(&KuramotoParams::default(), 5).unwrap();
        let w = [0.3, 2.0, 4.1, 5.9];
        let summary = s.dynamics.summarize_internal(&w).unwrap();
        for (x, u) in [(0.1, -0.6), (3.0, 0.0), (6.2, 0.4)] {
            let mut a = [0.0];
            let mut b = [0.0];
            s.dynamics.step(&[x], &w, &[u], &mut a);
            s.dynamics.step_summarized(&[x], &summary, &[u], &mut b);
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn room_labels() {
        let (_, l) = build_room_network(3, RoomParams::default()).unwrap();
        assert_eq!(l.label(&[21.0, 21.0, 22.0]).unwrap(), "p0");
        assert_eq!(l.label(&[21.0, 30.0, 22.0]).unwrap(), "p3");
    }

    #[test]
    fn kuramoto_inputs_are_exact_tenths() {
        let p = KuramotoParams::default();
        assert_eq!(p.inputs.len(), 13);
        assert_eq!(p.inputs[0], -0.6);
        assert_eq!(p.inputs[6], 0.0);
        assert_eq!(p.inputs[12], 0.6);
    }
}
