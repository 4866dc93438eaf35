//! Interconnection of subsystems through their outputs.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Subsystem;
use crate::error::{Error, Result};
use crate::geometry::{cartesian, Hyperbox};

/// Which outputs feed each subsystem's internal input. The internal input
/// of subsystem `i` is the concatenation of `y_j` over `in_neighbors(i)` in
/// the listed order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wiring {
    None,
    /// `w_i = [y_{i-1}; y_{i+1}]`, indices modulo `N`.
    Ring,
    /// `w_i = [y_j]_{j != i}` in increasing `j`.
    Complete,
    Explicit(Vec<Vec<usize>>),
}

impl Wiring {
    pub fn in_neighbors(&self, i: usize, n: usize) -> Result<Vec<usize>> {
        if i >= n {
            return Err(Error::InvalidSystem(format!("subsystem {i} out of range for {n} subsystems")));
        }
        Ok(match self {
            Wiring::None => Vec::new(),
            Wiring::Ring => {
                if n < 3 {
                    return Err(Error::InvalidSystem("ring wiring needs at least 3 subsystems".into()));
                }
                vec![(i + n - 1) % n, (i + 1) % n]
            }
            Wiring::Complete => (0..n).filter(|&j| j != i).collect(),
            Wiring::Explicit(lists) => {
                if lists.len() != n {
                    return Err(Error::InvalidSystem(format!(
                        "explicit wiring lists {} subsystems, network has {n}",
                        lists.len()
                    )));
                }
                if let Some(&j) = lists[i].iter().find(|&&j| j >= n) {
                    return Err(Error::InvalidSystem(format!("subsystem {i} listens to unknown subsystem {j}")));
                }
                lists[i].clone()
            }
        })
    }
}

/// A whole-network update that bypasses per-subsystem gathering, used where
/// the coupling has structure (for example all-to-all sums).
pub trait NetworkKernel: Send + Sync + fmt::Debug {
    fn step(&self, x: &[f64], u: &[f64], next: &mut [f64]);
}

#[derive(Clone, Debug)]
pub struct InterconnectedSystem {
    subsystems: Vec<Arc<Subsystem>>,
    wiring: Wiring,
    state_offsets: Vec<usize>,
    input_offsets: Vec<usize>,
    kernel: Option<Arc<dyn NetworkKernel>>,
}

impl InterconnectedSystem {
    /// Validates that each internal input has the dimension of its wired
    /// outputs and that wired outputs land inside the internal-input set
    /// (checked at the corners and center of each state region).
    pub fn new(subsystems: Vec<Arc<Subsystem>>, wiring: Wiring) -> Result<Self> {
        let n = subsystems.len();
        if n == 0 {
            return Err(Error::InvalidSystem("no subsystems".into()));
        }
        let mut checked: BTreeSet<(usize, usize, u64, u64)> = BTreeSet::new();
        let homogeneous = subsystems.iter().all(|s| Arc::ptr_eq(s, &subsystems[0]))
            && subsystems[0]
                .internal_region
                .bounding_box()
                .is_some_and(|b| b.lo().iter().all(|&v| v == b.lo()[0]) && b.hi().iter().all(|&v| v == b.hi()[0]));
        for i in 0..n {
            if homogeneous && i > 0 {
                break;
            }
            let si = &subsystems[i];
            let neighbors = wiring.in_neighbors(i, n)?;
            let total: usize = neighbors.iter().map(|&j| subsystems[j].output_dim()).sum();
            if total != si.internal_dim {
                return Err(Error::InvalidSystem(format!(
                    "subsystem {i} expects internal input of dimension {}, wiring provides {total}",
                    si.internal_dim
                )));
            }
            let Some(w_box) = si.internal_region.bounding_box() else { continue };
            let mut offset = 0;
            for &j in &neighbors {
                let sj = &subsystems[j];
                let d = sj.output_dim();
                let slot_lo = &w_box.lo()[offset..offset + d];
                let slot_hi = &w_box.hi()[offset..offset + d];
                let key =
                    (Arc::as_ptr(si) as usize, Arc::as_ptr(sj) as usize, hash_slice(slot_lo), hash_slice(slot_hi));
                if checked.insert(key) && !(homogeneous && offset > 0) {
                    let slot = Hyperbox::new(slot_lo.to_vec(), slot_hi.to_vec())?;
                    check_output_range(sj, &slot).map_err(|msg| {
                        Error::InvalidSystem(format!("output of subsystem {j} leaves internal-input set of {i}: {msg}"))
                    })?;
                }
                offset += d;
            }
        }
        let mut state_offsets = vec![0];
        let mut input_offsets = vec![0];
        for s in &subsystems {
            state_offsets.push(state_offsets.last().unwrap() + s.state_dim);
            input_offsets.push(input_offsets.last().unwrap() + s.input_dim());
        }
        Ok(InterconnectedSystem { subsystems, wiring, state_offsets, input_offsets, kernel: None })
    }

    /// Installs a whole-network kernel; it must agree with the generic
    /// gather-and-step update.
    pub fn with_kernel(mut self, kernel: Arc<dyn NetworkKernel>) -> Self {
        self.kernel = Some(kernel);
        self
    }

    pub fn n(&self) -> usize {
        self.subsystems.len()
    }

    pub fn wiring(&self) -> &Wiring {
        &self.wiring
    }

    pub fn subsystem(&self, i: usize) -> &Arc<Subsystem> {
        &self.subsystems[i]
    }

    pub fn subsystems(&self) -> &[Arc<Subsystem>] {
        &self.subsystems
    }

    pub fn state_dim(&self) -> usize {
        *self.state_offsets.last().unwrap()
    }

    pub fn input_dim(&self) -> usize {
        *self.input_offsets.last().unwrap()
    }

    pub fn block<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[self.state_offsets[i]..self.state_offsets[i + 1]]
    }

    pub fn input_block<'a>(&self, u: &'a [f64], i: usize) -> &'a [f64] {
        &u[self.input_offsets[i]..self.input_offsets[i + 1]]
    }

    /// `w_i` assembled from the outputs of `i`'s in-neighbors.
    pub fn internal_input(&self, x: &[f64], i: usize) -> Result<Vec<f64>> {
        let mut w = Vec::with_capacity(self.subsystems[i].internal_dim);
        for j in self.wiring.in_neighbors(i, self.n())? {
            w.extend(self.subsystems[j].output(self.block(x, j)));
        }
        Ok(w)
    }

    /// `x⁺` of the interconnected system for concatenated `x` and `u`.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() || u.len() != self.input_dim() {
            return Err(Error::InvalidSystem(format!(
                "expected state/input of lengths ({}, {}), got ({}, {})",
                self.state_dim(),
                self.input_dim(),
                x.len(),
                u.len()
            )));
        }
        let mut next = vec![0.0; x.len()];
        if let Some(k) = &self.kernel {
            k.step(x, u, &mut next);
            return Ok(next);
        }
        self.step_generic(x, u, &mut next)?;
        Ok(next)
    }

    /// The gather-and-step update, ignoring any installed kernel.
    pub fn step_generic(&self, x: &[f64], u: &[f64], next: &mut [f64]) -> Result<()> {
        let outputs: Vec<Vec<f64>> = (0..self.n()).map(|j| self.subsystems[j].output(self.block(x, j))).collect();
        let blocks: Vec<Vec<f64>> = (0..self.n())
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let mut w = Vec::with_capacity(self.subsystems[i].internal_dim);
                for j in self.wiring.in_neighbors(i, self.n())? {
                    w.extend_from_slice(&outputs[j]);
                }
                Ok(self.subsystems[i].apply(self.block(x, i), &w, self.input_block(u, i)))
            })
            .collect::<Result<_>>()?;
        for (i, b) in blocks.into_iter().enumerate() {
            next[self.state_offsets[i]..self.state_offsets[i + 1]].copy_from_slice(&b);
        }
        Ok(())
    }
}

/// `step_interconnected(S, x, u)`.
pub fn step_interconnected(sys: &InterconnectedSystem, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    sys.step(x, u)
}

fn hash_slice(v: &[f64]) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for x in v {
        x.to_bits().hash(&mut h);
    }
    h.finish()
}

fn check_output_range(s: &Subsystem, slot: &Hyperbox) -> std::result::Result<(), String> {
    let Some(bb) = s.state_region.bounding_box() else { return Ok(()) };
    if bb.dim() > 12 {
        let y = s.output(&bb.center());
        return if slot.contains(&y) { Ok(()) } else { Err(format!("{y:?} outside {slot:?}")) };
    }
    let axes: Vec<Vec<f64>> =
        (0..bb.dim()).map(|i| vec![bb.lo()[i], 0.5 * (bb.lo()[i] + bb.hi()[i]), bb.hi()[i]]).collect();
    for x in cartesian(&axes) {
        let y = s.output(&x);
        if !slot.contains(&y) {
            return Err(format!("h({x:?}) = {y:?} is outside the slot"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_neighbors_wrap() {
        assert_eq!(Wiring::Ring.in_neighbors(0, 5).unwrap(), vec![4, 1]);
        assert_eq!(Wiring::Ring.in_neighbors(4, 5).unwrap(), vec![3, 0]);
        assert!(Wiring::Ring.in_neighbors(0, 2).is_err());
    }

    #[test]
    fn complete_neighbors_skip_self() {
        assert_eq!(Wiring::Complete.in_neighbors(1, 4).unwrap(), vec![0, 2, 3]);
    }

    #[test]
    fn explicit_wiring_is_checked() {
        let w = Wiring::Explicit(vec![vec![1], vec![5]]);
        assert_eq!(w.in_neighbors(0, 2).unwrap(), vec![1]);
        assert!(w.in_neighbors(1, 2).is_err());
        assert!(Wiring::Explicit(vec![vec![]]).in_neighbors(0, 2).is_err());
    }

    #[test]
    fn wiring_json() {
        let w: Wiring = serde_json::from_str(r#"{"explicit":[[1],[0]]}"#).unwrap();
        assert_eq!(w, Wiring::Explicit(vec![vec![1], vec![0]]));
        let r: Wiring = serde_json::from_str(r#""ring""#).unwrap();
        assert_eq!(r, Wiring::Ring);
    }
}
