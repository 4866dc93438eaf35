//! Local and composed control barrier certificates.
//!
//! A local certificate `B_i` for subsystem `i` satisfies
//!
//! * `B_i(x) >= α_i(‖h_i(x)‖)` on `X_i`,
//! * `B_i(x) <= ε̄_i` on `X_ai` and `B_i(x) > ε̲_i` on `X_bi`,
//! * for every `x` some input `u` gives, for every `w`,
//!   `B_i(f_i(x, w, u)) <= κ̂_i(B_i(x)) + γ̂_i(‖w‖)` (additive form) or
//!   `<= max{κ_i(B_i(x)), γ_wi(‖w‖)}` (max form).
//!
//! Certificates whose gains close under the small-gain condition compose into
//! `B(x) = max_i φ_i⁻¹(B_i(x_i))`.

mod verify;

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparison::{check_small_gain, find_phi, gamma_matrix_from, max_form_conversion, GainMatrix, KFn};
use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::policy::ControllerSpec;
use crate::poly::Polynomial;
use crate::system::{InterconnectedSystem, Subsystem, Wiring};

pub use verify::{verify_local, Condition, ConditionReport, GridSpec, InternalSampling, Status, VerificationReport};

/// Decrease-condition gains of a local certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gains {
    /// `B(f) <= κ̂(B) + γ̂(‖w‖)`.
    Additive { kappa_hat: KFn, gamma_hat: KFn },
    /// `B(f) <= max{κ(B), γ_w(‖w‖)}`.
    Max { kappa: KFn, gamma_w: KFn },
}

/// A local control barrier certificate. `state_region` and
/// `internal_region` default to the subsystem's own sets when omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalCertificate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Partition key the certificate serves, written as `(q,q',{..})`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub barrier: Polynomial,
    pub alpha: KFn,
    pub gains: Gains,
    pub eps_upper: f64,
    pub eps_lower: f64,
    pub region_a: Region,
    pub region_b: Region,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_region: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_region: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSpec>,
}

impl LocalCertificate {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: LocalCertificate = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dim(&self) -> usize {
        self.barrier.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        match &self.gains {
            Gains::Additive { kappa_hat, gamma_hat } => {
                kappa_hat.validate()?;
                gamma_hat.validate()?;
            }
            Gains::Max { kappa, gamma_w } => {
                kappa.validate()?;
                gamma_w.validate()?;
            }
        }
        if self.eps_upper.is_nan() || self.eps_upper < 0.0 || self.eps_lower.is_nan() || self.eps_lower < 0.0 {
            return Err(Error::InvalidCertificate(format!(
                "level constants must be non-negative, got ε̄ = {}, ε̲ = {}",
                self.eps_upper, self.eps_lower
            )));
        }
        let d = self.dim();
        for (what, r) in [
            ("region_a", Some(&self.region_a)),
            ("region_b", Some(&self.region_b)),
            ("state_region", self.state_region.as_ref()),
        ] {
            if let Some(rd) = r.and_then(Region::dim) {
                if rd != d {
                    return Err(Error::InvalidCertificate(format!("{what} has dimension {rd}, barrier has {d}")));
                }
            }
        }
        Ok(())
    }

    /// Right-hand side of the decrease inequality at `B(x) = b`, `‖w‖ = wn`.
    /// Negative barrier values are clipped to zero before the gains apply.
    #[inline]
    pub fn decrease_bound(&self, b: f64, wn: f64) -> f64 {
        let b = b.max(0.0);
        match &self.gains {
            Gains::Additive { kappa_hat, gamma_hat } => kappa_hat.apply(b) + gamma_hat.apply(wn),
            Gains::Max { kappa, gamma_w } => kappa.apply(b).max(gamma_w.apply(wn)),
        }
    }

    /// `(κ, γ_w)` in max form, converting additive gains with `ψ`.
    pub fn max_form(&self, psi: &KFn) -> Result<(KFn, KFn)> {
        match &self.gains {
            Gains::Additive { kappa_hat, gamma_hat } => max_form_conversion(kappa_hat, gamma_hat, psi),
            Gains::Max { kappa, gamma_w } => Ok((kappa.clone(), gamma_w.clone())),
        }
    }

    pub fn state_region_for<'a>(&'a self, s: &'a Subsystem) -> &'a Region {
        self.state_region.as_ref().unwrap_or(&s.state_region)
    }

    pub fn internal_region_for<'a>(&'a self, s: &'a Subsystem) -> &'a Region {
        self.internal_region.as_ref().unwrap_or(&s.internal_region)
    }
}

/// Gain matrix of a network of local certificates, with `ψ = Linear(psi)`
/// used for additive gains. Certificates shared through one `Arc` are
/// converted once.
pub fn gamma_matrix(locals: &[Arc<LocalCertificate>], wiring: &Wiring, psi: f64) -> Result<GainMatrix> {
    let psi = KFn::linear(psi)?;
    let mut cache: HashMap<*const LocalCertificate, (KFn, KFn, KFn)> = HashMap::new();
    let mut triples = Vec::with_capacity(locals.len());
    for c in locals {
        let key = Arc::as_ptr(c);
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(key) {
            let (kappa, gamma_w) = c.max_form(&psi)?;
            e.insert((c.alpha.clone(), kappa, gamma_w));
        }
        triples.push(cache[&key].clone());
    }
    gamma_matrix_from(&triples, wiring)
}

/// `B(x) = max_i φ_i⁻¹(B_i(x_i))` with levels `ε₁ <= ε₂`.
#[derive(Clone, Debug)]
pub struct ComposedCertificate {
    locals: Vec<Arc<LocalCertificate>>,
    phis: Vec<KFn>,
    phi_inv: Vec<KFn>,
    gains: GainMatrix,
    kappa_terms: Vec<KFn>,
    offsets: Vec<usize>,
    pub eps1: f64,
    pub eps2: f64,
}

/// Composes local certificates. When `phis` is `None` the scalings come from
/// [`find_phi`].
pub fn compose(
    locals: Vec<Arc<LocalCertificate>>,
    phis: Option<Vec<KFn>>,
    wiring: &Wiring,
    psi: f64,
) -> Result<ComposedCertificate> {
    if locals.is_empty() {
        return Err(Error::InvalidCertificate("nothing to compose".into()));
    }
    let gains = gamma_matrix(&locals, wiring, psi)?;
    check_small_gain(&gains)?;
    let phis = match phis {
        Some(p) => {
            if p.len() != locals.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} scalings for {} certificates",
                    p.len(),
                    locals.len()
                )));
            }
            p
        }
        None => find_phi(&gains)?,
    };
    let phi_inv: Vec<KFn> = phis.iter().map(KFn::inverse).collect::<Result<_>>()?;
    let all_identity = phis.iter().all(|p| matches!(p.simplify(), KFn::Identity));

    let mut kappa_terms: Vec<KFn> = Vec::new();
    for (i, j, g) in gains.entries() {
        let scaled = if all_identity { g.simplify() } else { phi_inv[i].compose(g).compose(&phis[j]) };
        if !scaled.less_than_identity() {
            return Err(Error::NoScaling(format!("φ_{i}⁻¹∘γ_{i}{j}∘φ_{j} = {scaled} is not below the identity")));
        }
        if !kappa_terms.iter().any(|k| k.canonical() == scaled.canonical()) {
            kappa_terms.push(scaled);
        }
    }

    let eps1 = locals.iter().zip(&phi_inv).map(|(c, p)| p.apply(c.eps_upper)).fold(f64::NEG_INFINITY, f64::max);
    let eps2 = locals.iter().zip(&phi_inv).map(|(c, p)| p.apply(c.eps_lower)).fold(f64::NEG_INFINITY, f64::max);
    if !(eps1 <= eps2) {
        return Err(Error::LevelConditionViolated { eps1, eps2 });
    }
    let mut offsets = Vec::with_capacity(locals.len() + 1);
    offsets.push(0);
    for c in &locals {
        offsets.push(offsets.last().unwrap() + c.dim());
    }
    Ok(ComposedCertificate { locals, phis, phi_inv, gains, kappa_terms, offsets, eps1, eps2 })
}

impl ComposedCertificate {
    pub fn locals(&self) -> &[Arc<LocalCertificate>] {
        &self.locals
    }

    pub fn phis(&self) -> &[KFn] {
        &self.phis
    }

    pub fn gains(&self) -> &GainMatrix {
        &self.gains
    }

    /// The distinct functions `φ_i⁻¹∘γ_ij∘φ_j`; their pointwise maximum is
    /// the composed decrease function `κ`.
    pub fn kappa_terms(&self) -> &[KFn] {
        &self.kappa_terms
    }

    pub fn state_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// `κ(r) = max_{i,j} φ_i⁻¹∘γ_ij∘φ_j(r)`.
    pub fn kappa(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        self.kappa_terms.iter().map(|k| k.apply(r)).fold(0.0, f64::max)
    }

    /// `B(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for a composed certificate over {} variables",
                x.len(),
                self.state_dim()
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        (0..self.locals.len())
            .map(|i| {
                let b = self.locals[i].barrier.eval(&x[self.offsets[i]..self.offsets[i + 1]]);
                self.phi_inv[i].apply(b.max(0.0))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `eval_composed(c, x)`.
pub fn eval_composed(c: &ComposedCertificate, x: &[f64]) -> Result<f64> {
    c.eval(x)
}

/// Samples states uniformly from the product of the subsystems' state
/// regions and checks `B(f(x, u(x))) <= κ(B(x)) + tol` for the closed loop.
pub fn check_decrease_composed<P>(
    c: &ComposedCertificate,
    sys: &InterconnectedSystem,
    policy: P,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport>
where
    P: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if sys.state_dim() != c.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "system has {} state variables, certificate covers {}",
            sys.state_dim(),
            c.state_dim()
        )));
    }
    let boxes: Vec<_> = sys
        .subsystems()
        .iter()
        .map(|s| {
            s.state_region.bounding_box().ok_or_else(|| Error::InvalidRegion(format!("{}: empty state region", s.name)))
        })
        .collect::<Result<_>>()?;
    let results: Vec<(f64, Vec<f64>)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut x = Vec::with_capacity(c.state_dim());
            for b in &boxes {
                for (lo, hi) in b.lo().iter().zip(b.hi()) {
                    x.push(if hi > lo { rng.gen_range(*lo..=*hi) } else { *lo });
                }
            }
            let u = policy(&x)?;
            let next = sys.step(&x, &u)?;
            let slack = c.kappa(c.eval_unchecked(&x)) + tol - c.eval_unchecked(&next);
            Ok((slack, x))
        })
        .collect::<Result<_>>()?;
    let violations = results.iter().filter(|(s, _)| *s < 0.0).count();
    let worst =
        results.iter().enumerate().min_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(i.cmp(j))).map(|(_, r)| r.clone());
    let report = ConditionReport {
        condition: Condition::ComposedDecrease,
        status: if violations == 0 { Status::Pass } else { Status::Fail },
        certified: false,
        points: samples as u64,
        violations: violations as u64,
        worst_slack: worst.as_ref().map_or(f64::INFINITY, |w| w.0),
        margin: 0.0,
        lipschitz: None,
        witness_x: worst.map(|w| w.1),
        witness_u: None,
        witness_w: None,
    };
    Ok(VerificationReport { step: None, tolerance: tol, conditions: vec![report] })
}
