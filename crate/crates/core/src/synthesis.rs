//! Counterexample-guided search for polynomial local barrier certificates.
//!
//! The learner fits template coefficients to a growing set of sample
//! points by linear programming; the verifier scans grids for points that
//! break one of the certificate conditions and feeds them back. The class
//! functions `α̂(r) = a r^p`, `κ̂(r) = k r`, `γ̂(r) = g r^q` enter the
//! program linearly once `k`, `p` and `q` are fixed, so those three are
//! searched over a small grid while `a`, `g` and the coefficients are
//! solved for.
//!
//! Inside the learner the barrier is normalized so that `B <= 1` on `X_a`
//! and `B >= 1 + level_gap` on `X_b`. The reported `ε̄`, `ε̲` are read off
//! the final grid afterwards.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::{
    verify_local, Condition, Gains, GridSpec, InternalSampling, LocalCertificate, VerificationReport,
};
use crate::comparison::KFn;
use crate::error::{Error, Result};
use crate::geometry::{norm_inf, Region};
use crate::policy::{ControllerSpec, Reference};
use crate::poly::{monomial, monomial_basis, Polynomial};
use crate::system::{InputSpec, Subsystem};

/// Parametric barrier `Σ_k c_k x^{basis_k}` with `c_k` in `parameter_bounds[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub basis: Vec<Vec<u32>>,
    pub parameter_bounds: Vec<(f64, f64)>,
}

impl Template {
    /// All monomials of total degree at most `degree`, each coefficient in
    /// `[-bound, bound]`.
    pub fn dense(dim: usize, degree: u32, bound: f64) -> Self {
        let basis = monomial_basis(dim, degree);
        let parameter_bounds = vec![(-bound, bound); basis.len()];
        Template { basis, parameter_bounds }
    }

    pub fn parameter_count(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.basis.is_empty() {
            return Err(Error::Config("template has no monomials".into()));
        }
        if self.basis.len() != self.parameter_bounds.len() {
            return Err(Error::Config(format!(
                "{} monomials but {} parameter bounds",
                self.basis.len(),
                self.parameter_bounds.len()
            )));
        }
        let d = self.dim();
        let mut seen = HashSet::new();
        for e in &self.basis {
            if e.len() != d {
                return Err(Error::Config("template exponents differ in length".into()));
            }
            if !seen.insert(e.clone()) {
                return Err(Error::Config(format!("duplicate monomial {e:?} in template")));
            }
        }
        for &(lo, hi) in &self.parameter_bounds {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("bad parameter bound [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn features(&self, x: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|e| monomial(x, e)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    /// Minimize the largest constraint violation over the sample set.
    Lp,
    /// Best of `samples` uniformly drawn parameter vectors.
    RandomRestart { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CegisConfig {
    /// Learner solves allowed across all class-function candidates.
    pub max_iterations: usize,
    pub initial_grid_resolution: f64,
    pub refinement_factor: f64,
    /// Grid step of the last counterexample scan and of the final check.
    pub final_resolution: f64,
    pub learner: Learner,
    /// `B > ε̲` is enforced as `B >= ε̲ + strict_slack`.
    pub strict_slack: f64,
    /// Slack below `-tolerance` counts as a violation.
    pub tolerance: f64,
    /// Normalized separation between the `X_a` and `X_b` levels.
    pub level_gap: f64,
    /// Distance of `ε̄` above `max_{X_a} B` and of `ε̲` below `min_{X_b} B`.
    pub level_margin: f64,
    pub kappa_candidates: Vec<f64>,
    pub alpha_exponents: Vec<f64>,
    pub gamma_exponents: Vec<f64>,
    pub alpha_bounds: (f64, f64),
    pub gamma_bounds: (f64, f64),
    /// How `W` is sampled in the decrease condition.
    pub internal: InternalSampling,
    /// New counterexamples taken per condition and round.
    pub max_new_per_condition: usize,
    pub max_points: u128,
}

impl Default for CegisConfig {
    fn default() -> Self {
        CegisConfig {
            max_iterations: 50,
            initial_grid_resolution: 0.1,
            refinement_factor: 0.5,
            final_resolution: 1e-3,
            learner: Learner::Lp,
            strict_slack: 1e-9,
            tolerance: 1e-9,
            level_gap: 1.0,
            level_margin: 1e-6,
            kappa_candidates: vec![0.5, 0.8, 0.95],
            alpha_exponents: vec![2.0, 1.0],
            gamma_exponents: vec![2.0, 1.0],
            alpha_bounds: (1e-3, 1e3),
            gamma_bounds: (1e-6, 1e3),
            internal: InternalSampling::Grid { step: 0.25 },
            max_new_per_condition: 16,
            max_points: 50_000_000,
        }
    }
}

/// `(X, X_a, X_b, W)` of one synthesis problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regions {
    pub state: Region,
    pub initial: Region,
    #[serde(rename = "unsafe")]
    pub unsafe_set: Region,
    pub internal: Region,
}

impl Regions {
    /// `X` and `W` taken from the subsystem.
    pub fn for_subsystem(s: &Subsystem, initial: Region, unsafe_set: Region) -> Self {
        Regions { state: s.state_region.clone(), initial, unsafe_set, internal: s.internal_region.clone() }
    }

    fn check(&self, s: &Subsystem) -> Result<()> {
        if self.state.is_empty() {
            return Err(Error::InvalidRegion("X is empty".into()));
        }
        for (what, r, d) in [
            ("X", &self.state, s.state_dim),
            ("X_a", &self.initial, s.state_dim),
            ("X_b", &self.unsafe_set, s.state_dim),
            ("W", &self.internal, s.internal_dim),
        ] {
            if let Some(rd) = r.dim() {
                if rd != d {
                    return Err(Error::DimensionMismatch(format!("{what} has dimension {rd}, expected {d}")));
                }
            }
        }
        if self.initial.intersects(&self.unsafe_set) {
            return Err(Error::InfeasibleRegions(
                "X_a and X_b intersect, so no barrier can be at most ε̄ on X_a and above ε̲ on X_b".into(),
            ));
        }
        Ok(())
    }
}

/// Grid scan settings for [`counterexample_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpec {
    pub resolution: f64,
    pub internal: InternalSampling,
    pub tolerance: f64,
    pub strict_slack: f64,
    pub max_points: u128,
}

/// A point where a candidate breaks one condition. `violation` is the
/// positive amount by which the slack falls short.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub condition: Condition,
    pub x: Vec<f64>,
    pub u: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
    pub violation: f64,
}

fn internal_points(region: &Region, s: &Subsystem, sampling: &InternalSampling, limit: u128) -> Result<Vec<Vec<f64>>> {
    if s.internal_dim == 0 || region.is_empty() {
        return Ok(vec![Vec::new()]);
    }
    match sampling {
        InternalSampling::Grid { step } => region.grid(*step, 0.0, limit),
        InternalSampling::Reference(r) => Ok(vec![r.resolve(s)?]),
        InternalSampling::Random { count, seed } => {
            let bb = region.bounding_box().expect("non-empty region");
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut pts = vec![region.centroid().expect("non-empty region")];
            while pts.len() < count + 1 {
                let p: Vec<f64> =
                    bb.lo().iter().zip(bb.hi()).map(|(l, h)| if h > l { rng.gen_range(*l..=*h) } else { *l }).collect();
                if region.contains(&p) {
                    pts.push(p);
                }
            }
            Ok(pts)
        }
    }
}

/// Everything the scans need about one problem, computed once.
struct Problem1<'a> {
    s: &'a Subsystem,
    regions: &'a Regions,
    inputs: &'a [Vec<f64>],
    ws: Vec<Vec<f64>>,
    w_norms: Vec<f64>,
}

impl<'a> Problem1<'a> {
    fn new(
        s: &'a Subsystem,
        regions: &'a Regions,
        inputs: &'a [Vec<f64>],
        sampling: &InternalSampling,
        limit: u128,
    ) -> Result<Self> {
        let ws = internal_points(&regions.internal, s, sampling, limit)?;
        let w_norms = ws.iter().map(|w| norm_inf(w)).collect();
        Ok(Problem1 { s, regions, inputs, ws, w_norms })
    }

    /// `min_w` decrease slack at `x` under input `u`, with the worst `w`.
    fn worst_w(&self, c: &LocalCertificate, x: &[f64], bx: f64, u: &[f64]) -> (f64, usize) {
        let mut next = vec![0.0; self.s.state_dim];
        let mut best = (f64::INFINITY, 0);
        for (k, (w, wn)) in self.ws.iter().zip(&self.w_norms).enumerate() {
            self.s.dynamics.step(x, w, u, &mut next);
            let slack = c.decrease_bound(bx, *wn) - c.barrier.eval(&next);
            if slack < best.0 || slack.is_nan() {
                best = (slack, k);
            }
        }
        best
    }

    /// `max_u min_w` decrease slack at `x`: the slack, the input index and
    /// the worst `w` index for that input.
    fn best_input(&self, c: &LocalCertificate, x: &[f64]) -> (f64, usize, usize) {
        let bx = c.barrier.eval(x);
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (i, u) in self.inputs.iter().enumerate() {
            let (slack, k) = self.worst_w(c, x, bx, u);
            if slack > best.0 {
                best = (slack, i, k);
            }
        }
        best
    }

    /// Violations of every condition on grids of spacing `step`, worst
    /// first, at most `per_condition` of each (0 keeps all).
    fn violations(
        &self,
        c: &LocalCertificate,
        step: f64,
        tol: f64,
        strict: f64,
        limit: u128,
        per_condition: usize,
    ) -> Result<Vec<Witness>> {
        let mut out = Vec::new();
        let x_grid = self.regions.state.grid(step, 0.0, limit)?;
        let a_grid = self.regions.initial.grid(step, 0.0, limit)?;
        let b_grid = self.regions.unsafe_set.grid(step, 0.0, limit)?;
        let work = (x_grid.len() as u128).saturating_mul((self.inputs.len() * self.ws.len()) as u128);
        if work > limit {
            return Err(Error::GridTooLarge { points: work, limit });
        }

        let mut keep = |cond: Condition, found: Vec<Witness>| {
            let mut found = found;
            found.sort_by(|a, b| b.violation.total_cmp(&a.violation));
            if per_condition > 0 {
                found.truncate(per_condition);
            }
            debug_assert!(found.iter().all(|w| w.condition == cond));
            out.extend(found);
        };

        let simple = |grid: &[Vec<f64>], cond: Condition, slack: &(dyn Fn(&[f64]) -> f64 + Sync)| -> Vec<Witness> {
            grid.par_iter()
                .filter_map(|x| {
                    let v = slack(x);
                    (v < -tol || v.is_nan()).then(|| Witness {
                        condition: cond,
                        x: x.clone(),
                        u: None,
                        w: None,
                        violation: if v.is_nan() { f64::INFINITY } else { -v },
                    })
                })
                .collect()
        };
        keep(
            Condition::OutputBound,
            simple(&x_grid, Condition::OutputBound, &|x| {
                c.barrier.eval(x) - c.alpha.apply(norm_inf(&self.s.output(x)))
            }),
        );
        keep(Condition::InitialLevel, simple(&a_grid, Condition::InitialLevel, &|x| c.eps_upper - c.barrier.eval(x)));
        keep(
            Condition::UnsafeLevel,
            simple(&b_grid, Condition::UnsafeLevel, &|x| c.barrier.eval(x) - c.eps_lower - strict),
        );
        let dec: Vec<Witness> = x_grid
            .par_iter()
            .filter_map(|x| {
                let (v, i, k) = self.best_input(c, x);
                (v < -tol || v.is_nan()).then(|| Witness {
                    condition: Condition::Decrease,
                    x: x.clone(),
                    u: Some(self.inputs[i].clone()),
                    w: Some(self.ws[k].clone()),
                    violation: if v.is_nan() { f64::INFINITY } else { -v },
                })
            })
            .collect();
        keep(Condition::Decrease, dec);
        Ok(out)
    }
}

fn finite_inputs(s: &Subsystem) -> Result<&[Vec<f64>]> {
    match &s.inputs {
        InputSpec::Finite(v) if !v.is_empty() => Ok(v),
        InputSpec::Finite(_) => Err(Error::Config("the input set is empty".into())),
        InputSpec::Box(_) => Err(Error::Config("synthesis needs a finite input set".into())),
    }
}

/// Candidate inputs for the learner: the finite input set itself, or
/// `points` evenly spaced values per axis of an input box.
pub fn input_candidates(s: &Subsystem, points: usize) -> Result<Vec<Vec<f64>>> {
    match &s.inputs {
        InputSpec::Finite(_) => Ok(finite_inputs(s)?.to_vec()),
        InputSpec::Box(b) => {
            if points == 0 {
                return Err(Error::Config("an input box needs at least one grid point per axis".into()));
            }
            let axes: Vec<Vec<f64>> = b
                .lo()
                .iter()
                .zip(b.hi())
                .map(|(&lo, &hi)| {
                    if points == 1 || hi == lo {
                        vec![0.5 * (lo + hi)]
                    } else {
                        (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
                    }
                })
                .collect();
            Ok(crate::geometry::cartesian(&axes))
        }
    }
}

/// The condition violated most at spacing `spec.resolution`, or `None`
/// when every grid slack is at least `-spec.tolerance`. The decrease
/// witness carries the input with the largest slack, so a reported
/// decrease violation means no input in `u_set` works at that point.
pub fn counterexample_search(
    c: &LocalCertificate,
    s: &Subsystem,
    regions: &Regions,
    u_set: &[Vec<f64>],
    spec: &SearchSpec,
) -> Result<Option<Witness>> {
    if u_set.is_empty() {
        return Err(Error::Config("the input set is empty".into()));
    }
    let p = Problem1::new(s, regions, u_set, &spec.internal, spec.max_points)?;
    let all = p.violations(c, spec.resolution, spec.tolerance, spec.strict_slack, spec.max_points, 1)?;
    Ok(all.into_iter().max_by(|a, b| a.violation.total_cmp(&b.violation)))
}

/// Points the learner must satisfy. Decrease samples are states; every
/// sampled `w` is imposed at each of them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSet {
    pub output: Vec<Vec<f64>>,
    pub initial: Vec<Vec<f64>>,
    #[serde(rename = "unsafe")]
    pub unsafe_set: Vec<Vec<f64>>,
    pub decrease: Vec<Vec<f64>>,
    #[serde(skip)]
    seen: HashSet<(Condition, Vec<u64>)>,
}

impl CounterexampleSet {
    /// Adds `x` for `cond` unless it is already present.
    fn insert(&mut self, cond: Condition, x: &[f64]) -> bool {
        let key = (cond, x.iter().map(|v| v.to_bits()).collect());
        if !self.seen.insert(key) {
            return false;
        }
        let list = match cond {
            Condition::OutputBound => &mut self.output,
            Condition::InitialLevel => &mut self.initial,
            Condition::UnsafeLevel => &mut self.unsafe_set,
            _ => &mut self.decrease,
        };
        list.push(x.to_vec());
        true
    }

    pub fn len(&self) -> usize {
        self.output.len() + self.initial.len() + self.unsafe_set.len() + self.decrease.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One row of the synthesis log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub kappa: f64,
    pub alpha_exponent: f64,
    pub gamma_exponent: f64,
    pub resolution: f64,
    pub counterexamples: usize,
    /// Largest violation left by the learner on the sample set.
    pub learner_violation: f64,
    /// Largest violation found by the grid scan, 0 when none.
    pub scan_violation: f64,
    pub scan_condition: Option<Condition>,
    pub new_counterexamples: usize,
}

/// Result of [`synthesize_cegis`]. On failure `certificate` is `None` and
/// `failure` says why; the sample set and best score are kept either way.
#[derive(Clone, Debug)]
pub struct SynthesisOutcome {
    pub certificate: Option<LocalCertificate>,
    pub report: Option<VerificationReport>,
    /// Whether the found certificate also satisfies `ε̄ <= ε̲`.
    pub level_condition: bool,
    pub iterations: usize,
    pub best_violation: f64,
    pub counterexamples: CounterexampleSet,
    pub log: Vec<IterationLog>,
    pub failure: Option<String>,
}

impl SynthesisOutcome {
    pub fn into_certificate(self) -> Result<LocalCertificate> {
        match self.certificate {
            Some(c) => Ok(c),
            None => Err(Error::SynthesisFailed {
                iterations: self.iterations,
                best_violation: self.best_violation,
                reason: self.failure.unwrap_or_default(),
            }),
        }
    }

    pub fn write_log_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        self.write_log_to(file)
    }

    pub fn write_log_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "kappa",
            "alpha_exponent",
            "gamma_exponent",
            "resolution",
            "counterexamples",
            "learner_violation",
            "scan_violation",
            "scan_condition",
            "new_counterexamples",
        ])?;
        for r in &self.log {
            w.write_record([
                r.iteration.to_string(),
                r.kappa.to_string(),
                r.alpha_exponent.to_string(),
                r.gamma_exponent.to_string(),
                r.resolution.to_string(),
                r.counterexamples.to_string(),
                r.learner_violation.to_string(),
                r.scan_violation.to_string(),
                r.scan_condition.map_or("", Condition::name).to_string(),
                r.new_counterexamples.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("synthesis log", e))?;
        Ok(())
    }
}

/// Fixed part of the class functions for one outer-loop round.
#[derive(Clone, Copy, Debug)]
struct Shape {
    kappa: f64,
    alpha_exp: f64,
    gamma_exp: f64,
}

/// Learner output.
struct Fit {
    coeffs: Vec<f64>,
    alpha: f64,
    gamma: f64,
    violation: f64,
}

fn kfn(c: f64, e: f64) -> Result<KFn> {
    if e == 1.0 {
        KFn::linear(c)
    } else {
        KFn::power(c, e)
    }
}

/// Rows `coefficient features · c + a·fa + g·fg + v >= rhs` of the learner.
struct Row {
    feats: Vec<f64>,
    fa: f64,
    fg: f64,
    rhs: f64,
}

struct Learning<'a> {
    p: &'a Problem1<'a>,
    t: &'a Template,
    cfg: &'a CegisConfig,
}

impl Learning<'_> {
    fn candidate(&self, shape: Shape, coeffs: &[f64], alpha: f64, gamma: f64) -> Result<LocalCertificate> {
        Ok(LocalCertificate {
            name: None,
            key: None,
            barrier: Polynomial::from_basis(self.t.dim(), &self.t.basis, coeffs)?,
            alpha: kfn(alpha, shape.alpha_exp)?,
            gains: Gains::Additive { kappa_hat: KFn::linear(shape.kappa)?, gamma_hat: kfn(gamma, shape.gamma_exp)? },
            eps_upper: 1.0,
            eps_lower: 1.0 + self.cfg.level_gap - self.cfg.strict_slack,
            region_a: self.p.regions.initial.clone(),
            region_b: self.p.regions.unsafe_set.clone(),
            state_region: Some(self.p.regions.state.clone()),
            internal_region: Some(self.p.regions.internal.clone()),
            controller: Some(ControllerSpec::Determinized {
                reference: Reference::Centroid,
                candidates: match self.p.s.inputs {
                    InputSpec::Box(_) => Some(self.p.inputs.to_vec()),
                    InputSpec::Finite(_) => None,
                },
            }),
        })
    }

    /// Input used at each decrease sample: the best one for the previous
    /// candidate, or the one steering the centroid-`w` successor closest
    /// to the middle of `X_a` before any candidate exists.
    fn choose_inputs(&self, ces: &CounterexampleSet, prev: Option<&LocalCertificate>) -> Vec<usize> {
        let s = self.p.s;
        match prev {
            Some(c) => ces.decrease.par_iter().map(|x| self.p.best_input(c, x).1).collect(),
            None => {
                let target = self
                    .p
                    .regions
                    .initial
                    .centroid()
                    .or_else(|| self.p.regions.state.centroid())
                    .unwrap_or_else(|| vec![0.0; s.state_dim]);
                let w = self.p.regions.internal.centroid().unwrap_or_default();
                ces.decrease
                    .iter()
                    .map(|x| {
                        let mut best = (f64::INFINITY, 0);
                        for (i, u) in self.p.inputs.iter().enumerate() {
                            let next = s.apply(x, &w, u);
                            let d = norm_inf(&next.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>());
                            if d < best.0 {
                                best = (d, i);
                            }
                        }
                        best.1
                    })
                    .collect()
            }
        }
    }

    fn rows(&self, shape: Shape, ces: &CounterexampleSet, inputs: &[usize]) -> Vec<Row> {
        let s = self.p.s;
        let t = self.t;
        let n = t.parameter_count();
        let mut rows = Vec::new();
        for x in &ces.initial {
            rows.push(Row { feats: t.features(x).into_iter().map(|f| -f).collect(), fa: 0.0, fg: 0.0, rhs: -1.0 });
        }
        for x in &ces.unsafe_set {
            rows.push(Row { feats: t.features(x), fa: 0.0, fg: 0.0, rhs: 1.0 + self.cfg.level_gap });
        }
        for x in &ces.output {
            rows.push(Row {
                feats: t.features(x),
                fa: -norm_inf(&s.output(x)).powf(shape.alpha_exp),
                fg: 0.0,
                rhs: 0.0,
            });
        }
        for (x, &ui) in ces.decrease.iter().zip(inputs) {
            let fx = t.features(x);
            let u = &self.p.inputs[ui];
            for (w, wn) in self.p.ws.iter().zip(&self.p.w_norms) {
                let fnext = t.features(&s.apply(x, w, u));
                let feats = (0..n).map(|k| shape.kappa * fx[k] - fnext[k]).collect();
                rows.push(Row { feats, fa: 0.0, fg: wn.powf(shape.gamma_exp), rhs: 0.0 });
            }
        }
        rows
    }

    fn fit(&self, rows: &[Row], iteration: usize) -> Result<Option<Fit>> {
        match &self.cfg.learner {
            Learner::Lp => self.fit_lp(rows),
            Learner::RandomRestart { samples, seed } => {
                Ok(Some(self.fit_random(rows, *samples, seed.wrapping_add(iteration as u64))))
            }
        }
    }

    /// Three solves: the smallest achievable worst violation `v*`, then the
    /// smallest gain coefficient `g*` keeping the violation at `v*`, then the
    /// largest output coefficient with both held. A small `γ̂` and a large
    /// `α` give small interconnection gains `γ_w∘α⁻¹`.
    fn fit_lp(&self, rows: &[Row]) -> Result<Option<Fit>> {
        #[derive(Clone, Copy)]
        enum Phase {
            Violation,
            Gain(f64),
            Output(f64, f64),
        }
        let build = |phase: Phase| {
            let mut lp = Problem::new(OptimizationDirection::Minimize);
            let cs: Vec<_> = self.t.parameter_bounds.iter().map(|&b| lp.add_var(0.0, b)).collect();
            let (ca, cg, cv, v_cap, g_cap) = match phase {
                Phase::Violation => (0.0, 0.0, 1.0, f64::INFINITY, self.cfg.gamma_bounds.1),
                Phase::Gain(v) => (0.0, 1.0, 0.0, v, self.cfg.gamma_bounds.1),
                Phase::Output(v, g) => (-1.0, 0.0, 0.0, v, g),
            };
            let a = lp.add_var(ca, self.cfg.alpha_bounds);
            let g = lp.add_var(cg, (self.cfg.gamma_bounds.0, g_cap));
            let v = lp.add_var(cv, (-1.0, v_cap));
            for r in rows {
                let mut expr: Vec<(minilp::Variable, f64)> =
                    cs.iter().zip(&r.feats).filter(|(_, f)| **f != 0.0).map(|(c, f)| (*c, *f)).collect();
                if r.fa != 0.0 {
                    expr.push((a, r.fa));
                }
                if r.fg != 0.0 {
                    expr.push((g, r.fg));
                }
                expr.push((v, 1.0));
                lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, r.rhs);
            }
            (lp, cs, a, g, v)
        };
        let (lp, _, _, _, v) = build(Phase::Violation);
        let first = match lp.solve() {
            Ok(sol) => sol,
            Err(minilp::Error::Infeasible) => return Ok(None),
            Err(e) => return Err(Error::Lp(e.to_string())),
        };
        let v_cap = first[v].max(0.0);
        let mut best = (build(Phase::Violation), first);
        let (lp, ..) = build(Phase::Gain(v_cap));
        if let Ok(sol) = lp.solve() {
            let g_star = sol[best.0 .3];
            best.1 = sol;
            let g_cap = (g_star * (1.0 + 1e-6)).max(g_star + 1e-12).min(self.cfg.gamma_bounds.1);
            let (lp, ..) = build(Phase::Output(v_cap, g_cap));
            if let Ok(sol) = lp.solve() {
                best.1 = sol;
            }
        }
        let ((_, cs, a, g, v), sol) = best;
        let coeffs = cs.iter().map(|c| sol[*c]).collect();
        Ok(Some(Fit { coeffs, alpha: sol[a], gamma: sol[g], violation: sol[v] }))
    }

    fn fit_random(&self, rows: &[Row], samples: usize, seed: u64) -> Fit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let mut best: Option<Fit> = None;
        for _ in 0..samples.max(1) {
            let coeffs: Vec<f64> = self.t.parameter_bounds.iter().map(|&b| draw(&mut rng, b)).collect();
            let alpha = draw(&mut rng, self.cfg.alpha_bounds);
            let gamma = draw(&mut rng, self.cfg.gamma_bounds);
            let violation = rows
                .iter()
                .map(|r| {
                    let lhs: f64 =
                        r.feats.iter().zip(&coeffs).map(|(f, c)| f * c).sum::<f64>() + r.fa * alpha + r.fg * gamma;
                    r.rhs - lhs
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if best.as_ref().is_none_or(|b| violation < b.violation) {
                best = Some(Fit { coeffs, alpha, gamma, violation });
            }
        }
        best.expect("at least one sample")
    }

    /// Sets `ε̄`, `ε̲` from grids of spacing `step` and reports whether
    /// `ε̄ <= ε̲`.
    fn set_levels(&self, c: &mut LocalCertificate, step: f64) -> Result<bool> {
        let limit = self.cfg.max_points;
        let max_a = self
            .p
            .regions
            .initial
            .grid(step, 0.0, limit)?
            .iter()
            .map(|x| c.barrier.eval(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let min_b = self
            .p
            .regions
            .unsafe_set
            .grid(step, 0.0, limit)?
            .iter()
            .map(|x| c.barrier.eval(x))
            .fold(f64::INFINITY, f64::min);
        let margin = self.cfg.level_margin.max(2.0 * self.cfg.strict_slack);
        c.eps_upper = if max_a.is_finite() { (max_a + margin).max(0.0) } else { 0.0 };
        c.eps_lower = if min_b.is_finite() { (min_b - margin).max(0.0) } else { c.eps_upper };
        Ok(c.eps_upper <= c.eps_lower)
    }
}

/// Searches for a certificate of `t`'s shape for subsystem `s`. Fails
/// before iterating when `X_a` and `X_b` intersect, when a region is
/// unbounded, or when `u_set` is empty. A returned certificate has passed
/// [`verify_local`] at `cfg.final_resolution`.
pub fn synthesize_cegis(
    t: &Template,
    s: &Subsystem,
    regions: &Regions,
    u_set: &[Vec<f64>],
    cfg: &CegisConfig,
) -> Result<SynthesisOutcome> {
    if u_set.is_empty() {
        return Err(Error::Config("the input set is empty".into()));
    }
    if u_set.iter().any(|u| u.len() != s.input_dim()) {
        return Err(Error::DimensionMismatch(format!("inputs must have length {}", s.input_dim())));
    }
    t.validate()?;
    if t.dim() != s.state_dim {
        return Err(Error::DimensionMismatch(format!(
            "template in {} variables for a {}-dimensional subsystem",
            t.dim(),
            s.state_dim
        )));
    }
    regions.check(s)?;
    if !(cfg.initial_grid_resolution > 0.0
        && cfg.final_resolution > 0.0
        && cfg.refinement_factor > 0.0
        && cfg.refinement_factor < 1.0)
    {
        return Err(Error::Config("resolutions must be positive and the refinement factor in (0, 1)".into()));
    }
    if cfg.kappa_candidates.iter().any(|k| !(*k > 0.0 && *k < 1.0)) {
        return Err(Error::Config("κ̂ candidates must lie in (0, 1)".into()));
    }

    let p = Problem1::new(s, regions, u_set, &cfg.internal, cfg.max_points)?;
    let learning = Learning { p: &p, t, cfg };
    let mut ces = CounterexampleSet::default();
    let seed_step = cfg.initial_grid_resolution;
    for x in regions.state.grid(seed_step, 0.0, cfg.max_points)? {
        ces.insert(Condition::OutputBound, &x);
        ces.insert(Condition::Decrease, &x);
    }
    for x in regions.initial.grid(seed_step, 0.0, cfg.max_points)? {
        ces.insert(Condition::InitialLevel, &x);
    }
    for x in regions.unsafe_set.grid(seed_step, 0.0, cfg.max_points)? {
        ces.insert(Condition::UnsafeLevel, &x);
    }

    let mut outcome = SynthesisOutcome {
        certificate: None,
        report: None,
        level_condition: false,
        iterations: 0,
        best_violation: f64::INFINITY,
        counterexamples: CounterexampleSet::default(),
        log: Vec::new(),
        failure: None,
    };
    let shapes: Vec<Shape> = cfg
        .kappa_candidates
        .iter()
        .flat_map(|&kappa| {
            cfg.alpha_exponents.iter().flat_map(move |&alpha_exp| {
                cfg.gamma_exponents.iter().map(move |&gamma_exp| Shape { kappa, alpha_exp, gamma_exp })
            })
        })
        .collect();
    if shapes.is_empty() {
        return Err(Error::Config("no class-function candidates".into()));
    }

    'shapes: for shape in shapes {
        let mut resolution = cfg.initial_grid_resolution.max(cfg.final_resolution);
        let mut prev: Option<LocalCertificate> = None;
        loop {
            if outcome.iterations >= cfg.max_iterations {
                outcome.failure = Some(format!("iteration budget of {} exhausted", cfg.max_iterations));
                break 'shapes;
            }
            outcome.iterations += 1;
            let inputs = learning.choose_inputs(&ces, prev.as_ref());
            let rows = learning.rows(shape, &ces, &inputs);
            let Some(fit) = learning.fit(&rows, outcome.iterations)? else {
                continue 'shapes;
            };
            outcome.best_violation = outcome.best_violation.min(fit.violation.max(0.0));
            let mut log = IterationLog {
                iteration: outcome.iterations,
                kappa: shape.kappa,
                alpha_exponent: shape.alpha_exp,
                gamma_exponent: shape.gamma_exp,
                resolution,
                counterexamples: ces.len(),
                learner_violation: fit.violation,
                scan_violation: 0.0,
                scan_condition: None,
                new_counterexamples: 0,
            };
            if fit.violation > cfg.tolerance {
                // The sample set already rules this shape out.
                outcome.log.push(log);
                continue 'shapes;
            }
            let cand = learning.candidate(shape, &fit.coeffs, fit.alpha, fit.gamma)?;
            // Scan the candidate, refining the grid while nothing new turns up.
            loop {
                log.resolution = resolution;
                let mut found = p.violations(&cand, resolution, cfg.tolerance, cfg.strict_slack, cfg.max_points, 0)?;
                found.sort_by(|a, b| b.violation.total_cmp(&a.violation));
                if let Some(w) = found.first() {
                    log.scan_violation = w.violation;
                    log.scan_condition = Some(w.condition);
                }
                let mut per: std::collections::HashMap<Condition, usize> = Default::default();
                for w in &found {
                    let n = per.entry(w.condition).or_default();
                    if *n >= cfg.max_new_per_condition {
                        continue;
                    }
                    if ces.insert(w.condition, &w.x) {
                        *n += 1;
                        log.new_counterexamples += 1;
                    }
                }
                if log.new_counterexamples > 0 || resolution <= cfg.final_resolution * (1.0 + 1e-12) {
                    break;
                }
                resolution = (resolution * cfg.refinement_factor).max(cfg.final_resolution);
            }
            let nothing_new = log.new_counterexamples == 0;
            outcome.log.push(log);
            prev = Some(cand.clone());
            if !nothing_new {
                continue;
            }

            let mut cert = cand;
            let level_ok = learning.set_levels(&mut cert, cfg.final_resolution)?;
            let spec = GridSpec {
                step: cfg.final_resolution,
                boundary_offset: 0.0,
                tolerance: cfg.tolerance,
                strict_slack: cfg.strict_slack,
                lipschitz: None,
                internal: cfg.internal.clone(),
                max_points: cfg.max_points,
                conditions: Condition::LOCAL.to_vec(),
            };
            let report = verify_local(&cert, s, &spec)?;
            if report.passed() {
                outcome.certificate = Some(cert);
                outcome.report = Some(report);
                outcome.level_condition = level_ok;
                outcome.best_violation = 0.0;
                break 'shapes;
            }
            let mut added = false;
            for r in &report.conditions {
                if let (false, Some(x)) = (r.passed(), &r.witness_x) {
                    added |= ces.insert(r.condition, x);
                }
            }
            if !added {
                outcome.report = Some(report);
                outcome.failure = Some("the final check rejects the candidate without a new counterexample".into());
                break 'shapes;
            }
        }
    }
    if outcome.certificate.is_none() && outcome.failure.is_none() {
        outcome.failure = Some("no class-function candidate admits a certificate on the sample set".into());
    }
    outcome.counterexamples = ces;
    Ok(outcome)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::system::CustomSystemJson;

    pub const TOY_SYSTEM: &str = r#"{
        "subsystems": [{
            "name": "toy",
            "state_region": [{"lo": [-2], "hi": [2]}],
            "internal_region": [{"lo": [-1], "hi": [1]}],
            "inputs": {"finite": [[-0.5], [0], [0.5]]},
            "update": ["0.5*x0 + u0 + 0.1*w0"]
        }]
    }"#;

    pub fn toy() -> (Subsystem, Regions) {
        let s = CustomSystemJson::from_json_str(TOY_SYSTEM).unwrap().build_subsystems().unwrap()[0].as_ref().clone();
        let r = Regions::for_subsystem(&s, Region::interval(-0.2, 0.2).unwrap(), Region::interval(1.5, 2.0).unwrap());
        (s, r)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::toy;
    use super::*;
    use crate::barrier::fixtures::room_certificate;
    use crate::system::{build_room_network, RoomParams};

    fn inputs(s: &Subsystem) -> Vec<Vec<f64>> {
        finite_inputs(s).unwrap().to_vec()
    }

    #[test]
    fn toy_synthesis_verifies() {
        let (s, r) = toy();
        let t = Template::dense(1, 2, 100.0);
        let out = synthesize_cegis(&t, &s, &r, &inputs(&s), &CegisConfig::default()).unwrap();
        let same_shape = |a: &IterationLog, b: &IterationLog| {
            (a.kappa, a.alpha_exponent, a.gamma_exponent) == (b.kappa, b.alpha_exponent, b.gamma_exponent)
        };
        let log_ok = out
            .log
            .windows(2)
            .filter(|w| same_shape(&w[0], &w[1]))
            .all(|w| w[1].counterexamples > w[0].counterexamples);
        let cert = out.clone().into_certificate().expect("toy certificate");
        assert!(log_ok);
        let spec = GridSpec { step: 1e-3, internal: InternalSampling::Grid { step: 0.25 }, ..GridSpec::default() };
        assert!(verify_local(&cert, &s, &spec).unwrap().passed());
        assert!(out.level_condition);
    }

    #[test]
    fn overlapping_regions_fail_before_iterating() {
        let (s, mut r) = toy();
        r.unsafe_set = Region::interval(0.0, 2.0).unwrap();
        let err =
            synthesize_cegis(&Template::dense(1, 2, 100.0), &s, &r, &inputs(&s), &CegisConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleRegions(_)), "{err}");
    }

    #[test]
    fn zero_budget_fails_immediately() {
        let (s, r) = toy();
        let cfg = CegisConfig { max_iterations: 0, ..CegisConfig::default() };
        let out = synthesize_cegis(&Template::dense(1, 2, 100.0), &s, &r, &inputs(&s), &cfg).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.log.is_empty());
        let err = out.into_certificate().unwrap_err();
        assert!(matches!(err, Error::SynthesisFailed { iterations: 0, .. }));
    }

    #[test]
    fn empty_inputs_and_unbounded_regions_are_rejected() {
        let (s, r) = toy();
        let t = Template::dense(1, 2, 100.0);
        assert!(matches!(synthesize_cegis(&t, &s, &r, &[], &CegisConfig::default()), Err(Error::Config(_))));
        assert!(Region::interval(-2.0, f64::INFINITY).is_err());
    }

    #[test]
    fn synthesis_is_deterministic() {
        let (s, r) = toy();
        let t = Template::dense(1, 2, 100.0);
        let a = synthesize_cegis(&t, &s, &r, &inputs(&s), &CegisConfig::default()).unwrap();
        let b = synthesize_cegis(&t, &s, &r, &inputs(&s), &CegisConfig::default()).unwrap();
        assert_eq!(a.certificate, b.certificate);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn zero_barrier_breaks_unsafe_level() {
        let (s, r) = toy();
        let mut c = room_certificate();
        c.barrier = Polynomial::univariate(&[0.0]).unwrap();
        c.eps_lower = 1.0;
        c.alpha = KFn::Linear(1e-9);
        let spec = SearchSpec {
            resolution: 0.1,
            internal: InternalSampling::Grid { step: 0.5 },
            tolerance: 1e-9,
            strict_slack: 1e-9,
            max_points: 1_000_000,
        };
        let found = counterexample_search(&c, &s, &r, &inputs(&s), &spec).unwrap().unwrap();
        assert!(matches!(found.condition, Condition::UnsafeLevel | Condition::OutputBound));
        c.alpha = KFn::Power(1e-12, 2.0);
        let only_levels = Regions { state: Region::interval(0.0, 0.0).unwrap(), ..r.clone() };
        let w = counterexample_search(&c, &s, &only_levels, &inputs(&s), &spec).unwrap().unwrap();
        assert_eq!(w.condition, Condition::UnsafeLevel);
        assert!(r.unsafe_set.contains(&w.x));
        assert!((w.violation - (1.0 + 1e-9)).abs() < 1e-12);
    }

    #[test]
    fn decrease_witness_uses_best_input() {
        let (s, r) = toy();
        // B = x² with κ̂ tiny and no gain: every x ≠ 0 fails whichever input is used.
        let mut c = room_certificate();
        c.barrier = Polynomial::univariate(&[0.0, 0.0, 1.0]).unwrap();
        c.alpha = KFn::Power(0.5, 2.0);
        c.gains = Gains::Additive { kappa_hat: KFn::Linear(1e-9), gamma_hat: KFn::Linear(1e-9) };
        c.eps_upper = 0.05;
        c.eps_lower = 2.0;
        let spec = SearchSpec {
            resolution: 0.5,
            internal: InternalSampling::Grid { step: 1.0 },
            tolerance: 1e-9,
            strict_slack: 1e-9,
            max_points: 1_000_000,
        };
        let w = counterexample_search(&c, &s, &r, &inputs(&s), &spec).unwrap().unwrap();
        assert_eq!(w.condition, Condition::Decrease);
        let u = w.u.clone().unwrap();
        let x = &w.x;
        let slack_of = |u: &[f64]| {
            [-1.0, 0.0, 1.0]
                .iter()
                .map(|wv: &f64| c.decrease_bound(c.barrier.eval(x), wv.abs()) - c.barrier.eval(&s.apply(x, &[*wv], u)))
                .fold(f64::INFINITY, f64::min)
        };
        let chosen = slack_of(&u);
        for other in inputs(&s) {
            assert!(slack_of(&other) <= chosen + 1e-12);
        }
        assert!((chosen + w.violation).abs() < 1e-12);
    }

    #[test]
    fn room_certificate_region_conditions_have_no_witness() {
        let (sys, _) = build_room_network(3, RoomParams::default()).unwrap();
        let s = sys.subsystem(0);
        let c = room_certificate();
        let r = Regions::for_subsystem(s, c.region_a.clone(), c.region_b.clone());
        let u = [vec![0.5]];
        let p = Problem1::new(s, &r, &u, &InternalSampling::Grid { step: 45.0 }, 1_000_000_000).unwrap();
        let found = p.violations(&c, 1e-3, 1e-9, 1e-9, 1_000_000_000, 0).unwrap();
        assert!(found.iter().all(|w| w.condition == Condition::Decrease));
    }

    #[test]
    fn random_restart_is_seeded() {
        let (s, r) = toy();
        let cfg = CegisConfig {
            learner: Learner::RandomRestart { samples: 200, seed: 7 },
            max_iterations: 4,
            ..CegisConfig::default()
        };
        let t = Template::dense(1, 2, 10.0);
        let a = synthesize_cegis(&t, &s, &r, &inputs(&s), &cfg).unwrap();
        let b = synthesize_cegis(&t, &s, &r, &inputs(&s), &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert!(a.iterations <= 4);
        if let Some(c) = &a.certificate {
            assert!(a.report.as_ref().unwrap().passed(), "{c:?}");
        }
    }

    #[test]
    fn template_validation() {
        let mut t = Template::dense(1, 2, 10.0);
        assert_eq!(t.parameter_count(), 3);
        t.basis[1] = vec![0];
        assert!(t.validate().is_err());
    }

    #[test]
    fn log_csv_has_one_row_per_iteration() {
        let (s, r) = toy();
        let out =
            synthesize_cegis(&Template::dense(1, 2, 100.0), &s, &r, &inputs(&s), &CegisConfig::default()).unwrap();
        let mut buf = Vec::new();
        out.write_log_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), out.log.len() + 1);
        assert!(text.starts_with("iteration,kappa"));
    }
}
