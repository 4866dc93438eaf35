//! Grid verification of the local certificate conditions.
//!
//! Every condition is turned into a slack function `s(x)` that must stay
//! non-negative. The slack is evaluated on a grid of spacing `h`; with a
//! Lipschitz constant `L` for `s`, a worst sampled slack of at least
//! `L h / 2` proves the condition between grid points as well.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LocalCertificate;
use crate::error::{Error, Result};
use crate::geometry::{norm_inf, product_size, Hyperbox, Region};
use crate::policy::{BlockController, ControllerSpec, Reference};
use crate::system::{InputSpec, Subsystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `B(x) >= α(‖h(x)‖)` on `X`.
    OutputBound,
    /// `B(x) <= ε̄` on `X_a`.
    InitialLevel,
    /// `B(x) > ε̲` on `X_b`.
    UnsafeLevel,
    /// The local decrease inequality on `X`.
    Decrease,
    /// `B(f(x, u(x))) <= κ(B(x))` for a composed certificate.
    ComposedDecrease,
}

impl Condition {
    pub const LOCAL: [Condition; 4] =
        [Condition::OutputBound, Condition::InitialLevel, Condition::UnsafeLevel, Condition::Decrease];

    pub fn name(self) -> &'static str {
        match self {
            Condition::OutputBound => "output_bound",
            Condition::InitialLevel => "initial_level",
            Condition::UnsafeLevel => "unsafe_level",
            Condition::Decrease => "decrease",
            Condition::ComposedDecrease => "composed_decrease",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The slack evaluated to NaN somewhere.
    Unknown,
}

/// How the internal input `w` is sampled in the decrease condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InternalSampling {
    /// Grid of the given spacing over `W`.
    Grid { step: f64 },
    /// The single reference point `w*` of the determinized rule.
    Reference(Reference),
    /// Uniform random points of `W`'s bounding box plus its centroid.
    Random { count: usize, seed: u64 },
}

/// Grid resolution and tolerances for [`verify_local`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Spacing of the state grid.
    pub step: f64,
    /// Grids start and end this far inside each box.
    pub boundary_offset: f64,
    /// A condition fails when its worst slack is below `-tolerance`.
    pub tolerance: f64,
    /// `B > ε̲` is checked as `B >= ε̲ + strict_slack`.
    pub strict_slack: f64,
    /// Lipschitz constant of the slack in `x`; estimated from the grid when
    /// absent.
    pub lipschitz: Option<f64>,
    pub internal: InternalSampling,
    /// Upper bound on `x`, `w`, `u` evaluations per condition.
    pub max_points: u128,
    pub conditions: Vec<Condition>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            step: 1e-2,
            boundary_offset: 0.0,
            tolerance: 1e-9,
            strict_slack: 1e-9,
            lipschitz: None,
            internal: InternalSampling::Grid { step: 1.0 },
            max_points: 500_000_000,
            conditions: Condition::LOCAL.to_vec(),
        }
    }
}

/// Outcome of one condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub status: Status,
    /// True when the worst slack exceeds the Lipschitz margin, so the
    /// condition holds between grid points as well.
    pub certified: bool,
    pub points: u64,
    /// Grid points with slack below `-tolerance`.
    pub violations: u64,
    pub worst_slack: f64,
    pub margin: f64,
    pub lipschitz: Option<f64>,
    pub witness_x: Option<Vec<f64>>,
    pub witness_u: Option<Vec<f64>>,
    pub witness_w: Option<Vec<f64>>,
}

impl ConditionReport {
    fn vacuous(condition: Condition) -> Self {
        ConditionReport {
            condition,
            status: Status::Pass,
            certified: true,
            points: 0,
            violations: 0,
            worst_slack: f64::INFINITY,
            margin: 0.0,
            lipschitz: None,
            witness_x: None,
            witness_u: None,
            witness_w: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Grid spacing used, if the report comes from a grid.
    pub step: Option<f64>,
    pub tolerance: f64,
    pub conditions: Vec<ConditionReport>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(ConditionReport::passed)
    }

    pub fn get(&self, c: Condition) -> Option<&ConditionReport> {
        self.conditions.iter().find(|r| r.condition == c)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.conditions {
            let verdict = match (r.status, r.certified) {
                (Status::Pass, true) => "PASS (certified)",
                (Status::Pass, false) => "PASS (sampled only)",
                (Status::Fail, _) => "FAIL",
                (Status::Unknown, _) => "UNKNOWN",
            };
            write!(
                f,
                "{:<18} {:<20} worst slack {:+.6e}  margin {:.3e}  points {}",
                r.condition.name(),
                verdict,
                r.worst_slack,
                r.margin,
                r.points
            )?;
            if let Some(x) = &r.witness_x {
                write!(f, "  at x = {}", fmt_vec(x))?;
            }
            if let Some(u) = &r.witness_u {
                write!(f, " u = {}", fmt_vec(u))?;
            }
            if let Some(w) = &r.witness_w {
                write!(f, " w = {}", fmt_vec(w))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn fmt_vec(v: &[f64]) -> String {
    const SHOWN: usize = 6;
    let mut parts: Vec<String> = v.iter().take(SHOWN).map(|x| format!("{x:.6}")).collect();
    if v.len() > SHOWN {
        parts.push(format!("… ({} entries)", v.len()));
    }
    format!("[{}]", parts.join(", "))
}

/// Grid over one box, addressed by flat index with the last axis fastest.
struct BoxGrid {
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    len: usize,
}

impl BoxGrid {
    fn new(b: &Hyperbox, step: f64, offset: f64) -> Result<Self> {
        let axes = b.grid_axes(step, offset)?;
        let mut strides = vec![1usize; axes.len()];
        for k in (0..axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1].saturating_mul(axes[k + 1].len());
        }
        let len = axes.iter().fold(1usize, |acc, a| acc.saturating_mul(a.len()));
        Ok(BoxGrid { axes, strides, len })
    }

    fn point(&self, mut k: usize, out: &mut [f64]) {
        for (a, axis) in self.axes.iter().enumerate() {
            let i = k / self.strides[a];
            k %= self.strides[a];
            out[a] = axis[i];
        }
    }

    fn point_vec(&self, k: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.axes.len()];
        self.point(k, &mut p);
        p
    }

    /// `Σ_a max |Δs| / Δx_a` over neighbouring grid points, an estimate of
    /// the Lipschitz constant of `s` in the infinity norm.
    fn lipschitz(&self, values: &[f64]) -> f64 {
        let mut total = 0.0;
        for (a, axis) in self.axes.iter().enumerate() {
            let stride = self.strides[a];
            let m = axis.len();
            let best = (0..self.len)
                .into_par_iter()
                .filter_map(|k| {
                    let i = (k / stride) % m;
                    if i + 1 >= m {
                        return None;
                    }
                    let dx = axis[i + 1] - axis[i];
                    let ds = (values[k + stride] - values[k]).abs();
                    (dx > 0.0 && ds.is_finite()).then_some(ds / dx)
                })
                .reduce(|| 0.0, f64::max);
            total += best;
        }
        total
    }
}

/// Worst slack of `eval` over the grid of `region`.
struct Scan {
    points: u64,
    violations: u64,
    worst: f64,
    witness: Option<Vec<f64>>,
    lipschitz: f64,
    saw_nan: bool,
}

fn scan<F>(region: &Region, step: f64, offset: f64, limit: u128, cost: u128, tol: f64, eval: F) -> Result<Scan>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let grids: Vec<BoxGrid> = region.boxes().iter().map(|b| BoxGrid::new(b, step, offset)).collect::<Result<_>>()?;
    let total: u128 = grids.iter().map(|g| product_size(&g.axes)).sum();
    if total.saturating_mul(cost.max(1)) > limit {
        return Err(Error::GridTooLarge { points: total.saturating_mul(cost.max(1)), limit });
    }
    let mut out =
        Scan { points: 0, violations: 0, worst: f64::INFINITY, witness: None, lipschitz: 0.0, saw_nan: false };
    for g in &grids {
        let dim = g.axes.len();
        let values: Vec<f64> = (0..g.len)
            .into_par_iter()
            .map_init(
                || vec![0.0; dim],
                |p, k| {
                    g.point(k, p);
                    eval(p)
                },
            )
            .collect();
        out.points += g.len as u64;
        out.violations += values.iter().filter(|v| **v < -tol).count() as u64;
        out.saw_nan |= values.iter().any(|v| v.is_nan());
        // First index wins ties, so the witness is deterministic.
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in values.iter().enumerate() {
            if !v.is_nan() && best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
        if let Some((k, v)) = best {
            if v < out.worst {
                out.worst = v;
                out.witness = Some(g.point_vec(k));
            }
        }
        out.lipschitz = out.lipschitz.max(g.lipschitz(&values));
    }
    Ok(out)
}

fn finish(condition: Condition, s: Scan, spec: &GridSpec, extra_margin: f64, sampled_only: bool) -> ConditionReport {
    let lipschitz = spec.lipschitz.unwrap_or(s.lipschitz);
    let margin = lipschitz * spec.step / 2.0 + extra_margin;
    let status = if s.saw_nan {
        Status::Unknown
    } else if s.worst < -spec.tolerance {
        Status::Fail
    } else {
        Status::Pass
    };
    ConditionReport {
        condition,
        status,
        certified: status == Status::Pass && !sampled_only && s.worst >= margin,
        points: s.points,
        violations: s.violations,
        worst_slack: s.worst,
        margin,
        lipschitz: Some(lipschitz),
        witness_x: s.witness,
        witness_u: None,
        witness_w: None,
    }
}

/// Samples of `W` with their norms, and the grid structure when gridded.
struct InternalSamples {
    points: Vec<Vec<f64>>,
    norms: Vec<f64>,
    grids: Option<(f64, Vec<(BoxGrid, usize)>)>,
}

fn internal_samples(c: &LocalCertificate, s: &Subsystem, spec: &GridSpec) -> Result<InternalSamples> {
    let region = c.internal_region_for(s);
    if s.internal_dim == 0 || region.is_empty() {
        return Ok(InternalSamples { points: vec![Vec::new()], norms: vec![0.0], grids: None });
    }
    let (points, grids) = match &spec.internal {
        InternalSampling::Grid { step } => {
            let mut pts = Vec::new();
            let mut grids = Vec::new();
            for b in region.boxes() {
                let g = BoxGrid::new(b, *step, 0.0)?;
                if product_size(&g.axes) > spec.max_points {
                    return Err(Error::GridTooLarge { points: product_size(&g.axes), limit: spec.max_points });
                }
                let start = pts.len();
                pts.extend((0..g.len).map(|k| g.point_vec(k)));
                grids.push((g, start));
            }
            (pts, Some((*step, grids)))
        }
        InternalSampling::Reference(r) => (vec![r.resolve(s)?], None),
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
            (pts, None)
        }
    };
    let norms = points.iter().map(|w| norm_inf(w)).collect();
    Ok(InternalSamples { points, norms, grids })
}

/// Inputs tried at `x`: the controller's choice, or every element of a
/// finite input set.
enum InputChoice {
    Controller(BlockController),
    Enumerate(Vec<Vec<f64>>),
}

fn input_choice(c: &LocalCertificate, s: &Subsystem) -> Result<InputChoice> {
    match (&c.controller, &s.inputs) {
        (Some(spec @ (ControllerSpec::Polynomial(_) | ControllerSpec::Constant(_))), _) => {
            Ok(InputChoice::Controller(BlockController::compile(spec, None, std::sync::Arc::new(s.clone()))?))
        }
        (_, InputSpec::Finite(set)) => Ok(InputChoice::Enumerate(set.clone())),
        (_, InputSpec::Box(_)) => Err(Error::Config(format!(
            "{}: the decrease condition over a continuous input set needs a polynomial or constant controller",
            s.name
        ))),
    }
}

/// `min_w (rhs(x, w) - B(f(x, w, u)))` together with the minimizing `w`.
fn worst_over_w(
    c: &LocalCertificate,
    s: &Subsystem,
    ws: &InternalSamples,
    x: &[f64],
    bx: f64,
    u: &[f64],
) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    let mut next = vec![0.0; s.state_dim];
    for (k, (w, wn)) in ws.points.iter().zip(&ws.norms).enumerate() {
        s.dynamics.step(x, w, u, &mut next);
        let slack = c.decrease_bound(bx, *wn) - c.barrier.eval(&next);
        if slack < best.0 || slack.is_nan() {
            best = (slack, k);
            if slack.is_nan() {
                break;
            }
        }
    }
    best
}

/// `max_u min_w` slack at `x` with the chosen input and worst `w`.
fn decrease_at(
    c: &LocalCertificate,
    s: &Subsystem,
    ws: &InternalSamples,
    inputs: &InputChoice,
    x: &[f64],
) -> (f64, Vec<f64>, usize) {
    let bx = c.barrier.eval(x);
    match inputs {
        InputChoice::Controller(ctrl) => {
            let u = ctrl.input(x);
            let (slack, k) = worst_over_w(c, s, ws, x, bx, &u);
            (slack, u, k)
        }
        InputChoice::Enumerate(set) => {
            let mut best: Option<(f64, &Vec<f64>, usize)> = None;
            for u in set {
                let (slack, k) = worst_over_w(c, s, ws, x, bx, u);
                if best.is_none_or(|(b, _, _)| slack > b) {
                    best = Some((slack, u, k));
                }
            }
            let (slack, u, k) = best.expect("input set is non-empty");
            (slack, u.clone(), k)
        }
    }
}

/// Checks the local certificate conditions of `c` for subsystem `s` on a
/// grid. Regions not given in the certificate come from the subsystem.
pub fn verify_local(c: &LocalCertificate, s: &Subsystem, spec: &GridSpec) -> Result<VerificationReport> {
    c.validate()?;
    if c.dim() != s.state_dim {
        return Err(Error::DimensionMismatch(format!(
            "barrier in {} variables for a {}-dimensional subsystem",
            c.dim(),
            s.state_dim
        )));
    }
    if !(spec.step > 0.0) || spec.boundary_offset < 0.0 {
        return Err(Error::Config(format!(
            "grid step must be positive and the boundary offset non-negative (got {}, {})",
            spec.step, spec.boundary_offset
        )));
    }
    let x_region = c.state_region_for(s);
    let mut conditions = Vec::new();
    for &cond in &spec.conditions {
        let report = match cond {
            Condition::OutputBound => {
                let sc = scan(x_region, spec.step, spec.boundary_offset, spec.max_points, 1, spec.tolerance, |x| {
                    c.barrier.eval(x) - c.alpha.apply(norm_inf(&s.output(x)))
                })?;
                finish(cond, sc, spec, 0.0, false)
            }
            Condition::InitialLevel if c.region_a.is_empty() => ConditionReport::vacuous(cond),
            Condition::InitialLevel => {
                let sc = scan(&c.region_a, spec.step, spec.boundary_offset, spec.max_points, 1, spec.tolerance, |x| {
                    c.eps_upper - c.barrier.eval(x)
                })?;
                finish(cond, sc, spec, 0.0, false)
            }
            Condition::UnsafeLevel if c.region_b.is_empty() => ConditionReport::vacuous(cond),
            Condition::UnsafeLevel => {
                let sc = scan(&c.region_b, spec.step, spec.boundary_offset, spec.max_points, 1, spec.tolerance, |x| {
                    c.barrier.eval(x) - c.eps_lower - spec.strict_slack
                })?;
                finish(cond, sc, spec, 0.0, false)
            }
            Condition::Decrease => verify_decrease(c, s, spec, x_region)?,
            Condition::ComposedDecrease => {
                return Err(Error::Config("the composed decrease is checked by check_decrease_composed".into()));
            }
        };
        conditions.push(report);
    }
    Ok(VerificationReport { step: Some(spec.step), tolerance: spec.tolerance, conditions })
}

fn verify_decrease(c: &LocalCertificate, s: &Subsystem, spec: &GridSpec, x_region: &Region) -> Result<ConditionReport> {
    let ws = internal_samples(c, s, spec)?;
    let inputs = input_choice(c, s)?;
    let n_inputs = match &inputs {
        InputChoice::Controller(_) => 1,
        InputChoice::Enumerate(set) => set.len(),
    };
    let cost = (ws.points.len() as u128).saturating_mul(n_inputs as u128);
    let sc = scan(x_region, spec.step, spec.boundary_offset, spec.max_points, cost, spec.tolerance, |x| {
        decrease_at(c, s, &ws, &inputs, x).0
    })?;

    let detail = sc.witness.as_ref().map(|x| decrease_at(c, s, &ws, &inputs, x));
    // Margin in `w`: slopes of the slack over the W grid at the witness.
    let mut w_margin = 0.0;
    if let (Some((step_w, grids)), Some(x), Some((_, u, _))) = (&ws.grids, &sc.witness, &detail) {
        let bx = c.barrier.eval(x);
        let mut next = vec![0.0; s.state_dim];
        let mut lw: f64 = 0.0;
        for (g, start) in grids {
            let vals: Vec<f64> = (0..g.len)
                .map(|k| {
                    s.dynamics.step(x, &ws.points[start + k], u, &mut next);
                    c.decrease_bound(bx, ws.norms[start + k]) - c.barrier.eval(&next)
                })
                .collect();
            lw = lw.max(g.lipschitz(&vals));
        }
        w_margin = lw * step_w / 2.0;
    }
    let sampled_only = ws.grids.is_none() && s.internal_dim > 0;
    let mut report = finish(Condition::Decrease, sc, spec, w_margin, sampled_only);
    if let Some((_, u, k)) = detail {
        report.witness_u = Some(u);
        report.witness_w = Some(ws.points[k].clone());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::room_certificate;
    use super::*;
    use crate::comparison::KFn;
    use crate::poly::Polynomial;
    use crate::system::{room_subsystem, CustomSystemJson, RoomParams};

    fn region_spec() -> GridSpec {
        GridSpec {
            conditions: vec![Condition::OutputBound, Condition::InitialLevel, Condition::UnsafeLevel],
            ..GridSpec::default()
        }
    }

    #[test]
    fn room_region_conditions_pass() {
        let s = room_subsystem(RoomParams::default()).unwrap();
        let r = verify_local(&room_certificate(), &s, &region_spec()).unwrap();
        assert!(r.passed(), "{r}");
        let unsafe_level = r.get(Condition::UnsafeLevel).unwrap();
        // B(20) = 40.014 is the closest approach to ε̲ = 40.
        assert!((unsafe_level.worst_slack - (0.07456 * 400.0 - 63.6 + 73.79 - 40.0)).abs() < 1e-6);
        assert_eq!(unsafe_level.witness_x.as_deref(), Some(&[20.0][..]));
    }

    #[test]
    fn infinite_lower_level_fails_in_unsafe_set() {
        let s = room_subsystem(RoomParams::default()).unwrap();
        let mut c = room_certificate();
        c.eps_lower = f64::INFINITY;
        let r = verify_local(&c, &s, &region_spec()).unwrap();
        let u = r.get(Condition::UnsafeLevel).unwrap();
        assert_eq!(u.status, Status::Fail);
        assert!(c.region_b.contains(u.witness_x.as_ref().unwrap()));
    }

    #[test]
    fn initial_level_witness() {
        let s = room_subsystem(RoomParams::default()).unwrap();
        let mut c = room_certificate();
        c.eps_upper = 39.9;
        let r = verify_local(&c, &s, &region_spec()).unwrap();
        let i = r.get(Condition::InitialLevel).unwrap();
        assert_eq!(i.status, Status::Fail);
        assert!(i.violations > 0);
    }

    #[test]
    fn continuous_inputs_need_a_controller() {
        let s = room_subsystem(RoomParams::default()).unwrap();
        let mut c = room_certificate();
        c.controller = None;
        let spec = GridSpec { conditions: vec![Condition::Decrease], ..GridSpec::default() };
        assert!(matches!(verify_local(&c, &s, &spec), Err(Error::Config(_))));
    }

    fn toy_subsystem() -> Subsystem {
        let src = r#"{"subsystems": [{
            "state_region": [{"lo": [-2], "hi": [2]}],
            "internal_region": [{"lo": [-1], "hi": [1]}],
            "inputs": {"finite": [[-0.5], [0], [0.5]]},
            "update": ["0.5*x0 + u0 + 0.1*w0"]
        }]}"#;
        CustomSystemJson::from_json_str(src).unwrap().build_subsystems().unwrap()[0].as_ref().clone()
    }

    fn toy_certificate() -> LocalCertificate {
        LocalCertificate {
            name: None,
            key: None,
            barrier: Polynomial::univariate(&[0.0, 0.0, 1.0]).unwrap(),
            alpha: KFn::Power(0.5, 2.0),
            gains: crate::barrier::Gains::Additive { kappa_hat: KFn::Linear(0.5), gamma_hat: KFn::Power(0.1, 2.0) },
            eps_upper: 0.04,
            eps_lower: 1.0,
            region_a: Region::interval(-0.2, 0.2).unwrap(),
            region_b: Region::interval(1.5, 2.0).unwrap(),
            state_region: None,
            internal_region: None,
            controller: None,
        }
    }

    #[test]
    fn toy_certificate_verifies_by_enumeration() {
        // With u = -x rounded to the input set the successor is within
        // 0.25 + 0.1 of zero, so B(f) <= 0.1225 while κ̂(B) + γ̂ >= 0.5 x^2.
        let s = toy_subsystem();
        let spec = GridSpec { step: 1e-3, internal: InternalSampling::Grid { step: 0.05 }, ..GridSpec::default() };
        let r = verify_local(&toy_certificate(), &s, &spec).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn decrease_failure_reports_input_and_internal_witness() {
        let s = toy_subsystem();
        let mut c = toy_certificate();
        c.gains = crate::barrier::Gains::Additive { kappa_hat: KFn::Linear(0.01), gamma_hat: KFn::Linear(0.01) };
        let spec = GridSpec {
            step: 1e-2,
            internal: InternalSampling::Grid { step: 0.1 },
            conditions: vec![Condition::Decrease],
            ..GridSpec::default()
        };
        let r = verify_local(&c, &s, &spec).unwrap();
        let d = r.get(Condition::Decrease).unwrap();
        assert_eq!(d.status, Status::Fail);
        assert!(d.witness_u.is_some() && d.witness_w.is_some());
    }

    #[test]
    fn refining_keeps_coarse_violations() {
        let s = room_subsystem(RoomParams::default()).unwrap();
        let mut c = room_certificate();
        c.eps_upper = 39.95;
        let coarse = GridSpec { step: 0.1, ..region_spec() };
        let fine = GridSpec { step: 0.05, ..region_spec() };
        let a = verify_local(&c, &s, &coarse).unwrap();
        let b = verify_local(&c, &s, &fine).unwrap();
        let wa = a.get(Condition::InitialLevel).unwrap().worst_slack;
        let wb = b.get(Condition::InitialLevel).unwrap().worst_slack;
        assert!(wb <= wa);
        assert!(
            b.get(Condition::InitialLevel).unwrap().violations >= a.get(Condition::InitialLevel).unwrap().violations
        );
    }

    #[test]
    fn grid_limit_is_enforced() {
        let s = room_subsystem(RoomParams::default()).unwrap();
        let spec = GridSpec { max_points: 10, ..region_spec() };
        assert!(matches!(verify_local(&room_certificate(), &s, &spec), Err(Error::GridTooLarge { .. })));
    }
}
