//! Gain matrices, the small-gain test, diagonal scalings and the
//! additive-to-max conversion of local decrease conditions.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::kfn::{IdentityComparison, KFn};
use crate::error::{Error, Result};
use crate::graph::simple_cycles;
use crate::system::Wiring;

/// Cycles examined before the general small-gain test gives up.
pub const CYCLE_LIMIT: usize = 1_000_000;

/// Default `ψ` for the max-form conversion; any `ψ < I_d` works and values
/// close to the identity keep `γ_w` close to `γ̂ / (1 - κ̂)`.
pub const DEFAULT_PSI: f64 = 1.0 - 1e-9;

/// Sparse `N x N` matrix of comparison functions. Entry `(i, j)` is `γ_ij`,
/// the gain from subsystem `j` into subsystem `i`; absent entries mean no
/// coupling. Indices are zero-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    n: usize,
    rows: Vec<Vec<(usize, KFn)>>,
}

impl GainMatrix {
    pub fn new(n: usize) -> Self {
        GainMatrix { n, rows: vec![Vec::new(); n] }
    }

    /// Dense construction from linear coefficients; `None` marks no coupling.
    pub fn from_linear(coeffs: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = coeffs.len();
        let mut m = GainMatrix::new(n);
        for (i, row) in coeffs.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, c) in row.iter().enumerate() {
                if let Some(c) = c {
                    m.set(i, j, KFn::linear(*c)?)?;
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, i: usize, j: usize, f: KFn) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::DimensionMismatch(format!("entry ({i},{j}) outside a {0}x{0} matrix", self.n)));
        }
        f.validate()?;
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |(k, _)| *k) {
            Ok(pos) => row[pos].1 = f,
            Err(pos) => row.insert(pos, (j, f)),
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&KFn> {
        let row = self.rows.get(i)?;
        row.binary_search_by_key(&j, |(k, _)| *k).ok().map(|p| &row[p].1)
    }

    /// Every present entry as `(i, j, γ_ij)`, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &KFn)> {
        self.rows.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |(j, f)| (i, *j, f)))
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        self.rows.iter().map(|r| r.iter().map(|(j, _)| *j).collect()).collect()
    }

    fn linear_log_weights(&self) -> Option<Vec<Vec<(usize, f64)>>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter().map(|(j, f)| f.linear_coefficient().map(|c| (*j, c.ln()))).collect::<Option<Vec<_>>>()
            })
            .collect()
    }

    /// `γ_{v0 v1} ∘ γ_{v1 v2} ∘ .. ∘ γ_{vk v0}`.
    pub fn cycle_gain(&self, cycle: &[usize]) -> Option<KFn> {
        let mut acc = KFn::Identity;
        for (k, &v) in cycle.iter().enumerate() {
            let next = cycle[(k + 1) % cycle.len()];
            acc = acc.compose(self.get(v, next)?);
        }
        Some(acc)
    }
}

/// `γ_ii = κ_i` and `γ_ij = γ_wi ∘ α_j⁻¹` for every wired pair `j -> i`.
/// `locals[i]` holds `(α_i, κ_i, γ_wi)` in max form.
pub fn gamma_matrix_from(locals: &[(KFn, KFn, KFn)], wiring: &Wiring) -> Result<GainMatrix> {
    let n = locals.len();
    let mut m = GainMatrix::new(n);
    let inverses: Vec<KFn> = locals.iter().map(|(a, _, _)| a.inverse()).collect::<Result<_>>()?;
    for (i, (_, kappa, gamma_w)) in locals.iter().enumerate() {
        m.set(i, i, kappa.simplify())?;
        for j in wiring.in_neighbors(i, n)? {
            if j != i {
                m.set(i, j, gamma_w.compose(&inverses[j]))?;
            }
        }
    }
    Ok(m)
}

/// Verifies that every simple cycle of the gain graph composes to a function
/// below the identity.
pub fn check_small_gain(gm: &GainMatrix) -> Result<()> {
    if gm.entries().all(|(_, _, f)| f.less_than_identity()) {
        return Ok(());
    }
    if let Some(weights) = gm.linear_log_weights() {
        if max_cycle_mean(&weights) < 0.0 {
            return Ok(());
        }
    }
    let mut verdict: Result<()> = Ok(());
    let mut seen = 0usize;
    let flow = simple_cycles(&gm.adjacency(), |cycle| {
        seen += 1;
        let composed = gm.cycle_gain(cycle).expect("cycle edges are matrix entries");
        match composed.compare_identity(None) {
            IdentityComparison::Below => {}
            IdentityComparison::NotBelow => {
                verdict = Err(Error::SmallGainViolated { cycle: cycle.to_vec(), composed: composed.to_string() });
                return ControlFlow::Break(());
            }
            IdentityComparison::Unknown => {
                verdict = Err(Error::SmallGainUndecided {
                    cycle: cycle.to_vec(),
                    reason: format!("composed gain {composed} overflowed"),
                });
                return ControlFlow::Break(());
            }
        }
        if seen >= CYCLE_LIMIT {
            verdict = Err(Error::SmallGainUndecided {
                cycle: cycle.to_vec(),
                reason: format!("more than {CYCLE_LIMIT} cycles"),
            });
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    if flow.is_continue() && verdict.is_ok() {
        return Ok(());
    }
    verdict
}

/// Karp's maximum cycle mean for the graph with edge weights `w(i -> j)`.
/// Returns `-inf` for acyclic graphs.
pub(crate) fn max_cycle_mean(weights: &[Vec<(usize, f64)>]) -> f64 {
    let n = weights.len();
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    // levels[k][v]: heaviest walk with exactly k edges ending at v, starting anywhere.
    let mut levels = vec![vec![0.0f64; n]];
    for k in 1..=n {
        let prev = &levels[k - 1];
        let mut cur = vec![f64::NEG_INFINITY; n];
        for (u, row) in weights.iter().enumerate() {
            if prev[u] == f64::NEG_INFINITY {
                continue;
            }
            for &(v, w) in row {
                let cand = prev[u] + w;
                if cand > cur[v] {
                    cur[v] = cand;
                }
            }
        }
        levels.push(cur);
    }
    let mut best = f64::NEG_INFINITY;
    for (v, &dn) in levels[n].iter().enumerate() {
        if dn == f64::NEG_INFINITY {
            continue;
        }
        let worst = (0..n)
            .filter(|&k| levels[k][v] > f64::NEG_INFINITY)
            .map(|k| (dn - levels[k][v]) / (n - k) as f64)
            .fold(f64::INFINITY, f64::min);
        best = best.max(worst);
    }
    best
}

/// Finds `φ_i ∈ K∞` with `φ_i⁻¹ ∘ γ_ij ∘ φ_j < I_d` for every entry.
///
/// Identities are returned when every entry is already below the identity.
/// Otherwise the matrix must be linear; the scaling `φ_i = d_i r` comes from
/// longest paths in the log-domain gain graph, shifted by half the maximum
/// cycle mean.
pub fn find_phi(gm: &GainMatrix) -> Result<Vec<KFn>> {
    if gm.entries().all(|(_, _, f)| f.less_than_identity()) {
        return Ok(vec![KFn::Identity; gm.n()]);
    }
    let weights = gm
        .linear_log_weights()
        .ok_or_else(|| Error::UnsupportedGainClass("diagonal scaling is implemented for linear gains only".into()))?;
    let lambda = max_cycle_mean(&weights);
    if lambda >= 0.0 {
        return Err(Error::NoScaling(format!(
            "a cycle has mean log-gain {lambda:.3e} >= 0, so the small-gain condition fails"
        )));
    }
    let shift = if lambda.is_finite() { -0.5 * lambda } else { 1.0 };
    let n = gm.n();
    let mut x = vec![0.0f64; n];
    for _ in 0..=n {
        let mut changed = false;
        for (i, row) in weights.iter().enumerate() {
            for &(j, w) in row {
                if i == j {
                    continue;
                }
                let cand = w + shift + x[j];
                if cand > x[i] {
                    x[i] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let phis: Vec<KFn> = x.iter().map(|&xi| KFn::linear(xi.exp())).collect::<Result<_>>()?;
    for (i, j, f) in gm.entries() {
        let scaled = phis[i].inverse()?.compose(f).compose(&phis[j]);
        if !scaled.less_than_identity() {
            return Err(Error::NoScaling(format!("entry ({i},{j}) scales to {scaled}")));
        }
    }
    Ok(phis)
}

/// Turns `B(f) <= κ̂(B) + γ̂(‖w‖)` into `B(f) <= max{κ(B), γ_w(‖w‖)}` with
/// `κ = I_d - (I_d - ψ)∘(I_d - κ̂)` and `γ_w = (I_d - κ̂)⁻¹∘ψ⁻¹∘γ̂`.
///
/// `κ̂` and `ψ` must be linear with coefficients in `(0, 1)`.
pub fn max_form_conversion(kappa_hat: &KFn, gamma_hat: &KFn, psi: &KFn) -> Result<(KFn, KFn)> {
    let k = kappa_hat.linear_coefficient().ok_or_else(|| {
        Error::KappaNotBelowIdentity(format!("κ̂ = {kappa_hat} is not linear; use a linear κ̂ c r with c < 1"))
    })?;
    if !(k < 1.0) {
        return Err(Error::KappaNotBelowIdentity(format!("κ̂ = {kappa_hat} is not below the identity")));
    }
    let p = psi
        .linear_coefficient()
        .filter(|p| *p < 1.0)
        .ok_or_else(|| Error::InvalidFunction(format!("ψ = {psi} must be linear and below the identity")))?;
    gamma_hat.validate()?;
    let kappa = KFn::linear(1.0 - (1.0 - p) * (1.0 - k))?;
    let gamma_w = KFn::Linear(1.0 / ((1.0 - k) * p)).compose(gamma_hat);
    Ok((kappa, gamma_w))
}
