//! Class-K∞ comparison functions in closed form.
//!
//! Every function of the class normalizes to `r -> c * r^e` with `c, e > 0`,
//! which keeps composition, inversion and comparison against the identity
//! exact.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A class-K∞ function. JSON forms: `"identity"`, `{"linear": c}`,
/// `{"power": [c, e]}`, `{"chain": [f1, .., fk]}`.
///
/// `Chain([f1, .., fk])` is `f1 ∘ f2 ∘ .. ∘ fk`: the last entry is applied first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KFn {
    Identity,
    Linear(f64),
    Power(f64, f64),
    Chain(Vec<KFn>),
}

/// Outcome of comparing a function against the identity on `(0, R]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityComparison {
    /// `f(s) < s` for every `s` in the domain.
    Below,
    /// Some `s` in the domain has `f(s) >= s`.
    NotBelow,
    /// The closed form overflowed, so neither answer is proven.
    Unknown,
}

const EXPONENT_SNAP: f64 = 1e-12;

impl KFn {
    pub fn linear(c: f64) -> Result<KFn> {
        let f = KFn::Linear(c);
        f.validate()?;
        Ok(f)
    }

    pub fn power(c: f64, e: f64) -> Result<KFn> {
        let f = KFn::Power(c, e);
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KFn::Identity => Ok(()),
            KFn::Linear(c) => positive("linear coefficient", *c),
            KFn::Power(c, e) => {
                positive("power coefficient", *c)?;
                positive("power exponent", *e)
            }
            KFn::Chain(fs) => {
                if fs.is_empty() {
                    return Err(Error::InvalidFunction("empty chain".into()));
                }
                fs.iter().try_for_each(KFn::validate)
            }
        }
    }

    /// `(c, e)` with `f(r) = c * r^e`.
    pub fn canonical(&self) -> (f64, f64) {
        match self {
            KFn::Identity => (1.0, 1.0),
            KFn::Linear(c) => (*c, 1.0),
            KFn::Power(c, e) => (*c, *e),
            KFn::Chain(fs) => fs.iter().rev().fold((1.0, 1.0), |(c2, e2), f| {
                let (c1, e1) = f.canonical();
                (c1 * c2.powf(e1), e1 * e2)
            }),
        }
    }

    fn from_canonical(c: f64, e: f64) -> KFn {
        let e = if (e - 1.0).abs() <= EXPONENT_SNAP { 1.0 } else { e };
        match (c, e) {
            (1.0, 1.0) => KFn::Identity,
            (c, 1.0) => KFn::Linear(c),
            (c, e) => KFn::Power(c, e),
        }
    }

    /// The equivalent `Identity`, `Linear` or `Power` form.
    pub fn simplify(&self) -> KFn {
        let (c, e) = self.canonical();
        KFn::from_canonical(c, e)
    }

    pub fn linear_coefficient(&self) -> Option<f64> {
        let (c, e) = self.canonical();
        ((e - 1.0).abs() <= EXPONENT_SNAP).then_some(c)
    }

    /// `f(r)` for `r >= 0`; negative or NaN arguments are rejected.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::NegativeArgument(r));
        }
        Ok(self.apply(r))
    }

    /// `f(r)` without argument checks; callers guarantee `r >= 0`.
    #[inline]
    pub fn apply(&self, r: f64) -> f64 {
        match self {
            KFn::Identity => r,
            KFn::Linear(c) => c * r,
            KFn::Power(c, e) => c * r.powf(*e),
            KFn::Chain(fs) => fs.iter().rev().fold(r, |acc, f| f.apply(acc)),
        }
    }

    /// `self ∘ g`, simplified.
    pub fn compose(&self, g: &KFn) -> KFn {
        let (c1, e1) = self.canonical();
        let (c2, e2) = g.canonical();
        KFn::from_canonical(c1 * c2.powf(e1), e1 * e2)
    }

    /// `f⁻¹`: `c r^e` inverts to `c^(-1/e) r^(1/e)`.
    pub fn inverse(&self) -> Result<KFn> {
        let (c, e) = self.canonical();
        let inv = KFn::from_canonical(c.powf(-1.0 / e), 1.0 / e);
        let (ci, ei) = inv.canonical();
        if !ci.is_finite() || !ei.is_finite() || ci <= 0.0 {
            return Err(Error::NotInvertible(self.to_string()));
        }
        Ok(inv)
    }

    /// Compares `f` with the identity on `(0, ∞)` or on `(0, bound]`.
    pub fn compare_identity(&self, bound: Option<f64>) -> IdentityComparison {
        let (c, e) = self.canonical();
        if !c.is_finite() || !e.is_finite() || c <= 0.0 || e <= 0.0 {
            return IdentityComparison::Unknown;
        }
        let below = if (e - 1.0).abs() <= EXPONENT_SNAP {
            c < 1.0
        } else {
            match bound {
                // c s^(e-1) is increasing for e > 1, so its sup on (0, R] is at R.
                Some(r) if e > 1.0 && r.is_finite() && r > 0.0 => {
                    let peak = c * r.powf(e - 1.0);
                    if !peak.is_finite() {
                        return IdentityComparison::Unknown;
                    }
                    peak < 1.0
                }
                _ => false,
            }
        };
        if below {
            IdentityComparison::Below
        } else {
            IdentityComparison::NotBelow
        }
    }

    /// True only when `f < I_d` on all of `(0, ∞)` is proven.
    pub fn less_than_identity(&self) -> bool {
        self.compare_identity(None) == IdentityComparison::Below
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidFunction(format!("{what} must be positive and finite, got {v}")))
    }
}

impl fmt::Display for KFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KFn::Identity => write!(f, "r"),
            KFn::Linear(c) => write!(f, "{c}·r"),
            KFn::Power(c, e) => write!(f, "{c}·r^{e}"),
            KFn::Chain(fs) => {
                let parts: Vec<String> = fs.iter().map(|g| format!("({g})")).collect();
                write!(f, "{}", parts.join("∘"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compose_linear() {
        let f = KFn::Linear(0.5).compose(&KFn::Linear(0.8));
        assert_eq!(f, KFn::Linear(0.4));
    }

    #[test]
    fn compose_power_collapses_to_linear() {
        let alpha_inv = KFn::Power(0.5, 2.0).inverse().unwrap();
        let g = KFn::Power(0.4368, 2.0).compose(&alpha_inv);
        let c = g.linear_coefficient().unwrap();
        assert!((c - 0.8736).abs() < 1e-12, "{c}");
    }

    #[test]
    fn inverse_of_power() {
        let inv = KFn::Power(0.5, 2.0).inverse().unwrap();
        let (c, e) = inv.canonical();
        assert!((c - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(e, 0.5);
    }

    #[test]
    fn identity_comparisons() {
        assert!(KFn::Linear(0.9).less_than_identity());
        assert!(!KFn::Identity.less_than_identity());
        assert!(!KFn::Linear(1.0).less_than_identity());
        assert!(!KFn::Power(0.5, 2.0).less_than_identity());
        assert_eq!(KFn::Power(0.5, 2.0).compare_identity(Some(1.5)), IdentityComparison::Below);
        assert_eq!(KFn::Power(0.5, 2.0).compare_identity(Some(2.0)), IdentityComparison::NotBelow);
        assert_eq!(KFn::Power(0.5, 0.5).compare_identity(Some(1e-6)), IdentityComparison::NotBelow);
        assert_eq!(KFn::Power(1e300, 3.0).compare_identity(Some(1e200)), IdentityComparison::Unknown);
    }

    #[test]
    fn eval_rejects_negative_argument() {
        assert!(matches!(KFn::Linear(2.0).eval(-1.0), Err(Error::NegativeArgument(_))));
        assert_eq!(KFn::Linear(2.0).eval(3.0).unwrap(), 6.0);
    }

    #[test]
    fn validation() {
        assert!(KFn::linear(0.0).is_err());
        assert!(KFn::power(1.0, -2.0).is_err());
        assert!(KFn::Chain(vec![]).validate().is_err());
        assert!(KFn::linear(f64::NAN).is_err());
    }

    #[test]
    fn chain_applies_last_entry_first() {
        let f = KFn::Chain(vec![KFn::Linear(2.0), KFn::Power(1.0, 2.0)]);
        assert_eq!(f.apply(3.0), 18.0);
        assert_eq!(f.simplify(), KFn::Power(2.0, 2.0));
    }

    #[test]
    fn json_forms() {
        let f: KFn = serde_json::from_str(r#"{"chain":["identity",{"linear":0.5},{"power":[2.0,3.0]}]}"#).unwrap();
        assert_eq!(f, KFn::Chain(vec![KFn::Identity, KFn::Linear(0.5), KFn::Power(2.0, 3.0)]));
        assert_eq!(serde_json::to_string(&KFn::Linear(0.5)).unwrap(), r#"{"linear":0.5}"#);
        assert_eq!(serde_json::to_string(&KFn::Identity).unwrap(), r#""identity""#);
    }

    fn kfn() -> impl Strategy<Value = KFn> {
        prop_oneof![
            Just(KFn::Identity),
            (0.01f64..10.0).prop_map(KFn::Linear),
            (0.01f64..10.0, 0.25f64..4.0).prop_map(|(c, e)| KFn::Power(c, e)),
        ]
    }

    proptest! {
        #[test]
        fn inverse_round_trips(f in kfn(), r in 0.01f64..100.0) {
            let back = f.inverse().unwrap().apply(f.apply(r));
            prop_assert!((back - r).abs() <= 1e-9 * r.max(1.0));
        }

        #[test]
        fn composition_matches_pointwise(f in kfn(), g in kfn(), r in 0.0f64..50.0) {
            let lhs = f.compose(&g).apply(r);
            let rhs = f.apply(g.apply(r));
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }

        #[test]
        fn below_identity_is_sound(f in kfn(), bound in 0.1f64..20.0, t in 0.001f64..1.0) {
            let s = bound * t;
            if f.compare_identity(Some(bound)) == IdentityComparison::Below {
                prop_assert!(f.apply(s) < s);
            }
            if f.less_than_identity() {
                prop_assert!(f.apply(s * 1e3) < s * 1e3);
            }
        }
    }
}
