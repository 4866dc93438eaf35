//! Multivariate polynomials in monomial form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(rename = "c")]
    pub coeff: f64,
    #[serde(rename = "e")]
    pub exps: Vec<u32>,
}

/// `Σ_k c_k x^{e_k}`. JSON: `{"dim": n, "terms": [{"c": .., "e": [..]}]}`,
/// or `{"coeffs": [c0, c1, ..]}` for a univariate polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRepr", into = "PolyRepr")]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Term>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PolyRepr {
    Terms { dim: usize, terms: Vec<Term> },
    Univariate { coeffs: Vec<f64> },
}

impl TryFrom<PolyRepr> for Polynomial {
    type Error = Error;
    fn try_from(r: PolyRepr) -> Result<Self> {
        match r {
            PolyRepr::Terms { dim, terms } => Polynomial::new(dim, terms),
            PolyRepr::Univariate { coeffs } => Polynomial::univariate(&coeffs),
        }
    }
}

impl From<Polynomial> for PolyRepr {
    fn from(p: Polynomial) -> Self {
        PolyRepr::Terms { dim: p.dim, terms: p.terms }
    }
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.exps.len() != dim {
                return Err(Error::InvalidPolynomial(format!(
                    "term with {} exponents in a {dim}-variable polynomial",
                    t.exps.len()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidPolynomial(format!("non-finite coefficient {}", t.coeff)));
            }
        }
        Ok(Polynomial { dim, terms })
    }

    /// `c0 + c1 x + c2 x^2 + ..`.
    pub fn univariate(coeffs: &[f64]) -> Result<Self> {
        Polynomial::new(1, coeffs.iter().enumerate().map(|(k, &c)| Term { coeff: c, exps: vec![k as u32] }).collect())
    }

    /// `Σ_k coeffs[k] x^{basis[k]}`.
    pub fn from_basis(dim: usize, basis: &[Vec<u32>], coeffs: &[f64]) -> Result<Self> {
        if basis.len() != coeffs.len() {
            return Err(Error::InvalidPolynomial("basis and coefficient lengths differ".into()));
        }
        Polynomial::new(dim, basis.iter().zip(coeffs).map(|(e, &c)| Term { coeff: c, exps: e.clone() }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.exps.iter().sum::<u32>()).max().unwrap_or(0)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.coeff * monomial(x, &t.exps)).sum()
    }
}

#[inline]
pub fn monomial(x: &[f64], exps: &[u32]) -> f64 {
    x.iter().zip(exps).map(|(v, &e)| v.powi(e as i32)).product()
}

/// Every exponent vector in `dim` variables of total degree at most
/// `degree`, in graded lexicographic order starting with the constant.
pub fn monomial_basis(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0u32; dim];
        fill(&mut out, &mut current, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, left: u32) {
    if pos + 1 >= current.len() {
        if let Some(last) = current.last_mut() {
            *last = left;
            out.push(current.clone());
        } else if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=left).rev() {
        current[pos] = k;
        fill(out, current, pos + 1, left - k);
    }
    current[pos] = 0;
}

impl std::fmt::Display for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                let vars: Vec<String> = t
                    .exps
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| if e == 1 { format!("x{i}") } else { format!("x{i}^{e}") })
                    .collect();
                if vars.is_empty() {
                    format!("{}", t.coeff)
                } else {
                    format!("{}*{}", t.coeff, vars.join("*"))
                }
            })
            .collect();
        write!(f, "{}", if parts.is_empty() { "0".into() } else { parts.join(" + ") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_barrier_minimum() {
        let b = Polynomial::univariate(&[73.79, -3.18, 0.07456]).unwrap();
        let xmin = 3.18 / (2.0 * 0.07456);
        assert!((b.eval(&[xmin]) - 39.8827).abs() < 1e-3);
        assert_eq!(b.degree(), 2);
    }

    #[test]
    fn multivariate_eval() {
        let p = Polynomial::new(2, vec![Term { coeff: 2.0, exps: vec![1, 1] }, Term { coeff: -1.0, exps: vec![0, 2] }])
            .unwrap();
        assert_eq!(p.eval(&[3.0, 2.0]), 12.0 - 4.0);
    }

    #[test]
    fn rejects_bad_terms() {
        assert!(Polynomial::new(2, vec![Term { coeff: 1.0, exps: vec![1] }]).is_err());
        assert!(Polynomial::univariate(&[f64::NAN]).is_err());
    }

    #[test]
    fn basis_counts() {
        assert_eq!(monomial_basis(1, 2), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(monomial_basis(2, 2).len(), 6);
        assert_eq!(monomial_basis(3, 3).len(), 20);
    }

    #[test]
    fn json_forms() {
        let p: Polynomial = serde_json::from_str(r#"{"coeffs":[1,2,3]}"#).unwrap();
        assert_eq!(p.eval(&[2.0]), 17.0);
        let back: Polynomial = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
