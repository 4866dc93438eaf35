//! Labeling functions `L : X -> Π` given by prioritized regions.

use serde::{Deserialize, Serialize};

use crate::automata::{EdgeLabel, Prop, TOP};
use crate::error::{Error, Result};
use crate::geometry::Region;

/// Maps a state to the first proposition whose region contains it, or to
/// the `otherwise` proposition when no region does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelingFunction {
    domain: Region,
    entries: Vec<(Prop, Region)>,
    otherwise: Option<Prop>,
}

impl LabelingFunction {
    pub fn new(domain: Region, entries: Vec<(Prop, Region)>, otherwise: Option<Prop>) -> Result<Self> {
        let dim = domain.dim().ok_or_else(|| Error::InvalidRegion("labeling domain is empty".into()))?;
        let mut seen = std::collections::BTreeSet::new();
        for (p, r) in &entries {
            if p == TOP {
                return Err(Error::Config(format!("`{TOP}` cannot label a region")));
            }
            if !seen.insert(p.clone()) {
                return Err(Error::Config(format!("proposition `{p}` labels two regions")));
            }
            if r.dim().is_some_and(|d| d != dim) {
                return Err(Error::InvalidRegion(format!("region of `{p}` has the wrong dimension")));
            }
        }
        if let Some(o) = &otherwise {
            if seen.contains(o) || o == TOP {
                return Err(Error::Config(format!("fallback proposition `{o}` is already used")));
            }
        }
        Ok(LabelingFunction { domain, entries, otherwise })
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    pub fn props(&self) -> Vec<&Prop> {
        self.entries.iter().map(|(p, _)| p).chain(self.otherwise.iter()).collect()
    }

    /// `L(x)`.
    pub fn label(&self, x: &[f64]) -> Result<&Prop> {
        self.entries
            .iter()
            .find(|(_, r)| r.contains(x))
            .map(|(p, _)| p)
            .or(self.otherwise.as_ref())
            .ok_or_else(|| Error::Unlabeled(x.to_vec()))
    }

    /// A union of boxes covering `L⁻¹(p)`. For listed propositions this is
    /// the declared region; for the fallback it is the domain minus every
    /// declared region, with boundaries kept.
    pub fn region_of(&self, p: &str) -> Result<Region> {
        if p == TOP {
            return Ok(self.domain.clone());
        }
        if let Some((_, r)) = self.entries.iter().find(|(q, _)| q == p) {
            return Ok(r.clone());
        }
        if self.otherwise.as_deref() == Some(p) {
            let mut rest: Vec<crate::geometry::Hyperbox> = self.domain.boxes().to_vec();
            for (_, r) in &self.entries {
                for cut in r.boxes() {
                    rest = rest.iter().flat_map(|b| b.subtract(cut)).collect();
                }
            }
            return Region::new(rest);
        }
        Err(Error::UnknownProposition(p.to_string()))
    }

    /// Covering region of a set-valued label.
    pub fn region_of_label(&self, label: &EdgeLabel) -> Result<Region> {
        if label.is_top() {
            return Ok(self.domain.clone());
        }
        let mut out = Region::empty();
        for p in label.props() {
            out = out.union(&self.region_of(p)?)?;
        }
        Ok(out)
    }

    /// Whether some state carries label `p`.
    pub fn preimage_nonempty(&self, p: &str) -> Result<bool> {
        if p == TOP {
            return Ok(!self.domain.is_empty());
        }
        if let Some(k) = self.entries.iter().position(|(q, _)| q == p) {
            let earlier: Vec<&Region> = self.entries[..k].iter().map(|(_, r)| r).collect();
            return Ok(self.entries[k].1.has_points_outside(&earlier));
        }
        if self.otherwise.as_deref() == Some(p) {
            let all: Vec<&Region> = self.entries.iter().map(|(_, r)| r).collect();
            return Ok(self.domain.has_points_outside(&all));
        }
        Err(Error::UnknownProposition(p.to_string()))
    }

    /// Whether `L⁻¹(a) ∩ L⁻¹(b)` is non-empty. Since `L` is a function this
    /// amounts to a shared proposition with a non-empty preimage.
    pub fn labels_intersect(&self, a: &EdgeLabel, b: &EdgeLabel) -> Result<bool> {
        let expand = |l: &EdgeLabel| -> Result<Vec<Prop>> {
            if l.is_top() {
                return Ok(self.props().into_iter().cloned().collect());
            }
            for p in l.props() {
                if !self.props().contains(&p) {
                    return Err(Error::UnknownProposition(p.clone()));
                }
            }
            Ok(l.props().cloned().collect())
        };
        let pa = expand(a)?;
        let pb = expand(b)?;
        for p in pa.iter().filter(|p| pb.contains(p)) {
            if self.preimage_nonempty(p)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Hyperbox;

    fn label(props: &[&str]) -> EdgeLabel {
        EdgeLabel(props.iter().map(|s| s.to_string()).collect())
    }

    fn rooms(n: usize) -> LabelingFunction {
        LabelingFunction::new(
            Region::cube(0.0, 45.0, n).unwrap(),
            vec![
                ("p0".into(), Region::cube(20.5, 22.5, n).unwrap()),
                ("p1".into(), Region::cube(0.0, 20.0, n).unwrap()),
                ("p2".into(), Region::cube(23.0, 45.0, n).unwrap()),
            ],
            Some("p3".into()),
        )
        .unwrap()
    }

    #[test]
    fn priority_and_fallback() {
        let l = rooms(2);
        assert_eq!(l.label(&[21.0, 22.0]).unwrap(), "p0");
        assert_eq!(l.label(&[10.0, 5.0]).unwrap(), "p1");
        assert_eq!(l.label(&[10.0, 30.0]).unwrap(), "p3");
    }

    #[test]
    fn missing_fallback_is_an_error() {
        let l = LabelingFunction::new(
            Region::interval(0.0, 1.0).unwrap(),
            vec![("a".into(), Region::interval(0.0, 0.5).unwrap())],
            None,
        )
        .unwrap();
        assert!(matches!(l.label(&[0.7]), Err(Error::Unlabeled(_))));
    }

    #[test]
    fn label_intersections() {
        let l = rooms(3);
        assert!(!l.labels_intersect(&label(&["p0"]), &label(&["p1", "p2"])).unwrap());
        assert!(l.labels_intersect(&label(&["p1"]), &EdgeLabel::top()).unwrap());
        assert!(l.preimage_nonempty("p3").unwrap());
        assert!(l.labels_intersect(&label(&["p3"]), &label(&["p3"])).unwrap());
        assert!(matches!(l.labels_intersect(&label(&["zz"]), &label(&["p1"])), Err(Error::UnknownProposition(_))));
    }

    #[test]
    fn shadowed_region_has_empty_preimage() {
        let l = LabelingFunction::new(
            Region::interval(0.0, 2.0).unwrap(),
            vec![("a".into(), Region::interval(0.0, 2.0).unwrap()), ("b".into(), Region::interval(0.5, 1.0).unwrap())],
            Some("c".into()),
        )
        .unwrap();
        assert!(!l.preimage_nonempty("b").unwrap());
        assert!(!l.preimage_nonempty("c").unwrap());
        assert!(!l.labels_intersect(&label(&["b"]), &EdgeLabel::top()).unwrap());
    }

    #[test]
    fn fallback_region_covers_gaps() {
        let l = rooms(1);
        let r = l.region_of("p3").unwrap();
        assert!(r.contains(&[20.2]));
        assert!(r.contains(&[22.8]));
        assert!(!r.contains(&[10.0]));
        let b = Hyperbox::interval(20.0, 20.5).unwrap();
        assert!(r.boxes().contains(&b));
    }
}
