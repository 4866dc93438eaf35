//! Axis-aligned boxes, finite unions of boxes, and nested sampling grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Infinity norm, the norm used throughout for internal inputs and outputs.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// A closed axis-aligned box `[lo_1, hi_1] x .. x [lo_n, hi_n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct Hyperbox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BoxRepr {
    Cube { cube: CubeRepr },
    Full { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
struct CubeRepr {
    lo: f64,
    hi: f64,
    dim: usize,
}

impl TryFrom<BoxRepr> for Hyperbox {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        match r {
            BoxRepr::Cube { cube } => Hyperbox::cube(cube.lo, cube.hi, cube.dim),
            BoxRepr::Full { lo, hi } => Hyperbox::new(lo, hi),
        }
    }
}

impl From<Hyperbox> for BoxRepr {
    fn from(b: Hyperbox) -> Self {
        let uniform = b.lo.len() > 1 && b.lo.iter().all(|&v| v == b.lo[0]) && b.hi.iter().all(|&v| v == b.hi[0]);
        if uniform {
            BoxRepr::Cube { cube: CubeRepr { lo: b.lo[0], hi: b.hi[0], dim: b.lo.len() } }
        } else {
            BoxRepr::Full { lo: b.lo, hi: b.hi }
        }
    }
}

impl Hyperbox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidRegion(format!("bound lengths differ ({} vs {})", lo.len(), hi.len())));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidRegion(format!("unbounded axis {i}")));
            }
            if l > h {
                return Err(Error::InvalidRegion(format!("axis {i}: lower bound {l} above upper bound {h}")));
            }
        }
        Ok(Hyperbox { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Hyperbox::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Hyperbox::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn intersects(&self, other: &Hyperbox) -> bool {
        self.dim() == other.dim() && (0..self.dim()).all(|i| self.lo[i] <= other.hi[i] && other.lo[i] <= self.hi[i])
    }

    pub fn contains_box(&self, other: &Hyperbox) -> bool {
        self.dim() == other.dim() && (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Pieces of `self` not covered by `other`. Pieces are closed boxes whose
    /// interiors avoid `other`; zero-width slivers are dropped, so an empty
    /// result means `self` is contained in `other`.
    pub fn subtract(&self, other: &Hyperbox) -> Vec<Hyperbox> {
        if !self.intersects(other) {
            return vec![self.clone()];
        }
        let mut rest = self.clone();
        let mut pieces = Vec::new();
        for i in 0..self.dim() {
            if rest.lo[i] < other.lo[i] {
                let mut piece = rest.clone();
                piece.hi[i] = other.lo[i];
                pieces.push(piece);
                rest.lo[i] = other.lo[i];
            }
            if rest.hi[i] > other.hi[i] {
                let mut piece = rest.clone();
                piece.lo[i] = other.hi[i];
                pieces.push(piece);
                rest.hi[i] = other.hi[i];
            }
        }
        pieces
    }

    /// Sample points on a grid of spacing `step`, pulled `offset` inside the
    /// box. Per axis the points are `lo + offset + k * step` plus the far end
    /// `hi - offset`, so halving `step` keeps every earlier point.
    pub fn grid_axes(&self, step: f64, offset: f64) -> Result<Vec<Vec<f64>>> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidRegion(format!("grid step must be positive, got {step}")));
        }
        Ok((0..self.dim()).map(|i| axis_points(self.lo[i] + offset, self.hi[i] - offset, step)).collect())
    }
}

fn axis_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi < lo {
        return vec![0.5 * (lo + hi)];
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=count).map(|k| lo + k as f64 * step).filter(|&v| v <= hi).collect();
    match pts.last() {
        Some(&last) if (hi - last) <= 1e-12 * (1.0 + hi.abs()) => {
            *pts.last_mut().unwrap() = hi;
        }
        _ => pts.push(hi),
    }
    pts
}

fn survives(b: &Hyperbox, cuts: &[&Hyperbox]) -> bool {
    let Some((cut, rest)) = cuts.split_first() else { return true };
    if !b.intersects(cut) {
        return survives(b, rest);
    }
    b.subtract(cut).iter().any(|piece| survives(piece, rest))
}

/// Cartesian product of per-axis point lists, in lexicographic order.
pub fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Number of points of a Cartesian product, saturating.
pub fn product_size(axes: &[Vec<f64>]) -> u128 {
    axes.iter().fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128))
}

/// A finite union of closed boxes of a common dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Hyperbox>", into = "Vec<Hyperbox>")]
pub struct Region {
    boxes: Vec<Hyperbox>,
}

impl TryFrom<Vec<Hyperbox>> for Region {
    type Error = Error;
    fn try_from(boxes: Vec<Hyperbox>) -> Result<Self> {
        Region::new(boxes)
    }
}

impl From<Region> for Vec<Hyperbox> {
    fn from(r: Region) -> Self {
        r.boxes
    }
}

impl From<Hyperbox> for Region {
    fn from(b: Hyperbox) -> Self {
        Region { boxes: vec![b] }
    }
}

impl Region {
    pub fn new(boxes: Vec<Hyperbox>) -> Result<Self> {
        if let Some(first) = boxes.first() {
            if boxes.iter().any(|b| b.dim() != first.dim()) {
                return Err(Error::InvalidRegion("boxes of a region must share one dimension".into()));
            }
        }
        Ok(Region { boxes })
    }

    pub fn empty() -> Self {
        Region { boxes: Vec::new() }
    }

    /// `[lo, hi]` as a one-dimensional region.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Ok(Hyperbox::interval(lo, hi)?.into())
    }

    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Ok(Hyperbox::cube(lo, hi, dim)?.into())
    }

    pub fn boxes(&self) -> &[Hyperbox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.boxes.first().map(Hyperbox::dim)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.boxes.iter().any(|a| other.boxes.iter().any(|b| a.intersects(b)))
    }

    pub fn union(&self, other: &Region) -> Result<Region> {
        let mut boxes = self.boxes.clone();
        boxes.extend(other.boxes.iter().cloned());
        Region::new(boxes)
    }

    /// True when some point of `self` lies outside every region in `removed`.
    /// Pieces are explored depth first, so a surviving piece is found
    /// without materializing the whole difference.
    pub fn has_points_outside(&self, removed: &[&Region]) -> bool {
        let cuts: Vec<&Hyperbox> = removed.iter().flat_map(|r| r.boxes.iter()).collect();
        self.boxes.iter().any(|b| survives(b, &cuts))
    }

    /// Projection onto the axes `start..start + len`, duplicates removed.
    pub fn project(&self, start: usize, len: usize) -> Result<Region> {
        let mut boxes: Vec<Hyperbox> = Vec::new();
        for b in &self.boxes {
            if start + len > b.dim() {
                return Err(Error::InvalidRegion(format!(
                    "cannot project a {}-dimensional box onto axes {start}..{}",
                    b.dim(),
                    start + len
                )));
            }
            let p = Hyperbox { lo: b.lo[start..start + len].to_vec(), hi: b.hi[start..start + len].to_vec() };
            if !boxes.contains(&p) {
                boxes.push(p);
            }
        }
        Region::new(boxes)
    }

    pub fn bounding_box(&self) -> Option<Hyperbox> {
        let first = self.boxes.first()?;
        let mut lo = first.lo.clone();
        let mut hi = first.hi.clone();
        for b in &self.boxes[1..] {
            for i in 0..lo.len() {
                lo[i] = lo[i].min(b.lo[i]);
                hi[i] = hi[i].max(b.hi[i]);
            }
        }
        Some(Hyperbox { lo, hi })
    }

    /// Volume-weighted mean of the box centers; a single box gives its center.
    pub fn centroid(&self) -> Option<Vec<f64>> {
        let first = self.boxes.first()?;
        if self.boxes.len() == 1 {
            return Some(first.center());
        }
        let total: f64 = self.boxes.iter().map(Hyperbox::volume).sum();
        if total <= 0.0 {
            return Some(first.center());
        }
        let mut c = vec![0.0; first.dim()];
        for b in &self.boxes {
            let w = b.volume() / total;
            for (ci, bi) in c.iter_mut().zip(b.center()) {
                *ci += w * bi;
            }
        }
        Some(c)
    }

    /// Grid points of every box (see [`Hyperbox::grid_axes`]), refusing to
    /// materialize more than `limit` points.
    pub fn grid(&self, step: f64, offset: f64, limit: u128) -> Result<Vec<Vec<f64>>> {
        let mut all_axes = Vec::with_capacity(self.boxes.len());
        let mut total: u128 = 0;
        for b in &self.boxes {
            let axes = b.grid_axes(step, offset)?;
            total = total.saturating_add(product_size(&axes));
            all_axes.push(axes);
        }
        if total > limit {
            return Err(Error::GridTooLarge { points: total, limit });
        }
        Ok(all_axes.iter().flat_map(|axes| cartesian(axes)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disjoint_room_regions() {
        let a = Region::interval(20.5, 22.5).unwrap();
        let b =
            Region::new(vec![Hyperbox::interval(0.0, 20.0).unwrap(), Hyperbox::interval(23.0, 45.0).unwrap()]).unwrap();
        assert!(!a.intersects(&b));
        assert!(Region::interval(20.0, 21.0).unwrap().intersects(&b));
    }

    #[test]
    fn touching_boxes_intersect() {
        let a = Hyperbox::interval(0.0, 1.0).unwrap();
        let b = Hyperbox::interval(1.0, 2.0).unwrap();
        assert!(a.intersects(&b));
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(Hyperbox::interval(1.0, 0.0).is_err());
        assert!(Hyperbox::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn covered_region_has_nothing_outside() {
        let r = Region::interval(0.0, 1.0).unwrap();
        let left = Region::interval(0.0, 0.5).unwrap();
        let right = Region::interval(0.5, 1.0).unwrap();
        assert!(!r.has_points_outside(&[&left, &right]));
        assert!(r.has_points_outside(&[&left]));
    }

    #[test]
    fn grid_includes_both_ends_and_offset() {
        let b = Hyperbox::interval(0.0, 1.0).unwrap();
        let pts = &b.grid_axes(0.3, 0.0).unwrap()[0];
        assert_eq!(pts.first(), Some(&0.0));
        assert_eq!(pts.last(), Some(&1.0));
        let inner = &b.grid_axes(0.25, 0.1).unwrap()[0];
        assert_eq!(inner.first(), Some(&0.1));
        assert_eq!(inner.last(), Some(&0.9));
    }

    #[test]
    fn grid_limit_is_enforced() {
        let r = Region::cube(0.0, 1.0, 10).unwrap();
        assert!(matches!(r.grid(0.1, 0.0, 1000), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn serde_cube_shorthand_round_trips() {
        let r = Region::cube(0.0, 2.0, 3).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("cube"));
        let back: Region = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let full: Region = serde_json::from_str(r#"[{"lo":[0,1],"hi":[2,3]}]"#).unwrap();
        assert_eq!(full.dim(), Some(2));
    }

    proptest! {
        #[test]
        fn halving_step_keeps_points(lo in -10.0f64..10.0, width in 0.0f64..5.0, k in 1u32..20) {
            let b = Hyperbox::interval(lo, lo + width).unwrap();
            let step = width.max(1e-3) / k as f64;
            let coarse = &b.grid_axes(step, 0.0).unwrap()[0];
            let fine = &b.grid_axes(step / 2.0, 0.0).unwrap()[0];
            for p in coarse {
                prop_assert!(fine.iter().any(|q| (p - q).abs() <= 1e-9 * (1.0 + p.abs())));
            }
        }

        #[test]
        fn subtract_pieces_avoid_cut(
            a in proptest::collection::vec((-5.0f64..5.0, 0.1f64..3.0), 2),
            c in proptest::collection::vec((-5.0f64..5.0, 0.1f64..3.0), 2),
            probe in proptest::collection::vec(0.0f64..1.0, 2),
        ) {
            let bx = Hyperbox::new(a.iter().map(|p| p.0).collect(), a.iter().map(|p| p.0 + p.1).collect()).unwrap();
            let cut = Hyperbox::new(c.iter().map(|p| p.0).collect(), c.iter().map(|p| p.0 + p.1).collect()).unwrap();
            let x: Vec<f64> = (0..2).map(|i| bx.lo()[i] + probe[i] * (bx.hi()[i] - bx.lo()[i])).collect();
            let pieces = bx.subtract(&cut);
            if !cut.contains(&x) {
                prop_assert!(pieces.iter().any(|p| p.contains(&x)));
            }
            for p in &pieces {
                prop_assert!(bx.contains_box(p));
            }
        }
    }
}
