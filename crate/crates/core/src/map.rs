//! Piecewise-affine self-maps of `[0,1]` with exact rational data.
//!
//! Piece `j` governs `[b_j, b_{j+1})`; the last piece is closed at 1. Adjacent
//! collinear pieces are always merged, so two maps are equal iff their
//! canonical data are equal.

use std::cmp::Ordering;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::interval::{Interval, IntervalSet};
use crate::rational::{self, format_rational, qi, Rational};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffinePiece {
    #[serde(with = "rational::serde_str")]
    pub slope: Rational,
    #[serde(with = "rational::serde_str")]
    pub intercept: Rational,
}

impl AffinePiece {
    pub fn new(slope: Rational, intercept: Rational) -> Self {
        AffinePiece { slope, intercept }
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        &self.slope * x + &self.intercept
    }

    /// `outer ∘ self`.
    fn then(&self, outer: &AffinePiece) -> AffinePiece {
        AffinePiece {
            slope: &outer.slope * &self.slope,
            intercept: &outer.slope * &self.intercept + &outer.intercept,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMap")]
pub struct PwAffineMap {
    #[serde(with = "rational::serde_vec")]
    breakpoints: Vec<Rational>,
    pieces: Vec<AffinePiece>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    #[serde(with = "rational::serde_vec")]
    breakpoints: Vec<Rational>,
    pieces: Vec<AffinePiece>,
}

impl TryFrom<RawMap> for PwAffineMap {
    type Error = Error;

    fn try_from(raw: RawMap) -> Result<Self, Error> {
        PwAffineMap::new(raw.breakpoints, raw.pieces)
    }
}

impl PwAffineMap {
    /// Validates and canonicalizes a map.
    pub fn new(breakpoints: Vec<Rational>, pieces: Vec<AffinePiece>) -> Result<Self, Error> {
        if breakpoints.len() < 2 || pieces.len() + 1 != breakpoints.len() {
            return Err(Error::Domain(format!(
                "{} breakpoints do not fit {} pieces",
                breakpoints.len(),
                pieces.len()
            )));
        }
        if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
            return Err(Error::Domain("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("breakpoints must be strictly increasing".into()));
        }
        let unit = Interval::unit();
        for (j, p) in pieces.iter().enumerate() {
            for x in [&breakpoints[j], &breakpoints[j + 1]] {
                let y = p.apply(x);
                if !unit.contains(&y) {
                    return Err(Error::Domain(format!(
                        "piece {j} leaves [0,1]: value {} at {}",
                        format_rational(&y),
                        format_rational(x)
                    )));
                }
            }
        }
        Ok(Self::merged(breakpoints, pieces))
    }

    fn merged(breakpoints: Vec<Rational>, pieces: Vec<AffinePiece>) -> Self {
        let mut bps = vec![breakpoints[0].clone()];
        let mut out: Vec<AffinePiece> = Vec::with_capacity(pieces.len());
        for (j, p) in pieces.into_iter().enumerate() {
            if out.last() == Some(&p) {
                *bps.last_mut().unwrap() = breakpoints[j + 1].clone();
            } else {
                out.push(p);
                bps.push(breakpoints[j + 1].clone());
            }
        }
        PwAffineMap { breakpoints: bps, pieces: out }
    }

    /// Continuous map interpolating the nodes `(x_0, y_0), …` with
    /// `x_0 = 0 < … < x_k = 1`.
    pub fn from_nodes(nodes: &[(Rational, Rational)]) -> Result<Self, Error> {
        if nodes.len() < 2 {
            return Err(Error::Domain("need at least two nodes".into()));
        }
        let mut bps = Vec::with_capacity(nodes.len());
        let mut pieces = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if x1 <= x0 {
                return Err(Error::Domain("node abscissae must increase".into()));
            }
            let slope = (y1 - y0) / (x1 - x0);
            let intercept = y0 - &slope * x0;
            bps.push(x0.clone());
            pieces.push(AffinePiece::new(slope, intercept));
        }
        bps.push(nodes[nodes.len() - 1].0.clone());
        Self::new(bps, pieces)
    }

    pub fn identity() -> Self {
        PwAffineMap {
            breakpoints: vec![qi(0), qi(1)],
            pieces: vec![AffinePiece::new(qi(1), qi(0))],
        }
    }

    /// `x ↦ d·x mod 1` for an integer `d ≥ 1` (value 1 at `x = 1`).
    pub fn times_mod_one(d: u32) -> Self {
        let d = d.max(1) as i64;
        let bps = (0..=d).map(|j| rational::q(j, d)).collect();
        let pieces = (0..d).map(|j| AffinePiece::new(qi(d), qi(-j))).collect();
        Self::merged(bps, pieces)
    }

    /// Rotation `x ↦ x + shift mod 1`, with `0 < shift < 1`; `1` is identified
    /// with `0`.
    pub fn rotation(shift: Rational) -> Result<Self, Error> {
        if !(shift.is_positive() && shift < qi(1)) {
            return Err(Error::Domain("rotation shift must lie in (0,1)".into()));
        }
        let cut = qi(1) - &shift;
        Self::new(
            vec![qi(0), cut, qi(1)],
            vec![AffinePiece::new(qi(1), shift.clone()), AffinePiece::new(qi(1), shift - qi(1))],
        )
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// Domain of piece `j` under the half-open convention.
    pub fn piece_domain(&self, j: usize) -> Interval {
        let last = j + 1 == self.pieces.len();
        Interval::raw(
            self.breakpoints[j].clone(),
            self.breakpoints[j + 1].clone(),
            true,
            last,
        )
    }

    pub fn piece_index(&self, x: &Rational) -> usize {
        let idx = self.breakpoints.partition_point(|b| b <= x);
        idx.clamp(1, self.pieces.len()) - 1
    }

    pub fn eval(&self, x: &Rational) -> Result<Rational, Error> {
        if x.is_negative() || *x > qi(1) {
            return Err(Error::Domain(format!("{} is outside [0,1]", format_rational(x))));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &Rational) -> Rational {
        self.pieces[self.piece_index(x)].apply(x)
    }

    /// Maximal absolute slope.
    pub fn lipschitz(&self) -> Rational {
        self.pieces.iter().map(|p| p.slope.abs()).max().expect("at least one piece")
    }

    /// True if all pieces share the same absolute slope.
    pub fn constant_abs_slope(&self) -> Option<Rational> {
        let s = self.pieces[0].slope.abs();
        self.pieces.iter().all(|p| p.slope.abs() == s).then_some(s)
    }

    /// Continuity on `[0,1]` (the circle identification of 0 and 1 is not
    /// considered).
    pub fn is_continuous(&self) -> bool {
        (1..self.pieces.len()).all(|j| {
            let b = &self.breakpoints[j];
            self.pieces[j - 1].apply(b) == self.pieces[j].apply(b)
        })
    }

    /// `outer ∘ self` as an exact piecewise-affine map.
    ///
    /// Fails when the composite cannot be expressed under the half-open
    /// convention, which happens only if `outer` jumps at the image of a
    /// sub-piece's closed end.
    pub fn then(&self, outer: &PwAffineMap) -> Result<PwAffineMap, Error> {
        let mut bps: Vec<Rational> = Vec::new();
        let mut pieces: Vec<AffinePiece> = Vec::new();
        let n = self.pieces.len();
        for (j, p) in self.pieces.iter().enumerate() {
            let dom = self.piece_domain(j);
            let mut cuts = vec![dom.lo.clone()];
            if !p.slope.is_zero() {
                let (ylo, yhi) = {
                    let a = p.apply(&dom.lo);
                    let b = p.apply(&dom.hi);
                    if a < b {
                        (a, b)
                    } else {
                        (b, a)
                    }
                };
                let start = outer.breakpoints.partition_point(|c| *c <= ylo);
                let stop = outer.breakpoints.partition_point(|c| *c < yhi);
                let mut xs: Vec<Rational> = outer.breakpoints[start..stop.max(start)]
                    .iter()
                    .map(|c| (c - &p.intercept) / &p.slope)
                    .collect();
                xs.sort();
                cuts.extend(xs);
            }
            cuts.push(dom.hi.clone());
            for w in cuts.windows(2) {
                let (xa, xb) = (&w[0], &w[1]);
                let mid = (xa + xb) / qi(2);
                let inner_y = p.apply(&mid);
                let outer_piece = &outer.pieces[outer.piece_index(&inner_y)];
                let comp = p.then(outer_piece);
                let mut checks = vec![xa];
                if j + 1 == n && *xb == dom.hi {
                    checks.push(xb);
                }
                for x in checks {
                    if outer.eval_unchecked(&p.apply(x)) != comp.apply(x) {
                        return Err(Error::Composition(format!(
                            "outer map jumps at {}, image of {}",
                            format_rational(&p.apply(x)),
                            format_rational(x)
                        )));
                    }
                }
                bps.push(xa.clone());
                pieces.push(comp);
            }
        }
        bps.push(qi(1));
        Ok(Self::merged(bps, pieces))
    }

    /// Exact full preimage of a set.
    pub fn preimage(&self, target: &IntervalSet) -> IntervalSet {
        let flat: Vec<(Interval, u32)> =
            target.components().iter().map(|c| (c.clone(), 0)).collect();
        let out = self.preimage_labeled(&flat);
        IntervalSet::merge_sorted(out.into_iter().map(|(iv, _)| iv).collect())
    }

    /// Preimage of a sorted, pairwise-disjoint labelled interval list. The
    /// output is sorted by left endpoint and carries the labels through.
    pub(crate) fn preimage_labeled(&self, flat: &[(Interval, u32)]) -> Vec<(Interval, u32)> {
        let mut out = Vec::new();
        for (j, p) in self.pieces.iter().enumerate() {
            let dom = self.piece_domain(j);
            if p.slope.is_zero() {
                let idx = flat.partition_point(|(c, _)| c.hi < p.intercept);
                for (c, label) in &flat[idx..] {
                    if c.lo > p.intercept {
                        break;
                    }
                    if c.contains(&p.intercept) {
                        out.push((dom.clone(), *label));
                        break;
                    }
                }
                continue;
            }
            let image = dom.affine_image(&p.slope, &p.intercept);
            let identity = p.slope.is_one() && p.intercept.is_zero();
            let inv_slope = p.slope.recip();
            let inv_icpt = -&p.intercept / &p.slope;
            let start = flat.partition_point(|(c, _)| c.entirely_before(&image));
            let mut hits = Vec::new();
            for (c, label) in &flat[start..] {
                if image.entirely_before(c) {
                    break;
                }
                if let Some(part) = c.intersect(&image) {
                    let part = if identity { part } else { part.affine_image(&inv_slope, &inv_icpt) };
                    hits.push((part, *label));
                }
            }
            if p.slope.is_negative() {
                hits.reverse();
            }
            out.extend(hits);
        }
        out
    }

    /// Measure bookkeeping helper: `λ(preimage(T))` computed piece by piece
    /// as `Σ_j λ(T ∩ image_j) / |s_j|` for maps without flat pieces.
    pub fn preimage_length_by_slopes(&self, target: &IntervalSet) -> Option<Rational> {
        let mut total = Rational::zero();
        for (j, p) in self.pieces.iter().enumerate() {
            if p.slope.is_zero() {
                return None;
            }
            let image = IntervalSet::from_interval(
                self.piece_domain(j).affine_image(&p.slope, &p.intercept),
            );
            total += target.intersection(&image).length() / p.slope.abs();
        }
        Some(total)
    }
}

impl PartialOrd for AffinePiece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AffinePiece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.slope.cmp(&other.slope).then_with(|| self.intercept.cmp(&other.intercept))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn set(s: &str) -> IntervalSet {
        IntervalSet::from_interval(s.parse().unwrap())
    }

    #[test]
    fn rejects_maps_leaving_the_unit_interval() {
        let r = PwAffineMap::new(vec![qi(0), qi(1)], vec![AffinePiece::new(qi(2), qi(0))]);
        assert!(matches!(r, Err(Error::Domain(_))));
        let r = PwAffineMap::new(vec![qi(0), q(1, 2)], vec![AffinePiece::new(qi(1), qi(0))]);
        assert!(r.is_err());
    }

    #[test]
    fn collinear_pieces_merge() {
        let m = PwAffineMap::new(
            vec![qi(0), q(1, 3), qi(1)],
            vec![AffinePiece::new(qi(1), qi(0)), AffinePiece::new(qi(1), qi(0))],
        )
        .unwrap();
        assert_eq!(m, PwAffineMap::identity());
    }

    #[test]
    fn doubling_squared_has_four_slope_four_branches() {
        let d = PwAffineMap::times_mod_one(2);
        let dd = d.then(&d).unwrap();
        assert_eq!(dd, PwAffineMap::times_mod_one(4));
        assert_eq!(dd.num_pieces(), 4);
        assert!(dd.pieces().iter().all(|p| p.slope == qi(4)));
    }

    #[test]
    fn rotation_composes_to_rotation() {
        let r = PwAffineMap::rotation(q(1, 3)).unwrap();
        let rr = r.then(&r).unwrap();
        assert_eq!(rr, PwAffineMap::rotation(q(2, 3)).unwrap());
        assert_eq!(rr.eval(&qi(1)).unwrap(), q(2, 3));
    }

    #[test]
    fn composition_detects_unrepresentable_jump() {
        // Decreasing inner branch lands its closed end on the doubling
        // map's jump at 1/2.
        let inner = PwAffineMap::from_nodes(&[(qi(0), q(1, 2)), (qi(1), qi(0))]).unwrap();
        let outer = PwAffineMap::times_mod_one(2);
        assert!(matches!(inner.then(&outer), Err(Error::Composition(_))));
    }

    #[test]
    fn flat_piece_preimage() {
        let m = PwAffineMap::new(
            vec![qi(0), q(1, 2), qi(1)],
            vec![AffinePiece::new(qi(0), q(1, 4)), AffinePiece::new(qi(1), qi(0))],
        )
        .unwrap();
        let pre = m.preimage(&IntervalSet::from_interval(Interval::point(q(1, 4))));
        // Whole flat piece plus the point 1/4 is below 1/2 so only the flat piece.
        assert_eq!(pre, set("[0,1/2)"));
        let pre = m.preimage(&set("[3/4,1]"));
        assert_eq!(pre, set("[3/4,1]"));
        assert_eq!(m.preimage(&set("[0,1/5)")), IntervalSet::empty());
    }

    #[test]
    fn eval_outside_domain_errors() {
        let m = PwAffineMap::identity();
        assert!(m.eval(&q(3, 2)).is_err());
        assert!(m.eval(&q(-1, 2)).is_err());
        assert_eq!(m.eval(&q(1, 3)).unwrap(), q(1, 3));
    }

    #[test]
    fn json_round_trip() {
        let m = PwAffineMap::times_mod_one(3);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"1/3\""));
        let back: PwAffineMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"breakpoints":["0","1"],"pieces":[{"slope":"3","intercept":"0"}]}"#;
        assert!(serde_json::from_str::<PwAffineMap>(bad).is_err());
    }
}
