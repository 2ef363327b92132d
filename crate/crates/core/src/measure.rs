//! Probability measures with a piecewise-constant density plus finitely many
//! atoms, their exact pushforwards, and invariant measure sequences.

use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::far::advance_run;
use crate::interval::{Interval, IntervalSet};
use crate::map::PwAffineMap;
use crate::rational::{self, format_rational, qi, Rational};
use crate::system::NdSystem;
use crate::Error;

/// Density `heights[j]` on `[breakpoints[j], breakpoints[j+1])`, plus atoms.
///
/// Canonical: adjacent equal heights are merged, atoms are sorted by location
/// with positive masses, so structural equality is measure equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PwConstMeasure {
    breakpoints: Vec<Rational>,
    heights: Vec<Rational>,
    atoms: Vec<(Rational, Rational)>,
    /// `cumulative[j]` = continuous mass of `[0, breakpoints[j])`.
    cumulative: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityPiece {
    pub interval: Interval,
    #[serde(with = "rational::serde_str")]
    pub height: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    #[serde(with = "rational::serde_str")]
    pub at: Rational,
    #[serde(with = "rational::serde_str")]
    pub mass: Rational,
}

/// JSON form of a measure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDoc {
    pub density: Vec<DensityPiece>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

impl PwConstMeasure {
    /// Validates total mass 1, non-negativity and the breakpoint layout.
    pub fn new(
        breakpoints: Vec<Rational>,
        heights: Vec<Rational>,
        atoms: Vec<(Rational, Rational)>,
    ) -> Result<Self, Error> {
        if breakpoints.len() != heights.len() + 1
            || !breakpoints[0].is_zero()
            || !breakpoints[breakpoints.len() - 1].is_one()
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Domain("density breakpoints must run 0 < … < 1".into()));
        }
        if heights.iter().any(Signed::is_negative) {
            return Err(Error::Domain("negative density".into()));
        }
        let unit = Interval::unit();
        for (p, m) in &atoms {
            if m.is_negative() || !unit.contains(p) {
                return Err(Error::Domain(format!("bad atom at {}", format_rational(p))));
            }
        }
        let mu = Self::canonical(breakpoints, heights, atoms);
        let total = mu.total_mass();
        if !total.is_one() {
            return Err(Error::Domain(format!("total mass {} is not 1", format_rational(&total))));
        }
        Ok(mu)
    }

    fn canonical(
        breakpoints: Vec<Rational>,
        heights: Vec<Rational>,
        mut atoms: Vec<(Rational, Rational)>,
    ) -> Self {
        let mut bps = vec![breakpoints[0].clone()];
        let mut hs: Vec<Rational> = Vec::with_capacity(heights.len());
        for (j, h) in heights.into_iter().enumerate() {
            if hs.last() == Some(&h) {
                *bps.last_mut().unwrap() = breakpoints[j + 1].clone();
            } else {
                hs.push(h);
                bps.push(breakpoints[j + 1].clone());
            }
        }
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Rational, Rational)> = Vec::with_capacity(atoms.len());
        for (p, m) in atoms {
            if m.is_zero() {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += m,
                _ => merged.push((p, m)),
            }
        }
        let mut cumulative = Vec::with_capacity(bps.len());
        let mut acc = Rational::zero();
        cumulative.push(acc.clone());
        for (j, h) in hs.iter().enumerate() {
            acc += h * (&bps[j + 1] - &bps[j]);
            cumulative.push(acc.clone());
        }
        PwConstMeasure { breakpoints: bps, heights: hs, atoms: merged, cumulative }
    }

    /// Lebesgue measure on `[0,1]`.
    pub fn lebesgue() -> Self {
        Self::canonical(vec![qi(0), qi(1)], vec![qi(1)], vec![])
    }

    pub fn dirac(x: Rational) -> Result<Self, Error> {
        Self::new(vec![qi(0), qi(1)], vec![qi(0)], vec![(x, qi(1))])
    }

    pub fn density_pieces(&self) -> impl Iterator<Item = DensityPiece> + '_ {
        let last = self.heights.len() - 1;
        self.heights.iter().enumerate().map(move |(j, h)| DensityPiece {
            interval: Interval::raw(
                self.breakpoints[j].clone(),
                self.breakpoints[j + 1].clone(),
                true,
                j == last,
            ),
            height: h.clone(),
        })
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn heights(&self) -> &[Rational] {
        &self.heights
    }

    pub fn atoms(&self) -> &[(Rational, Rational)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> Rational {
        let cont = self.cumulative.last().cloned().unwrap_or_else(Rational::zero);
        self.atoms.iter().fold(cont, |acc, (_, m)| acc + m)
    }

    /// Continuous mass of `[0, x)`.
    fn cdf(&self, x: &Rational) -> Rational {
        if !x.is_positive() {
            return Rational::zero();
        }
        if *x >= qi(1) {
            return self.cumulative.last().cloned().unwrap();
        }
        let j = self.breakpoints.partition_point(|b| b <= x) - 1;
        &self.cumulative[j] + &self.heights[j] * (x - &self.breakpoints[j])
    }

    pub fn mass(&self, iv: &Interval) -> Rational {
        if iv.is_empty() {
            return Rational::zero();
        }
        let mut m = self.cdf(&iv.hi) - self.cdf(&iv.lo);
        if !self.atoms.is_empty() {
            let start = self.atoms.partition_point(|(p, _)| *p < iv.lo);
            for (p, a) in &self.atoms[start..] {
                if *p > iv.hi {
                    break;
                }
                if iv.contains(p) {
                    m += a;
                }
            }
        }
        m
    }

    pub fn mass_of(&self, set: &IntervalSet) -> Rational {
        set.components().iter().map(|c| self.mass(c)).sum()
    }

    /// Exact `map_* μ`. Flat pieces turn density mass into an atom.
    pub fn pushforward(&self, map: &PwAffineMap) -> PwConstMeasure {
        let mut events: Vec<(Rational, Rational)> = Vec::new();
        let mut atoms: Vec<(Rational, Rational)> = Vec::new();
        for (j, piece) in map.pieces().iter().enumerate() {
            let b0 = &map.breakpoints()[j];
            let b1 = &map.breakpoints()[j + 1];
            let start = self.breakpoints.partition_point(|c| c <= b0) - 1;
            for k in start..self.heights.len() {
                let c0 = &self.breakpoints[k];
                if c0 >= b1 {
                    break;
                }
                let u = if c0 > b0 { c0 } else { b0 };
                let c1 = &self.breakpoints[k + 1];
                let v = if c1 < b1 { c1 } else { b1 };
                if u >= v || self.heights[k].is_zero() {
                    continue;
                }
                let h = &self.heights[k];
                if piece.slope.is_zero() {
                    atoms.push((piece.intercept.clone(), h * (v - u)));
                    continue;
                }
                let (a, b) = (piece.apply(u), piece.apply(v));
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let d = h / piece.slope.abs();
                events.push((lo, d.clone()));
                events.push((hi, -d));
            }
        }
        for (p, m) in &self.atoms {
            atoms.push((map.eval_unchecked(p), m.clone()));
        }
        events.push((qi(0), Rational::zero()));
        events.push((qi(1), Rational::zero()));
        events.sort_by(|a, b| a.0.cmp(&b.0));
        let mut bps: Vec<Rational> = Vec::new();
        let mut heights: Vec<Rational> = Vec::new();
        let mut level = Rational::zero();
        let mut i = 0;
        while i < events.len() {
            let x = events[i].0.clone();
            while i < events.len() && events[i].0 == x {
                level += &events[i].1;
                i += 1;
            }
            if x < qi(1) {
                bps.push(x);
                heights.push(level.clone());
            }
        }
        bps.push(qi(1));
        Self::canonical(bps, heights, atoms)
    }

    /// `∫ φ dμ` for a piecewise-affine test function, exactly.
    pub fn integrate(&self, phi: &PwAffineMap) -> Rational {
        let mut total = Rational::zero();
        let two = qi(2);
        for (k, h) in self.heights.iter().enumerate() {
            if h.is_zero() {
                continue;
            }
            let (c0, c1) = (&self.breakpoints[k], &self.breakpoints[k + 1]);
            for (j, p) in phi.pieces().iter().enumerate() {
                let (b0, b1) = (&phi.breakpoints()[j], &phi.breakpoints()[j + 1]);
                let u = if c0 > b0 { c0 } else { b0 };
                let v = if c1 < b1 { c1 } else { b1 };
                if u >= v {
                    continue;
                }
                let integral = &p.slope * (v * v - u * u) / &two + &p.intercept * (v - u);
                total += h * integral;
            }
        }
        for (x, m) in &self.atoms {
            total += m * phi.eval_unchecked(x);
        }
        total
    }

    pub fn to_doc(&self) -> MeasureDoc {
        MeasureDoc {
            density: self.density_pieces().collect(),
            atoms: self.atoms.iter().map(|(p, m)| Atom { at: p.clone(), mass: m.clone() }).collect(),
        }
    }

    pub fn from_doc(doc: &MeasureDoc) -> Result<Self, Error> {
        if doc.density.is_empty() {
            return Err(Error::Domain("density must cover [0,1]".into()));
        }
        let mut bps = vec![doc.density[0].interval.lo.clone()];
        for w in doc.density.windows(2) {
            if w[0].interval.hi != w[1].interval.lo {
                return Err(Error::Domain("density intervals must tile [0,1]".into()));
            }
        }
        bps.extend(doc.density.iter().map(|p| p.interval.hi.clone()));
        let heights = doc.density.iter().map(|p| p.height.clone()).collect();
        let atoms = doc.atoms.iter().map(|a| (a.at.clone(), a.mass.clone())).collect();
        Self::new(bps, heights, atoms)
    }
}

/// `μ_n = (f_{n-1} ∘ … ∘ f_0)_* μ_0`, materialized lazily and cached.
///
/// Concurrent callers may race to extend the cache; every materialization of
/// the same `μ_n` is identical, so the first writer wins harmlessly.
pub struct MeasureSequence {
    system: NdSystem,
    cache: Mutex<Vec<Arc<PwConstMeasure>>>,
}

/// Value of `μ_n` at a segment boundary of the schedule.
#[derive(Clone, Debug)]
pub struct FarMeasure {
    pub time: BigUint,
    pub measure: PwConstMeasure,
}

impl MeasureSequence {
    pub fn new(system: NdSystem, initial: PwConstMeasure) -> Self {
        MeasureSequence { system, cache: Mutex::new(vec![Arc::new(initial)]) }
    }

    pub fn system(&self) -> &NdSystem {
        &self.system
    }

    pub fn initial(&self) -> Arc<PwConstMeasure> {
        self.cache.lock().expect("measure cache poisoned")[0].clone()
    }

    pub fn at(&self, n: u64) -> Result<Arc<PwConstMeasure>, Error> {
        let n = n as usize;
        let (mut k, mut cur) = {
            let cache = self.cache.lock().expect("measure cache poisoned");
            if let Some(m) = cache.get(n) {
                return Ok(m.clone());
            }
            (cache.len() - 1, cache[cache.len() - 1].clone())
        };
        while k < n {
            let next = Arc::new(cur.pushforward(&*self.system.map_at(k as u64)?));
            let mut cache = self.cache.lock().expect("measure cache poisoned");
            if cache.len() == k + 1 {
                cache.push(next.clone());
            }
            cur = cache[k + 1].clone();
            k += 1;
        }
        Ok(cur)
    }

    /// Walks `μ_t` over segment boundaries of the schedule, collapsing long
    /// runs by detecting when the measure becomes periodic (typically fixed).
    pub fn walk_far<F>(&self, max_segments: usize, max_cycle: usize, mut visit: F) -> Result<(), Error>
    where
        F: FnMut(&FarMeasure) -> bool,
    {
        let mut cur = FarMeasure { time: BigUint::zero(), measure: (*self.initial()).clone() };
        if !visit(&cur) {
            return Ok(());
        }
        for seg in self.system.schedule().segments().take(max_segments) {
            let Some(count) = seg.count else { break };
            let map = self.system.word_map(&seg.word)?;
            let measure =
                advance_run(cur.measure, &count, max_cycle, |m| Ok(m.pushforward(&map)))?;
            cur = FarMeasure { time: seg.start + count, measure };
            if !visit(&cur) {
                break;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn iv(s: &str) -> Interval {
        s.parse().unwrap()
    }

    #[test]
    fn lebesgue_masses() {
        let l = PwConstMeasure::lebesgue();
        assert_eq!(l.mass(&iv("[1/3,1/2)")), q(1, 6));
        assert_eq!(l.mass(&iv("[1/2,1/2]")), qi(0));
    }

    #[test]
    fn atoms_respect_closedness() {
        let d = PwConstMeasure::dirac(q(1, 2)).unwrap();
        assert_eq!(d.mass(&iv("[0,1/2)")), qi(0));
        assert_eq!(d.mass(&iv("[1/2,1]")), qi(1));
        assert_eq!(d.mass(&iv("[1/2,1/2]")), qi(1));
    }

    #[test]
    fn rejects_non_probability() {
        assert!(PwConstMeasure::new(vec![qi(0), qi(1)], vec![q(1, 2)], vec![]).is_err());
        assert!(PwConstMeasure::new(vec![qi(0), qi(1)], vec![qi(2)], vec![(qi(0), qi(-1))]).is_err());
    }

    #[test]
    fn pushforward_under_doubling_preserves_lebesgue() {
        let l = PwConstMeasure::lebesgue();
        assert_eq!(l.pushforward(&PwAffineMap::times_mod_one(2)), l);
        assert_eq!(l.pushforward(&PwAffineMap::identity()), l);
    }

    #[test]
    fn flat_piece_makes_atom() {
        let m = PwAffineMap::from_nodes(&[(qi(0), q(1, 4)), (q(1, 2), q(1, 4)), (qi(1), qi(1))]).unwrap();
        let pushed = PwConstMeasure::lebesgue().pushforward(&m);
        assert_eq!(pushed.atoms(), &[(q(1, 4), q(1, 2))]);
        assert_eq!(pushed.total_mass(), qi(1));
        assert_eq!(pushed.mass(&iv("(1/4,1]")), q(1, 2));
    }

    #[test]
    fn integrate_affine() {
        let l = PwConstMeasure::lebesgue();
        assert_eq!(l.integrate(&PwAffineMap::identity()), q(1, 2));
        let d = PwConstMeasure::dirac(q(1, 3)).unwrap();
        assert_eq!(d.integrate(&PwAffineMap::identity()), q(1, 3));
    }

    #[test]
    fn doc_round_trip() {
        let m = PwConstMeasure::new(
            vec![qi(0), q(1, 3), qi(1)],
            vec![q(3, 2), q(1, 4)],
            vec![(qi(0), q(1, 3))],
        )
        .unwrap();
        let json = serde_json::to_string(&m.to_doc()).unwrap();
        let doc: MeasureDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(PwConstMeasure::from_doc(&doc).unwrap(), m);
    }
}
