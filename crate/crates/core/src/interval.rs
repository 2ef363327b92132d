//! Rational intervals with explicit endpoint closedness, and finite unions of
//! them.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rational::{format_rational, parse_rational, qi, Rational};
use crate::Error;

/// An interval `lo..hi` of the real line; each end may be open or closed.
///
/// Empty intervals are representable (`lo == hi` with an open end) but never
/// stored inside an [`IntervalSet`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

/// Orders left endpoints: at equal values a closed start comes first.
pub(crate) fn cmp_start(a: &Interval, b: &Interval) -> Ordering {
    a.lo.cmp(&b.lo).then_with(|| b.lo_closed.cmp(&a.lo_closed))
}

/// Orders right endpoints: at equal values an open end comes first.
pub(crate) fn cmp_end(a: &Interval, b: &Interval) -> Ordering {
    a.hi.cmp(&b.hi).then_with(|| a.hi_closed.cmp(&b.hi_closed))
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational, lo_closed: bool, hi_closed: bool) -> Result<Self, Error> {
        if lo > hi {
            return Err(Error::Domain(format!(
                "interval with lo {} > hi {}",
                format_rational(&lo),
                format_rational(&hi)
            )));
        }
        Ok(Interval { lo, hi, lo_closed, hi_closed })
    }

    pub(crate) fn raw(lo: Rational, hi: Rational, lo_closed: bool, hi_closed: bool) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi, lo_closed, hi_closed }
    }

    /// `[lo, hi)`.
    pub fn half_open(lo: Rational, hi: Rational) -> Self {
        Interval::raw(lo, hi, true, false)
    }

    /// `[lo, hi]`.
    pub fn closed(lo: Rational, hi: Rational) -> Self {
        Interval::raw(lo, hi, true, true)
    }

    /// `(lo, hi)`.
    pub fn open(lo: Rational, hi: Rational) -> Self {
        Interval::raw(lo, hi, false, false)
    }

    pub fn point(x: Rational) -> Self {
        Interval::raw(x.clone(), x, true, true)
    }

    /// The closed unit interval.
    pub fn unit() -> Self {
        Interval::closed(qi(0), qi(1))
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi && !(self.lo_closed && self.hi_closed)
    }

    /// A single point.
    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi && self.lo_closed && self.hi_closed
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let above = if self.lo_closed { *x >= self.lo } else { *x > self.lo };
        let below = if self.hi_closed { *x <= self.hi } else { *x < self.hi };
        above && below
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let start = if cmp_start(self, other) == Ordering::Less { other } else { self };
        let end = if cmp_end(self, other) == Ordering::Less { self } else { other };
        let iv = Interval {
            lo: start.lo.clone(),
            hi: end.hi.clone(),
            lo_closed: start.lo_closed,
            hi_closed: end.hi_closed,
        };
        if iv.lo > iv.hi || iv.is_empty() {
            None
        } else {
            Some(iv)
        }
    }

    /// True if every point of `self` lies to the left of every point of
    /// `other`.
    pub(crate) fn entirely_before(&self, other: &Interval) -> bool {
        match self.hi.cmp(&other.lo) {
            Ordering::Less => true,
            Ordering::Equal => !(self.hi_closed && other.lo_closed),
            Ordering::Greater => false,
        }
    }

    /// True if the union of the two (in this order) is a single interval.
    pub(crate) fn touches(&self, next: &Interval) -> bool {
        match self.hi.cmp(&next.lo) {
            Ordering::Greater => true,
            Ordering::Equal => self.hi_closed || next.lo_closed,
            Ordering::Less => false,
        }
    }

    /// Image under `x -> slope * x + intercept` for a nonzero slope.
    pub(crate) fn affine_image(&self, slope: &Rational, intercept: &Rational) -> Interval {
        debug_assert!(!slope.is_zero());
        let a = slope * &self.lo + intercept;
        let b = slope * &self.hi + intercept;
        if slope.is_positive() {
            Interval::raw(a, b, self.lo_closed, self.hi_closed)
        } else {
            Interval::raw(b, a, self.hi_closed, self.lo_closed)
        }
    }

    /// Distance between two disjoint intervals (zero if they touch).
    pub fn gap(&self, other: &Interval) -> Rational {
        if self.hi <= other.lo {
            &other.lo - &self.hi
        } else if other.hi <= self.lo {
            &self.lo - &other.hi
        } else {
            Rational::zero()
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed { '[' } else { '(' },
            format_rational(&self.lo),
            format_rational(&self.hi),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

impl FromStr for Interval {
    type Err = Error;

    /// Parses `"[a,b)"`, `"(a,b]"`, etc.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not an interval: {s:?}"));
        let mut chars = s.chars();
        let lo_closed = match chars.next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let hi_closed = match s.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let body = &s[1..s.len() - 1];
        let (a, b) = body.split_once(',').ok_or_else(bad)?;
        Interval::new(parse_rational(a)?, parse_rational(b)?, lo_closed, hi_closed)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite union of intervals, stored as sorted, pairwise disjoint and
/// non-adjacent components.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalSet {
    components: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { components: Vec::new() }
    }

    pub fn unit() -> Self {
        IntervalSet { components: vec![Interval::unit()] }
    }

    pub fn from_interval(iv: Interval) -> Self {
        if iv.is_empty() {
            Self::empty()
        } else {
            IntervalSet { components: vec![iv] }
        }
    }

    /// Normalizes an arbitrary collection of intervals (overlaps allowed).
    pub fn from_intervals(mut ivs: Vec<Interval>) -> Self {
        ivs.retain(|iv| !iv.is_empty());
        ivs.sort_by(cmp_start);
        Self::merge_sorted(ivs)
    }

    /// Like [`from_intervals`](Self::from_intervals) for input already sorted
    /// by left endpoint.
    pub(crate) fn merge_sorted(ivs: Vec<Interval>) -> Self {
        let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            if iv.is_empty() {
                continue;
            }
            if let Some(last) = out.last_mut() {
                if last.touches(&iv) {
                    if cmp_end(last, &iv) == Ordering::Less {
                        last.hi = iv.hi;
                        last.hi_closed = iv.hi_closed;
                    }
                    continue;
                }
            }
            out.push(iv);
        }
        IntervalSet { components: out }
    }

    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Interval> {
        self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Total Lebesgue measure.
    pub fn length(&self) -> Rational {
        self.components.iter().map(Interval::length).sum()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        // Components are sorted; binary search on the left endpoint.
        let idx = self.components.partition_point(|c| c.lo <= *x);
        idx > 0 && self.components[idx - 1].contains(x)
    }

    pub fn inf(&self) -> Option<&Rational> {
        self.components.first().map(|c| &c.lo)
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut all = self.components.clone();
        all.extend(other.components.iter().cloned());
        IntervalSet::from_intervals(all)
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.components, &other.components);
        while i < a.len() && j < b.len() {
            if let Some(iv) = a[i].intersect(&b[j]) {
                out.push(iv);
            }
            if cmp_end(&a[i], &b[j]) == Ordering::Less {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::merge_sorted(out)
    }

    /// The set with all isolated points removed and every component made
    /// half-open; two sets are equal modulo finite point sets iff their
    /// `mod_zero` forms are equal.
    pub fn mod_zero(&self) -> IntervalSet {
        let ivs = self
            .components
            .iter()
            .filter(|c| c.lo < c.hi)
            .map(|c| Interval::half_open(c.lo.clone(), c.hi.clone()))
            .collect();
        IntervalSet::merge_sorted(ivs)
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "{{}}");
        }
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, " u ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
