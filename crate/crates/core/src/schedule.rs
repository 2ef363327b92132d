//! Rules assigning a map to every time index.
//!
//! Step-level queries use `u64` time indices. Far-time queries (orbits and
//! measures at times like `2^121`) go through [`Schedule::segments`], which
//! describes the schedule as runs of a repeated map word with big-integer
//! lengths.

use num_bigint::BigUint;
use num_integer::Roots;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::Error;

/// Index into a system's map table.
pub type MapId = usize;

/// Strictly increasing sequence of time indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IndexSequence {
    /// `1, 2, 16, 512, …`, i.e. `2^(k^2)` for `k = 0, 1, 2, …`.
    Pow2Squares,
    /// A finite explicit list.
    Explicit { values: Vec<u64> },
}

impl IndexSequence {
    pub fn validate(&self) -> Result<(), Error> {
        if let IndexSequence::Explicit { values } = self {
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain("explicit index sequence must be strictly increasing".into()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, i: u64) -> bool {
        match self {
            IndexSequence::Pow2Squares => {
                if !i.is_power_of_two() {
                    return false;
                }
                let e = i.trailing_zeros() as u64;
                let r = e.sqrt();
                r * r == e
            }
            IndexSequence::Explicit { values } => values.binary_search(&i).is_ok(),
        }
    }

    /// The `k`-th member, if it exists.
    pub fn member(&self, k: u64) -> Option<BigUint> {
        match self {
            IndexSequence::Pow2Squares => Some(BigUint::one() << (k * k)),
            IndexSequence::Explicit { values } => {
                values.get(k as usize).map(|&v| BigUint::from(v))
            }
        }
    }

    /// Members in increasing order.
    pub fn members(&self) -> impl Iterator<Item = BigUint> + '_ {
        (0u64..).map_while(move |k| self.member(k))
    }

    /// All members strictly below `bound`.
    pub fn members_below(&self, bound: u64) -> Vec<u64> {
        let b = BigUint::from(bound);
        self.members()
            .take_while(|m| *m < b)
            .map(|m| m.to_u64().expect("below a u64 bound"))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    Constant { map: MapId },
    Periodic { maps: Vec<MapId> },
    /// `on` at the members of `indices`, `off` everywhere else.
    IndexSet { on: MapId, off: MapId, indices: IndexSequence },
    /// Step `n` applies the base steps `nm, …, nm+m-1` in order.
    Power { m: u64, base: Box<Schedule> },
}

/// A run of `count` consecutive steps, each applying `word` (base maps in
/// application order). `count == None` means the run never ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: BigUint,
    pub word: Vec<MapId>,
    pub count: Option<BigUint>,
}

impl Schedule {
    pub fn validate(&self, table_len: usize) -> Result<(), Error> {
        let check = |id: &MapId| {
            if *id < table_len {
                Ok(())
            } else {
                Err(Error::Domain(format!("schedule references map #{id} outside the table")))
            }
        };
        match self {
            Schedule::Constant { map } => check(map),
            Schedule::Periodic { maps } => {
                if maps.is_empty() {
                    return Err(Error::Domain("periodic schedule needs at least one map".into()));
                }
                maps.iter().try_for_each(check)
            }
            Schedule::IndexSet { on, off, indices } => {
                check(on)?;
                check(off)?;
                indices.validate()
            }
            Schedule::Power { m, base } => {
                if *m == 0 {
                    return Err(Error::Domain("power exponent must be at least 1".into()));
                }
                base.validate(table_len)
            }
        }
    }

    /// Base maps applied at step `i`, in application order.
    pub fn word_at(&self, i: u64) -> Vec<MapId> {
        match self {
            Schedule::Constant { map } => vec![*map],
            Schedule::Periodic { maps } => vec![maps[(i % maps.len() as u64) as usize]],
            Schedule::IndexSet { on, off, indices } => {
                vec![if indices.contains(i) { *on } else { *off }]
            }
            Schedule::Power { m, base } => {
                (0..*m).flat_map(|r| base.word_at(i * m + r)).collect()
            }
        }
    }

    /// Distinct map-table entries the schedule can ever use.
    pub fn used_maps(&self) -> Vec<MapId> {
        let mut ids = match self {
            Schedule::Constant { map } => vec![*map],
            Schedule::Periodic { maps } => maps.clone(),
            Schedule::IndexSet { on, off, indices } => match indices {
                IndexSequence::Explicit { values } if values.is_empty() => vec![*off],
                _ => vec![*on, *off],
            },
            Schedule::Power { base, .. } => base.used_maps(),
        };
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Largest number of base maps composed in one step.
    pub fn word_len(&self) -> u64 {
        match self {
            Schedule::Power { m, base } => m * base.word_len(),
            _ => 1,
        }
    }

    /// The schedule as consecutive runs starting at time 0.
    pub fn segments(&self) -> Box<dyn Iterator<Item = Segment> + '_> {
        match self {
            Schedule::Constant { map } => Box::new(std::iter::once(Segment {
                start: BigUint::zero(),
                word: vec![*map],
                count: None,
            })),
            Schedule::Periodic { maps } => {
                let p = maps.len() as u64;
                Box::new((0u64..).map(move |t| Segment {
                    start: BigUint::from(t),
                    word: vec![maps[(t % p) as usize]],
                    count: Some(BigUint::one()),
                }))
            }
            Schedule::IndexSet { on, off, indices } => {
                Box::new(IndexSetSegments::new(*on, *off, indices))
            }
            Schedule::Power { m, base } => match base.as_ref() {
                Schedule::IndexSet { on, off, indices } => {
                    Box::new(PowerSegments::new(*m, *on, *off, indices))
                }
                other => {
                    let m = *m;
                    Box::new((0u64..).map(move |t| Segment {
                        start: BigUint::from(t),
                        word: (0..m).flat_map(|r| other.word_at(t * m + r)).collect(),
                        count: Some(BigUint::one()),
                    }))
                }
            },
        }
    }
}

struct IndexSetSegments<'a> {
    on: MapId,
    off: MapId,
    members: Box<dyn Iterator<Item = BigUint> + 'a>,
    t: BigUint,
    pending_hit: Option<BigUint>,
    done: bool,
}

impl<'a> IndexSetSegments<'a> {
    fn new(on: MapId, off: MapId, indices: &'a IndexSequence) -> Self {
        IndexSetSegments {
            on,
            off,
            members: Box::new(indices.members()),
            t: BigUint::zero(),
            pending_hit: None,
            done: false,
        }
    }
}

impl Iterator for IndexSetSegments<'_> {
    type Item = Segment;

    fn next(&mut self) -> Option<Segment> {
        if self.done {
            return None;
        }
        if let Some(h) = self.pending_hit.take() {
            self.t = &h + 1u32;
            return Some(Segment { start: h, word: vec![self.on], count: Some(BigUint::one()) });
        }
        match self.members.next() {
            Some(h) => {
                if h > self.t {
                    let seg = Segment {
                        start: self.t.clone(),
                        word: vec![self.off],
                        count: Some(&h - &self.t),
                    };
                    self.pending_hit = Some(h);
                    Some(seg)
                } else {
                    self.t = &h + 1u32;
                    Some(Segment { start: h, word: vec![self.on], count: Some(BigUint::one()) })
                }
            }
            None => {
                self.done = true;
                Some(Segment { start: self.t.clone(), word: vec![self.off], count: None })
            }
        }
    }
}

/// Runs of an index-set schedule viewed through its `m`-th power.
struct PowerSegments<'a> {
    m: u64,
    on: MapId,
    off: MapId,
    members: std::iter::Peekable<Box<dyn Iterator<Item = BigUint> + 'a>>,
    block: BigUint,
    pending: Option<(BigUint, Vec<MapId>)>,
    done: bool,
}

impl<'a> PowerSegments<'a> {
    fn new(m: u64, on: MapId, off: MapId, indices: &'a IndexSequence) -> Self {
        let members: Box<dyn Iterator<Item = BigUint> + 'a> = Box::new(indices.members());
        PowerSegments {
            m,
            on,
            off,
            members: members.peekable(),
            block: BigUint::zero(),
            pending: None,
            done: false,
        }
    }
}

impl Iterator for PowerSegments<'_> {
    type Item = Segment;

    fn next(&mut self) -> Option<Segment> {
        if self.done {
            return None;
        }
        if let Some((b, word)) = self.pending.take() {
            self.block = &b + 1u32;
            return Some(Segment { start: b, word, count: Some(BigUint::one()) });
        }
        let Some(h) = self.members.next() else {
            self.done = true;
            return Some(Segment {
                start: self.block.clone(),
                word: vec![self.off; self.m as usize],
                count: None,
            });
        };
        let m = BigUint::from(self.m);
        let b = &h / &m;
        let mut word = vec![self.off; self.m as usize];
        word[(&h % &m).to_usize().expect("offset below m")] = self.on;
        let block_end = (&b + 1u32) * &m;
        while let Some(next) = self.members.peek() {
            if *next >= block_end {
                break;
            }
            let r = (next % &m).to_usize().expect("offset below m");
            word[r] = self.on;
            self.members.next();
        }
        if b > self.block {
            let seg = Segment {
                start: self.block.clone(),
                word: vec![self.off; self.m as usize],
                count: Some(&b - &self.block),
            };
            self.pending = Some((b, word));
            Some(seg)
        } else {
            self.block = &b + 1u32;
            Some(Segment { start: b, word, count: Some(BigUint::one()) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_squares_membership() {
        let s = IndexSequence::Pow2Squares;
        assert_eq!(s.members_below(600), vec![1, 2, 16, 512]);
        assert!(s.contains(65536));
        assert!(!s.contains(0));
        assert!(!s.contains(4));
        assert!(!s.contains(3));
    }

    #[test]
    fn index_set_segments_match_stepwise_words() {
        let sched = Schedule::IndexSet { on: 0, off: 1, indices: IndexSequence::Pow2Squares };
        let mut t = 0u64;
        for seg in sched.segments().take(7) {
            assert_eq!(seg.start, BigUint::from(t));
            let c = seg.count.unwrap().to_u64().unwrap();
            for k in 0..c {
                assert_eq!(sched.word_at(t + k), seg.word);
            }
            t += c;
        }
        assert_eq!(t, 513);
    }

    #[test]
    fn power_segments_match_stepwise_words() {
        for m in 1..=5u64 {
            let sched = Schedule::Power {
                m,
                base: Box::new(Schedule::IndexSet {
                    on: 0,
                    off: 1,
                    indices: IndexSequence::Pow2Squares,
                }),
            };
            let mut t = 0u64;
            for seg in sched.segments().take(12) {
                assert_eq!(seg.start, BigUint::from(t));
                let c = seg.count.unwrap().to_u64().unwrap();
                for k in [0, c / 2, c - 1] {
                    assert_eq!(sched.word_at(t + k), seg.word, "m={m} t={}", t + k);
                }
                t += c;
            }
        }
    }

    #[test]
    fn explicit_sequence_ends_in_infinite_run() {
        let sched = Schedule::IndexSet {
            on: 0,
            off: 1,
            indices: IndexSequence::Explicit { values: vec![0, 3] },
        };
        let segs: Vec<_> = sched.segments().collect();
        assert_eq!(segs.len(), 4);
        assert_eq!(segs[0].word, vec![0]);
        assert_eq!(segs[3].count, None);
        assert!(IndexSequence::Explicit { values: vec![3, 3] }.validate().is_err());
    }
}
