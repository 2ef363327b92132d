//! Finite partitions of `[0,1]` into interval sets, their refinements and
//! dynamical pullbacks, and partition sequences.
//!
//! Partitions are mod-zero objects: cells may disagree on finitely many
//! points without changing any entropy value. Structural equality still
//! compares exact cells; use [`Partition::equal_mod_zero`] for the weaker
//! notion.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::interval::{cmp_end, cmp_start, Interval, IntervalSet};
use crate::measure::PwConstMeasure;
use crate::rational::{q, Rational};
use crate::system::NdSystem;
use crate::{Budget, Error};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub name: String,
    pub set: IntervalSet,
}

/// Cells sorted by their leftmost point (closed starts first).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct Partition {
    cells: Vec<Cell>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    cells: Vec<Cell>,
}

impl TryFrom<RawPartition> for Partition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self, Error> {
        Partition::new(raw.cells)
    }
}

/// Disjoint labelled intervals sorted by left endpoint. Labels are numbered
/// in order of first appearance, which is the canonical cell order.
#[derive(Clone, Debug)]
pub(crate) struct Flat {
    pub pieces: Vec<(Interval, u32)>,
    pub ncells: usize,
}

impl Flat {
    /// Per-label masses under `mu`.
    pub fn masses(&self, mu: &PwConstMeasure) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.ncells];
        for (iv, l) in &self.pieces {
            out[*l as usize] += mu.mass(iv);
        }
        out
    }

    /// Pulls back under `map`, keeping labels.
    pub fn pullback(&self, map: &crate::map::PwAffineMap) -> Flat {
        Flat { pieces: map.preimage_labeled(&self.pieces), ncells: self.ncells }
    }

    /// Relabels by first appearance and drops labels that vanished.
    fn compact(self) -> (Flat, Vec<u32>) {
        let mut relabel: HashMap<u32, u32> = HashMap::new();
        let mut old_of_new = Vec::new();
        let pieces = self
            .pieces
            .into_iter()
            .map(|(iv, l)| {
                let next = relabel.len() as u32;
                let nl = *relabel.entry(l).or_insert_with(|| {
                    old_of_new.push(l);
                    next
                });
                (iv, nl)
            })
            .collect();
        (Flat { pieces, ncells: old_of_new.len() }, old_of_new)
    }
}

/// `a ∨ b` on flat forms. Returns the refinement and, per new label, the
/// pair of parent labels.
pub(crate) fn refine_flat(a: &Flat, b: &Flat, budget: Budget) -> Result<(Flat, Vec<(u32, u32)>), Error> {
    let mut pair_label: HashMap<(u32, u32), u32> = HashMap::new();
    let mut parents: Vec<(u32, u32)> = Vec::new();
    let mut pieces: Vec<(Interval, u32)> = Vec::with_capacity(a.pieces.len().max(b.pieces.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.pieces.len() && j < b.pieces.len() {
        let (ia, la) = &a.pieces[i];
        let (ib, lb) = &b.pieces[j];
        if let Some(iv) = ia.intersect(ib) {
            let next = parents.len() as u32;
            let label = *pair_label.entry((*la, *lb)).or_insert_with(|| {
                parents.push((*la, *lb));
                next
            });
            match pieces.last_mut() {
                Some((last, l)) if *l == label && last.touches(&iv) => {
                    last.hi = iv.hi;
                    last.hi_closed = iv.hi_closed;
                }
                _ => {
                    pieces.push((iv, label));
                    if pieces.len() > budget.cells {
                        budget.check("refined pieces", pieces.len())?;
                    }
                }
            }
        }
        match cmp_end(ia, ib) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    budget.check("refined cells", parents.len())?;
    Ok((Flat { pieces, ncells: parents.len() }, parents))
}

impl Partition {
    /// Validates disjointness and coverage of `[0,1]` up to finitely many
    /// points, then sorts cells canonically. Empty cells are rejected.
    pub fn new(cells: Vec<Cell>) -> Result<Self, Error> {
        if cells.is_empty() {
            return Err(Error::Domain("a partition needs at least one cell".into()));
        }
        if cells.iter().any(|c| c.set.is_empty()) {
            return Err(Error::Domain("partition cells must be nonempty".into()));
        }
        let unit = Interval::unit();
        let mut all: Vec<&Interval> = cells.iter().flat_map(|c| c.set.components()).collect();
        all.sort_by(|a, b| cmp_start(a, b));
        for iv in &all {
            if iv.intersect(&unit).as_ref() != Some(*iv) {
                return Err(Error::Domain(format!("cell component {iv} leaves [0,1]")));
            }
        }
        if all.windows(2).any(|w| !w[0].entirely_before(w[1])) {
            return Err(Error::Domain("partition cells overlap".into()));
        }
        let total: Rational = all.iter().map(|c| c.length()).sum();
        if !total.is_one() {
            return Err(Error::Domain("partition cells do not cover [0,1] up to finitely many points".into()));
        }
        let mut cells = cells;
        cells.sort_by(|a, b| cmp_start(&a.set.components()[0], &b.set.components()[0]));
        Ok(Partition { cells })
    }

    /// Internal constructor for cells known to be valid and canonical.
    fn from_sorted(cells: Vec<Cell>) -> Self {
        Partition { cells }
    }

    pub fn trivial() -> Self {
        Self::from_sorted(vec![Cell { name: "X".into(), set: IntervalSet::unit() }])
    }

    /// `k` equal half-open intervals (the last one closed at 1), named
    /// `0, …, k-1`.
    pub fn uniform(k: u32) -> Self {
        let k = k.max(1) as i64;
        let cells = (0..k)
            .map(|j| {
                let iv = Interval::raw(q(j, k), q(j + 1, k), true, j + 1 == k);
                Cell { name: j.to_string(), set: IntervalSet::from_interval(iv) }
            })
            .collect();
        Self::from_sorted(cells)
    }

    /// Partition by the `i`-th binary digit (`i = 0` is the first digit):
    /// cell `0` collects `[2j/2^(i+1), (2j+1)/2^(i+1))`.
    pub fn binary_digit(i: u32) -> Self {
        let half = 1i64 << i;
        let den = 2 * half;
        let mut zero = Vec::with_capacity(half as usize);
        let mut one = Vec::with_capacity(half as usize);
        for j in 0..half {
            zero.push(Interval::raw(q(2 * j, den), q(2 * j + 1, den), true, false));
            one.push(Interval::raw(q(2 * j + 1, den), q(2 * j + 2, den), true, j + 1 == half));
        }
        Self::from_sorted(vec![
            Cell { name: "0".into(), set: IntervalSet::merge_sorted(zero) },
            Cell { name: "1".into(), set: IntervalSet::merge_sorted(one) },
        ])
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Exact masses of the cells, in cell order.
    pub fn masses(&self, mu: &PwConstMeasure) -> Vec<Rational> {
        self.cells.iter().map(|c| mu.mass_of(&c.set)).collect()
    }

    pub(crate) fn flat(&self) -> Flat {
        let mut pieces: Vec<(Interval, u32)> = self
            .cells
            .iter()
            .enumerate()
            .flat_map(|(l, c)| c.set.components().iter().map(move |iv| (iv.clone(), l as u32)))
            .collect();
        pieces.sort_by(|a, b| cmp_start(&a.0, &b.0));
        Flat { pieces, ncells: self.cells.len() }
    }

    /// Rebuilds named cells from a flat form whose labels are already in
    /// canonical order.
    pub(crate) fn from_flat(flat: Flat, names: Vec<String>) -> Self {
        let mut groups: Vec<Vec<Interval>> = vec![Vec::new(); flat.ncells];
        for (iv, l) in flat.pieces {
            groups[l as usize].push(iv);
        }
        let cells = groups
            .into_iter()
            .zip(names)
            .map(|(ivs, name)| Cell { name, set: IntervalSet::merge_sorted(ivs) })
            .collect();
        Self::from_sorted(cells)
    }

    /// Common refinement `self ∨ other`; cell `a∧b` is named `a&b`.
    pub fn refine(&self, other: &Partition, budget: Budget) -> Result<Partition, Error> {
        let (flat, parents) = refine_flat(&self.flat(), &other.flat(), budget)?;
        let names = parents
            .iter()
            .map(|&(a, b)| format!("{}&{}", self.cells[a as usize].name, other.cells[b as usize].name))
            .collect();
        Ok(Self::from_flat(flat, names))
    }

    /// Preimage partition under `map`, dropping empty preimages.
    pub fn preimage(&self, map: &crate::map::PwAffineMap) -> Partition {
        let (flat, old) = self.flat().pullback(map).compact();
        let names = old.iter().map(|&l| self.cells[l as usize].name.clone()).collect();
        Self::from_flat(flat, names)
    }

    /// True iff every cell of `coarse` is a union of cells of `self`, up to
    /// finitely many points.
    pub fn is_refined_by_check(&self, coarse: &Partition) -> bool {
        coarsen_check(self, coarse)
    }

    /// Same cells up to finitely many points (names ignored).
    pub fn equal_mod_zero(&self, other: &Partition) -> bool {
        coarsen_check(self, other) && coarsen_check(other, self)
    }

    /// Same cells exactly (names ignored).
    pub fn same_cells(&self, other: &Partition) -> bool {
        self.cells.len() == other.cells.len()
            && self.cells.iter().zip(&other.cells).all(|(a, b)| a.set == b.set)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", c.name, c.set)?;
        }
        Ok(())
    }
}

/// True iff every `q`-cell is a union of `p`-cells modulo finite point sets.
pub fn coarsen_check(p: &Partition, q: &Partition) -> bool {
    let (pf, qf) = (p.flat(), q.flat());
    let mut owner: Vec<Option<u32>> = vec![None; pf.ncells];
    let (mut i, mut j) = (0, 0);
    while i < pf.pieces.len() && j < qf.pieces.len() {
        let (ia, la) = &pf.pieces[i];
        let (ib, lb) = &qf.pieces[j];
        if let Some(iv) = ia.intersect(ib) {
            if iv.lo < iv.hi {
                match owner[*la as usize] {
                    Some(o) if o != *lb => return false,
                    _ => owner[*la as usize] = Some(*lb),
                }
            }
        }
        match cmp_end(ia, ib) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    true
}

/// `f_i^{-j} P`, computed by pulling back one map at a time.
pub fn pullback_partition(sys: &NdSystem, i: u64, j: u64, p: &Partition) -> Result<Partition, Error> {
    let mut flat = p.flat();
    for k in (0..j).rev() {
        flat = flat.pullback(&*sys.map_at(i + k)?);
    }
    let (flat, old) = flat.compact();
    let names = old.iter().map(|&l| p.cells[l as usize].name.clone()).collect();
    Ok(Partition::from_flat(flat, names))
}

/// Flat form of `P_i^n = ∨_{j<n} f_i^{-j} P_{i+j}` by the backward recursion
/// `P_i^n = P_i ∨ f_i^{-1} P_{i+1}^{n-1}`. `parents[k]` holds, for each label
/// at depth `k`, its (cell of `P_{i+k}`, label at depth `k+1`) pair.
pub(crate) fn joined_flat(
    sys: &NdSystem,
    seq: &PartitionSequence,
    i: u64,
    n: u64,
    budget: Budget,
    keep_parents: bool,
) -> Result<(Flat, Vec<Vec<(u32, u32)>>), Error> {
    if n == 0 {
        return Err(Error::Usage("joined partition needs n >= 1".into()));
    }
    let mut flat = seq.at(i + n - 1)?.flat();
    let mut parents = Vec::new();
    for k in (0..n - 1).rev() {
        let pulled = flat.pullback(&*sys.map_at(i + k)?);
        let (next, par) = refine_flat(&seq.at(i + k)?.flat(), &pulled, budget)?;
        flat = next;
        if keep_parents {
            parents.push(par);
        }
    }
    parents.reverse();
    Ok((flat, parents))
}

/// `P_i^n`, with cells named by itinerary `a.b.c…`.
pub fn joined_partition(
    sys: &NdSystem,
    seq: &PartitionSequence,
    i: u64,
    n: u64,
    budget: Budget,
) -> Result<Partition, Error> {
    let (flat, parents) = joined_flat(sys, seq, i, n, budget, true)?;
    let last = seq.at(i + n - 1)?;
    let mut names: Vec<String> = last.cells.iter().map(|c| c.name.clone()).collect();
    for k in (0..parents.len()).rev() {
        let base = seq.at(i + k as u64)?;
        names = parents[k]
            .iter()
            .map(|&(a, b)| format!("{}.{}", base.cells[a as usize].name, names[b as usize]))
            .collect();
    }
    Ok(Partition::from_flat(flat, names))
}

/// Exact `μ`-masses of the cells of `P_i^n`, in canonical cell order.
pub fn joined_masses(
    sys: &NdSystem,
    seq: &PartitionSequence,
    mu: &PwConstMeasure,
    i: u64,
    n: u64,
    budget: Budget,
) -> Result<Vec<Rational>, Error> {
    let (flat, _) = joined_flat(sys, seq, i, n, budget, false)?;
    Ok(flat.masses(mu))
}

type Generator = Arc<dyn Fn(u64) -> Partition + Send + Sync>;

#[derive(Clone)]
enum SeqKind {
    Constant(Arc<Partition>),
    Periodic(Vec<Arc<Partition>>),
    BinaryDigits,
    AxiomC { system: NdSystem, base: Box<PartitionSequence>, m: u64, budget: Budget },
    Restricted { base: Box<PartitionSequence>, m: u64 },
    Programmatic { generator: Generator, bound: usize },
}

/// `P_∞ = (P_n)`, with a certified bound on `#P_n`.
#[derive(Clone)]
pub struct PartitionSequence {
    id: String,
    kind: SeqKind,
}

impl fmt::Debug for PartitionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartitionSequence")
            .field("id", &self.id)
            .field("bound", &self.cardinality_bound())
            .finish()
    }
}

impl PartitionSequence {
    pub fn constant(id: impl Into<String>, p: Partition) -> Self {
        PartitionSequence { id: id.into(), kind: SeqKind::Constant(Arc::new(p)) }
    }

    pub fn periodic(id: impl Into<String>, ps: Vec<Partition>) -> Result<Self, Error> {
        if ps.is_empty() {
            return Err(Error::Usage("periodic partition sequence needs a partition".into()));
        }
        Ok(PartitionSequence {
            id: id.into(),
            kind: SeqKind::Periodic(ps.into_iter().map(Arc::new).collect()),
        })
    }

    /// `P_i` = partition by the `i`-th binary digit.
    pub fn binary_digits() -> Self {
        PartitionSequence { id: "digits".into(), kind: SeqKind::BinaryDigits }
    }

    /// A sequence given by a function; `bound` must dominate every `#P_n`
    /// and is checked on each materialized term.
    pub fn programmatic<F>(id: impl Into<String>, bound: usize, f: F) -> Self
    where
        F: Fn(u64) -> Partition + Send + Sync + 'static,
    {
        PartitionSequence { id: id.into(), kind: SeqKind::Programmatic { generator: Arc::new(f), bound } }
    }

    /// `P_n^{<m>} = ∨_{i<m} f_n^{-i} P_{n+i}`.
    pub fn axiom_c_power(&self, sys: &NdSystem, m: u64, budget: Budget) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::Usage("Axiom-C power needs m >= 1".into()));
        }
        if m == 1 {
            return Ok(self.clone());
        }
        Ok(PartitionSequence {
            id: format!("{}<{m}>", self.id),
            kind: SeqKind::AxiomC { system: sys.clone(), base: Box::new(self.clone()), m, budget },
        })
    }

    /// `(P_{nm})_n`, the sequence seen by the `m`-th power system.
    pub fn restrict(&self, m: u64) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::Usage("restriction needs m >= 1".into()));
        }
        if m == 1 {
            return Ok(self.clone());
        }
        Ok(PartitionSequence {
            id: format!("{}[{m}]", self.id),
            kind: SeqKind::Restricted { base: Box::new(self.clone()), m },
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn at(&self, n: u64) -> Result<Arc<Partition>, Error> {
        match &self.kind {
            SeqKind::Constant(p) => Ok(p.clone()),
            SeqKind::Periodic(ps) => Ok(ps[(n % ps.len() as u64) as usize].clone()),
            SeqKind::BinaryDigits => {
                if n > 40 {
                    return Err(Error::Budget { what: format!("binary digit {n}"), limit: 40 });
                }
                Ok(Arc::new(Partition::binary_digit(n as u32)))
            }
            SeqKind::AxiomC { system, base, m, budget } => {
                Ok(Arc::new(joined_partition(system, base, n, *m, *budget)?))
            }
            SeqKind::Restricted { base, m } => base.at(n * m),
            SeqKind::Programmatic { generator, bound } => {
                let p = generator(n);
                if p.len() > *bound {
                    return Err(Error::Domain(format!(
                        "{}: #P_{n} = {} exceeds the declared bound {bound}",
                        self.id,
                        p.len()
                    )));
                }
                Ok(Arc::new(p))
            }
        }
    }

    /// `N` with `#P_n ≤ N` for every `n`.
    pub fn cardinality_bound(&self) -> usize {
        match &self.kind {
            SeqKind::Constant(p) => p.len(),
            SeqKind::Periodic(ps) => ps.iter().map(|p| p.len()).max().unwrap_or(1),
            SeqKind::BinaryDigits => 2,
            SeqKind::AxiomC { base, m, .. } => {
                base.cardinality_bound().saturating_pow((*m).min(u32::MAX as u64) as u32)
            }
            SeqKind::Restricted { base, .. } => base.cardinality_bound(),
            SeqKind::Programmatic { bound, .. } => *bound,
        }
    }

    /// True for a constant sequence.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, SeqKind::Constant(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::PwAffineMap;
    use crate::system::Space;

    fn doubling() -> NdSystem {
        NdSystem::constant("doubling", Space::Circle, "d", PwAffineMap::times_mod_one(2))
    }

    #[test]
    fn halves_join_thirds() {
        let r = Partition::uniform(2).refine(&Partition::uniform(3), Budget::default()).unwrap();
        let m = r.masses(&PwConstMeasure::lebesgue());
        assert_eq!(m, vec![q(1, 3), q(1, 6), q(1, 6), q(1, 3)]);
    }

    #[test]
    fn idempotent_and_trivial_refinement() {
        let p = Partition::uniform(3);
        assert!(p.refine(&p, Budget::default()).unwrap().same_cells(&p));
        assert!(p.refine(&Partition::trivial(), Budget::default()).unwrap().same_cells(&p));
    }

    #[test]
    fn validation() {
        let c = |name: &str, s: &str| Cell {
            name: name.into(),
            set: IntervalSet::from_interval(s.parse().unwrap()),
        };
        assert!(Partition::new(vec![c("a", "[0,1/2)"), c("b", "[1/2,1]")]).is_ok());
        // Missing a single point is allowed.
        assert!(Partition::new(vec![c("a", "[0,1/2)"), c("b", "(1/2,1]")]).is_ok());
        assert!(Partition::new(vec![c("a", "[0,1/2]"), c("b", "[1/2,1]")]).is_err());
        assert!(Partition::new(vec![c("a", "[0,1/2)"), c("b", "[2/3,1]")]).is_err());
        assert!(Partition::new(vec![]).is_err());
    }

    #[test]
    fn pullback_thirds_under_doubling() {
        let p = pullback_partition(&doubling(), 0, 1, &Partition::uniform(3)).unwrap();
        assert_eq!(p.len(), 3);
        let l = PwConstMeasure::lebesgue();
        assert!(p.masses(&l).iter().all(|m| *m == q(1, 3)));
        assert!(p.cells().iter().all(|c| c.set.components().len() == 2));
        let p0 = pullback_partition(&doubling(), 0, 0, &Partition::uniform(3)).unwrap();
        assert!(p0.same_cells(&Partition::uniform(3)));
    }

    #[test]
    fn dyadic_join() {
        let seq = PartitionSequence::constant("halves", Partition::uniform(2));
        for n in 1..=6u64 {
            let p = joined_partition(&doubling(), &seq, 0, n, Budget::default()).unwrap();
            assert!(p.same_cells(&Partition::uniform(1 << n)), "n = {n}");
        }
        let p = joined_partition(&doubling(), &seq, 0, 3, Budget::default()).unwrap();
        assert_eq!(p.cells()[1].name, "0.0.1");
    }

    #[test]
    fn coarsening() {
        let quarters = Partition::uniform(4);
        let halves = Partition::uniform(2);
        let thirds = Partition::uniform(3);
        assert!(coarsen_check(&quarters, &halves));
        assert!(!coarsen_check(&halves, &thirds));
        let hv = halves.refine(&thirds, Budget::default()).unwrap();
        assert!(coarsen_check(&hv, &thirds));
        assert!(quarters.equal_mod_zero(&Partition::binary_digit(0).refine(&Partition::binary_digit(1), Budget::default()).unwrap()));
    }

    #[test]
    fn axiom_c_power_of_halves_is_quarters() {
        let seq = PartitionSequence::constant("halves", Partition::uniform(2));
        let p2 = seq.axiom_c_power(&doubling(), 2, Budget::default()).unwrap();
        assert_eq!(p2.cardinality_bound(), 4);
        for n in 0..3 {
            assert!(p2.at(n).unwrap().same_cells(&Partition::uniform(4)));
        }
    }

    #[test]
    fn digits_join_to_dyadic() {
        let id = NdSystem::constant("identity", Space::Interval, "id", PwAffineMap::identity());
        let seq = PartitionSequence::binary_digits();
        let p = joined_partition(&id, &seq, 0, 5, Budget::default()).unwrap();
        assert!(p.same_cells(&Partition::uniform(32)));
    }

    #[test]
    fn budget_is_enforced() {
        let seq = PartitionSequence::constant("halves", Partition::uniform(2));
        let r = joined_partition(&doubling(), &seq, 0, 8, Budget { cells: 100 });
        assert!(matches!(r, Err(Error::Budget { .. })));
    }

    #[test]
    fn json_round_trip() {
        let p = Partition::uniform(3);
        let s = serde_json::to_string(&p).unwrap();
        let back: Partition = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Partition>(r#"{"cells":[{"name":"a","set":["[0,1/2)"]}]}"#).is_err());
    }
}
