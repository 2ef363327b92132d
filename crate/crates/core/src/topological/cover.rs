//! Open-cover refinement counts and Lebesgue numbers.
//!
//! Cover elements are open intervals `(a, b)` of the real line, read relative
//! to the space: on `[0,1]` an element is `(a,b) ∩ [0,1]`; on the circle it
//! is the arc it wraps onto. The refined cover `U_0^n` is finite, and its
//! minimal subcover is found exactly by reducing to set cover over the
//! elementary pieces ("atoms") cut out by all element endpoints.

use std::collections::{HashMap, HashSet};

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::interval::{Interval, IntervalSet};
use crate::rational::{qi, to_f64, Rational};
use crate::system::{NdSystem, Space};
use crate::{Budget, Error};

#[derive(Clone, Debug, PartialEq)]
enum CoverKind {
    Constant(Vec<Interval>),
    Periodic(Vec<Vec<Interval>>),
}

/// `U_∞ = (U_n)`, each `U_n` a finite list of open intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverSequence {
    id: String,
    kind: CoverKind,
}

fn check_open(cover: &[Interval]) -> Result<(), Error> {
    if cover.is_empty() {
        return Err(Error::Usage("a cover needs at least one element".into()));
    }
    if cover.iter().any(|c| c.lo_closed || c.hi_closed || c.lo >= c.hi) {
        return Err(Error::Usage("cover elements must be nonempty open intervals".into()));
    }
    lebesgue_number(cover).map(|_| ())
}

impl CoverSequence {
    pub fn constant(id: impl Into<String>, cover: Vec<Interval>) -> Result<Self, Error> {
        check_open(&cover)?;
        Ok(CoverSequence { id: id.into(), kind: CoverKind::Constant(cover) })
    }

    pub fn periodic(id: impl Into<String>, covers: Vec<Vec<Interval>>) -> Result<Self, Error> {
        if covers.is_empty() {
            return Err(Error::Usage("periodic cover sequence needs a cover".into()));
        }
        covers.iter().try_for_each(|c| check_open(c))?;
        Ok(CoverSequence { id: id.into(), kind: CoverKind::Periodic(covers) })
    }

    /// `{(-δ, 1/2+δ), (1/2-δ, 1+δ)}`.
    pub fn near_halves(delta: &Rational) -> Result<Self, Error> {
        let half = qi(1) / qi(2);
        Self::constant(
            "near-halves",
            vec![
                Interval::open(-delta.clone(), &half + delta),
                Interval::open(&half - delta, qi(1) + delta),
            ],
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn at(&self, n: u64) -> &[Interval] {
        match &self.kind {
            CoverKind::Constant(c) => c,
            CoverKind::Periodic(cs) => &cs[(n % cs.len() as u64) as usize],
        }
    }

    /// Lebesgue number of `U_n`.
    pub fn lebesgue_at(&self, n: u64) -> Rational {
        lebesgue_number(self.at(n)).expect("validated at construction")
    }
}

/// Largest `δ` such that every subinterval of `[0,1]` of length `δ` lies in
/// one element; capped at 1.
///
/// With `R(t) = max{b : a < t}`, a window `[t, t+δ]` fits iff `t + δ < R(t)`
/// (or the window ends at 1 and `R(t) > 1`). `R(t) - t` only decreases between
/// consecutive left endpoints, so the infimum is taken just before each one.
pub fn lebesgue_number(cover: &[Interval]) -> Result<Rational, Error> {
    let one = qi(1);
    let mut lows: Vec<&Rational> = cover.iter().map(|c| &c.lo).filter(|a| a.is_positive() && **a <= one).collect();
    lows.sort();
    lows.dedup();
    let reach = |t: &Rational| cover.iter().filter(|c| c.lo < *t).map(|c| &c.hi).max().cloned();
    let mut best = one.clone();
    let mut probes: Vec<Rational> = vec![Rational::zero()];
    probes.extend(lows.into_iter().cloned());
    probes.push(one.clone());
    for t in &probes {
        // Left limit at t: elements starting strictly before t. At t = 0 we
        // need an element containing 0 itself, i.e. starting below 0.
        let r = if t.is_zero() {
            cover.iter().filter(|c| c.lo.is_negative()).map(|c| &c.hi).max().cloned()
        } else {
            reach(t)
        };
        let Some(r) = r else {
            return Err(Error::Usage(format!("cover misses the point {}", crate::rational::format_rational(t))));
        };
        if r <= *t {
            return Err(Error::Usage(format!("cover misses the point {}", crate::rational::format_rational(t))));
        }
        if *t == one {
            continue;
        }
        if r <= one {
            let v = &r - t;
            if v < best {
                best = v;
            }
        }
    }
    Ok(best)
}

fn element_set(iv: &Interval, space: Space) -> IntervalSet {
    let unit = Interval::unit();
    match space {
        Space::Interval => iv.intersect(&unit).map_or_else(IntervalSet::empty, IntervalSet::from_interval),
        Space::Circle => {
            let mut parts = Vec::new();
            for k in -2..=2i64 {
                let shifted = Interval::open(&iv.lo + qi(k), &iv.hi + qi(k));
                if let Some(p) = shifted.intersect(&unit) {
                    parts.push(p);
                }
            }
            let mut set = IntervalSet::from_intervals(parts);
            // 0 and 1 are the same point.
            let (has0, has1) = (set.contains(&qi(0)), set.contains(&qi(1)));
            if has0 != has1 {
                set = set.union(&IntervalSet::from_interval(Interval::point(qi(if has0 { 1 } else { 0 }))));
            }
            set
        }
    }
}

fn is_subset(a: &IntervalSet, b: &IntervalSet) -> bool {
    a.intersection(b) == *a
}

/// Drops duplicates and elements contained in another element. Minimal
/// subcover sizes are unchanged.
fn prune_dominated(mut sets: Vec<IntervalSet>) -> Vec<IntervalSet> {
    let mut seen = HashSet::new();
    sets.retain(|s| !s.is_empty() && seen.insert(format!("{s}")));
    let hull = |s: &IntervalSet| {
        let c = s.components();
        (to_f64(&c[0].lo), to_f64(&c[c.len() - 1].hi))
    };
    let hulls: Vec<(f64, f64)> = sets.iter().map(hull).collect();
    let lengths: Vec<Rational> = sets.iter().map(IntervalSet::length).collect();
    let mut keep = vec![true; sets.len()];
    for i in 0..sets.len() {
        for j in 0..sets.len() {
            if i == j || !keep[j] {
                continue;
            }
            // Cheap hull filter (with slack for rounding) before the exact test.
            let (hi_, hj) = (hulls[i], hulls[j]);
            if hj.0 > hi_.0 + 1e-12 || hj.1 < hi_.1 - 1e-12 || lengths[j] < lengths[i] {
                continue;
            }
            if is_subset(&sets[i], &sets[j]) {
                keep[i] = false;
                break;
            }
        }
    }
    sets.into_iter().zip(keep).filter_map(|(s, k)| k.then_some(s)).collect()
}

/// Elements of the refined cover `∨_{j<n} f_0^{-j} U_j`, with dominated
/// elements removed after every step.
fn refined_elements(sys: &NdSystem, cover: &CoverSequence, n: u64, budget: Budget) -> Result<Vec<IntervalSet>, Error> {
    let space = sys.space();
    let base = |k: u64| -> Vec<IntervalSet> { cover.at(k).iter().map(|c| element_set(c, space)).collect() };
    let mut elems = prune_dominated(base(n - 1));
    for k in (0..n - 1).rev() {
        let f = sys.map_at(k)?;
        let pulled: Vec<IntervalSet> = elems.iter().map(|e| f.preimage(e)).collect();
        let mut next = Vec::with_capacity(pulled.len() * 2);
        for u in base(k) {
            for p in &pulled {
                let s = u.intersection(p);
                if !s.is_empty() {
                    next.push(s);
                }
            }
            budget.check("refined cover elements", next.len())?;
        }
        elems = prune_dominated(next);
    }
    Ok(elems)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetCoverResult {
    /// Proven minimum, if the search finished within its node limit.
    pub exact: Option<usize>,
    pub greedy: usize,
    pub nodes: u64,
}

struct Solver<'a> {
    covers: &'a [Vec<u32>],
    atoms_of: &'a [Vec<u32>],
    best: usize,
    nodes: u64,
    node_limit: u64,
    aborted: bool,
}

impl Solver<'_> {
    /// Lower bound: atoms whose covering sets are pairwise disjoint.
    fn packing_bound(&self, uncovered: &[u32], banned: &[bool]) -> Option<usize> {
        let mut order: Vec<(usize, u32)> = Vec::with_capacity(uncovered.len());
        for &a in uncovered {
            let k = self.covers[a as usize].iter().filter(|&&e| !banned[e as usize]).count();
            if k == 0 {
                return None;
            }
            order.push((k, a));
        }
        order.sort_unstable();
        let mut used: HashSet<u32> = HashSet::new();
        let mut count = 0;
        for (_, a) in order {
            let cov = &self.covers[a as usize];
            if cov.iter().all(|e| banned[*e as usize] || !used.contains(e)) {
                used.extend(cov.iter().copied().filter(|e| !banned[*e as usize]));
                count += 1;
            }
        }
        Some(count)
    }

    fn search(&mut self, covered: &mut Vec<u32>, banned: &mut Vec<bool>, chosen: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.node_limit {
            self.aborted = true;
            return;
        }
        let uncovered: Vec<u32> =
            (0..self.covers.len() as u32).filter(|&a| covered[a as usize] == 0).collect();
        if uncovered.is_empty() {
            self.best = self.best.min(chosen);
            return;
        }
        let Some(lb) = self.packing_bound(&uncovered, banned) else { return };
        if chosen + lb >= self.best {
            return;
        }
        // Branch on the atom with the fewest admissible elements.
        let atom = *uncovered
            .iter()
            .min_by_key(|&&a| self.covers[a as usize].iter().filter(|&&e| !banned[e as usize]).count())
            .expect("nonempty");
        let mut options: Vec<u32> =
            self.covers[atom as usize].iter().copied().filter(|&e| !banned[e as usize]).collect();
        options.sort_by_key(|&e| {
            std::cmp::Reverse(self.atoms_of[e as usize].iter().filter(|&&a| covered[a as usize] == 0).count())
        });
        let mut newly_banned = Vec::new();
        for e in options {
            for &a in &self.atoms_of[e as usize] {
                covered[a as usize] += 1;
            }
            self.search(covered, banned, chosen + 1);
            for &a in &self.atoms_of[e as usize] {
                covered[a as usize] -= 1;
            }
            banned[e as usize] = true;
            newly_banned.push(e);
        }
        for e in newly_banned {
            banned[e as usize] = false;
        }
    }
}

fn greedy_cover(covers: &[Vec<u32>], atoms_of: &[Vec<u32>]) -> Option<usize> {
    let mut covered = vec![false; covers.len()];
    let mut left = covers.len();
    let mut count = 0;
    while left > 0 {
        let (e, gain) = atoms_of
            .iter()
            .enumerate()
            .map(|(e, atoms)| (e, atoms.iter().filter(|&&a| !covered[a as usize]).count()))
            .max_by(|x, y| x.1.cmp(&y.1).then(y.0.cmp(&x.0)))?;
        if gain == 0 {
            return None;
        }
        for &a in &atoms_of[e] {
            if !covered[a as usize] {
                covered[a as usize] = true;
                left -= 1;
            }
        }
        count += 1;
    }
    Some(count)
}

/// Minimum number of sets covering atoms `0..n_atoms`, where `sets[e]`
/// lists the atoms of set `e`.
pub fn min_set_cover(sets: &[Vec<u32>], n_atoms: usize, node_limit: u64) -> Result<SetCoverResult, Error> {
    let mut covers: Vec<Vec<u32>> = vec![Vec::new(); n_atoms];
    for (e, atoms) in sets.iter().enumerate() {
        for &a in atoms {
            covers[a as usize].push(e as u32);
        }
    }
    if covers.iter().any(Vec::is_empty) {
        return Err(Error::Usage("some atom is covered by no set".into()));
    }
    let greedy = greedy_cover(&covers, sets).expect("every atom is coverable");

    // Reductions: forced sets and atoms implied by others.
    let mut forced: Vec<u32> = Vec::new();
    let mut done = vec![false; n_atoms];
    for a in 0..n_atoms {
        if covers[a].len() == 1 && !forced.contains(&covers[a][0]) {
            forced.push(covers[a][0]);
        }
    }
    for &e in &forced {
        for &a in &sets[e as usize] {
            done[a as usize] = true;
        }
    }
    // Atom dominance: if cov(b) ⊆ cov(a), covering b covers a.
    let mut by_cover: HashMap<&[u32], u32> = HashMap::new();
    let mut keep_atom = vec![false; n_atoms];
    for a in 0..n_atoms {
        if !done[a] {
            let entry = by_cover.entry(&covers[a]).or_insert(a as u32);
            keep_atom[*entry as usize] = true;
        }
    }
    let mut reps: Vec<u32> = (0..n_atoms as u32).filter(|&a| keep_atom[a as usize]).collect();
    reps.sort_by_key(|&a| covers[a as usize].len());
    let mut kept: Vec<u32> = Vec::new();
    for &a in &reps {
        let ca = &covers[a as usize];
        let implied = kept.iter().any(|&b| {
            let cb = &covers[b as usize];
            cb.len() <= ca.len() && cb.iter().all(|e| ca.binary_search(e).is_ok())
        });
        if !implied {
            kept.push(a);
        }
    }
    // Reduced instance over the kept atoms.
    let index: HashMap<u32, u32> = kept.iter().enumerate().map(|(i, &a)| (a, i as u32)).collect();
    let red_covers: Vec<Vec<u32>> = kept.iter().map(|&a| covers[a as usize].clone()).collect();
    let mut red_sets: Vec<Vec<u32>> = vec![Vec::new(); sets.len()];
    for (e, atoms) in sets.iter().enumerate() {
        red_sets[e] = atoms.iter().filter_map(|a| index.get(a).copied()).collect();
    }
    let mut solver = Solver {
        covers: &red_covers,
        atoms_of: &red_sets,
        best: 0,
        nodes: 0,
        node_limit,
        aborted: false,
    };
    // Forced sets have no atoms left in the reduced instance, so this cover
    // avoids them.
    let upper = greedy_cover(&red_covers, &red_sets).unwrap_or(0);
    solver.best = upper + 1;
    let mut covered = vec![0u32; kept.len()];
    let mut banned = vec![false; sets.len()];
    for &e in &forced {
        banned[e as usize] = true;
    }
    solver.search(&mut covered, &mut banned, 0);
    let exact = (!solver.aborted).then(|| forced.len() + solver.best.min(upper));
    Ok(SetCoverResult { exact, greedy, nodes: solver.nodes })
}

/// Atoms of `[0,1]` cut out by the element endpoints: every endpoint and
/// every open gap between consecutive endpoints. Returns, per element, the
/// atoms it contains.
fn atomize(elems: &[IntervalSet], space: Space) -> (Vec<Vec<u32>>, usize) {
    let mut cuts: Vec<Rational> = vec![qi(0), qi(1)];
    for e in elems {
        for c in e.components() {
            cuts.push(c.lo.clone());
            cuts.push(c.hi.clone());
        }
    }
    cuts.sort();
    cuts.dedup();
    // Atom 2i is the point cuts[i]; atom 2i+1 is the gap (cuts[i], cuts[i+1]).
    // On the circle the point 1 is the point 0 and is dropped.
    let n_points = cuts.len();
    let n_atoms = 2 * n_points - 1;
    let sets = elems
        .iter()
        .map(|e| {
            let mut atoms = Vec::new();
            for c in e.components() {
                let i = cuts.binary_search(&c.lo).expect("endpoint is a cut");
                let j = cuts.binary_search(&c.hi).expect("endpoint is a cut");
                for a in (2 * i)..=(2 * j) {
                    let inside = if a == 2 * i {
                        c.lo_closed
                    } else if a == 2 * j {
                        c.hi_closed
                    } else {
                        true
                    };
                    if inside {
                        atoms.push(a as u32);
                    }
                }
            }
            if space == Space::Circle {
                let last = (n_atoms - 1) as u32;
                for a in &mut atoms {
                    if *a == last {
                        *a = 0;
                    }
                }
                atoms.sort_unstable();
                atoms.dedup();
            }
            atoms
        })
        .collect();
    (sets, if space == Space::Circle { n_atoms - 1 } else { n_atoms })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverReport {
    pub n: u64,
    /// Elements of `U_0^n` after removing dominated ones.
    pub elements: usize,
    pub atoms: usize,
    /// `N(U_0^n)`, when solved exactly.
    pub exact: Option<usize>,
    pub greedy: usize,
    /// True when only the greedy value is available.
    pub upper_bound_only: bool,
}

/// `N(U_0^n)`, the minimal subcover size of the refined cover.
///
/// Solved exactly while the refined cover has at most `max_elements`
/// elements (and the search stays within its node limit); otherwise only the
/// greedy value is reported.
pub fn cover_refinement_count(
    sys: &NdSystem,
    cover: &CoverSequence,
    n: u64,
    max_elements: usize,
    budget: Budget,
) -> Result<CoverReport, Error> {
    if n == 0 {
        return Err(Error::Usage("n must be at least 1".into()));
    }
    let elems = refined_elements(sys, cover, n, budget)?;
    let (sets, n_atoms) = atomize(&elems, sys.space());
    let node_limit = if elems.len() <= max_elements { 2_000_000 } else { 0 };
    let r = min_set_cover(&sets, n_atoms, node_limit)?;
    let exact = if elems.len() <= max_elements { r.exact } else { None };
    Ok(CoverReport {
        n,
        elements: elems.len(),
        atoms: n_atoms,
        exact,
        greedy: r.greedy,
        upper_bound_only: exact.is_none(),
    })
}
