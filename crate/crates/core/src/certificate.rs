//! Separated-core certificates for partition sequences.
//!
//! For every `n` and every cell `P_{n,i}` a compact core `K_{n,i} ⊂ P_{n,i}`
//! is built by shrinking every component of the cell by a common margin `r`,
//! the largest one whose `μ_n`-mass loss stays within `ε`. The certificate
//! records the smallest distance `δ_n` between cores of different cells.
//!
//! A finite horizon cannot show that `δ_n` stays bounded away from zero, so
//! the verdict also rejects sequences whose gaps visibly decay: it fails at
//! the first `n` with `δ_n < δ*_{⌊n/2⌋} / 2`, where `δ*_m` is the minimum gap
//! up to time `m`. Geometric decay is caught after a few steps while bounded
//! sequences (constant, eventually periodic, or converging gaps) pass.

use serde::Serialize;

use num_traits::{Signed, Zero};

use crate::interval::{Interval, IntervalSet};
use crate::measure::{MeasureSequence, PwConstMeasure};
use crate::partition::{Partition, PartitionSequence};
use crate::rational::{self, format_rational, qi, Rational};
use crate::system::Space;
use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail { n: u64, cells: (String, String), reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub n: u64,
    /// Margin per cell, in cell order; `None` when the whole cell may be
    /// discarded (`μ_n(P) ≤ ε`).
    #[serde(serialize_with = "ser_margins")]
    pub margins: Vec<Option<Rational>>,
    /// `δ_n`; `None` when fewer than two cells have cores.
    #[serde(serialize_with = "ser_opt")]
    pub gap: Option<Rational>,
    /// Cells realizing `δ_n`.
    pub closest: Option<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MisiurewiczCertificate {
    #[serde(with = "rational::serde_str")]
    pub epsilon: Rational,
    /// `min_n δ_n` over the evaluated steps (zero if some cell admits no core).
    #[serde(with = "rational::serde_str")]
    pub delta: Rational,
    pub horizon: u64,
    pub verdict: Verdict,
    pub steps: Vec<StepReport>,
}

fn ser_opt<S: serde::Serializer>(x: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&format_rational(v)),
        None => s.serialize_none(),
    }
}

fn ser_margins<S: serde::Serializer>(xs: &[Option<Rational>], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&x.as_ref().map(format_rational))?;
    }
    seq.end()
}

/// Closed core of one component for margin `r`, if nonempty.
fn shrink(c: &Interval, r: &Rational) -> Option<Interval> {
    let lo = &c.lo + r;
    let hi = &c.hi - r;
    (lo <= hi).then(|| Interval::closed(lo, hi))
}

/// Core of a cell for margin `r`.
pub fn core(cell: &IntervalSet, r: &Rational) -> IntervalSet {
    IntervalSet::from_intervals(cell.components().iter().filter_map(|c| shrink(c, r)).collect())
}

/// `μ(P) - μ(core(P, r))`.
fn loss(mu: &PwConstMeasure, cell: &IntervalSet, total: &Rational, r: &Rational) -> Rational {
    let kept: Rational = cell.components().iter().filter_map(|c| shrink(c, r)).map(|k| mu.mass(&k)).sum();
    total - kept
}

/// Largest `r > 0` with `loss(r) ≤ ε`, or `None` if every positive margin
/// loses more than `ε`.
///
/// `loss` is nondecreasing and left-continuous in `r`, affine between the
/// candidate points collected below, and jumps only where an atom leaves a
/// core; the maximum is found exactly on the last admissible segment.
fn max_margin(mu: &PwConstMeasure, cell: &IntervalSet, eps: &Rational) -> Option<Rational> {
    let total = mu.mass_of(cell);
    let two = qi(2);
    let mut cands: Vec<Rational> = Vec::new();
    for c in cell.components() {
        let half = (&c.hi - &c.lo) / &two;
        let inside = |x: &Rational| *x > c.lo && *x < c.hi;
        for b in mu.breakpoints().iter().filter(|b| inside(b)) {
            cands.push(b - &c.lo);
            cands.push(&c.hi - b);
        }
        for (p, _) in mu.atoms().iter().filter(|(p, _)| inside(p)) {
            cands.push(p - &c.lo);
            cands.push(&c.hi - p);
        }
        cands.push(half);
    }
    cands.retain(|r| r.is_positive());
    cands.sort();
    cands.dedup();
    let lossf = |r: &Rational| loss(mu, cell, &total, r);
    // Last candidate with loss ≤ ε (index into `cands`), or none.
    let mut k: Option<usize> = None;
    for (i, r) in cands.iter().enumerate() {
        if lossf(r) <= *eps {
            k = Some(i);
        } else {
            break;
        }
    }
    let lo = k.map_or_else(Rational::zero, |i| cands[i].clone());
    let Some(hi) = cands.get(k.map_or(0, |i| i + 1)).cloned() else {
        // Every candidate is admissible; the largest one empties all cores
        // but possibly midpoints.
        return k.map(|i| cands[i].clone());
    };
    let mid = (&lo + &hi) / &two;
    let (l_mid, l_hi) = (lossf(&mid), lossf(&hi));
    let slope = (&l_hi - &l_mid) / (&hi - &mid);
    let l_lo_plus = &l_mid - &slope * (&mid - &lo);
    if l_lo_plus > *eps || slope.is_zero() {
        return k.map(|i| cands[i].clone());
    }
    Some(&lo + (eps - &l_lo_plus) / slope)
}

/// Minimal gap between cores of different cells, with the realizing pair of
/// cell indices. The circle adds the wrap-around gap.
fn min_gap(cores: &[(usize, IntervalSet)], space: Space) -> Option<(Rational, usize, usize)> {
    let mut all: Vec<(&Interval, usize)> =
        cores.iter().flat_map(|(i, s)| s.components().iter().map(move |c| (c, *i))).collect();
    all.sort_by(|a, b| a.0.lo.cmp(&b.0.lo));
    let mut best: Option<(Rational, usize, usize)> = None;
    let mut consider = |g: Rational, a: usize, b: usize| {
        if best.as_ref().is_none_or(|(bg, _, _)| g < *bg) {
            best = Some((g, a, b));
        }
    };
    for w in all.windows(2) {
        if w[0].1 != w[1].1 {
            consider(&w[1].0.lo - &w[0].0.hi, w[0].1, w[1].1);
        }
    }
    if space == Space::Circle && all.len() >= 2 {
        let (first, last) = (&all[0], &all[all.len() - 1]);
        if first.1 != last.1 {
            consider(qi(1) - &last.0.hi + &first.0.lo, last.1, first.1);
        }
    }
    best
}

fn step(n: u64, mu: &PwConstMeasure, p: &Partition, eps: &Rational, space: Space) -> Result<StepReport, (StepReport, usize)> {
    let mut margins = Vec::with_capacity(p.len());
    let mut cores = Vec::new();
    let mut missing = None;
    for (i, cell) in p.cells().iter().enumerate() {
        if mu.mass_of(&cell.set) <= *eps {
            margins.push(None);
            continue;
        }
        match max_margin(mu, &cell.set, eps) {
            Some(r) => {
                cores.push((i, core(&cell.set, &r)));
                margins.push(Some(r));
            }
            None => {
                margins.push(Some(Rational::zero()));
                missing.get_or_insert(i);
            }
        }
    }
    let gap = min_gap(&cores, space);
    let report = StepReport {
        n,
        margins,
        gap: gap.as_ref().map(|g| g.0.clone()),
        closest: gap.map(|(_, a, b)| (p.cells()[a].name.clone(), p.cells()[b].name.clone())),
    };
    match missing {
        Some(i) => Err((report, i)),
        None => Ok(report),
    }
}

/// Builds cores for `n = 0, …, horizon` and decides the verdict. Stops at
/// the first failing step.
pub fn misiurewicz_certificate(
    ims: &MeasureSequence,
    seq: &PartitionSequence,
    eps: &Rational,
    horizon: u64,
) -> Result<MisiurewiczCertificate, Error> {
    if !eps.is_positive() {
        return Err(Error::Usage("certificate needs ε > 0".into()));
    }
    let space = ims.system().space();
    let mut steps = Vec::with_capacity(horizon as usize + 1);
    let mut verdict = Verdict::Pass;
    // prefix_min[m] = min_{j ≤ m} δ_j over steps with a gap.
    let mut prefix_min: Vec<Option<Rational>> = Vec::with_capacity(horizon as usize + 1);
    for n in 0..=horizon {
        let mu = ims.at(n)?;
        let p = seq.at(n)?;
        let report = match step(n, &mu, &p, eps, space) {
            Ok(r) => r,
            Err((r, i)) => {
                if verdict == Verdict::Pass {
                    let name = p.cells()[i].name.clone();
                    verdict = Verdict::Fail {
                        n,
                        cells: (name.clone(), name),
                        reason: "no positive margin keeps the mass loss within ε".into(),
                    };
                }
                r
            }
        };
        if verdict == Verdict::Pass {
            if let Some(g) = &report.gap {
                let pair = report.closest.clone().expect("gap has a pair");
                if !g.is_positive() {
                    verdict = Verdict::Fail { n, cells: pair, reason: "cores touch".into() };
                } else if let Some(Some(reference)) = prefix_min.get((n / 2) as usize) {
                    if n > 0 && g * qi(2) < *reference {
                        verdict = Verdict::Fail {
                            n,
                            cells: pair,
                            reason: format!(
                                "gap {} fell below half of the earlier minimum {}",
                                format_rational(g),
                                format_rational(reference)
                            ),
                        };
                    }
                }
            }
        }
        let prev = prefix_min.last().cloned().flatten();
        prefix_min.push(match (prev, &report.gap) {
            (Some(a), Some(b)) => Some(if *b < a { b.clone() } else { a }),
            (a, b) => a.or_else(|| b.clone()),
        });
        steps.push(report);
        if verdict != Verdict::Pass {
            break;
        }
    }
    let delta = if steps.iter().any(|s| s.margins.iter().any(|m| m.as_ref().is_some_and(Zero::is_zero))) {
        Rational::zero()
    } else {
        prefix_min.last().cloned().flatten().unwrap_or_else(|| qi(1))
    };
    Ok(MisiurewiczCertificate { epsilon: eps.clone(), delta, horizon, verdict, steps })
}

impl MisiurewiczCertificate {
    /// Recomputes every core from the recorded margins and checks
    /// `K ⊂ P`, `μ_n(P \ K) ≤ ε`, and pairwise distances `≥ δ`.
    pub fn verify(&self, ims: &MeasureSequence, seq: &PartitionSequence) -> Result<bool, Error> {
        if self.verdict != Verdict::Pass {
            return Ok(false);
        }
        let space = ims.system().space();
        for s in &self.steps {
            let mu = ims.at(s.n)?;
            let p = seq.at(s.n)?;
            let mut cores = Vec::new();
            for (i, (cell, margin)) in p.cells().iter().zip(&s.margins).enumerate() {
                let k = match margin {
                    None => IntervalSet::empty(),
                    Some(r) => {
                        if !r.is_positive() {
                            return Ok(false);
                        }
                        core(&cell.set, r)
                    }
                };
                if k.intersection(&cell.set) != k {
                    return Ok(false);
                }
                if mu.mass_of(&cell.set) - mu.mass_of(&k) > self.epsilon {
                    return Ok(false);
                }
                if !k.is_empty() {
                    cores.push((i, k));
                }
            }
            // Brute-force pairwise distances.
            for (a, (ia, ka)) in cores.iter().enumerate() {
                for (ib, kb) in cores.iter().skip(a + 1).map(|(i, k)| (i, k)) {
                    if ia == ib {
                        continue;
                    }
                    for x in ka.components() {
                        for y in kb.components() {
                            let d = set_distance(x, y, space);
                            if d < self.delta {
                                return Ok(false);
                            }
                        }
                    }
                }
            }
        }
        Ok(true)
    }
}

fn set_distance(a: &Interval, b: &Interval, space: Space) -> Rational {
    let g = a.gap(b);
    match space {
        Space::Interval => g,
        Space::Circle => {
            let wrap = if a.lo <= b.lo {
                qi(1) - &b.hi + &a.lo
            } else {
                qi(1) - &a.hi + &b.lo
            };
            if wrap < g {
                wrap
            } else {
                g
            }
        }
    }
}
