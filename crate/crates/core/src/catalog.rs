//! Canonical systems, measures and partition sequences.
//!
//! `bo` is a realization of the two-map system where `f` acts at the times
//! `m_n = 2^(n^2)` and `g` everywhere else. `g` is full three-branch chaos on
//! `J = [1/3, 2/3]` and the identity elsewhere; `f` halves `[0, 2/3)` and
//! doubles `[2/3, 1]` away from 1. Outside the regions the entropy argument
//! constrains, the particular branches chosen here are one possible choice and
//! values that depend on them are realization-specific.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::interval::{Interval, IntervalSet};
use crate::map::{AffinePiece, PwAffineMap};
use crate::measure::{MeasureDoc, MeasureSequence, PwConstMeasure};
use crate::partition::{Partition, PartitionSequence};
use crate::rational::{q, qi, serde_str, Rational};
use crate::schedule::{IndexSequence, Schedule};
use crate::system::{NamedMap, NdSystem, Space, SystemDoc};
use crate::Error;

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectationSource {
    /// Stated for the system in the literature.
    Reference,
    /// Follows from a short exact computation (slope products, partial sums).
    Computed,
    /// Immediate from the definitions.
    Elementary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expectation {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub source: ExpectationSource,
    pub note: String,
}

fn expect(name: &str, value: f64, tolerance: f64, source: ExpectationSource, note: &str) -> Expectation {
    Expectation { name: name.into(), value, tolerance, source, note: note.into() }
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub id: String,
    pub system: NdSystem,
    pub initial: PwConstMeasure,
    pub measure_id: String,
    pub partitions: Vec<PartitionSequence>,
    pub default_partition: usize,
    pub expectations: Vec<Expectation>,
}

/// JSON export of an entry.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogDoc {
    pub id: String,
    pub system: SystemDoc,
    pub measure_id: String,
    pub initial: MeasureDoc,
    pub partitions: Vec<String>,
    pub default_partition: String,
    pub expectations: Vec<Expectation>,
}

impl CatalogEntry {
    pub fn default_sequence(&self) -> &PartitionSequence {
        &self.partitions[self.default_partition]
    }

    pub fn partition(&self, id: &str) -> Option<&PartitionSequence> {
        self.partitions.iter().find(|p| p.id() == id)
    }

    pub fn expectation(&self, name: &str) -> Option<&Expectation> {
        self.expectations.iter().find(|e| e.name == name)
    }

    pub fn measure_sequence(&self) -> MeasureSequence {
        MeasureSequence::new(self.system.clone(), self.initial.clone())
    }

    pub fn to_doc(&self) -> CatalogDoc {
        CatalogDoc {
            id: self.id.clone(),
            system: self.system.to_doc(),
            measure_id: self.measure_id.clone(),
            initial: self.initial.to_doc(),
            partitions: self.partitions.iter().map(|p| p.id().to_string()).collect(),
            default_partition: self.default_sequence().id().to_string(),
            expectations: self.expectations.clone(),
        }
    }
}

fn pw(bps: &[Rational], pieces: &[(Rational, Rational)]) -> PwAffineMap {
    PwAffineMap::new(
        bps.to_vec(),
        pieces.iter().map(|(a, b)| AffinePiece::new(a.clone(), b.clone())).collect(),
    )
    .expect("catalog maps are well formed")
}

/// `x/2` on `[0, 2/3)`, `2x - 1` on `[2/3, 1]`.
pub fn bo_f() -> PwAffineMap {
    pw(&[qi(0), q(2, 3), qi(1)], &[(q(1, 2), qi(0)), (qi(2), qi(-1))])
}

/// Identity off `J = [1/3, 2/3]`; on `J` three full branches of slope ±3.
pub fn bo_g() -> PwAffineMap {
    pw(
        &[qi(0), q(1, 3), q(4, 9), q(5, 9), q(2, 3), qi(1)],
        &[
            (qi(1), qi(0)),
            (qi(3), q(-2, 3)),
            (qi(-3), qi(2)),
            (qi(3), q(-4, 3)),
            (qi(1), qi(0)),
        ],
    )
}

/// The interval `J` on which `g` is chaotic.
pub fn bo_j() -> Interval {
    Interval::closed(q(1, 3), q(2, 3))
}

fn named(name: &str, map: PwAffineMap) -> NamedMap {
    NamedMap { name: name.into(), map }
}

pub fn make_bo_system() -> CatalogEntry {
    let system = NdSystem::new(
        "bo",
        Space::Interval,
        vec![named("f", bo_f()), named("g", bo_g())],
        Schedule::IndexSet { on: 0, off: 1, indices: IndexSequence::Pow2Squares },
    )
    .expect("bo schedule is valid");
    let partitions = (1..=3u32)
        .map(|k| PartitionSequence::constant(format!("thirds-k{k}"), Partition::uniform(3 * k)))
        .collect();
    let log3 = 3f64.log2();
    CatalogEntry {
        id: "bo".into(),
        system,
        initial: PwConstMeasure::lebesgue(),
        measure_id: "lebesgue".into(),
        partitions,
        default_partition: 2,
        expectations: vec![
            expect("h_top", log3, 1e-9, ExpectationSource::Reference, "log2 3, attained by the Lebesgue IMS"),
            expect("h_measure", log3, 1e-9, ExpectationSource::Reference, "Lebesgue IMS has maximal entropy"),
            expect(
                "lipschitz_512",
                (509.0 * log3 + 3.0) / 512.0,
                1e-9,
                ExpectationSource::Computed,
                "509 steps of g (L=3) and 3 of f (L=2) below 512",
            ),
            expect(
                "measure_lower_16",
                (14.0 * log3 + 2.0) / 16.0,
                1e-9,
                ExpectationSource::Computed,
                "lower bound on H(P_0^16)/16 for the thirds partition",
            ),
        ],
    }
}

fn lebesgue_entry(
    id: &str,
    system: NdSystem,
    partitions: Vec<PartitionSequence>,
    expectations: Vec<Expectation>,
) -> CatalogEntry {
    CatalogEntry {
        id: id.into(),
        system,
        initial: PwConstMeasure::lebesgue(),
        measure_id: "lebesgue".into(),
        partitions,
        default_partition: 0,
        expectations,
    }
}

fn halves() -> PartitionSequence {
    PartitionSequence::constant("halves", Partition::uniform(2))
}

pub fn make_baselines() -> Vec<CatalogEntry> {
    use ExpectationSource::*;
    let log3 = 3f64.log2();
    let tent = PwAffineMap::from_nodes(&[(qi(0), qi(0)), (q(1, 2), qi(1)), (qi(1), qi(0))]).expect("tent");
    vec![
        lebesgue_entry(
            "identity",
            NdSystem::constant("identity", Space::Interval, "id", PwAffineMap::identity()),
            vec![PartitionSequence::constant("thirds", Partition::uniform(3))],
            vec![expect("h_top", 0.0, 0.05, Elementary, "every orbit is fixed")],
        ),
        lebesgue_entry(
            "doubling",
            NdSystem::constant("doubling", Space::Circle, "d", PwAffineMap::times_mod_one(2)),
            vec![halves()],
            vec![
                expect("h_top", 1.0, 0.1, Computed, "cover counts grow like 2^n"),
                expect("h_measure", 1.0, 1e-9, Computed, "halves generate; Lebesgue is invariant"),
            ],
        ),
        lebesgue_entry(
            "tent",
            NdSystem::constant("tent", Space::Interval, "t", tent),
            vec![halves()],
            vec![expect("h_top", 1.0, 0.1, Computed, "two full monotone branches")],
        ),
        lebesgue_entry(
            "rotation",
            NdSystem::constant("rotation", Space::Circle, "r", PwAffineMap::rotation(q(8, 13)).expect("rotation")),
            vec![halves()],
            vec![expect("h_top", 0.0, 0.05, Elementary, "isometry")],
        ),
        lebesgue_entry(
            "digits",
            NdSystem::constant("digits", Space::Interval, "id", PwAffineMap::identity()),
            vec![PartitionSequence::binary_digits()],
            vec![
                expect("h_measure_trace", 1.0, 0.0, Computed, "each new digit splits every cell in half"),
                expect("h_top", 0.0, 0.05, Elementary, "identity map"),
            ],
        ),
        lebesgue_entry(
            "alternation",
            NdSystem::periodic(
                "alternation",
                Space::Circle,
                vec![named("x2", PwAffineMap::times_mod_one(2)), named("x4", PwAffineMap::times_mod_one(4))],
            )
            .expect("alternation"),
            vec![halves()],
            vec![
                expect("h_top", 1.5, 1e-12, Computed, "slope product 8^(n/2)"),
                expect("h_measure", 1.5, 1e-12, Computed, "slope product 8^(n/2)"),
            ],
        ),
        lebesgue_entry(
            "tripling",
            NdSystem::constant("tripling", Space::Circle, "x3", PwAffineMap::times_mod_one(3)),
            vec![PartitionSequence::constant("thirds", Partition::uniform(3))],
            vec![expect("h_top", log3, 1e-12, Computed, "constant slope 3")],
        ),
    ]
}

pub fn list_ids() -> Vec<String> {
    std::iter::once("bo".to_string()).chain(make_baselines().into_iter().map(|e| e.id)).collect()
}

pub fn catalog_entry(id: &str) -> Option<CatalogEntry> {
    if id == "bo" {
        return Some(make_bo_system());
    }
    make_baselines().into_iter().find(|e| e.id == id)
}

/// A piecewise-affine test function with a label.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub name: String,
    pub phi: PwAffineMap,
}

impl TestFunction {
    /// `1_{[0, a)}`.
    pub fn indicator_below(a: &Rational) -> Self {
        TestFunction {
            name: format!("1[0,{})", crate::rational::format_rational(a)),
            phi: pw(&[qi(0), a.clone(), qi(1)], &[(qi(0), qi(1)), (qi(0), qi(0))]),
        }
    }

    /// 1 on `[0, a/2]`, falling linearly to 0 at `a`.
    pub fn hat_below(a: &Rational) -> Self {
        let half = a / qi(2);
        let slope = qi(-2) / a;
        TestFunction {
            name: format!("hat[0,{})", crate::rational::format_rational(a)),
            phi: pw(
                &[qi(0), half.clone(), a.clone(), qi(1)],
                &[(qi(0), qi(1)), (slope, qi(2)), (qi(0), qi(0))],
            ),
        }
    }

    pub fn constant_one() -> Self {
        TestFunction { name: "1".into(), phi: pw(&[qi(0), qi(1)], &[(qi(0), qi(1))]) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakStarRow {
    pub n: u64,
    /// `∫ φ dμ_n` for each test function, exact.
    #[serde(with = "crate::rational::serde_vec")]
    pub integrals: Vec<Rational>,
}

/// `∫ φ dμ_n` for `n = 0, …, horizon`.
pub fn weak_star_diagnostic(
    ims: &MeasureSequence,
    family: &[TestFunction],
    horizon: u64,
) -> Result<Vec<WeakStarRow>, Error> {
    (0..=horizon)
        .map(|n| {
            let mu = ims.at(n)?;
            Ok(WeakStarRow { n, integrals: family.iter().map(|t| mu.integrate(&t.phi)).collect() })
        })
        .collect()
}

/// Whether every map of the system sends `set` into itself.
pub fn forward_invariant(sys: &NdSystem, set: &IntervalSet) -> bool {
    sys.maps().iter().all(|m| {
        let pre = m.map.preimage(set);
        set.intersection(&pre) == *set
    })
}

/// First time after which `μ_n(A) ≥ level` for every later `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassThreshold {
    #[serde(serialize_with = "ser_big")]
    pub time: BigUint,
    #[serde(with = "serde_str")]
    pub mass: Rational,
    /// `(time, μ_time(A))` at each schedule segment boundary visited.
    pub history: Vec<(String, String)>,
}

fn ser_big<S: serde::Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Finds the first `N` with `μ_N(A) ≥ level`, walking the schedule's
/// segments exactly. `A` must be forward invariant under every map, which
/// makes `n ↦ μ_n(A)` nondecreasing, so the bound then holds for all `n ≥ N`.
///
/// Inside a run the measure is either fixed by the run's word (checked) or
/// the run is stepped through, at most `max_run` steps.
pub fn weak_star_threshold(
    ims: &MeasureSequence,
    set: &IntervalSet,
    level: &Rational,
    max_segments: usize,
    max_run: u64,
) -> Result<Option<MassThreshold>, Error> {
    let sys = ims.system();
    if !forward_invariant(sys, set) {
        return Err(Error::Usage(format!("{set} is not forward invariant under every map of {}", sys.id())));
    }
    let mut mu = (*ims.initial()).clone();
    let mut time;
    let start = BigUint::zero();
    let mut history = Vec::new();
    let mut record = |t: &BigUint, m: &Rational| history.push((t.to_string(), crate::rational::format_rational(m)));
    let mass = mu.mass_of(set);
    record(&start, &mass);
    if mass >= *level {
        return Ok(Some(MassThreshold { time: start, mass, history }));
    }
    for seg in sys.schedule().segments().take(max_segments) {
        let Some(count) = seg.count else { break };
        let map = sys.word_map(&seg.word)?;
        let next = mu.pushforward(&map);
        if next == mu {
            continue;
        }
        let steps = count.to_u64().filter(|c| *c <= max_run).ok_or_else(|| Error::Budget {
            what: "weak-star run that moves the measure".into(),
            limit: max_run as usize,
        })?;
        mu = next;
        time = seg.start.clone() + BigUint::one();
        for k in 1..=steps {
            if k > 1 {
                mu = mu.pushforward(&map);
                time += BigUint::one();
            }
            let mass = mu.mass_of(set);
            record(&time, &mass);
            if mass >= *level {
                return Ok(Some(MassThreshold { time, mass, history }));
            }
        }
    }
    Ok(None)
}

/// Orbit-entry times of a point grid into a target set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitConvergence {
    pub points: usize,
    /// Entry time for each grid point, `None` if not seen to enter.
    pub entry_times: Vec<Option<String>>,
    /// Latest entry time over the grid, when all entered.
    pub max_entry: Option<String>,
    /// The target is mapped into itself by every map.
    pub target_invariant: bool,
}

/// Follows each grid point through the schedule and records the first time
/// its orbit lies in `target`. Long runs are collapsed by cycle detection:
/// the visited states up to the first repeat are all the run can reach.
pub fn orbit_convergence(
    sys: &NdSystem,
    grid: &[Rational],
    target: &IntervalSet,
    max_segments: usize,
    max_cycle: usize,
) -> Result<OrbitConvergence, Error> {
    let segments: Vec<_> = sys.schedule().segments().take(max_segments).collect();
    let maps = segments.iter().map(|s| sys.word_map(&s.word)).collect::<Result<Vec<_>, _>>()?;
    let mut entry_times = Vec::with_capacity(grid.len());
    for x in grid {
        entry_times.push(first_entry(x, &segments, &maps, target, max_cycle)?);
    }
    let max_entry = entry_times
        .iter()
        .cloned()
        .collect::<Option<Vec<BigUint>>>()
        .and_then(|v| v.into_iter().max())
        .map(|t| t.to_string());
    Ok(OrbitConvergence {
        points: grid.len(),
        entry_times: entry_times.into_iter().map(|t| t.map(|t| t.to_string())).collect(),
        max_entry,
        target_invariant: forward_invariant(sys, target),
    })
}

fn first_entry(
    x: &Rational,
    segments: &[crate::schedule::Segment],
    maps: &[std::sync::Arc<PwAffineMap>],
    target: &IntervalSet,
    max_cycle: usize,
) -> Result<Option<BigUint>, Error> {
    let mut y = x.clone();
    if target.contains(&y) {
        return Ok(Some(BigUint::zero()));
    }
    for (seg, map) in segments.iter().zip(maps) {
        let Some(count) = &seg.count else { break };
        let limit = count.to_usize().unwrap_or(usize::MAX);
        let mut seen: HashMap<Rational, usize> = HashMap::new();
        let mut states = vec![y.clone()];
        seen.insert(y.clone(), 0);
        let mut end = None;
        for j in 1..=limit {
            let next = map.eval(&states[j - 1])?;
            if target.contains(&next) {
                return Ok(Some(seg.start.clone() + BigUint::from(j)));
            }
            if let Some(&i) = seen.get(&next) {
                let rem = (count - BigUint::from(i)) % BigUint::from(j - i);
                end = Some(states[i + rem.to_usize().expect("below period")].clone());
                break;
            }
            if j > max_cycle {
                return Err(Error::Budget { what: "orbit run without a detectable cycle".into(), limit: max_cycle });
            }
            seen.insert(next.clone(), j);
            states.push(next);
        }
        y = end.unwrap_or_else(|| states.pop().expect("nonempty"));
    }
    Ok(None)
}

/// `{i/size : 0 ≤ i < size}`.
pub fn rational_grid(size: u64) -> Vec<Rational> {
    (0..size as i64).map(|i| q(i, size as i64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(s: &str) -> Interval {
        s.parse().unwrap()
    }

    #[test]
    fn bo_realization_properties() {
        let (f, g) = (bo_f(), bo_g());
        let j = IntervalSet::from_interval(bo_j());
        // g(J) = J with three full branches of slope ±3.
        let inner: Vec<_> = g.pieces()[1..4].iter().map(|p| p.slope.clone()).collect();
        assert_eq!(inner, vec![qi(3), qi(-3), qi(3)]);
        for k in 1..4 {
            let d = g.piece_domain(k);
            let ends = [g.eval(&d.lo).unwrap(), g.pieces()[k].apply(&d.hi)];
            let (lo, hi) = if ends[0] < ends[1] { (&ends[0], &ends[1]) } else { (&ends[1], &ends[0]) };
            assert_eq!((lo.clone(), hi.clone()), (q(1, 3), q(2, 3)));
        }
        assert_eq!(g.preimage(&j), j);
        // g is the identity on J^- and J^+.
        for x in [qi(0), q(1, 7), q(3, 4), qi(1)] {
            assert_eq!(g.eval(&x).unwrap(), x);
        }
        // f on [2/3, 5/6) inverts to (x - 1/3)/2 + 2/3.
        for y in [q(1, 3), q(2, 5), q(1, 2), q(3, 5)] {
            let x = (&y - q(1, 3)) / qi(2) + q(2, 3);
            assert!(x >= q(2, 3) && x < q(5, 6));
            assert_eq!(f.eval(&x).unwrap(), y);
        }
        assert_eq!((f.lipschitz(), g.lipschitz()), (qi(2), qi(3)));
        assert_eq!((f.eval(&qi(1)).unwrap(), g.eval(&qi(1)).unwrap()), (qi(1), qi(1)));
        assert!(f.is_continuous() && g.is_continuous());
    }

    #[test]
    fn bo_schedule_times() {
        let bo = make_bo_system();
        let f_times: Vec<u64> = (0..600).filter(|&i| bo.system.map_name_at(i) == "f").collect();
        assert_eq!(f_times, vec![1, 2, 16, 512]);
        // l_2 = m_2 - m_1 - 1 steps of g between the second and third f.
        assert_eq!((3..16).filter(|&i| bo.system.map_name_at(i) == "g").count(), 13);
    }

    #[test]
    fn catalog_is_complete_and_deterministic() {
        let ids = list_ids();
        for want in ["bo", "identity", "doubling", "tent", "rotation", "digits", "alternation", "tripling"] {
            assert!(ids.iter().any(|i| i == want), "{want}");
        }
        for id in &ids {
            let a = catalog_entry(id).unwrap();
            let b = catalog_entry(id).unwrap();
            assert_eq!(a.system, b.system);
            assert_eq!(serde_json::to_string(&a.to_doc()).unwrap(), serde_json::to_string(&b.to_doc()).unwrap());
            assert!(!a.expectations.is_empty());
            let back = NdSystem::from_json(&a.system.to_json()).unwrap();
            assert_eq!(back, a.system);
        }
        assert!(catalog_entry("nope").is_none());
    }

    #[test]
    fn weak_star_identity_is_constant() {
        let e = catalog_entry("identity").unwrap();
        let fam = [TestFunction::hat_below(&q(1, 100)), TestFunction::constant_one()];
        let rows = weak_star_diagnostic(&e.measure_sequence(), &fam, 5).unwrap();
        for r in &rows {
            assert_eq!(r.integrals, vec![q(3, 400), qi(1)]);
        }
    }

    #[test]
    fn weak_star_bo_increases() {
        let e = make_bo_system();
        let fam = [TestFunction::indicator_below(&q(1, 100)), TestFunction::constant_one()];
        let rows = weak_star_diagnostic(&e.measure_sequence(), &fam, 20).unwrap();
        assert!(rows.windows(2).all(|w| w[0].integrals[0] <= w[1].integrals[0]));
        assert_eq!(rows[20].integrals[0], q(8, 100));
        assert!(rows.iter().all(|r| r.integrals[1] == qi(1)));
    }

    #[test]
    fn bo_threshold_is_found() {
        let e = make_bo_system();
        let a = IntervalSet::from_interval(iv("[0,1/100)"));
        let t = weak_star_threshold(&e.measure_sequence(), &a, &q(99, 100), 40, 100).unwrap().unwrap();
        assert!(t.mass >= q(99, 100));
        assert_eq!(t.time, (BigUint::one() << 121u32) + BigUint::one());
    }

    #[test]
    fn non_invariant_target_rejected() {
        let e = catalog_entry("doubling").unwrap();
        let a = IntervalSet::from_interval(iv("[0,1/100)"));
        assert!(weak_star_threshold(&e.measure_sequence(), &a, &q(1, 2), 10, 10).is_err());
    }

    #[test]
    fn bo_orbits_enter_small_interval() {
        let e = make_bo_system();
        let target = IntervalSet::from_interval(iv("[0,1/100)"));
        let grid = rational_grid(100);
        let r = orbit_convergence(&e.system, &grid, &target, 40, 100_000).unwrap();
        assert!(r.target_invariant);
        assert!(r.entry_times.iter().all(Option::is_some));
        assert!(r.max_entry.is_some());
    }
}
