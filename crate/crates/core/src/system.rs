//! Nonautonomous systems: a map table plus a schedule.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::far::advance_run;
use crate::interval::IntervalSet;
use crate::map::PwAffineMap;
use crate::rational::{format_rational, qi, Rational};
use crate::schedule::{IndexSequence, MapId, Schedule};
use crate::{Budget, Error};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Space {
    Interval,
    /// `[0,1]` with 0 and 1 identified; distances use the arc metric.
    Circle,
}

impl Space {
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self {
            Space::Interval => d,
            Space::Circle => d.min(1.0 - d),
        }
    }

    pub fn distance_exact(&self, a: &Rational, b: &Rational) -> Rational {
        let d = (a - b).abs();
        match self {
            Space::Interval => d,
            Space::Circle => {
                let other = qi(1) - &d;
                d.min(other)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMap {
    pub name: String,
    pub map: PwAffineMap,
}

/// `(X_∞, f_∞)` with every `X_n` equal to `[0,1]` or the circle.
///
/// Cloning is cheap; composites of schedule words are cached internally.
#[derive(Clone)]
pub struct NdSystem {
    inner: Arc<Inner>,
}

struct Inner {
    id: String,
    space: Space,
    maps: Vec<NamedMap>,
    table: Vec<Arc<PwAffineMap>>,
    schedule: Schedule,
    words: Mutex<HashMap<Vec<MapId>, Arc<PwAffineMap>>>,
}

impl std::fmt::Debug for NdSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NdSystem")
            .field("id", &self.inner.id)
            .field("space", &self.inner.space)
            .field("maps", &self.inner.maps.iter().map(|m| &m.name).collect::<Vec<_>>())
            .field("schedule", &self.inner.schedule)
            .finish()
    }
}

impl PartialEq for NdSystem {
    fn eq(&self, other: &Self) -> bool {
        self.inner.id == other.inner.id
            && self.inner.space == other.inner.space
            && self.inner.maps == other.inner.maps
            && self.inner.schedule == other.inner.schedule
    }
}

/// Serialized form of a system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    pub id: String,
    pub space: Space,
    pub maps: Vec<NamedMap>,
    pub schedule: ScheduleDoc,
}

/// Schedule with maps referenced by name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleDoc {
    Constant { map: String },
    Periodic { maps: Vec<String> },
    IndexSet { on: String, off: String, indices: IndexSequence },
    Power { m: u64, base: Box<ScheduleDoc> },
}

/// Per-step Lipschitz constants with their running maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzProfile {
    pub per_step: Vec<Rational>,
    pub running_max: Vec<Rational>,
}

impl NdSystem {
    pub fn new(
        id: impl Into<String>,
        space: Space,
        maps: Vec<NamedMap>,
        schedule: Schedule,
    ) -> Result<Self, Error> {
        schedule.validate(maps.len())?;
        let mut names: Vec<&str> = maps.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("duplicate map names".into()));
        }
        let table = maps.iter().map(|m| Arc::new(m.map.clone())).collect();
        Ok(NdSystem {
            inner: Arc::new(Inner {
                id: id.into(),
                space,
                maps,
                table,
                schedule,
                words: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn constant(id: impl Into<String>, space: Space, name: &str, map: PwAffineMap) -> Self {
        Self::new(
            id,
            space,
            vec![NamedMap { name: name.into(), map }],
            Schedule::Constant { map: 0 },
        )
        .expect("single-map constant system is valid")
    }

    pub fn periodic(
        id: impl Into<String>,
        space: Space,
        maps: Vec<NamedMap>,
    ) -> Result<Self, Error> {
        let ids = (0..maps.len()).collect();
        Self::new(id, space, maps, Schedule::Periodic { maps: ids })
    }

    pub fn id(&self) -> &str {
        &self.inner.id
    }

    pub fn space(&self) -> Space {
        self.inner.space
    }

    pub fn maps(&self) -> &[NamedMap] {
        &self.inner.maps
    }

    pub fn schedule(&self) -> &Schedule {
        &self.inner.schedule
    }

    /// Renamed copy.
    pub fn with_id(&self, id: impl Into<String>) -> Self {
        Self::new(id, self.space(), self.inner.maps.clone(), self.inner.schedule.clone())
            .expect("already validated")
    }

    pub(crate) fn word_map(&self, word: &[MapId]) -> Result<Arc<PwAffineMap>, Error> {
        if word.len() == 1 {
            return Ok(self.inner.table[word[0]].clone());
        }
        if let Some(m) = self.inner.words.lock().expect("word cache poisoned").get(word) {
            return Ok(m.clone());
        }
        let mut acc = (*self.inner.table[word[0]]).clone();
        for id in &word[1..] {
            acc = acc.then(&self.inner.table[*id])?;
        }
        let acc = Arc::new(acc);
        self.inner
            .words
            .lock()
            .expect("word cache poisoned")
            .insert(word.to_vec(), acc.clone());
        Ok(acc)
    }

    /// The map `f_i`.
    pub fn map_at(&self, i: u64) -> Result<Arc<PwAffineMap>, Error> {
        self.word_map(&self.inner.schedule.word_at(i))
    }

    /// Human-readable name of `f_i`.
    pub fn map_name_at(&self, i: u64) -> String {
        let word = self.inner.schedule.word_at(i);
        let names: Vec<&str> = word.iter().map(|&w| self.inner.maps[w].name.as_str()).collect();
        if names.len() == 1 {
            names[0].to_string()
        } else {
            format!("[{}]", names.join(","))
        }
    }

    /// `f_i^n(x)`, exactly.
    pub fn evaluate(&self, i: u64, n: u64, x: &Rational) -> Result<Rational, Error> {
        if x.is_negative() || *x > qi(1) {
            return Err(Error::Domain(format!("{} is outside [0,1]", format_rational(x))));
        }
        let mut y = x.clone();
        for k in 0..n {
            y = self.map_at(i + k)?.eval_unchecked(&y);
        }
        Ok(y)
    }

    /// The orbit segment `x, f_i(x), …, f_i^{n-1}(x)`.
    pub fn orbit(&self, i: u64, n: u64, x: &Rational) -> Result<Vec<Rational>, Error> {
        let mut out = Vec::with_capacity(n as usize);
        let mut y = x.clone();
        for k in 0..n {
            if k > 0 {
                y = self.map_at(i + k - 1)?.eval_unchecked(&y);
            }
            out.push(y.clone());
        }
        Ok(out)
    }

    /// `f_i^{-n}(set)`, pulled back one map at a time.
    pub fn preimage(&self, i: u64, n: u64, set: &IntervalSet) -> Result<IntervalSet, Error> {
        let mut acc = set.clone();
        for k in (0..n).rev() {
            acc = self.map_at(i + k)?.preimage(&acc);
        }
        Ok(acc)
    }

    /// Closed-form composite `f_i^n` (`n ≥ 1`).
    pub fn compose_window(&self, i: u64, n: u64, budget: Budget) -> Result<PwAffineMap, Error> {
        if n == 0 {
            return Err(Error::Usage("compose_window needs n >= 1".into()));
        }
        let mut acc = (*self.map_at(i)?).clone();
        for k in 1..n {
            acc = acc.then(&*self.map_at(i + k)?)?;
            budget.check("composite pieces", acc.num_pieces())?;
        }
        Ok(acc)
    }

    /// The `m`-th power system `f_n^{[m]} = f_{nm}^m`.
    pub fn power(&self, m: u64) -> Result<NdSystem, Error> {
        if m == 0 {
            return Err(Error::Usage("power exponent must be at least 1".into()));
        }
        if m == 1 {
            return Ok(self.clone());
        }
        let id = format!("{}^[{m}]", self.id());
        let space = self.space();
        match &self.inner.schedule {
            Schedule::Constant { map } => {
                let word = vec![*map; m as usize];
                let composite = (*self.word_map(&word)?).clone();
                let name = format!("{}^{m}", self.inner.maps[*map].name);
                Ok(NdSystem::constant(id, space, &name, composite))
            }
            Schedule::Periodic { maps } => {
                let p = maps.len() as u64;
                let period = p / p.gcd(&m);
                let mut table: Vec<NamedMap> = Vec::new();
                let mut ids = Vec::new();
                for n in 0..period {
                    let name = self.map_name_at_power(n, m);
                    let pos = match table.iter().position(|t| t.name == name) {
                        Some(pos) => pos,
                        None => {
                            let word: Vec<MapId> =
                                (0..m).map(|r| maps[((n * m + r) % p) as usize]).collect();
                            let map = (*self.word_map(&word)?).clone();
                            table.push(NamedMap { name, map });
                            table.len() - 1
                        }
                    };
                    ids.push(pos);
                }
                if ids.len() == 1 {
                    NdSystem::new(id, space, table, Schedule::Constant { map: ids[0] })
                } else {
                    NdSystem::new(id, space, table, Schedule::Periodic { maps: ids })
                }
            }
            Schedule::IndexSet { .. } => NdSystem::new(
                id,
                space,
                self.inner.maps.clone(),
                Schedule::Power { m, base: Box::new(self.inner.schedule.clone()) },
            ),
            Schedule::Power { m: inner_m, base } => NdSystem::new(
                id,
                space,
                self.inner.maps.clone(),
                Schedule::Power { m: inner_m * m, base: base.clone() },
            ),
        }
    }

    fn map_name_at_power(&self, n: u64, m: u64) -> String {
        let names: Vec<String> = (0..m).map(|r| self.map_name_at(n * m + r)).collect();
        format!("[{}]", names.join(","))
    }

    /// `L_i = max |slope of f_i|` for `i < horizon`, with running maximum.
    pub fn uniform_lipschitz(&self, horizon: u64) -> Result<LipschitzProfile, Error> {
        let mut per_step = Vec::with_capacity(horizon as usize);
        let mut running_max: Vec<Rational> = Vec::with_capacity(horizon as usize);
        for i in 0..horizon {
            let l = self.map_at(i)?.lipschitz();
            let r = match running_max.last() {
                Some(prev) if *prev >= l => prev.clone(),
                _ => l.clone(),
            };
            per_step.push(l);
            running_max.push(r);
        }
        Ok(LipschitzProfile { per_step, running_max })
    }

    /// A uniform bound `sup_n L_n`, certified from the finite map table:
    /// `(max table constant)^(word length)`.
    pub fn lipschitz_bound(&self) -> Rational {
        let max = self
            .inner
            .schedule
            .used_maps()
            .iter()
            .map(|&id| self.inner.table[id].lipschitz())
            .max()
            .expect("schedule uses at least one map");
        let mut acc = Rational::one();
        for _ in 0..self.inner.schedule.word_len() {
            acc *= &max;
        }
        acc
    }

    /// Visits the orbit of `x` at every segment boundary of the schedule,
    /// collapsing long runs by cycle detection. `visit(time, value)` returns
    /// `false` to stop. Stops after `max_segments` segments.
    pub fn walk_orbit<F>(&self, x: &Rational, max_segments: usize, max_cycle: usize, mut visit: F) -> Result<(), Error>
    where
        F: FnMut(&BigUint, &Rational) -> bool,
    {
        if x.is_negative() || *x > qi(1) {
            return Err(Error::Domain(format!("{} is outside [0,1]", format_rational(x))));
        }
        let mut y = x.clone();
        if !visit(&BigUint::zero(), &y) {
            return Ok(());
        }
        for seg in self.inner.schedule.segments().take(max_segments) {
            let Some(count) = seg.count else { break };
            let map = self.word_map(&seg.word)?;
            y = advance_run(y, &count, max_cycle, |v| Ok(map.eval_unchecked(v)))?;
            let t = seg.start + count;
            if !visit(&t, &y) {
                break;
            }
        }
        Ok(())
    }

    pub fn to_doc(&self) -> SystemDoc {
        let names: Vec<String> = self.inner.maps.iter().map(|m| m.name.clone()).collect();
        SystemDoc {
            id: self.inner.id.clone(),
            space: self.inner.space,
            maps: self.inner.maps.clone(),
            schedule: schedule_doc(&self.inner.schedule, &names),
        }
    }

    pub fn from_doc(doc: SystemDoc) -> Result<Self, Error> {
        let lookup = |name: &str| {
            doc.maps
                .iter()
                .position(|m| m.name == name)
                .ok_or_else(|| Error::Domain(format!("schedule names unknown map {name:?}")))
        };
        let schedule = schedule_from_doc(&doc.schedule, &lookup)?;
        NdSystem::new(doc.id.clone(), doc.space, doc.maps.clone(), schedule)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("system serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        let doc: SystemDoc = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_doc(doc)
    }
}

fn schedule_doc(s: &Schedule, names: &[String]) -> ScheduleDoc {
    match s {
        Schedule::Constant { map } => ScheduleDoc::Constant { map: names[*map].clone() },
        Schedule::Periodic { maps } => {
            ScheduleDoc::Periodic { maps: maps.iter().map(|m| names[*m].clone()).collect() }
        }
        Schedule::IndexSet { on, off, indices } => ScheduleDoc::IndexSet {
            on: names[*on].clone(),
            off: names[*off].clone(),
            indices: indices.clone(),
        },
        Schedule::Power { m, base } => {
            ScheduleDoc::Power { m: *m, base: Box::new(schedule_doc(base, names)) }
        }
    }
}

fn schedule_from_doc(
    d: &ScheduleDoc,
    lookup: &dyn Fn(&str) -> Result<MapId, Error>,
) -> Result<Schedule, Error> {
    Ok(match d {
        ScheduleDoc::Constant { map } => Schedule::Constant { map: lookup(map)? },
        ScheduleDoc::Periodic { maps } => Schedule::Periodic {
            maps: maps.iter().map(|m| lookup(m)).collect::<Result<_, _>>()?,
        },
        ScheduleDoc::IndexSet { on, off, indices } => Schedule::IndexSet {
            on: lookup(on)?,
            off: lookup(off)?,
            indices: indices.clone(),
        },
        ScheduleDoc::Power { m, base } => {
            Schedule::Power { m: *m, base: Box::new(schedule_from_doc(base, lookup)?) }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn doubling() -> NdSystem {
        NdSystem::constant("doubling", Space::Circle, "d", PwAffineMap::times_mod_one(2))
    }

    #[test]
    fn zero_steps_is_identity() {
        let s = doubling();
        assert_eq!(s.evaluate(0, 0, &q(1, 3)).unwrap(), q(1, 3));
        assert!(s.evaluate(0, 1, &q(4, 3)).is_err());
    }

    #[test]
    fn doubling_window_and_power() {
        let s = doubling();
        let w = s.compose_window(0, 2, Budget::default()).unwrap();
        assert_eq!(w, PwAffineMap::times_mod_one(4));
        assert_eq!(s.compose_window(3, 1, Budget::default()).unwrap(), PwAffineMap::times_mod_one(2));
        let p = s.power(2).unwrap();
        assert!(matches!(p.schedule(), Schedule::Constant { .. }));
        assert_eq!(*p.map_at(7).unwrap(), PwAffineMap::times_mod_one(4));
        assert_eq!(s.power(1).unwrap(), s);
    }

    #[test]
    fn window_budget_is_enforced() {
        let s = doubling();
        let r = s.compose_window(0, 6, Budget { cells: 16 });
        assert!(matches!(r, Err(Error::Budget { .. })));
    }

    #[test]
    fn periodic_power_period() {
        let maps = vec![
            NamedMap { name: "a".into(), map: PwAffineMap::times_mod_one(2) },
            NamedMap { name: "b".into(), map: PwAffineMap::times_mod_one(3) },
            NamedMap { name: "c".into(), map: PwAffineMap::identity() },
        ];
        let s = NdSystem::periodic("abc", Space::Circle, maps).unwrap();
        let p = s.power(2).unwrap();
        for n in 0..7 {
            for x in [q(1, 7), q(2, 5), q(0, 1), q(1, 1)] {
                assert_eq!(
                    p.evaluate(0, n, &x).unwrap(),
                    s.evaluate(0, 2 * n, &x).unwrap()
                );
            }
        }
        let p3 = s.power(3).unwrap();
        assert!(matches!(p3.schedule(), Schedule::Constant { .. }));
    }

    #[test]
    fn json_round_trip() {
        let s = doubling().power(3).unwrap();
        let back = NdSystem::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert!(NdSystem::from_json(r#"{"id":"x","space":"interval","maps":[],"schedule":{"kind":"constant","map":"f"}}"#).is_err());
    }

    #[test]
    fn lipschitz_profile() {
        let p = doubling().uniform_lipschitz(3).unwrap();
        assert_eq!(p.per_step, vec![qi(2); 3]);
        assert_eq!(doubling().power(2).unwrap().lipschitz_bound(), qi(4));
        let id = NdSystem::constant("id", Space::Interval, "id", PwAffineMap::identity());
        assert_eq!(id.uniform_lipschitz(4).unwrap().running_max, vec![qi(1); 4]);
    }
}
