//! Finite-horizon traces of `(1/n) H_{μ_0}(P_0^n)`.
//!
//! A trace stands in for the `limsup`: it records every requested horizon and
//! the running maximum, and never claims a limit.

use serde::Serialize;

use crate::information::entropy_of_masses;
use crate::map::PwAffineMap;
use crate::measure::PwConstMeasure;
use crate::partition::{joined_flat, refine_flat, Flat, PartitionSequence};
use crate::system::NdSystem;
use crate::{Budget, Error};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: u64,
    /// `H_{μ_0}(P_0^n)` in bits.
    pub entropy_bits: f64,
    /// `H_{μ_0}(P_0^n) / n`.
    pub value_bits: f64,
    pub running_max: f64,
    /// Cells of `P_0^n` (including null cells).
    pub cells: usize,
    /// Interval pieces held by the joined partition.
    pub budget_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyTrace {
    pub system_id: String,
    pub partition_id: String,
    pub measure_id: String,
    pub rows: Vec<TraceRow>,
}

impl EntropyTrace {
    pub fn horizons(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value_bits).collect()
    }

    /// Largest quotient seen.
    pub fn running_max(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.running_max)
    }

    pub fn value_at(&self, n: u64) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).map(|r| r.value_bits)
    }
}

/// Exact-mass entropies of `P_0^n` for each horizon `n`.
pub fn partition_entropy_trace(
    sys: &NdSystem,
    mu0: &PwConstMeasure,
    measure_id: &str,
    seq: &PartitionSequence,
    horizons: &[u64],
    budget: Budget,
) -> Result<EntropyTrace, Error> {
    if horizons.is_empty() {
        return Err(Error::Usage("no horizons given".into()));
    }
    if horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("horizons must be positive and strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(horizons.len());
    let mut best = f64::NEG_INFINITY;
    let mut forward = Some(Forward::start(seq)?);
    for &n in horizons {
        let flat = match forward.as_mut().map(|f| f.advance_to(sys, seq, n, budget)) {
            Some(Ok(Some(flat))) => flat.clone(),
            Some(Ok(None)) | None => {
                forward = None;
                joined_flat(sys, seq, 0, n, budget, false)?.0
            }
            Some(Err(e)) => return Err(e),
        };
        let h = entropy_of_masses(&flat.masses(mu0));
        let value = h / n as f64;
        best = best.max(value);
        rows.push(TraceRow {
            n,
            entropy_bits: h,
            value_bits: value,
            running_max: best,
            cells: flat.ncells,
            budget_used: flat.pieces.len(),
        });
    }
    Ok(EntropyTrace {
        system_id: sys.id().to_string(),
        partition_id: seq.id().to_string(),
        measure_id: measure_id.to_string(),
        rows,
    })
}

/// Forward recursion `P_0^{n+1} = P_0^n ∨ (f_0^n)^{-1} P_n`, so that a
/// trace over many horizons reuses the previous join. Cell labels come out in
/// a different order than the backward recursion; masses agree as multisets.
struct Forward {
    n: u64,
    flat: Flat,
    /// `f_0^n`; `None` while `n = 0`.
    composite: Option<PwAffineMap>,
}

impl Forward {
    fn start(seq: &PartitionSequence) -> Result<Self, Error> {
        Ok(Forward { n: 1, flat: seq.at(0)?.flat(), composite: None })
    }

    /// `None` when the composite is unrepresentable or has outgrown the join,
    /// in which case the backward recursion is cheaper.
    fn advance_to(
        &mut self,
        sys: &NdSystem,
        seq: &PartitionSequence,
        n: u64,
        budget: Budget,
    ) -> Result<Option<&Flat>, Error> {
        while self.n < n {
            let f = sys.map_at(self.n - 1)?;
            let composite = match &self.composite {
                None => (*f).clone(),
                Some(c) => match c.then(&f) {
                    Ok(c) => c,
                    Err(Error::Composition(_)) => return Ok(None),
                    Err(e) => return Err(e),
                },
            };
            if composite.num_pieces() > 4 * self.flat.pieces.len() + 64 {
                return Ok(None);
            }
            let pulled = seq.at(self.n)?.flat().pullback(&composite);
            self.flat = refine_flat(&self.flat, &pulled, budget)?.0;
            self.composite = Some(composite);
            self.n += 1;
        }
        Ok(Some(&self.flat))
    }
}

/// `sup` over a finite generating family of the traces' running maxima.
pub fn class_entropy_sup(traces: &[EntropyTrace]) -> Result<f64, Error> {
    let first = traces.first().ok_or_else(|| Error::Usage("empty trace family".into()))?;
    for t in traces {
        if t.system_id != first.system_id || t.measure_id != first.measure_id {
            return Err(Error::Usage(format!(
                "traces mix systems or measures: {}/{} vs {}/{}",
                first.system_id, first.measure_id, t.system_id, t.measure_id
            )));
        }
    }
    Ok(traces.iter().map(EntropyTrace::running_max).fold(f64::NEG_INFINITY, f64::max))
}

/// The identity system with binary-digit partitions: every `P_0^n` is the
/// dyadic partition into `2^n` cells, so the measure quotient is 1 bit while
/// the topological entropy is 0.
#[derive(Clone, Debug, Serialize)]
pub struct EmaxDemo {
    pub trace: EntropyTrace,
    /// Lipschitz upper bound on the topological entropy at the last horizon.
    pub topological_upper: f64,
    /// Spanning-count growth `log₂(r(n)/r(n-1))` at the last horizon.
    pub spanning_increment: f64,
}

pub fn emax_blowup_demo(max_n: u64, budget: Budget) -> Result<EmaxDemo, Error> {
    use crate::rational::q;
    use crate::topological::{lipschitz_bound_trace, spanning_bounds};

    if max_n < 2 {
        return Err(Error::Usage("demo needs max_n >= 2".into()));
    }
    let entry = crate::catalog::catalog_entry("digits").expect("catalog has the digit demo");
    let horizons: Vec<u64> = (1..=max_n).collect();
    let trace = partition_entropy_trace(
        &entry.system,
        &entry.initial,
        &entry.measure_id,
        &entry.partitions[entry.default_partition],
        &horizons,
        budget,
    )?;
    let lip = lipschitz_bound_trace(&entry.system, max_n, &q(1, 1))?;
    let eps = q(1, 10);
    let step = q(1, 200);
    let a = spanning_bounds(&entry.system, max_n - 1, &eps, &step)?;
    let b = spanning_bounds(&entry.system, max_n, &eps, &step)?;
    let spanning_increment = (b.separated_lower as f64 / a.separated_lower as f64).log2();
    Ok(EmaxDemo {
        trace,
        topological_upper: *lip.values.last().expect("nonempty"),
        spanning_increment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::PwAffineMap;
    use crate::partition::Partition;
    use crate::system::Space;

    #[test]
    fn doubling_halves_is_one_bit() {
        let s = NdSystem::constant("doubling", Space::Circle, "d", PwAffineMap::times_mod_one(2));
        let seq = PartitionSequence::constant("halves", Partition::uniform(2));
        let t = partition_entropy_trace(&s, &PwConstMeasure::lebesgue(), "lebesgue", &seq, &[1, 4, 8], Budget::default())
            .unwrap();
        assert_eq!(t.values(), vec![1.0, 1.0, 1.0]);
        assert_eq!(t.rows[2].cells, 256);
    }

    #[test]
    fn identity_thirds_decays() {
        let s = NdSystem::constant("identity", Space::Interval, "id", PwAffineMap::identity());
        let seq = PartitionSequence::constant("thirds", Partition::uniform(3));
        let t = partition_entropy_trace(&s, &PwConstMeasure::lebesgue(), "lebesgue", &seq, &[1, 2, 5], Budget::default())
            .unwrap();
        for r in &t.rows {
            assert!((r.value_bits - 3f64.log2() / r.n as f64).abs() < 1e-12);
        }
        assert!((t.running_max() - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn forward_recursion_matches_backward_join() {
        let bo = crate::catalog::make_bo_system();
        let seq = bo.partition("thirds-k1").unwrap();
        let horizons: Vec<u64> = (1..=7).collect();
        let t = partition_entropy_trace(&bo.system, &bo.initial, "l", seq, &horizons, Budget::default()).unwrap();
        for row in &t.rows {
            let (flat, _) = joined_flat(&bo.system, seq, 0, row.n, Budget::default(), false).unwrap();
            let mut back = flat.masses(&bo.initial);
            let mut f = Forward::start(seq).unwrap();
            let mut ahead = f.advance_to(&bo.system, seq, row.n, Budget::default()).unwrap().unwrap().masses(&bo.initial);
            back.sort();
            ahead.sort();
            assert_eq!(back, ahead, "n = {}", row.n);
            assert_eq!(row.cells, flat.ncells);
        }
    }

    #[test]
    fn horizons_validated() {
        let s = NdSystem::constant("identity", Space::Interval, "id", PwAffineMap::identity());
        let seq = PartitionSequence::constant("thirds", Partition::uniform(3));
        let l = PwConstMeasure::lebesgue();
        assert!(partition_entropy_trace(&s, &l, "l", &seq, &[], Budget::default()).is_err());
        assert!(partition_entropy_trace(&s, &l, "l", &seq, &[2, 2], Budget::default()).is_err());
        assert!(partition_entropy_trace(&s, &l, "l", &seq, &[0], Budget::default()).is_err());
    }

    #[test]
    fn class_sup_rejects_mixed_systems() {
        let l = PwConstMeasure::lebesgue();
        let d = NdSystem::constant("doubling", Space::Circle, "d", PwAffineMap::times_mod_one(2));
        let id = NdSystem::constant("identity", Space::Interval, "id", PwAffineMap::identity());
        let halves = PartitionSequence::constant("halves", Partition::uniform(2));
        let thirds = PartitionSequence::constant("thirds", Partition::uniform(3));
        let a = partition_entropy_trace(&d, &l, "l", &halves, &[6], Budget::default()).unwrap();
        let b = partition_entropy_trace(&d, &l, "l", &thirds, &[6], Budget::default()).unwrap();
        let c = partition_entropy_trace(&id, &l, "l", &thirds, &[6], Budget::default()).unwrap();
        assert_eq!(class_entropy_sup(std::slice::from_ref(&a)).unwrap(), a.running_max());
        assert!(class_entropy_sup(&[a.clone(), c]).is_err());
        let sup = class_entropy_sup(&[a, b]).unwrap();
        assert!(sup >= 1.0);
    }
}
