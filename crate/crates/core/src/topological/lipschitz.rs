use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::Signed;
use serde::Serialize;

use crate::rational::{log2, to_f64, Rational};
use crate::system::NdSystem;
use crate::Error;

/// `dim · (1/n) Σ_{i<n} max(0, log₂ L_i)` for `n = 1, …, len`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzTrace {
    pub values: Vec<f64>,
    pub running_max: Vec<f64>,
}

impl LipschitzTrace {
    pub fn at(&self, n: u64) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.values.get(i as usize)).copied()
    }
}

pub fn lipschitz_upper_bound(l: &[Rational], dim: &Rational) -> Result<LipschitzTrace, Error> {
    if l.iter().any(|x| !x.is_positive()) {
        return Err(Error::Usage("Lipschitz constants must be positive".into()));
    }
    if dim.is_negative() {
        return Err(Error::Usage("dimension must be non-negative".into()));
    }
    let dim = to_f64(dim);
    // Sum grouped by distinct constant so repeated values add exactly.
    let mut counts: BTreeMap<&Rational, u64> = BTreeMap::new();
    let mut values = Vec::with_capacity(l.len());
    let mut running_max = Vec::with_capacity(l.len());
    let mut best = f64::NEG_INFINITY;
    for (i, li) in l.iter().enumerate() {
        *counts.entry(li).or_default() += 1;
        let n = (i + 1) as f64;
        let s: f64 = counts
            .iter()
            .map(|(x, &c)| (c as f64 / n) * log2(x).max(0.0))
            .sum();
        let v = dim * s;
        best = best.max(v);
        values.push(v);
        running_max.push(best);
    }
    Ok(LipschitzTrace { values, running_max })
}

/// The bound at far times: evaluated at each schedule segment boundary, with
/// step counts kept as big integers. Returns `(time, value)` pairs.
pub fn lipschitz_bound_far(sys: &NdSystem, max_segments: usize, dim: &Rational) -> Result<Vec<(BigUint, f64)>, Error> {
    if dim.is_negative() {
        return Err(Error::Usage("dimension must be non-negative".into()));
    }
    let mut counts: BTreeMap<Rational, BigUint> = BTreeMap::new();
    let mut out = Vec::new();
    for seg in sys.schedule().segments().take(max_segments) {
        let Some(count) = seg.count else { break };
        let l = sys.word_map(&seg.word)?.lipschitz();
        *counts.entry(l).or_default() += &count;
        let t = seg.start + count;
        let tq = Rational::from_integer(BigInt::from(t.clone()));
        let v: f64 = counts
            .iter()
            .map(|(l, c)| to_f64(&(Rational::from_integer(BigInt::from(c.clone())) / &tq)) * log2(l).max(0.0))
            .sum();
        out.push((t, to_f64(dim) * v));
    }
    Ok(out)
}

/// The Lipschitz bound for a system's per-step constants up to `horizon`.
pub fn lipschitz_bound_trace(sys: &NdSystem, horizon: u64, dim: &Rational) -> Result<LipschitzTrace, Error> {
    let profile = sys.uniform_lipschitz(horizon)?;
    lipschitz_upper_bound(&profile.per_step, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn constant_constants() {
        let t = lipschitz_upper_bound(&vec![qi(2); 5], &qi(1)).unwrap();
        assert_eq!(t.values, vec![1.0; 5]);
        let t = lipschitz_upper_bound(&vec![q(1, 2); 3], &qi(1)).unwrap();
        assert_eq!(t.values, vec![0.0; 3]);
        assert!(lipschitz_upper_bound(&[qi(0)], &qi(1)).is_err());
    }

    #[test]
    fn mixed_constants() {
        let t = lipschitz_upper_bound(&[qi(3), qi(2), qi(2), qi(3)], &qi(1)).unwrap();
        let expect = (2.0 * 3f64.log2() + 2.0) / 4.0;
        assert!((t.at(4).unwrap() - expect).abs() < 1e-15);
        assert_eq!(t.at(0), None);
    }

    #[test]
    fn far_values_agree_with_stepwise() {
        let bo = crate::catalog::make_bo_system();
        let far = lipschitz_bound_far(&bo.system, 40, &qi(1)).unwrap();
        let near = lipschitz_bound_trace(&bo.system, 513, &qi(1)).unwrap();
        for (t, v) in &far {
            if let Some(n) = num_traits::ToPrimitive::to_u64(t).filter(|n| *n <= 513) {
                assert!((near.at(n).unwrap() - v).abs() < 1e-12, "t {t}");
            }
        }
        let last = far.last().unwrap().1;
        assert!((last - 3f64.log2()).abs() < 1e-9);
    }
}
