//! Advancing a deterministic state through very long runs of one map.
//!
//! A run of length `count` (possibly astronomically large) is collapsed by
//! detecting the eventual cycle of the state sequence. This is exact: once a
//! state repeats, the remainder of the run is determined by the cycle.

use std::collections::HashMap;
use std::hash::Hash;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::Error;

/// Applies `step` to `state` exactly `count` times, cycling through at most
/// `max_steps` distinct intermediate states.
pub fn advance_run<S, F>(state: S, count: &BigUint, max_steps: usize, mut step: F) -> Result<S, Error>
where
    S: Clone + Eq + Hash,
    F: FnMut(&S) -> Result<S, Error>,
{
    if let Some(c) = count.to_usize() {
        if c <= max_steps {
            let mut s = state;
            for _ in 0..c {
                s = step(&s)?;
            }
            return Ok(s);
        }
    }
    let mut seen: HashMap<S, usize> = HashMap::new();
    let mut states = vec![state.clone()];
    seen.insert(state, 0);
    loop {
        let j = states.len();
        if j > max_steps {
            return Err(Error::Budget {
                what: "far-time run without a detectable cycle".into(),
                limit: max_steps,
            });
        }
        let next = step(&states[j - 1])?;
        if let Some(&i) = seen.get(&next) {
            // states[j] would equal states[i]; the sequence has period j - i from i on.
            let period = BigUint::from(j - i);
            let rem = (count - BigUint::from(i)) % period;
            let idx = i + rem.to_usize().expect("remainder below period");
            return Ok(states[idx].clone());
        }
        seen.insert(next.clone(), j);
        states.push(next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_iteration() {
        // x -> 3x + 1 mod 17 is eventually periodic.
        let step = |x: &u32| Ok((3 * x + 1) % 17);
        for count in 0u32..200 {
            let mut direct = 5u32;
            for _ in 0..count {
                direct = step(&direct).unwrap();
            }
            let fast = advance_run(5u32, &BigUint::from(count), 20, step).unwrap();
            assert_eq!(fast, direct, "count {count}");
        }
    }

    #[test]
    fn huge_counts_on_fixed_points() {
        let huge = BigUint::from(1u8) << 300;
        assert_eq!(advance_run(7u32, &huge, 10, |x| Ok(*x)).unwrap(), 7);
    }

    #[test]
    fn budget_exceeded_without_cycle() {
        let huge = BigUint::from(1u8) << 100;
        let r = advance_run(0u64, &huge, 50, |x| Ok(x + 1));
        assert!(matches!(r, Err(Error::Budget { .. })));
    }
}
