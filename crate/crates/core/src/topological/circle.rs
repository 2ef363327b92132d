use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::measure::PwConstMeasure;
use crate::rational::{log2, q, to_f64, Rational};
use crate::system::{NdSystem, Space};
use crate::{Budget, Error};

/// `(1/n) log₂ ∫ |(f_0^n)'| dx` and `(1/n) ∫ log₂ |(f_0^n)'| dμ_0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleEntropies {
    pub n: u64,
    pub topological: f64,
    pub measure: f64,
}

/// Both one-dimensional expanding-map formulas at time `n`.
///
/// When every map has a constant absolute slope, both values reduce to
/// `Σ_s (count_s / n) log₂ s` and are computed that way; otherwise the
/// composite `f_0^n` is built and integrated piece by piece.
pub fn expanding_circle_entropies(
    sys: &NdSystem,
    mu0: &PwConstMeasure,
    n: u64,
    budget: Budget,
) -> Result<CircleEntropies, Error> {
    if sys.space() != Space::Circle {
        return Err(Error::Usage(format!("{} is not a circle system", sys.id())));
    }
    if n == 0 {
        return Err(Error::Usage("n must be at least 1".into()));
    }
    let mut counts: BTreeMap<Rational, u64> = BTreeMap::new();
    let mut constant = true;
    for i in 0..n {
        let f = sys.map_at(i)?;
        if f.pieces().iter().any(|p| p.slope.abs() <= Rational::one()) {
            return Err(Error::Usage(format!(
                "map {} at time {i} is not expanding",
                sys.map_name_at(i)
            )));
        }
        match f.constant_abs_slope() {
            Some(s) if constant => *counts.entry(s).or_default() += 1,
            _ => constant = false,
        }
    }
    if constant {
        let v: f64 = counts.iter().map(|(s, &c)| to_f64(&q(c as i64, n as i64)) * log2(s)).sum();
        return Ok(CircleEntropies { n, topological: v, measure: v });
    }
    let composite = sys.compose_window(0, n, budget)?;
    let mut integral = Rational::zero();
    let mut measure = 0.0;
    for (j, p) in composite.pieces().iter().enumerate() {
        let dom = composite.piece_domain(j);
        let s = p.slope.abs();
        integral += &s * dom.length();
        let w = mu0.mass(&dom);
        if !w.is_zero() {
            measure += to_f64(&w) * log2(&s);
        }
    }
    Ok(CircleEntropies { n, topological: log2(&integral) / n as f64, measure: measure / n as f64 })
}
