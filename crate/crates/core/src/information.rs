//! Shannon entropy, conditional entropy and the Rokhlin distance.
//!
//! Masses are exact; only the final `-Σ p log₂ p` is evaluated in floating
//! point, summed in canonical cell order.

use serde::Serialize;

use crate::measure::{MeasureSequence, PwConstMeasure};
use crate::partition::{refine_flat, Partition, PartitionSequence};
use crate::rational::{plogp_bits, Rational};
use crate::{Budget, Error};

/// `-Σ p log₂ p` over a list of exact masses.
pub fn entropy_of_masses(masses: &[Rational]) -> f64 {
    masses.iter().map(plogp_bits).sum()
}

/// `H_μ(P)` in bits.
pub fn shannon_entropy(mu: &PwConstMeasure, p: &Partition) -> f64 {
    entropy_of_masses(&p.masses(mu))
}

/// `H_μ(P ∨ Q)` without materializing named cells.
pub fn joint_entropy(mu: &PwConstMeasure, p: &Partition, q: &Partition, budget: Budget) -> Result<f64, Error> {
    let (flat, _) = refine_flat(&p.flat(), &q.flat(), budget)?;
    Ok(entropy_of_masses(&flat.masses(mu)))
}

/// `H_μ(P | Q) = H_μ(P ∨ Q) - H_μ(Q)`.
pub fn conditional_entropy(mu: &PwConstMeasure, p: &Partition, q: &Partition, budget: Budget) -> Result<f64, Error> {
    Ok(joint_entropy(mu, p, q, budget)? - shannon_entropy(mu, q))
}

/// Truncated supremum `max_{n<horizon} [H_{μ_n}(P_n|Q_n) + H_{μ_n}(Q_n|P_n)]`,
/// a lower bound for the full supremum.
#[derive(Clone, Debug, Serialize)]
pub struct RokhlinReport {
    pub horizon: u64,
    pub value: f64,
    /// Symmetric sum at each `n < horizon`.
    pub trace: Vec<f64>,
    /// First `n` attaining `value`.
    pub argmax: u64,
}

pub fn rokhlin_distance(
    ims: &MeasureSequence,
    p: &PartitionSequence,
    q: &PartitionSequence,
    horizon: u64,
    budget: Budget,
) -> Result<RokhlinReport, Error> {
    if horizon == 0 {
        return Err(Error::Usage("Rokhlin distance needs horizon >= 1".into()));
    }
    let mut trace = Vec::with_capacity(horizon as usize);
    for n in 0..horizon {
        let mu = ims.at(n)?;
        let (pn, qn) = (p.at(n)?, q.at(n)?);
        let joint = joint_entropy(&mu, &pn, &qn, budget)?;
        let d = 2.0 * joint - shannon_entropy(&mu, &pn) - shannon_entropy(&mu, &qn);
        trace.push(d.max(0.0));
    }
    let (argmax, value) = trace
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok(RokhlinReport { horizon, value, trace, argmax: argmax as u64 })
}
