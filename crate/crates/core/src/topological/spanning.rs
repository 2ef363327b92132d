//! Grid-based bounds on spanning and separated set sizes.
//!
//! Orbit segments of a rational grid are computed exactly, compared in
//! floating point, and re-compared exactly when a distance falls within
//! `1e-9` of the threshold. Greedy selection runs over the grid in order, so
//! results do not depend on evaluation order.

use std::collections::HashMap;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::map::PwAffineMap;
use crate::rational::{self, qi, to_f64, Rational};
use crate::system::{NdSystem, Space};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanningReport {
    pub system_id: String,
    pub n: u64,
    #[serde(with = "rational::serde_str")]
    pub eps: Rational,
    #[serde(with = "rational::serde_str")]
    pub grid_step: Rational,
    pub grid_points: usize,
    /// Size of a greedy `(n,ε)`-separated subset of the grid: `≤ s(n,ε)`.
    pub separated_lower: usize,
    /// Size of a greedy `(n,ε)`-spanning set for the whole space: `≥ r(n,ε)`.
    /// `None` when the grid is too coarse for the Lipschitz margin or some
    /// map is discontinuous on the space.
    pub spanning_upper: Option<usize>,
    /// True if `grid_step > ε / (2 L^n)`.
    pub coarse: bool,
}

/// Exact and floating orbit segments for every grid point.
struct Orbits {
    n: usize,
    exact: Vec<Rational>,
    approx: Vec<f64>,
}

impl Orbits {
    fn point(&self, k: usize) -> &[f64] {
        &self.approx[k * self.n..(k + 1) * self.n]
    }

    /// `d_n(x_a, x_b) < t`, with an exact re-check near ties.
    fn closer_than(&self, a: usize, b: usize, t: f64, t_exact: &Rational, space: Space) -> bool {
        let (pa, pb) = (self.point(a), self.point(b));
        let mut near_tie = false;
        for i in 0..self.n {
            let d = space.distance(pa[i], pb[i]);
            if d >= t + 1e-9 {
                return false;
            }
            if d > t - 1e-9 {
                near_tie = true;
            }
        }
        if !near_tie {
            return true;
        }
        (0..self.n).all(|i| {
            space.distance_exact(&self.exact[a * self.n + i], &self.exact[b * self.n + i]) < *t_exact
        })
    }
}

fn grid(step: &Rational, space: Space) -> Vec<Rational> {
    let mut out = Vec::new();
    let mut k = 0i64;
    loop {
        let x = step * qi(k);
        if x > qi(1) || (space == Space::Circle && x >= qi(1)) {
            break;
        }
        out.push(x);
        k += 1;
    }
    if space == Space::Interval && out.last() != Some(&qi(1)) {
        out.push(qi(1));
    }
    out
}

/// Continuity on the space: on the circle jumps by whole turns are allowed
/// and `f(0) ≡ f(1) mod 1` is required.
fn continuous_on(map: &PwAffineMap, space: Space) -> bool {
    match space {
        Space::Interval => map.is_continuous(),
        Space::Circle => {
            let same_mod_one = |a: &Rational, b: &Rational| (a - b).is_integer();
            let pieces = map.pieces();
            let bps = map.breakpoints();
            (1..pieces.len()).all(|j| same_mod_one(&pieces[j - 1].apply(&bps[j]), &pieces[j].apply(&bps[j])))
                && same_mod_one(&pieces[0].apply(&qi(0)), &pieces[pieces.len() - 1].apply(&qi(1)))
        }
    }
}

/// Greedy selection over the grid in order. Every point not yet within
/// `d_n < t` of a member triggers a new member: the point itself when
/// `reach` is false (a separated set), otherwise the furthest later point of
/// the run staying within `t` of it (a spanning set for the grid).
fn greedy(orbits: &Orbits, count: usize, t_exact: &Rational, space: Space, reach: bool) -> usize {
    let t = to_f64(t_exact);
    let w = t * (1.0 + 1e-6);
    let nb = (1.0 / w).floor() as i64 + 1;
    let last = orbits.n - 1;
    let key = |k: usize| {
        let p = orbits.point(k);
        (((p[0] / w).floor() as i64).min(nb - 1), ((p[last] / w).floor() as i64).min(nb - 1))
    };
    let neighbours = |b: i64| -> Vec<i64> {
        let mut v = vec![b - 1, b, b + 1];
        if space == Space::Circle {
            for x in &mut v {
                *x = x.rem_euclid(nb);
            }
        }
        v.retain(|x| (0..nb).contains(x));
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut members = 0;
    for k in 0..count {
        let (b0, b1) = key(k);
        let covered = neighbours(b0).into_iter().any(|x| {
            neighbours(b1).into_iter().any(|y| {
                buckets
                    .get(&(x, y))
                    .is_some_and(|ms| ms.iter().any(|&m| orbits.closer_than(k, m, t, t_exact, space)))
            })
        });
        if !covered {
            let mut c = k;
            if reach {
                while c + 1 < count && orbits.closer_than(k, c + 1, t, t_exact, space) {
                    c += 1;
                }
            }
            buckets.entry(key(c)).or_default().push(c);
            members += 1;
        }
    }
    members
}

/// Greedy separated lower bound and spanning upper bound at `(n, ε)` over a
/// grid of the given step.
pub fn spanning_bounds(sys: &NdSystem, n: u64, eps: &Rational, step: &Rational) -> Result<SpanningReport, Error> {
    if n == 0 {
        return Err(Error::Usage("n must be at least 1".into()));
    }
    if !eps.is_positive() || !step.is_positive() {
        return Err(Error::Usage("ε and the grid step must be positive".into()));
    }
    if step > eps {
        return Err(Error::Usage("grid step exceeds ε".into()));
    }
    let space = sys.space();
    let points = grid(step, space);
    let nn = n as usize;
    let mut exact = vec![Rational::zero(); points.len() * nn];
    for (k, x) in points.iter().enumerate() {
        exact[k * nn] = x.clone();
    }
    let mut all_continuous = true;
    let mut lip = Vec::with_capacity(nn);
    for i in 1..nn {
        let f = sys.map_at(i as u64 - 1)?;
        all_continuous &= continuous_on(&f, space);
        lip.push(f.lipschitz());
        for k in 0..points.len() {
            let y = f.eval_unchecked(&exact[k * nn + i - 1]);
            exact[k * nn + i] = match space {
                Space::Circle if y.is_one() => Rational::zero(),
                _ => y,
            };
        }
    }
    let approx = exact.iter().map(to_f64).collect();
    let orbits = Orbits { n: nn, exact, approx };

    // η bounds d_n(x, nearest grid point) for every x in the space.
    let mut growth = Rational::one();
    let mut worst = Rational::one();
    for l in &lip {
        growth *= l;
        if growth > worst {
            worst = growth.clone();
        }
    }
    let eta = &worst * step / qi(2);
    let l_star = sys.uniform_lipschitz(n)?.running_max.last().cloned().unwrap_or_else(Rational::one);
    let coarse = match l_star.to_f64() {
        Some(l) if l > 1.0 => to_f64(step) > to_f64(eps) / (2.0 * l.powi(n as i32)),
        _ => *step > eps / qi(2),
    };

    let separated_lower = greedy(&orbits, points.len(), eps, space, false);
    let spanning_upper = if all_continuous && eta < *eps {
        Some(greedy(&orbits, points.len(), &(eps - &eta), space, true))
    } else {
        None
    };
    Ok(SpanningReport {
        system_id: sys.id().to_string(),
        n,
        eps: eps.clone(),
        grid_step: step.clone(),
        grid_points: points.len(),
        separated_lower,
        spanning_upper,
        coarse,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanningRow {
    pub n: u64,
    /// `(1/n) log₂` of the separated lower bound.
    pub lower_bits: f64,
    pub upper_bits: Option<f64>,
    /// `log₂(count_n / count_{n-1})` when the previous horizon is present.
    pub lower_increment: Option<f64>,
    pub upper_increment: Option<f64>,
    #[serde(with = "rational::serde_str")]
    pub grid_step: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanningTrace {
    #[serde(with = "rational::serde_str")]
    pub eps: Rational,
    pub rows: Vec<SpanningRow>,
}

/// Per-`ε` traces of entropy quotients and growth increments, ordered by
/// decreasing `ε`.
pub fn entropy_from_spanning(reports: &[SpanningReport]) -> Result<Vec<SpanningTrace>, Error> {
    if let Some(first) = reports.first() {
        if reports.iter().any(|r| r.system_id != first.system_id) {
            return Err(Error::Usage("spanning reports come from different systems".into()));
        }
    }
    let mut by_eps: Vec<(Rational, Vec<&SpanningReport>)> = Vec::new();
    for r in reports {
        match by_eps.iter_mut().find(|(e, _)| *e == r.eps) {
            Some((_, v)) => v.push(r),
            None => by_eps.push((r.eps.clone(), vec![r])),
        }
    }
    by_eps.sort_by(|a, b| b.0.cmp(&a.0));
    let log2c = |c: usize| (c as f64).log2();
    Ok(by_eps
        .into_iter()
        .map(|(eps, mut rs)| {
            rs.sort_by_key(|r| r.n);
            let rows = rs
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let prev = i.checked_sub(1).map(|j| rs[j]).filter(|p| p.n + 1 == r.n);
                    SpanningRow {
                        n: r.n,
                        lower_bits: log2c(r.separated_lower) / r.n as f64,
                        upper_bits: r.spanning_upper.map(|u| log2c(u) / r.n as f64),
                        lower_increment: prev.map(|p| log2c(r.separated_lower) - log2c(p.separated_lower)),
                        upper_increment: prev.and_then(|p| Some(log2c(r.spanning_upper?) - log2c(p.spanning_upper?))),
                        grid_step: r.grid_step.clone(),
                    }
                })
                .collect();
            SpanningTrace { eps, rows }
        })
        .collect())
}

/// True if, at every shared horizon, a smaller `ε` never yields a smaller
/// separated count.
pub fn eps_monotone(reports: &[SpanningReport]) -> bool {
    reports.iter().all(|a| {
        reports
            .iter()
            .filter(|b| b.n == a.n && b.eps < a.eps)
            .all(|b| b.separated_lower >= a.separated_lower)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn identity_static_net() {
        let s = NdSystem::constant("identity", Space::Interval, "id", PwAffineMap::identity());
        for n in [1, 3, 6] {
            let r = spanning_bounds(&s, n, &q(1, 10), &q(1, 100)).unwrap();
            assert_eq!(r.separated_lower, 11);
            assert_eq!(r.spanning_upper, Some(6));
            let wide = spanning_bounds(&s, n, &q(1, 5), &q(1, 100)).unwrap();
            assert!(wide.separated_lower >= 5);
        }
    }

    #[test]
    fn coarse_grid_rejected_or_flagged() {
        let s = NdSystem::constant("d", Space::Circle, "d", PwAffineMap::times_mod_one(2));
        assert!(matches!(spanning_bounds(&s, 3, &q(1, 10), &q(1, 5)), Err(Error::Usage(_))));
        let r = spanning_bounds(&s, 6, &q(1, 10), &q(1, 20)).unwrap();
        assert!(r.coarse);
        assert_eq!(r.spanning_upper, None);
    }

    #[test]
    fn doubling_grows_by_one_bit() {
        let s = NdSystem::constant("d", Space::Circle, "d", PwAffineMap::times_mod_one(2));
        let reports: Vec<_> =
            (6..=8).map(|n| spanning_bounds(&s, n, &q(1, 16), &q(1, 4096)).unwrap()).collect();
        let traces = entropy_from_spanning(&reports).unwrap();
        for row in &traces[0].rows[1..] {
            let inc = row.lower_increment.unwrap();
            assert!((inc - 1.0).abs() < 0.1, "increment {inc}");
        }
    }
}
