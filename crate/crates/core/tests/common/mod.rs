//! Instance generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use ndsentropy::interval::Interval;
use ndsentropy::map::{AffinePiece, PwAffineMap};
use ndsentropy::partition::{Cell, Partition};
use ndsentropy::rational::{q, qi, Rational};
use ndsentropy::system::{NamedMap, NdSystem, Space};
use ndsentropy::{IntervalSet, PwConstMeasure};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` distinct sorted rationals in `(0,1)` with denominator `den`.
fn cuts(r: &mut ChaCha8Rng, count: usize, den: i64) -> Vec<Rational> {
    let mut pool: Vec<i64> = (1..den).collect();
    pool.shuffle(r);
    let mut v: Vec<i64> = pool.into_iter().take(count).collect();
    v.sort_unstable();
    v.into_iter().map(|k| q(k, den)).collect()
}

fn value(r: &mut ChaCha8Rng) -> Rational {
    let den = [2i64, 3, 4, 5, 6][r.gen_range(0..5)];
    q(r.gen_range(0..=den), den)
}

/// A random piecewise-affine self-map of `[0,1]`, possibly discontinuous
/// and possibly with flat pieces.
pub fn random_map(r: &mut ChaCha8Rng) -> PwAffineMap {
    let pieces = r.gen_range(1..=3);
    let den = [4i64, 5, 6, 8][r.gen_range(0..4)];
    let mut bps = vec![qi(0)];
    bps.extend(cuts(r, pieces - 1, den));
    bps.push(qi(1));
    let continuous = r.gen_bool(0.5);
    let mut ps = Vec::new();
    let mut prev_end: Option<Rational> = None;
    for w in bps.windows(2) {
        let y0 = match (&prev_end, continuous) {
            (Some(y), true) => y.clone(),
            _ => value(r),
        };
        let y1 = if r.gen_bool(0.1) { y0.clone() } else { value(r) };
        let slope = (&y1 - &y0) / (&w[1] - &w[0]);
        let intercept = &y0 - &slope * &w[0];
        ps.push(AffinePiece::new(slope, intercept));
        prev_end = Some(y1);
    }
    PwAffineMap::new(bps, ps).expect("generated map stays in [0,1]")
}

/// A random nonautonomous interval system: a periodic word over up to three
/// random maps.
pub fn random_system(r: &mut ChaCha8Rng) -> NdSystem {
    let count = r.gen_range(1..=3);
    let maps: Vec<NamedMap> =
        (0..count).map(|k| NamedMap { name: format!("m{k}"), map: random_map(r) }).collect();
    let word: Vec<usize> = (0..r.gen_range(1..=3)).map(|_| r.gen_range(0..count)).collect();
    NdSystem::new("random", Space::Interval, maps, ndsentropy::schedule::Schedule::Periodic { maps: word })
        .expect("valid random system")
}

/// Partition of `[0,1]` into `k` intervals at random rational cuts, with
/// half-open cells; some cells are unions of two intervals.
pub fn random_partition(r: &mut ChaCha8Rng) -> Partition {
    let k = r.gen_range(2..=4);
    let den = [6i64, 7, 9, 10][r.gen_range(0..4)];
    let mut bps = vec![qi(0)];
    bps.extend(cuts(r, k - 1, den));
    bps.push(qi(1));
    let ivs: Vec<Interval> = bps
        .windows(2)
        .enumerate()
        .map(|(j, w)| Interval::new(w[0].clone(), w[1].clone(), true, j + 2 == bps.len()).unwrap())
        .collect();
    let labels = r.gen_range(2..=k);
    let mut sets: Vec<Vec<Interval>> = vec![Vec::new(); labels];
    for (j, iv) in ivs.into_iter().enumerate() {
        let l = if j < labels { j } else { r.gen_range(0..labels) };
        sets[l].push(iv);
    }
    Partition::new(
        sets.into_iter()
            .enumerate()
            .map(|(j, s)| Cell { name: format!("c{j}"), set: IntervalSet::from_intervals(s) })
            .collect(),
    )
    .expect("generated partition is valid")
}

/// Forward-itinerary oracle for the cells of `P_0^n` under Lebesgue
/// measure: pushes each cell of `P_0` forward through the branches of
/// `f_0, f_1, …`, splitting by the next partition and the next map's
/// breakpoints, and keeps the affine chart back to time 0. Returns the
/// Lebesgue masses of the nonempty itineraries, sorted.
pub fn itinerary_masses(sys: &NdSystem, parts: &dyn Fn(u64) -> Partition, n: u64) -> Vec<Rational> {
    // Time-0 interval, affine chart to the current time, itinerary so far.
    struct Branch {
        lo: Rational,
        hi: Rational,
        slope: Rational,
        icpt: Rational,
        word: Vec<usize>,
    }
    let mut live: Vec<Branch> = vec![Branch { lo: qi(0), hi: qi(1), slope: qi(1), icpt: qi(0), word: vec![] }];
    for k in 0..n {
        let p = parts(k);
        let mut next = Vec::new();
        for b in &live {
            let img = |x: &Rational| &b.slope * x + &b.icpt;
            let (ya, yb) = (img(&b.lo), img(&b.hi));
            let (a, c) = if ya <= yb { (ya, yb) } else { (yb, ya) };
            for (ci, cell) in p.cells().iter().enumerate() {
                for comp in cell.set.components() {
                    let lo = if comp.lo > a { comp.lo.clone() } else { a.clone() };
                    let hi = if comp.hi < c { comp.hi.clone() } else { c.clone() };
                    if b.slope == qi(0) {
                        // A constant branch: the whole time-0 interval follows one cell.
                        if comp.contains(&a) {
                            let mut word = b.word.clone();
                            word.push(ci);
                            next.push(Branch {
                                lo: b.lo.clone(),
                                hi: b.hi.clone(),
                                slope: qi(0),
                                icpt: b.icpt.clone(),
                                word,
                            });
                        }
                        continue;
                    }
                    if lo >= hi {
                        continue;
                    }
                    let back = |y: &Rational| (y - &b.icpt) / &b.slope;
                    let (x0, x1) = (back(&lo), back(&hi));
                    let (x0, x1) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
                    let mut word = b.word.clone();
                    word.push(ci);
                    next.push(Branch { lo: x0, hi: x1, slope: b.slope.clone(), icpt: b.icpt.clone(), word });
                }
            }
        }
        if k + 1 == n {
            live = next;
            break;
        }
        // Push through f_k branch by branch.
        let f = sys.map_at(k).unwrap();
        let mut pushed = Vec::new();
        for b in next {
            let img = |x: &Rational| &b.slope * x + &b.icpt;
            let (ya, yb) = (img(&b.lo), img(&b.hi));
            let (a, c) = if ya <= yb { (ya, yb) } else { (yb, ya) };
            for (j, piece) in f.pieces().iter().enumerate() {
                let dom = f.piece_domain(j);
                let lo = if dom.lo > a { dom.lo.clone() } else { a.clone() };
                let hi = if dom.hi < c { dom.hi.clone() } else { c.clone() };
                if lo >= hi && !(b.slope == qi(0) && dom.contains(&a)) {
                    continue;
                }
                let (x0, x1) = if b.slope == qi(0) {
                    (b.lo.clone(), b.hi.clone())
                } else {
                    let back = |y: &Rational| (y - &b.icpt) / &b.slope;
                    let (x0, x1) = (back(&lo), back(&hi));
                    if x0 <= x1 { (x0, x1) } else { (x1, x0) }
                };
                pushed.push(Branch {
                    lo: x0,
                    hi: x1,
                    slope: &piece.slope * &b.slope,
                    icpt: &piece.slope * &b.icpt + &piece.intercept,
                    word: b.word.clone(),
                });
                if b.slope == qi(0) {
                    break;
                }
            }
        }
        live = pushed;
    }
    let mut by_word: std::collections::BTreeMap<Vec<usize>, Rational> = Default::default();
    for b in live {
        *by_word.entry(b.word).or_insert_with(|| qi(0)) += &b.hi - &b.lo;
    }
    let mut masses: Vec<Rational> = by_word.into_values().filter(|m| *m > qi(0)).collect();
    masses.sort();
    masses
}

pub fn sorted_nonzero(mut v: Vec<Rational>) -> Vec<Rational> {
    v.retain(|m| *m > qi(0));
    v.sort();
    v
}

/// Smallest subfamily covering all atoms, by exhaustive search in order of
/// size.
pub fn brute_set_cover(sets: &[Vec<usize>], n_atoms: usize) -> Option<usize> {
    let masks: Vec<u64> = sets.iter().map(|s| s.iter().fold(0u64, |m, &a| m | 1 << a)).collect();
    let full = if n_atoms == 64 { u64::MAX } else { (1u64 << n_atoms) - 1 };
    let k = masks.len();
    (0..=k).find(|&size| {
        fn choose(masks: &[u64], start: usize, left: usize, acc: u64, full: u64) -> bool {
            if left == 0 {
                return acc == full;
            }
            (start..masks.len()).any(|i| choose(masks, i + 1, left - 1, acc | masks[i], full))
        }
        choose(&masks, 0, size, 0, full)
    })
}

/// `max_{j<n} d(f_0^j x, f_0^j y)` from exact orbits.
pub fn bowen_distance(sys: &NdSystem, n: u64, x: &Rational, y: &Rational) -> Rational {
    let (ox, oy) = (sys.orbit(0, n, x).unwrap(), sys.orbit(0, n, y).unwrap());
    ox.iter()
        .zip(&oy)
        .map(|(a, b)| sys.space().distance_exact(a, b))
        .max()
        .unwrap()
}

pub fn lebesgue() -> PwConstMeasure {
    PwConstMeasure::lebesgue()
}
