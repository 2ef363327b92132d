mod common;

use common::*;
use ndsentropy::information::{conditional_entropy, joint_entropy, shannon_entropy};
use ndsentropy::interval::Interval;
use ndsentropy::partition::{joined_masses, pullback_partition, PartitionSequence};
use ndsentropy::rational::{q, qi, Rational};
use ndsentropy::{Budget, IntervalSet, MeasureSequence};
use proptest::prelude::*;
use rand::Rng;

fn rational_in_unit() -> impl Strategy<Value = Rational> {
    (0i64..=360, prop::sample::select(vec![360i64, 7 * 360, 11 * 13])).prop_map(|(k, d)| q(k.min(d), d))
}

fn interval_set(r: &mut rand_chacha::ChaCha8Rng) -> IntervalSet {
    let den = 12;
    let mut ivs = Vec::new();
    for _ in 0..r.gen_range(1..=3) {
        let a = r.gen_range(0..den);
        let b = r.gen_range(a..=den);
        ivs.push(Interval::new(q(a, den), q(b, den), r.gen_bool(0.5), r.gen_bool(0.5)).unwrap_or(Interval::point(q(a, den))));
    }
    IntervalSet::from_intervals(ivs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_matches_stepwise_evaluation(seed in any::<u64>(), x in rational_in_unit()) {
        let mut r = rng(seed);
        let sys = random_system(&mut r);
        let n = r.gen_range(1..=4);
        // Composites can be unrepresentable when an outer jump meets a closed end.
        if let Ok(c) = sys.compose_window(1, n, Budget::default()) {
            prop_assert_eq!(c.eval(&x).unwrap(), sys.evaluate(1, n, &x).unwrap());
        }
    }

    #[test]
    fn preimage_is_adjoint_to_evaluation(seed in any::<u64>(), x in rational_in_unit()) {
        let mut r = rng(seed);
        let f = random_map(&mut r);
        let s = interval_set(&mut r);
        let pre = f.preimage(&s);
        prop_assert_eq!(pre.contains(&x), s.contains(&f.eval(&x).unwrap()));
    }

    #[test]
    fn pushforward_bookkeeping(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_map(&mut r);
        let g = random_map(&mut r);
        let mu = lebesgue().pushforward(&g);
        let pushed = mu.pushforward(&f);
        prop_assert_eq!(pushed.total_mass(), qi(1));
        let s = interval_set(&mut r);
        prop_assert_eq!(pushed.mass_of(&s), mu.mass_of(&f.preimage(&s)));
    }

    #[test]
    fn power_system_steps_are_windows(seed in any::<u64>(), x in rational_in_unit(), m in 1u64..4) {
        let mut r = rng(seed);
        let sys = random_system(&mut r);
        if let Ok(p) = sys.power(m) {
            for n in 0..3u64 {
                prop_assert_eq!(p.evaluate(n, 1, &x).unwrap(), sys.evaluate(n * m, m, &x).unwrap());
            }
        }
    }

    #[test]
    fn joined_masses_conserve_mass(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sys = random_system(&mut r);
        let seq = PartitionSequence::periodic("p", vec![random_partition(&mut r), random_partition(&mut r)]).unwrap();
        let mu = lebesgue().pushforward(&random_map(&mut r));
        let n = r.gen_range(1..=4);
        let total: Rational = joined_masses(&sys, &seq, &mu, 0, n, Budget::default()).unwrap().into_iter().sum();
        prop_assert_eq!(total, qi(1));
    }

    #[test]
    fn entropy_monotone_and_subadditive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mu = lebesgue().pushforward(&random_map(&mut r));
        let (p, q_) = (random_partition(&mut r), random_partition(&mut r));
        let b = Budget::default();
        let j = joint_entropy(&mu, &p, &q_, b).unwrap();
        let (hp, hq) = (shannon_entropy(&mu, &p), shannon_entropy(&mu, &q_));
        prop_assert!(j >= hp.max(hq) - 1e-12);
        prop_assert!(j <= hp + hq + 1e-12);
        prop_assert!(conditional_entropy(&mu, &p, &q_, b).unwrap() >= -1e-12);
    }

    #[test]
    fn refinement_commutes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (p, q_) = (random_partition(&mut r), random_partition(&mut r));
        let b = Budget::default();
        let pq = p.refine(&q_, b).unwrap();
        let qp = q_.refine(&p, b).unwrap();
        prop_assert!(pq.equal_mod_zero(&qp));
        prop_assert!(pq.is_refined_by_check(&p) && pq.is_refined_by_check(&q_));
    }

    #[test]
    fn pullback_preserves_conditional_masses(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sys = random_system(&mut r);
        let ims = MeasureSequence::new(sys.clone(), lebesgue());
        let (p, q_) = (random_partition(&mut r), random_partition(&mut r));
        let i = r.gen_range(0..=3);
        let b = Budget::default();
        let (pp, pq) = (pullback_partition(&sys, 0, i, &p).unwrap(), pullback_partition(&sys, 0, i, &q_).unwrap());
        let mu_i = ims.at(i).unwrap();
        let left = sorted_nonzero(pp.refine(&pq, b).unwrap().masses(&ims.initial()));
        let right = sorted_nonzero(p.refine(&q_, b).unwrap().masses(&mu_i));
        prop_assert_eq!(left, right);
    }

    #[test]
    fn entropy_is_lipschitz_in_rokhlin_distance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sys = random_system(&mut r);
        let ims = MeasureSequence::new(sys.clone(), lebesgue());
        let p = PartitionSequence::periodic("p", vec![random_partition(&mut r), random_partition(&mut r)]).unwrap();
        let q_ = PartitionSequence::periodic("q", vec![random_partition(&mut r)]).unwrap();
        let n = r.gen_range(1..=4);
        let b = Budget::default();
        let h = |s: &PartitionSequence| ndsentropy::information::entropy_of_masses(
            &joined_masses(&sys, s, &lebesgue(), 0, n, b).unwrap());
        let d = ndsentropy::information::rokhlin_distance(&ims, &p, &q_, n, b).unwrap();
        prop_assert!((h(&p) - h(&q_)).abs() / n as f64 <= d.value + 1e-9);
    }
}

#[test]
fn most_random_windows_compose() {
    // Guards the two properties above against passing vacuously.
    let ok = (0..200u64)
        .filter(|&s| {
            let mut r = rng(s);
            let sys = random_system(&mut r);
            let n = r.gen_range(1..=4);
            sys.compose_window(1, n, Budget::default()).is_ok() && sys.power(2).is_ok()
        })
        .count();
    assert!(ok >= 120, "{ok} of 200 composed");
}
