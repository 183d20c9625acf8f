use oflp_core::oflp::{brute_force, solve, AllocTerm, OflpModel, SolveStatus};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(rng: &mut ChaCha8Rng, binding: bool) -> OflpModel {
    let n = rng.random_range(1..=10);
    let k = rng.random_range(1..=6);
    let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
    let wf: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..50.0)).collect();
    let alloc: Vec<Option<AllocTerm>> = (0..k * n)
        .map(|_| {
            if rng.random_bool(0.1) {
                None
            } else {
                Some(AllocTerm { cost: rng.random_range(0.0..100.0), wet: rng.random_range(0.0..50.0) })
            }
        })
        .collect();
    let m_l_max = if binding { rng.random_range(60.0..150.0) } else { f64::INFINITY };
    OflpModel::from_parts(f, wf, alloc, m_l_max).unwrap()
}

#[test]
fn matches_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut solved = 0;
    for case in 0..400 {
        let m = random_model(&mut rng, case % 2 == 1);
        let exact = brute_force(&m).unwrap();
        let bb = solve(&m);
        assert_eq!(bb.status, exact.status, "case {case}");
        if exact.status == SolveStatus::Optimal {
            assert_eq!(bb.objective, exact.objective, "case {case}: {bb:?} vs {exact:?}");
            assert!(m.is_feasible(&bb.assignment));
            solved += 1;
        }
    }
    assert!(solved > 300);
}

#[test]
fn two_slot_example() {
    let t = |c| Some(AllocTerm { cost: c, wet: 1.0 });
    let m = OflpModel::from_parts(vec![10.0, 12.0], vec![0.0; 2], vec![t(1.0), t(5.0), t(4.0), t(2.0)], 1.5).unwrap();
    assert_eq!(brute_force(&m).unwrap().objective, 25.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_facility_weight_never_lowers_optimum(seed in any::<u64>(), scale in 1.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, seed % 2 == 0);
        let mut heavier = m.clone();
        for f in &mut heavier.facility_cost {
            *f *= scale;
        }
        let a = solve(&m);
        let b = solve(&heavier);
        prop_assert_eq!(a.status, b.status);
        if a.status == SolveStatus::Optimal {
            prop_assert!(b.objective >= a.objective);
        }
    }

    #[test]
    fn solutions_respect_constraints(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, true);
        let s = solve(&m);
        if s.status == SolveStatus::Optimal {
            prop_assert_eq!(s.assignment.len(), m.k);
            for (i, &j) in s.assignment.iter().enumerate() {
                prop_assert!(s.open_slots.contains(&j));
                prop_assert!(m.term(i, j).is_some());
            }
            for &(_, w) in &s.wet_mass {
                prop_assert!(w <= m.m_l_max);
            }
            prop_assert!(s.bound <= s.objective);
        }
    }
}
