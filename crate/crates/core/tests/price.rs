mod oracles;

use carbid_core::crypto::Keypair;
use carbid_core::registry::CarRegistryState;
use carbid_core::estimate_price;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
struct CarSpec {
    initial: u64,
    age: u64,
    miles: u64,
    accidents: Vec<u64>,
    trades: u64,
}

fn random_car(rng: &mut ChaCha8Rng) -> CarSpec {
    let n = rng.random_range(0..5);
    CarSpec {
        initial: rng.random_range(1..2_000_000),
        age: rng.random_range(0..40),
        miles: rng.random_range(0..260_000),
        accidents: (0..n).map(|_| rng.random_range(1..20_000)).collect(),
        trades: rng.random_range(0..30),
    }
}

fn lib_price(c: &CarSpec) -> u64 {
    let total: u128 = c.accidents.iter().map(|&a| a as u128).sum();
    estimate_price(c.initial, c.age, c.miles, total, c.trades)
}

fn oracle_price(c: &CarSpec) -> u64 {
    oracles::price(c.initial, c.age, c.miles, &c.accidents, c.trades)
}

#[test]
fn worked_examples() {
    assert_eq!(oracles::price(10_000, 0, 0, &[], 0), 10_000);
    assert_eq!(oracles::price(10_000, 2, 50_000, &[500], 1), 5296);
    assert_eq!(oracles::price(1000, 0, 0, &[5000], 0), 0);
    assert_eq!(estimate_price(10_000, 0, 0, 0, 0), 10_000);
    assert_eq!(estimate_price(10_000, 2, 50_000, 500, 1), 5296);
    assert_eq!(estimate_price(1000, 0, 0, 5000, 0), 0);
}

#[test]
fn registry_price_matches_oracle_on_random_cars() {
    let agent = Keypair::from_label("agent").address();
    let owner = Keypair::from_label("owner").address();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut reg = CarRegistryState::new(agent);
    for _ in 0..1000 {
        let spec = random_car(&mut rng);
        let (id, _) = reg
            .add_car(agent, owner, spec.initial, spec.age, spec.miles)
            .unwrap();
        for &a in &spec.accidents {
            reg.upload_accident_cost(agent, id, a).unwrap();
        }
        reg.cars.get_mut(&id).unwrap().trade_times = spec.trades;
        assert_eq!(reg.calculate_price(id).unwrap(), oracle_price(&spec), "{spec:?}");
    }
}

#[test]
fn price_is_monotone_on_random_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let base = random_car(&mut rng);
        let mut worse = base.clone();
        match rng.random_range(0..4) {
            0 => worse.age += rng.random_range(1..5),
            1 => worse.miles += rng.random_range(1..50_000),
            2 => worse.accidents.push(rng.random_range(1..5_000)),
            _ => worse.trades += rng.random_range(1..5),
        }
        assert!(lib_price(&worse) <= lib_price(&base), "{base:?} -> {worse:?}");
    }
}

#[test]
fn huge_inputs_do_not_overflow() {
    assert_eq!(estimate_price(u64::MAX, u64::MAX, 0, 0, 0), 0);
    assert_eq!(estimate_price(u64::MAX, 0, 0, 0, 0), u64::MAX);
    assert_eq!(estimate_price(u64::MAX, 0, u64::MAX, 0, 0), 0);
    assert_eq!(estimate_price(500, 0, 0, u128::MAX, u64::MAX), 0);
}

proptest! {
    #[test]
    fn oracle_equivalence(
        initial in 1u64..u64::MAX / 2,
        age in 0u64..80,
        miles in 0u64..300_000,
        accidents in proptest::collection::vec(1u64..1_000_000, 0..6),
        trades in 0u64..80,
    ) {
        let spec = CarSpec { initial, age, miles, accidents, trades };
        prop_assert_eq!(lib_price(&spec), oracle_price(&spec));
    }

    #[test]
    fn bounded_by_initial_price(
        initial in 1u64..u64::MAX,
        age in 0u64..100,
        miles in 0u64..400_000,
        accident in 0u64..u64::MAX,
        trades in 0u64..100,
    ) {
        prop_assert!(estimate_price(initial, age, miles, accident as u128, trades) <= initial);
    }

    #[test]
    fn monotone_in_each_input(
        initial in 1u64..10_000_000,
        age in 0u64..30,
        miles in 0u64..250_000,
        accident in 0u64..100_000,
        trades in 0u64..30,
        bump in 1u64..1000,
    ) {
        let p = estimate_price(initial, age, miles, accident as u128, trades);
        prop_assert!(estimate_price(initial, age + bump, miles, accident as u128, trades) <= p);
        prop_assert!(estimate_price(initial, age, miles + bump, accident as u128, trades) <= p);
        prop_assert!(estimate_price(initial, age, miles, (accident + bump) as u128, trades) <= p);
        prop_assert!(estimate_price(initial, age, miles, accident as u128, trades + bump) <= p);
    }
}
