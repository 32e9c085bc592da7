//! Shared auction fixture and the contract-vs-bid-log comparison driver.

#![allow(dead_code)]

use carbid_core::crypto::{Address, Keypair};
use carbid_core::error::ContractError;
use carbid_core::event::Event;
use carbid_core::{GenesisConfig, Target, WorldState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::oracles::{self, BidVerdict, Op};

pub struct Fixture {
    pub state: WorldState,
    pub agent: Address,
    pub people: Vec<Address>,
}

/// Participant 0 owns car 1 (10000, age 2, 50k miles, 500 accident, 1 trade
/// → reserve 5296); auction 1 runs from t=100 to t=700.
pub fn fixture(balances: &[u64]) -> Fixture {
    let agent = Keypair::from_label("agent").address();
    let people: Vec<Address> = (0..balances.len())
        .map(|i| Keypair::from_label(&format!("person-{i}")).address())
        .collect();
    let mut g = GenesisConfig::new(agent, Target::MAX);
    for (a, &b) in people.iter().zip(balances) {
        g = g.with_balance(*a, b);
    }
    let mut state = g.state();
    let (car, _) = state
        .registry
        .add_car(agent, people[0], 10_000, 2, 50_000)
        .unwrap();
    state.registry.upload_accident_cost(agent, car, 500).unwrap();
    state.registry.cars.get_mut(&car).unwrap().trade_times = 1;
    let (id, ev) = state.start_auction(agent, car, 600, 100).unwrap();
    assert_eq!(id, 1);
    assert!(matches!(ev, Event::AuctionStarted { tprice: 5296, end_time: 700, .. }));
    Fixture { state, agent, people }
}

pub fn verdict(r: &Result<Event, ContractError>) -> BidVerdict {
    match r {
        Ok(_) => BidVerdict::Accepted,
        Err(ContractError::AuctionExpired) => BidVerdict::Expired,
        Err(ContractError::BidTooLow { .. }) => BidVerdict::TooLow,
        Err(ContractError::BelowReserve { .. }) => BidVerdict::BelowReserve,
        Err(ContractError::SelfBid) => BidVerdict::SelfBid,
        Err(ContractError::InsufficientFunds { .. }) => BidVerdict::Unfunded,
        Err(e) => panic!("unexpected revert {e:?}"),
    }
}

pub fn random_ops(rng: &mut ChaCha8Rng, people: usize) -> Vec<Op> {
    let n = rng.random_range(0..30);
    let mut t = 100;
    let mut highest = 0u64;
    (0..n)
        .map(|_| {
            let who = rng.random_range(0..people);
            if rng.random_bool(0.2) {
                return Op::Withdraw { who };
            }
            t += rng.random_range(0..40);
            let amount = match rng.random_range(0..4) {
                0 => rng.random_range(4000..7000),
                1 => highest,
                _ => highest.max(5000) + rng.random_range(1..1500),
            };
            highest = highest.max(amount);
            Op::Bid { who, amount, at: t }
        })
        .collect()
}

/// Drives the contract and the bid-log oracle with the same operations and
/// compares every verdict, withdrawal, and the settled outcome.
pub fn check_against_oracle(balances: &[u64], ops: &[Op]) {
    let mut f = fixture(balances);
    let p = f.people.clone();
    let want = oracles::replay_auction(5296, 700, 0, balances, ops);
    for (i, op) in ops.iter().enumerate() {
        match *op {
            Op::Bid { who, amount, at } => {
                let got = verdict(&f.state.bid(p[who], 1, amount, at));
                assert_eq!(Some(got), want.verdicts[i], "op {i} {op:?}");
            }
            Op::Withdraw { who } => {
                let (got, _) = f.state.withdraw(p[who], 1).unwrap();
                assert_eq!(Some(got), want.withdrawn[i], "op {i} {op:?}");
            }
        }
    }
    let supply: u128 = balances.iter().map(|&b| b as u128).sum();
    assert_eq!(f.state.total_value(), supply);

    f.state.end_auction(1, 700).unwrap();
    let auction = f.state.auctions.get(1).unwrap();
    let car = f.state.registry.get_car_info(1).unwrap();
    match want.winner {
        Some(w) => {
            assert_eq!(car.owner, p[w]);
            assert_eq!(car.trade_times, 2);
            assert_eq!(auction.highest_bidder, Some(p[w]));
        }
        None => {
            assert_eq!(car.owner, p[0]);
            assert_eq!(car.trade_times, 1);
        }
    }
    assert_eq!(auction.highest_bid, want.winning_bid);
    for (who, &bal) in want.final_balances.iter().enumerate() {
        assert_eq!(f.state.balance(&p[who]), bal, "balance of {who}");
    }
    let pending: Vec<(usize, u64)> = (0..p.len())
        .map(|w| (w, auction.pending_return(&p[w])))
        .filter(|&(_, v)| v > 0)
        .collect();
    assert_eq!(pending, want.pending.into_iter().collect::<Vec<_>>());
    assert_eq!(f.state.total_value(), supply);
    assert!(!car.in_auction);
}
