use std::time::Instant;

use carbid_core::block::mine_block_bounded;
use carbid_core::chain::BlockError;
use carbid_core::error::TxError;
use carbid_core::scripted::{replay, run_script, ScriptParams};
use carbid_core::state::BlockContext;
use carbid_core::*;
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");

fn fixture_genesis() -> GenesisConfig {
    GenesisConfig::load(format!("{FIXTURES}/genesis.json")).unwrap()
}

#[test]
fn genesis_state_root_matches_frozen_fixture() {
    let want = std::fs::read_to_string(format!("{FIXTURES}/genesis.state_root")).unwrap();
    let g = fixture_genesis();
    assert_eq!(g.state().state_root().to_hex(), want.trim());
    assert_eq!(g.target, Target::pow2(244));
    assert_eq!(g.supply(), 1_300_000);
}

#[test]
fn scripted_replay_is_deterministic() {
    let started = Instant::now();
    let p = ScriptParams::default();
    let a = run_script(&p).unwrap();
    let b = run_script(&p).unwrap();
    assert_eq!(a.blocks, b.blocks);
    assert_eq!(a.chain.head().state.state_root(), b.chain.head().state.state_root());
    let replayed = replay(&a.genesis, &a.blocks).unwrap();
    assert_eq!(replayed.head_hash(), a.chain.head_hash());
    assert_eq!(replayed.head().state.state_root(), a.chain.head().state.state_root());
    assert_eq!(a.stats.transactions, 500);
    assert!(started.elapsed().as_secs() < 10);
}

#[test]
fn scripted_workload_conserves_value() {
    let run = run_script(&ScriptParams::default()).unwrap();
    let s = &run.stats;
    assert!(s.auctions_started >= 50, "{s:?}");
    assert!(s.bids_accepted >= 200, "{s:?}");
    assert!(s.withdrawals > 0 && s.auctions_settled > 0 && s.reverted > 0, "{s:?}");
    let reward = run.genesis.block_reward as u128;
    for entry in run.chain.canonical() {
        let h = entry.block.height() as u128;
        assert_eq!(entry.state.total_value(), run.genesis.supply() + reward * h);
    }
}

#[test]
fn nonces_are_gapless_per_sender() {
    let run = run_script(&ScriptParams::default()).unwrap();
    let mut seen: std::collections::BTreeMap<Address, u64> = Default::default();
    for b in &run.blocks {
        for tx in &b.transactions {
            let next = seen.entry(tx.sender).or_insert(0);
            assert_eq!(tx.nonce, *next);
            *next += 1;
        }
    }
    let head = &run.chain.head().state;
    for (who, n) in seen {
        assert_eq!(head.nonce(&who), n);
    }
}

fn keys() -> (Keypair, Keypair, Address) {
    (
        Keypair::from_label("alice"),
        Keypair::from_label("bob"),
        Keypair::from_label("miner").address(),
    )
}

fn transfer(from: &Keypair, nonce: u64, to: Address, amount: u64) -> Transaction {
    UnsignedTx::new(from.address(), nonce, 10, TxPayload::Transfer { to, amount }).sign(from)
}

#[test]
fn transfer_arithmetic_and_inadmissible_overdraft() {
    let (alice, bob, miner) = keys();
    let g = GenesisConfig::new(alice.address(), Target::MAX)
        .with_balance(alice.address(), 200)
        .with_balance(bob.address(), 150);
    let ctx = BlockContext { height: 1, timestamp: 1, miner };
    let (s, out) = apply_transaction(&g.state(), &transfer(&alice, 0, bob.address(), 100), &ctx).unwrap();
    assert!(out.revert.is_none());
    assert_eq!(s.balance(&alice.address()), 90);
    assert_eq!(s.balance(&bob.address()), 250);
    assert_eq!(s.balance(&miner), 10);
    let err = apply_transaction(&g.state(), &transfer(&bob, 0, alice.address(), 200), &ctx).unwrap_err();
    assert_eq!(err, TxError::InsufficientFunds { needed: 210, available: 150 });
}

#[test]
fn reverted_bid_still_charges_fee() {
    let (alice, bob, miner) = keys();
    let agent = alice.clone();
    let g = GenesisConfig::new(agent.address(), Target::MAX)
        .with_balance(agent.address(), 1000)
        .with_balance(bob.address(), 100_000);
    let ctx = |t| BlockContext { height: 1, timestamp: t, miner };
    let sign = |k: &Keypair, n, p| UnsignedTx::new(k.address(), n, 10, p).sign(k);
    let mut s = g.state();
    for (n, p) in [
        (0, TxPayload::AddCar { owner: agent.address(), initial_price: 10_000, age_years: 0, miles: 0 }),
        (1, TxPayload::StartAuction { car_id: 1, duration_seconds: 60 }),
    ] {
        let out = s.apply_transaction(&sign(&agent, n, p), &ctx(0)).unwrap();
        assert!(out.revert.is_none());
    }
    let out = s
        .apply_transaction(&sign(&bob, 0, TxPayload::Bid { auction_id: 1, amount: 9000 }), &ctx(5))
        .unwrap();
    assert!(matches!(out.revert, Some(ContractError::BelowReserve { .. })));
    assert_eq!(s.nonce(&bob.address()), 1);
    assert_eq!(s.balance(&bob.address()), 99_990);
    // an unfunded bid is a revert, not an inadmissible tx
    let out = s
        .apply_transaction(&sign(&bob, 1, TxPayload::Bid { auction_id: 1, amount: 200_000 }), &ctx(5))
        .unwrap();
    assert!(matches!(out.revert, Some(ContractError::InsufficientFunds { .. })));
    let stale = sign(&bob, 0, TxPayload::Withdraw { auction_id: 1 });
    assert!(matches!(
        s.apply_transaction(&stale, &ctx(5)),
        Err(TxError::BadNonce { expected: 2, got: 0 })
    ));
}

#[test]
fn empty_block_only_pays_reward() {
    let (alice, _, miner) = keys();
    let g = GenesisConfig::new(alice.address(), Target::MAX).with_balance(alice.address(), 500);
    let b = mine_block(&g.block().header, vec![], g.target, 10, miner).unwrap();
    let (s, receipts) = apply_block(&g.state(), &b).unwrap();
    assert!(receipts.is_empty());
    let mut want = g.state();
    want.credit_block_reward(&miner);
    assert_eq!(s, want);
    assert_eq!(s.balance(&miner), 50);
}

#[test]
fn block_equals_folded_transactions_plus_reward() {
    let (alice, bob, miner) = keys();
    let g = GenesisConfig::new(alice.address(), Target::MAX).with_balance(alice.address(), 5000);
    let txs: Vec<_> = (0..3).map(|n| transfer(&alice, n, bob.address(), 100 + n)).collect();
    let b = mine_block(&g.block().header, txs.clone(), g.target, 10, miner).unwrap();
    let (via_block, receipts) = apply_block(&g.state(), &b).unwrap();
    let ctx = BlockContext::of(&b);
    let mut folded = g.state();
    for tx in &txs {
        folded = apply_transaction(&folded, tx, &ctx).unwrap().0;
    }
    folded.credit_block_reward(&miner);
    assert_eq!(via_block.state_root(), folded.state_root());
    assert_eq!(receipts.len(), 3);
    assert_eq!(receipts[2].index, 2);
}

#[test]
fn validate_block_error_order() {
    let (alice, bob, miner) = keys();
    let g = GenesisConfig::new(alice.address(), Target::pow2(248)).with_balance(alice.address(), 5000);
    let parent = g.block();
    let state = g.state();
    let txs = vec![transfer(&alice, 0, bob.address(), 10)];
    let b = mine_block(&parent.header, txs, g.target, 5, miner).unwrap();
    assert!(validate_block(&b, &parent.header, &state).is_ok());

    // Walk the nonce down until the header fails the target.
    let mut bad = b.clone();
    loop {
        bad.header.pow_nonce = bad.header.pow_nonce.wrapping_sub(1);
        if !bad.header.meets_target() {
            break;
        }
    }
    assert_eq!(validate_block(&bad, &parent.header, &state).unwrap_err(), BlockError::BadPow);

    let remine = |mut blk: Block| {
        blk.header.pow_nonce = 0;
        while !blk.header.meets_target() {
            blk.header.pow_nonce += 1;
        }
        blk
    };
    let mut wrong_height = b.clone();
    wrong_height.header.height = 2;
    let e = validate_block(&remine(wrong_height), &parent.header, &state).unwrap_err();
    assert!(matches!(e, BlockError::BadLinkage { .. }));

    let child = mine_block(&b.header, vec![], g.target, 5, miner).unwrap();
    let mut early = child.clone();
    early.header.timestamp = 4;
    let after = apply_block(&state, &b).unwrap().0;
    let e = validate_block(&remine(early), &b.header, &after).unwrap_err();
    assert!(matches!(e, BlockError::BadTimestamp { .. }));

    let mut tampered = b.clone();
    tampered.transactions.push(transfer(&alice, 1, bob.address(), 10));
    let e = validate_block(&remine(tampered), &parent.header, &state).unwrap_err();
    assert_eq!(e, BlockError::BadTxRoot);

    let stale = vec![transfer(&alice, 0, bob.address(), 10), transfer(&alice, 0, bob.address(), 11)];
    let blk = mine_block(&parent.header, stale, g.target, 5, miner).unwrap();
    let e = validate_block(&blk, &parent.header, &state).unwrap_err();
    assert!(matches!(e, BlockError::BadTransaction { index: 1, reason: TxError::BadNonce { .. } }));
}

#[test]
fn mining_at_2_248_reverifies() {
    let (alice, _, miner) = keys();
    let g = GenesisConfig::new(alice.address(), Target::pow2(248));
    let mut attempts = 0u64;
    let mut parent = g.block();
    for ts in 1..=40 {
        let b = mine_block(&parent.header, vec![], g.target, ts, miner).unwrap();
        assert!(b.header.meets_target());
        assert!(Target::pow2(248).is_met_by(&b.hash()));
        attempts += b.header.pow_nonce + 1;
        parent = b;
    }
    // 256 expected attempts per block; allow a wide band over 40 blocks.
    let mean = attempts as f64 / 40.0;
    assert!((100.0..600.0).contains(&mean), "{mean}");
    let e = mine_block_bounded(&parent.header, vec![], Target::pow2(200), 100, miner, 1000);
    assert!(matches!(e, Err(MineError::NonceSpaceExhausted { .. })));
}

fn build_tree(seed: u64) -> Vec<Block> {
    let (alice, _, _) = keys();
    let g = GenesisConfig::new(alice.address(), Target::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = vec![g.block()];
    for i in 0..25u64 {
        let parent = blocks.choose(&mut rng).unwrap().header.clone();
        let miner = Keypair::from_label(&format!("m{i}")).address();
        blocks.push(mine_block(&parent, vec![], g.target, parent.timestamp + 1, miner).unwrap());
    }
    blocks
}

proptest! {
    #[test]
    fn fork_choice_ignores_discovery_order(seed in any::<u64>(), shuffle in any::<u64>()) {
        let blocks = build_tree(seed);
        let head = fork_choice(&blocks).unwrap().hash();
        let mut shuffled = blocks.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        prop_assert_eq!(fork_choice(&shuffled).unwrap().hash(), head);

        // The incremental chain agrees no matter the arrival order.
        let (alice, _, _) = keys();
        let mut chain = Chain::new(GenesisConfig::new(alice.address(), Target::MAX));
        let mut pending: Vec<Block> = shuffled.into_iter().filter(|b| b.height() > 0).collect();
        while !pending.is_empty() {
            pending.retain(|b| chain.insert(b.clone()).is_err() && !chain.contains(&b.hash()));
        }
        prop_assert_eq!(chain.head_hash(), head);
    }

    #[test]
    fn state_root_ignores_insertion_order(mut amounts in proptest::collection::vec(1u64..1000, 1..10)) {
        let addrs: Vec<Address> = (0..amounts.len())
            .map(|i| Keypair::from_label(&format!("k{i}")).address())
            .collect();
        let agent = addrs[0];
        let mut fwd = GenesisConfig::new(agent, Target::MAX);
        for (a, v) in addrs.iter().zip(&amounts) {
            fwd = fwd.with_balance(*a, *v);
        }
        let mut rev = GenesisConfig::new(agent, Target::MAX);
        for (a, v) in addrs.iter().zip(&amounts).rev() {
            rev = rev.with_balance(*a, *v);
        }
        prop_assert_eq!(fwd.state().state_root(), rev.state().state_root());
        amounts[0] += 1;
        let bumped = GenesisConfig::new(agent, Target::MAX).with_balance(addrs[0], amounts[0]);
        let orig = GenesisConfig::new(agent, Target::MAX).with_balance(addrs[0], amounts[0] - 1);
        prop_assert_ne!(bumped.state().state_root(), orig.state().state_root());
    }
}

fn arb_payload(people: Vec<Address>) -> impl Strategy<Value = TxPayload> {
    let pick = proptest::sample::select(people);
    prop_oneof![
        (pick.clone(), 0u64..3000).prop_map(|(to, amount)| TxPayload::Transfer { to, amount }),
        (pick, 1u64..20_000, 0u64..10, 0u64..250_000).prop_map(|(owner, p, a, m)| TxPayload::AddCar {
            owner,
            initial_price: p,
            age_years: a,
            miles: m
        }),
        (1u64..6, 0u64..800).prop_map(|(car_id, cost)| TxPayload::UploadAccidentCost { car_id, cost }),
        (1u64..6, 0u64..40).prop_map(|(car_id, d)| TxPayload::StartAuction { car_id, duration_seconds: d }),
        (1u64..8, 0u64..25_000).prop_map(|(auction_id, amount)| TxPayload::Bid { auction_id, amount }),
        (1u64..8).prop_map(|auction_id| TxPayload::Withdraw { auction_id }),
        (1u64..8).prop_map(|auction_id| TxPayload::EndAuction { auction_id }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Arbitrary signed traffic keeps registry and auction state consistent
    /// and never creates or destroys value.
    #[test]
    fn fuzzed_traffic_keeps_state_consistent(
        ops in proptest::collection::vec(
            (0usize..4, arb_payload((0..4).map(|i| Keypair::from_label(&format!("f{i}")).address()).collect()), 0u64..15),
            1..80,
        )
    ) {
        let keys: Vec<Keypair> = (0..4).map(|i| Keypair::from_label(&format!("f{i}"))).collect();
        let miner = Keypair::from_label("fuzz-miner").address();
        let mut g = GenesisConfig::new(keys[0].address(), Target::MAX);
        for k in &keys {
            g = g.with_balance(k.address(), 40_000);
        }
        let mut s = g.state();
        let mut now = 0;
        for (who, payload, dt) in ops {
            now += dt;
            let k = &keys[who];
            let tx = UnsignedTx::new(k.address(), s.nonce(&k.address()), 10, payload).sign(k);
            let ctx = BlockContext { height: 1, timestamp: now, miner };
            let _ = s.apply_transaction(&tx, &ctx);
            prop_assert_eq!(s.total_value(), g.supply());
            for car in s.registry.cars.values() {
                let open = s.auctions.open_auction_by_car.get(&car.car_id);
                prop_assert_eq!(car.in_auction, open.is_some());
                if let Some(id) = open {
                    let a = s.auctions.get(*id).unwrap();
                    prop_assert!(!a.ended && a.car_id == car.car_id);
                }
            }
            for a in s.auctions.auctions.values() {
                prop_assert_eq!(a.highest_bid == 0, a.highest_bidder.is_none());
                if a.highest_bidder.is_some() {
                    prop_assert!(a.highest_bid >= a.tprice);
                }
            }
        }
    }
}
