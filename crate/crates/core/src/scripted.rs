//! Seeded end-to-end workload: listings, auctions, competing bids, withdrawals
//! and settlements, mined into a block sequence.
//!
//! The script plans each block against the current head state so most
//! transactions succeed, and deliberately mixes in bids that revert (below
//! reserve, not above the highest bid, self-bids) and empty withdrawals.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::{mine_block, Block, Target};
use crate::chain::{Chain, ChainError};
use crate::crypto::{Address, Keypair};
use crate::event::Event;
use crate::genesis::GenesisConfig;
use crate::state::{TxStatus, DEFAULT_GAS_FEE};
use crate::tx::{AuctionId, Transaction, TxPayload, UnsignedTx};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptParams {
    pub seed: u64,
    pub transactions: usize,
    pub txs_per_block: usize,
    pub seconds_per_block: u64,
    pub bidders: usize,
    pub owners: usize,
}

impl Default for ScriptParams {
    fn default() -> Self {
        ScriptParams {
            seed: 2,
            transactions: 500,
            txs_per_block: 10,
            seconds_per_block: 10,
            bidders: 12,
            owners: 6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptStats {
    pub transactions: usize,
    pub blocks: usize,
    pub cars_added: usize,
    pub auctions_started: usize,
    pub auctions_settled: usize,
    pub bids_accepted: usize,
    pub withdrawals: usize,
    pub reverted: usize,
}

#[derive(Debug, Clone)]
pub struct ScriptRun {
    pub genesis: GenesisConfig,
    pub blocks: Vec<Block>,
    pub chain: Chain,
    pub stats: ScriptStats,
}

pub const SCRIPT_BALANCE: u64 = 10_000_000;

struct Actors {
    agent: Keypair,
    owners: Vec<Keypair>,
    bidders: Vec<Keypair>,
    miner: Address,
}

impl Actors {
    fn new(p: &ScriptParams) -> Self {
        Actors {
            agent: Keypair::from_label("script-agent"),
            owners: (0..p.owners)
                .map(|i| Keypair::from_label(&format!("script-owner-{i}")))
                .collect(),
            bidders: (0..p.bidders)
                .map(|i| Keypair::from_label(&format!("script-bidder-{i}")))
                .collect(),
            miner: Keypair::from_label("script-miner").address(),
        }
    }
}

/// Genesis funding the agent, owners and bidders used by [`run_script`].
pub fn script_genesis(p: &ScriptParams) -> GenesisConfig {
    let actors = Actors::new(p);
    let mut g = GenesisConfig::new(actors.agent.address(), Target::MAX)
        .with_balance(actors.agent.address(), SCRIPT_BALANCE);
    for k in actors.owners.iter().chain(&actors.bidders) {
        g = g.with_balance(k.address(), SCRIPT_BALANCE);
    }
    g
}

struct Planner<'a> {
    rng: ChaCha8Rng,
    nonces: BTreeMap<Address, u64>,
    chain_state: &'a crate::state::WorldState,
}

impl Planner<'_> {
    fn sign(&mut self, key: &Keypair, payload: TxPayload) -> Transaction {
        let addr = key.address();
        let nonce = self
            .nonces
            .entry(addr)
            .or_insert_with(|| self.chain_state.nonce(&addr));
        let tx = UnsignedTx::new(addr, *nonce, DEFAULT_GAS_FEE, payload).sign(key);
        *nonce += 1;
        tx
    }
}

/// Runs the scripted workload from a fresh genesis and returns the mined chain.
pub fn run_script(p: &ScriptParams) -> Result<ScriptRun, ChainError> {
    let genesis = script_genesis(p);
    let actors = Actors::new(p);
    let mut chain = Chain::new(genesis.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut stats = ScriptStats::default();
    let mut blocks = Vec::new();

    while stats.transactions < p.transactions {
        let head = chain.head().clone();
        let timestamp = head.block.timestamp() + p.seconds_per_block;
        let state = head.state.as_ref();
        let budget = p.txs_per_block.min(p.transactions - stats.transactions);
        let mut planner = Planner {
            rng: ChaCha8Rng::seed_from_u64(rng.random()),
            nonces: BTreeMap::new(),
            chain_state: state,
        };
        let mut txs = Vec::with_capacity(budget);
        // Planned highest bid per auction within this block.
        let mut planned: BTreeMap<AuctionId, (u64, Option<Address>)> = BTreeMap::new();

        let open: Vec<_> = state
            .auctions
            .auctions
            .values()
            .filter(|a| !a.ended)
            .cloned()
            .collect();
        let expired: Vec<AuctionId> = open
            .iter()
            .filter(|a| timestamp >= a.end_time)
            .map(|a| a.auction_id)
            .collect();
        let live: Vec<_> = open.iter().filter(|a| timestamp < a.end_time).cloned().collect();
        let idle_cars: Vec<u64> = state
            .registry
            .cars
            .values()
            .filter(|c| !c.in_auction)
            .map(|c| c.car_id)
            .collect();

        for id in expired {
            if txs.len() >= budget {
                break;
            }
            let caller = actors.bidders.choose(&mut planner.rng).unwrap();
            txs.push(planner.sign(caller, TxPayload::EndAuction { auction_id: id }));
        }
        let starts = if live.len() < 4 { 2 } else { 1 };
        for car_id in idle_cars.into_iter().take(starts) {
            if txs.len() >= budget {
                break;
            }
            let duration = planner.rng.random_range(20..=80);
            txs.push(planner.sign(
                &actors.agent,
                TxPayload::StartAuction {
                    car_id,
                    duration_seconds: duration,
                },
            ));
        }
        if txs.len() < budget && planner.rng.random_bool(0.3) {
            let owner = actors.owners.choose(&mut planner.rng).unwrap().address();
            let payload = TxPayload::AddCar {
                owner,
                initial_price: planner.rng.random_range(2_000..40_000),
                age_years: planner.rng.random_range(0..12),
                miles: planner.rng.random_range(0..180_000),
            };
            txs.push(planner.sign(&actors.agent, payload));
        }

        while txs.len() < budget {
            let roll: f64 = planner.rng.random();
            if !live.is_empty() && roll < 0.8 {
                let a = live.choose(&mut planner.rng).unwrap();
                let (highest, _) = *planned
                    .entry(a.auction_id)
                    .or_insert((a.highest_bid, a.highest_bidder));
                let bidder = actors.bidders.choose(&mut planner.rng).unwrap();
                let kind: f64 = planner.rng.random();
                let amount = if kind < 0.1 {
                    a.tprice.saturating_sub(planner.rng.random_range(1..=500)).max(1)
                } else if kind < 0.18 {
                    highest.max(1)
                } else {
                    highest.max(a.tprice.saturating_sub(1)) + planner.rng.random_range(1..=800)
                };
                let key = if kind > 0.97 {
                    // beneficiary bidding on own car
                    actors
                        .owners
                        .iter()
                        .find(|k| k.address() == a.beneficiary)
                        .unwrap_or(bidder)
                } else {
                    bidder
                };
                if amount > highest && amount >= a.tprice && key.address() != a.beneficiary {
                    planned.insert(a.auction_id, (amount, Some(key.address())));
                }
                txs.push(planner.sign(
                    key,
                    TxPayload::Bid {
                        auction_id: a.auction_id,
                        amount,
                    },
                ));
            } else if roll < 0.9 && !state.auctions.auctions.is_empty() {
                let claims: Vec<(AuctionId, Address)> = state
                    .auctions
                    .auctions
                    .values()
                    .flat_map(|a| a.pending_returns.keys().map(move |b| (a.auction_id, *b)))
                    .collect();
                let (id, key) = match claims.choose(&mut planner.rng) {
                    Some(&(id, who)) if planner.rng.random_bool(0.8) => {
                        (id, actors.bidders.iter().find(|k| k.address() == who).unwrap())
                    }
                    _ => {
                        let ids: Vec<_> = state.auctions.auctions.keys().copied().collect();
                        (
                            *ids.choose(&mut planner.rng).unwrap(),
                            actors.bidders.choose(&mut planner.rng).unwrap(),
                        )
                    }
                };
                txs.push(planner.sign(key, TxPayload::Withdraw { auction_id: id }));
            } else if roll < 0.96 {
                let from = actors.bidders.choose(&mut planner.rng).unwrap();
                let to = actors.owners.choose(&mut planner.rng).unwrap().address();
                let amount = planner.rng.random_range(1..2_000);
                txs.push(planner.sign(from, TxPayload::Transfer { to, amount }));
            } else {
                let owner = actors.owners.choose(&mut planner.rng).unwrap().address();
                let payload = TxPayload::AddCar {
                    owner,
                    initial_price: planner.rng.random_range(2_000..40_000),
                    age_years: planner.rng.random_range(0..12),
                    miles: planner.rng.random_range(0..180_000),
                };
                txs.push(planner.sign(&actors.agent, payload));
            }
        }

        stats.transactions += txs.len();
        let block = mine_block(&head.block.header, txs, genesis.target, timestamp, actors.miner)
            .expect("maximal target");
        let out = chain.insert(block.clone())?;
        for r in chain.get(&out.hash).unwrap().receipts.iter() {
            if r.status == TxStatus::Reverted {
                stats.reverted += 1;
            }
            for ev in &r.events {
                match ev {
                    Event::CarAdded { .. } => stats.cars_added += 1,
                    Event::AuctionStarted { .. } => stats.auctions_started += 1,
                    Event::BidPlaced { .. } => stats.bids_accepted += 1,
                    Event::Withdrawal { .. } => stats.withdrawals += 1,
                    Event::OwnerChanged { .. } => stats.auctions_settled += 1,
                    _ => {}
                }
            }
        }
        blocks.push(block);
        stats.blocks += 1;
    }

    Ok(ScriptRun {
        genesis,
        blocks,
        chain,
        stats,
    })
}

/// Rebuilds a chain from genesis by inserting `blocks` in order.
pub fn replay(genesis: &GenesisConfig, blocks: &[Block]) -> Result<Chain, ChainError> {
    let mut chain = Chain::new(genesis.clone());
    for b in blocks {
        chain.insert(b.clone())?;
    }
    Ok(chain)
}
