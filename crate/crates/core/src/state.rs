//! World state and the state-transition function.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::auction::AuctionState;
use crate::block::{Block, Target};
use crate::crypto::Address;
use crate::error::{ContractError, TxError};
use crate::event::Event;
use crate::hash::{sha256, Hash32};
use crate::registry::CarRegistryState;
use crate::tx::{Transaction, TxPayload};

pub const DEFAULT_GAS_FEE: u64 = 10;
pub const DEFAULT_BLOCK_REWARD: u64 = 50;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub balance: u64,
    pub nonce: u64,
}

/// Consensus parameters fixed at genesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainParams {
    pub gas_fee: u64,
    pub block_reward: u64,
    pub target: Target,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            gas_fee: DEFAULT_GAS_FEE,
            block_reward: DEFAULT_BLOCK_REWARD,
            target: Target::MAX,
        }
    }
}

/// Block-level inputs visible to transaction execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockContext {
    pub height: u64,
    pub timestamp: u64,
    pub miner: Address,
}

impl BlockContext {
    pub fn of(block: &Block) -> Self {
        BlockContext {
            height: block.header.height,
            timestamp: block.header.timestamp,
            miner: block.header.miner,
        }
    }
}

/// Result of an admissible transaction: either applied, or reverted with the
/// fee charged and nonce advanced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOutcome {
    pub revert: Option<ContractError>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxStatus {
    Applied,
    Reverted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_hash: Hash32,
    pub block_height: u64,
    pub index: u32,
    pub sender: Address,
    pub fee: u64,
    pub status: TxStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revert: Option<ContractError>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub params: ChainParams,
    pub accounts: BTreeMap<Address, Account>,
    pub registry: CarRegistryState,
    pub auctions: AuctionState,
}

impl WorldState {
    pub fn new(params: ChainParams, agent: Address) -> Self {
        WorldState {
            params,
            accounts: BTreeMap::new(),
            registry: CarRegistryState::new(agent),
            auctions: AuctionState::default(),
        }
    }

    pub fn account(&self, who: &Address) -> Account {
        self.accounts.get(who).copied().unwrap_or_default()
    }

    pub fn balance(&self, who: &Address) -> u64 {
        self.account(who).balance
    }

    pub fn nonce(&self, who: &Address) -> u64 {
        self.account(who).nonce
    }

    pub(crate) fn credit(&mut self, who: &Address, amount: u64) {
        let acct = self.accounts.entry(*who).or_default();
        acct.balance = acct
            .balance
            .checked_add(amount)
            .expect("balance overflow: genesis supply bound violated");
    }

    /// Callers check the balance first.
    pub(crate) fn debit(&mut self, who: &Address, amount: u64) {
        let acct = self.accounts.entry(*who).or_default();
        acct.balance -= amount;
    }

    pub fn total_balances(&self) -> u128 {
        self.accounts.values().map(|a| a.balance as u128).sum()
    }

    /// Balances plus all auction escrow. Conserved by every transaction;
    /// grows by exactly the block reward per applied block.
    pub fn total_value(&self) -> u128 {
        self.total_balances() + self.auctions.total_escrow()
    }

    /// Checks that `tx` could be included against this state.
    pub fn check_admissible(&self, tx: &Transaction) -> Result<(), TxError> {
        if !tx.verify() {
            return Err(TxError::BadSignature);
        }
        let acct = self.account(&tx.sender);
        if tx.nonce != acct.nonce {
            return Err(TxError::BadNonce {
                expected: acct.nonce,
                got: tx.nonce,
            });
        }
        if tx.fee < self.params.gas_fee {
            return Err(TxError::FeeTooLow {
                min: self.params.gas_fee,
                got: tx.fee,
            });
        }
        let needed = tx.fee as u128 + tx.payload.carried_value() as u128;
        if (acct.balance as u128) < needed {
            return Err(TxError::InsufficientFunds {
                needed: needed.min(u64::MAX as u128) as u64,
                available: acct.balance,
            });
        }
        Ok(())
    }

    /// Applies `tx` in place. On `Err` the state is untouched; on `Ok` the fee
    /// has moved to the miner and the nonce advanced, whether or not the
    /// contract call reverted.
    pub fn apply_transaction(
        &mut self,
        tx: &Transaction,
        ctx: &BlockContext,
    ) -> Result<TxOutcome, TxError> {
        self.check_admissible(tx)?;
        self.debit(&tx.sender, tx.fee);
        self.accounts.get_mut(&tx.sender).unwrap().nonce += 1;
        self.credit(&ctx.miner, tx.fee);

        Ok(match self.execute(tx.sender, &tx.payload, ctx) {
            Ok(events) => TxOutcome {
                revert: None,
                events,
            },
            Err(reason) => TxOutcome {
                revert: Some(reason),
                events: Vec::new(),
            },
        })
    }

    /// Every contract operation validates fully before mutating, so an `Err`
    /// leaves the state as it was.
    fn execute(
        &mut self,
        sender: Address,
        payload: &TxPayload,
        ctx: &BlockContext,
    ) -> Result<Vec<Event>, ContractError> {
        match *payload {
            TxPayload::Transfer { to, amount } => {
                self.debit(&sender, amount);
                self.credit(&to, amount);
                Ok(Vec::new())
            }
            TxPayload::AddCar {
                owner,
                initial_price,
                age_years,
                miles,
            } => {
                let (_, ev) =
                    self.registry
                        .add_car(sender, owner, initial_price, age_years, miles)?;
                Ok(vec![ev])
            }
            TxPayload::UploadAccidentCost { car_id, cost } => {
                Ok(vec![self.registry.upload_accident_cost(sender, car_id, cost)?])
            }
            TxPayload::StartAuction {
                car_id,
                duration_seconds,
            } => {
                let (_, ev) = self.start_auction(sender, car_id, duration_seconds, ctx.timestamp)?;
                Ok(vec![ev])
            }
            TxPayload::Bid { auction_id, amount } => {
                Ok(vec![self.bid(sender, auction_id, amount, ctx.timestamp)?])
            }
            TxPayload::Withdraw { auction_id } => {
                Ok(self.withdraw(sender, auction_id)?.1.into_iter().collect())
            }
            TxPayload::EndAuction { auction_id } => self.end_auction(auction_id, ctx.timestamp),
        }
    }

    pub fn credit_block_reward(&mut self, miner: &Address) {
        let reward = self.params.block_reward;
        self.credit(miner, reward);
    }

    /// SHA-256 over the canonical serialization of accounts (by address),
    /// registry (cars by id) and auctions (by id).
    pub fn state_root(&self) -> Hash32 {
        let mut buf = Vec::with_capacity(256);
        let u64b = |buf: &mut Vec<u8>, v: u64| buf.extend_from_slice(&v.to_be_bytes());

        u64b(&mut buf, self.accounts.len() as u64);
        for (addr, acct) in &self.accounts {
            buf.extend_from_slice(&addr.0);
            u64b(&mut buf, acct.balance);
            u64b(&mut buf, acct.nonce);
        }

        let reg = &self.registry;
        buf.extend_from_slice(&reg.agent.0);
        u64b(&mut buf, reg.next_id);
        u64b(&mut buf, reg.cars.len() as u64);
        for car in reg.cars.values() {
            u64b(&mut buf, car.car_id);
            buf.extend_from_slice(&car.owner.0);
            u64b(&mut buf, car.initial_price);
            u64b(&mut buf, car.age_years);
            u64b(&mut buf, car.miles);
            u64b(&mut buf, car.accident_costs.len() as u64);
            for &c in &car.accident_costs {
                u64b(&mut buf, c);
            }
            u64b(&mut buf, car.trade_times);
            buf.push(car.in_auction as u8);
        }

        let auctions = &self.auctions;
        u64b(&mut buf, auctions.next_id);
        u64b(&mut buf, auctions.auctions.len() as u64);
        for a in auctions.auctions.values() {
            u64b(&mut buf, a.auction_id);
            u64b(&mut buf, a.car_id);
            buf.extend_from_slice(&a.beneficiary.0);
            u64b(&mut buf, a.tprice);
            u64b(&mut buf, a.end_time);
            u64b(&mut buf, a.highest_bid);
            match &a.highest_bidder {
                Some(b) => {
                    buf.push(1);
                    buf.extend_from_slice(&b.0);
                }
                None => buf.push(0),
            }
            u64b(&mut buf, a.pending_returns.len() as u64);
            for (addr, amount) in &a.pending_returns {
                buf.extend_from_slice(&addr.0);
                u64b(&mut buf, *amount);
            }
            buf.push(a.ended as u8);
        }
        sha256(&buf)
    }
}

/// Pure form of [`WorldState::apply_transaction`].
pub fn apply_transaction(
    state: &WorldState,
    tx: &Transaction,
    ctx: &BlockContext,
) -> Result<(WorldState, TxOutcome), TxError> {
    let mut next = state.clone();
    let outcome = next.apply_transaction(tx, ctx)?;
    Ok((next, outcome))
}

/// Applies every transaction in `block` in order, then the block reward.
/// Fails on the first inadmissible transaction, reporting its index.
pub fn apply_block(
    state: &WorldState,
    block: &Block,
) -> Result<(WorldState, Vec<Receipt>), (usize, TxError)> {
    let ctx = BlockContext::of(block);
    let mut next = state.clone();
    let mut receipts = Vec::with_capacity(block.transactions.len());
    for (index, tx) in block.transactions.iter().enumerate() {
        let outcome = next.apply_transaction(tx, &ctx).map_err(|e| (index, e))?;
        receipts.push(Receipt {
            tx_hash: tx.hash(),
            block_height: ctx.height,
            index: index as u32,
            sender: tx.sender,
            fee: tx.fee,
            status: if outcome.revert.is_some() {
                TxStatus::Reverted
            } else {
                TxStatus::Applied
            },
            revert: outcome.revert,
            events: outcome.events,
        });
    }
    next.credit_block_reward(&ctx.miner);
    Ok((next, receipts))
}
