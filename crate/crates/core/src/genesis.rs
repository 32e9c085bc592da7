//! Genesis configuration file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::block::{Block, Target};
use crate::crypto::Address;
use crate::state::{ChainParams, WorldState, DEFAULT_BLOCK_REWARD, DEFAULT_GAS_FEE};

/// Upper bound on genesis supply. Leaves headroom so balance arithmetic
/// cannot overflow `u64` through rewards.
pub const MAX_GENESIS_SUPPLY: u128 = 1 << 62;

fn default_reward() -> u64 {
    DEFAULT_BLOCK_REWARD
}
fn default_gas() -> u64 {
    DEFAULT_GAS_FEE
}
fn default_interval() -> u64 {
    15
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisConfig {
    pub initial_balances: BTreeMap<Address, u64>,
    pub agent: Address,
    pub target: Target,
    #[serde(default = "default_reward")]
    pub block_reward: u64,
    #[serde(default = "default_gas")]
    pub gas_fee: u64,
    #[serde(default = "default_interval")]
    pub block_interval_seconds: u64,
    #[serde(default)]
    pub genesis_timestamp: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum GenesisError {
    #[error("reading genesis: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing genesis: {0}")]
    Json(#[from] serde_json::Error),
    #[error("genesis supply {0} exceeds limit")]
    SupplyTooLarge(u128),
}

impl GenesisConfig {
    pub fn new(agent: Address, target: Target) -> Self {
        GenesisConfig {
            initial_balances: BTreeMap::new(),
            agent,
            target,
            block_reward: DEFAULT_BLOCK_REWARD,
            gas_fee: DEFAULT_GAS_FEE,
            block_interval_seconds: default_interval(),
            genesis_timestamp: 0,
        }
    }

    pub fn with_balance(mut self, who: Address, amount: u64) -> Self {
        self.initial_balances.insert(who, amount);
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GenesisError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: GenesisConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GenesisError> {
        let supply = self.supply();
        if supply > MAX_GENESIS_SUPPLY {
            return Err(GenesisError::SupplyTooLarge(supply));
        }
        Ok(())
    }

    pub fn params(&self) -> ChainParams {
        ChainParams {
            gas_fee: self.gas_fee,
            block_reward: self.block_reward,
            target: self.target,
        }
    }

    pub fn supply(&self) -> u128 {
        self.initial_balances.values().map(|&v| v as u128).sum()
    }

    pub fn state(&self) -> WorldState {
        let mut state = WorldState::new(self.params(), self.agent);
        for (addr, &balance) in &self.initial_balances {
            if balance > 0 {
                state.credit(addr, balance);
            }
        }
        state
    }

    pub fn block(&self) -> Block {
        Block::genesis(self.genesis_timestamp, self.target)
    }
}
