use serde::{Deserialize, Serialize};

use crate::block::Target;
use crate::crypto::{Address, Keypair};
use crate::genesis::GenesisConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// How block production is modelled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiningBackend {
    /// Winner sampled in proportion to hash share; headers use the maximal
    /// target so the nonce search is trivial.
    #[default]
    Virtual,
    /// Same timing model, but every block runs the real nonce search
    /// against the genesis target.
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Stop producing blocks after this many (across all forks).
    Blocks(u64),
    /// Stop producing blocks after this much simulated time.
    Seconds(f64),
}

/// Per-link delivery delay, exponential with the given mean. Zero means instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub mean_seconds: f64,
}

fn default_max_txs() -> usize {
    200
}

fn default_give_up_lag() -> u64 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub num_honest: usize,
    #[serde(default)]
    pub attacker_share: f64,
    pub mean_block_interval: f64,
    pub latency: LatencyModel,
    pub horizon: Horizon,
    /// Depth at which a transaction counts as confirmed in latency reports, and
    /// how deep the attacker lets the public chain bury its fork point before
    /// releasing a longer private branch.
    #[serde(default)]
    pub confirmations: u64,
    #[serde(default)]
    pub mining: MiningBackend,
    #[serde(default = "default_max_txs")]
    pub max_txs_per_block: usize,
    /// The attacker abandons its private branch once the public chain leads by this many blocks.
    #[serde(default = "default_give_up_lag")]
    pub attacker_give_up_lag: u64,
    /// Defaults to [`default_sim_genesis`].
    #[serde(default)]
    pub genesis: Option<GenesisConfig>,
}

impl SimConfig {
    /// All-honest network with the given size and timing.
    pub fn honest(
        seed: u64,
        num_honest: usize,
        mean_block_interval: f64,
        mean_latency: f64,
        blocks: u64,
    ) -> Self {
        SimConfig {
            seed,
            num_honest,
            attacker_share: 0.0,
            mean_block_interval,
            latency: LatencyModel {
                mean_seconds: mean_latency,
            },
            horizon: Horizon::Blocks(blocks),
            confirmations: 0,
            mining: MiningBackend::Virtual,
            max_txs_per_block: default_max_txs(),
            attacker_give_up_lag: default_give_up_lag(),
            genesis: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.num_honest == 0 {
            return bad("num_honest must be at least 1");
        }
        if !(0.0..1.0).contains(&self.attacker_share) {
            return bad("attacker_share must lie in [0, 1)");
        }
        if !(self.mean_block_interval.is_finite() && self.mean_block_interval > 0.0) {
            return bad("mean_block_interval must be positive");
        }
        if !(self.latency.mean_seconds.is_finite() && self.latency.mean_seconds >= 0.0) {
            return bad("latency mean must be non-negative");
        }
        match self.horizon {
            Horizon::Blocks(0) => return bad("block horizon must be positive"),
            Horizon::Seconds(s) if !(s.is_finite() && s > 0.0) => {
                return bad("time horizon must be positive")
            }
            _ => {}
        }
        if self.max_txs_per_block == 0 {
            return bad("max_txs_per_block must be positive");
        }
        if let Some(g) = &self.genesis {
            g.validate()
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    pub fn has_attacker(&self) -> bool {
        self.attacker_share > 0.0
    }

    pub fn genesis(&self) -> GenesisConfig {
        self.genesis
            .clone()
            .unwrap_or_else(|| default_sim_genesis(self.mining))
    }
}

pub const SIM_USERS: usize = 8;
pub const SIM_USER_BALANCE: u64 = 1_000_000;

pub fn sim_agent() -> Keypair {
    Keypair::from_label("sim-agent")
}

pub fn sim_user(i: usize) -> Keypair {
    Keypair::from_label(&format!("sim-user-{i}"))
}

pub fn sim_node_address(i: usize) -> Address {
    Keypair::from_label(&format!("sim-node-{i}")).address()
}

/// Funds the agent and [`SIM_USERS`] users. Virtual mining uses the maximal
/// target; real mining uses 2^244.
pub fn default_sim_genesis(mining: MiningBackend) -> GenesisConfig {
    let target = match mining {
        MiningBackend::Virtual => Target::MAX,
        MiningBackend::Real => Target::pow2(244),
    };
    let agent = sim_agent().address();
    let mut g = GenesisConfig::new(agent, target).with_balance(agent, SIM_USER_BALANCE);
    for i in 0..SIM_USERS {
        g = g.with_balance(sim_user(i).address(), SIM_USER_BALANCE);
    }
    g
}
