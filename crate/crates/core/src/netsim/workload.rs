use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{sim_agent, sim_user, SIM_USERS};
use crate::state::DEFAULT_GAS_FEE;
use crate::tx::{Transaction, TxPayload, UnsignedTx};

/// A transaction injected at `node` at simulated time `at_seconds`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledTx {
    pub at_seconds: u64,
    pub node: usize,
    pub tx: Transaction,
}

/// Generator parameters for a synthetic workload over the default sim genesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub transactions: usize,
    /// Submissions are spread uniformly over `[0, spread_seconds)`.
    pub spread_seconds: u64,
}

/// Mix of user transfers and agent car listings, with per-sender nonces
/// assigned in submission order.
pub fn generate_workload(spec: &WorkloadSpec, num_nodes: usize, seed: u64) -> Vec<ScheduledTx> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_70ad);
    let agent = sim_agent();
    let users: Vec<_> = (0..SIM_USERS).map(sim_user).collect();

    let mut times: Vec<u64> = (0..spec.transactions)
        .map(|_| rng.random_range(0..spec.spread_seconds.max(1)))
        .collect();
    times.sort_unstable();

    let mut nonces = [0u64; SIM_USERS + 1];
    times
        .into_iter()
        .map(|at_seconds| {
            let (key, slot, payload) = if rng.random_bool(0.2) {
                let payload = TxPayload::AddCar {
                    owner: users[rng.random_range(0..SIM_USERS)].address(),
                    initial_price: rng.random_range(1_000..50_000),
                    age_years: rng.random_range(0..15),
                    miles: rng.random_range(0..250_000),
                };
                (&agent, SIM_USERS, payload)
            } else {
                let from = rng.random_range(0..SIM_USERS);
                let to = (from + rng.random_range(1..SIM_USERS)) % SIM_USERS;
                let payload = TxPayload::Transfer {
                    to: users[to].address(),
                    amount: rng.random_range(1..1_000),
                };
                (&users[from], from, payload)
            };
            let nonce = nonces[slot];
            nonces[slot] += 1;
            ScheduledTx {
                at_seconds,
                node: rng.random_range(0..num_nodes.max(1)),
                tx: UnsignedTx::new(key.address(), nonce, DEFAULT_GAS_FEE, payload).sign(key),
            }
        })
        .collect()
}
