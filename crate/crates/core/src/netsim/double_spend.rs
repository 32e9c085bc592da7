//! Monte-Carlo estimate of a private-branch double spend succeeding.
//!
//! Time is measured in units where the whole network finds one block per
//! unit, so the attacker mines at rate `q` and honest miners at `p = 1 - q`.
//! The merchant waits for `z` honest blocks, which take `z / p` on average;
//! attacker blocks found during that window are sampled from exponential
//! inter-arrival times. The race then continues as a random walk on the
//! attacker's deficit, which succeeds once the attacker has caught up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::config::SimError;

/// Probability mass below which a trailing attacker is treated as having lost.
const ABANDON_PROBABILITY: f64 = 1e-12;
/// Deficit cap for the unbiased `q = 0.5` walk, which never drifts away.
const FAIR_RACE_DEFICIT_CAP: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleSpendResult {
    pub q: f64,
    pub z: u64,
    pub trials: u64,
    pub seed: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// Binomial standard error of `success_rate`.
    pub std_error: f64,
}

/// Deficit at which the walk stops: the attacker's remaining chance of ever
/// catching up from there is below [`ABANDON_PROBABILITY`].
fn abandon_deficit(q: f64, z: u64) -> u64 {
    let ratio = q / (1.0 - q);
    let cutoff = if ratio >= 1.0 {
        FAIR_RACE_DEFICIT_CAP
    } else {
        (ABANDON_PROBABILITY.ln() / ratio.ln()).ceil() as u64
    };
    cutoff.max(z + 1)
}

fn one_trial(rng: &mut ChaCha8Rng, q: f64, z: u64, attacker_gap: &Exp<f64>, abandon: u64) -> bool {
    let window = z as f64 / (1.0 - q);
    let mut t = attacker_gap.sample(rng);
    let mut attacker_blocks = 0u64;
    while t <= window {
        attacker_blocks += 1;
        t += attacker_gap.sample(rng);
    }
    if attacker_blocks >= z {
        return true;
    }
    let mut deficit = z - attacker_blocks;
    while deficit > 0 && deficit < abandon {
        if rng.random::<f64>() < q {
            deficit -= 1;
        } else {
            deficit += 1;
        }
    }
    deficit == 0
}

/// Runs `trials` independent races for an attacker with hash share `q`
/// against a merchant waiting for `z` confirmations.
pub fn double_spend_experiment(
    q: f64,
    z: u64,
    trials: u64,
    seed: u64,
) -> Result<DoubleSpendResult, SimError> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(SimError::InvalidParams(format!("q must lie in (0, 0.5], got {q}")));
    }
    if trials == 0 {
        return Err(SimError::InvalidParams("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(q).expect("q > 0");
    let abandon = abandon_deficit(q, z);
    let successes = (0..trials)
        .filter(|_| one_trial(&mut rng, q, z, &gap, abandon))
        .count() as u64;
    let rate = successes as f64 / trials as f64;
    Ok(DoubleSpendResult {
        q,
        z,
        trials,
        seed,
        successes,
        success_rate: rate,
        std_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
    })
}
