//! Independent reference implementations used only by tests.
//!
//! Each one is written from the rules directly, without sharing code or
//! structure with the library, so agreement is evidence rather than echo.

#![allow(dead_code, clippy::implicit_saturating_sub)]

use std::collections::BTreeMap;

/// Straight-line price evaluation, one step per rule, every step floored.
pub fn price(initial: u64, age_years: u64, miles: u64, accidents: &[u64], trades: u64) -> u64 {
    let mut p = initial as u128;
    for _ in 0..age_years {
        p = p * 9 / 10;
    }
    let left = if miles >= 200_000 { 0 } else { 200_000 - miles as u128 };
    p = p * left / 200_000;
    let total: u128 = accidents.iter().map(|&a| a as u128).sum();
    p = if total >= p { 0 } else { p - total };
    for _ in 0..trades {
        p = p * 95 / 100;
    }
    p as u64
}

/// Nakamoto's catch-up probability: attacker blocks during the merchant's
/// wait are Poisson with mean z*q/p; from a deficit d the attacker catches up
/// with probability (q/p)^d.
pub fn nakamoto(q: f64, z: u64) -> f64 {
    let p = 1.0 - q;
    let lambda = z as f64 * q / p;
    let mut sum = 1.0;
    let mut poisson = (-lambda).exp();
    for k in 0..=z {
        if k > 0 {
            poisson *= lambda / k as f64;
        }
        sum -= poisson * (1.0 - (q / p).powi((z - k) as i32));
    }
    sum
}

/// One operation against a single auction, in block-timestamp order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Bid { who: usize, amount: u64, at: u64 },
    Withdraw { who: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BidVerdict {
    Accepted,
    Expired,
    TooLow,
    BelowReserve,
    SelfBid,
    Unfunded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionOutcome {
    pub verdicts: Vec<Option<BidVerdict>>,
    pub withdrawn: Vec<Option<u64>>,
    pub winner: Option<usize>,
    pub winning_bid: u64,
    pub final_balances: Vec<u64>,
    pub beneficiary_paid: u64,
    pub pending: BTreeMap<usize, u64>,
}

/// Replays the full bid log from scratch before each decision: the highest
/// bid is the maximum accepted amount so far, a bidder's claim is the sum of
/// their accepted bids that are no longer highest, minus what they withdrew.
/// Participant `beneficiary` owns the car. Settlement happens after all ops.
pub fn replay_auction(
    tprice: u64,
    end_time: u64,
    beneficiary: usize,
    balances: &[u64],
    ops: &[Op],
) -> AuctionOutcome {
    let mut accepted: Vec<(usize, u64)> = Vec::new();
    let mut withdrawn_total = vec![0u64; balances.len()];
    let mut verdicts = Vec::new();
    let mut withdrawn = Vec::new();

    let claim = |accepted: &[(usize, u64)], withdrawn_total: &[u64], who: usize| -> u64 {
        let n = accepted.len();
        let superseded: u64 = accepted
            .iter()
            .enumerate()
            .filter(|&(i, &(b, _))| b == who && i + 1 < n)
            .map(|(_, &(_, a))| a)
            .sum();
        superseded - withdrawn_total[who]
    };
    let spendable = |accepted: &[(usize, u64)], withdrawn_total: &[u64], who: usize| -> u64 {
        let bid: u64 = accepted.iter().filter(|&&(b, _)| b == who).map(|&(_, a)| a).sum();
        balances[who] + withdrawn_total[who] - bid
    };

    for op in ops {
        match *op {
            Op::Bid { who, amount, at } => {
                let highest = accepted.iter().map(|&(_, a)| a).max().unwrap_or(0);
                let v = if at >= end_time {
                    BidVerdict::Expired
                } else if amount <= highest {
                    BidVerdict::TooLow
                } else if amount < tprice {
                    BidVerdict::BelowReserve
                } else if who == beneficiary {
                    BidVerdict::SelfBid
                } else if spendable(&accepted, &withdrawn_total, who) < amount {
                    BidVerdict::Unfunded
                } else {
                    BidVerdict::Accepted
                };
                if v == BidVerdict::Accepted {
                    accepted.push((who, amount));
                }
                verdicts.push(Some(v));
                withdrawn.push(None);
            }
            Op::Withdraw { who } => {
                let c = claim(&accepted, &withdrawn_total, who);
                withdrawn_total[who] += c;
                verdicts.push(None);
                withdrawn.push(Some(c));
            }
        }
    }

    let last = accepted.last().copied();
    let mut final_balances: Vec<u64> = (0..balances.len())
        .map(|who| spendable(&accepted, &withdrawn_total, who))
        .collect();
    let paid = last.map(|(_, a)| a).unwrap_or(0);
    final_balances[beneficiary] += paid;
    let pending = (0..balances.len())
        .map(|who| (who, claim(&accepted, &withdrawn_total, who)))
        .filter(|&(_, c)| c > 0)
        .collect();
    AuctionOutcome {
        verdicts,
        withdrawn,
        winner: last.map(|(w, _)| w),
        winning_bid: paid,
        final_balances,
        beneficiary_paid: paid,
        pending,
    }
}
