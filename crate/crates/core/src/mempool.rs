use std::collections::HashSet;

use crate::hash::Hash32;
use crate::state::{BlockContext, WorldState};
use crate::tx::Transaction;

/// Pending transactions in arrival order.
#[derive(Debug, Clone, Default)]
pub struct Mempool {
    txs: Vec<Transaction>,
    seen: HashSet<Hash32>,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the transaction was already present.
    pub fn insert(&mut self, tx: Transaction) -> bool {
        if !self.seen.insert(tx.hash()) {
            return false;
        }
        self.txs.push(tx);
        true
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn contains(&self, hash: &Hash32) -> bool {
        self.txs.iter().any(|t| &t.hash() == hash)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transaction> {
        self.txs.iter()
    }

    /// Picks up to `max` transactions admissible in sequence on `state`.
    /// Repeats passes in arrival order so a nonce gap filled later in the
    /// pool is still picked up within the same block.
    pub fn select(&self, state: &WorldState, ctx: &BlockContext, max: usize) -> Vec<Transaction> {
        let mut scratch = state.clone();
        let mut taken = vec![false; self.txs.len()];
        let mut out = Vec::new();
        loop {
            let mut progressed = false;
            for (i, tx) in self.txs.iter().enumerate() {
                if out.len() >= max {
                    return out;
                }
                if taken[i] {
                    continue;
                }
                if scratch.apply_transaction(tx, ctx).is_ok() {
                    taken[i] = true;
                    out.push(tx.clone());
                    progressed = true;
                }
            }
            if !progressed {
                return out;
            }
        }
    }

    /// Drops transactions whose nonce is already consumed in `state`.
    pub fn prune(&mut self, state: &WorldState) {
        let seen = &mut self.seen;
        self.txs.retain(|tx| {
            let keep = tx.nonce >= state.nonce(&tx.sender);
            if !keep {
                seen.remove(&tx.hash());
            }
            keep
        });
    }
}
