//! Binary merkle commitment over transaction hashes.

use crate::hash::{sha256, sha256_concat, Hash32};
use crate::tx::Transaction;

/// Merkle root over leaf hashes. An odd node at any level is paired with itself;
/// a single leaf is its own root; no leaves hashes the empty string.
pub fn merkle_root_of_hashes(leaves: &[Hash32]) -> Hash32 {
    if leaves.is_empty() {
        return sha256(b"");
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                sha256_concat(&[&pair[0].0, &right.0])
            })
            .collect();
    }
    level[0]
}

pub fn merkle_root(transactions: &[Transaction]) -> Hash32 {
    let leaves: Vec<Hash32> = transactions.iter().map(Transaction::hash).collect();
    merkle_root_of_hashes(&leaves)
}
