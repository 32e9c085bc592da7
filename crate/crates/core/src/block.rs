//! Block headers, the PoW target, and nonce search.
//!
//! Header hashing layout (integers big-endian u64):
//!
//! ```text
//! parent_hash[32] | height[8] | timestamp[8] | target[32] | tx_root[32] | miner[20] | pow_nonce[8]
//! ```
//!
//! The nonce is last so the search can reuse the hasher state over the fixed prefix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crypto::Address;
use crate::hash::{decode_fixed, hex_serde, Hash32, HexError};
use crate::merkle::merkle_root;
use crate::tx::Transaction;

/// A 256-bit big-endian PoW target. A header is valid iff `hash < target`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Target(pub [u8; 32]);

impl Target {
    /// 2^256 - 1.
    pub const MAX: Target = Target([0xff; 32]);

    /// 2^exp. Exponents of 256 and above saturate to [`Target::MAX`].
    pub fn pow2(exp: u32) -> Target {
        if exp >= 256 {
            return Target::MAX;
        }
        let mut bytes = [0u8; 32];
        let byte = 31 - (exp / 8) as usize;
        bytes[byte] = 1 << (exp % 8);
        Target(bytes)
    }

    pub fn is_met_by(&self, hash: &Hash32) -> bool {
        hash.0 < self.0
    }
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Target({})", hex::encode(self.0))
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for Target {
    type Err = HexError;

    /// Accepts up to 64 hex digits, left-padded with zeros.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.strip_prefix("0x").unwrap_or(s);
        if s.len() > 64 {
            return Err(HexError::Length {
                expected: 32,
                got: s.len().div_ceil(2),
            });
        }
        decode_fixed::<32>(&format!("{s:0>64}")).map(Target)
    }
}

hex_serde!(Target);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub parent_hash: Hash32,
    pub height: u64,
    pub timestamp: u64,
    pub pow_nonce: u64,
    pub target: Target,
    pub tx_root: Hash32,
    pub miner: Address,
}

impl BlockHeader {
    fn prefix_hasher(&self) -> Sha256 {
        let mut hasher = Sha256::new();
        hasher.update(self.parent_hash.0);
        hasher.update(self.height.to_be_bytes());
        hasher.update(self.timestamp.to_be_bytes());
        hasher.update(self.target.0);
        hasher.update(self.tx_root.0);
        hasher.update(self.miner.0);
        hasher
    }

    pub fn hash(&self) -> Hash32 {
        let mut hasher = self.prefix_hasher();
        hasher.update(self.pow_nonce.to_be_bytes());
        Hash32(hasher.finalize().into())
    }

    pub fn meets_target(&self) -> bool {
        self.target.is_met_by(&self.hash())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    #[serde(flatten)]
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn hash(&self) -> Hash32 {
        self.header.hash()
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn parent_hash(&self) -> Hash32 {
        self.header.parent_hash
    }

    pub fn timestamp(&self) -> u64 {
        self.header.timestamp
    }

    /// The unmined genesis block: zero parent, no transactions.
    pub fn genesis(timestamp: u64, target: Target) -> Block {
        let transactions = Vec::new();
        Block {
            header: BlockHeader {
                parent_hash: Hash32::ZERO,
                height: 0,
                timestamp,
                pow_nonce: 0,
                target,
                tx_root: merkle_root(&transactions),
                miner: Address::ZERO,
            },
            transactions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MineError {
    #[error("nonce space exhausted after {attempts} attempts; target infeasibly small")]
    NonceSpaceExhausted { attempts: u64 },
    #[error("timestamp {timestamp} precedes parent timestamp {parent}")]
    TimestampBeforeParent { timestamp: u64, parent: u64 },
}

/// Assembles a child of `parent` and searches `pow_nonce` upward from zero
/// until the header hash falls below `target`.
pub fn mine_block(
    parent: &BlockHeader,
    transactions: Vec<Transaction>,
    target: Target,
    timestamp: u64,
    miner: Address,
) -> Result<Block, MineError> {
    mine_block_bounded(parent, transactions, target, timestamp, miner, u64::MAX)
}

/// [`mine_block`] with an upper bound on the nonces tried (`0..=max_nonce`).
pub fn mine_block_bounded(
    parent: &BlockHeader,
    transactions: Vec<Transaction>,
    target: Target,
    timestamp: u64,
    miner: Address,
    max_nonce: u64,
) -> Result<Block, MineError> {
    if timestamp < parent.timestamp {
        return Err(MineError::TimestampBeforeParent {
            timestamp,
            parent: parent.timestamp,
        });
    }
    let mut header = BlockHeader {
        parent_hash: parent.hash(),
        height: parent.height + 1,
        timestamp,
        pow_nonce: 0,
        target,
        tx_root: merkle_root(&transactions),
        miner,
    };
    let prefix = header.prefix_hasher();
    let mut nonce = 0u64;
    loop {
        let mut hasher = prefix.clone();
        hasher.update(nonce.to_be_bytes());
        let hash = Hash32(hasher.finalize().into());
        if target.is_met_by(&hash) {
            header.pow_nonce = nonce;
            return Ok(Block {
                header,
                transactions,
            });
        }
        if nonce == max_nonce {
            return Err(MineError::NonceSpaceExhausted {
                attempts: max_nonce.saturating_add(1),
            });
        }
        nonce += 1;
    }
}
