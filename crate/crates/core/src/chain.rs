//! Block validation, the block tree, and longest-chain fork choice.

use std::cmp::Reverse;
use std::collections::HashMap;
use std::sync::Arc;

use crate::block::{Block, BlockHeader};
use crate::error::TxError;
use crate::genesis::GenesisConfig;
use crate::hash::Hash32;
use crate::merkle::merkle_root;
use crate::state::{apply_block, Receipt, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlockError {
    #[error("header hash does not meet the chain target")]
    BadPow,
    #[error("block does not extend parent (height {height}, parent height {parent_height})")]
    BadLinkage { height: u64, parent_height: u64 },
    #[error("timestamp {timestamp} precedes parent timestamp {parent}")]
    BadTimestamp { timestamp: u64, parent: u64 },
    #[error("tx_root does not match transactions")]
    BadTxRoot,
    #[error("transaction {index} inadmissible: {reason}")]
    BadTransaction { index: usize, reason: TxError },
}

impl BlockError {
    pub fn code(&self) -> &'static str {
        match self {
            BlockError::BadPow => "BadPow",
            BlockError::BadLinkage { .. } => "BadLinkage",
            BlockError::BadTimestamp { .. } => "BadTimestamp",
            BlockError::BadTxRoot => "BadTxRoot",
            BlockError::BadTransaction { .. } => "BadTransaction",
        }
    }
}

/// Validates `block` as a child of `parent` whose post-state is `state`.
/// Checks run in order and the first failure wins: PoW against the chain
/// target, linkage, timestamp, tx root, then each transaction.
pub fn validate_block(
    block: &Block,
    parent: &BlockHeader,
    state: &WorldState,
) -> Result<(WorldState, Vec<Receipt>), BlockError> {
    let header = &block.header;
    if header.target != state.params.target || !header.meets_target() {
        return Err(BlockError::BadPow);
    }
    if header.parent_hash != parent.hash() || header.height != parent.height + 1 {
        return Err(BlockError::BadLinkage {
            height: header.height,
            parent_height: parent.height,
        });
    }
    if header.timestamp < parent.timestamp {
        return Err(BlockError::BadTimestamp {
            timestamp: header.timestamp,
            parent: parent.timestamp,
        });
    }
    if header.tx_root != merkle_root(&block.transactions) {
        return Err(BlockError::BadTxRoot);
    }
    apply_block(state, block).map_err(|(index, reason)| BlockError::BadTransaction { index, reason })
}

fn rank(block: &Block) -> (u64, Reverse<Hash32>) {
    (block.height(), Reverse(block.hash()))
}

/// Tip of the longest chain rooted at a height-0 block among `known`;
/// equal heights go to the smaller block hash. Blocks whose ancestry does
/// not reach genesis within `known` are ignored. Validity of each block is
/// the caller's responsibility.
pub fn fork_choice(known: &[Block]) -> Option<&Block> {
    let by_hash: HashMap<Hash32, &Block> = known.iter().map(|b| (b.hash(), b)).collect();
    let mut rooted: HashMap<Hash32, bool> = HashMap::new();

    fn is_rooted(
        hash: Hash32,
        by_hash: &HashMap<Hash32, &Block>,
        memo: &mut HashMap<Hash32, bool>,
    ) -> bool {
        let mut path = Vec::new();
        let mut cursor = hash;
        let result = loop {
            if let Some(&r) = memo.get(&cursor) {
                break r;
            }
            match by_hash.get(&cursor) {
                None => break false,
                Some(b) if b.height() == 0 => {
                    path.push(cursor);
                    break true;
                }
                Some(b) => {
                    path.push(cursor);
                    let parent = by_hash.get(&b.parent_hash());
                    if parent.is_some_and(|p| p.height() + 1 != b.height()) {
                        break false;
                    }
                    cursor = b.parent_hash();
                }
            }
        };
        for h in path {
            memo.insert(h, result);
        }
        result
    }

    known
        .iter()
        .filter(|b| is_rooted(b.hash(), &by_hash, &mut rooted))
        .max_by_key(|b| rank(b))
}

#[derive(Debug, Clone)]
pub struct ChainEntry {
    pub block: Block,
    pub hash: Hash32,
    pub state: Arc<WorldState>,
    pub receipts: Arc<Vec<Receipt>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("parent {0} unknown")]
    UnknownParent(Hash32),
    #[error("block {0} already known")]
    Duplicate(Hash32),
    #[error(transparent)]
    Invalid(#[from] BlockError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertOutcome {
    pub hash: Hash32,
    pub head_changed: bool,
    /// Blocks dropped from the previous canonical chain, when the new head
    /// does not descend from the old one.
    pub reorg_depth: Option<u64>,
}

/// A tree of validated blocks with per-block post-states. Single writer.
#[derive(Debug, Clone)]
pub struct Chain {
    genesis: GenesisConfig,
    genesis_hash: Hash32,
    entries: HashMap<Hash32, ChainEntry>,
    head: Hash32,
}

impl Chain {
    pub fn new(genesis: GenesisConfig) -> Self {
        let block = genesis.block();
        let hash = block.hash();
        let entry = ChainEntry {
            hash,
            state: Arc::new(genesis.state()),
            receipts: Arc::new(Vec::new()),
            block,
        };
        Chain {
            genesis,
            genesis_hash: hash,
            entries: HashMap::from([(hash, entry)]),
            head: hash,
        }
    }

    pub fn genesis(&self) -> &GenesisConfig {
        &self.genesis
    }

    pub fn genesis_hash(&self) -> Hash32 {
        self.genesis_hash
    }

    pub fn head(&self) -> &ChainEntry {
        &self.entries[&self.head]
    }

    pub fn head_hash(&self) -> Hash32 {
        self.head
    }

    pub fn get(&self, hash: &Hash32) -> Option<&ChainEntry> {
        self.entries.get(hash)
    }

    pub fn contains(&self, hash: &Hash32) -> bool {
        self.entries.contains_key(hash)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.entries.values().map(|e| &e.block)
    }

    /// Validates and stores `block`, moving the head if it ranks higher.
    pub fn insert(&mut self, block: Block) -> Result<InsertOutcome, ChainError> {
        let hash = block.hash();
        if self.entries.contains_key(&hash) {
            return Err(ChainError::Duplicate(hash));
        }
        let parent = self
            .entries
            .get(&block.parent_hash())
            .ok_or(ChainError::UnknownParent(block.parent_hash()))?;
        let (state, receipts) = validate_block(&block, &parent.block.header, &parent.state)?;

        let old_head = self.head;
        let head_changed = rank(&block) > rank(&self.entries[&old_head].block);
        self.entries.insert(
            hash,
            ChainEntry {
                block,
                hash,
                state: Arc::new(state),
                receipts: Arc::new(receipts),
            },
        );
        let mut reorg_depth = None;
        if head_changed {
            self.head = hash;
            let ancestor = self.common_ancestor(old_head, hash);
            if ancestor != old_head {
                let old_height = self.entries[&old_head].block.height();
                reorg_depth = Some(old_height - self.entries[&ancestor].block.height());
            }
        }
        Ok(InsertOutcome {
            hash,
            head_changed,
            reorg_depth,
        })
    }

    pub fn common_ancestor(&self, a: Hash32, b: Hash32) -> Hash32 {
        let (mut a, mut b) = (&self.entries[&a], &self.entries[&b]);
        while a.block.height() > b.block.height() {
            a = &self.entries[&a.block.parent_hash()];
        }
        while b.block.height() > a.block.height() {
            b = &self.entries[&b.block.parent_hash()];
        }
        while a.hash != b.hash {
            a = &self.entries[&a.block.parent_hash()];
            b = &self.entries[&b.block.parent_hash()];
        }
        a.hash
    }

    /// Canonical chain from genesis to head.
    pub fn canonical(&self) -> Vec<&ChainEntry> {
        let mut out = Vec::new();
        let mut cursor = self.head();
        loop {
            out.push(cursor);
            if cursor.block.height() == 0 {
                break;
            }
            cursor = &self.entries[&cursor.block.parent_hash()];
        }
        out.reverse();
        out
    }

    /// Post-genesis canonical blocks, in order. Suitable for replay.
    pub fn canonical_blocks(&self) -> Vec<Block> {
        self.canonical()
            .into_iter()
            .skip(1)
            .map(|e| e.block.clone())
            .collect()
    }
}
