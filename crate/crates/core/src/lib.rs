//! Proof-of-work vehicle auction ledger.
//!
//! A longest-chain ledger whose transactions drive two native contracts: a
//! car registry with deterministic price estimation and a timed English
//! auction with escrowed bids. [`netsim`] runs the same chain logic across a
//! simulated peer-to-peer network.

pub mod auction;
pub mod block;
pub mod chain;
pub mod crypto;
pub mod error;
pub mod event;
pub mod genesis;
pub mod hash;
pub mod mempool;
pub mod merkle;
pub mod netsim;
pub mod registry;
pub mod scripted;
pub mod state;
pub mod tx;

pub use auction::{Auction, AuctionSnapshot, AuctionState};
pub use block::{mine_block, Block, BlockHeader, MineError, Target};
pub use chain::{fork_choice, validate_block, BlockError, Chain, ChainError};
pub use crypto::{Address, Keypair, PublicKey, Signature};
pub use error::{ContractError, TxError};
pub use event::Event;
pub use genesis::GenesisConfig;
pub use hash::Hash32;
pub use mempool::Mempool;
pub use merkle::merkle_root;
pub use registry::{estimate_price, Car, CarRegistryState};
pub use state::{
    apply_block, apply_transaction, Account, BlockContext, ChainParams, Receipt, TxStatus,
    WorldState,
};
pub use tx::{AuctionId, CarId, Transaction, TxPayload, UnsignedTx};
