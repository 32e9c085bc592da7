use serde::{Deserialize, Serialize};

use crate::tx::{AuctionId, CarId};

/// Contract-level revert reasons. A reverted transaction is still included
/// in its block: the fee is charged and the nonce advances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "code")]
pub enum ContractError {
    #[error("caller is not the agent")]
    NotAgent,
    #[error("initial price must be positive")]
    BadPrice,
    #[error("unknown car {car_id}")]
    UnknownCar { car_id: CarId },
    #[error("accident cost must be positive")]
    BadCost,
    #[error("car {car_id} is in an open auction")]
    CarInAuction { car_id: CarId },
    #[error("car {car_id} is not in an auction")]
    NotInAuction { car_id: CarId },
    #[error("only the auction engine may settle ownership")]
    CallerNotAuctionEngine,
    #[error("car {car_id} already has an open auction")]
    AlreadyInAuction { car_id: CarId },
    #[error("auction duration must be positive")]
    BadDuration,
    #[error("unknown auction {auction_id}")]
    UnknownAuction { auction_id: AuctionId },
    #[error("bid time has expired")]
    AuctionExpired,
    #[error("bid {amount} does not exceed highest bid {highest}")]
    BidTooLow { amount: u64, highest: u64 },
    #[error("bid {amount} is below reserve price {tprice}")]
    BelowReserve { amount: u64, tprice: u64 },
    #[error("beneficiary may not bid on own auction")]
    SelfBid,
    #[error("balance {available} cannot cover bid {amount}")]
    InsufficientFunds { amount: u64, available: u64 },
    #[error("auction not yet ended")]
    AuctionNotYetEnded,
    #[error("auction end has already been called")]
    AuctionEndAlreadyEnded,
}

impl ContractError {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            ContractError::NotAgent => "NotAgent",
            ContractError::BadPrice => "BadPrice",
            ContractError::UnknownCar { .. } => "UnknownCar",
            ContractError::BadCost => "BadCost",
            ContractError::CarInAuction { .. } => "CarInAuction",
            ContractError::NotInAuction { .. } => "NotInAuction",
            ContractError::CallerNotAuctionEngine => "CallerNotAuctionEngine",
            ContractError::AlreadyInAuction { .. } => "AlreadyInAuction",
            ContractError::BadDuration => "BadDuration",
            ContractError::UnknownAuction { .. } => "UnknownAuction",
            ContractError::AuctionExpired => "AuctionExpired",
            ContractError::BidTooLow { .. } => "BidTooLow",
            ContractError::BelowReserve { .. } => "BelowReserve",
            ContractError::SelfBid => "SelfBid",
            ContractError::InsufficientFunds { .. } => "InsufficientFunds",
            ContractError::AuctionNotYetEnded => "AuctionNotYetEnded",
            ContractError::AuctionEndAlreadyEnded => "AuctionEndAlreadyEnded",
        }
    }
}

/// Reasons a transaction cannot be included in a block at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "code")]
pub enum TxError {
    #[error("signature does not verify against sender")]
    BadSignature,
    #[error("nonce {got} does not match account nonce {expected}")]
    BadNonce { expected: u64, got: u64 },
    #[error("fee {got} below gas fee {min}")]
    FeeTooLow { min: u64, got: u64 },
    #[error("balance {available} cannot cover {needed}")]
    InsufficientFunds { needed: u64, available: u64 },
}

impl TxError {
    pub fn code(&self) -> &'static str {
        match self {
            TxError::BadSignature => "BadSignature",
            TxError::BadNonce { .. } => "BadNonce",
            TxError::FeeTooLow { .. } => "FeeTooLow",
            TxError::InsufficientFunds { .. } => "InsufficientFunds",
        }
    }
}
