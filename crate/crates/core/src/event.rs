use serde::{Deserialize, Serialize};

use crate::crypto::Address;
use crate::tx::{AuctionId, CarId};

/// Contract events, in emission order within a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Event {
    CarAdded {
        car_id: CarId,
        owner: Address,
        initial_price: u64,
    },
    AccidentRecorded {
        car_id: CarId,
        cost: u64,
    },
    AuctionStarted {
        auction_id: AuctionId,
        car_id: CarId,
        beneficiary: Address,
        tprice: u64,
        end_time: u64,
    },
    BidPlaced {
        auction_id: AuctionId,
        bidder: Address,
        amount: u64,
    },
    Withdrawal {
        auction_id: AuctionId,
        bidder: Address,
        amount: u64,
    },
    AuctionEnded {
        auction_id: AuctionId,
        winner: Option<Address>,
        amount: u64,
    },
    OwnerChanged {
        car_id: CarId,
        previous_owner: Address,
        new_owner: Address,
    },
}

impl Event {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Event::CarAdded { .. } => "CarAdded",
            Event::AccidentRecorded { .. } => "AccidentRecorded",
            Event::AuctionStarted { .. } => "AuctionStarted",
            Event::BidPlaced { .. } => "BidPlaced",
            Event::Withdrawal { .. } => "Withdrawal",
            Event::AuctionEnded { .. } => "AuctionEnded",
            Event::OwnerChanged { .. } => "OwnerChanged",
        }
    }
}
