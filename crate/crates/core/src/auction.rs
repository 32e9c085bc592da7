//! Timed English auction with escrowed bids and pending-returns withdrawal.
//!
//! Bids are debited from the bidder when accepted. An outbid amount moves to
//! the outbid bidder's `pending_returns` and is reclaimed with `withdraw`.
//! Settlement pays the winning bid to the beneficiary and hands the car to
//! the winner through the registry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::Address;
use crate::error::ContractError;
use crate::event::Event;
use crate::registry::AUCTION_ENGINE;
use crate::state::WorldState;
use crate::tx::{AuctionId, CarId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Auction {
    pub auction_id: AuctionId,
    pub car_id: CarId,
    pub beneficiary: Address,
    pub tprice: u64,
    pub end_time: u64,
    pub highest_bid: u64,
    pub highest_bidder: Option<Address>,
    pub pending_returns: BTreeMap<Address, u64>,
    pub ended: bool,
}

impl Auction {
    /// Funds currently held by this auction: the live highest bid (until
    /// settlement) plus everything awaiting withdrawal.
    pub fn escrow(&self) -> u128 {
        let live = if self.ended { 0 } else { self.highest_bid as u128 };
        live + self.pending_returns.values().map(|&v| v as u128).sum::<u128>()
    }

    pub fn pending_return(&self, who: &Address) -> u64 {
        self.pending_returns.get(who).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionState {
    pub auctions: BTreeMap<AuctionId, Auction>,
    pub next_id: AuctionId,
    pub open_auction_by_car: BTreeMap<CarId, AuctionId>,
}

impl Default for AuctionState {
    fn default() -> Self {
        AuctionState {
            auctions: BTreeMap::new(),
            next_id: 1,
            open_auction_by_car: BTreeMap::new(),
        }
    }
}

impl AuctionState {
    pub fn get(&self, auction_id: AuctionId) -> Result<&Auction, ContractError> {
        self.auctions
            .get(&auction_id)
            .ok_or(ContractError::UnknownAuction { auction_id })
    }

    pub fn total_escrow(&self) -> u128 {
        self.auctions.values().map(Auction::escrow).sum()
    }
}

/// Read-only view of an auction at some head timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionSnapshot {
    #[serde(flatten)]
    pub auction: Auction,
    pub remaining_seconds: u64,
}

impl WorldState {
    pub fn start_auction(
        &mut self,
        caller: Address,
        car_id: CarId,
        duration_seconds: u64,
        now: u64,
    ) -> Result<(AuctionId, Event), ContractError> {
        if caller != self.registry.agent {
            return Err(ContractError::NotAgent);
        }
        let car = self.registry.get_car_info(car_id)?;
        if car.in_auction {
            return Err(ContractError::AlreadyInAuction { car_id });
        }
        if duration_seconds == 0 {
            return Err(ContractError::BadDuration);
        }
        let end_time = now
            .checked_add(duration_seconds)
            .ok_or(ContractError::BadDuration)?;
        let tprice = car.estimated_price();
        let beneficiary = car.owner;

        let auction_id = self.auctions.next_id;
        self.auctions.next_id += 1;
        self.auctions.auctions.insert(
            auction_id,
            Auction {
                auction_id,
                car_id,
                beneficiary,
                tprice,
                end_time,
                highest_bid: 0,
                highest_bidder: None,
                pending_returns: BTreeMap::new(),
                ended: false,
            },
        );
        self.auctions.open_auction_by_car.insert(car_id, auction_id);
        self.registry.set_in_auction(car_id, true);
        Ok((
            auction_id,
            Event::AuctionStarted {
                auction_id,
                car_id,
                beneficiary,
                tprice,
                end_time,
            },
        ))
    }

    /// Checks, in order: not expired, strictly above the highest bid, at or
    /// above the reserve, not the beneficiary, and covered by balance.
    pub fn bid(
        &mut self,
        caller: Address,
        auction_id: AuctionId,
        amount: u64,
        now: u64,
    ) -> Result<Event, ContractError> {
        let auction = self.auctions.get(auction_id)?;
        if auction.ended || now >= auction.end_time {
            return Err(ContractError::AuctionExpired);
        }
        if amount <= auction.highest_bid {
            return Err(ContractError::BidTooLow {
                amount,
                highest: auction.highest_bid,
            });
        }
        if amount < auction.tprice {
            return Err(ContractError::BelowReserve {
                amount,
                tprice: auction.tprice,
            });
        }
        if caller == auction.beneficiary {
            return Err(ContractError::SelfBid);
        }
        let available = self.balance(&caller);
        if available < amount {
            return Err(ContractError::InsufficientFunds { amount, available });
        }

        self.debit(&caller, amount);
        let auction = self.auctions.auctions.get_mut(&auction_id).unwrap();
        if let Some(previous) = auction.highest_bidder {
            *auction.pending_returns.entry(previous).or_insert(0) += auction.highest_bid;
        }
        auction.highest_bid = amount;
        auction.highest_bidder = Some(caller);
        Ok(Event::BidPlaced {
            auction_id,
            bidder: caller,
            amount,
        })
    }

    /// Drains the caller's pending returns. Withdrawing nothing is a successful no-op.
    pub fn withdraw(
        &mut self,
        caller: Address,
        auction_id: AuctionId,
    ) -> Result<(u64, Option<Event>), ContractError> {
        self.auctions.get(auction_id)?;
        let auction = self.auctions.auctions.get_mut(&auction_id).unwrap();
        let amount = auction.pending_returns.remove(&caller).unwrap_or(0);
        if amount == 0 {
            return Ok((0, None));
        }
        self.credit(&caller, amount);
        Ok((
            amount,
            Some(Event::Withdrawal {
                auction_id,
                bidder: caller,
                amount,
            }),
        ))
    }

    /// Closes an expired auction. Anyone may call.
    pub fn end_auction(
        &mut self,
        auction_id: AuctionId,
        now: u64,
    ) -> Result<Vec<Event>, ContractError> {
        let auction = self.auctions.get(auction_id)?;
        if now < auction.end_time {
            return Err(ContractError::AuctionNotYetEnded);
        }
        if auction.ended {
            return Err(ContractError::AuctionEndAlreadyEnded);
        }
        let car_id = auction.car_id;
        let winner = auction.highest_bidder;
        let amount = auction.highest_bid;
        let beneficiary = auction.beneficiary;

        let auction = self.auctions.auctions.get_mut(&auction_id).unwrap();
        auction.ended = true;
        self.auctions.open_auction_by_car.remove(&car_id);

        let mut events = Vec::with_capacity(2);
        match winner {
            Some(winner) => {
                self.credit(&beneficiary, amount);
                events.push(Event::AuctionEnded {
                    auction_id,
                    winner: Some(winner),
                    amount,
                });
                events.push(
                    self.registry
                        .settle_transfer(AUCTION_ENGINE, car_id, winner)
                        .expect("open auction implies car in auction"),
                );
            }
            None => {
                self.registry.set_in_auction(car_id, false);
                events.push(Event::AuctionEnded {
                    auction_id,
                    winner: None,
                    amount: 0,
                });
            }
        }
        Ok(events)
    }

    pub fn query_auction(
        &self,
        auction_id: AuctionId,
        now: u64,
    ) -> Result<AuctionSnapshot, ContractError> {
        let auction = self.auctions.get(auction_id)?.clone();
        let remaining_seconds = if auction.ended {
            0
        } else {
            auction.end_time.saturating_sub(now)
        };
        Ok(AuctionSnapshot {
            auction,
            remaining_seconds,
        })
    }
}
