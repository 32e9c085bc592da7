//! Car registry contract: agent-managed inventory, accident history and price estimation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::Address;
use crate::error::ContractError;
use crate::event::Event;
use crate::tx::CarId;

/// Pseudo-address the auction engine presents when settling ownership.
/// Not derivable from any key.
pub const AUCTION_ENGINE: Address = Address(*b"auction-engine\0\0\0\0\0\0");

/// Mileage at which the mileage factor reaches zero.
pub const MILEAGE_LIMIT: u64 = 200_000;
const AGE_FACTOR: (u128, u128) = (9, 10);
const TRADE_FACTOR: (u128, u128) = (95, 100);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Car {
    pub car_id: CarId,
    pub owner: Address,
    pub initial_price: u64,
    pub age_years: u64,
    pub miles: u64,
    pub accident_costs: Vec<u64>,
    pub trade_times: u64,
    pub in_auction: bool,
}

impl Car {
    pub fn accident_total(&self) -> u128 {
        self.accident_costs.iter().map(|&c| c as u128).sum()
    }

    pub fn estimated_price(&self) -> u64 {
        estimate_price(
            self.initial_price,
            self.age_years,
            self.miles,
            self.accident_total(),
            self.trade_times,
        )
    }
}

fn compound_discount(mut price: u128, times: u64, (num, den): (u128, u128)) -> u128 {
    // Each step strictly shrinks a positive price, so this terminates after a
    // few hundred steps regardless of `times`.
    let mut applied = 0;
    while applied < times && price > 0 {
        price = price * num / den;
        applied += 1;
    }
    price
}

/// Deterministic price estimate with floor division at every step:
/// 10% per year of age, linear mileage depreciation to zero at 200,000 miles,
/// accident costs subtracted (floored at zero), then 5% per completed trade.
pub fn estimate_price(
    initial_price: u64,
    age_years: u64,
    miles: u64,
    accident_total: u128,
    trade_times: u64,
) -> u64 {
    let aged = compound_discount(initial_price as u128, age_years, AGE_FACTOR);
    let remaining_miles = MILEAGE_LIMIT.saturating_sub(miles) as u128;
    let driven = aged * remaining_miles / MILEAGE_LIMIT as u128;
    let repaired = driven.saturating_sub(accident_total);
    compound_discount(repaired, trade_times, TRADE_FACTOR) as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarRegistryState {
    pub cars: BTreeMap<CarId, Car>,
    pub next_id: CarId,
    pub agent: Address,
}

impl CarRegistryState {
    pub fn new(agent: Address) -> Self {
        CarRegistryState {
            cars: BTreeMap::new(),
            next_id: 1,
            agent,
        }
    }

    fn require_agent(&self, caller: Address) -> Result<(), ContractError> {
        if caller != self.agent {
            return Err(ContractError::NotAgent);
        }
        Ok(())
    }

    pub fn add_car(
        &mut self,
        caller: Address,
        owner: Address,
        initial_price: u64,
        age_years: u64,
        miles: u64,
    ) -> Result<(CarId, Event), ContractError> {
        self.require_agent(caller)?;
        if initial_price == 0 {
            return Err(ContractError::BadPrice);
        }
        let car_id = self.next_id;
        self.next_id += 1;
        self.cars.insert(
            car_id,
            Car {
                car_id,
                owner,
                initial_price,
                age_years,
                miles,
                accident_costs: Vec::new(),
                trade_times: 0,
                in_auction: false,
            },
        );
        Ok((
            car_id,
            Event::CarAdded {
                car_id,
                owner,
                initial_price,
            },
        ))
    }

    pub fn upload_accident_cost(
        &mut self,
        caller: Address,
        car_id: CarId,
        cost: u64,
    ) -> Result<Event, ContractError> {
        self.require_agent(caller)?;
        let car = self
            .cars
            .get_mut(&car_id)
            .ok_or(ContractError::UnknownCar { car_id })?;
        if cost == 0 {
            return Err(ContractError::BadCost);
        }
        if car.in_auction {
            return Err(ContractError::CarInAuction { car_id });
        }
        car.accident_costs.push(cost);
        Ok(Event::AccidentRecorded { car_id, cost })
    }

    pub fn get_car_info(&self, car_id: CarId) -> Result<&Car, ContractError> {
        self.cars
            .get(&car_id)
            .ok_or(ContractError::UnknownCar { car_id })
    }

    pub fn get_owner(&self, car_id: CarId) -> Result<Address, ContractError> {
        self.get_car_info(car_id).map(|c| c.owner)
    }

    pub fn calculate_price(&self, car_id: CarId) -> Result<u64, ContractError> {
        self.get_car_info(car_id).map(Car::estimated_price)
    }

    pub(crate) fn set_in_auction(&mut self, car_id: CarId, value: bool) {
        if let Some(car) = self.cars.get_mut(&car_id) {
            car.in_auction = value;
        }
    }

    /// Hands the car to `new_owner` at the close of a successful auction.
    pub fn settle_transfer(
        &mut self,
        caller: Address,
        car_id: CarId,
        new_owner: Address,
    ) -> Result<Event, ContractError> {
        if caller != AUCTION_ENGINE {
            return Err(ContractError::CallerNotAuctionEngine);
        }
        let car = self
            .cars
            .get_mut(&car_id)
            .ok_or(ContractError::UnknownCar { car_id })?;
        if !car.in_auction {
            return Err(ContractError::NotInAuction { car_id });
        }
        let previous_owner = car.owner;
        car.owner = new_owner;
        car.trade_times += 1;
        car.in_auction = false;
        Ok(Event::OwnerChanged {
            car_id,
            previous_owner,
            new_owner,
        })
    }
}
