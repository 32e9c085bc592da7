//! Transactions and their canonical signing bytes.
//!
//! Signing bytes layout (all integers are unsigned 64-bit big-endian):
//!
//! ```text
//! sender[20] | nonce[8] | fee[8] | kind_tag[1] | payload fields in declared order
//!
//! tag 0 Transfer            to[20] amount[8]
//! tag 1 AddCar              owner[20] initial_price[8] age_years[8] miles[8]
//! tag 2 UploadAccidentCost  car_id[8] cost[8]
//! tag 3 StartAuction        car_id[8] duration_seconds[8]
//! tag 4 Bid                 auction_id[8] amount[8]
//! tag 5 Withdraw            auction_id[8]
//! tag 6 EndAuction          auction_id[8]
//! ```
//!
//! The transaction hash is SHA-256 over `signing_bytes | public_key[32] | signature[64]`.

use serde::{Deserialize, Serialize};

use crate::crypto::{verify_signature, Address, Keypair, PublicKey, Signature, ADDRESS_LEN};
use crate::hash::{sha256_concat, Hash32};

pub type CarId = u64;
pub type AuctionId = u64;

/// Kind-specific transaction body. Serialized as `{"kind": ..., "payload": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum TxPayload {
    Transfer {
        to: Address,
        amount: u64,
    },
    AddCar {
        owner: Address,
        initial_price: u64,
        age_years: u64,
        miles: u64,
    },
    UploadAccidentCost {
        car_id: CarId,
        cost: u64,
    },
    StartAuction {
        car_id: CarId,
        duration_seconds: u64,
    },
    Bid {
        auction_id: AuctionId,
        amount: u64,
    },
    Withdraw {
        auction_id: AuctionId,
    },
    EndAuction {
        auction_id: AuctionId,
    },
}

impl TxPayload {
    pub fn tag(&self) -> u8 {
        match self {
            TxPayload::Transfer { .. } => 0,
            TxPayload::AddCar { .. } => 1,
            TxPayload::UploadAccidentCost { .. } => 2,
            TxPayload::StartAuction { .. } => 3,
            TxPayload::Bid { .. } => 4,
            TxPayload::Withdraw { .. } => 5,
            TxPayload::EndAuction { .. } => 6,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TxPayload::Transfer { .. } => "Transfer",
            TxPayload::AddCar { .. } => "AddCar",
            TxPayload::UploadAccidentCost { .. } => "UploadAccidentCost",
            TxPayload::StartAuction { .. } => "StartAuction",
            TxPayload::Bid { .. } => "Bid",
            TxPayload::Withdraw { .. } => "Withdraw",
            TxPayload::EndAuction { .. } => "EndAuction",
        }
    }

    /// Value the sender must hold on top of the fee for the tx to be admissible.
    pub fn carried_value(&self) -> u64 {
        match self {
            TxPayload::Transfer { amount, .. } => *amount,
            _ => 0,
        }
    }
}

/// A transaction before signing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsignedTx {
    pub sender: Address,
    pub nonce: u64,
    pub fee: u64,
    #[serde(flatten)]
    pub payload: TxPayload,
}

/// A signed transaction as carried in blocks and on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub nonce: u64,
    pub fee: u64,
    #[serde(flatten)]
    pub payload: TxPayload,
    pub public_key: PublicKey,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    Truncated,
    #[error("unknown kind tag {0}")]
    UnknownTag(u8),
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn addr(&mut self, a: &Address) {
        self.0.extend_from_slice(&a.0);
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], DecodeError> {
        if self.0.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn addr(&mut self) -> Result<Address, DecodeError> {
        Ok(Address(self.take(ADDRESS_LEN)?.try_into().unwrap()))
    }
}

impl UnsignedTx {
    pub fn new(sender: Address, nonce: u64, fee: u64, payload: TxPayload) -> Self {
        UnsignedTx {
            sender,
            nonce,
            fee,
            payload,
        }
    }

    pub fn canonical_encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(ADDRESS_LEN + 17 + 44));
        w.addr(&self.sender);
        w.u64(self.nonce);
        w.u64(self.fee);
        w.0.push(self.payload.tag());
        match &self.payload {
            TxPayload::Transfer { to, amount } => {
                w.addr(to);
                w.u64(*amount);
            }
            TxPayload::AddCar {
                owner,
                initial_price,
                age_years,
                miles,
            } => {
                w.addr(owner);
                w.u64(*initial_price);
                w.u64(*age_years);
                w.u64(*miles);
            }
            TxPayload::UploadAccidentCost { car_id, cost } => {
                w.u64(*car_id);
                w.u64(*cost);
            }
            TxPayload::StartAuction {
                car_id,
                duration_seconds,
            } => {
                w.u64(*car_id);
                w.u64(*duration_seconds);
            }
            TxPayload::Bid { auction_id, amount } => {
                w.u64(*auction_id);
                w.u64(*amount);
            }
            TxPayload::Withdraw { auction_id } | TxPayload::EndAuction { auction_id } => {
                w.u64(*auction_id);
            }
        }
        w.0
    }

    pub fn canonical_decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader(bytes);
        let sender = r.addr()?;
        let nonce = r.u64()?;
        let fee = r.u64()?;
        let payload = match r.u8()? {
            0 => TxPayload::Transfer {
                to: r.addr()?,
                amount: r.u64()?,
            },
            1 => TxPayload::AddCar {
                owner: r.addr()?,
                initial_price: r.u64()?,
                age_years: r.u64()?,
                miles: r.u64()?,
            },
            2 => TxPayload::UploadAccidentCost {
                car_id: r.u64()?,
                cost: r.u64()?,
            },
            3 => TxPayload::StartAuction {
                car_id: r.u64()?,
                duration_seconds: r.u64()?,
            },
            4 => TxPayload::Bid {
                auction_id: r.u64()?,
                amount: r.u64()?,
            },
            5 => TxPayload::Withdraw {
                auction_id: r.u64()?,
            },
            6 => TxPayload::EndAuction {
                auction_id: r.u64()?,
            },
            tag => return Err(DecodeError::UnknownTag(tag)),
        };
        if !r.0.is_empty() {
            return Err(DecodeError::Trailing(r.0.len()));
        }
        Ok(UnsignedTx {
            sender,
            nonce,
            fee,
            payload,
        })
    }

    /// Signs with `key`. The sender field is left as-is, so signing with the
    /// wrong key yields a transaction that fails [`Transaction::verify`].
    pub fn sign(self, key: &Keypair) -> Transaction {
        let signature = key.sign(&self.canonical_encode());
        Transaction {
            sender: self.sender,
            nonce: self.nonce,
            fee: self.fee,
            payload: self.payload,
            public_key: key.public_key(),
            signature,
        }
    }
}

impl Transaction {
    pub fn unsigned(&self) -> UnsignedTx {
        UnsignedTx {
            sender: self.sender,
            nonce: self.nonce,
            fee: self.fee,
            payload: self.payload.clone(),
        }
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        self.unsigned().canonical_encode()
    }

    /// True iff the public key hashes to `sender` and the signature covers the signing bytes.
    pub fn verify(&self) -> bool {
        self.public_key.address() == self.sender
            && verify_signature(&self.public_key, &self.signing_bytes(), &self.signature)
    }

    pub fn hash(&self) -> Hash32 {
        sha256_concat(&[
            &self.signing_bytes(),
            &self.public_key.0,
            &self.signature.0,
        ])
    }
}
