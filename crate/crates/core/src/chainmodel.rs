//! Ledger data model: transactions, blocks and an indexed, immutable view of
//! a chain.
//!
//! A transaction's processing time is the delta between the timestamp of the
//! block that includes it and the moment it was first seen pending.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unix timestamp in seconds.
pub type Timestamp = i64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub hash: String,
    pub sender: String,
    pub nonce: u64,
    pub gas_price_gwei: f64,
    pub gas_used: Option<u64>,
    pub pending_ts: Timestamp,
    pub block_number: Option<u64>,
    pub processed_ts: Option<Timestamp>,
}

impl Transaction {
    /// Minutes between the pending and processed timestamps.
    pub fn processing_time_minutes(&self) -> Result<f64> {
        let processed = self
            .processed_ts
            .ok_or_else(|| Error::MissingProcessedTimestamp { hash: self.hash.clone() })?;
        if processed < self.pending_ts {
            return Err(Error::NegativeDuration { hash: self.hash.clone() });
        }
        Ok((processed - self.pending_ts) as f64 / 60.0)
    }

    pub fn is_mined(&self) -> bool {
        self.block_number.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub number: u64,
    pub timestamp: Timestamp,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn max_gas_price(&self) -> Option<f64> {
        self.transactions.iter().map(|t| t.gas_price_gwei).reduce(f64::max)
    }
}

/// Validated, indexed view over an ordered list of blocks plus any
/// transactions that never made it into a block.
#[derive(Debug, Clone, Default)]
pub struct ChainView {
    blocks: Vec<Block>,
    pending: Vec<Transaction>,
    by_number: HashMap<u64, usize>,
    // (block position, tx position); unmined transactions use usize::MAX as block position
    by_hash: HashMap<String, (usize, usize)>,
}

impl ChainView {
    /// Builds a view from blocks, stamping each transaction with its block
    /// number and processed timestamp.
    pub fn from_blocks(blocks: Vec<Block>) -> Result<Self> {
        Self::with_pending(blocks, Vec::new())
    }

    pub fn with_pending(mut blocks: Vec<Block>, pending: Vec<Transaction>) -> Result<Self> {
        for pair in blocks.windows(2) {
            if pair[1].number <= pair[0].number {
                return Err(Error::InvariantViolation(format!(
                    "block numbers must strictly increase ({} then {})",
                    pair[0].number, pair[1].number
                )));
            }
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(Error::InvariantViolation(format!(
                    "block timestamps must strictly increase (block {} at {} then block {} at {})",
                    pair[0].number, pair[0].timestamp, pair[1].number, pair[1].timestamp
                )));
            }
        }

        let mut by_number = HashMap::with_capacity(blocks.len());
        let mut by_hash = HashMap::new();
        for (bi, block) in blocks.iter_mut().enumerate() {
            by_number.insert(block.number, bi);
            for (ti, tx) in block.transactions.iter_mut().enumerate() {
                tx.block_number = Some(block.number);
                tx.processed_ts = Some(block.timestamp);
                check_tx(tx)?;
                if tx.pending_ts > block.timestamp {
                    return Err(Error::InvariantViolation(format!(
                        "transaction {} is pending at {} after its block {} at {}",
                        tx.hash, tx.pending_ts, block.number, block.timestamp
                    )));
                }
                if by_hash.insert(tx.hash.clone(), (bi, ti)).is_some() {
                    return Err(Error::InvariantViolation(format!(
                        "duplicate transaction hash {}",
                        tx.hash
                    )));
                }
            }
        }
        let mut pending = pending;
        for (ti, tx) in pending.iter_mut().enumerate() {
            tx.block_number = None;
            tx.processed_ts = None;
            check_tx(tx)?;
            if by_hash.insert(tx.hash.clone(), (usize::MAX, ti)).is_some() {
                return Err(Error::InvariantViolation(format!(
                    "duplicate transaction hash {}",
                    tx.hash
                )));
            }
        }

        Ok(Self { blocks, pending, by_number, by_hash })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Transactions still waiting for inclusion at the end of the chain.
    pub fn pending(&self) -> &[Transaction] {
        &self.pending
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn head(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn block(&self, number: u64) -> Option<&Block> {
        self.by_number.get(&number).map(|&i| &self.blocks[i])
    }

    pub fn position(&self, number: u64) -> Option<usize> {
        self.by_number.get(&number).copied()
    }

    pub fn transaction(&self, hash: &str) -> Option<&Transaction> {
        self.by_hash.get(hash).map(|&(bi, ti)| {
            if bi == usize::MAX {
                &self.pending[ti]
            } else {
                &self.blocks[bi].transactions[ti]
            }
        })
    }

    pub fn mined_transactions(&self) -> impl Iterator<Item = (&Block, &Transaction)> {
        self.blocks.iter().flat_map(|b| b.transactions.iter().map(move |t| (b, t)))
    }

    pub fn transaction_count(&self) -> usize {
        self.by_hash.len()
    }

    /// Blocks numbered `[block_number - lookback, block_number - 1]`, truncated
    /// at the start of the chain.
    pub fn window_before(&self, block_number: u64, lookback: u64) -> Result<&[Block]> {
        if !self.by_number.contains_key(&block_number) {
            return Err(Error::UnknownBlock(block_number));
        }
        let lo = block_number.saturating_sub(lookback);
        let window = self.number_range(lo, block_number);
        if window.is_empty() {
            return Err(Error::EmptyWindow);
        }
        Ok(window)
    }

    /// Blocks numbered `[last - lookback + 1, last]`: the window a client sees
    /// when `last` is the chain head.
    pub fn window_ending_at(&self, last: u64, lookback: u64) -> Result<&[Block]> {
        if !self.by_number.contains_key(&last) {
            return Err(Error::UnknownBlock(last));
        }
        let lo = (last + 1).saturating_sub(lookback);
        let window = self.number_range(lo, last + 1);
        if window.is_empty() {
            return Err(Error::EmptyWindow);
        }
        Ok(window)
    }

    /// The most recent `lookback` blocks whose timestamp is at or before `ts`.
    pub fn recent_blocks_at(&self, ts: Timestamp, lookback: u64) -> Result<&[Block]> {
        let end = self.blocks.partition_point(|b| b.timestamp <= ts);
        let start = end.saturating_sub(lookback as usize);
        if start == end {
            return Err(Error::EmptyWindow);
        }
        Ok(&self.blocks[start..end])
    }

    // blocks with lo <= number < hi
    fn number_range(&self, lo: u64, hi: u64) -> &[Block] {
        let start = self.blocks.partition_point(|b| b.number < lo);
        let end = self.blocks.partition_point(|b| b.number < hi);
        &self.blocks[start..end]
    }
}

fn check_tx(tx: &Transaction) -> Result<()> {
    if !(tx.gas_price_gwei >= 0.0) || !tx.gas_price_gwei.is_finite() {
        return Err(Error::InvariantViolation(format!(
            "transaction {} has invalid gas price {}",
            tx.hash, tx.gas_price_gwei
        )));
    }
    if let Some(processed) = tx.processed_ts {
        if processed < tx.pending_ts {
            return Err(Error::InvariantViolation(format!(
                "transaction {} processed before pending",
                tx.hash
            )));
        }
    }
    Ok(())
}
