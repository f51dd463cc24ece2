//! Deterministic fee-market simulator.
//!
//! Transactions arrive as a Poisson process per block interval, carry a
//! lognormal gas price and a per-sender nonce, and are mined greedily by
//! descending gas price into blocks of fixed transaction capacity. With nonce
//! ordering enabled a transaction is only eligible once every lower nonce of
//! its sender has been mined (possibly earlier in the same block).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::chainmodel::{Block, ChainView, Timestamp, Transaction};
use crate::error::{Error, Result};
use crate::rng::{purpose, stream};

/// 2019-11-01T00:00:00Z, a UTC midnight so simulated days align with
/// calendar days.
pub const DEFAULT_START_TS: Timestamp = 1_572_566_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_blocks: u64,
    pub block_interval_s: f64,
    /// Transactions per block.
    pub block_capacity: usize,
    /// Expected arrivals per block interval.
    pub arrival_rate: f64,
    pub price_log_mu: f64,
    pub price_log_sigma: f64,
    /// Prices are rounded to multiples of this tick (minimum one tick).
    /// Zero keeps the raw lognormal draw.
    pub price_tick_gwei: f64,
    pub n_senders: usize,
    pub nonce_ordering: bool,
    pub start_ts: Timestamp,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_blocks: 1000,
            block_interval_s: 15.0,
            block_capacity: 10,
            arrival_rate: 8.0,
            price_log_mu: 10f64.ln(),
            price_log_sigma: 0.8,
            price_tick_gwei: 1.0,
            n_senders: 500,
            nonce_ordering: true,
            start_ts: DEFAULT_START_TS,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_blocks == 0 {
            return bad("n_blocks must be positive");
        }
        if !(self.block_interval_s >= 1.0) || !self.block_interval_s.is_finite() {
            return bad("block_interval_s must be at least one second");
        }
        if self.block_capacity == 0 {
            return bad("block_capacity must be at least 1");
        }
        if !(self.arrival_rate > 0.0) || !self.arrival_rate.is_finite() {
            return bad("arrival_rate must be positive");
        }
        if !(self.price_log_sigma > 0.0) || !self.price_log_mu.is_finite() {
            return bad("price law needs finite mu and positive sigma");
        }
        if !(self.price_tick_gwei >= 0.0) || !self.price_tick_gwei.is_finite() {
            return bad("price_tick_gwei must be non-negative");
        }
        if self.n_senders == 0 {
            return bad("n_senders must be positive");
        }
        Ok(())
    }

    pub fn block_timestamp(&self, k: u64) -> Timestamp {
        self.start_ts + (k as f64 * self.block_interval_s).round() as Timestamp
    }
}

// Heap key: higher price first, then earlier pending time, then smaller hash.
struct Candidate<'a> {
    price: f64,
    pending_ts: Timestamp,
    hash: &'a str,
    idx: usize,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.price
            .total_cmp(&other.price)
            .then_with(|| other.pending_ts.cmp(&self.pending_ts))
            .then_with(|| other.hash.cmp(self.hash))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

pub fn generate(config: &SynthConfig) -> Result<ChainView> {
    config.validate()?;

    let mut arrivals_rng = stream(config.seed, purpose::ARRIVALS);
    let mut timing_rng = stream(config.seed, purpose::TIMING);
    let mut sender_rng = stream(config.seed, purpose::SENDERS);
    let mut price_rng = stream(config.seed, purpose::PRICES);
    let mut gas_rng = stream(config.seed, purpose::GAS);
    let mut hash_rng = stream(config.seed, purpose::HASHES);

    let arrivals = Poisson::new(config.arrival_rate)
        .map_err(|e| Error::InvalidConfig(format!("arrival law: {e}")))?;
    let prices = LogNormal::new(config.price_log_mu, config.price_log_sigma)
        .map_err(|e| Error::InvalidConfig(format!("price law: {e}")))?;

    // Phase 1: draw every arrival.
    let mut txs: Vec<Transaction> = Vec::new();
    let mut arrivals_per_block: Vec<usize> = Vec::with_capacity(config.n_blocks as usize);
    let mut next_nonce = vec![0u64; config.n_senders];
    for k in 1..=config.n_blocks {
        let lo = config.block_timestamp(k - 1);
        let hi = config.block_timestamp(k);
        let count = arrivals.sample(&mut arrivals_rng) as usize;
        let mut pendings: Vec<Timestamp> =
            (0..count).map(|_| timing_rng.random_range(lo..hi)).collect();
        pendings.sort_unstable();
        for pending_ts in pendings {
            let sender = sender_rng.random_range(0..config.n_senders);
            let nonce = next_nonce[sender];
            next_nonce[sender] += 1;
            let gas_price_gwei = quantize(prices.sample(&mut price_rng), config.price_tick_gwei);
            let gas_used = if gas_rng.random_bool(0.6) {
                21_000
            } else {
                gas_rng.random_range(21_000..=250_000)
            };
            let hash = format!("0x{:016x}{:016x}", hash_rng.random::<u64>(), hash_rng.random::<u64>());
            txs.push(Transaction {
                hash,
                sender: format!("0xs{sender:05}"),
                nonce,
                gas_price_gwei,
                gas_used: Some(gas_used),
                pending_ts,
                block_number: None,
                processed_ts: None,
            });
        }
        arrivals_per_block.push(count);
    }

    // Phase 2: mine.
    let sender_ids: Vec<usize> = txs
        .iter()
        .map(|t| t.sender[3..].parse::<usize>().unwrap_or(0))
        .collect();
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); config.n_senders];
    let mut heap: BinaryHeap<Candidate<'_>> = BinaryHeap::new();
    let candidate = |idx: usize| Candidate {
        price: txs[idx].gas_price_gwei,
        pending_ts: txs[idx].pending_ts,
        hash: txs[idx].hash.as_str(),
        idx,
    };
    let mut included: Vec<Option<u64>> = vec![None; txs.len()];
    let mut block_members: Vec<Vec<usize>> = Vec::with_capacity(config.n_blocks as usize);
    let mut next_arrival = 0usize;
    for (k, &count) in (1..=config.n_blocks).zip(&arrivals_per_block) {
        for idx in next_arrival..next_arrival + count {
            let queue = &mut queues[sender_ids[idx]];
            queue.push_back(idx);
            if !config.nonce_ordering || queue.len() == 1 {
                heap.push(candidate(idx));
            }
        }
        next_arrival += count;

        let mut members = Vec::with_capacity(config.block_capacity);
        while members.len() < config.block_capacity {
            let Some(top) = heap.pop() else { break };
            let idx = top.idx;
            included[idx] = Some(k);
            members.push(idx);
            let queue = &mut queues[sender_ids[idx]];
            if config.nonce_ordering {
                debug_assert_eq!(queue.front(), Some(&idx));
                queue.pop_front();
                if let Some(&next) = queue.front() {
                    heap.push(candidate(next));
                }
            }
        }
        block_members.push(members);
    }
    drop(heap);

    let mut slots: Vec<Option<Transaction>> = txs.into_iter().map(Some).collect();
    let mut blocks = Vec::with_capacity(block_members.len());
    for (k, members) in (1..=config.n_blocks).zip(block_members) {
        let transactions = members.into_iter().filter_map(|i| slots[i].take()).collect();
        blocks.push(Block { number: k, timestamp: config.block_timestamp(k), transactions });
    }
    let pending: Vec<Transaction> = slots
        .into_iter()
        .zip(&included)
        .filter_map(|(slot, inc)| if inc.is_none() { slot } else { None })
        .collect();

    ChainView::with_pending(blocks, pending)
}

fn quantize(price: f64, tick: f64) -> f64 {
    if tick > 0.0 {
        ((price / tick).round() * tick).max(tick)
    } else {
        price
    }
}
