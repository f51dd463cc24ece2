//! The single engineered feature: the mean, over recent non-empty blocks, of
//! the percentage of each block's transactions priced strictly below a given
//! gas price. Model inputs and outputs live in `ln(1 + x)` space.

use serde::{Deserialize, Serialize};

use crate::chainmodel::{Block, ChainView, Timestamp};
use crate::error::{Error, Result};
use crate::pricing::{self, PriceCategory};

/// Where the feature window ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// The `lookback` blocks preceding the block that contains the
    /// transaction. Used for training and offline evaluation.
    ContainingBlock(u64),
    /// The most recent `lookback` blocks with a timestamp at or before the
    /// given instant. Used at prediction time, when only the head is known.
    PendingTime(Timestamp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSample {
    pub tx_hash: String,
    pub gas_price_gwei: f64,
    pub feature_pct: f64,
    pub actual_minutes: f64,
    pub pending_ts: Timestamp,
    pub price_category: PriceCategory,
}

pub fn window(chain: &ChainView, anchor: Anchor, lookback: u64) -> Result<&[Block]> {
    match anchor {
        Anchor::ContainingBlock(n) => chain.window_before(n, lookback),
        Anchor::PendingTime(ts) => chain.recent_blocks_at(ts, lookback),
    }
}

pub fn avg_pct_below(chain: &ChainView, price: f64, anchor: Anchor, lookback: u64) -> Result<f64> {
    avg_pct_below_in(window(chain, anchor, lookback)?, price)
}

pub fn avg_pct_below_in(blocks: &[Block], price: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for block in blocks.iter().filter(|b| !b.transactions.is_empty()) {
        let below = block.transactions.iter().filter(|t| t.gas_price_gwei < price).count();
        sum += 100.0 * below as f64 / block.transactions.len() as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    Ok(sum / n as f64)
}

/// Per-block sorted prices so the feature for many prices costs a binary
/// search per block instead of a scan.
#[derive(Debug, Clone)]
pub struct FeatureIndex {
    sorted: Vec<Vec<f64>>,
}

impl FeatureIndex {
    pub fn new(chain: &ChainView) -> Self {
        let sorted = chain
            .blocks()
            .iter()
            .map(|b| {
                let mut prices: Vec<f64> = b.transactions.iter().map(|t| t.gas_price_gwei).collect();
                prices.sort_by(f64::total_cmp);
                prices
            })
            .collect();
        Self { sorted }
    }

    /// Same value as [`avg_pct_below_in`] over the blocks at chain positions
    /// `range`, with identical floating-point evaluation order.
    pub fn avg_pct_below(&self, range: std::ops::Range<usize>, price: f64) -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for prices in self.sorted[range].iter().filter(|p| !p.is_empty()) {
            let below = prices.partition_point(|&p| p < price);
            sum += 100.0 * below as f64 / prices.len() as f64;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyWindow);
        }
        Ok(sum / n as f64)
    }
}

/// Feature samples for every mined transaction whose window and category are
/// computable, anchored at the containing block.
pub fn training_samples(chain: &ChainView, lookback: u64) -> Vec<FeatureSample> {
    let index = FeatureIndex::new(chain);
    let mut out = Vec::new();
    for (pos, block) in chain.blocks().iter().enumerate() {
        if block.transactions.is_empty() {
            continue;
        }
        let Ok(window) = chain.window_before(block.number, lookback) else { continue };
        let start = pos - window.len();
        let Ok(bounds) = pricing::boundaries_from_blocks(window, block.number, lookback) else {
            continue;
        };
        for tx in &block.transactions {
            let Ok(feature_pct) = index.avg_pct_below(start..pos, tx.gas_price_gwei) else { continue };
            let Ok(actual_minutes) = tx.processing_time_minutes() else { continue };
            out.push(FeatureSample {
                tx_hash: tx.hash.clone(),
                gas_price_gwei: tx.gas_price_gwei,
                feature_pct,
                actual_minutes,
                pending_ts: tx.pending_ts,
                price_category: pricing::categorize(tx.gas_price_gwei, &bounds),
            });
        }
    }
    out
}

pub fn transform(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::DomainError(x));
    }
    Ok(x.ln_1p())
}

pub fn inverse_transform(y: f64) -> f64 {
    y.exp_m1()
}
