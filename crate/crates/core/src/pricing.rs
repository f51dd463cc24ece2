//! Rolling-quintile gas price categories.
//!
//! The boundaries for a transaction are the 20/40/60/80% quantiles of every
//! gas price mined in the `lookback` blocks before its containing block.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chainmodel::{Block, ChainView};
use crate::error::{Error, Result};

pub const DEFAULT_LOOKBACK: u64 = 120;

/// Lookbacks examined when checking how sensitive boundaries are to the
/// window length.
pub const SENSITIVITY_LOOKBACKS: [u64; 5] = [60, 120, 180, 200, 240];

const MIN_POOL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceCategory {
    VeryCheap,
    Cheap,
    Regular,
    Expensive,
    VeryExpensive,
}

impl PriceCategory {
    pub const ALL: [PriceCategory; 5] = [
        PriceCategory::VeryCheap,
        PriceCategory::Cheap,
        PriceCategory::Regular,
        PriceCategory::Expensive,
        PriceCategory::VeryExpensive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PriceCategory::VeryCheap => "very_cheap",
            PriceCategory::Cheap => "cheap",
            PriceCategory::Regular => "regular",
            PriceCategory::Expensive => "expensive",
            PriceCategory::VeryExpensive => "very_expensive",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PriceCategory::VeryCheap => "Very Cheap",
            PriceCategory::Cheap => "Cheap",
            PriceCategory::Regular => "Regular",
            PriceCategory::Expensive => "Expensive",
            PriceCategory::VeryExpensive => "Very Expensive",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PriceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PriceCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        PriceCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown price category {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryBoundaries {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
    pub reference_block: u64,
    pub lookback: u64,
    pub sample_size: usize,
}

/// Linear-interpolation quantile of ascending `values`:
/// `h = (n-1)q`, `v[floor h] + frac(h) * (v[floor h + 1] - v[floor h])`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let h = (values.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= values.len() || frac == 0.0 {
        return Ok(values[lo.min(values.len() - 1)]);
    }
    Ok(values[lo] + frac * (values[lo + 1] - values[lo]))
}

/// Quintile boundaries over the prices of the `lookback` blocks preceding
/// `block_number`.
pub fn boundaries(chain: &ChainView, block_number: u64, lookback: u64) -> Result<CategoryBoundaries> {
    let window = chain.window_before(block_number, lookback)?;
    boundaries_from_blocks(window, block_number, lookback)
}

pub fn boundaries_from_blocks(
    window: &[Block],
    reference_block: u64,
    lookback: u64,
) -> Result<CategoryBoundaries> {
    let mut pool: Vec<f64> = window
        .iter()
        .flat_map(|b| b.transactions.iter().map(|t| t.gas_price_gwei))
        .collect();
    if pool.len() < MIN_POOL {
        return Err(Error::InsufficientWindow { found: pool.len() });
    }
    pool.sort_by(f64::total_cmp);
    Ok(CategoryBoundaries {
        q1: quantile(&pool, 0.2)?,
        q2: quantile(&pool, 0.4)?,
        q3: quantile(&pool, 0.6)?,
        q4: quantile(&pool, 0.8)?,
        reference_block,
        lookback,
        sample_size: pool.len(),
    })
}

pub fn categorize(price: f64, b: &CategoryBoundaries) -> PriceCategory {
    if price <= b.q1 {
        PriceCategory::VeryCheap
    } else if price <= b.q2 {
        PriceCategory::Cheap
    } else if price <= b.q3 {
        PriceCategory::Regular
    } else if price <= b.q4 {
        PriceCategory::Expensive
    } else {
        PriceCategory::VeryExpensive
    }
}
