//! Single-feature ordinary least squares in `ln(1 + x)` space, and the
//! per-price lookup tables built from it.
//!
//! With `x = ln(1 + feature_pct)` and `y = ln(1 + minutes)` the model is
//! `y = a + b x`. Predictions are mapped back with `exp(y) - 1` and clamped
//! at zero minutes.

use serde::{Deserialize, Serialize};

use crate::chainmodel::{ChainView, Timestamp};
use crate::error::{Error, Result};
use crate::features::{self, FeatureIndex};
use crate::pricing::{self, PriceCategory, DEFAULT_LOOKBACK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept_a: f64,
    pub slope_b: f64,
    pub n_train: usize,
    pub train_from: Timestamp,
    pub train_to: Timestamp,
    pub lookback: u64,
}

impl LinearModel {
    /// Model with the given coefficients and empty training metadata.
    pub fn from_coefficients(intercept_a: f64, slope_b: f64) -> Self {
        Self {
            intercept_a,
            slope_b,
            n_train: 0,
            train_from: 0,
            train_to: 0,
            lookback: DEFAULT_LOOKBACK,
        }
    }

    /// Fits `(feature_pct, actual_minutes)` pairs.
    pub fn fit(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
        }
        let mut xs = Vec::with_capacity(samples.len());
        let mut ys = Vec::with_capacity(samples.len());
        for &(f, m) in samples {
            xs.push(features::transform(f)?);
            ys.push(features::transform(m)?);
        }
        let (a, b) = ols(&xs, &ys)?;
        Ok(Self { n_train: samples.len(), ..Self::from_coefficients(a, b) })
    }

    pub fn with_training_range(mut self, from: Timestamp, to: Timestamp, lookback: u64) -> Self {
        self.train_from = from;
        self.train_to = to;
        self.lookback = lookback;
        self
    }

    /// Predicted minutes for a feature value in percent.
    pub fn predict(&self, feature_pct: f64) -> f64 {
        (self.intercept_a + self.slope_b * feature_pct.max(0.0).ln_1p()).exp_m1().max(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.intercept_a.is_finite() && self.slope_b.is_finite()
    }
}

/// Closed-form simple regression of `ys` on `xs`, returns `(intercept, slope)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign);
    }
    let slope = sxy / sxx;
    Ok((y_mean - slope * x_mean, slope))
}

/// Trains on every mined transaction pending in `[from_ts, to_ts)`, with the
/// feature anchored at its containing block.
pub fn train(chain: &ChainView, from_ts: Timestamp, to_ts: Timestamp, lookback: u64) -> Result<LinearModel> {
    let samples: Vec<(f64, f64)> = features::training_samples(chain, lookback)
        .into_iter()
        .filter(|s| s.pending_ts >= from_ts && s.pending_ts < to_ts)
        .map(|s| (s.feature_pct, s.actual_minutes))
        .collect();
    Ok(LinearModel::fit(&samples)?.with_training_range(from_ts, to_ts, lookback))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupRow {
    pub gas_price_gwei: f64,
    pub category: PriceCategory,
    pub predicted_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    pub head_block: u64,
    pub rows: Vec<LookupRow>,
    /// Whether predicted minutes never increase with price.
    pub monotone_ok: bool,
}

impl LookupTable {
    pub fn new(head_block: u64, rows: Vec<LookupRow>) -> Self {
        let monotone_ok = rows.windows(2).all(|w| w[1].predicted_minutes <= w[0].predicted_minutes);
        Self { head_block, rows, monotone_ok }
    }

    /// The `kth` (1-based) cheapest row predicted to finish within the deadline.
    pub fn recommend(&self, deadline_minutes: f64, kth: usize) -> Option<&LookupRow> {
        if kth == 0 {
            return None;
        }
        self.rows
            .iter()
            .filter(|r| r.predicted_minutes <= deadline_minutes)
            .nth(kth - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriceRequest {
    List(Vec<f64>),
    Range { min: f64, max: f64, step: f64 },
}

impl PriceRequest {
    /// Requested prices, ascending and deduplicated. Range prices are
    /// `min + i * step` up to `max`.
    pub fn prices(&self) -> Result<Vec<f64>> {
        let mut prices = match self {
            PriceRequest::List(v) => v.clone(),
            &PriceRequest::Range { min, max, step } => {
                if !(step > 0.0) || !min.is_finite() || !max.is_finite() {
                    return Err(Error::InvalidConfig("price range needs finite bounds and a positive step".into()));
                }
                let mut out = Vec::new();
                let mut i = 0u64;
                loop {
                    let p = min + i as f64 * step;
                    if p > max + step * 1e-9 {
                        break;
                    }
                    out.push(p);
                    i += 1;
                }
                out
            }
        };
        if prices.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidConfig("prices must be finite and non-negative".into()));
        }
        prices.sort_by(f64::total_cmp);
        prices.dedup();
        Ok(prices)
    }
}

/// Lookup table as seen by a client whose chain head is `head_block`: the
/// feature and the category boundaries both use the `lookback` blocks up to
/// and including the head.
pub fn lookup_table(
    model: &LinearModel,
    chain: &ChainView,
    head_block: u64,
    request: &PriceRequest,
    lookback: u64,
) -> Result<LookupTable> {
    let head = chain.block(head_block).ok_or(Error::UnknownBlock(head_block))?;
    let window = chain.recent_blocks_at(head.timestamp, lookback)?;
    let bounds = pricing::boundaries_from_blocks(window, head_block, lookback)?;
    let prices = request.prices()?;
    let mut rows = Vec::with_capacity(prices.len());
    for price in prices {
        let feature = features::avg_pct_below_in(window, price)?;
        rows.push(LookupRow {
            gas_price_gwei: price,
            category: pricing::categorize(price, &bounds),
            predicted_minutes: model.predict(feature),
        });
    }
    Ok(LookupTable::new(head_block, rows))
}

/// Faster variant for many tables over one chain; produces the same rows as
/// [`lookup_table`].
pub fn lookup_table_indexed(
    model: &LinearModel,
    chain: &ChainView,
    index: &FeatureIndex,
    head_block: u64,
    prices: &[f64],
    lookback: u64,
) -> Result<LookupTable> {
    let head_pos = chain.position(head_block).ok_or(Error::UnknownBlock(head_block))?;
    let start = (head_pos + 1).saturating_sub(lookback as usize);
    let window = &chain.blocks()[start..=head_pos];
    let bounds = pricing::boundaries_from_blocks(window, head_block, lookback)?;
    let mut rows = Vec::with_capacity(prices.len());
    for &price in prices {
        let feature = index.avg_pct_below(start..head_pos + 1, price)?;
        rows.push(LookupRow {
            gas_price_gwei: price,
            category: pricing::categorize(price, &bounds),
            predicted_minutes: model.predict(feature),
        });
    }
    Ok(LookupTable::new(head_block, rows))
}
