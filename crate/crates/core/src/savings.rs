//! Retrospective cheaper-price experiment and the time-expense balance.
//!
//! For each transaction in a sampled block, the lookup table built at the
//! preceding block proposes cheaper prices predicted to finish no later than
//! the transaction actually did. The middle proposal is checked against a
//! transaction in the same block that paid exactly that price.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chainmodel::{Block, ChainView, Transaction};
use crate::error::{Error, Result};
use crate::estimator::{lookup_table_indexed, LinearModel, LookupTable, PriceRequest};
use crate::features::FeatureIndex;
use crate::rng::{purpose, stream};
use crate::stats::two_sided_z;

/// Prices closer than this are the same price.
pub const PRICE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingsConfig {
    pub confidence: f64,
    pub margin: f64,
    pub price_step_gwei: f64,
    pub seed: u64,
}

impl Default for SavingsConfig {
    fn default() -> Self {
        Self { confidence: 0.95, margin: 0.05, price_step_gwei: 1.0, seed: 0 }
    }
}

impl SavingsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidConfig("confidence must lie in (0, 1)".into()));
        }
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return Err(Error::InvalidConfig("margin must lie in (0, 1)".into()));
        }
        if !(self.price_step_gwei > 0.0) {
            return Err(Error::InvalidConfig("price step must be positive".into()));
        }
        Ok(())
    }
}

/// Cochran's sample size for a proportion with finite-population correction.
pub fn sample_size(population: usize, confidence: f64, margin: f64) -> usize {
    if population == 0 {
        return 0;
    }
    let z = two_sided_z(confidence);
    let n0 = z * z * 0.25 / (margin * margin);
    let n = n0 / (1.0 + (n0 - 1.0) / population as f64);
    (n.ceil() as usize).min(population)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusiveReason {
    /// No cheaper lookup price was predicted to be fast enough.
    NoCandidate,
    /// No transaction in the block paid exactly the proposed price.
    NoMatchingPrice,
    /// The lookup table could not be built for this block.
    LookupUnavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SavingsOutcome {
    SavingOpportunity { g: f64, g_target: f64, g2: f64, fee_saved_fraction: f64 },
    FailureToSave { g: f64, g_target: f64 },
    Inconclusive { reason: InconclusiveReason },
}

/// Outcome for one mined transaction given the lookup table for its block.
pub fn evaluate_tx(tx: &Transaction, block: &Block, lookup: &LookupTable) -> SavingsOutcome {
    let g = tx.gas_price_gwei;
    let Ok(p) = tx.processing_time_minutes() else {
        return SavingsOutcome::Inconclusive { reason: InconclusiveReason::NoCandidate };
    };
    // rows are ascending by price
    let candidates: Vec<f64> = lookup
        .rows
        .iter()
        .filter(|r| r.gas_price_gwei < g && r.predicted_minutes <= p)
        .map(|r| r.gas_price_gwei)
        .collect();
    if candidates.is_empty() {
        return SavingsOutcome::Inconclusive { reason: InconclusiveReason::NoCandidate };
    }
    let g_target = candidates[candidates.len() / 2];
    let p2 = block
        .transactions
        .iter()
        .filter(|t| (t.gas_price_gwei - g_target).abs() <= PRICE_EPSILON)
        .filter_map(|t| t.processing_time_minutes().ok())
        .max_by(f64::total_cmp);
    match p2 {
        None => SavingsOutcome::Inconclusive { reason: InconclusiveReason::NoMatchingPrice },
        Some(p2) if p2 <= p => SavingsOutcome::SavingOpportunity {
            g,
            g_target,
            g2: g_target,
            fee_saved_fraction: (g - g_target) / g,
        },
        Some(_) => SavingsOutcome::FailureToSave { g, g_target },
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub saving_opportunity: usize,
    pub failure_to_save: usize,
    /// All inconclusive outcomes, including the sub-reasons below.
    pub inconclusive: usize,
    pub no_candidate: usize,
    pub no_matching_price: usize,
    pub lookup_unavailable: usize,
}

impl OutcomeCounts {
    pub fn total(&self) -> usize {
        self.saving_opportunity + self.failure_to_save + self.inconclusive
    }

    pub fn add(&mut self, outcome: &SavingsOutcome) {
        match outcome {
            SavingsOutcome::SavingOpportunity { .. } => self.saving_opportunity += 1,
            SavingsOutcome::FailureToSave { .. } => self.failure_to_save += 1,
            SavingsOutcome::Inconclusive { reason } => {
                self.inconclusive += 1;
                match reason {
                    InconclusiveReason::NoCandidate => self.no_candidate += 1,
                    InconclusiveReason::NoMatchingPrice => self.no_matching_price += 1,
                    InconclusiveReason::LookupUnavailable => self.lookup_unavailable += 1,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomePercentages {
    pub saving_opportunity: f64,
    pub failure_to_save: f64,
    pub inconclusive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub seed: u64,
    pub population_blocks: usize,
    pub sampled_blocks: usize,
    /// Sampled block numbers, ascending.
    pub sample: Vec<u64>,
    pub counts: OutcomeCounts,
    pub percentages: OutcomePercentages,
    /// Fee-weighted fraction saved across saving opportunities; absent when
    /// there were none.
    pub saved_fraction: Option<f64>,
}

/// Lookup table for `block` as it would have been built when the preceding
/// block was the chain head.
fn block_lookup(
    model: &LinearModel,
    chain: &ChainView,
    index: &FeatureIndex,
    pos: usize,
    step: f64,
    lookback: u64,
) -> Result<LookupTable> {
    if pos == 0 {
        return Err(Error::EmptyWindow);
    }
    let block = &chain.blocks()[pos];
    let max = block.max_gas_price().ok_or(Error::EmptyWindow)?;
    let prices = PriceRequest::Range { min: 1.0, max, step }.prices()?;
    lookup_table_indexed(model, chain, index, chain.blocks()[pos - 1].number, &prices, lookback)
}

pub fn evaluate_block(
    model: &LinearModel,
    chain: &ChainView,
    index: &FeatureIndex,
    pos: usize,
    step: f64,
    lookback: u64,
) -> Vec<(SavingsOutcome, f64)> {
    let block = &chain.blocks()[pos];
    let weight = |t: &Transaction| t.gas_used.map_or(1.0, |g| g as f64);
    match block_lookup(model, chain, index, pos, step, lookback) {
        Ok(table) => block.transactions.iter().map(|t| (evaluate_tx(t, block, &table), weight(t))).collect(),
        Err(_) => block
            .transactions
            .iter()
            .map(|t| (SavingsOutcome::Inconclusive { reason: InconclusiveReason::LookupUnavailable }, weight(t)))
            .collect(),
    }
}

/// Samples blocks without replacement and evaluates every transaction in
/// them. The population is every non-empty block after the first.
pub fn run_experiment(chain: &ChainView, model: &LinearModel, config: &SavingsConfig, lookback: u64) -> Result<SavingsReport> {
    config.validate()?;
    let population: Vec<usize> = (1..chain.blocks().len())
        .filter(|&p| !chain.blocks()[p].transactions.is_empty())
        .collect();
    if population.is_empty() {
        return Err(Error::NoRecords);
    }
    let n = sample_size(population.len(), config.confidence, config.margin);
    let mut rng = stream(config.seed, purpose::BLOCK_SAMPLE);
    let mut positions: Vec<usize> = index::sample(&mut rng, population.len(), n).into_iter().map(|i| population[i]).collect();
    positions.sort_unstable();

    let index = FeatureIndex::new(chain);
    let per_block: Vec<Vec<(SavingsOutcome, f64)>> = positions
        .par_iter()
        .map(|&pos| evaluate_block(model, chain, &index, pos, config.price_step_gwei, lookback))
        .collect();

    let mut counts = OutcomeCounts::default();
    let (mut saved, mut paid) = (0.0, 0.0);
    for (outcome, gas) in per_block.iter().flatten() {
        counts.add(outcome);
        if let SavingsOutcome::SavingOpportunity { g, g_target, .. } = outcome {
            saved += (g - g_target) * gas;
            paid += g * gas;
        }
    }
    let total = counts.total().max(1) as f64;
    let percentages = OutcomePercentages {
        saving_opportunity: 100.0 * counts.saving_opportunity as f64 / total,
        failure_to_save: 100.0 * counts.failure_to_save as f64 / total,
        inconclusive: 100.0 * counts.inconclusive as f64 / total,
    };
    Ok(SavingsReport {
        seed: config.seed,
        population_blocks: population.len(),
        sampled_blocks: positions.len(),
        sample: positions.iter().map(|&p| chain.blocks()[p].number).collect(),
        counts,
        percentages,
        saved_fraction: (paid > 0.0).then(|| saved / paid),
    })
}

/// Harmonic mean of the share of transactions meeting their deadline and the
/// share of budget left unspent, both in percent.
pub fn time_expense_balance(qos_pct: f64, budget_free_pct: f64) -> f64 {
    let sum = qos_pct + budget_free_pct;
    if sum == 0.0 {
        return 0.0;
    }
    2.0 * qos_pct * budget_free_pct / sum
}
