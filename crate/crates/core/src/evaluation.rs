//! Sliding-time-window validation with bootstrap training samples.
//!
//! The dataset is split into UTC days by pending timestamp. Each window
//! trains on `train_days` consecutive days and tests on the following
//! `test_days`; the window then slides by `slide_days`. Within a window,
//! `bootstrap_reps` resamples of the training set (with replacement, same
//! size) each yield a model, and every test transaction is scored by its
//! absolute error averaged over those models.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chainmodel::{ChainView, Timestamp};
use crate::error::{Error, Result};
use crate::estimator::{ols, LinearModel};
use crate::features::{self, FeatureSample};
use crate::ingest::JoinedPrediction;
use crate::pricing::PriceCategory;
use crate::rng::replicate_stream;
use crate::stats::{self, Magnitude, TestResult};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_days: i64,
    pub train_days: i64,
    pub test_days: i64,
    pub slide_days: i64,
    pub bootstrap_reps: usize,
    pub seed: u64,
    /// When false every replicate trains on the full training set. Only
    /// useful for checking the pipeline against known fits.
    pub resample: bool,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window_days: 5,
            train_days: 4,
            test_days: 1,
            slide_days: 1,
            bootstrap_reps: 100,
            seed: 0,
            resample: true,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_days <= 0 || self.test_days <= 0 || self.slide_days <= 0 || self.bootstrap_reps == 0 {
            return Err(Error::InvalidConfig("window lengths, slide and reps must be positive".into()));
        }
        if self.train_days + self.test_days != self.window_days {
            return Err(Error::InvalidConfig(format!(
                "train_days ({}) + test_days ({}) must equal window_days ({})",
                self.train_days, self.test_days, self.window_days
            )));
        }
        Ok(())
    }
}

/// Day offsets (relative to the first dataset day), half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    pub start: i64,
    pub end: i64,
}

impl DayRange {
    pub fn contains(&self, day: i64) -> bool {
        day >= self.start && day < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    pub train: DayRange,
    pub test: DayRange,
}

pub fn sliding_windows(span_days: i64, spec: &WindowSpec) -> Result<Vec<Window>> {
    spec.validate()?;
    if span_days < spec.window_days {
        return Err(Error::SpanTooShort { span: span_days, window: spec.window_days });
    }
    let count = (span_days - spec.window_days) / spec.slide_days + 1;
    Ok((0..count)
        .map(|w| {
            let start = w * spec.slide_days;
            Window {
                index: w as usize,
                train: DayRange { start, end: start + spec.train_days },
                test: DayRange { start: start + spec.train_days, end: start + spec.window_days },
            }
        })
        .collect())
}

pub fn utc_day(ts: Timestamp) -> i64 {
    ts.div_euclid(SECONDS_PER_DAY)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMetrics {
    pub n: usize,
    pub mae: f64,
    pub medae: f64,
    /// Absent when no record has a positive actual value.
    pub mape: Option<f64>,
    pub medape: Option<f64>,
    /// Records left out of the percentage errors because actual = 0.
    pub ape_excluded: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// MAE, MedAE, MAPE and MedAPE over `(absolute_error, actual)` pairs.
pub fn accuracy_metrics(records: &[(f64, f64)]) -> Result<AccuracyMetrics> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut ae: Vec<f64> = records.iter().map(|r| r.0).collect();
    let mae = ae.iter().sum::<f64>() / ae.len() as f64;
    let medae = median(&mut ae);
    let mut ape: Vec<f64> = records.iter().filter(|r| r.1 > 0.0).map(|r| 100.0 * r.0 / r.1).collect();
    let ape_excluded = records.len() - ape.len();
    let (mape, medape) = if ape.is_empty() {
        (None, None)
    } else {
        let mean = ape.iter().sum::<f64>() / ape.len() as f64;
        (Some(mean), Some(median(&mut ape)))
    };
    Ok(AccuracyMetrics { n: records.len(), mae, medae, mape, medape, ape_excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub tx_hash: String,
    pub category: PriceCategory,
    pub actual_minutes: f64,
    pub mean_ae_minutes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    /// Fitted `(intercept_a, slope_b)`, absent when the resample was degenerate.
    pub coefficients: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: Window,
    pub n_train: usize,
    pub n_test: usize,
    pub reps: Vec<RepOutcome>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub span_days: i64,
    pub first_day: i64,
    pub windows: Vec<WindowSummary>,
    #[serde(skip)]
    pub records: Vec<TxRecord>,
    pub global: AccuracyMetrics,
    pub per_category: BTreeMap<PriceCategory, AccuracyMetrics>,
}

impl EvaluationReport {
    fn from_records(span_days: i64, first_day: i64, windows: Vec<WindowSummary>, records: Vec<TxRecord>) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.mean_ae_minutes, r.actual_minutes)).collect();
        let global = accuracy_metrics(&pairs)?;
        let mut per_category = BTreeMap::new();
        for cat in PriceCategory::ALL {
            let pairs: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.category == cat)
                .map(|r| (r.mean_ae_minutes, r.actual_minutes))
                .collect();
            if let Ok(m) = accuracy_metrics(&pairs) {
                per_category.insert(cat, m);
            }
        }
        Ok(Self { span_days, first_day, windows, records, global, per_category })
    }

    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_records(writer, &self.records)
    }

    /// Aggregates and window summaries as pretty JSON.
    pub fn aggregates_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Records as delimited text followed by the aggregate JSON block.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_records_csv(&mut out)?;
        out.extend_from_slice(self.aggregates_json()?.as_bytes());
        out.push(b'\n');
        Ok(out)
    }
}

pub fn write_records<W: Write>(writer: W, records: &[TxRecord]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(["tx_hash", "category", "actual_minutes", "mean_ae_minutes"])?;
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<TxRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<TxRecord>().enumerate() {
        out.push(row.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?);
    }
    Ok(out)
}

/// Samples assigned to dataset days.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<FeatureSample>,
    pub days: Vec<i64>,
    pub first_day: i64,
    pub span_days: i64,
}

impl Dataset {
    pub fn from_chain(chain: &ChainView, lookback: u64) -> Result<Self> {
        Self::from_samples(features::training_samples(chain, lookback))
    }

    pub fn from_samples(samples: Vec<FeatureSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoRecords);
        }
        let raw: Vec<i64> = samples.iter().map(|s| utc_day(s.pending_ts)).collect();
        let first_day = *raw.iter().min().unwrap_or(&0);
        let last_day = *raw.iter().max().unwrap_or(&0);
        let days = raw.into_iter().map(|d| d - first_day).collect();
        Ok(Self { samples, days, first_day, span_days: last_day - first_day + 1 })
    }

    fn split(&self, window: &Window) -> (Vec<usize>, Vec<usize>) {
        let train = (0..self.samples.len()).filter(|&i| window.train.contains(self.days[i])).collect();
        let test = (0..self.samples.len()).filter(|&i| window.test.contains(self.days[i])).collect();
        (train, test)
    }
}

pub fn validate(chain: &ChainView, spec: &WindowSpec, lookback: u64) -> Result<EvaluationReport> {
    validate_dataset(&Dataset::from_chain(chain, lookback)?, spec)
}

pub fn validate_dataset(data: &Dataset, spec: &WindowSpec) -> Result<EvaluationReport> {
    let windows = sliding_windows(data.span_days, spec)?;
    let xs: Vec<f64> = data.samples.iter().map(|s| s.feature_pct.ln_1p()).collect();
    let ys: Vec<f64> = data.samples.iter().map(|s| s.actual_minutes.ln_1p()).collect();

    let mut summaries = Vec::with_capacity(windows.len());
    let mut records = Vec::new();
    for window in windows {
        let (train, test) = data.split(&window);
        let reps: Vec<RepOutcome> = (0..spec.bootstrap_reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replicate_stream(spec.seed, window.index, rep);
                let (bx, by): (Vec<f64>, Vec<f64>) = if spec.resample && !train.is_empty() {
                    (0..train.len())
                        .map(|_| {
                            let i = train[rng.random_range(0..train.len())];
                            (xs[i], ys[i])
                        })
                        .unzip()
                } else {
                    train.iter().map(|&i| (xs[i], ys[i])).unzip()
                };
                RepOutcome { rep, coefficients: ols(&bx, &by).ok() }
            })
            .collect();

        let fitted: Vec<LinearModel> = reps
            .iter()
            .filter_map(|r| r.coefficients.map(|(a, b)| LinearModel::from_coefficients(a, b)))
            .collect();
        let failed = fitted.is_empty();
        if !failed {
            for &i in &test {
                let s = &data.samples[i];
                // sum in replicate order
                let mut sum = 0.0;
                for m in &fitted {
                    sum += (s.actual_minutes - m.predict(s.feature_pct)).abs();
                }
                records.push(TxRecord {
                    tx_hash: s.tx_hash.clone(),
                    category: s.price_category,
                    actual_minutes: s.actual_minutes,
                    mean_ae_minutes: sum / fitted.len() as f64,
                });
            }
        }
        summaries.push(WindowSummary { window, n_train: train.len(), n_test: test.len(), reps, failed });
    }
    EvaluationReport::from_records(data.span_days, data.first_day, summaries, records)
}

/// Reference predictor for the same windows: every test transaction is
/// predicted as the median processing time of the window's training days.
pub fn median_baseline(data: &Dataset, spec: &WindowSpec) -> Result<EvaluationReport> {
    let windows = sliding_windows(data.span_days, spec)?;
    let mut summaries = Vec::with_capacity(windows.len());
    let mut records = Vec::new();
    for window in windows {
        let (train, test) = data.split(&window);
        let failed = train.is_empty();
        if !failed {
            let mut actuals: Vec<f64> = train.iter().map(|&i| data.samples[i].actual_minutes).collect();
            let prediction = median(&mut actuals);
            for &i in &test {
                let s = &data.samples[i];
                records.push(TxRecord {
                    tx_hash: s.tx_hash.clone(),
                    category: s.price_category,
                    actual_minutes: s.actual_minutes,
                    mean_ae_minutes: (s.actual_minutes - prediction).abs(),
                });
            }
        }
        summaries.push(WindowSummary { window, n_train: train.len(), n_test: test.len(), reps: Vec::new(), failed });
    }
    EvaluationReport::from_records(data.span_days, data.first_day, summaries, records)
}

/// Routes each price category to one external predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRouter {
    pub route: BTreeMap<PriceCategory, String>,
}

impl EnsembleRouter {
    /// Very cheap and cheap go to `cheap_source`, everything else to
    /// `other_source`.
    pub fn two_source(cheap_source: &str, other_source: &str) -> Self {
        let route = PriceCategory::ALL
            .into_iter()
            .map(|c| {
                let src = if c <= PriceCategory::Cheap { cheap_source } else { other_source };
                (c, src.to_string())
            })
            .collect();
        Self { route }
    }

    pub fn source_for(&self, category: PriceCategory) -> &str {
        &self.route[&category]
    }
}

/// The routed source's prediction, unchanged.
pub fn ensemble_predict(
    router: &EnsembleRouter,
    per_source: &HashMap<String, f64>,
    category: PriceCategory,
    tx_hash: &str,
) -> Result<f64> {
    let source = router.source_for(category);
    per_source.get(source).copied().ok_or_else(|| Error::MissingSourcePrediction {
        source_id: source.to_string(),
        tx_hash: tx_hash.to_string(),
    })
}

/// Absolute errors of our model and of the routed ensemble on the
/// transactions both can score, in record order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairedErrors {
    pub tx_hashes: Vec<String>,
    pub categories: Vec<PriceCategory>,
    pub ours: Vec<f64>,
    pub other: Vec<f64>,
    /// Records without a prediction from their routed source.
    pub missing: usize,
}

impl PairedErrors {
    pub fn subset(&self, category: PriceCategory) -> (Vec<f64>, Vec<f64>) {
        self.categories
            .iter()
            .zip(self.ours.iter().zip(&self.other))
            .filter(|(c, _)| **c == category)
            .map(|(_, (&a, &b))| (a, b))
            .unzip()
    }
}

pub fn pair_with_ensemble(records: &[TxRecord], joined: &[JoinedPrediction], router: &EnsembleRouter) -> PairedErrors {
    let mut by_tx: HashMap<&str, HashMap<String, f64>> = HashMap::new();
    for j in joined {
        by_tx.entry(j.tx_hash.as_str()).or_default().insert(j.source_id.clone(), j.predicted_minutes);
    }
    let empty = HashMap::new();
    let mut out = PairedErrors::default();
    for r in records {
        let per_source = by_tx.get(r.tx_hash.as_str()).unwrap_or(&empty);
        match ensemble_predict(router, per_source, r.category, &r.tx_hash) {
            Ok(pred) => {
                out.tx_hashes.push(r.tx_hash.clone());
                out.categories.push(r.category);
                out.ours.push(r.mean_ae_minutes);
                out.other.push((r.actual_minutes - pred).abs());
            }
            Err(_) => out.missing += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub n: usize,
    pub wilcoxon: TestResult,
    /// `cliffs_delta(ours, other)`: negative when our errors are smaller.
    pub cliffs_delta: f64,
    pub magnitude: Magnitude,
}

pub fn paired_compare(ours: &[f64], other: &[f64]) -> Result<PairedComparison> {
    if ours.len() != other.len() {
        return Err(Error::LengthMismatch { left: ours.len(), right: other.len() });
    }
    if ours.len() < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: ours.len() });
    }
    let diffs: Vec<f64> = ours.iter().zip(other).map(|(a, b)| a - b).collect();
    let (delta, magnitude) = stats::cliffs_delta(ours, other)?;
    let wilcoxon = match stats::wilcoxon_signed_rank(&diffs) {
        Ok(t) => t,
        Err(Error::AllZeroDifferences) => TestResult {
            statistic: 0.0,
            p_value: 1.0,
            method: stats::TestMethod::WilcoxonExact,
        },
        Err(e) => return Err(e),
    };
    Ok(PairedComparison { n: ours.len(), wilcoxon, cliffs_delta: delta, magnitude })
}
