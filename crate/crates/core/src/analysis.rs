//! Per-category descriptive statistics and the omnibus / post-hoc procedure
//! that checks whether processing times differ between price categories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSample;
use crate::pricing::{quantile, PriceCategory};
use crate::stats::{self, Magnitude, Strength, TestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: PriceCategory,
    pub n: usize,
    pub price_min: f64,
    pub price_q1: f64,
    pub price_median: f64,
    pub price_q3: f64,
    pub price_max: f64,
    pub price_mean: f64,
    /// Sample standard deviation; zero for a single transaction.
    pub price_std: f64,
    pub median_minutes: f64,
    pub p90_minutes: f64,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Summary rows for every category that has at least one sample.
pub fn category_summaries(samples: &[FeatureSample]) -> Result<Vec<CategorySummary>> {
    let mut out = Vec::new();
    for category in PriceCategory::ALL {
        let in_cat: Vec<&FeatureSample> = samples.iter().filter(|s| s.price_category == category).collect();
        if in_cat.is_empty() {
            continue;
        }
        let prices = sorted(in_cat.iter().map(|s| s.gas_price_gwei).collect());
        let minutes = sorted(in_cat.iter().map(|s| s.actual_minutes).collect());
        let n = prices.len();
        let mean = prices.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { prices.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        out.push(CategorySummary {
            category,
            n,
            price_min: prices[0],
            price_q1: quantile(&prices, 0.25)?,
            price_median: quantile(&prices, 0.5)?,
            price_q3: quantile(&prices, 0.75)?,
            price_max: prices[n - 1],
            price_mean: mean,
            price_std: var.sqrt(),
            median_minutes: quantile(&minutes, 0.5)?,
            p90_minutes: quantile(&minutes, 0.9)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjacentComparison {
    pub cheaper: PriceCategory,
    pub pricier: PriceCategory,
    /// Bonferroni-adjusted Dunn p-value.
    pub p_adjusted: f64,
    /// `cliffs_delta(cheaper, pricier)` on processing times.
    pub delta: f64,
    pub magnitude: Magnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryComparison {
    pub kruskal_wallis: TestResult,
    pub adjacent: Vec<AdjacentComparison>,
    /// Spearman correlation between the feature and processing time.
    pub spearman_rho: f64,
    pub spearman_strength: Strength,
}

/// Kruskal-Wallis across all five categories, then Dunn and Cliff's delta
/// for each pair of neighbouring categories.
pub fn compare_categories(samples: &[FeatureSample]) -> Result<CategoryComparison> {
    let groups: Vec<Vec<f64>> = PriceCategory::ALL
        .iter()
        .map(|&c| samples.iter().filter(|s| s.price_category == c).map(|s| s.actual_minutes).collect())
        .collect();
    if let Some(empty) = groups.iter().position(Vec::is_empty) {
        return Err(Error::InvalidConfig(format!("no samples in category {}", PriceCategory::ALL[empty])));
    }
    let kruskal_wallis = stats::kruskal_wallis(&groups)?;
    let dunn = stats::dunn_posthoc(&groups)?;
    let mut adjacent = Vec::new();
    for i in 0..4 {
        let p_adjusted = dunn.iter().find(|p| p.i == i && p.j == i + 1).map_or(1.0, |p| p.p_adjusted);
        let (delta, magnitude) = stats::cliffs_delta(&groups[i], &groups[i + 1])?;
        adjacent.push(AdjacentComparison {
            cheaper: PriceCategory::ALL[i],
            pricier: PriceCategory::ALL[i + 1],
            p_adjusted,
            delta,
            magnitude,
        });
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.feature_pct).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.actual_minutes).collect();
    let (spearman_rho, spearman_strength) = stats::spearman(&xs, &ys)?;
    Ok(CategoryComparison { kruskal_wallis, adjacent, spearman_rho, spearman_strength })
}
