//! Rank-based tests and effect sizes: Kruskal-Wallis, Dunn's post-hoc test
//! with Bonferroni adjustment, Cliff's delta, the Wilcoxon signed-rank test
//! and Spearman's correlation.
//!
//! Every statistic here depends on its inputs only through ranks, so any
//! strictly increasing transform of the data leaves the results unchanged.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample (after dropping zero differences) for which the Wilcoxon
/// p-value is obtained by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    KruskalWallis,
    WilcoxonExact,
    WilcoxonNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
}

/// 1-based ranks; ties share the mean of the ranks they span.
pub fn ranks_avg_ties(values: &[f64]) -> Vec<f64> {
    ranks_with_ties(values).0
}

// Returns ranks and the sizes of every tie group (including singletons).
fn ranks_with_ties(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        groups.push(j - i);
        i = j;
    }
    (ranks, groups)
}

fn tie_sum(groups: &[usize]) -> f64 {
    groups.iter().map(|&t| (t * t * t - t) as f64).sum()
}

fn normal_sf(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// Two-sided normal quantile for a confidence level, e.g. 1.959964 at 0.95.
pub fn two_sided_z(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

struct PooledRanks {
    mean_ranks: Vec<f64>,
    sizes: Vec<usize>,
    n: usize,
    tie_sum: f64,
}

fn pool(groups: &[Vec<f64>]) -> Result<PooledRanks> {
    if groups.len() < 2 || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::EmptyInput);
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    if all.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: all.len() });
    }
    let (ranks, ties) = ranks_with_ties(&all);
    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for g in groups {
        let sum: f64 = ranks[offset..offset + g.len()].iter().sum();
        mean_ranks.push(sum / g.len() as f64);
        offset += g.len();
    }
    Ok(PooledRanks {
        mean_ranks,
        sizes: groups.iter().map(Vec::len).collect(),
        n: all.len(),
        tie_sum: tie_sum(&ties),
    })
}

/// Tie-corrected Kruskal-Wallis H with a chi-square p-value on `k - 1`
/// degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    let pooled = pool(groups)?;
    let n = pooled.n as f64;
    let correction = 1.0 - pooled.tie_sum / (n * n * n - n);
    if correction <= 0.0 {
        return Err(Error::DegenerateTies);
    }
    let weighted: f64 = pooled
        .mean_ranks
        .iter()
        .zip(&pooled.sizes)
        .map(|(r, &s)| s as f64 * r * r)
        .sum();
    let h = (12.0 / (n * (n + 1.0)) * weighted - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    let df = (groups.len() - 1) as f64;
    let p = ChiSquared::new(df).map(|d| d.sf(h)).unwrap_or(f64::NAN);
    Ok(TestResult { statistic: h, p_value: p.clamp(0.0, 1.0), method: TestMethod::KruskalWallis })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DunnPair {
    pub i: usize,
    pub j: usize,
    /// Positive when group `i` has the larger mean rank.
    pub z: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
}

/// Dunn's pairwise test on pooled mean ranks, Bonferroni adjusted over all
/// `k(k-1)/2` pairs. Pairs are listed with `i < j`.
pub fn dunn_posthoc(groups: &[Vec<f64>]) -> Result<Vec<DunnPair>> {
    let pooled = pool(groups)?;
    let n = pooled.n as f64;
    if pooled.tie_sum >= n * n * n - n {
        return Err(Error::DegenerateTies);
    }
    let k = groups.len();
    let comparisons = (k * (k - 1) / 2) as f64;
    let base = n * (n + 1.0) / 12.0 - pooled.tie_sum / (12.0 * (n - 1.0));
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let se = (base * (1.0 / pooled.sizes[i] as f64 + 1.0 / pooled.sizes[j] as f64)).sqrt();
            let z = (pooled.mean_ranks[i] - pooled.mean_ranks[j]) / se;
            let p = (2.0 * normal_sf(z.abs())).min(1.0);
            out.push(DunnPair { i, j, z, p_value: p, p_adjusted: (p * comparisons).min(1.0) });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub const NEGLIGIBLE_MAX: f64 = 0.147;
    pub const SMALL_MAX: f64 = 0.33;
    pub const MEDIUM_MAX: f64 = 0.474;

    pub fn of(delta: f64) -> Self {
        let d = delta.abs();
        if d <= Self::NEGLIGIBLE_MAX {
            Magnitude::Negligible
        } else if d <= Self::SMALL_MAX {
            Magnitude::Small
        } else if d <= Self::MEDIUM_MAX {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Magnitude::Negligible => "negligible",
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        })
    }
}

/// Cliff's delta `[#(x > y) - #(x < y)] / (|d1| |d2|)` over all pairs.
/// Counts come from a sorted copy of `d2`, so this runs in `O((n + m) log m)`.
pub fn cliffs_delta(d1: &[f64], d2: &[f64]) -> Result<(f64, Magnitude)> {
    if d1.is_empty() || d2.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = d2.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut greater: u64 = 0;
    let mut less: u64 = 0;
    for &x in d1 {
        let below = sorted.partition_point(|&y| y < x);
        let not_above = sorted.partition_point(|&y| y <= x);
        greater += below as u64;
        less += (sorted.len() - not_above) as u64;
    }
    let delta = (greater as f64 - less as f64) / (d1.len() as f64 * d2.len() as f64);
    Ok((delta, Magnitude::of(delta)))
}

/// Wilcoxon signed-rank test on paired differences. Zero differences are
/// dropped; the statistic is `min(W+, W-)`. Up to [`WILCOXON_EXACT_MAX`]
/// remaining pairs the two-sided p-value is exact (enumerating every sign
/// assignment of the observed, possibly tied, ranks); beyond that it uses
/// the normal approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank(differences: &[f64]) -> Result<TestResult> {
    if differences.len() < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: differences.len() });
    }
    let nonzero: Vec<f64> = differences.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = ranks_with_ties(&abs);
    let w_plus: f64 = nonzero.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let n = nonzero.len();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let stat = w_plus.min(w_minus);

    if n <= WILCOXON_EXACT_MAX {
        // ranks are multiples of 1/2, so doubled ranks are integers
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut counts = vec![0u64; max_sum + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=max_sum).rev() {
                counts[s] += counts[s - r];
            }
        }
        let threshold = (stat * 2.0).round() as usize;
        let at_or_below: u64 = counts[..=threshold].iter().sum();
        let p = (2.0 * at_or_below as f64 / (1u64 << n) as f64).min(1.0);
        return Ok(TestResult { statistic: stat, p_value: p, method: TestMethod::WilcoxonExact });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_sum(&ties) / 48.0;
    let d = w_plus - mean;
    let corrected = d - 0.5 * sign(d);
    let z = corrected / var.sqrt();
    let p = (2.0 * normal_sf(z.abs())).min(1.0);
    Ok(TestResult { statistic: stat, p_value: p, method: TestMethod::WilcoxonNormal })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    VeryWeak,
    Weak,
    Moderate,
    Strong,
    VeryStrong,
}

impl Strength {
    /// Labels `|rho|` after rounding it to two decimals.
    pub fn of(rho: f64) -> Self {
        let r = (rho.abs() * 100.0).round() / 100.0;
        if r <= 0.19 {
            Strength::VeryWeak
        } else if r <= 0.39 {
            Strength::Weak
        } else if r <= 0.59 {
            Strength::Moderate
        } else if r <= 0.79 {
            Strength::Strong
        } else {
            Strength::VeryStrong
        }
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strength::VeryWeak => "very weak",
            Strength::Weak => "weak",
            Strength::Moderate => "moderate",
            Strength::Strong => "strong",
            Strength::VeryStrong => "very strong",
        })
    }
}

/// Spearman's rho: Pearson correlation of average-tie ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, Strength)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: x.len() });
    }
    let rx = ranks_avg_ties(x);
    let ry = ranks_avg_ties(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok((rho, Strength::of(rho)))
}
