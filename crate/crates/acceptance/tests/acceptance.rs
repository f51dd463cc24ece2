//! One PASS/FAIL line per acceptance criterion. Exits non-zero on any failure.

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use gastimate::chainmodel::{Block, ChainView, Transaction};
use gastimate::estimator::{ols, LinearModel, LookupRow, LookupTable};
use gastimate::evaluation::{self, Dataset, EvaluationReport, WindowSpec};
use gastimate::features::{self, Anchor};
use gastimate::ranking::{self, PairwiseComparison};
use gastimate::savings::{self, SavingsConfig};
use gastimate::stats::{self, TestMethod};
use gastimate::{ingest, synthchain, PriceCategory, SynthConfig};
use gastimate_service::{router, AppState, ChainData, Snapshot};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

// ---------------------------------------------------------------- stats

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn groups(v: &Value) -> Vec<Vec<f64>> {
    v.as_array().unwrap().iter().map(floats).collect()
}

fn brute_force_delta(a: &[f64], b: &[f64]) -> f64 {
    let score: i64 = a.iter().flat_map(|x| b.iter().map(move |y| (x > y) as i64 - (x < y) as i64)).sum();
    score as f64 / (a.len() * b.len()) as f64
}

fn stats_oracle() -> Outcome {
    const STAT: f64 = 1e-8;
    const P: f64 = 1e-6;
    let start = Instant::now();
    let fx: Value = serde_json::from_str(include_str!("../../core/tests/fixtures/stats_oracle.json")).unwrap();

    let kw = stats::kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]]).map_err(|e| e.to_string())?;
    ensure!(close(kw.statistic, 7.2, 1e-9), "H = {}", kw.statistic);
    let (d, _) = stats::cliffs_delta(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
    ensure!(d == -5.0 / 9.0, "delta = {d}");

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let levels = rng.random_range(2..20);
        let a: Vec<f64> = (0..rng.random_range(1..60)).map(|_| rng.random_range(0..levels) as f64).collect();
        let b: Vec<f64> = (0..rng.random_range(1..60)).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect();
        let (d, _) = stats::cliffs_delta(&a, &b).unwrap();
        ensure!(d == brute_force_delta(&a, &b), "cliff brute force mismatch");
    }

    let mut n = 0;
    for case in fx["kruskal"].as_array().unwrap() {
        let r = stats::kruskal_wallis(&groups(&case["groups"])).map_err(|e| e.to_string())?;
        ensure!(close(r.statistic, case["statistic"].as_f64().unwrap(), STAT), "kruskal statistic");
        ensure!(close(r.p_value, case["p_value"].as_f64().unwrap(), P), "kruskal p");
        n += 1;
    }
    for case in fx["dunn"].as_array().unwrap() {
        let pairs = stats::dunn_posthoc(&groups(&case["groups"])).map_err(|e| e.to_string())?;
        for (got, want) in pairs.iter().zip(case["pairs"].as_array().unwrap()) {
            ensure!(got.i as u64 == want["i"].as_u64().unwrap() && got.j as u64 == want["j"].as_u64().unwrap(), "dunn pair order");
            ensure!(close(got.p_value, want["p_value"].as_f64().unwrap(), P), "dunn p");
            ensure!(close(got.p_adjusted, want["p_adjusted"].as_f64().unwrap(), P), "dunn adjusted p");
        }
        n += 1;
    }
    for case in fx["wilcoxon"].as_array().unwrap() {
        let r = stats::wilcoxon_signed_rank(&floats(&case["differences"])).map_err(|e| e.to_string())?;
        let exact = case["method"] == "exact";
        ensure!((r.method == TestMethod::WilcoxonExact) == exact, "wilcoxon method");
        ensure!(close(r.statistic, case["statistic"].as_f64().unwrap(), STAT), "wilcoxon statistic");
        ensure!(close(r.p_value, case["p_value"].as_f64().unwrap(), P), "wilcoxon p");
        n += 1;
    }
    for case in fx["spearman"].as_array().unwrap() {
        let (rho, _) = stats::spearman(&floats(&case["x"]), &floats(&case["y"])).map_err(|e| e.to_string())?;
        ensure!(close(rho, case["rho"].as_f64().unwrap(), STAT), "spearman rho");
        n += 1;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{n} fixture cases, 200 brute-force deltas, {elapsed:.2?}"))
}

// ------------------------------------------------------------ estimator

fn normal_equations(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    ((sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det)
}

fn estimator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..50 {
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0));
        let xs: Vec<f64> = (0..rng.random_range(3..400)).map(|_| rng.random_range(0.0..4.7)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a + b * x + rng.random_range(-0.5..0.5)).collect();
        let (ga, gb) = ols(&xs, &ys).map_err(|e| e.to_string())?;
        let (ea, eb) = normal_equations(&xs, &ys);
        ensure!(close(ga, ea, 1e-9) && close(gb, eb, 1e-9), "ols ({ga}, {gb}) vs ({ea}, {eb})");
    }
    let xs: Vec<f64> = (0..16).map(|i| i as f64 * 0.5).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
    let (a, b) = ols(&xs, &ys).map_err(|e| e.to_string())?;
    ensure!(a == 2.0 && b == -0.5, "noiseless fit gave ({a}, {b})");

    for _ in 0..1000 {
        let model = LinearModel::from_coefficients(rng.random_range(-2.0..6.0), -rng.random_range(0.0..3.0));
        let mut feature = 0.0;
        let rows: Vec<LookupRow> = (1..=rng.random_range(2..80))
            .map(|p| {
                feature = (feature + rng.random_range(0.0..5.0f64)).min(100.0);
                LookupRow { gas_price_gwei: p as f64, category: PriceCategory::Regular, predicted_minutes: model.predict(feature) }
            })
            .collect();
        ensure!(LookupTable::new(1, rows).monotone_ok, "non-monotone table for {model:?}");
    }
    Ok("50 OLS datasets, exact line, 1000 monotone tables".into())
}

// -------------------------------------------------------------- feature

fn feature() -> Outcome {
    let start = Instant::now();
    let chain = synthchain::generate(&SynthConfig { seed: 5, n_blocks: 200, ..Default::default() }).map_err(|e| e.to_string())?;
    let prices: Vec<Vec<f64>> =
        chain.blocks().iter().map(|b| b.transactions.iter().map(|t| t.gas_price_gwei).collect()).collect();
    let mut checked = 0;
    for (pos, block) in chain.blocks().iter().enumerate() {
        let window = &prices[pos.saturating_sub(120)..pos];
        for tx in &block.transactions {
            let pcts: Vec<f64> = window
                .iter()
                .filter(|b| !b.is_empty())
                .map(|b| 100.0 * b.iter().filter(|&&p| p < tx.gas_price_gwei).count() as f64 / b.len() as f64)
                .collect();
            let want = (!pcts.is_empty()).then(|| pcts.iter().sum::<f64>() / pcts.len() as f64);
            let got = features::avg_pct_below(&chain, tx.gas_price_gwei, Anchor::ContainingBlock(block.number), 120).ok();
            ensure!(got == want, "tx {}: {got:?} vs {want:?}", tx.hash);
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("{checked} transactions, {elapsed:.2?}"))
}

// -------------------------------------------------------------- ranking

fn cmp(i: &str, j: &str, p: f64, d: f64) -> PairwiseComparison {
    PairwiseComparison { model_i: i.into(), model_j: j.into(), p_value: p, delta: d }
}

fn ranks(t: &gastimate::RankTable) -> Vec<usize> {
    t.models.iter().map(|m| m.rank).collect()
}

fn ranking_criterion() -> Outcome {
    let two = ranking::build_graph(&[cmp("A", "B", 0.01, -0.9)]).map_err(|e| e.to_string())?;
    let x = ranking::alpha_centrality(&two, 0.6).map_err(|e| e.to_string())?;
    ensure!(close(x[0], 1.6, 1e-9) && close(x[1], 1.0, 1e-9), "two-node scores {x:?}");

    let clique = ranking::build_graph(&[
        cmp("m1", "m2", 0.9, 0.0),
        cmp("m1", "m3", 0.9, 0.0),
        cmp("m2", "m3", 0.9, 0.0),
        cmp("m1", "m4", 0.001, -0.8),
        cmp("m2", "m4", 0.001, -0.8),
        cmp("m3", "m4", 0.001, -0.8),
    ])
    .map_err(|e| e.to_string())?;
    let x = ranking::alpha_centrality(&clique, 0.6).map_err(|e| e.to_string())?;
    ensure!(x[..3].iter().all(|v| close(*v, 4.0, 1e-9)) && close(x[3], 1.0, 1e-9), "clique scores {x:?}");

    // three predictors indistinguishable, the fourth clearly worse
    let base: Vec<f64> = (0..80).map(|i| (i % 20) as f64 * 0.4).collect();
    let models = vec![
        ("a".to_string(), base.clone()),
        ("b".to_string(), base.iter().map(|v| v + 0.05).collect()),
        ("c".to_string(), base.iter().map(|v| v * 1.02).collect()),
        ("d".to_string(), base.iter().map(|v| v + 9.0).collect()),
    ];
    let table = ranking::rank_distributions(&models).map_err(|e| e.to_string())?;
    ensure!(ranks(&table) == vec![1, 1, 1, 4], "engineered ranks {:?}", ranks(&table));

    let chain = ranking::build_graph(&[cmp("p", "q", 0.01, -0.6), cmp("p", "r", 0.01, -0.6), cmp("q", "r", 0.01, -0.6)])
        .map_err(|e| e.to_string())?;
    for g in [&two, &clique, &chain, &ranking::build_graph(&ranking::compare_distributions(&models).unwrap()).unwrap()] {
        let rho = ranking::spectral_radius(g);
        let scale = if rho > 0.0 { 1.0 / rho } else { 1.0 };
        let reference = ranking::competition_ranks(&ranking::alpha_centrality(g, 0.9 * scale).map_err(|e| e.to_string())?);
        for probe in [0.3, 0.6] {
            let alt = ranking::competition_ranks(&ranking::alpha_centrality(g, probe * scale).map_err(|e| e.to_string())?);
            ensure!(alt == reference, "ranks move at alpha {probe}/rho: {alt:?} vs {reference:?}");
        }
        ranking::rank_models(g).map_err(|e| e.to_string())?;
    }
    Ok("1.6/1.0, 4/4/4/1, pattern 1,1,1,4, stable on 4 graphs".into())
}

// ----------------------------------------------------------- end-to-end

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let capacity = 2;
    let config = SynthConfig {
        seed: 42,
        n_blocks: 3000,
        block_interval_s: 180.0,
        block_capacity: capacity,
        arrival_rate: 0.9 * capacity as f64,
        price_log_mu: 5f64.ln(),
        price_log_sigma: 2.0,
        price_tick_gwei: 1.0,
        n_senders: 500,
        ..Default::default()
    };
    let chain = synthchain::generate(&config).map_err(|e| e.to_string())?;
    let data = Dataset::from_chain(&chain, gastimate::DEFAULT_LOOKBACK).map_err(|e| e.to_string())?;

    let mut by_cat = vec![Vec::new(); 5];
    for s in &data.samples {
        by_cat[s.price_category.index()].push(s.actual_minutes);
    }
    let medians: Vec<f64> = by_cat.iter().map(|g| median(g.clone())).collect();
    ensure!(medians.windows(2).all(|w| w[1] <= w[0]), "category medians {medians:?}");
    let deltas: Vec<f64> = (0..4).map(|i| stats::cliffs_delta(&by_cat[i], &by_cat[i + 1]).unwrap().0).collect();
    ensure!(deltas.windows(2).all(|w| w[1].abs() <= w[0].abs()), "adjacent deltas {deltas:?}");

    let xs: Vec<f64> = data.samples.iter().map(|s| s.feature_pct).collect();
    let ys: Vec<f64> = data.samples.iter().map(|s| s.actual_minutes).collect();
    let (rho, _) = stats::spearman(&xs, &ys).map_err(|e| e.to_string())?;
    ensure!(rho <= -0.4, "spearman {rho}");

    let spec = WindowSpec { seed: 42, ..Default::default() };
    let ours = evaluation::validate_dataset(&data, &spec).map_err(|e| e.to_string())?;
    let base = evaluation::median_baseline(&data, &spec).map_err(|e| e.to_string())?;
    let very_cheap = |r: &EvaluationReport| r.per_category.get(&PriceCategory::VeryCheap).map_or(f64::NAN, |m| m.medae);
    ensure!(ours.global.medae <= base.global.medae, "overall MedAE {} vs baseline {}", ours.global.medae, base.global.medae);
    ensure!(very_cheap(&ours) < very_cheap(&base), "very cheap MedAE {} vs baseline {}", very_cheap(&ours), very_cheap(&base));
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "rho {rho:.3}, MedAE {:.3} vs {:.3}, very cheap {:.3} vs {:.3}, {elapsed:.1?}",
        ours.global.medae,
        base.global.medae,
        very_cheap(&ours),
        very_cheap(&base)
    ))
}

// ------------------------------------------------- time-expense balance

fn time_expense() -> Outcome {
    let a = savings::time_expense_balance(7.8, 47.8);
    let b = savings::time_expense_balance(46.6, 27.1);
    ensure!(close(a, 13.4, 0.1), "(7.8, 47.8) -> {a}");
    ensure!(close(b, 34.2, 0.15), "(46.6, 27.1) -> {b}");
    Ok(format!("{a:.2}, {b:.2}"))
}

// -------------------------------------------------------------- savings

fn tx(hash: &str, price: f64, pending_ts: i64) -> Transaction {
    Transaction {
        hash: hash.into(),
        sender: format!("s-{hash}"),
        nonce: 0,
        gas_price_gwei: price,
        gas_used: Some(21_000),
        pending_ts,
        block_number: None,
        processed_ts: None,
    }
}

fn planted_chain() -> ChainView {
    let block = |number, timestamp, txs: Vec<Transaction>| Block { number, timestamp, transactions: txs };
    ChainView::from_blocks(vec![
        block(1, 600, (1..=8).map(|p| tx(&format!("a{p}"), p as f64, 540)).collect()),
        block(
            2,
            1200,
            vec![tx("b1", 10.0, 1080), tx("b2", 5.0, 1140), tx("b3", 3.0, 600), tx("b4", 1.0, 1150), tx("b5", 7.0, 1190), tx("b6", 8.0, 900)],
        ),
        block(
            3,
            1800,
            vec![tx("c1", 9.0, 1500), tx("c2", 4.0, 1620), tx("c3", 4.0, 1740), tx("c4", 2.0, 1000), tx("c5", 6.0, 1790), tx("c6", 12.0, 1320)],
        ),
    ])
    .unwrap()
}

/// Counts of (save, fail, no candidate, no match) by direct enumeration.
fn enumerate(chain: &ChainView, model: &LinearModel) -> [usize; 4] {
    let blocks = chain.blocks();
    let mut counts = [0; 4];
    for pos in 1..blocks.len() {
        let block = &blocks[pos];
        let feature = |price: f64| {
            let pcts: Vec<f64> = blocks[..pos]
                .iter()
                .map(|b| 100.0 * b.transactions.iter().filter(|t| t.gas_price_gwei < price).count() as f64 / b.transactions.len() as f64)
                .collect();
            pcts.iter().sum::<f64>() / pcts.len() as f64
        };
        let max = block.transactions.iter().map(|t| t.gas_price_gwei).fold(0.0, f64::max) as u32;
        for t in &block.transactions {
            let p = (block.timestamp - t.pending_ts) as f64 / 60.0;
            let candidates: Vec<f64> =
                (1..=max).map(f64::from).filter(|&g| g < t.gas_price_gwei && model.predict(feature(g)) <= p).collect();
            let Some(&target) = candidates.get(candidates.len() / 2) else {
                counts[2] += 1;
                continue;
            };
            let worst = block
                .transactions
                .iter()
                .filter(|u| u.gas_price_gwei == target)
                .map(|u| (block.timestamp - u.pending_ts) as f64 / 60.0)
                .reduce(f64::max);
            match worst {
                None => counts[3] += 1,
                Some(p2) if p2 <= p => counts[0] += 1,
                Some(_) => counts[1] += 1,
            }
        }
    }
    counts
}

fn savings_criterion() -> Outcome {
    let n = savings::sample_size(5000, 0.95, 0.05);
    ensure!(n == 357, "sample size {n}");

    let chain = planted_chain();
    let model = LinearModel::from_coefficients(1.6, -0.35);
    let report = savings::run_experiment(&chain, &model, &SavingsConfig { seed: 1, ..Default::default() }, 120)
        .map_err(|e| e.to_string())?;
    let c = &report.counts;
    let got = [c.saving_opportunity, c.failure_to_save, c.no_candidate, c.no_matching_price];
    let want = enumerate(&chain, &model);
    ensure!(got == want, "planted counts {got:?} vs enumeration {want:?}");

    let big = synthchain::generate(&SynthConfig { seed: 8, n_blocks: 400, ..Default::default() }).map_err(|e| e.to_string())?;
    let (first, last) = (big.blocks()[0].timestamp, big.head().unwrap().timestamp);
    let trained = gastimate::estimator::train(&big, first, last + 1, 120).map_err(|e| e.to_string())?;
    let config = SavingsConfig { seed: 99, ..Default::default() };
    let r1 = savings::run_experiment(&big, &trained, &config, 120).map_err(|e| e.to_string())?;
    let r2 = savings::run_experiment(&big, &trained, &config, 120).map_err(|e| e.to_string())?;
    ensure!(serde_json::to_string(&r1).unwrap() == serde_json::to_string(&r2).unwrap(), "reruns differ");
    Ok(format!("n = 357, planted {got:?}, rerun identical"))
}

// ------------------------------------------------------ sliding windows

fn validation_chain(days: f64) -> ChainView {
    let interval = 2160.0;
    synthchain::generate(&SynthConfig {
        seed: 9,
        n_blocks: (days * 86_400.0 / interval) as u64,
        block_interval_s: interval,
        block_capacity: 6,
        arrival_rate: 5.0,
        ..Default::default()
    })
    .unwrap()
}

fn sliding_windows() -> Outcome {
    let data = Dataset::from_chain(&validation_chain(9.9), 20).map_err(|e| e.to_string())?;
    ensure!(data.span_days == 10, "span {} days", data.span_days);
    let spec = WindowSpec { bootstrap_reps: 20, seed: 3, ..Default::default() };
    let report = evaluation::validate_dataset(&data, &spec).map_err(|e| e.to_string())?;
    ensure!(report.windows.len() == 6, "{} windows", report.windows.len());

    let again = evaluation::validate_dataset(&data, &spec).map_err(|e| e.to_string())?;
    ensure!(report.to_bytes().unwrap() == again.to_bytes().unwrap(), "reports differ between runs");

    let by_hash: HashMap<&str, _> = data.samples.iter().map(|s| (s.tx_hash.as_str(), s)).collect();
    let mut checked = 0;
    for window in &report.windows {
        let models: Vec<LinearModel> =
            window.reps.iter().filter_map(|r| r.coefficients.map(|(a, b)| LinearModel::from_coefficients(a, b))).collect();
        for record in &report.records {
            let s = by_hash[record.tx_hash.as_str()];
            if !window.window.test.contains(evaluation::utc_day(s.pending_ts) - data.first_day) {
                continue;
            }
            let mean = models.iter().map(|m| (s.actual_minutes - m.predict(s.feature_pct)).abs()).sum::<f64>() / models.len() as f64;
            ensure!(close(record.mean_ae_minutes, mean, 1e-12), "tx {} mean AE {} vs {mean}", record.tx_hash, record.mean_ae_minutes);
            checked += 1;
        }
    }
    ensure!(checked == report.records.len(), "{checked} of {} records checked", report.records.len());
    Ok(format!("6 windows, identical bytes, {checked} mean AEs"))
}

// ----------------------------------------------------- service contract

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn app_with(chain: ChainView, model: LinearModel) -> Router {
    router(AppState::new(Snapshot { chain: Some(Arc::new(ChainData::new(chain))), model: Some(model), trained_at: None }))
}

async fn service_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..100 {
        let chain = synthchain::generate(&SynthConfig {
            seed: 1000 + i,
            n_blocks: rng.random_range(20..160),
            block_capacity: rng.random_range(2..12),
            arrival_rate: rng.random_range(1.0..14.0),
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        let app = app_with(chain, LinearModel::from_coefficients(rng.random_range(0.5..4.0), -rng.random_range(0.0..1.2)));
        let deadline: f64 = rng.random_range(0.5..20.0);
        let kth: usize = rng.random_range(1..6);
        let (_, lookup) = get(&app, "/v1/lookup?min=1&max=60&step=1").await;
        let expected = lookup["rows"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["predicted_minutes"].as_f64().unwrap() <= deadline)
            .nth(kth - 1)
            .cloned();
        let (status, body) = get(&app, &format!("/v1/recommend?deadline_minutes={deadline}&kth={kth}")).await;
        match expected {
            Some(row) => ensure!(status == StatusCode::OK && body == row, "snapshot {i}: {body} vs {row}"),
            None => ensure!(status == StatusCode::NOT_FOUND, "snapshot {i}: expected 404, got {status}"),
        }
    }

    // one transaction at every price 1..=100 per block: the feature at p is p - 1
    let lines: String = (1..=3)
        .map(|n| {
            let txs: Vec<Value> = (1..=100)
                .map(|p| json!({"hash": format!("0x{n}-{p}"), "sender": format!("s{p}"), "nonce": n, "gas_price_gwei": p, "pending_ts": 1000 * n - 10}))
                .collect();
            json!({"number": n, "timestamp": 1000 * n, "txs": txs}).to_string() + "\n"
        })
        .collect();
    let chain = ingest::read_chain(lines.as_bytes()).map_err(|e| e.to_string())?;
    let app = app_with(chain, LinearModel::from_coefficients(35f64.ln(), -1.0));
    let first = get(&app, "/v1/recommend?deadline_minutes=5&kth=1").await.1["gas_price_gwei"].clone();
    let third = get(&app, "/v1/recommend?deadline_minutes=5&kth=3").await.1["gas_price_gwei"].clone();
    ensure!(first == 6.0 && third == 8.0, "kth=1 -> {first}, kth=3 -> {third}");
    Ok("100 snapshots consistent, prices 6 and 8".into())
}

// ----------------------------------------------------------------- main

fn run(name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
        Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    match outcome {
        Ok(detail) => {
            println!("PASS  {name}: {detail}");
            true
        }
        Err(reason) => {
            println!("FAIL  {name}: {reason} ({:.2?})", start.elapsed());
            false
        }
    }
}

fn main() -> ExitCode {
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let results = [
        run("stats oracle suite", stats_oracle),
        run("estimator", estimator),
        run("feature", feature),
        run("ranking", ranking_criterion),
        run("end-to-end synthetic", end_to_end),
        run("time-expense balance", time_expense),
        run("savings", savings_criterion),
        run("sliding-window validation", sliding_windows),
        run("service contract", || runtime.block_on(service_contract())),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
