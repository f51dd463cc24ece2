use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use gastimate::analysis;
use gastimate::estimator::{self, LookupTable};
use gastimate::evaluation::{self, Dataset, EnsembleRouter, PairedErrors, TxRecord};
use gastimate::ranking;
use gastimate::savings::{self, SavingsConfig};
use gastimate::{ingest, synthchain, ChainView, LinearModel, PriceCategory, PriceRequest, SynthConfig, WindowSpec};
use gastimate_service::{AppState, ChainData, Snapshot};
use serde_json::json;

use crate::args::*;
use crate::table::{num, opt, Table};
use crate::UsageError;

pub struct Output {
    pub json: bool,
}

impl Output {
    fn emit(&self, value: serde_json::Value, table: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(&value).unwrap_or_default());
        } else {
            print!("{}", table());
        }
    }
}

fn load_chain(path: &Path) -> Result<ChainView> {
    ingest::load_chain(path).with_context(|| format!("reading chain {}", path.display()))
}

fn load_model(path: &Path) -> Result<LinearModel> {
    let file = File::open(path).with_context(|| format!("opening model {}", path.display()))?;
    let model: LinearModel = serde_json::from_reader(file).with_context(|| format!("parsing model {}", path.display()))?;
    anyhow::ensure!(model.is_finite(), "model {} has non-finite coefficients", path.display());
    Ok(model)
}

fn load_records(path: &Path) -> Result<Vec<TxRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    evaluation::read_records(file).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    if !(a.price_median > 0.0) {
        return Err(UsageError("--price-median must be positive".into()).into());
    }
    let defaults = SynthConfig::default();
    let config = SynthConfig {
        seed: a.seed,
        n_blocks: a.blocks,
        block_interval_s: a.interval,
        block_capacity: a.capacity,
        arrival_rate: a.arrival_rate,
        price_log_mu: a.price_median.ln(),
        price_log_sigma: a.price_sigma,
        price_tick_gwei: a.price_tick,
        n_senders: a.senders,
        nonce_ordering: !a.no_nonce_ordering,
        start_ts: a.start_ts.unwrap_or(defaults.start_ts),
    };
    config.validate().map_err(|e| UsageError(e.to_string()))?;
    let chain = synthchain::generate(&config)?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            ingest::write_chain(&mut w, &chain)?;
            w.flush()?;
            eprintln!(
                "wrote {} blocks, {} mined and {} pending transactions to {}",
                chain.blocks().len(),
                chain.transaction_count() - chain.pending().len(),
                chain.pending().len(),
                path.display()
            );
        }
        None => ingest::write_chain(io::stdout().lock(), &chain)?,
    }
    Ok(())
}

pub fn ingest(a: &IngestArgs, out: &Output) -> Result<()> {
    let chain = load_chain(&a.chain)?;
    let mined = chain.mined_transactions().count();
    let mut summary = json!({
        "blocks": chain.blocks().len(),
        "transactions": mined,
        "head": chain.head().map(|b| b.number),
        "first_ts": chain.blocks().first().map(|b| b.timestamp),
        "last_ts": chain.head().map(|b| b.timestamp),
    });
    let mut table = Table::new(["item", "value"]);
    table.row(["blocks".to_string(), chain.blocks().len().to_string()]);
    table.row(["transactions".to_string(), mined.to_string()]);
    table.row(["head".to_string(), chain.head().map_or("-".into(), |b| b.number.to_string())]);
    if let Some(path) = &a.predictions {
        let preds = ingest::load_predictions(path).with_context(|| format!("reading predictions {}", path.display()))?;
        let joined = ingest::join_predictions(&chain, &preds);
        summary["predictions"] = json!(preds.len());
        summary["joined"] = json!(joined.joined.len());
        summary["omitted"] = json!(joined.omitted);
        table.row(["predictions".to_string(), preds.len().to_string()]);
        table.row(["joined".to_string(), joined.joined.len().to_string()]);
        table.row(["omitted".to_string(), joined.omitted.to_string()]);
    }
    out.emit(summary, || table.to_string());
    Ok(())
}

pub fn categorize(a: &CategorizeArgs, out: &Output) -> Result<()> {
    let chain = load_chain(&a.chain)?;
    let samples = gastimate::features::training_samples(&chain, a.lookback);
    anyhow::ensure!(!samples.is_empty(), "no transaction has a complete {}-block window", a.lookback);
    let summaries = analysis::category_summaries(&samples)?;
    let comparison = analysis::compare_categories(&samples).ok();
    out.emit(json!({ "categories": summaries, "comparison": comparison }), || {
        let mut t = Table::new(["category", "n", "min", "q1", "median", "q3", "max", "mean", "std", "p90_minutes"]);
        for s in &summaries {
            t.row([
                s.category.label().to_string(),
                s.n.to_string(),
                num(s.price_min),
                num(s.price_q1),
                num(s.price_median),
                num(s.price_q3),
                num(s.price_max),
                num(s.price_mean),
                num(s.price_std),
                num(s.p90_minutes),
            ]);
        }
        let mut text = t.to_string();
        if let Some(c) = &comparison {
            text += &format!(
                "\nKruskal-Wallis H = {:.3}, p = {:.3e}; Spearman rho = {:.3} ({})\n\n",
                c.kruskal_wallis.statistic, c.kruskal_wallis.p_value, c.spearman_rho, c.spearman_strength
            );
            let mut t = Table::new(["pair", "dunn_p_adj", "cliffs_delta", "magnitude"]);
            for p in &c.adjacent {
                t.row([
                    format!("{} vs {}", p.cheaper.label(), p.pricier.label()),
                    format!("{:.3e}", p.p_adjusted),
                    num(p.delta),
                    format!("{:?}", p.magnitude).to_lowercase(),
                ]);
            }
            text += &t.to_string();
        }
        text
    });
    Ok(())
}

pub fn train(a: &TrainArgs, out: &Output) -> Result<()> {
    let chain = load_chain(&a.chain)?;
    let (Some(first), Some(last)) = (chain.blocks().first(), chain.head()) else {
        anyhow::bail!("chain is empty");
    };
    let from = a.from_ts.unwrap_or(first.timestamp);
    let to = a.to_ts.unwrap_or(last.timestamp + 1);
    let model = estimator::train(&chain, from, to, a.lookback)?;
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &model)?;
        writeln!(w)?;
        w.flush()?;
    }
    out.emit(serde_json::to_value(model)?, || {
        let mut t = Table::new(["parameter", "value"]);
        t.row(["intercept_a".to_string(), format!("{:.6}", model.intercept_a)]);
        t.row(["slope_b".to_string(), format!("{:.6}", model.slope_b)]);
        t.row(["n_train".to_string(), model.n_train.to_string()]);
        t.row(["lookback".to_string(), model.lookback.to_string()]);
        t.to_string()
    });
    Ok(())
}

pub fn validate(a: &ValidateArgs, out: &Output) -> Result<()> {
    let spec = WindowSpec {
        window_days: a.window_days,
        train_days: a.train_days,
        test_days: a.window_days - a.train_days,
        slide_days: a.slide_days,
        bootstrap_reps: a.reps,
        seed: a.seed,
        resample: true,
    };
    spec.validate().map_err(|e| UsageError(e.to_string()))?;
    let chain = load_chain(&a.chain)?;
    let data = Dataset::from_chain(&chain, a.lookback)?;
    let report = evaluation::validate_dataset(&data, &spec)?;
    let baseline = evaluation::median_baseline(&data, &spec)?;
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        report.write_records_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &a.baseline_out {
        let mut w = create(path)?;
        baseline.write_records_csv(&mut w)?;
        w.flush()?;
    }
    let failed_reps: usize = report.windows.iter().map(|w| w.reps.iter().filter(|r| r.coefficients.is_none()).count()).sum();
    out.emit(json!({ "model": report, "baseline": baseline }), || {
        let mut text = format!(
            "span {} days, {} windows, {} test records, {} failed replicates\n\n",
            report.span_days,
            report.windows.len(),
            report.records.len(),
            failed_reps
        );
        let mut t = Table::new(["stratum", "n", "mae", "medae", "mape", "medape", "baseline_mae", "baseline_medae"]);
        let mut add = |name: &str, m: &evaluation::AccuracyMetrics, b: Option<&evaluation::AccuracyMetrics>| {
            t.row([
                name.to_string(),
                m.n.to_string(),
                num(m.mae),
                num(m.medae),
                opt(m.mape),
                opt(m.medape),
                opt(b.map(|b| b.mae)),
                opt(b.map(|b| b.medae)),
            ]);
        };
        add("all", &report.global, Some(&baseline.global));
        for (cat, m) in &report.per_category {
            add(cat.label(), m, baseline.per_category.get(cat));
        }
        text += &t.to_string();
        text
    });
    Ok(())
}

pub fn rank(a: &RankArgs, out: &Output) -> Result<()> {
    if a.files.len() < 2 {
        return Err(UsageError("rank needs at least two absolute-error files".into()).into());
    }
    let mut models = Vec::new();
    for path in &a.files {
        let id = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        models.push((id, load_records(path)?));
    }
    let mut strata: Vec<(String, Option<PriceCategory>)> = vec![("all".into(), None)];
    strata.extend(PriceCategory::ALL.map(|c| (c.label().to_string(), Some(c))));

    let mut tables = BTreeMap::new();
    let mut columns = Vec::new();
    for (name, cat) in &strata {
        let dists: Vec<(String, Vec<f64>)> = models
            .iter()
            .map(|(id, recs)| {
                let errs = recs.iter().filter(|r| cat.is_none_or(|c| r.category == c)).map(|r| r.mean_ae_minutes).collect();
                (id.clone(), errs)
            })
            .collect();
        if dists.iter().any(|(_, v)| v.is_empty()) {
            continue;
        }
        let table = ranking::rank_distributions(&dists).with_context(|| format!("ranking stratum {name}"))?;
        columns.push(name.clone());
        tables.insert(name.clone(), table);
    }
    out.emit(serde_json::to_value(&tables)?, || {
        let mut header = vec!["model".to_string()];
        header.extend(columns.iter().cloned());
        let mut t = Table::new(header);
        for (id, _) in &models {
            let mut row = vec![id.clone()];
            row.extend(columns.iter().map(|c| tables[c].rank_of(id).map_or("-".into(), |r| r.to_string())));
            t.row(row);
        }
        t.to_string()
    });
    Ok(())
}

fn pair_files(ours: &[TxRecord], other: &[TxRecord]) -> PairedErrors {
    let theirs: HashMap<&str, f64> = other.iter().map(|r| (r.tx_hash.as_str(), r.mean_ae_minutes)).collect();
    let mut paired = PairedErrors::default();
    for r in ours {
        match theirs.get(r.tx_hash.as_str()) {
            Some(&ae) => {
                paired.tx_hashes.push(r.tx_hash.clone());
                paired.categories.push(r.category);
                paired.ours.push(r.mean_ae_minutes);
                paired.other.push(ae);
            }
            None => paired.missing += 1,
        }
    }
    paired
}

pub fn compare(a: &CompareArgs, out: &Output) -> Result<()> {
    let ours = load_records(&a.ours)?;
    let paired = match (&a.other, &a.predictions, &a.chain) {
        (Some(other), None, None) => pair_files(&ours, &load_records(other)?),
        (None, Some(preds), Some(chain)) => {
            let chain = load_chain(chain)?;
            let preds = ingest::load_predictions(preds)?;
            let joined = ingest::join_predictions(&chain, &preds);
            let router = EnsembleRouter::two_source(&a.cheap_source, &a.other_source);
            evaluation::pair_with_ensemble(&ours, &joined.joined, &router)
        }
        _ => return Err(UsageError("give either --other FILE or --predictions FILE --chain FILE".into()).into()),
    };
    let mut strata: Vec<(String, Vec<f64>, Vec<f64>)> = vec![("all".into(), paired.ours.clone(), paired.other.clone())];
    for c in PriceCategory::ALL {
        let (o, t) = paired.subset(c);
        strata.push((c.label().to_string(), o, t));
    }
    let mut rows = Vec::new();
    for (name, o, t) in &strata {
        let metrics = |v: &[f64]| -> Option<(f64, f64)> {
            (!v.is_empty()).then(|| {
                let mut s = v.to_vec();
                s.sort_by(f64::total_cmp);
                (v.iter().sum::<f64>() / v.len() as f64, gastimate::pricing::quantile(&s, 0.5).unwrap_or(f64::NAN))
            })
        };
        let cmp = evaluation::paired_compare(o, t).ok();
        rows.push(json!({
            "stratum": name,
            "n": o.len(),
            "ours": metrics(o).map(|(mae, medae)| json!({"mae": mae, "medae": medae})),
            "other": metrics(t).map(|(mae, medae)| json!({"mae": mae, "medae": medae})),
            "comparison": cmp,
        }));
    }
    let missing = paired.missing;
    out.emit(json!({ "strata": rows, "unpaired": missing }), || {
        let mut t = Table::new(["stratum", "n", "ours_medae", "other_medae", "wilcoxon_p", "cliffs_delta", "magnitude"]);
        for r in &rows {
            let f = |v: &serde_json::Value| v.as_f64().map_or("-".to_string(), num);
            t.row([
                r["stratum"].as_str().unwrap_or("").to_string(),
                r["n"].to_string(),
                f(&r["ours"]["medae"]),
                f(&r["other"]["medae"]),
                r["comparison"]["wilcoxon"]["p_value"].as_f64().map_or("-".into(), |p| format!("{p:.3e}")),
                f(&r["comparison"]["cliffs_delta"]),
                r["comparison"]["magnitude"].as_str().unwrap_or("-").to_string(),
            ]);
        }
        format!("{t}\n{missing} records without a paired prediction\n")
    });
    Ok(())
}

pub fn savings(a: &SavingsArgs, out: &Output) -> Result<()> {
    let config = SavingsConfig { confidence: a.confidence, margin: a.margin, price_step_gwei: a.step, seed: a.seed };
    config.validate().map_err(|e| UsageError(e.to_string()))?;
    let chain = load_chain(&a.input.chain)?;
    let model = load_model(&a.input.model)?;
    let report = savings::run_experiment(&chain, &model, &config, a.lookback.unwrap_or(model.lookback))?;
    out.emit(serde_json::to_value(&report)?, || {
        let c = &report.counts;
        let p = &report.percentages;
        let mut t = Table::new(["outcome", "count", "percent"]);
        t.row(["saving opportunity".to_string(), c.saving_opportunity.to_string(), format!("{:.2}", p.saving_opportunity)]);
        t.row(["failure to save".to_string(), c.failure_to_save.to_string(), format!("{:.2}", p.failure_to_save)]);
        t.row(["inconclusive".to_string(), c.inconclusive.to_string(), format!("{:.2}", p.inconclusive)]);
        t.row(["  no candidate".to_string(), c.no_candidate.to_string(), String::new()]);
        t.row(["  no matching price".to_string(), c.no_matching_price.to_string(), String::new()]);
        t.row(["  lookup unavailable".to_string(), c.lookup_unavailable.to_string(), String::new()]);
        format!(
            "sampled {} of {} blocks (seed {})\n\n{t}\nfee saved across opportunities: {}\n",
            report.sampled_blocks,
            report.population_blocks,
            report.seed,
            report.saved_fraction.map_or("-".into(), |f| format!("{:.2}%", 100.0 * f))
        )
    });
    Ok(())
}

fn build_lookup(input: &ModelArgs, head: Option<u64>, prices: &PriceArgs) -> Result<LookupTable> {
    let chain = load_chain(&input.chain)?;
    let model = load_model(&input.model)?;
    let head = match head.or_else(|| chain.head().map(|b| b.number)) {
        Some(h) => h,
        None => anyhow::bail!("chain is empty"),
    };
    let request = PriceRequest::Range { min: prices.min, max: prices.max, step: prices.step };
    request.prices().map_err(|e| UsageError(e.to_string()))?;
    Ok(estimator::lookup_table(&model, &chain, head, &request, model.lookback)?)
}

pub fn lookup(a: &LookupArgs, out: &Output) -> Result<()> {
    let table = build_lookup(&a.input, a.head, &a.prices)?;
    out.emit(serde_json::to_value(&table)?, || {
        let mut t = Table::new(["gas_price_gwei", "category", "predicted_minutes"]);
        for r in &table.rows {
            t.row([num(r.gas_price_gwei), r.category.label().to_string(), num(r.predicted_minutes)]);
        }
        format!("head block {}\n\n{t}", table.head_block)
    });
    Ok(())
}

pub fn recommend(a: &RecommendArgs, out: &Output) -> Result<()> {
    if !(a.deadline > 0.0) || a.kth < 1 {
        return Err(UsageError("--deadline must be positive and --kth at least 1".into()).into());
    }
    let table = build_lookup(&a.input, a.head, &a.prices)?;
    let row = table
        .recommend(a.deadline, a.kth)
        .with_context(|| format!("fewer than {} prices are predicted within {} minutes", a.kth, a.deadline))?;
    out.emit(serde_json::to_value(row)?, || {
        format!(
            "{} GWEI ({}), predicted {:.3} minutes\n",
            row.gas_price_gwei,
            row.category.label(),
            row.predicted_minutes
        )
    });
    Ok(())
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let chain = a.chain.as_deref().map(load_chain).transpose()?;
    let model = match (&a.model, &chain) {
        (Some(path), _) => Some(load_model(path)?),
        (None, Some(c)) if !c.is_empty() => {
            let first = c.blocks()[0].timestamp;
            let last = c.head().map_or(first, |b| b.timestamp);
            Some(estimator::train(c, first, last + 1, a.lookback)?)
        }
        _ => None,
    };
    let state = AppState::new(Snapshot { chain: chain.map(|c| Arc::new(ChainData::new(c))), model, trained_at: None });
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(gastimate_service::serve(SocketAddr::new(a.bind, a.port), state))?;
    Ok(())
}
