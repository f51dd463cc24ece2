//! File formats and the join of external predictor snapshots onto
//! transactions.
//!
//! Blocks are stored as JSON lines, one block per line:
//!
//! ```text
//! {"number":1,"timestamp":1572566415,"txs":[{"hash":"0xab","sender":"0xs1","nonce":0,"gas_price_gwei":10.0,"gas_used":21000,"pending_ts":1572566402}]}
//! ```
//!
//! The processed timestamp of a transaction is the timestamp of its block.
//! External predictions are comma separated with the header
//! `source_id,retrieval_ts,gas_price_gwei,predicted_minutes`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chainmodel::{Block, ChainView, Timestamp, Transaction};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct TxRecord {
    hash: String,
    sender: String,
    nonce: u64,
    gas_price_gwei: f64,
    #[serde(default)]
    gas_used: Option<u64>,
    pending_ts: Timestamp,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockRecord {
    number: u64,
    timestamp: Timestamp,
    txs: Vec<TxRecord>,
}

pub fn read_chain<R: Read>(reader: R) -> Result<ChainView> {
    let mut blocks = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: BlockRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        let transactions = record
            .txs
            .into_iter()
            .map(|t| Transaction {
                hash: t.hash,
                sender: t.sender,
                nonce: t.nonce,
                gas_price_gwei: t.gas_price_gwei,
                gas_used: t.gas_used,
                pending_ts: t.pending_ts,
                block_number: Some(record.number),
                processed_ts: Some(record.timestamp),
            })
            .collect();
        blocks.push(Block { number: record.number, timestamp: record.timestamp, transactions });
    }
    ChainView::from_blocks(blocks)
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<ChainView> {
    read_chain(File::open(path)?)
}

pub fn write_chain<W: Write>(writer: W, chain: &ChainView) -> Result<()> {
    let mut out = BufWriter::new(writer);
    for block in chain.blocks() {
        let record = BlockRecord {
            number: block.number,
            timestamp: block.timestamp,
            txs: block
                .transactions
                .iter()
                .map(|t| TxRecord {
                    hash: t.hash.clone(),
                    sender: t.sender.clone(),
                    nonce: t.nonce,
                    gas_price_gwei: t.gas_price_gwei,
                    gas_used: t.gas_used,
                    pending_ts: t.pending_ts,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_chain(path: impl AsRef<Path>, chain: &ChainView) -> Result<()> {
    write_chain(File::create(path)?, chain)
}

/// One row of a predictor snapshot: at `retrieval_ts` the source predicted
/// `predicted_minutes` for a transaction priced at `gas_price_gwei`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPrediction {
    pub source_id: String,
    pub retrieval_ts: Timestamp,
    pub gas_price_gwei: f64,
    pub predicted_minutes: f64,
}

pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<ExternalPrediction>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["source_id", "retrieval_ts", "gas_price_gwei", "predicted_minutes"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ExternalPrediction>().enumerate() {
        let line = i + 2;
        let p = row.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if !(p.predicted_minutes >= 0.0) || !(p.gas_price_gwei >= 0.0) {
            return Err(Error::InvariantViolation(format!(
                "line {line}: prices and predicted minutes must be non-negative"
            )));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<ExternalPrediction>> {
    read_predictions(File::open(path)?)
}

pub fn write_predictions<W: Write>(writer: W, preds: &[ExternalPrediction]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for p in preds {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedPrediction {
    pub tx_hash: String,
    pub source_id: String,
    pub predicted_minutes: f64,
    pub matched_retrieval_ts: Timestamp,
    pub matched_gas_price_gwei: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JoinSummary {
    pub joined: Vec<JoinedPrediction>,
    /// (transaction, source) pairs with no snapshot strictly before the
    /// transaction's pending timestamp.
    pub omitted: usize,
}

/// Matches each mined transaction, per source, to the latest snapshot taken
/// strictly before it became pending, then to that snapshot's entry with the
/// closest gas price (equidistant entries resolve to the lower price).
pub fn join_predictions(chain: &ChainView, preds: &[ExternalPrediction]) -> JoinSummary {
    // source -> retrieval_ts -> entries sorted by (price, predicted)
    let mut snapshots: BTreeMap<&str, BTreeMap<Timestamp, Vec<(f64, f64)>>> = BTreeMap::new();
    for p in preds {
        snapshots
            .entry(p.source_id.as_str())
            .or_default()
            .entry(p.retrieval_ts)
            .or_default()
            .push((p.gas_price_gwei, p.predicted_minutes));
    }
    for per_source in snapshots.values_mut() {
        for entries in per_source.values_mut() {
            entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
    }

    let mut summary = JoinSummary::default();
    for (_, tx) in chain.mined_transactions() {
        for (source, per_source) in &snapshots {
            let Some((&ts, entries)) = per_source.range(..tx.pending_ts).next_back() else {
                summary.omitted += 1;
                continue;
            };
            let (price, minutes) = closest_entry(entries, tx.gas_price_gwei);
            summary.joined.push(JoinedPrediction {
                tx_hash: tx.hash.clone(),
                source_id: source.to_string(),
                predicted_minutes: minutes,
                matched_retrieval_ts: ts,
                matched_gas_price_gwei: price,
            });
        }
    }
    summary
}

// entries sorted ascending by price, non-empty
fn closest_entry(entries: &[(f64, f64)], price: f64) -> (f64, f64) {
    let idx = entries.partition_point(|e| e.0 < price);
    if idx == entries.len() {
        return first_with_price(entries, entries[idx - 1].0);
    }
    if idx == 0 || entries[idx].0 == price {
        return entries[idx];
    }
    let below = entries[idx - 1].0;
    let above = entries[idx].0;
    if price - below <= above - price {
        first_with_price(entries, below)
    } else {
        entries[idx]
    }
}

fn first_with_price(entries: &[(f64, f64)], price: f64) -> (f64, f64) {
    entries[entries.partition_point(|e| e.0 < price)]
}
