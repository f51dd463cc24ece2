//! The feature for every transaction of a synthetic chain, recomputed from
//! its definition by direct counting.

use std::time::Instant;

use gastimate::features::{self, Anchor};
use gastimate::{synthchain, SynthConfig};

fn direct(prices_per_block: &[Vec<f64>], price: f64) -> Option<f64> {
    let pcts: Vec<f64> = prices_per_block
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| 100.0 * b.iter().filter(|&&p| p < price).count() as f64 / b.len() as f64)
        .collect();
    (!pcts.is_empty()).then(|| pcts.iter().sum::<f64>() / pcts.len() as f64)
}

#[test]
fn every_transaction_matches_direct_count() {
    let start = Instant::now();
    let chain = synthchain::generate(&SynthConfig { seed: 3, n_blocks: 200, ..Default::default() }).unwrap();
    let lookback = 120usize;
    let prices: Vec<Vec<f64>> = chain
        .blocks()
        .iter()
        .map(|b| b.transactions.iter().map(|t| t.gas_price_gwei).collect())
        .collect();
    let mut checked = 0;
    for (pos, block) in chain.blocks().iter().enumerate() {
        let window = &prices[pos.saturating_sub(lookback)..pos];
        for tx in &block.transactions {
            let got = features::avg_pct_below(&chain, tx.gas_price_gwei, Anchor::ContainingBlock(block.number), 120).ok();
            assert_eq!(got, direct(window, tx.gas_price_gwei), "tx {}", tx.hash);
            checked += 1;
        }
    }
    assert!(checked > 1000);

    let samples = features::training_samples(&chain, 120);
    for s in &samples {
        let tx = chain.transaction(&s.tx_hash).unwrap();
        let pos = chain.position(tx.block_number.unwrap()).unwrap();
        assert_eq!(Some(s.feature_pct), direct(&prices[pos.saturating_sub(lookback)..pos], tx.gas_price_gwei));
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}
