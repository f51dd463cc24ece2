//! Category boundaries barely move with the lookback length.

use gastimate::pricing::{self, SENSITIVITY_LOOKBACKS};
use gastimate::{synthchain, SynthConfig};

#[test]
fn boundaries_are_stable_across_lookbacks() {
    let chain = synthchain::generate(&SynthConfig { seed: 42, n_blocks: 1200, ..Default::default() }).unwrap();
    for reference in [400u64, 800, 1200] {
        let all: Vec<_> = SENSITIVITY_LOOKBACKS
            .iter()
            .map(|&lb| pricing::boundaries(&chain, reference, lb).unwrap())
            .collect();
        for a in &all {
            for b in &all {
                for (x, y) in [(a.q1, b.q1), (a.q2, b.q2), (a.q3, b.q3), (a.q4, b.q4)] {
                    let rel = (x - y).abs() / x.min(y);
                    assert!(rel < 0.25, "lookbacks {} vs {} at block {reference}: {x} vs {y}", a.lookback, b.lookback);
                }
            }
        }
    }
}
