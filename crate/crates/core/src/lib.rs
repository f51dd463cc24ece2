//! Estimate how long a transaction waits for inclusion given its gas price.
//!
//! The pipeline: load or simulate a chain ([`chainmodel`], [`ingest`],
//! [`synthchain`]), split prices into quintile categories ([`pricing`]),
//! compute the single recent-blocks feature ([`features`]), fit a log-log
//! linear model and build lookup tables ([`estimator`]), validate it over
//! sliding windows ([`evaluation`]), compare predictors ([`stats`],
//! [`ranking`]) and replay cheaper-price decisions ([`savings`]).
//!
//! ```
//! use gastimate::{estimator, synthchain, PriceRequest, SynthConfig};
//!
//! let chain = synthchain::generate(&SynthConfig { n_blocks: 300, ..Default::default() })?;
//! let (first, last) = (chain.blocks()[0].timestamp, chain.head().unwrap().timestamp);
//! let model = estimator::train(&chain, first, last + 1, 120)?;
//! let head = chain.head().unwrap().number;
//! let table = estimator::lookup_table(&model, &chain, head, &PriceRequest::Range { min: 1.0, max: 40.0, step: 1.0 }, 120)?;
//! assert_eq!(table.rows.len(), 40);
//! # Ok::<(), gastimate::Error>(())
//! ```

pub mod analysis;
pub mod chainmodel;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod pricing;
pub mod ranking;
pub mod rng;
pub mod savings;
pub mod stats;
pub mod synthchain;

pub use chainmodel::{Block, ChainView, Timestamp, Transaction};
pub use error::{Error, Result};
pub use estimator::{LinearModel, LookupRow, LookupTable, PriceRequest};
pub use evaluation::{EvaluationReport, WindowSpec};
pub use features::{Anchor, FeatureIndex, FeatureSample};
pub use pricing::{CategoryBoundaries, PriceCategory, DEFAULT_LOOKBACK};
pub use ranking::RankTable;
pub use savings::{SavingsConfig, SavingsOutcome, SavingsReport};
pub use synthchain::SynthConfig;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/categories.md")]
    mod categories {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/ranking.md")]
    mod ranking {}
    #[doc = include_str!("../../../book/src/savings.md")]
    mod savings {}
    #[doc = include_str!("../../../book/src/interfaces.md")]
    mod interfaces {}
}
