//! Budget-constrained bidding across simultaneous position auctions.
//!
//! The crate is organised bottom-up:
//!
//! - [`auction`]: single-round clearing of GFP, GSP and VCG position auctions.
//! - [`distributions`]: competitor-bid and own-value distributions, including
//!   empirical CDFs grown online and a plain-text sample loader.
//! - [`response`]: expected allocation / payment curves and best-response maps.
//! - [`offline`]: the dual (value-pacing) solver for the expected-budget problem
//!   and the hindsight benchmark `T * Z`.
//! - [`online`]: the adaptive value-pacing bidder and the adaptive-pacing baseline.
//! - [`harness`]: seeded multi-run experiments, regret series, CSV/JSON output.

pub mod auction;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod offline;
pub mod online;
pub mod optim;
pub mod response;
pub mod stats;

pub use auction::{clear_auction, AuctionFormat, AuctionOutcome, AuctionSpec};
pub use distributions::{BidDistribution, EmpiricalCdf, TruncatedLognormal, ValueModel};
pub use error::{Error, Result};
pub use offline::{DualSolution, OfflineAuction, OfflineProblem, OfflineSolver};
pub use online::{PacingConfig, PacingState, RoundFeedback, Strategy};
pub use response::{BestResponseMap, ExpectedResponse, ResponseSettings};
pub use stats::Estimate;
