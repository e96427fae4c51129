//! Single-round clearing of position auctions.
//!
//! Bidders are ranked by bid (ties broken uniformly at random); rank `i`
//! receives position `i` with click-through rate `alpha_i` for `i <= k`.
//! A zero bid is non-participation: no position, no payment.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuctionFormat {
    /// Generalized first price: the winner of slot `i` pays `alpha_i * own bid`.
    Gfp,
    /// Generalized second price: the winner of slot `i` pays `alpha_i * next bid`.
    Gsp,
    /// Vickrey-Clarke-Groves: the winner pays the externality imposed on lower slots.
    Vcg,
}

impl fmt::Display for AuctionFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuctionFormat::Gfp => "gfp",
            AuctionFormat::Gsp => "gsp",
            AuctionFormat::Vcg => "vcg",
        })
    }
}

impl FromStr for AuctionFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gfp" => Ok(AuctionFormat::Gfp),
            "gsp" => Ok(AuctionFormat::Gsp),
            "vcg" => Ok(AuctionFormat::Vcg),
            other => Err(Error::Validation(format!("unknown auction format '{other}'"))),
        }
    }
}

/// One platform's mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionSpec {
    pub format: AuctionFormat,
    /// Number of competing bidders `n`; the tracked bidder is the `(n+1)`-th.
    pub num_competitors: usize,
    /// CTR discounts `alpha_1 > ... > alpha_k > 0`; `k` is the number of positions.
    pub discounts: Vec<f64>,
}

impl AuctionSpec {
    pub fn new(format: AuctionFormat, num_competitors: usize, discounts: Vec<f64>) -> Result<Self> {
        let spec = Self {
            format,
            num_competitors,
            discounts,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_competitors == 0 {
            return Err(Error::Validation("num_competitors must be >= 1".into()));
        }
        if self.discounts.is_empty() {
            return Err(Error::Validation("at least one position is required".into()));
        }
        for (i, &a) in self.discounts.iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Validation(format!(
                    "discount alpha_{} = {a} is outside (0, 1]",
                    i + 1
                )));
            }
        }
        if self.discounts.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Validation(
                "discounts must be strictly decreasing".into(),
            ));
        }
        Ok(())
    }

    pub fn num_positions(&self) -> usize {
        self.discounts.len()
    }

    /// `alpha_i` for 1-based position `i`, with `alpha_{k+1} = 0`.
    pub fn alpha(&self, position: usize) -> f64 {
        debug_assert!(position >= 1);
        self.discounts.get(position - 1).copied().unwrap_or(0.0)
    }
}

/// Per-bidder CTRs and payments; index `n` is the tracked bidder.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub ctrs: Vec<f64>,
    pub payments: Vec<f64>,
}

impl AuctionOutcome {
    pub fn tracked_ctr(&self) -> f64 {
        *self.ctrs.last().expect("non-empty outcome")
    }

    pub fn tracked_payment(&self) -> f64 {
        *self.payments.last().expect("non-empty outcome")
    }
}

/// Per-click price of the winner of 1-based `position`, given the bids ordered
/// by rank (`ranked_bids[0]` is the highest). Missing ranks bid 0.
pub(crate) fn price_for_position(spec: &AuctionSpec, position: usize, ranked_bids: &[f64]) -> f64 {
    let rank_bid = |r: usize| ranked_bids.get(r - 1).copied().unwrap_or(0.0);
    match spec.format {
        AuctionFormat::Gfp => spec.alpha(position) * rank_bid(position),
        AuctionFormat::Gsp => spec.alpha(position) * rank_bid(position + 1),
        AuctionFormat::Vcg => (position..=spec.num_positions())
            .map(|l| (spec.alpha(l) - spec.alpha(l + 1)) * rank_bid(l + 1))
            .sum(),
    }
}

/// Clears one auction for the full bid profile (`bids.len() == n + 1`).
pub fn clear_auction<R: Rng + ?Sized>(
    spec: &AuctionSpec,
    bids: &[f64],
    tie_rng: &mut R,
) -> Result<AuctionOutcome> {
    let expected = spec.num_competitors + 1;
    if bids.len() != expected {
        return Err(Error::Structural(format!(
            "bid profile has {} entries, expected {expected}",
            bids.len()
        )));
    }
    if let Some((i, b)) = bids.iter().enumerate().find(|(_, b)| !b.is_finite() || **b < 0.0) {
        return Err(Error::Validation(format!("bid {i} is {b}; bids must be finite and >= 0")));
    }

    let mut order: Vec<usize> = (0..bids.len()).filter(|&i| bids[i] > 0.0).collect();
    order.sort_by(|&a, &b| bids[b].total_cmp(&bids[a]));
    // shuffle runs of equal bids
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && bids[order[end]] == bids[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].shuffle(tie_rng);
        }
        start = end;
    }

    let ranked_bids: Vec<f64> = order.iter().map(|&i| bids[i]).collect();
    let mut ctrs = vec![0.0; bids.len()];
    let mut payments = vec![0.0; bids.len()];
    for (slot, &bidder) in order.iter().take(spec.num_positions()).enumerate() {
        let position = slot + 1;
        ctrs[bidder] = spec.alpha(position);
        payments[bidder] = price_for_position(spec, position, &ranked_bids);
    }
    Ok(AuctionOutcome { ctrs, payments })
}
