//! Online bidding with a pacing multiplier.
//!
//! Both strategies keep a multiplier `mu_t in [0, J*U/rho]` updated by the
//! projected step `mu_{t+1} = clip(mu_t - eps * (rho - spend_t))` on realized
//! spend, and bid zero everywhere once the remaining budget drops below `J*U`.
//! Adaptive value pacing bids the estimated best response to the paced value
//! `v / (1 + mu_t)` against the empirical CDF of past competitor bids; the
//! baseline bids the paced value itself.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auction::{AuctionFormat, AuctionSpec};
use crate::distributions::EmpiricalCdf;
use crate::error::{Error, Result};
use crate::response::{empirical_response, BestResponseMap, ResponseSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Adaptive value pacing: estimated best response to the paced value.
    Avp,
    /// Adaptive pacing: bid the paced value.
    Baseline,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Avp => "avp",
            Strategy::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacingConfig {
    pub specs: Vec<AuctionSpec>,
    /// Horizon `T`.
    pub horizon: usize,
    /// Per-round budget `rho`.
    pub budget_per_round: f64,
    /// Value bound `U`.
    pub value_bound: f64,
    /// Step size `eps`.
    pub learning_rate: f64,
    /// Competitor bids are merged into the empirical CDFs every this many rounds.
    pub refresh_every: usize,
    pub response: ResponseSettings,
}

impl PacingConfig {
    pub fn new(specs: Vec<AuctionSpec>, horizon: usize, budget_per_round: f64, value_bound: f64, learning_rate: f64) -> Self {
        Self {
            specs,
            horizon,
            budget_per_round,
            value_bound,
            learning_rate,
            refresh_every: 1,
            response: ResponseSettings::for_value_bound(value_bound).with_mc_samples(2_000),
        }
    }

    pub fn num_auctions(&self) -> usize {
        self.specs.len()
    }

    /// `mu_bar = J * U / rho`.
    pub fn mu_cap(&self) -> f64 {
        self.num_auctions() as f64 * self.value_bound / self.budget_per_round
    }

    /// Largest per-round spend possible: `J * U`.
    pub fn max_round_spend(&self) -> f64 {
        self.num_auctions() as f64 * self.value_bound
    }

    pub fn total_budget(&self) -> f64 {
        self.budget_per_round * self.horizon as f64
    }

    /// Checks parameters; with `enforce_step_condition`, also `0 < eps < 1/(J*U)`.
    pub fn validate(&self, enforce_step_condition: bool) -> Result<()> {
        if self.specs.is_empty() {
            return Err(Error::Validation("at least one auction is required".into()));
        }
        for s in &self.specs {
            s.validate()?;
        }
        if self.horizon == 0 {
            return Err(Error::Validation("horizon must be >= 1".into()));
        }
        if !(self.budget_per_round > 0.0 && self.budget_per_round.is_finite()) {
            return Err(Error::Validation(format!("budget per round must be > 0, got {}", self.budget_per_round)));
        }
        if !(self.value_bound > 0.0 && self.value_bound.is_finite()) {
            return Err(Error::Validation(format!("value bound must be > 0, got {}", self.value_bound)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.refresh_every == 0 {
            return Err(Error::Validation("refresh_every must be >= 1".into()));
        }
        let limit = 1.0 / self.max_round_spend();
        if enforce_step_condition && self.learning_rate >= limit {
            return Err(Error::StepSize { eps: self.learning_rate, limit });
        }
        Ok(())
    }
}

/// What the bidder sees after a round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundFeedback {
    /// `competitor_bids[j]`: the `n` other bids in auction `j`.
    pub competitor_bids: Vec<Vec<f64>>,
    /// Realized CTR of the tracked bidder per auction.
    pub ctrs: Vec<f64>,
    /// Realized payment of the tracked bidder per auction.
    pub payments: Vec<f64>,
}

impl RoundFeedback {
    pub fn total_payment(&self) -> f64 {
        self.payments.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct PacingState {
    /// Round about to be played, starting at 1.
    pub round: usize,
    pub mu: f64,
    pub remaining_budget: f64,
    /// Times the projection onto `mu <= mu_bar` was active.
    pub upper_clip_hits: usize,
    cdfs: Vec<Arc<EmpiricalCdf>>,
    pending: Vec<Vec<f64>>,
    estimators: Vec<OnceLock<BestResponseMap>>,
}

impl PacingState {
    pub fn new(config: &PacingConfig, initial_mu: f64) -> Self {
        let j = config.num_auctions();
        Self {
            round: 1,
            mu: initial_mu.clamp(0.0, config.mu_cap()),
            remaining_budget: config.total_budget(),
            upper_clip_hits: 0,
            cdfs: vec![Arc::new(EmpiricalCdf::new()); j],
            pending: vec![Vec::new(); j],
            estimators: (0..j).map(|_| OnceLock::new()).collect(),
        }
    }

    /// `mu_1 ~ Uniform[0, mu_bar]`.
    pub fn with_random_multiplier<R: Rng + ?Sized>(config: &PacingConfig, rng: &mut R) -> Self {
        let mu = rng.random::<f64>() * config.mu_cap();
        Self::new(config, mu)
    }

    /// Empirical CDF of competitor bids in auction `j` as of the last refresh.
    pub fn empirical(&self, auction: usize) -> &Arc<EmpiricalCdf> {
        &self.cdfs[auction]
    }

    pub fn is_depleted(&self, config: &PacingConfig) -> bool {
        self.remaining_budget < config.max_round_spend()
    }

    /// Estimated best response `sigma_hat_{j,t}(paced_value)`.
    pub fn estimated_best_response(&self, config: &PacingConfig, auction: usize, paced_value: f64) -> f64 {
        if paced_value <= 0.0 {
            return 0.0;
        }
        let cdf = &self.cdfs[auction];
        let spec = &config.specs[auction];
        if cdf.is_empty() || spec.format == AuctionFormat::Vcg {
            return paced_value;
        }
        self.estimators[auction]
            .get_or_init(|| {
                let mut settings = config.response;
                settings.seed ^= (auction as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                BestResponseMap::new(empirical_response(spec, cdf, &settings), &settings)
            })
            .best_response(paced_value)
    }

    /// In-place form of [`avp_update`]; the multiplier and budget rules are shared by both strategies.
    pub fn apply_feedback(&mut self, config: &PacingConfig, feedback: &RoundFeedback) {
        debug_assert_eq!(feedback.payments.len(), config.num_auctions());
        debug_assert_eq!(feedback.competitor_bids.len(), config.num_auctions());
        let spend = feedback.total_payment();
        let cap = config.mu_cap();
        let stepped = self.mu - config.learning_rate * (config.budget_per_round - spend);
        if stepped > cap {
            self.upper_clip_hits += 1;
        }
        self.mu = stepped.clamp(0.0, cap);
        self.remaining_budget -= spend;
        for (buf, bids) in self.pending.iter_mut().zip(&feedback.competitor_bids) {
            buf.extend_from_slice(bids);
        }
        if self.round % config.refresh_every == 0 {
            self.refresh();
        }
        self.round += 1;
    }

    fn refresh(&mut self) {
        for (cdf, buf) in self.cdfs.iter_mut().zip(self.pending.iter_mut()) {
            if !buf.is_empty() {
                Arc::make_mut(cdf).extend(buf);
                buf.clear();
            }
        }
        for slot in &mut self.estimators {
            *slot = OnceLock::new();
        }
    }
}

fn check_values(config: &PacingConfig, values: &[f64]) -> Result<()> {
    if values.len() != config.num_auctions() {
        return Err(Error::Structural(format!(
            "got {} values for {} auctions",
            values.len(),
            config.num_auctions()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v <= config.value_bound)) {
        return Err(Error::Validation(format!("value {v} outside [0, {}]", config.value_bound)));
    }
    Ok(())
}

/// Adaptive value pacing bids for the current round. Does not advance the state.
pub fn avp_bid(state: &PacingState, config: &PacingConfig, values: &[f64]) -> Result<Vec<f64>> {
    check_values(config, values)?;
    if state.is_depleted(config) {
        return Ok(vec![0.0; values.len()]);
    }
    let scale = 1.0 / (1.0 + state.mu);
    Ok(values
        .iter()
        .enumerate()
        .map(|(j, &v)| state.estimated_best_response(config, j, v * scale))
        .collect())
}

/// Adaptive pacing baseline: bid `v / (1 + mu_t)` directly.
pub fn baseline_bid(state: &PacingState, config: &PacingConfig, values: &[f64]) -> Result<Vec<f64>> {
    check_values(config, values)?;
    if state.is_depleted(config) {
        return Ok(vec![0.0; values.len()]);
    }
    let scale = 1.0 / (1.0 + state.mu);
    Ok(values.iter().map(|&v| v * scale).collect())
}

pub fn strategy_bid(strategy: Strategy, state: &PacingState, config: &PacingConfig, values: &[f64]) -> Result<Vec<f64>> {
    match strategy {
        Strategy::Avp => avp_bid(state, config, values),
        Strategy::Baseline => baseline_bid(state, config, values),
    }
}

/// Returns the state after observing `feedback`.
pub fn avp_update(state: &PacingState, config: &PacingConfig, feedback: &RoundFeedback) -> PacingState {
    let mut next = state.clone();
    next.apply_feedback(config, feedback);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gfp() -> AuctionSpec {
        AuctionSpec::new(AuctionFormat::Gfp, 5, vec![1.0, 0.5, 0.25]).unwrap()
    }

    fn config(j: usize) -> PacingConfig {
        PacingConfig::new(vec![gfp(); j], 100, 1.0, 10.0, 0.01)
    }

    fn feedback(j: usize, spend_each: f64, bids: &[f64]) -> RoundFeedback {
        RoundFeedback {
            competitor_bids: vec![bids.to_vec(); j],
            ctrs: vec![0.0; j],
            payments: vec![spend_each; j],
        }
    }

    #[test]
    fn depletion_rule_zeroes_bids() {
        let cfg = config(2);
        let mut state = PacingState::new(&cfg, 0.0);
        state.remaining_budget = cfg.max_round_spend() - 0.01;
        assert_eq!(avp_bid(&state, &cfg, &[1.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(baseline_bid(&state, &cfg, &[1.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn first_round_bids_paced_value() {
        let cfg = config(2);
        let state = PacingState::new(&cfg, 0.25);
        let bids = avp_bid(&state, &cfg, &[1.0, 0.5]).unwrap();
        assert!((bids[0] - 0.8).abs() < 1e-12 && (bids[1] - 0.4).abs() < 1e-12);
        let bids = baseline_bid(&state, &cfg, &[1.0, 0.5]).unwrap();
        assert!((bids[0] - 0.8).abs() < 1e-12 && (bids[1] - 0.4).abs() < 1e-12);
        let unpaced = PacingState::new(&cfg, 0.0);
        assert_eq!(baseline_bid(&unpaced, &cfg, &[1.0, 0.5]).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn values_are_validated() {
        let cfg = config(2);
        let state = PacingState::new(&cfg, 0.0);
        assert!(matches!(avp_bid(&state, &cfg, &[11.0, 0.5]), Err(Error::Validation(_))));
        assert!(matches!(baseline_bid(&state, &cfg, &[-1.0, 0.5]), Err(Error::Validation(_))));
        assert!(matches!(avp_bid(&state, &cfg, &[1.0]), Err(Error::Structural(_))));
    }

    #[test]
    fn vcg_slot_bids_value_after_learning() {
        let vcg = AuctionSpec::new(AuctionFormat::Vcg, 2, vec![1.0]).unwrap();
        let cfg = PacingConfig::new(vec![vcg], 100, 1.0, 10.0, 0.01);
        let mut state = PacingState::new(&cfg, 0.0);
        for _ in 0..20 {
            state.apply_feedback(&cfg, &RoundFeedback { competitor_bids: vec![vec![0.3, 0.7]], ctrs: vec![0.0], payments: vec![1.0] });
        }
        state.mu = 0.0;
        assert_eq!(avp_bid(&state, &cfg, &[2.5]).unwrap(), vec![2.5]);
    }

    #[test]
    fn multiplier_step_examples() {
        let mut cfg = PacingConfig::new(vec![gfp()], 100, 1.0, 10.0, 0.1);
        let state = PacingState::new(&cfg, 0.5);
        let next = avp_update(&state, &cfg, &feedback(1, 1.5, &[0.1; 5]));
        assert!((next.mu - 0.55).abs() < 1e-12);
        assert!((next.remaining_budget - (100.0 - 1.5)).abs() < 1e-12);
        assert_eq!(next.round, 2);
        assert_eq!(next.empirical(0).len(), 5);
        assert_eq!(state.round, 1, "update must not touch the input state");

        let next = avp_update(&PacingState::new(&cfg, 0.0), &cfg, &feedback(1, 0.0, &[0.1; 5]));
        assert_eq!(next.mu, 0.0);

        cfg.learning_rate = 0.01;
        let top = PacingState::new(&cfg, cfg.mu_cap());
        let next = avp_update(&top, &cfg, &feedback(1, cfg.max_round_spend(), &[0.1; 5]));
        assert_eq!(next.mu, cfg.mu_cap());
    }

    #[test]
    fn refresh_cadence_batches_samples() {
        let mut cfg = config(1);
        cfg.refresh_every = 3;
        let mut state = PacingState::new(&cfg, 1.0);
        for t in 1..=7 {
            state.apply_feedback(&cfg, &feedback(1, 0.0, &[0.2; 5]));
            assert_eq!(state.empirical(0).len(), 5 * 3 * (t / 3));
        }
    }

    #[test]
    fn step_condition() {
        let cfg = config(2);
        assert!(cfg.validate(true).is_ok());
        let mut bad = cfg.clone();
        bad.learning_rate = 1.0 / 20.0;
        assert!(matches!(bad.validate(true), Err(Error::StepSize { .. })));
        assert!(bad.validate(false).is_ok());
        assert_eq!(cfg.mu_cap(), 20.0);
    }

    proptest! {
        #[test]
        fn multiplier_stays_in_range(
            mu0 in 0.0f64..40.0,
            eps in 0.0001f64..0.5,
            spends in prop::collection::vec(0.0f64..10.0, 1..60),
        ) {
            let mut cfg = config(2);
            cfg.learning_rate = eps;
            let mut state = PacingState::new(&cfg, mu0);
            prop_assert!(state.mu >= 0.0 && state.mu <= cfg.mu_cap());
            for s in spends {
                state.apply_feedback(&cfg, &feedback(2, s, &[0.5; 5]));
                prop_assert!(state.mu >= 0.0 && state.mu <= cfg.mu_cap());
            }
        }

        #[test]
        fn budget_decreases_by_realized_spend(spends in prop::collection::vec(0.0f64..10.0, 1..30)) {
            let cfg = config(2);
            let mut state = PacingState::new(&cfg, 1.0);
            let mut total = 0.0;
            for s in spends {
                let before = state.remaining_budget;
                state.apply_feedback(&cfg, &feedback(2, s, &[0.5; 5]));
                total += 2.0 * s;
                prop_assert!((before - state.remaining_budget - 2.0 * s).abs() < 1e-9);
            }
            prop_assert!((cfg.total_budget() - state.remaining_budget - total).abs() < 1e-9);
        }
    }
}
