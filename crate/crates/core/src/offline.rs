//! Offline value pacing: minimise the dual
//! `q(mu) = mu * rho + E[ sum_j v_j * x_j(s_j) - (1 + mu) * p_j(s_j) ]`, with
//! `s_j = sigma_j(v_j / (1 + mu))`, over `mu in [0, J*U/rho]`.
//!
//! Expectations over own values use one fixed set of value draws (common random
//! numbers across all `mu`). Per auction, best responses are tabulated on a
//! uniform grid of paced values. For GFP against a continuous law the bid is
//! interpolated between nodes and priced exactly; otherwise the better of the two
//! neighbouring node bids is used.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auction::AuctionSpec;
use crate::distributions::{BidDistribution, ValueModel};
use crate::error::{Error, Result};
use crate::optim::golden_section_min;
use crate::response::{BestResponseMap, ExpectedResponse, ResponseSettings};
use crate::stats::{Accumulator, Estimate};

#[derive(Debug, Clone)]
pub struct OfflineAuction {
    pub spec: AuctionSpec,
    pub competitors: BidDistribution,
    pub values: ValueModel,
}

#[derive(Debug, Clone)]
pub struct OfflineProblem {
    pub auctions: Vec<OfflineAuction>,
    /// Per-round budget `rho`.
    pub budget_per_round: f64,
    /// Value bound `U`.
    pub value_bound: f64,
    /// Value draws per auction used for every expectation.
    pub mc_values: usize,
}

impl OfflineProblem {
    pub fn validate(&self) -> Result<()> {
        if self.auctions.is_empty() {
            return Err(Error::Validation("offline problem needs at least one auction".into()));
        }
        if !(self.budget_per_round > 0.0 && self.budget_per_round.is_finite()) {
            return Err(Error::Validation(format!("budget per round must be > 0, got {}", self.budget_per_round)));
        }
        if !(self.value_bound > 0.0 && self.value_bound.is_finite()) {
            return Err(Error::Validation(format!("value bound must be > 0, got {}", self.value_bound)));
        }
        if self.mc_values == 0 {
            return Err(Error::Validation("mc_values must be >= 1".into()));
        }
        for a in &self.auctions {
            a.spec.validate()?;
        }
        Ok(())
    }

    /// `J * U / rho`: the dual minimiser never lies above this.
    pub fn mu_cap(&self) -> f64 {
        self.auctions.len() as f64 * self.value_bound / self.budget_per_round
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfflineSettings {
    pub response: ResponseSettings,
    /// Spacing of the paced-value table, in units of `U`.
    pub value_resolution: f64,
    pub max_iterations: usize,
}

impl OfflineSettings {
    pub fn for_value_bound(value_bound: f64) -> Self {
        Self {
            response: ResponseSettings::for_value_bound(value_bound),
            value_resolution: 1e-3,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub mu_star: f64,
    pub dual_value: Estimate,
    /// `G(mu*)`: expected per-round spend under the paced strategy.
    pub expected_spend: Estimate,
    /// Per-round primal objective `Z` at the paced strategy.
    pub expected_utility: Estimate,
    /// `mu* * (rho - G(mu*))`.
    pub complementary_slackness: f64,
    pub budget_per_round: f64,
}

impl DualSolution {
    /// True when the KKT conditions hold within `tol` (absolute) plus `z` standard errors.
    pub fn satisfies_kkt(&self, tol: f64, z: f64) -> bool {
        let slack = self.budget_per_round - self.expected_spend.mean;
        self.mu_star >= 0.0
            && slack >= -(tol + z * self.expected_spend.stderr)
            && self.complementary_slackness.abs() <= tol + z * self.mu_star * self.expected_spend.stderr
    }
}

/// Best responses tabulated at paced values `0, h, 2h, ..., U`.
#[derive(Debug, Clone)]
struct PacedTable {
    step: f64,
    bids: Vec<f64>,
    alloc: Vec<f64>,
    pay: Vec<f64>,
    /// GFP against a continuous law: interpolate the bid and price it exactly.
    smooth: bool,
}

impl PacedTable {
    fn build(map: &BestResponseMap, value_bound: f64, resolution: f64) -> Self {
        let nodes = (1.0 / resolution).round().max(1.0) as usize;
        let step = value_bound / nodes as f64;
        let resp = map.response();
        let bids: Vec<f64> = (0..=nodes).map(|i| map.best_response(i as f64 * step)).collect();
        let (alloc, pay) = bids
            .iter()
            .map(|&b| {
                // same CTR estimate the argmax was taken against
                let x = resp.payment_table().map_or_else(|| resp.expected_allocation(b), |t| t.allocation(b));
                (x, resp.expected_payment(b).mean)
            })
            .unzip();
        let smooth = resp.payment_table().is_none()
            && matches!(
                resp.competitors(),
                BidDistribution::Uniform { .. } | BidDistribution::TruncatedLognormal(_)
            );
        Self { step, bids, alloc, pay, smooth }
    }

    /// `(x, p)` at paced value `w`. Step-shaped responses use the better of the two
    /// neighbouring node bids, so each draw's dual term is a maximum of lines in `mu`.
    fn lookup(&self, resp: &ExpectedResponse, w: f64) -> (f64, f64) {
        let pos = (w / self.step).max(0.0);
        let last = self.alloc.len() - 1;
        let i = (pos.floor() as usize).min(last);
        if i == last {
            return (self.alloc[last], self.pay[last]);
        }
        // cells where sigma jumps (including the one at 0) fall through to the nodes
        let (b0, b1) = (self.bids[i], self.bids[i + 1]);
        if self.smooth && i > 0 && (b1 - b0).abs() <= self.step {
            let b = b0 + (pos - i as f64) * (b1 - b0);
            let x = resp.expected_allocation(b);
            return (x, b * x);
        }
        let lo = w * self.alloc[i] - self.pay[i];
        let hi = w * self.alloc[i + 1] - self.pay[i + 1];
        let j = if hi > lo { i + 1 } else { i };
        (self.alloc[j], self.pay[j])
    }
}

/// Per-round quantities of the paced strategy at a given `mu`.
#[derive(Debug, Clone, Copy)]
pub struct PacedEvaluation {
    pub dual_value: Estimate,
    pub spend: Estimate,
    pub utility: Estimate,
}

/// Dual evaluator with frozen value draws and response tables.
#[derive(Debug, Clone)]
pub struct OfflineSolver {
    problem: OfflineProblem,
    settings: OfflineSettings,
    maps: Vec<BestResponseMap>,
    tables: Vec<PacedTable>,
    /// `values[s][j]`: draw `s` for auction `j`.
    values: Vec<Vec<f64>>,
}

impl OfflineSolver {
    pub fn new<R: Rng + ?Sized>(problem: OfflineProblem, settings: OfflineSettings, rng: &mut R) -> Result<Self> {
        problem.validate()?;
        let maps: Vec<BestResponseMap> = problem
            .auctions
            .iter()
            .map(|a| {
                let resp = ExpectedResponse::new(a.spec.clone(), a.competitors.clone(), settings.response.mc_samples, rng);
                BestResponseMap::new(resp, &settings.response)
            })
            .collect();
        let tables = maps
            .iter()
            .map(|m| PacedTable::build(m, problem.value_bound, settings.value_resolution))
            .collect();
        let values = (0..problem.mc_values)
            .map(|_| {
                problem
                    .auctions
                    .iter()
                    .map(|a| a.values.sample(rng).clamp(0.0, problem.value_bound))
                    .collect()
            })
            .collect();
        Ok(Self { problem, settings, maps, tables, values })
    }

    pub fn seeded(problem: OfflineProblem, settings: OfflineSettings, seed: u64) -> Result<Self> {
        Self::new(problem, settings, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn problem(&self) -> &OfflineProblem {
        &self.problem
    }

    /// Exact (untabulated) paced bid `sigma_j(v / (1 + mu))`.
    pub fn paced_bid(&self, auction: usize, value: f64, mu: f64) -> f64 {
        self.maps[auction].best_response(value / (1.0 + mu))
    }

    pub fn evaluate(&self, mu: f64) -> PacedEvaluation {
        let mut dual = Accumulator::new();
        let mut spend = Accumulator::new();
        let mut utility = Accumulator::new();
        for draw in &self.values {
            let (u, p) = self.paced_round(draw, mu);
            dual.push(u - mu * p);
            spend.push(p);
            utility.push(u);
        }
        let dual = dual.estimate();
        PacedEvaluation {
            dual_value: Estimate { mean: dual.mean + mu * self.problem.budget_per_round, stderr: dual.stderr },
            spend: spend.estimate(),
            utility: utility.estimate(),
        }
    }

    /// Tabulated `(utility, spend)` of the paced strategy for one round of values.
    pub fn paced_round(&self, values: &[f64], mu: f64) -> (f64, f64) {
        let scale = 1.0 / (1.0 + mu);
        let (mut u, mut p) = (0.0, 0.0);
        for ((table, map), &v) in self.tables.iter().zip(&self.maps).zip(values) {
            let (x, pay) = table.lookup(map.response(), v * scale);
            u += v * x - pay;
            p += pay;
        }
        (u, p)
    }

    pub fn dual_value(&self, mu: f64) -> Estimate {
        self.evaluate(mu).dual_value
    }

    /// `rho - G(mu)`.
    pub fn dual_derivative(&self, mu: f64) -> Estimate {
        let spend = self.evaluate(mu).spend;
        Estimate {
            mean: self.problem.budget_per_round - spend.mean,
            stderr: spend.stderr,
        }
    }

    /// Default multiplier tolerance `1e-4 * J*U/rho`.
    pub fn default_tolerance(&self) -> f64 {
        1e-4 * self.problem.mu_cap()
    }

    pub fn solve(&self, tol: f64) -> Result<DualSolution> {
        if !(tol > 0.0) {
            return Err(Error::Validation(format!("solver tolerance must be > 0, got {tol}")));
        }
        let d0 = self.dual_derivative(0.0);
        if d0.mean >= -2.0 * d0.stderr {
            return Ok(self.solution_at(0.0));
        }
        let cap = self.problem.mu_cap();
        let d_cap = self.dual_derivative(cap);
        if d_cap.mean < 0.0 {
            return self.golden_fallback(tol);
        }

        let (mut lo, mut hi) = (0.0, cap);
        let (mut d_lo, mut d_hi) = (d0.mean, d_cap.mean);
        let mut iterations = 0;
        while hi - lo > tol {
            if iterations >= self.settings.max_iterations {
                return Err(Error::Solver { iterations, lo, hi });
            }
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let d = self.dual_derivative(mid).mean;
            if d < d_lo || d > d_hi {
                // derivative estimate not monotone: fall back to minimising q directly
                return self.golden_fallback(tol);
            }
            if d < 0.0 {
                lo = mid;
                d_lo = d;
            } else {
                hi = mid;
                d_hi = d;
            }
        }
        Ok(self.solution_at(0.5 * (lo + hi)))
    }

    fn golden_fallback(&self, tol: f64) -> Result<DualSolution> {
        let cap = self.problem.mu_cap();
        let max_steps = self.settings.max_iterations;
        let mut steps = 0;
        let (mu, _) = golden_section_min(
            |mu| {
                steps += 1;
                self.dual_value(mu).mean
            },
            0.0,
            cap,
            tol,
        );
        if steps > max_steps {
            return Err(Error::Solver { iterations: steps, lo: (mu - tol).max(0.0), hi: (mu + tol).min(cap) });
        }
        Ok(self.solution_at(mu))
    }

    fn solution_at(&self, mu: f64) -> DualSolution {
        let eval = self.evaluate(mu);
        DualSolution {
            mu_star: mu,
            dual_value: eval.dual_value,
            expected_spend: eval.spend,
            expected_utility: eval.utility,
            complementary_slackness: mu * (self.problem.budget_per_round - eval.spend.mean),
            budget_per_round: self.problem.budget_per_round,
        }
    }

    /// `T * Z`, with the standard error scaled alongside.
    pub fn hindsight_benchmark(&self, horizon: usize, tol: f64) -> Result<Estimate> {
        if horizon == 0 {
            return Err(Error::Validation("horizon must be >= 1".into()));
        }
        Ok(self.solve(tol)?.expected_utility.scale(horizon as f64))
    }
}

/// `q(mu)` with value draws taken from `rng`.
pub fn dual_value<R: Rng + ?Sized>(problem: &OfflineProblem, mu: f64, rng: &mut R) -> Result<Estimate> {
    let settings = OfflineSettings::for_value_bound(problem.value_bound);
    Ok(OfflineSolver::new(problem.clone(), settings, rng)?.dual_value(mu))
}

/// `dq/dmu = rho - G(mu)` with value draws taken from `rng`.
pub fn dual_derivative<R: Rng + ?Sized>(problem: &OfflineProblem, mu: f64, rng: &mut R) -> Result<Estimate> {
    let settings = OfflineSettings::for_value_bound(problem.value_bound);
    Ok(OfflineSolver::new(problem.clone(), settings, rng)?.dual_derivative(mu))
}

pub fn solve_mu_star<R: Rng + ?Sized>(problem: &OfflineProblem, tol: f64, rng: &mut R) -> Result<DualSolution> {
    let settings = OfflineSettings::for_value_bound(problem.value_bound);
    OfflineSolver::new(problem.clone(), settings, rng)?.solve(tol)
}

pub fn hindsight_benchmark<R: Rng + ?Sized>(problem: &OfflineProblem, horizon: usize, rng: &mut R) -> Result<Estimate> {
    let settings = OfflineSettings::for_value_bound(problem.value_bound);
    let solver = OfflineSolver::new(problem.clone(), settings, rng)?;
    solver.hindsight_benchmark(horizon, solver.default_tolerance())
}
