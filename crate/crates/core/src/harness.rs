//! Seeded multi-run experiments comparing adaptive value pacing with the
//! adaptive-pacing baseline, regret against the hindsight benchmark `T * Z`,
//! and the CSV / JSON outputs consumed by downstream tooling.
//!
//! Random streams: every stream is `ChaCha8Rng::seed_from_u64(seed)` with a
//! distinct stream id. Id 0 feeds the benchmark solver; run `r` of a strategy
//! uses id `1 + 2 r + s` with `s = 0` for AVP and `s = 1` for the baseline.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auction::{clear_auction, AuctionFormat, AuctionSpec};
use crate::distributions::{load_bid_samples, BidDistribution, TruncatedLognormal, ValueModel};
use crate::error::{Error, Result};
use crate::offline::{DualSolution, OfflineAuction, OfflineProblem, OfflineSettings, OfflineSolver};
use crate::online::{strategy_bid, PacingConfig, PacingState, RoundFeedback, Strategy};
use crate::response::{ExpectedResponse, ResponseSettings};
use crate::stats::{Accumulator, Estimate};

pub const CSV_HEADER: [&str; 5] = [
    "round",
    "mean_cum_regret",
    "stderr_cum_regret",
    "mean_cum_spend",
    "mean_normalized_regret",
];

/// Competitor-bid law as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistConfig {
    Lognormal { mu: f64, sigma: f64, upper: f64 },
    Uniform { low: f64, high: f64 },
    Point { value: f64 },
    /// Bid-sample file, one number per line.
    File { path: PathBuf },
}

impl DistConfig {
    /// Mean 1, variance 1 lognormal truncated at 10.
    pub fn lognormal_var1() -> Self {
        let d = TruncatedLognormal::unit_variance();
        DistConfig::Lognormal { mu: d.mu, sigma: d.sigma, upper: d.upper }
    }

    /// Mean 1, variance 2 lognormal truncated at 15.
    pub fn lognormal_var2() -> Self {
        let d = TruncatedLognormal::double_variance();
        DistConfig::Lognormal { mu: d.mu, sigma: d.sigma, upper: d.upper }
    }

    pub fn resolve(&self) -> Result<BidDistribution> {
        match self {
            DistConfig::Lognormal { mu, sigma, upper } => {
                Ok(BidDistribution::TruncatedLognormal(TruncatedLognormal::new(*mu, *sigma, *upper)?))
            }
            DistConfig::Uniform { low, high } => BidDistribution::uniform(*low, *high),
            DistConfig::Point { value } => BidDistribution::point_mass(*value),
            DistConfig::File { path } => BidDistribution::empirical(load_bid_samples(path)?),
        }
    }
}

fn default_multiplier() -> [f64; 2] {
    [1.0, 1.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueConfig {
    #[serde(default = "default_multiplier")]
    pub multiplier: [f64; 2],
    /// Base law of values; the competitor law when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<DistConfig>,
}

impl Default for ValueConfig {
    fn default() -> Self {
        Self { multiplier: default_multiplier(), base: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionConfig {
    pub format: AuctionFormat,
    pub n: usize,
    /// Number of slots; must match `discounts` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub discounts: Vec<f64>,
    pub competitor_dist: DistConfig,
    #[serde(default)]
    pub value: ValueConfig,
}

impl AuctionConfig {
    /// Five competitors, three slots with discounts (1, 0.5, 0.25).
    pub fn standard(format: AuctionFormat, competitor_dist: DistConfig) -> Self {
        Self {
            format,
            n: 5,
            k: Some(3),
            discounts: vec![1.0, 0.5, 0.25],
            competitor_dist,
            value: ValueConfig::default(),
        }
    }

    pub fn spec(&self) -> Result<AuctionSpec> {
        if let Some(k) = self.k {
            if k != self.discounts.len() {
                return Err(Error::Config(format!("k = {k} but {} discounts given", self.discounts.len())));
            }
        }
        AuctionSpec::new(self.format, self.n, self.discounts.clone())
    }
}

/// What a round contributes to cumulative utility in the regret series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegretEstimator {
    /// Realized CTR and payment of the cleared auctions.
    #[default]
    Realized,
    /// Expected CTR and payment under the true competitor laws at the bids placed.
    Expected,
    /// Expected utility at the bids placed, measured against the benchmark's paced
    /// strategy on the same value draws instead of the constant `Z`. Same
    /// expectation as `Expected`; the value noise cancels.
    Paired,
}

fn default_runs() -> usize {
    1
}
fn default_one() -> usize {
    1
}
fn default_mc_values() -> usize {
    100_000
}
fn default_mc_profiles() -> usize {
    20_000
}
fn default_online_mc_profiles() -> usize {
    2_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setting: Vec<AuctionConfig>,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub rho: f64,
    /// AVP step size; `T^(-1/4)` when absent.
    #[serde(default)]
    pub eps_avp: Option<f64>,
    /// Baseline step size; `T^(-1/4)` when absent.
    #[serde(default)]
    pub eps_baseline: Option<f64>,
    /// First multiplier of every run; drawn from `Uniform[0, J*U/rho]` when absent.
    #[serde(default)]
    pub initial_mu: Option<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// `U`; the largest support bound of the value laws when absent.
    #[serde(default)]
    pub value_bound: Option<f64>,
    #[serde(default = "default_one")]
    pub emit_every: usize,
    #[serde(default = "default_one")]
    pub refresh_every: usize,
    /// Value draws behind the benchmark.
    #[serde(default = "default_mc_values")]
    pub mc_values: usize,
    /// Competitor profiles behind GSP/VCG payment curves of the benchmark.
    #[serde(default = "default_mc_profiles")]
    pub mc_profiles: usize,
    /// Competitor profiles resampled from empirical CDFs online (GSP only).
    #[serde(default = "default_online_mc_profiles")]
    pub online_mc_profiles: usize,
    /// Accept explicit step sizes with `eps >= 1/(J*U)`.
    #[serde(default)]
    pub relax_step_condition: bool,
    #[serde(default)]
    pub regret_estimator: RegretEstimator,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Config with every optional key at its default.
    pub fn new(setting: Vec<AuctionConfig>, horizon: usize, rho: f64) -> Self {
        Self {
            setting,
            horizon,
            rho,
            eps_avp: None,
            eps_baseline: None,
            initial_mu: None,
            runs: default_runs(),
            seed: 0,
            value_bound: None,
            emit_every: 1,
            refresh_every: 1,
            mc_values: default_mc_values(),
            mc_profiles: default_mc_profiles(),
            online_mc_profiles: default_online_mc_profiles(),
            relax_step_condition: false,
            regret_estimator: RegretEstimator::Realized,
            output_dir: None,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn default_learning_rate(&self) -> f64 {
        (self.horizon.max(1) as f64).powf(-0.25)
    }

    pub fn learning_rate(&self, strategy: Strategy) -> f64 {
        let explicit = match strategy {
            Strategy::Avp => self.eps_avp,
            Strategy::Baseline => self.eps_baseline,
        };
        explicit.unwrap_or_else(|| self.default_learning_rate())
    }

    /// Resolves distributions and checks every parameter. Defaulted step sizes that
    /// break `eps < 1/(J*U)` are reported as warnings; explicit ones are errors
    /// unless `relax_step_condition` is set.
    pub fn resolve(&self) -> Result<Resolved> {
        if self.setting.is_empty() {
            return Err(Error::Config("setting must list at least one auction".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("T must be >= 1".into()));
        }
        if self.emit_every == 0 {
            return Err(Error::Config("emit_every must be >= 1".into()));
        }
        let mut specs = Vec::new();
        let mut competitors = Vec::new();
        let mut bases = Vec::new();
        for a in &self.setting {
            specs.push(a.spec()?);
            let comp = a.competitor_dist.resolve()?;
            let base = match &a.value.base {
                Some(b) => b.resolve()?,
                None => comp.clone(),
            };
            competitors.push(comp);
            bases.push(base);
        }
        // parametric laws carry their own bound; point masses and sample files need the markup
        let value_bound = match self.value_bound {
            Some(u) => u,
            None => bases
                .iter()
                .zip(&self.setting)
                .map(|(b, a)| match b {
                    BidDistribution::TruncatedLognormal(_) => b.upper_bound(),
                    _ => b.upper_bound() * a.value.multiplier[1],
                })
                .fold(0.0, f64::max),
        };
        let values = bases
            .into_iter()
            .zip(&self.setting)
            .map(|(b, a)| ValueModel::new(b, a.value.multiplier[0], a.value.multiplier[1], value_bound))
            .collect::<Result<Vec<_>>>()?;

        // stream id u64::MAX is reserved for these curves
        let mut rng = stream_rng(self.seed, u64::MAX);
        let responses = specs
            .iter()
            .zip(&competitors)
            .map(|(spec, comp)| ExpectedResponse::new(spec.clone(), comp.clone(), self.mc_profiles, &mut rng))
            .collect();
        let mut resolved = Resolved {
            config: self.clone(),
            specs,
            responses,
            competitors,
            values,
            value_bound,
            warnings: Vec::new(),
        };
        resolved.config.value_bound = Some(value_bound);
        for strategy in [Strategy::Avp, Strategy::Baseline] {
            let pacing = resolved.pacing_config(strategy);
            if let Some(mu) = self.initial_mu {
                if !(0.0..=pacing.mu_cap()).contains(&mu) {
                    return Err(Error::Config(format!("initial_mu {mu} is outside [0, {}]", pacing.mu_cap())));
                }
            }
            let explicit = match strategy {
                Strategy::Avp => self.eps_avp.is_some(),
                Strategy::Baseline => self.eps_baseline.is_some(),
            };
            pacing.validate(false)?;
            match pacing.validate(true) {
                Err(e @ Error::StepSize { .. }) if explicit && !self.relax_step_condition => return Err(e),
                Err(e @ Error::StepSize { .. }) => {
                    resolved.warnings.push(format!("{}: {e}", strategy.name()));
                }
                other => other?,
            }
        }
        Ok(resolved)
    }
}

/// A validated config with its distributions materialised.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Input config with `value_bound` filled in.
    pub config: ExperimentConfig,
    pub specs: Vec<AuctionSpec>,
    /// Expected response curves under the true competitor laws.
    pub responses: Vec<ExpectedResponse>,
    pub competitors: Vec<BidDistribution>,
    pub values: Vec<ValueModel>,
    pub value_bound: f64,
    pub warnings: Vec<String>,
}

impl Resolved {
    pub fn pacing_config(&self, strategy: Strategy) -> PacingConfig {
        let mut p = PacingConfig::new(
            self.specs.clone(),
            self.config.horizon,
            self.config.rho,
            self.value_bound,
            self.config.learning_rate(strategy),
        );
        p.refresh_every = self.config.refresh_every;
        p.response = ResponseSettings::for_value_bound(self.value_bound)
            .with_mc_samples(self.config.online_mc_profiles)
            .with_seed(self.config.seed);
        p
    }

    pub fn offline_problem(&self) -> OfflineProblem {
        OfflineProblem {
            auctions: self
                .specs
                .iter()
                .zip(&self.competitors)
                .zip(&self.values)
                .map(|((spec, comp), values)| OfflineAuction {
                    spec: spec.clone(),
                    competitors: comp.clone(),
                    values: values.clone(),
                })
                .collect(),
            budget_per_round: self.config.rho,
            value_bound: self.value_bound,
            mc_values: self.config.mc_values,
        }
    }

    /// Benchmark solver (value draws and response tables) on stream 0 of the root seed.
    pub fn benchmark_solver(&self) -> Result<OfflineSolver> {
        let mut settings = OfflineSettings::for_value_bound(self.value_bound);
        settings.response = settings.response.with_mc_samples(self.config.mc_profiles).with_seed(self.config.seed);
        OfflineSolver::new(self.offline_problem(), settings, &mut stream_rng(self.config.seed, 0))
    }

    /// Solves for `mu*`.
    pub fn solve_benchmark(&self) -> Result<DualSolution> {
        let solver = self.benchmark_solver()?;
        solver.solve(solver.default_tolerance())
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn run_stream(strategy: Strategy, run_index: usize) -> u64 {
    let s = match strategy {
        Strategy::Avp => 0,
        Strategy::Baseline => 1,
    };
    1 + 2 * run_index as u64 + s
}

/// Per-round record of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub initial_mu: f64,
    pub final_mu: f64,
    pub utility: Vec<f64>,
    /// `sum_j v_j * x_j(b_j) - p_j(b_j)` under the true competitor laws.
    pub expected_utility: Vec<f64>,
    pub spend: Vec<f64>,
    /// `values[t][j]`.
    pub values: Vec<Vec<f64>>,
    /// Multiplier in effect when each round's bids were placed.
    pub mu: Vec<f64>,
    /// `bids[t][j]`, kept only when requested.
    pub bids: Vec<Vec<f64>>,
    pub upper_clip_hits: usize,
    /// First round whose bids were forced to zero by the depletion rule.
    pub depleted_at: Option<usize>,
}

/// Plays `pacing.horizon` rounds of `strategy`. Values, competitor bids, `mu_1`
/// and tie-breaking all come from `rng`.
pub fn simulate<R: Rng + ?Sized>(
    resolved: &Resolved,
    pacing: &PacingConfig,
    strategy: Strategy,
    rng: &mut R,
    record_bids: bool,
) -> Result<RunTrace> {
    let j_count = pacing.num_auctions();
    let mut state = match resolved.config.initial_mu {
        Some(mu) => PacingState::new(pacing, mu),
        None => PacingState::with_random_multiplier(pacing, rng),
    };
    let mut trace = RunTrace {
        initial_mu: state.mu,
        final_mu: state.mu,
        utility: Vec::with_capacity(pacing.horizon),
        expected_utility: Vec::with_capacity(pacing.horizon),
        values: Vec::with_capacity(pacing.horizon),
        spend: Vec::with_capacity(pacing.horizon),
        mu: Vec::with_capacity(pacing.horizon),
        bids: Vec::new(),
        upper_clip_hits: 0,
        depleted_at: None,
    };
    let budget = pacing.total_budget();
    let mut spent = 0.0;
    let mut values = vec![0.0; j_count];
    let mut profile = Vec::new();
    for t in 1..=pacing.horizon {
        for (v, model) in values.iter_mut().zip(&resolved.values) {
            *v = model.sample(rng).clamp(0.0, pacing.value_bound);
        }
        if trace.depleted_at.is_none() && state.is_depleted(pacing) {
            trace.depleted_at = Some(t);
        }
        let bids = strategy_bid(strategy, &state, pacing, &values)?;
        let mut feedback = RoundFeedback {
            competitor_bids: Vec::with_capacity(j_count),
            ctrs: Vec::with_capacity(j_count),
            payments: Vec::with_capacity(j_count),
        };
        let mut round_utility = 0.0;
        let mut round_expected = 0.0;
        for j in 0..j_count {
            let spec = &pacing.specs[j];
            profile.clear();
            profile.extend((0..spec.num_competitors).map(|_| resolved.competitors[j].sample(rng)));
            let others = profile.clone();
            profile.push(bids[j]);
            let outcome = clear_auction(spec, &profile, rng)?;
            let (ctr, pay) = (outcome.tracked_ctr(), outcome.tracked_payment());
            round_utility += values[j] * ctr - pay;
            round_expected += resolved.responses[j].utility(values[j], bids[j]);
            feedback.competitor_bids.push(others);
            feedback.ctrs.push(ctr);
            feedback.payments.push(pay);
        }
        let round_spend = feedback.total_payment();
        spent += round_spend;
        if spent > budget {
            return Err(Error::BudgetViolation { spent, budget });
        }
        trace.mu.push(state.mu);
        trace.utility.push(round_utility);
        trace.expected_utility.push(round_expected);
        trace.values.push(values.clone());
        trace.spend.push(round_spend);
        if record_bids {
            trace.bids.push(bids);
        }
        state.apply_feedback(pacing, &feedback);
    }
    trace.final_mu = state.mu;
    trace.upper_clip_hits = state.upper_clip_hits;
    Ok(trace)
}

/// Per-round regret of one run against `T * Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSeries {
    pub strategy: Strategy,
    pub run_index: usize,
    pub utility: Vec<f64>,
    pub spend: Vec<f64>,
    /// `R_t = t * Z - sum_{s <= t} utility_s`.
    pub cum_regret: Vec<f64>,
    /// `R_t / t^(3/4)`.
    pub normalized_regret: Vec<f64>,
    pub trace: RunTrace,
}

impl RegretSeries {
    /// `targets[t]` is the benchmark utility of round `t` (the constant `Z` unless paired).
    pub fn from_parts(strategy: Strategy, run_index: usize, trace: RunTrace, targets: &[f64], utility: Vec<f64>) -> Self {
        let mut cum_regret = Vec::with_capacity(utility.len());
        let mut normalized_regret = Vec::with_capacity(utility.len());
        let mut total = 0.0;
        for (i, (u, z)) in utility.iter().zip(targets).enumerate() {
            let t = (i + 1) as f64;
            total += z - u;
            cum_regret.push(total);
            normalized_regret.push(total / t.powf(0.75));
        }
        Self {
            strategy,
            run_index,
            utility,
            spend: trace.spend.clone(),
            cum_regret,
            normalized_regret,
            trace,
        }
    }

    pub fn total_spend(&self) -> f64 {
        self.spend.iter().sum()
    }

    pub fn total_utility(&self) -> f64 {
        self.utility.iter().sum()
    }

    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }
}

/// A resolved config together with its benchmark.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub resolved: Resolved,
    pub solver: OfflineSolver,
    pub benchmark: DualSolution,
}

impl Experiment {
    /// Resolves `config` and solves for the benchmark on stream 0.
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        Self::build(config, None)
    }

    /// Like [`Self::prepare`] but reuses a previously solved benchmark.
    pub fn with_benchmark(config: &ExperimentConfig, benchmark: DualSolution) -> Result<Self> {
        Self::build(config, Some(benchmark))
    }

    fn build(config: &ExperimentConfig, cached: Option<DualSolution>) -> Result<Self> {
        let resolved = config.resolve()?;
        let solver = resolved.benchmark_solver()?;
        let benchmark = match cached {
            Some(b) => b,
            None => solver.solve(solver.default_tolerance())?,
        };
        Ok(Self { resolved, solver, benchmark })
    }

    /// Per-round `Z`.
    pub fn z(&self) -> f64 {
        self.benchmark.expected_utility.mean
    }

    pub fn series_from_trace(&self, strategy: Strategy, run_index: usize, trace: RunTrace) -> RegretSeries {
        let z = self.z();
        match self.resolved.config.regret_estimator {
            RegretEstimator::Realized => {
                let utility = trace.utility.clone();
                RegretSeries::from_parts(strategy, run_index, trace, &vec![z; utility.len()], utility)
            }
            RegretEstimator::Expected => {
                let utility = trace.expected_utility.clone();
                RegretSeries::from_parts(strategy, run_index, trace, &vec![z; utility.len()], utility)
            }
            RegretEstimator::Paired => {
                let targets: Vec<f64> = trace
                    .values
                    .iter()
                    .map(|v| self.solver.paced_round(v, self.benchmark.mu_star).0)
                    .collect();
                let utility = trace.expected_utility.clone();
                RegretSeries::from_parts(strategy, run_index, trace, &targets, utility)
            }
        }
    }

    /// One run of `strategy` on its own substream.
    pub fn run_single(&self, strategy: Strategy, run_index: usize) -> Result<RegretSeries> {
        let pacing = self.resolved.pacing_config(strategy);
        let mut rng = stream_rng(self.resolved.config.seed, run_stream(strategy, run_index));
        let trace = simulate(&self.resolved, &pacing, strategy, &mut rng, false)?;
        let series = self.series_from_trace(strategy, run_index, trace);
        let budget = pacing.total_budget();
        if series.total_spend() > budget {
            return Err(Error::BudgetViolation { spent: series.total_spend(), budget });
        }
        Ok(series)
    }

    /// Runs both strategies `runs` times each on a worker pool.
    pub fn run_all(&self) -> Result<AggregateResult> {
        let config = &self.resolved.config;
        let jobs: Vec<(Strategy, usize)> = [Strategy::Avp, Strategy::Baseline]
            .into_iter()
            .flat_map(|s| (0..config.runs).map(move |r| (s, r)))
            .collect();
        let series = jobs
            .into_par_iter()
            .map(|(s, r)| self.run_single(s, r))
            .collect::<Result<Vec<_>>>()?;
        let (avp_series, base_series): (Vec<_>, Vec<_>) =
            series.iter().cloned().partition(|s| s.strategy == Strategy::Avp);
        let solution = self.benchmark;
        let z_se = solution.expected_utility.stderr;
        let manifest = Manifest {
            version: version_string(),
            config: config.clone(),
            root_seed: config.seed,
            eps_avp: config.learning_rate(Strategy::Avp),
            eps_baseline: config.learning_rate(Strategy::Baseline),
            benchmark: BenchmarkRecord {
                z: solution.expected_utility,
                total: solution.expected_utility.scale(config.horizon as f64),
                solution,
            },
            runs: series.iter().map(RunSummary::of).collect(),
            warnings: self.resolved.warnings.clone(),
        };
        Ok(AggregateResult {
            avp: StrategyAggregate::from_series(&avp_series, z_se),
            baseline: StrategyAggregate::from_series(&base_series, z_se),
            series,
            manifest,
        })
    }
}

/// Resolves `config`, solves the benchmark and plays one run of `strategy`.
pub fn run_single(config: &ExperimentConfig, strategy: Strategy, run_index: usize) -> Result<RegretSeries> {
    Experiment::prepare(config)?.run_single(strategy, run_index)
}

/// Across-run statistics for one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyAggregate {
    pub strategy: Strategy,
    pub runs: usize,
    pub mean_cum_regret: Vec<f64>,
    /// Standard error of the run mean alone.
    pub run_stderr: Vec<f64>,
    /// Run standard error combined with the benchmark's Monte Carlo error `t * se(Z)`.
    pub stderr_cum_regret: Vec<f64>,
    pub mean_cum_spend: Vec<f64>,
    pub mean_normalized_regret: Vec<f64>,
}

impl StrategyAggregate {
    pub fn from_series(series: &[RegretSeries], z_stderr: f64) -> Self {
        let horizon = series[0].cum_regret.len();
        let mut out = Self {
            strategy: series[0].strategy,
            runs: series.len(),
            mean_cum_regret: Vec::with_capacity(horizon),
            run_stderr: Vec::with_capacity(horizon),
            stderr_cum_regret: Vec::with_capacity(horizon),
            mean_cum_spend: Vec::with_capacity(horizon),
            mean_normalized_regret: Vec::with_capacity(horizon),
        };
        let mut cum_spend = vec![0.0; series.len()];
        for t in 0..horizon {
            let regret: Accumulator = series.iter().map(|s| s.cum_regret[t]).collect();
            let normalized: Accumulator = series.iter().map(|s| s.normalized_regret[t]).collect();
            for (c, s) in cum_spend.iter_mut().zip(series) {
                *c += s.spend[t];
            }
            let spend: Accumulator = cum_spend.iter().copied().collect();
            let run_se = regret.estimate().stderr;
            let bench_se = (t + 1) as f64 * z_stderr;
            out.mean_cum_regret.push(regret.mean());
            out.run_stderr.push(run_se);
            out.stderr_cum_regret.push((run_se * run_se + bench_se * bench_se).sqrt());
            out.mean_cum_spend.push(spend.mean());
            out.mean_normalized_regret.push(normalized.mean());
        }
        out
    }

    /// Rounds `k, 2k, ...` plus the final round, 1-based.
    pub fn emitted_rounds(&self, emit_every: usize) -> Vec<usize> {
        let horizon = self.mean_cum_regret.len();
        let mut rounds: Vec<usize> = (1..=horizon).filter(|t| t % emit_every == 0).collect();
        if rounds.last() != Some(&horizon) {
            rounds.push(horizon);
        }
        rounds
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, emit_every: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(CSV_HEADER)?;
        for t in self.emitted_rounds(emit_every) {
            let i = t - 1;
            w.write_record([
                t.to_string(),
                self.mean_cum_regret[i].to_string(),
                self.stderr_cum_regret[i].to_string(),
                self.mean_cum_spend[i].to_string(),
                self.mean_normalized_regret[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: Strategy,
    pub run_index: usize,
    pub stream: u64,
    pub initial_mu: f64,
    pub final_mu: f64,
    pub final_cum_regret: f64,
    pub total_utility: f64,
    pub total_spend: f64,
    pub upper_clip_hits: usize,
    pub depleted_at: Option<usize>,
}

impl RunSummary {
    fn of(series: &RegretSeries) -> Self {
        Self {
            strategy: series.strategy,
            run_index: series.run_index,
            stream: run_stream(series.strategy, series.run_index),
            initial_mu: series.trace.initial_mu,
            final_mu: series.trace.final_mu,
            final_cum_regret: series.final_regret(),
            total_utility: series.total_utility(),
            total_spend: series.total_spend(),
            upper_clip_hits: series.trace.upper_clip_hits,
            depleted_at: series.trace.depleted_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    /// Per-round `Z` with its Monte Carlo standard error.
    pub z: Estimate,
    /// `T * Z`.
    pub total: Estimate,
    pub solution: DualSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub root_seed: u64,
    /// Step sizes in effect, defaults included.
    pub eps_avp: f64,
    pub eps_baseline: f64,
    pub benchmark: BenchmarkRecord,
    pub runs: Vec<RunSummary>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn version_string() -> String {
    match option_env!("PACING_GIT_DESCRIBE") {
        Some(describe) => format!("pacing-core {} ({describe})", env!("CARGO_PKG_VERSION")),
        None => format!("pacing-core {}", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Debug, Clone)]
pub struct AggregateResult {
    pub avp: StrategyAggregate,
    pub baseline: StrategyAggregate,
    pub series: Vec<RegretSeries>,
    pub manifest: Manifest,
}

impl AggregateResult {
    pub fn aggregate(&self, strategy: Strategy) -> &StrategyAggregate {
        match strategy {
            Strategy::Avp => &self.avp,
            Strategy::Baseline => &self.baseline,
        }
    }

    /// Writes `avp.csv`, `baseline.csv` and `manifest.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let every = self.manifest.config.emit_every;
        self.avp.write_csv(dir.join("avp.csv"), every)?;
        self.baseline.write_csv(dir.join("baseline.csv"), every)?;
        let json = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }
}

/// Runs both strategies `runs` times each. A cached benchmark (e.g. from a
/// manifest) skips the offline solve.
pub fn run_experiment_with(config: &ExperimentConfig, cached: Option<DualSolution>) -> Result<AggregateResult> {
    Experiment::build(config, cached)?.run_all()
}

/// Solves the benchmark, runs everything, and writes outputs when `output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateResult> {
    let result = run_experiment_with(config, None)?;
    if let Some(dir) = &config.output_dir {
        result.write(dir)?;
    }
    Ok(result)
}

/// Re-runs the experiment recorded in a manifest with its cached benchmark.
pub fn rerun_manifest(manifest: &Manifest) -> Result<AggregateResult> {
    run_experiment_with(&manifest.config, Some(manifest.benchmark.solution))
}

/// Outcome of one quick self-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fast oracle and invariant checks run by the `validate` command.
pub fn quick_checks() -> Vec<CheckResult> {
    use crate::response::{BestResponseMap, ExpectedResponse};

    let mut out = Vec::new();
    let mut push = |name: &'static str, r: Result<(bool, String)>| {
        let (passed, detail) = r.unwrap_or_else(|e| (false, e.to_string()));
        out.push(CheckResult { name, passed, detail });
    };

    push("gfp_clearing_example", (|| {
        let spec = AuctionSpec::new(AuctionFormat::Gfp, 2, vec![1.0, 0.5])?;
        let o = clear_auction(&spec, &[0.9, 0.4, 0.7], &mut ChaCha8Rng::seed_from_u64(0))?;
        let ok = o.ctrs == vec![1.0, 0.0, 0.5] && (o.payments[2] - 0.35).abs() < 1e-12;
        Ok((ok, format!("ctrs {:?} payments {:?}", o.ctrs, o.payments)))
    })());

    push("gfp_best_response_uniform", (|| {
        let spec = AuctionSpec::new(AuctionFormat::Gfp, 1, vec![1.0])?;
        let settings = ResponseSettings::for_value_bound(1.0);
        let map = BestResponseMap::new(
            ExpectedResponse::with_settings(spec, BidDistribution::uniform(0.0, 1.0)?, &settings),
            &settings,
        );
        let worst = (1..=20)
            .map(|i| {
                let v = i as f64 / 20.0;
                (map.best_response(v) - v / 2.0).abs()
            })
            .fold(0.0, f64::max);
        Ok((worst <= 2.0 * settings.refine_tolerance, format!("max |sigma(v) - v/2| = {worst:.2e}")))
    })());

    push("offline_point_mass_mu_star", (|| {
        let spec = AuctionSpec::new(AuctionFormat::Gfp, 1, vec![1.0])?;
        let problem = OfflineProblem {
            auctions: vec![OfflineAuction {
                spec,
                competitors: BidDistribution::uniform(0.0, 1.0)?,
                values: ValueModel::constant(0.8)?,
            }],
            budget_per_round: 0.04,
            value_bound: 1.0,
            mc_values: 100,
        };
        let solver = OfflineSolver::seeded(problem, OfflineSettings::for_value_bound(1.0), 0)?;
        let sol = solver.solve(solver.default_tolerance())?;
        Ok(((sol.mu_star - 1.0).abs() <= 1e-2, format!("mu* = {:.5}", sol.mu_star)))
    })());

    push("budget_safety_short_run", (|| {
        let mut config = ExperimentConfig::new(
            vec![AuctionConfig::standard(AuctionFormat::Gfp, DistConfig::lognormal_var1()); 2],
            300,
            0.3,
        );
        config.eps_avp = Some(0.01);
        config.eps_baseline = Some(0.01);
        let resolved = config.resolve()?;
        let mut worst: f64 = f64::NEG_INFINITY;
        for strategy in [Strategy::Avp, Strategy::Baseline] {
            let pacing = resolved.pacing_config(strategy);
            let trace = simulate(&resolved, &pacing, strategy, &mut stream_rng(3, 1), false)?;
            worst = worst.max(trace.spend.iter().sum::<f64>() - pacing.total_budget());
        }
        Ok((worst <= 0.0, format!("max spend - budget = {worst:.4}")))
    })());

    push("vcg_avp_matches_baseline", (|| {
        let mut config = ExperimentConfig::new(
            vec![AuctionConfig::standard(AuctionFormat::Vcg, DistConfig::lognormal_var1()); 2],
            200,
            1.0,
        );
        config.eps_avp = Some(0.01);
        config.eps_baseline = Some(0.01);
        let resolved = config.resolve()?;
        let a = simulate(&resolved, &resolved.pacing_config(Strategy::Avp), Strategy::Avp, &mut stream_rng(5, 1), true)?;
        let b = simulate(&resolved, &resolved.pacing_config(Strategy::Baseline), Strategy::Baseline, &mut stream_rng(5, 1), true)?;
        Ok((a.bids == b.bids, format!("{} rounds compared", a.bids.len())))
    })());

    out
}
