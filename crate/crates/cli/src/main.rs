//! `pacing` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pacing_core::harness::{
    quick_checks, rerun_manifest, AuctionConfig, DistConfig, Experiment, ExperimentConfig, Manifest, RegretEstimator,
};
use pacing_core::response::{BestResponseMap, ExpectedResponse, ResponseSettings};
use pacing_core::{AuctionFormat, Error, Strategy};

#[derive(Parser)]
#[command(name = "pacing", version, about = "Budget pacing across simultaneous position auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run AVP and the baseline; write CSVs and a manifest.
    Simulate(SimulateArgs),
    /// Solve the offline dual and print the solution as JSON.
    SolveOffline(ExperimentArgs),
    /// Tabulate the best response over a grid of values as CSV.
    BestResponse(BestResponseArgs),
    /// Run the built-in oracle and invariant checks.
    Validate,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated auction formats, one per auction (e.g. gfp,gsp).
    #[arg(long)]
    setting: Option<String>,
    /// Competitor law: var1, var2 or file:PATH.
    #[arg(long)]
    dist: Option<String>,
    /// Competitors per auction.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated slot discounts.
    #[arg(long)]
    discounts: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps_avp: Option<f64>,
    #[arg(long)]
    eps_baseline: Option<f64>,
    /// First multiplier of every run; uniform on [0, J*U/rho] when absent.
    #[arg(long)]
    initial_mu: Option<f64>,
    #[arg(long)]
    value_bound: Option<f64>,
    #[arg(long)]
    emit_every: Option<usize>,
    #[arg(long)]
    refresh_every: Option<usize>,
    #[arg(long)]
    mc_values: Option<usize>,
    #[arg(long)]
    mc_profiles: Option<usize>,
    /// realized, expected or paired.
    #[arg(long)]
    regret_estimator: Option<String>,
    /// Accept explicit step sizes at or above 1/(J*U).
    #[arg(long)]
    relax_step_condition: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-run the experiment recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct BestResponseArgs {
    #[arg(long, default_value = "gfp")]
    format: String,
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value = "1,0.5,0.25")]
    discounts: String,
    #[arg(long, default_value = "var1")]
    dist: String,
    /// Largest value in the grid; the law's bound when absent.
    #[arg(long)]
    max_value: Option<f64>,
    /// Number of grid points in (0, max_value].
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Error> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| Error::Config(format!("bad {what} entry {s:?}"))))
        .collect()
}

fn parse_dist(text: &str) -> Result<DistConfig, Error> {
    match text {
        "var1" => Ok(DistConfig::lognormal_var1()),
        "var2" => Ok(DistConfig::lognormal_var2()),
        _ => match text.strip_prefix("file:") {
            Some(path) => Ok(DistConfig::File { path: PathBuf::from(path) }),
            None => Err(Error::Config(format!("unknown dist {text:?}; expected var1, var2 or file:PATH"))),
        },
    }
}

fn parse_estimator(text: &str) -> Result<RegretEstimator, Error> {
    serde_json::from_value(serde_json::Value::String(text.to_string()))
        .map_err(|_| Error::Config(format!("unknown regret estimator {text:?}")))
}

impl ExperimentArgs {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => {
                let (Some(rho), Some(horizon)) = (self.rho, self.horizon) else {
                    return Err(Error::Config("without --config, --rho and --T are required".into()));
                };
                let mut c = ExperimentConfig::new(Vec::new(), horizon, rho);
                if self.setting.is_none() {
                    c.setting = vec![AuctionConfig::standard(AuctionFormat::Gfp, DistConfig::lognormal_var1()); 2];
                }
                c
            }
        };
        let dist = self.dist.as_deref().map(parse_dist).transpose()?;
        if let Some(formats) = &self.setting {
            let formats: Vec<AuctionFormat> = parse_list(formats, "setting")?;
            let d = dist.clone().unwrap_or_else(DistConfig::lognormal_var1);
            config.setting = formats.into_iter().map(|f| AuctionConfig::standard(f, d.clone())).collect();
        } else if let Some(d) = &dist {
            for a in &mut config.setting {
                a.competitor_dist = d.clone();
            }
        }
        if let Some(n) = self.n {
            config.setting.iter_mut().for_each(|a| a.n = n);
        }
        if let Some(text) = &self.discounts {
            let discounts: Vec<f64> = parse_list(text, "discount")?;
            for a in &mut config.setting {
                a.k = Some(discounts.len());
                a.discounts = discounts.clone();
            }
        }
        if let Some(v) = self.rho {
            config.rho = v;
        }
        if let Some(v) = self.horizon {
            config.horizon = v;
        }
        if let Some(v) = self.runs {
            config.runs = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if self.eps_avp.is_some() {
            config.eps_avp = self.eps_avp;
        }
        if self.eps_baseline.is_some() {
            config.eps_baseline = self.eps_baseline;
        }
        if self.initial_mu.is_some() {
            config.initial_mu = self.initial_mu;
        }
        if self.value_bound.is_some() {
            config.value_bound = self.value_bound;
        }
        if let Some(v) = self.emit_every {
            config.emit_every = v;
        }
        if let Some(v) = self.refresh_every {
            config.refresh_every = v;
        }
        if let Some(v) = self.mc_values {
            config.mc_values = v;
        }
        if let Some(v) = self.mc_profiles {
            config.mc_profiles = v;
        }
        if let Some(text) = &self.regret_estimator {
            config.regret_estimator = parse_estimator(text)?;
        }
        if self.relax_step_condition {
            config.relax_step_condition = true;
        }
        Ok(config)
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Error> {
    let (result, out) = match &args.manifest {
        Some(path) => {
            let manifest = Manifest::load(path)?;
            let out = args
                .out
                .clone()
                .or_else(|| manifest.config.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            (rerun_manifest(&manifest)?, out)
        }
        None => {
            let mut config = args.experiment.build()?;
            if let Some(out) = &args.out {
                config.output_dir = Some(out.clone());
            }
            let out = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
            config.output_dir = Some(out.clone());
            let experiment = Experiment::prepare(&config)?;
            for w in &experiment.resolved.warnings {
                eprintln!("warning: {w}");
            }
            (experiment.run_all()?, out)
        }
    };
    result.write(&out)?;
    for strategy in [Strategy::Avp, Strategy::Baseline] {
        let agg = result.aggregate(strategy);
        let last = agg.mean_cum_regret.len() - 1;
        println!(
            "{}: final mean regret {:.4} (stderr {:.4}), mean spend {:.4}",
            strategy.name(),
            agg.mean_cum_regret[last],
            agg.stderr_cum_regret[last],
            agg.mean_cum_spend[last]
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn solve_offline(args: &ExperimentArgs) -> Result<(), Error> {
    let config = args.build()?;
    let resolved = config.resolve()?;
    let solution = resolved.solve_benchmark()?;
    println!("{}", serde_json::to_string_pretty(&solution)?);
    Ok(())
}

fn best_response(args: &BestResponseArgs) -> Result<(), Error> {
    let format: AuctionFormat = args.format.parse()?;
    let discounts: Vec<f64> = parse_list(&args.discounts, "discount")?;
    let spec = pacing_core::AuctionSpec::new(format, args.n, discounts)?;
    let dist = parse_dist(&args.dist)?.resolve()?;
    let max_value = args.max_value.unwrap_or_else(|| dist.upper_bound());
    if !(max_value > 0.0) || args.points == 0 {
        return Err(Error::Validation("need max_value > 0 and points >= 1".into()));
    }
    let settings = ResponseSettings::for_value_bound(max_value).with_seed(args.seed);
    let map = BestResponseMap::new(ExpectedResponse::with_settings(spec, dist, &settings), &settings);
    println!("value,bid,utility");
    for i in 1..=args.points {
        let v = max_value * i as f64 / args.points as f64;
        let (b, u) = map.best_response_with_utility(v);
        println!("{v},{b},{u}");
    }
    Ok(())
}

fn validate() -> Result<bool, Error> {
    let checks = quick_checks();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Structural(_)
        | Error::Validation(_)
        | Error::StepSize { .. }
        | Error::Config(_)
        | Error::Load { .. }
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => simulate(args).map(|_| true),
        Command::SolveOffline(args) => solve_offline(args).map(|_| true),
        Command::BestResponse(args) => best_response(args).map(|_| true),
        Command::Validate => validate(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} message={message}", e.kind());
            ExitCode::from(exit_code(&e))
        }
    }
}
