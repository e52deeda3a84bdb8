//! Command-line front end.

use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use balkwise_core::{
    expected_revenue, run_pricing, stationary_distribution, PricingTrace, QueuePath, Schedule,
    SimulatedSource, StreamSource, Weighting,
};
use clap::{Args, Parser, Subcommand};

use crate::config::{Experiment, ExperimentConfig, Format};
use crate::error::{CliError, Result};
use crate::experiments::{self as exp, Setup};
use crate::output::{self, Emitter};

#[derive(Debug, Parser)]
#[command(name = "balkwise", version, about = "Service-value estimation and pricing for a queue with balking")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON config laid over the command's preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub replications: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Potential arrival rate.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Service rate.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Waiting cost per unit time.
    #[arg(long = "cost", global = true)]
    pub cost_c: Option<f64>,
    #[arg(long, global = true)]
    pub price: Option<f64>,
    /// True (or assumed) parameter of the value distribution.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Lower bound of the parameter space.
    #[arg(long, global = true)]
    pub theta_lower: Option<f64>,
    /// Upper bound of the parameter space.
    #[arg(long, global = true)]
    pub theta_upper: Option<f64>,
    /// Number of transitions.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub weighting: Option<Weighting>,
    /// Truncation tolerance of the stationary law.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one observable path and write it as CSV.
    Simulate,
    /// Fit the parameter to a path CSV.
    Fit {
        /// Path CSV (`step,state,up,hold`).
        path: PathBuf,
    },
    /// Stationary distribution of the queue length.
    Stationary,
    /// Stationary revenue rate at the given price.
    Revenue,
    /// Revenue-maximising and std-minimising prices.
    PriceOpt,
    /// Run the iterative pricing loop.
    Autoprice(AutopriceArgs),
    /// Run a named experiment.
    Experiment {
        #[arg(value_enum)]
        name: Experiment,
    },
}

#[derive(Debug, Clone, Args)]
pub struct AutopriceArgs {
    /// Replay transitions from a path CSV instead of simulating.
    #[arg(long)]
    pub stream: Option<PathBuf>,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub k1: Option<usize>,
    /// `increment`, `doubling` or `multiplier:<m>`.
    #[arg(long)]
    pub schedule: Option<Schedule>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

/// Config for `exp` with the config file and every flag applied.
pub fn resolve(exp: Experiment, g: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(exp, g.config.as_deref())?;
    if let Some(v) = g.seed {
        c.seed = v;
    }
    if let Some(v) = &g.out {
        c.out = v.clone();
    }
    if let Some(v) = g.replications {
        c.replications = v;
    }
    if let Some(v) = g.format {
        c.format = v;
    }
    if let Some(v) = g.lambda {
        c.model.lambda = v;
    }
    if let Some(v) = g.mu {
        c.model.mu = v;
    }
    if let Some(v) = g.cost_c {
        c.model.cost_c = v;
    }
    if let Some(v) = g.price {
        c.model.price = v;
    }
    if let Some(v) = g.theta {
        c.theta0 = vec![v];
    }
    if let Some(v) = g.theta_lower {
        c.family.lower = vec![v];
    }
    if let Some(v) = g.theta_upper {
        c.family.upper = vec![v];
    }
    if let Some(v) = g.k {
        c.k = Some(v);
        if c.k_list.is_some() {
            c.k_list = Some(vec![v]);
        }
    }
    if let Some(v) = g.weighting {
        c.weighting = v;
    }
    if let Some(v) = g.eps {
        c.eps = v;
    }
    Ok(c)
}

fn report(written: &[PathBuf]) {
    for p in written {
        eprintln!("wrote {}", p.display());
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_file(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let file = std::fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = std::io::BufWriter::new(file);
    write(&mut w).and_then(|_| w.flush()).map_err(CliError::io(path))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate => {
            let cfg = resolve(Experiment::Simulate, g)?;
            let path = exp::simulate(&cfg)?;
            let file = cfg.out.join("path.csv");
            write_file(&file, |w| path.write_csv(w))
        }
        Command::Fit { path } => {
            let cfg = resolve(Experiment::Fit, g)?;
            let file = std::fs::File::open(path).map_err(CliError::io(path))?;
            let qp = QueuePath::read_csv(BufReader::new(file), cfg.model.price)?;
            print_json(&exp::fit_path(&cfg, &qp)?)
        }
        Command::Stationary => {
            let cfg = resolve(Experiment::PriceOpt, g)?;
            cfg.validate(Experiment::PriceOpt)?;
            let setup = Setup::new(&cfg)?;
            let d = stationary_distribution(&setup.model(), &cfg.theta0, cfg.eps, cfg.weighting)?;
            if cfg.format == Format::Json {
                return print_json(&d);
            }
            let mut out = std::io::stdout().lock();
            let io = |e| CliError::Io { path: "<stdout>".into(), source: e };
            writeln!(out, "q,prob").map_err(io)?;
            for (q, p) in d.probs.iter().enumerate() {
                writeln!(out, "{q},{p}").map_err(io)?;
            }
            Ok(())
        }
        Command::Revenue => {
            let cfg = resolve(Experiment::PriceOpt, g)?;
            cfg.validate(Experiment::PriceOpt)?;
            let setup = Setup::new(&cfg)?;
            let r = expected_revenue(cfg.model.price, &cfg.theta0, &setup.model(), cfg.eps)?;
            println!("price,revenue\n{},{r}", cfg.model.price);
            Ok(())
        }
        Command::PriceOpt => {
            let cfg = resolve(Experiment::PriceOpt, g)?;
            print_json(&exp::price_opt(&cfg)?)
        }
        Command::Autoprice(a) => autoprice(g, a),
        Command::Experiment { name } => {
            let cfg = resolve(*name, g)?;
            let written = run_experiment(*name, &cfg)?;
            report(&written);
            Ok(())
        }
    }
}

fn autoprice(g: &GlobalArgs, a: &AutopriceArgs) -> Result<()> {
    let mut cfg = resolve(Experiment::PriceOpt, g)?;
    let p = &mut cfg.pricing;
    if let Some(v) = a.p1 {
        p.p1 = v;
    }
    if let Some(v) = a.k1 {
        p.k1_min = v;
    }
    if let Some(v) = a.schedule {
        p.schedule = v;
    }
    if let Some(v) = a.tol {
        p.tol = v;
    }
    if a.budget.is_some() {
        p.budget = a.budget;
    }
    if let Some(v) = a.max_iterations {
        p.max_iterations = v;
    }
    let setup = Setup::new(&cfg)?;
    let model = setup.model();
    let trace: PricingTrace = match &a.stream {
        Some(path) => {
            model.cfg.validate()?;
            let file = std::fs::File::open(path).map_err(CliError::io(path))?;
            let qp = QueuePath::read_csv(BufReader::new(file), cfg.model.price)?;
            let mut source = StreamSource::new(qp.transitions().collect::<Vec<_>>().into_iter());
            run_pricing(&model, &mut source, &cfg.pricing)?
        }
        None => {
            cfg.validate(Experiment::PriceOpt)?;
            let mut source = SimulatedSource::new(model, &cfg.theta0, cfg.seed)?;
            run_pricing(&model, &mut source, &cfg.pricing)?
        }
    };
    write_file(&cfg.out.join("trace.csv"), |w| trace.write_csv(w))?;
    if cfg.format == Format::Json {
        let mut e = Emitter::new(&cfg.out, cfg.format)?;
        e.json("trace.json", &trace)?;
        report(&e.written);
    }
    println!("final_price={} iterations={} observations={} stopped={:?}",
        trace.final_price, trace.iterations(), trace.total_observations(), trace.stopped_reason);
    Ok(())
}

/// Runs experiment `name` under `cfg` and writes its files into `cfg.out`.
pub fn run_experiment(name: Experiment, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate(name)?;
    let mut e = Emitter::new(&cfg.out, cfg.format)?;
    e.json("config.json", cfg)?;
    match name {
        Experiment::ScoreConvergence => output::score_convergence(&mut e, &exp::score_convergence(cfg)?)?,
        Experiment::Consistency => output::consistency(&mut e, &exp::consistency(cfg)?)?,
        Experiment::Normality => output::normality(&mut e, &exp::normality(cfg)?)?,
        Experiment::StdVsPrice => output::std_vs_price(&mut e, &exp::std_vs_price(cfg)?)?,
        Experiment::RevenueVsPrice => output::revenue_vs_price(&mut e, &exp::revenue_vs_price(cfg)?)?,
        Experiment::PricingTables => output::pricing_tables(&mut e, &exp::pricing_tables(cfg)?)?,
        Experiment::Simulate => {
            let path = exp::simulate(cfg)?;
            let file = cfg.out.join("path.csv");
            write_file(&file, |w| path.write_csv(w))?;
            e.written.push(file);
        }
        Experiment::Fit => {
            // fits a freshly simulated path, for a self-contained check
            let path = exp::simulate(cfg)?;
            e.json("fit.json", &exp::fit_path(cfg, &path)?)?;
        }
        Experiment::PriceOpt => e.json("price_opt.json", &exp::price_opt(cfg)?)?,
    }
    Ok(e.written)
}
