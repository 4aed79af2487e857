use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbtrade::backcast::run_backcast_dir;
use sbtrade::bench::{oracle_sweep, run_bench};
use sbtrade::config::RunConfig;
use sbtrade::ising::QuboProblem;
use sbtrade::market::{replay, sample_day};
use sbtrade::sb::{self, SplitProblem};
use sbtrade::strategy::{
    build_qubo, build_split, check_constraints, correlation_matrix, daily_correlation_matrix,
    evaluate_candidate, objective, CorrelationMatrix, DeviationVector, Universe, Verdict,
};
use sbtrade::synth::{generate, write_synth, SynthSpec};
use sbtrade::Result;

#[derive(Parser)]
#[command(
    name = "sbtrade",
    version,
    about = "Simulated-bifurcation stock-group selection and backcasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct SolverFlags {
    /// Run configuration (`key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long = "n-step")]
    n_step: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
}

impl SolverFlags {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::read(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.sb.seed = v;
        }
        if let Some(v) = self.restarts {
            cfg.sb.restarts = v;
        }
        if let Some(v) = self.n_step {
            cfg.sb.n_step = v;
        }
        if let Some(v) = self.dt {
            cfg.sb.dt = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a QUBO matrix file, or a strategy instance given as
    /// deviations, a correlation matrix and a universe
    Solve {
        #[arg(long, conflicts_with_all = ["dev", "corr"], required_unless_present = "dev")]
        matrix: Option<PathBuf>,
        #[arg(long, requires_all = ["corr", "universe"])]
        dev: Option<PathBuf>,
        #[arg(long)]
        corr: Option<PathBuf>,
        #[arg(long)]
        universe: Option<PathBuf>,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Generate a synthetic universe and per-day feeds
    GenFeed {
        /// Synthetic feed spec (`key = value` lines)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the normalized correlation matrix from past feed days
    Corr {
        /// Feed files, oldest first
        #[arg(required = true)]
        feeds: Vec<PathBuf>,
        #[arg(long)]
        universe: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay every feed in a directory through the engine
    Backcast {
        feed_dir: PathBuf,
        #[arg(long)]
        universe: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Time solver runs and report tick-update write counts
    Bench {
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Also compare this many n = 16 instances against exhaustive search
        #[arg(long, default_value_t = 0)]
        oracle: usize,
        #[command(flatten)]
        flags: SolverFlags,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Solve {
            matrix,
            dev,
            corr,
            universe,
            flags,
        } => {
            let cfg = flags.load()?;
            match (matrix, dev, corr, universe) {
                (Some(m), ..) => solve_matrix(&m, &cfg),
                (None, Some(d), Some(c), Some(u)) => solve_strategy(&d, &c, &u, &cfg),
                _ => unreachable!("clap enforces the input combinations"),
            }
        }
        Command::GenFeed { config, seed, out } => {
            let spec = match config {
                Some(p) => SynthSpec::read(&p)?,
                None => SynthSpec::default(),
            };
            let feed = generate(&spec, seed)?;
            write_synth(&out, &feed)?;
            let events: usize = feed.days.iter().map(Vec::len).sum();
            println!("stocks={}", feed.universe.n());
            println!("days={}", feed.days.len());
            println!("events={events}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Corr {
            feeds,
            universe,
            config,
            out,
        } => {
            let cfg = match config {
                Some(p) => RunConfig::read(&p)?,
                None => RunConfig::default(),
            };
            let universe = Universe::read_csv(&universe)?;
            let mut daily = Vec::with_capacity(feeds.len());
            let mut days = Vec::with_capacity(feeds.len());
            for path in &feeds {
                let events = replay(path)?;
                let series = sample_day(&universe, &events, cfg.session.open, cfg.session.close)?;
                daily.push(daily_correlation_matrix(series.per_stock()));
                days.push(stem(path));
            }
            let used = &days[days.len().saturating_sub(cfg.corr_window)..];
            let sigma = correlation_matrix(&daily, cfg.corr_window)?;
            sigma.write(&out, used)?;
            println!("days={}", used.join(","));
            Ok(ExitCode::SUCCESS)
        }
        Command::Backcast {
            feed_dir,
            universe,
            out,
            flags,
        } => {
            let cfg = flags.load()?;
            let universe = Universe::read_csv(&universe)?;
            let output = run_backcast_dir(&feed_dir, &universe, &cfg, Vec::new(), &out)?;
            print!("{}", output.report.format_summary());
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { n, oracle, flags } => {
            let cfg = flags.load()?;
            let report = run_bench(n, &cfg.sb, &cfg.strategy)?;
            println!("n={n}");
            println!("n_step={}", cfg.sb.n_step);
            println!("restarts={}", cfg.sb.restarts);
            println!("mean_run_ms={:.3}", report.mean_run().as_secs_f64() * 1e3);
            println!("max_run_ms={:.3}", report.max_run().as_secs_f64() * 1e3);
            println!("day_writes={}", report.day_writes);
            println!("tick_writes={}", report.tick_writes);
            println!("write_ratio={:.2}", report.write_ratio());
            if oracle > 0 {
                let sweep = oracle_sweep(oracle, 16, &cfg.sb, &cfg.strategy, cfg.sb.seed)?;
                println!("oracle_instances={}", sweep.instances);
                println!("oracle_feasible={}", sweep.feasible);
                println!("oracle_optimal={}", sweep.optimal);
                println!("oracle_worst_gap={:.4}", sweep.worst_gap);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn format_spins(spins: &[i8]) -> String {
    spins
        .iter()
        .map(|&s| if s > 0 { "+1" } else { "-1" })
        .collect::<Vec<_>>()
        .join(" ")
}

fn solve_matrix(path: &Path, cfg: &RunConfig) -> Result<ExitCode> {
    let qubo = QuboProblem::read(path)?.symmetrize();
    let problem = SplitProblem::from_ising(qubo.to_ising()?);
    let sol = sb::solve(&problem, &cfg.sb)?;
    let bits = sol.spins.to_bits();
    println!("spins={}", format_spins(sol.spins.spins()));
    println!(
        "bits={}",
        bits.bits()
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!("energy={}", qubo.energy(&bits)?);
    println!("run_index={}", sol.run_index);
    eprintln!("elapsed_us={}", sol.elapsed.as_micros());
    Ok(ExitCode::SUCCESS)
}

fn solve_strategy(dev: &Path, corr: &Path, universe: &Path, cfg: &RunConfig) -> Result<ExitCode> {
    let universe = Universe::read_csv(universe)?;
    let dev = DeviationVector::read_csv(dev, &universe)?;
    let (corr, _) = CorrelationMatrix::read(corr)?;
    let params = &cfg.strategy;
    let problem = build_split(&dev, &corr, params)?;
    let sol = sb::solve(&problem, &cfg.sb)?;
    let bits = sol.spins.to_bits();
    let check = check_constraints(&bits, &dev, params.n_s);
    let obj = objective(&bits, &dev, &corr, params)?;
    println!("spins={}", format_spins(sol.spins.spins()));
    println!("energy={}", build_qubo(&dev, &corr, params)?.energy(&bits)?);
    println!("cost={}", obj.cost);
    println!("penalty={}", obj.penalty);
    println!("feasible={}", if check.passed() { "yes" } else { "no" });
    for v in &check.violations {
        println!("violation={v}");
    }
    eprintln!("elapsed_us={}", sol.elapsed.as_micros());
    match evaluate_candidate(&sol, &dev, &corr, params)? {
        Verdict::Accept { picks, .. } => {
            println!("verdict=accept");
            for p in picks {
                println!("pick={} {} {}", universe.stock(p.index).code, p.side, p.dp);
            }
            Ok(ExitCode::SUCCESS)
        }
        Verdict::AboveThreshold { .. } => {
            println!("verdict=above_threshold");
            Ok(ExitCode::from(2))
        }
        Verdict::Infeasible(_) => {
            println!("verdict=infeasible");
            Ok(ExitCode::from(2))
        }
    }
}
