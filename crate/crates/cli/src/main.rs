//! Command-line driver: single-point evaluation, SNR sweeps, simulation
//! verification.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use harqmac_cli::config::ConfigFile;
use harqmac_cli::evaluate::{analytic_point, verify_point, PointRequest};
use harqmac_cli::sweep::{run_sweep, SweepConfig};
use harqmac_cli::verify::run_verify;
use harqmac_cli::db_to_linear;
use harqmac_core::capacity::{ewfc_capacity, PowerConvention};
use harqmac_core::error::Error;
use harqmac_core::policies::PolicyKind;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "harqmac",
    version,
    about = "Throughput of power-controlled repetition protocols on the block-fading MAC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Standard,
    Paper,
}

impl From<Convention> for PowerConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Standard => PowerConvention::Standard,
            Convention::Paper => PowerConvention::Paper,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ergodic water-filling capacity at a per-user SNR.
    Capacity {
        #[arg(long, short = 'k', default_value_t = 2)]
        users: usize,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long, value_enum, default_value_t = Convention::Standard)]
        convention: Convention,
    },
    /// Optimized operating point of one policy, optionally verified by
    /// simulation.
    Policy {
        #[arg(long)]
        policy: String,
        #[arg(long, short = 'k', default_value_t = 2)]
        users: usize,
        #[arg(long, short = 'm')]
        attempts: Option<usize>,
        #[arg(long, short = 'l', default_value_t = 3)]
        levels: usize,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        /// Run the slot simulator and print an AGREE/DISAGREE verdict.
        #[arg(long)]
        simulate: bool,
        #[arg(long, default_value_t = 1_000_000)]
        slots: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Normalized-throughput sweep over SNR, written as CSV.
    Sweep(SweepArgs),
    /// Analytic-versus-simulation agreement suite over all policies.
    Verify {
        #[arg(long, default_value_t = 400_000)]
        slots: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Configuration file (key = value, optional [policy] sections);
    /// explicit flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Comma-separated policy list.
    #[arg(long)]
    policies: Option<String>,
    #[arg(long, short = 'k')]
    users: Option<usize>,
    #[arg(long, short = 'm')]
    attempts: Option<usize>,
    #[arg(long, short = 'l')]
    levels: Option<usize>,
    #[arg(long)]
    simulate: bool,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    convention: Option<Convention>,
    /// Slots per objective evaluation of the INR level optimizer.
    #[arg(long)]
    inr_budget: Option<u64>,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Argument(_) | Error::Config(_) | Error::Domain(_) | Error::PowerRange { .. } => {
                    EXIT_USAGE
                }
                Error::NonFiniteObjective { .. } | Error::Model(_) => EXIT_NUMERICAL,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Capacity { users, snr_db, convention } => {
            let pbar = db_to_linear(snr_db);
            let total = users as f64 * pbar;
            let sol = ewfc_capacity(users, total, convention.into())?;
            println!("users        {users}");
            println!("convention   {}", PowerConvention::from(convention).name());
            println!("snr_db       {snr_db}");
            println!("pbar         {pbar}  (per user)");
            println!("avg_power    {}  (total)", sol.average_power);
            println!("water_level  {}", sol.water_level);
            println!(
                "capacity     {} nats/use  ({} bits/use)",
                sol.capacity,
                sol.capacity / std::f64::consts::LN_2
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Policy { policy, users, attempts, levels, snr_db, simulate, slots, seed } => {
            let kind = PolicyKind::parse(&policy)?;
            let req = PointRequest {
                policy: kind,
                users,
                attempts: attempts
                    .or(kind.required_attempts())
                    .unwrap_or(if kind == PolicyKind::CdTdmaInr { 2 } else { 1 }),
                levels: match kind {
                    PolicyKind::MultilevelCdTdma | PolicyKind::CdTdmaInr => levels,
                    _ => 1,
                },
                pbar: db_to_linear(snr_db),
                seed,
                inr_budget: 100_000,
                inr_eval_slots: slots,
            };
            let outcome = analytic_point(&req)?;
            let point = &outcome.point;
            println!("policy       {}", kind.name());
            println!("users        {}", req.users);
            println!("attempts     {}", req.attempts);
            println!("feedback     {}", req.feedback_size());
            println!("snr_db       {snr_db}");
            println!("pbar         {}  (per user)", req.pbar);
            println!(
                "throughput   {} nats/use  ({} bits/use)",
                point.throughput,
                point.throughput / std::f64::consts::LN_2
            );
            println!("normalized   {}", point.normalized);
            let params = point
                .params
                .describe()
                .into_iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            println!("params       {params}");
            if let Some(reference) = &outcome.inr_reference {
                println!(
                    "reference    {} ± {} (independent single-user run, 3σ)",
                    reference.throughput_est, reference.ci_halfwidth_throughput
                );
            }
            if simulate {
                let verdict = verify_point(&req, &outcome, slots)?;
                println!(
                    "sim_thr      {} ± {} (3σ)",
                    verdict.report.throughput_est, verdict.report.ci_halfwidth_throughput
                );
                println!(
                    "sim_power    {} ± {} (per user, 3σ)",
                    verdict.report.power_est, verdict.report.ci_halfwidth_power
                );
                println!("renewals     {}", verdict.report.renewals);
                println!("verdict      {}", if verdict.agrees() { "AGREE" } else { "DISAGREE" });
                if !verdict.agrees() {
                    return Ok(ExitCode::from(EXIT_NUMERICAL));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let mut config = SweepConfig::default();
            if let Some(path) = &args.config {
                let file = ConfigFile::load(path).map_err(Error::Config)?;
                config.apply_file(&file)?;
            }
            if let Some(v) = args.from {
                config.snr_from = v;
            }
            if let Some(v) = args.to {
                config.snr_to = v;
            }
            if let Some(v) = args.step {
                config.snr_step = v;
            }
            if let Some(v) = &args.policies {
                config.policies = v
                    .split(',')
                    .map(|p| PolicyKind::parse(p.trim()))
                    .collect::<Result<Vec<_>, _>>()?;
            }
            if let Some(v) = args.users {
                config.users = v;
            }
            if let Some(v) = args.attempts {
                config.attempts = v;
            }
            if let Some(v) = args.levels {
                config.levels = v;
            }
            if args.simulate {
                config.simulate = true;
            }
            if let Some(v) = args.slots {
                config.slots = v;
            }
            if let Some(v) = args.seed {
                config.seed = v;
            }
            if let Some(v) = args.convention {
                config.convention = v.into();
            }
            if let Some(v) = args.inr_budget {
                config.inr_budget = v;
            }
            if let Some(v) = args.output {
                config.output = v;
            }
            let csv = run_sweep(&config)?;
            std::fs::write(&config.output, csv).map_err(|e| {
                Error::Config(format!("cannot write {}: {e}", config.output.display()))
            })?;
            eprintln!("wrote {}", config.output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { slots, seed } => {
            let outcome = run_verify(slots, seed, &[-10.0, 0.0, 10.0, 20.0])?;
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.disagreements > 0 {
                eprintln!("{} disagreement(s)", outcome.disagreements);
                Ok(ExitCode::from(EXIT_NUMERICAL))
            } else {
                println!("all points agree");
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}
