mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slotalloc_core::allocation::{AllocatorSpec, EquityParams, Method, PriorityOrder, Rule, TieBreak};
use slotalloc_core::equilibrium::{SolverConfig, SupportOrder};

#[derive(Parser, Debug)]
#[command(name = "slotalloc", version, about = "Railway time-slot allocation, payoffs and equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Allocate slots for one set of bids.
    Allocate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        bids: PathBuf,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Payoff table for an allocation, or a probability-weighted mix of allocations.
    Payoff {
        #[arg(long)]
        scenario: PathBuf,
        /// Allocation JSON written by `allocate`.
        #[arg(long, required_unless_present = "mix", conflicts_with = "mix")]
        allocation: Option<PathBuf>,
        /// JSON list of {"allocation": path, "probability": p}; paths are relative to this file.
        #[arg(long)]
        mix: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Build the bidding game for strategy sets and solve for an equilibrium.
    Equilibrium {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        strategies: PathBuf,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Per-slot CSV (time, OD pair, demand, owner) for an allocation.
    Report {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Run the randomized invariant and oracle checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        rounds: usize,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum RuleArg {
    Priority,
    Equity,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Heuristic,
    Exact,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TieArg {
    Earlier,
    Later,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OrderArg {
    LargestFirst,
    SmallestFirst,
}

#[derive(Args, Debug)]
struct RuleArgs {
    #[arg(long, value_enum)]
    rule: RuleArg,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Comma-separated undertaking ids; defaults to declaration order.
    #[arg(long, value_delimiter = ',')]
    priority_order: Option<Vec<String>>,
    /// Re-timing tie-break between equidistant free slots.
    #[arg(long, value_enum, default_value = "later")]
    tie_break: TieArg,
    /// Starting equity band, minutes per normalized slot.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Band growth per step; defaults to one grid step over the request count.
    #[arg(long)]
    epsilon_step: Option<f64>,
    /// State limit per layer of the exact equity search.
    #[arg(long, default_value_t = 2_000_000)]
    max_states: usize,
}

impl RuleArgs {
    fn spec(&self) -> AllocatorSpec {
        AllocatorSpec {
            rule: match self.rule {
                RuleArg::Priority => Rule::Priority,
                RuleArg::Equity => Rule::Equity,
            },
            method: match self.method {
                MethodArg::Heuristic => Method::Heuristic,
                MethodArg::Exact => Method::Exact,
            },
            order: self.priority_order.clone().map(PriorityOrder),
            tie_break: match self.tie_break {
                TieArg::Earlier => TieBreak::Earlier,
                TieArg::Later => TieBreak::Later,
            },
            equity: EquityParams {
                epsilon: self.epsilon,
                epsilon_search_step: self.epsilon_step,
                max_states: self.max_states,
            },
        }
    }
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 8)]
    max_support: usize,
    #[arg(long, value_enum, default_value = "largest-first")]
    support_order: OrderArg,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    /// Largest number of joint strategies to tabulate.
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    /// Also write every equilibrium found by support enumeration.
    #[arg(long)]
    list_all: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.tolerance,
            max_support: self.max_support,
            support_order: match self.support_order {
                OrderArg::LargestFirst => SupportOrder::LargestFirst,
                OrderArg::SmallestFirst => SupportOrder::SmallestFirst,
            },
            max_iters: self.max_iters,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Allocate { scenario, bids, rule, output_dir } => {
            commands::allocate_cmd(scenario, bids, &rule.spec(), output_dir)
        }
        Command::Payoff { scenario, allocation, mix, output_dir } => {
            commands::payoff_cmd(scenario, allocation.as_deref(), mix.as_deref(), output_dir)
        }
        Command::Equilibrium { scenario, strategies, rule, solver, output_dir } => commands::equilibrium_cmd(
            scenario,
            strategies,
            &rule.spec(),
            &solver.config(),
            solver.budget,
            solver.list_all,
            output_dir,
        ),
        Command::Report { scenario, allocation, output_dir } => commands::report_cmd(scenario, allocation, output_dir),
        Command::Selftest { seed, rounds } => commands::selftest_cmd(*seed, *rounds),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
