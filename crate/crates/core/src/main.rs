use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pbo_rnn::cells::{glorot_orthogonal_init, CellKind, CellSpec, Network};
use pbo_rnn::data::{compute_rv, generate_synthetic, load_csv, write_rv_csv, PriceColumn, Split};
use pbo_rnn::harness::{
    emit_results, long_memory_acceptance, run_benchmark_on, run_cell, train_trial, AcceptanceConfig, CellPlan, ExperimentConfig, Format,
    Hyperparams, ResultTable,
};
use pbo_rnn::optim::TrainerKind;
use pbo_rnn::base::{Objective, SequenceObjective};
use pbo_rnn::Error;

#[derive(Parser)]
#[command(name = "pbo-rnn", version, about = "Population-based training of recurrent volatility forecasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic realized-variance CSV
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate minute prices or returns into realized variance bars
    Rv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 30)]
        bar_minutes: u32,
        #[arg(long, default_value = "auto")]
        column: String,
    },
    /// Train one architecture with one trainer and explicit hyperparameters
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        arch: CellKind,
        #[arg(long)]
        trainer: TrainerKind,
        /// `name=value;...`, e.g. `hidden_dim=10;learning_rate=0.01;noise_std=0.05`
        #[arg(long)]
        params: Hyperparams,
        /// Passes for this run; the config budget when absent
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Random search for one (architecture, trainer) cell
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        arch: CellKind,
        #[arg(long)]
        trainer: TrainerKind,
    },
    /// Every cell of the config
    Benchmark {
        #[command(flatten)]
        common: Common,
    },
    /// Long-memory comparison of truncated SGD and ES
    Accept {
        #[command(flatten)]
        common: Common,
        /// Passes per trainer; overrides the config
        #[arg(long)]
        budget: Option<u64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => 2,
        Error::BudgetParity(_) => 3,
        _ => 1,
    }
}

fn init_workers(n: Option<usize>) -> pbo_rnn::Result<()> {
    if let Some(n) = n {
        let built = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        // a second request for the same size is harmless
        if built.is_err() && rayon::current_num_threads() != n {
            return Err(Error::InvalidConfig(format!("worker pool already started with {} threads", rayon::current_num_threads())));
        }
    }
    Ok(())
}

fn experiment(common: &Common) -> pbo_rnn::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
        cfg.synth.seed = seed;
    }
    Ok(cfg)
}

fn output(path: Option<&Path>) -> pbo_rnn::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_table(common: &Common, table: &ResultTable) -> pbo_rnn::Result<()> {
    let mut out = output(common.out.as_deref())?;
    emit_results(table, common.format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> pbo_rnn::Result<u8> {
    match cli.command {
        Command::Synth { common } => {
            init_workers(common.workers)?;
            let cfg = experiment(&common)?;
            let mut out = output(common.out.as_deref())?;
            write_rv_csv(&mut out, &generate_synthetic(&cfg.synth)?)?;
            out.flush()?;
        }
        Command::Rv {
            common,
            input,
            bar_minutes,
            column,
        } => {
            init_workers(common.workers)?;
            let column = match column.to_ascii_lowercase().as_str() {
                "auto" => PriceColumn::Auto,
                "price" => PriceColumn::Price,
                "return" => PriceColumn::Return,
                other => return Err(Error::InvalidConfig(format!("unknown column {other:?}"))),
            };
            let returns = load_csv(BufReader::new(File::open(input)?), column)?;
            let mut out = output(common.out.as_deref())?;
            write_rv_csv(&mut out, &compute_rv(&returns, bar_minutes)?)?;
            out.flush()?;
        }
        Command::Train {
            common,
            arch,
            trainer,
            params,
            budget,
        } => {
            init_workers(common.workers)?;
            let cfg = experiment(&common)?;
            if trainer == TrainerKind::Sgd && arch != CellKind::Lstm {
                return Err(Error::Unsupported(format!("gradient training of {}", arch.label())));
            }
            let data = cfg.load_dataset()?;
            let budget = budget.unwrap_or(cfg.budget);
            let plan = CellPlan {
                architecture: arch,
                trainer,
                search_iterations: 1,
                trial_budget: budget,
                population: cfg.population,
                truncation_length: cfg.truncation_length,
                sgd_patience: cfg.sgd_patience,
            };
            let (theta, val, passes) = train_trial(&plan, &params, &data, cfg.master_seed)?;
            let net = Network::new(CellSpec::of_kind(arch, data.n_features, params.get("hidden_dim")? as usize, 1))?;
            let test = SequenceObjective::new(&data, &net, Split::Test)?.loss(&theta);
            let initial = SequenceObjective::new(&data, &net, Split::Test)?.loss(&glorot_orthogonal_init(&net, cfg.master_seed));
            let report = serde_json::json!({
                "architecture": arch,
                "trainer": trainer,
                "hyperparameters": params,
                "forward_passes": passes,
                "val_mse": val,
                "test_mse": test,
                "initial_test_mse": initial,
                "theta": theta,
            });
            let mut out = output(common.out.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
            out.flush()?;
        }
        Command::Search { common, arch, trainer } => {
            init_workers(common.workers)?;
            let mut cfg = experiment(&common)?;
            cfg.architectures = vec![arch];
            cfg.trainers = vec![trainer];
            cfg.normalise = false;
            let plans = cfg.plans()?;
            let data = cfg.load_dataset()?;
            let cell = run_cell(&cfg, &plans[0], pbo_rnn::harness::cell_id(&plans[0]), &data)?;
            let table = ResultTable { cells: vec![cell] };
            table.check_budgets()?;
            write_table(&common, &table)?;
        }
        Command::Benchmark { common } => {
            init_workers(common.workers)?;
            let cfg = experiment(&common)?;
            let plans = cfg.plans()?;
            let data = cfg.load_dataset()?;
            write_table(&common, &run_benchmark_on(&cfg, &plans, &data)?)?;
        }
        Command::Accept { common, budget } => {
            init_workers(common.workers)?;
            let mut cfg = match &common.config {
                Some(p) => toml::from_str::<AcceptanceConfig>(&std::fs::read_to_string(p)?).map_err(|e| Error::InvalidConfig(e.to_string()))?,
                None => AcceptanceConfig::default(),
            };
            if let Some(seed) = common.seed {
                cfg.seed = seed;
                cfg.synth.seed = seed;
            }
            if let Some(b) = budget {
                cfg.budget = b;
            }
            let report = long_memory_acceptance(&cfg)?;
            let mut out = output(common.out.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
            out.flush()?;
            if report.pass == Some(false) {
                return Ok(4);
            }
        }
    }
    Ok(0)
}

fn status(result: pbo_rnn::Result<u8>) -> u8 {
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    ExitCode::from(status(run(Cli::parse())))
}
