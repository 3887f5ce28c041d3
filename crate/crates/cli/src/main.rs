use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qresize::bench::{generate_benchmark_with_instance, parse_bits, BenchOptions, Family};
use qresize::dependency::{CostMode, CostSpec};
use qresize::pipeline::{error_json, exit_code, run_pipeline, write_report, CouplingSpec, Flow, PipelineConfig};
use qresize::qasm::emit_qasm;
use qresize::ResizeError;

/// Reduce the qubit count of OpenQASM 2 circuits by measuring, resetting and
/// reusing qubits.
#[derive(Parser, Debug)]
#[command(name = "resize", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a benchmark circuit as QASM.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FlowArg {
    Dependency,
    Unitary,
    Auto,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CostArg {
    MaxReuse,
    MinDepth,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Input OpenQASM 2 file.
    #[arg(long)]
    input: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "auto")]
    flow: FlowArg,

    #[arg(long, value_enum, default_value = "max-reuse")]
    cost: CostArg,

    /// all, linear, t, or file:EDGES.json
    #[arg(long, default_value = "all")]
    coupling: String,

    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,

    #[arg(long, default_value_t = 1e-8)]
    synth_epsilon: f64,

    #[arg(long, default_value_t = 4.0)]
    mmr_weight: f64,

    #[arg(long, default_value_t = 0.05)]
    depth_slack: f64,

    /// Resets emitted per mid-circuit measurement (1 to 3).
    #[arg(long, default_value_t = 1)]
    resets: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output QASM; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// bv, dj, qaoa-ring or ghz.
    #[arg(long)]
    family: String,

    #[arg(long)]
    n: usize,

    /// BV secret over the data wires, wire 0 first.
    #[arg(long)]
    secret: Option<String>,

    /// DJ balanced-function mask over the data wires.
    #[arg(long)]
    mask: Option<String>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_text(path: Option<&PathBuf>, text: &str) -> Result<(), ResizeError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| ResizeError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: &RunArgs) -> Result<(), ResizeError> {
    let input = args
        .input
        .as_ref()
        .ok_or_else(|| ResizeError::InvalidArgument("--input is required".into()))?;
    let text = std::fs::read_to_string(input).map_err(|e| ResizeError::Io(format!("{}: {e}", input.display())))?;
    let cfg = PipelineConfig {
        flow: match args.flow {
            FlowArg::Dependency => Flow::Dependency,
            FlowArg::Unitary => Flow::Unitary,
            FlowArg::Auto => Flow::Auto,
        },
        cost: CostSpec {
            mode: match args.cost {
                CostArg::MaxReuse => CostMode::MaximalReuse,
                CostArg::MinDepth => CostMode::MinimalDepth,
            },
            mmr_weight: args.mmr_weight,
            depth_slack: args.depth_slack,
        },
        coupling: args.coupling.parse::<CouplingSpec>()?,
        epsilon: args.epsilon,
        synth_epsilon: args.synth_epsilon,
        resets: args.resets,
        seed: args.seed,
    };
    let (qasm, report) = run_pipeline(&text, &cfg)?;
    write_text(args.out.as_ref(), &qasm)?;
    if let Some(path) = &args.report {
        write_report(&report, path)?;
    }
    Ok(())
}

fn gen(args: &GenArgs) -> Result<(), ResizeError> {
    let family: Family = args.family.parse()?;
    let opts = BenchOptions {
        secret: args.secret.as_deref().map(parse_bits).transpose()?,
        mask: args.mask.as_deref().map(parse_bits).transpose()?,
        seed: args.seed,
    };
    let (circuit, instance) = generate_benchmark_with_instance(family, args.n, &opts)?;
    write_text(args.out.as_ref(), &emit_qasm(&circuit, 1))?;
    eprintln!("{}", serde_json::to_string(&instance).expect("instance serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::Gen(args)) => gen(args),
        None => run(&cli.run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let body = error_json(&err);
            eprint!("{body}");
            if let Some(path) = cli.run.report.as_ref().filter(|_| cli.command.is_none()) {
                let _ = std::fs::write(path, &body);
            }
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
