//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a verification suite fails, 2 for usage,
//! I/O, parse and shape errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use crate::analyzer::{analyze_model, render_csv, render_text, Plans, Variant};
use crate::bench::{render_bench, run_bench, BenchOp, BenchShape};
use crate::blocks::{model_parse, trg_forward, ClipShape};
use crate::tensor::{read_t5df, write_t5df, DType, DynTensor};
use crate::verify::{render_summary, run_suite, Suite};

/// Separable 3D convolution kernels: verification, complexity analysis,
/// benchmarks and temporal residual features.
#[derive(Parser)]
#[command(name = "lightconv3d", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the fast paths against the reference convolutions on seeded random cases.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        cases: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "f64")]
        dtype: DTypeArg,
    },
    /// Parameter and multiplication counts for a model config.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        /// Clip shape C,T,H,W; defaults to the config's input.
        #[arg(long, value_parser = parse_clip)]
        input: Option<ClipShape>,
        /// Comma-separated subset of direct, wino3d, fsb, hfa.
        #[arg(long, value_delimiter = ',', default_value = "direct,wino3d,fsb,hfa")]
        variants: Vec<String>,
        /// Temporal output tile of the hybrid path.
        #[arg(long, default_value_t = 2)]
        m1: usize,
        /// Spatial output tile of the hybrid path.
        #[arg(long, default_value_t = 2)]
        m2: usize,
        /// Output tile of the 3D Winograd path.
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Median wall time of one convolution path.
    Bench {
        #[arg(long, value_enum)]
        op: OpArg,
        /// batch,C,T,H,W with optional kK, nN, mM tokens, e.g. 1,16,8,32,32,k3
        #[arg(long)]
        shape: String,
        #[arg(long, default_value_t = 5)]
        repeat: usize,
    },
    /// Apply temporal residual gradients to a T5DF clip.
    Trg {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Wino1d,
    Wino2d,
    Wino3d,
    Fsb,
    Hfa,
    Trg,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum DTypeArg {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Conv3d,
    Wino3d,
    Fsb,
    Hfa,
}

enum Outcome {
    Ok,
    Failed,
}

fn execute(command: Command, out: &mut impl Write) -> anyhow::Result<Outcome> {
    match command {
        Command::Verify { suite, cases, seed, dtype } => {
            let suites = match suite {
                SuiteArg::All => Suite::ALL.to_vec(),
                SuiteArg::Wino1d => vec![Suite::Wino1d],
                SuiteArg::Wino2d => vec![Suite::Wino2d],
                SuiteArg::Wino3d => vec![Suite::Wino3d],
                SuiteArg::Fsb => vec![Suite::Fsb],
                SuiteArg::Hfa => vec![Suite::Hfa],
                SuiteArg::Trg => vec![Suite::Trg],
            };
            let dtype = match dtype {
                DTypeArg::F32 => DType::F32,
                DTypeArg::F64 => DType::F64,
            };
            let results =
                suites.into_iter().map(|s| run_suite(s, cases as usize, seed, dtype)).collect::<Result<Vec<_>, _>>()?;
            write!(out, "{}", render_summary(&results, seed, dtype))?;
            Ok(if results.iter().all(|r| r.passed()) { Outcome::Ok } else { Outcome::Failed })
        }
        Command::Analyze { model, input, variants, m1, m2, m, format } => {
            let mut spec = model_parse(&model).with_context(|| format!("reading {}", model.display()))?;
            if let Some(shape) = input {
                spec = spec.with_input(shape)?;
            }
            let mut chosen = Vec::new();
            for v in &variants {
                let v: Variant = v.trim().parse()?;
                if !chosen.contains(&v) {
                    chosen.push(v);
                }
            }
            chosen.sort();
            if m == 0 || m1 == 0 || m2 == 0 {
                bail!("tile sizes must be positive");
            }
            let report = analyze_model(&spec, &chosen, Plans { m, m1, m2 })?;
            let text = match format {
                Format::Text => render_text(&report),
                Format::Csv => render_csv(&report),
            };
            write!(out, "{text}")?;
            Ok(Outcome::Ok)
        }
        Command::Bench { op, shape, repeat } => {
            let op = match op {
                OpArg::Conv3d => BenchOp::Conv3d,
                OpArg::Wino3d => BenchOp::Wino3d,
                OpArg::Fsb => BenchOp::Fsb,
                OpArg::Hfa => BenchOp::Hfa,
            };
            let shape: BenchShape = shape.parse()?;
            let rows = run_bench(op, &shape, repeat)?;
            write!(out, "{}", render_bench(&rows, repeat))?;
            Ok(Outcome::Ok)
        }
        Command::Trg { input, output } => {
            let clip = read_t5df(&input).with_context(|| format!("reading {}", input.display()))?;
            let result: DynTensor = match clip {
                DynTensor::F32(t) => trg_forward(&t)?.into(),
                DynTensor::F64(t) => trg_forward(&t)?.into(),
            };
            match &result {
                DynTensor::F32(t) => write_t5df(t, &output),
                DynTensor::F64(t) => write_t5df(t, &output),
            }
            .with_context(|| format!("writing {}", output.display()))?;
            let [_, _, t, _, _] = result.dims();
            writeln!(out, "wrote {} ({t} frames)", output.display())?;
            Ok(Outcome::Ok)
        }
    }
}

/// Parse `args` (including the program name) and run the subcommand,
/// writing the report to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else if text.contains("Usage:") {
                write!(err, "{text}")
            } else {
                write!(err, "{text}\n{}\n", Cli::command().render_usage())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::Failed) => 1,
        Err(e) => {
            let _ = out.flush();
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}

fn parse_clip(s: &str) -> Result<ClipShape, String> {
    let dims: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("`{t}` is not an extent")))
        .collect::<Result<_, _>>()?;
    dims.try_into().map_err(|d: Vec<usize>| format!("expected C,T,H,W, got {} values", d.len()))
}
