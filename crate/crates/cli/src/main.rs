use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qpn_core::analysis::{
    bottleneck_table, detect_bottleneck, export_table, replicate, summary_table, sweep, sweep_table, Format,
    ReplicationSummary, SweepPlan, DEFAULT_EPSILON,
};
use qpn_core::engine::{simulate_traced, RunConfig, RunMetrics};
use qpn_core::model::{export_dot, QpnNet};
use qpn_core::parser::{load_net, parse_spec, LoadError, SpecDocument};
use qpn_core::placement::{evaluate_placements, parse_placements};

/// Queuing Petri net modeling and simulation of network services.
#[derive(Parser)]
#[command(name = "qpn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a specification and report every violation.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run replications and print a summary table.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Write the event trace of the first replication as NDJSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Replicate the service for each value of one numeric parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Path of the parameter, e.g. vnfs.cache.outputs.random[0].weight
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Classify queue stability over increasing source rates.
    Bottleneck {
        #[command(flatten)]
        run: RunArgs,
        /// Source rates in tokens per second, ascending.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        rates: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Simulate and rank candidate placements on a substrate network.
    Placement {
        #[command(flatten)]
        run: RunArgs,
        /// File with the substrate and the candidate placements.
        #[arg(long)]
        placements: PathBuf,
    },
    /// Print the generated net in Graphviz DOT.
    ExportDot {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Simulated seconds per run.
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    warmup: f64,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Spacing of queue-length samples in seconds.
    #[arg(long, default_value_t = 1.0)]
    sample_interval: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig::new(self.seed, self.horizon)
            .with_warmup(self.warmup)
            .with_sample_interval(self.sample_interval)
    }

    fn runs(&self) -> usize {
        self.runs as usize
    }
}

enum Failure {
    /// Specification violations, one per line.
    Violations(String),
    Error(String),
}

type Outcome = Result<(), Failure>;

fn err(e: impl ToString) -> Failure {
    Failure::Error(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))
}

fn document(path: &Path) -> Result<SpecDocument, Failure> {
    parse_spec(&read(path)?).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))
}

fn net_of(doc: &SpecDocument) -> Result<QpnNet, Failure> {
    load_net(doc).map_err(|e| match e {
        LoadError::Invalid(_) | LoadError::Expand(_) => Failure::Violations(e.to_string()),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Error(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(err)
        }
    }
}

fn simulate_cmd(run: &RunArgs, trace: Option<&Path>) -> Outcome {
    let doc = document(&run.spec)?;
    let net = net_of(&doc)?;
    let cfg = run.config();
    cfg.check().map_err(err)?;
    let mut runs: Vec<RunMetrics> = Vec::with_capacity(run.runs());
    if let Some(path) = trace {
        let file = fs::File::create(path).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        runs.push(simulate_traced(&net, &cfg, &mut w).map_err(err)?);
        w.flush().map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
        if run.runs() > 1 {
            let rest = replicate(&net, &cfg.clone().with_seed(cfg.seed.wrapping_add(1)), run.runs() - 1).map_err(err)?;
            runs.extend(rest);
        }
    } else {
        runs = replicate(&net, &cfg, run.runs()).map_err(err)?;
    }
    let table = summary_table(&ReplicationSummary::from_runs(&runs));
    match (run.out.as_deref(), run.format) {
        // the full per-run record, series included, only goes to files
        (Some(out), Format::Json) => {
            let rows: Value = serde_json::from_str(&export_table(&table, Format::Json)).map_err(err)?;
            let doc = json!({
                "summary": rows,
                "runs": runs.iter().map(|r| r.to_value(true)).collect::<Vec<_>>(),
            });
            let mut text = serde_json::to_string_pretty(&doc).map_err(err)?;
            text.push('\n');
            emit(Some(out), &text)
        }
        (out, f) => emit(out, &export_table(&table, f)),
    }
}

fn sweep_cmd(run: &RunArgs, param: &str, values: &[f64], epsilon: f64) -> Outcome {
    let doc = document(&run.spec)?;
    net_of(&doc)?;
    let plan = SweepPlan {
        path: param.to_string(),
        values: values.to_vec(),
        runs: run.runs(),
        base_seed: run.seed,
    };
    let rows = sweep(&plan, &doc, &run.config()).map_err(err)?;
    emit(run.out.as_deref(), &export_table(&sweep_table(&rows, epsilon), run.format))
}

fn bottleneck_cmd(run: &RunArgs, rates: &[f64], epsilon: f64) -> Outcome {
    let net = net_of(&document(&run.spec)?)?;
    let report = detect_bottleneck(&net, &run.config(), rates, epsilon).map_err(err)?;
    if let Some(p) = &report.bottleneck {
        eprintln!("bottleneck: {p}");
    }
    emit(run.out.as_deref(), &export_table(&bottleneck_table(&report), run.format))
}

fn placement_cmd(run: &RunArgs, placements: &Path) -> Outcome {
    let doc = document(&run.spec)?;
    net_of(&doc)?;
    let SpecDocument::Service(spec) = doc else {
        return Err(Failure::Error(format!(
            "{}: placement needs a `service` document",
            run.spec.display()
        )));
    };
    let file = parse_placements(&read(placements)?)
        .map_err(|e| Failure::Error(format!("{}: {e}", placements.display())))?;
    let report =
        evaluate_placements(&spec, &file.substrate, &file.placements, &run.config(), run.runs()).map_err(err)?;
    emit(run.out.as_deref(), &export_table(&report.table(), run.format))
}

fn execute(command: &Command) -> Outcome {
    match command {
        Command::Validate { spec } => {
            net_of(&document(spec)?)?;
            emit(None, "OK\n")
        }
        Command::Simulate { run, trace } => simulate_cmd(run, trace.as_deref()),
        Command::Sweep {
            run,
            param,
            values,
            epsilon,
        } => sweep_cmd(run, param, values, *epsilon),
        Command::Bottleneck { run, rates, epsilon } => bottleneck_cmd(run, rates, *epsilon),
        Command::Placement { run, placements } => placement_cmd(run, placements),
        Command::ExportDot { spec, out } => {
            let net = net_of(&document(spec)?)?;
            let dot = export_dot(&net).map_err(|v| {
                Failure::Violations(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))
            })?;
            emit(out.as_deref(), &dot)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help and version go to stdout with status 0, usage errors exit 2
            e.exit();
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violations(lines)) => {
            println!("{lines}");
            ExitCode::from(1)
        }
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
