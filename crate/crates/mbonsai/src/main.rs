//! Benchmark and inspection CLI for the compact trie library.
//!
//! Verbs: `build | search | traverse | disptest`. Reports go to stdout as
//! JSON (default) or CSV (`--csv`). Exit codes: 0 ok, 1 usage, 2 input
//! parse, 3 capacity.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use mbonsai::bench::{
    build_trie, disptest, resident_set_bytes, run_search, run_traverse, sample_queries,
    CapacitySpec, RunReport, TraverseMethod,
};
use mbonsai::darray::Repr;
use mbonsai::ingest::{Dataset, Format, LineAlphabet};
use mbonsai::Error;

#[derive(Parser)]
#[command(name = "mbonsai", version, about = "Compact dynamic trie benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a trie from a dataset and report its space accounting
    Build(BuildArgs),
    /// Build a trie, then time successful searches over query strings
    Search(SearchArgs),
    /// Build a trie, then enumerate it
    Traverse(TraverseArgs),
    /// Displacement statistics of a bare quotienting table under uniform keys
    Disptest(DisptestArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input dataset path
    #[arg(long)]
    input: PathBuf,
    /// Dataset format: fimi | fastq | lines
    #[arg(long, value_parser = Format::from_str)]
    format: Format,
    /// Displacement representation: gamma | recursive
    #[arg(long, default_value = "recursive", value_parser = Repr::from_str)]
    variant: Repr,
    /// Fixed capacity in slots (overrides --alpha and --beta)
    #[arg(long)]
    capacity: Option<u64>,
    /// Target load factor; sizes the table after a counting pass
    #[arg(long)]
    alpha: Option<f64>,
    /// Auto-resize slack; the trie then tracks its node count
    #[arg(long)]
    beta: Option<f64>,
    /// Seed for all randomized choices (reports are reproducible under it)
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Emit CSV instead of JSON
    #[arg(long)]
    csv: bool,
    /// Sort the items of each FIMI transaction before insertion
    #[arg(long)]
    sort_items: bool,
    /// Declared alphabet for --format lines (default: raw bytes)
    #[arg(long)]
    alphabet: Option<String>,
    /// Sample the resident set size into the report
    #[arg(long)]
    rss: bool,
}

impl DataArgs {
    fn open(&self) -> Result<Dataset, Error> {
        let alphabet = match &self.alphabet {
            Some(a) => LineAlphabet::declared(a),
            None => LineAlphabet::Bytes,
        };
        let mut ds = Dataset::open(&self.input, self.format, alphabet)?;
        ds.sort_items = self.sort_items;
        Ok(ds)
    }

    fn capacity_spec(&self) -> CapacitySpec {
        if let Some(m) = self.capacity {
            CapacitySpec::Fixed(m)
        } else if let Some(a) = self.alpha {
            CapacitySpec::Alpha(a)
        } else if let Some(b) = self.beta {
            CapacitySpec::Beta(b)
        } else {
            CapacitySpec::Alpha(0.8)
        }
    }

    fn base_report(&self, command: &str, ds: &Dataset) -> RunReport {
        let mut r = RunReport::new(command, self.seed);
        r.dataset = Some(self.input.display().to_string());
        r.format = Some(ds.format.name().to_string());
        r.strings = Some(ds.n_strings());
        r
    }

    fn emit(&self, mut report: RunReport) {
        if self.rss {
            report.rss_bytes = resident_set_bytes();
        }
        print_report(&report, self.csv);
    }
}

/// Write the report to stdout, tolerating a closed pipe (e.g. `| head`).
fn print_report(report: &RunReport, csv: bool) {
    use std::io::Write;
    let text = if csv {
        report.to_csv()
    } else {
        report.to_json() + "\n"
    };
    let mut out = std::io::stdout();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Query file (same format as the input)
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Sample this fraction of the input strings as queries
    #[arg(long, default_value_t = 0.1)]
    sample: f64,
}

#[derive(Args)]
struct TraverseArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Traversal method: simple | naive | sorted
    #[arg(long, default_value = "simple", value_parser = TraverseMethod::from_str)]
    method: TraverseMethod,
}

#[derive(Args)]
struct DisptestArgs {
    /// Table capacity in slots
    #[arg(long, default_value_t = 1 << 20)]
    capacity: u64,
    /// Load factor to fill to
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    /// Independent trials to average over
    #[arg(long, default_value_t = 5)]
    trials: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    csv: bool,
}

fn cmd_build(args: &BuildArgs) -> Result<(), Error> {
    let ds = args.data.open()?;
    let built = build_trie(
        &ds,
        args.data.variant,
        args.data.capacity_spec(),
        args.data.seed,
    )?;
    let mut report = args.data.base_report("build", &ds).with_trie(&built.trie);
    report.timings.build_seconds = Some(built.build_seconds);
    args.data.emit(report);
    Ok(())
}

fn cmd_search(args: &SearchArgs) -> Result<(), Error> {
    let ds = args.data.open()?;
    let built = build_trie(
        &ds,
        args.data.variant,
        args.data.capacity_spec(),
        args.data.seed,
    )?;
    let queries = match &args.queries {
        Some(path) => {
            let alphabet = match &args.data.alphabet {
                Some(a) => LineAlphabet::declared(a),
                None => LineAlphabet::Bytes,
            };
            let qds = Dataset::open(path, args.data.format, alphabet)?;
            let mut all = Vec::new();
            for rec in qds.stream()? {
                all.push(rec?);
            }
            all
        }
        None => sample_queries(&ds, args.sample, args.data.seed)?,
    };
    let stats = run_search(&built.trie, &queries);
    let mut report = args.data.base_report("search", &ds).with_trie(&built.trie);
    report.timings.build_seconds = Some(built.build_seconds);
    report.timings.search_seconds = Some(stats.seconds);
    report.search = Some(stats);
    args.data.emit(report);
    Ok(())
}

fn cmd_traverse(args: &TraverseArgs) -> Result<(), Error> {
    let ds = args.data.open()?;
    let built = build_trie(
        &ds,
        args.data.variant,
        args.data.capacity_spec(),
        args.data.seed,
    )?;
    let stats = run_traverse(&built.trie, args.method)?;
    let mut report = args
        .data
        .base_report("traverse", &ds)
        .with_trie(&built.trie);
    report.timings.build_seconds = Some(built.build_seconds);
    report.timings.traverse_seconds = Some(stats.seconds);
    report.traverse = Some(stats);
    args.data.emit(report);
    Ok(())
}

fn cmd_disptest(args: &DisptestArgs) -> Result<(), Error> {
    let stats = disptest(args.capacity, args.alpha, args.trials, args.seed)?;
    let mut report = RunReport::new("disptest", args.seed);
    report.capacity = Some(stats.capacity);
    report.disptest = Some(stats);
    print_report(&report, args.csv);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let result = match &cli.cmd {
        Cmd::Build(a) => cmd_build(a),
        Cmd::Search(a) => cmd_search(a),
        Cmd::Traverse(a) => cmd_traverse(a),
        Cmd::Disptest(a) => cmd_disptest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Parse { .. } => 2,
                Error::Capacity(_) => 3,
                _ => 1,
            })
        }
    }
}
