//! `causepair` command-line tool.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causepair::cep::{load_benchmark, load_meta, parse_meta, write_corpus};
use causepair::eval::{roc_csv, roc_svg, PerturbKind};
use causepair::igci::BaseMeasure;
use causepair::methods::{method_names, Method};
use causepair::runner::{accuracy_csv, evaluate, parse_results_csv, results_csv, run_corpus, timings_csv, EvalOptions};
use causepair::simgen::{generate_pairs, scenario_params};
use causepair::PairSample;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("every pair failed; see {0}")]
    AllFailed(PathBuf),
    #[error(transparent)]
    Core(#[from] causepair::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_)
            | CliError::Core(causepair::Error::UnknownMethod(_))
            | CliError::Core(causepair::Error::UnknownScenario(_))
            | CliError::Core(causepair::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "causepair",
    version,
    about = "Decide cause and effect between two scalar variables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run methods over a corpus and write results.csv and timings.csv
    Run(RunArgs),
    /// Generate a synthetic corpus in the benchmark layout
    Simulate(SimulateArgs),
    /// Score a results file against pair metadata
    Evaluate(EvaluateArgs),
    /// Collate accuracy tables into report.md and interval plots
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Base {
    Uniform,
    Gaussian,
}

impl From<Base> for BaseMeasure {
    fn from(b: Base) -> Self {
        match b {
            Base::Uniform => BaseMeasure::Uniform,
            Base::Gaussian => BaseMeasure::Gaussian,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Corpus directory with pair files and pairmeta.txt
    #[arg(long, env = "CAUSEPAIR_DATA")]
    data: Option<PathBuf>,
    /// Generate the corpus in memory instead (SIM, SIM-c, SIM-ln, SIM-G);
    /// takes precedence over --data
    #[arg(long)]
    scenario: Option<String>,
    /// Pairs to generate with --scenario
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    /// Samples per generated pair
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Comma-separated method names; `--methods list` prints them
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<String>,
    /// Base measure for IGCI methods
    #[arg(long, value_enum, default_value_t = Base::Uniform)]
    base: Base,
    /// unperturbed, discretized, undiscretized or small-noise
    #[arg(long, default_value = "unperturbed")]
    perturb: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all logical cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// results.csv written by `run`
    #[arg(long)]
    results: PathBuf,
    /// Metadata file, or a corpus directory containing pairmeta.txt
    #[arg(long, env = "CAUSEPAIR_DATA")]
    meta: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Bootstrap resamples for the AUC interval
    #[arg(long, default_value_t = causepair::eval::DEFAULT_BOOTSTRAP)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep every pair in its file orientation instead of swapping every
    /// second pair of each weight group
    #[arg(long)]
    no_balance: bool,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// accuracy.csv files, optionally as LABEL=PATH
    #[arg(required = true)]
    inputs: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| CliError::Input(e.to_string()))
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    if a.methods.iter().any(|m| m == "list") {
        println!("{}", method_names().join("\n"));
        return Ok(());
    }
    let methods = a
        .methods
        .iter()
        .map(|m| Method::parse(m, a.base.into()))
        .collect::<causepair::Result<Vec<_>>>()?;
    let perturb: PerturbKind = a.perturb.parse()?;
    let pool = pool(a.jobs)?;
    let pairs: Vec<PairSample> = match (&a.data, &a.scenario) {
        (_, Some(s)) => {
            let cfg = scenario_params(s)?;
            pool.install(|| generate_pairs(&cfg, a.samples, a.pairs, a.seed))?
        }
        (Some(d), None) => load_benchmark(d)?,
        (None, None) => return Err(CliError::Usage("give --data (or CAUSEPAIR_DATA) or --scenario".into())),
    };
    let rows = pool.install(|| run_corpus(&pairs, &methods, perturb, a.seed));
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("results.csv"), results_csv(&rows))?;
    let timings = a.out.join("timings.csv");
    fs::write(&timings, timings_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("warning: {} {}: {}", r.id, r.method, r.error.as_deref().unwrap_or(""));
    }
    eprintln!("{} rows, {failed} failed, written to {}", rows.len(), a.out.display());
    if !rows.is_empty() && failed == rows.len() {
        return Err(CliError::AllFailed(timings));
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let cfg = scenario_params(&a.scenario)?;
    let pairs = pool(a.jobs)?.install(|| generate_pairs(&cfg, a.samples, a.pairs, a.seed))?;
    write_corpus(&a.out, &pairs)?;
    eprintln!(
        "{} pairs of {} samples written to {}",
        pairs.len(),
        a.samples,
        a.out.display()
    );
    Ok(())
}

fn read_meta(path: &Path) -> Result<Vec<causepair::cep::PairMeta>, CliError> {
    if path.is_dir() {
        Ok(load_meta(path)?)
    } else {
        let text = fs::read_to_string(path)?;
        Ok(parse_meta(&text, path)?)
    }
}

/// Method names are safe file stems apart from path separators.
fn file_stem(method: &str) -> String {
    method.replace(['/', '\\'], "_")
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.results)?;
    let rows = parse_results_csv(&text, &a.results)?;
    let meta = read_meta(&a.meta)?;
    let opts = EvalOptions {
        balance: !a.no_balance,
        bootstrap: a.bootstrap,
        seed: a.seed,
    };
    let reports = pool(a.jobs)?.install(|| evaluate(&rows, &meta, &opts))?;
    let roc_dir = a.out.join("roc");
    fs::create_dir_all(&roc_dir)?;
    fs::write(a.out.join("accuracy.csv"), accuracy_csv(&reports))?;
    for r in &reports {
        match &r.roc {
            Some(roc) => {
                let stem = file_stem(&r.method);
                fs::write(roc_dir.join(format!("{stem}.csv")), roc_csv(&roc.curve))?;
                let title = format!("{} (AUC {:.3})", r.method, roc.auc);
                fs::write(roc_dir.join(format!("{stem}.svg")), roc_svg(&roc.curve, &title))?;
            }
            None => eprintln!("warning: {}: one truth class only, no ROC curve", r.method),
        }
        eprintln!(
            "{}: accuracy {:.3} [{:.3}, {:.3}]{}",
            r.method,
            r.accuracy.accuracy,
            r.accuracy.ci95.0,
            r.accuracy.ci95.1,
            r.roc
                .as_ref()
                .map_or(String::new(), |roc| format!(", AUC {:.3}", roc.auc))
        );
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<(), CliError> {
    let mut entries = Vec::new();
    for input in &a.inputs {
        let (label, path) = report::split_input(input);
        entries.extend(report::read_accuracy(&label, &path)?);
    }
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("report.md"), report::markdown(&entries))?;
    fs::write(a.out.join("accuracy.svg"), report::accuracy_svg(&entries))?;
    fs::write(a.out.join("auc.svg"), report::auc_svg(&entries))?;
    eprintln!("{} rows written to {}", entries.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
