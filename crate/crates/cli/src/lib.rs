//! The `aql` command line and the local HTTP service behind the wizard.

mod commands;
pub mod server;
pub mod views;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aql_core::bench::{ExportFormat, Polarity};
use aql_core::Strictness;

/// Exit code for errors in the input data or tool runs.
pub const EXIT_DOMAIN: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "aql", version, about = "Query, run and benchmark Android taint-analysis tools")]
#[command(arg_required_else_help = true, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Tool configuration file.
    #[arg(long, global = true, env = "AQL_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// exact or name-only.
    #[arg(long, global = true, default_value_t = Strictness::Exact)]
    pub strictness: Strictness,
    /// Seconds granted beyond a tool's timeout before it is killed.
    #[arg(long, global = true)]
    pub timeout_slack: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse or execute AQL queries.
    #[command(subcommand)]
    Query(QueryCmd),
    /// Inspect app sidecars.
    #[command(subcommand)]
    App(AppCmd),
    /// Build, run and evaluate benchmark suites.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Edit a wizard session from the command line.
    Session {
        /// Session directory.
        dir: PathBuf,
        #[command(subcommand)]
        op: SessionCmd,
    },
    /// Serve the HTTP API for a session.
    Serve {
        #[arg(long, default_value_t = 8377)]
        port: u16,
        #[arg(long)]
        session: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum QueryCmd {
    /// Parse a query and echo it in canonical form.
    Parse { query: String },
    /// Execute a query against the configured tools and print the answer.
    Run {
        query: String,
        /// App sidecar the query refers to (repeatable).
        #[arg(long = "app", required = true)]
        apps: Vec<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AppCmd {
    /// Load a sidecar and print its identity.
    Ingest {
        sidecar: PathBuf,
        /// Fail when the .apk named in the sidecar is missing.
        #[arg(long)]
        strict: bool,
        /// Write the normalized sidecar here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the source and sink candidates of apps.
    Scan {
        #[arg(required = true)]
        sidecars: Vec<PathBuf>,
        /// Source/sink list.
        #[arg(long)]
        list: PathBuf,
    },
    /// Merge apps into one sidecar for inter-app analysis.
    Combine {
        #[arg(required = true)]
        sidecars: Vec<PathBuf>,
        #[arg(long)]
        id: String,
        #[arg(long)]
        file: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SuiteInput {
    #[arg(required = true)]
    pub sidecars: Vec<PathBuf>,
    #[arg(long)]
    pub list: PathBuf,
    /// Suite file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Mark a case negative (repeatable).
    #[arg(long = "negative")]
    pub negative: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCmd {
    /// One case per app, plus one per `--combine A+B`.
    Init {
        #[command(flatten)]
        input: SuiteInput,
        #[arg(long = "combine")]
        combine: Vec<String>,
    },
    /// One case per selected source group and sink group.
    Pairs {
        #[command(flatten)]
        input: SuiteInput,
    },
    /// Run every active case through the configured tools.
    Run {
        suite: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate stored answers, one `<case id>.xml` per case.
    Eval {
        suite: PathBuf,
        #[arg(long)]
        answers: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Convert a JSON report to another format.
    Export {
        report: PathBuf,
        #[arg(long, default_value = "json")]
        to: ExportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flows reported by several tools, as `TOOL=ANSWER.xml` arguments.
    Triage {
        #[arg(required = true)]
        answers: Vec<String>,
        #[arg(long, default_value_t = 2)]
        min: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum SessionCmd {
    /// Print apps, candidates, cases and the last report.
    Show,
    AddApp { sidecar: PathBuf },
    LoadList { list: PathBuf },
    Select {
        candidate: String,
        /// Deselect instead.
        #[arg(long)]
        off: bool,
    },
    Group {
        #[arg(required = true)]
        candidates: Vec<String>,
    },
    Split { candidate: String },
    Generate {
        #[arg(long)]
        pairs: bool,
        #[arg(long = "combine")]
        combine: Vec<String>,
    },
    Polarity { case: String, polarity: Polarity },
    Active {
        case: String,
        #[arg(action = clap::ArgAction::Set)]
        active: bool,
    },
    Run,
    Graph { case: String },
    Export {
        #[arg(long, default_value = "json")]
        to: ExportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the benchmark suite file.
    ExportBench {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DOMAIN
        }
    }
}
