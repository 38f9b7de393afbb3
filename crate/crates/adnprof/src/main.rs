use std::path::PathBuf;
use std::process::ExitCode;

use adnprof::commands::{
    cmd_analyze, cmd_calibrate, cmd_compare, cmd_report, AnalyzeArgs, CliError, CompareArgs, ReportArgs,
};
use adnprof::core::report::{ReportFormat, ReportKind, ReportSpec, SortKey};
use adnprof::instrument::Levels;
use adnprof::run::{cmd_run, RunPlan};
use adnprof::scenario::load_scenario;
use adnprof::testbed::{entity_main_from_env, SpawnMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Profiles a distributed control-plane testbed and reports where its
/// time goes.
///
/// Exit codes: 0 ok, 2 configuration error, 3 runtime failure.
#[derive(Parser)]
#[command(name = "adnprof", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write a run directory of dumps.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated subset of coarse,function,line,thread,sample.
        #[arg(long, default_value = "coarse,function,line,thread")]
        levels: String,
        #[arg(long, default_value = "adnprof-run")]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run entities as threads of this process instead of processes.
        #[arg(long)]
        threads: bool,
    },
    /// Merge, classify and rank hotspots; writes analysis.json.
    Analyze {
        /// Run directory, dump, merged profile or analysis file.
        input: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Minimum category share (percent) for a finding.
        #[arg(long, default_value_t = 5.0)]
        threshold: f64,
        /// Output file, `-` for stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one report.
    Report {
        /// Run directory, dump, merged profile, analysis file or structured report.
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Function)]
        kind: Kind,
        #[command(flatten)]
        render: RenderArgs,
        /// Function whose regions a line table lists.
        #[arg(long)]
        scope: Option<String>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        threshold: f64,
    },
    /// Diff two runs of the same scenario.
    Compare {
        before: PathBuf,
        after: PathBuf,
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Growth in seconds above which a category is a regression.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Measure per-event profiler cost.
    Calibrate {
        #[arg(long, default_value = "calibration.json")]
        out: PathBuf,
    },
    #[command(hide = true)]
    Entity,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    sort: Option<String>,
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Output file, `-` for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Function,
    Line,
    Thread,
    Coarse,
    Hotspot,
    Compare,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Structured,
}

impl RenderArgs {
    fn spec(&self, kind: ReportKind) -> Result<ReportSpec, CliError> {
        let mut spec = ReportSpec::new(kind).format(match self.format {
            Format::Text => ReportFormat::Text,
            Format::Csv => ReportFormat::Csv,
            Format::Structured => ReportFormat::Structured,
        });
        if let Some(s) = &self.sort {
            spec = spec.sorted_by(s.parse::<SortKey>()?);
        }
        if let Some(n) = self.top {
            spec = spec.top(n);
        }
        Ok(spec)
    }
}

fn report_kind(k: Kind) -> ReportKind {
    match k {
        Kind::Function => ReportKind::FunctionTable,
        Kind::Line => ReportKind::LineTable,
        Kind::Thread => ReportKind::ThreadTable,
        Kind::Coarse => ReportKind::CoarseTable,
        Kind::Hotspot => ReportKind::HotspotReport,
        Kind::Compare => ReportKind::CompareReport,
    }
}

fn announce(path: Option<PathBuf>) {
    if let Some(p) = path {
        println!("{}", p.display());
    }
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Run {
            scenario,
            levels,
            out,
            seed,
            threads,
        } => {
            let mut config = load_scenario(&scenario)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let levels = Levels::parse(&levels).map_err(|e| CliError::Config(e.to_string()))?;
            let mode = if threads {
                SpawnMode::Thread
            } else {
                let exe = std::env::current_exe().map_err(|e| CliError::Runtime(e.to_string()))?;
                SpawnMode::Process(exe)
            };
            cmd_run(&RunPlan {
                scenario: config,
                out: out.clone(),
                levels,
                mode,
            })?;
            println!("{}", out.display());
        }
        Cmd::Analyze {
            input,
            rules,
            threshold,
            out,
        } => {
            let (_, path) = cmd_analyze(&AnalyzeArgs {
                input,
                rules,
                threshold_pct: threshold,
                out,
            })?;
            announce(path);
        }
        Cmd::Report {
            input,
            kind,
            render,
            scope,
            rules,
            threshold,
        } => {
            let (_, path) = cmd_report(&ReportArgs {
                input,
                spec: render.spec(report_kind(kind))?,
                scope,
                rules,
                threshold_pct: threshold,
                out: render.out.clone(),
            })?;
            announce(path);
        }
        Cmd::Compare {
            before,
            after,
            render,
            rules,
            epsilon,
        } => {
            let (_, path) = cmd_compare(&CompareArgs {
                before,
                after,
                rules,
                epsilon_s: epsilon,
                spec: render.spec(ReportKind::CompareReport)?,
                out: render.out.clone(),
            })?;
            announce(path);
        }
        Cmd::Calibrate { out } => {
            let rec = cmd_calibrate(&out)?;
            log::info!("pair cost {:.0} ns", rec.calibration.pair_cost_ns);
            println!("{}", out.display());
        }
        Cmd::Entity => {
            entity_main_from_env().map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adnprof: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
