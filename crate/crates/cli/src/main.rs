//! `dipcheck`: decide differential privacy of DiPWhile programs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dip_cli::{corpus, run, run_file, CheckConfig, Expected, Mode, Report, RunOptions, Status, DEFAULT_PRECISION, EXIT_INPUT_ERROR};

/// Write to stdout; a closed pipe (e.g. `| head`) ends the process quietly.
fn out(args: std::fmt::Arguments) {
    use std::io::Write;
    if let Err(e) = std::io::stdout().write_fmt(args) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("cannot write to stdout: {e}");
        std::process::exit(EXIT_INPUT_ERROR);
    }
}

macro_rules! outln {
    ($($t:tt)*) => { out(format_args!("{}\n", format_args!($($t)*))) };
}

#[derive(Parser)]
#[command(name = "dipcheck", version, about = "Exact differential-privacy checker for DiPWhile programs")]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Starting precision in bits of certified sign decisions, used when a
    /// config does not set caps.precision_bits.
    #[arg(long, global = true, env = "DIPCHECK_PRECISION", default_value_t = DEFAULT_PRECISION)]
    precision: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Decide the privacy question of a config file.
    Check {
        config: PathBuf,
        /// Write the JSON report here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Compare Monte-Carlo estimates with the exact distributions.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// List the bundled example programs, or check them all with --run.
    Corpus {
        #[arg(long)]
        run: bool,
        /// Restrict to these entries.
        names: Vec<String>,
    },
    /// Print a program after desugaring.
    Desugar { program: PathBuf },
}

fn emit(report: &Report, output: Option<PathBuf>, format: Format) -> ExitCode {
    eprintln!("{}", report.summary());
    let text = match format {
        Format::Json => report.to_json(),
        Format::Text => report.summary(),
    };
    match output {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text + "\n") {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_INPUT_ERROR as u8);
            }
        }
        None => outln!("{text}"),
    }
    ExitCode::from(report.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot size the worker pool: {e}");
            return ExitCode::from(EXIT_INPUT_ERROR as u8);
        }
    }
    let opts = RunOptions { default_precision: cli.precision };
    match cli.command {
        Command::Check { config, output, format } => emit(&run_file(&config, &opts), output, format),
        Command::Oracle { config, samples, seed, output, format } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return emit(&Report::error(None, format!("cannot read {}: {e}", config.display())), output, format),
            };
            let mut cfg = match CheckConfig::from_json(&text) {
                Ok(c) => c,
                Err(e) => return emit(&Report::error(None, e.to_string()), output, format),
            };
            cfg.mode = Mode::Oracle;
            cfg.oracle.samples = samples.unwrap_or(cfg.oracle.samples);
            cfg.oracle.seed = seed.unwrap_or(cfg.oracle.seed);
            let path = config.parent().unwrap_or(std::path::Path::new(".")).join(&cfg.program);
            let report = match std::fs::read_to_string(&path) {
                Ok(src) => run(&cfg, &src, &opts),
                Err(e) => Report::error(Some(cfg), format!("cannot read {}: {e}", path.display())),
            };
            emit(&report, output, format)
        }
        Command::Corpus { run: execute, names } => {
            let entries: Vec<_> = corpus().into_iter().filter(|e| names.is_empty() || names.contains(&e.name)).collect();
            if !execute {
                for e in &entries {
                    outln!("{:<14} {:<10} {}", e.name, format!("{:?}", e.expected).to_lowercase(), e.note);
                }
                return ExitCode::SUCCESS;
            }
            let mut mismatches = 0;
            for e in &entries {
                let report = run(&e.config, e.program_text, &opts);
                let want = match e.expected {
                    Expected::Private => Status::Private,
                    Expected::Violation => Status::Violation,
                };
                let ok = report.status == want;
                mismatches += usize::from(!ok);
                outln!("{} {:<14} expected {:<10} {}", if ok { "ok  " } else { "FAIL" }, e.name, format!("{:?}", e.expected).to_lowercase(), report.summary());
            }
            outln!("{} of {} entries reproduce their expected verdict", entries.len() - mismatches, entries.len());
            if mismatches == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Desugar { program } => {
            let parsed = std::fs::read_to_string(&program)
                .map_err(|e| e.to_string())
                .and_then(|t| dip_frontend::parse_program(&t).map_err(|e| e.to_string()));
            match parsed {
                Ok(p) => {
                    out(format_args!("{}", dip_frontend::print_program(&p)));
                    for d in dip_frontend::static_check(&p) {
                        eprintln!("warning: {d}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}: {e}", program.display());
                    ExitCode::from(EXIT_INPUT_ERROR as u8)
                }
            }
        }
    }
}
