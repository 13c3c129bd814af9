//! Batch front end of the checker: JSON configs in, JSON reports out.
//!
//! ```no_run
//! use dip_cli::{run_file, RunOptions};
//! let report = run_file("crates/cli/corpus/svt5.json".as_ref(), &RunOptions::default());
//! assert_eq!(report.exit_code, 1);
//! ```

pub mod config;
pub mod corpus;
pub mod oracle_check;

use std::path::Path;
use std::time::Instant;

use dip_dpcheck::{check, smallest_violation, Outcome, Verdict};
use dip_symalg::fmt_q;
use serde::{Deserialize, Serialize};

pub use config::{AdjacencyConfig, Caps, CheckConfig, ConfigError, EpsilonConfig, Mode, OracleSettings, DEFAULT_PRECISION};
pub use corpus::{corpus, embedded_program, CorpusEntry, Expected};
pub use oracle_check::{run_oracle, OracleReport, OracleRun};

/// Version of the report layout.
pub const SCHEMA: &str = "1";

pub const EXIT_PRIVATE: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INPUT_ERROR: i32 = 3;

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Starting precision of sign decisions when the config sets none.
    pub default_precision: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { default_precision: DEFAULT_PRECISION }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Private,
    Violation,
    Inconclusive,
    /// The oracle agreed with the exact distributions.
    Agree,
    /// Some oracle cell disagreed with the exact distributions.
    Disagree,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Private | Status::Agree => EXIT_PRIVATE,
            Status::Violation | Status::Disagree => EXIT_VIOLATION,
            Status::Inconclusive => EXIT_INCONCLUSIVE,
            Status::Error => EXIT_INPUT_ERROR,
        }
    }
}

/// The shortest query length with a violation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Minimized {
    pub queries: i64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub config: Option<CheckConfig>,
    pub status: Status,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimized: Option<Minimized>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub total_ms: u64,
}

impl Report {
    fn new(config: Option<CheckConfig>, status: Status, started: Instant) -> Self {
        Report {
            schema: SCHEMA.into(),
            config,
            status,
            exit_code: status.exit_code(),
            verdict: None,
            minimized: None,
            oracle: None,
            error: None,
            total_ms: started.elapsed().as_millis() as u64,
        }
    }

    pub fn error(config: Option<CheckConfig>, msg: impl Into<String>) -> Self {
        let mut r = Report::new(config, Status::Error, Instant::now());
        r.error = Some(msg.into());
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One-line human-readable summary.
    pub fn summary(&self) -> String {
        let name = self.config.as_ref().map_or("-", |c| c.program.as_str());
        match (&self.status, &self.verdict, &self.oracle) {
            (Status::Error, _, _) => format!("{name}: error: {}", self.error.as_deref().unwrap_or("unknown")),
            (_, _, Some(o)) => format!(
                "{name}: oracle {} ({} cells at {} samples, {} re-tested, {} ms)",
                if o.passed { "agrees" } else { "DISAGREES" },
                o.cells,
                o.samples,
                o.retested,
                self.total_ms
            ),
            (_, Some(v), _) => {
                let what = match &v.outcome {
                    Outcome::Private => "private".to_string(),
                    Outcome::Violation { counter_example: ce } => format!(
                        "VIOLATION in={:?} in'={:?} O={:?} eps0={} margin=[{}, {}]",
                        ce.input,
                        ce.input2,
                        ce.outputs,
                        fmt_q(&ce.eps0),
                        short(&ce.margin.lo),
                        short(&ce.margin.hi)
                    ),
                    Outcome::Inconclusive { reasons } => format!("inconclusive ({})", reasons.join("; ")),
                };
                let min = self.minimized.as_ref().map_or(String::new(), |m| format!(", smallest violating N={}", m.queries));
                format!("{name}: {what} (pairs {}, {} ms{min})", v.pairs_checked, self.total_ms)
            }
            _ => format!("{name}: {:?}", self.status),
        }
    }
}

/// Compact decimal rendering of a rational for summaries (the report
/// itself keeps exact values).
fn short(x: &dip_symalg::Q) -> String {
    use num_traits::ToPrimitive;
    format!("{:.6}", x.to_f64().unwrap_or(f64::NAN))
}

/// Run a config against the given program text.
pub fn run(cfg: &CheckConfig, program_text: &str, opts: &RunOptions) -> Report {
    let started = Instant::now();
    let fail = |msg: String| {
        let mut r = Report::error(Some(cfg.clone()), msg);
        r.total_ms = started.elapsed().as_millis() as u64;
        r
    };
    let program = match cfg.program(program_text) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let diags = dip_frontend::static_check(&program);
    if !diags.is_empty() {
        return fail(diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "));
    }
    let query = match cfg.query(program.clone(), opts.default_precision) {
        Ok(q) => q,
        Err(e) => return fail(e.to_string()),
    };
    if cfg.mode == Mode::Oracle {
        return match run_oracle(&program, &cfg.oracle, &query.build) {
            Ok(o) => {
                let mut r = Report::new(Some(cfg.clone()), if o.passed { Status::Agree } else { Status::Disagree }, started);
                r.oracle = Some(o);
                r.total_ms = started.elapsed().as_millis() as u64;
                r
            }
            Err(e) => fail(e.to_string()),
        };
    }
    let mut verdict = match check(&query) {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let status = match verdict.outcome {
        Outcome::Private => Status::Private,
        Outcome::Violation { .. } => Status::Violation,
        Outcome::Inconclusive { .. } => Status::Inconclusive,
    };
    let mut minimized = None;
    if cfg.minimize && status == Status::Violation {
        let max_n = cfg.consts.get("N").copied().unwrap_or(program.inputs.len() as i64);
        match smallest_violation(program_text, &cfg.consts, &query, max_n) {
            Ok(Some((n, v))) => minimized = Some(Minimized { queries: n, verdict: v }),
            Ok(None) => {}
            Err(e) => return fail(format!("minimization: {e}")),
        }
    }
    if cfg.mode == Mode::Counterexample {
        verdict.audit.clear();
        if let Some(m) = &mut minimized {
            m.verdict.audit.clear();
        }
    }
    let mut r = Report::new(Some(cfg.clone()), status, started);
    r.verdict = Some(verdict);
    r.minimized = minimized;
    r.total_ms = started.elapsed().as_millis() as u64;
    r
}

/// Load a config file, resolve its program relative to the file, and run it.
pub fn run_file(path: &Path, opts: &RunOptions) -> Report {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Report::error(None, format!("cannot read {}: {e}", path.display())),
    };
    let cfg = match CheckConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return Report::error(None, format!("{}: {e}", path.display())),
    };
    let program_path = path.parent().unwrap_or(Path::new(".")).join(&cfg.program);
    match std::fs::read_to_string(&program_path) {
        Ok(src) => run(&cfg, &src, opts),
        Err(e) => Report::error(Some(cfg), format!("cannot read {}: {e}", program_path.display())),
    }
}
