//! `loopdmd`: read a DSL program, print its reuse-distance report.
//!
//! Exit codes: 0 on success, 1 when the program has diagnostics or no closed
//! form exists for the access counts, 2 on usage, I/O and resource errors.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use clap::Parser;
use loopdmd_core::polyhedral::{build_access_map, build_timestamp_space, dump, Limits, ParamBinding, ResourceError};
use loopdmd_core::report::{concrete_report, render_text, symbolic_report, Report};
use loopdmd_core::symbolic::{analyze_symbolic, SymbolicConfig, SymbolicError};
use loopdmd_core::{compile, Diagnostic, Execution};

/// JSON Schema of the `--json` report.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

pub const EXIT_OK: u8 = 0;
pub const EXIT_DIAGNOSTICS: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Clone, Parser)]
#[command(name = "loopdmd", version, about = "Reuse distance and data movement distance of affine loop programs")]
pub struct CliOptions {
    /// DSL source file; reads stdin when omitted or `-`.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Print the report as one JSON document.
    #[arg(long)]
    pub json: bool,
    /// Cache line size in elements.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(i64).range(1..))]
    pub block_size: i64,
    /// Number of cache sets.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(i64).range(1..))]
    pub num_sets: i64,
    /// Bind a parameter (`N=16`). Binding every parameter runs the exact
    /// analysis at that point instead of the symbolic one.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_pair)]
    pub params: Vec<(String, i64)>,
    /// Smallest sampled parameter value.
    #[arg(long, value_parser = clap::value_parser!(i64).range(1..))]
    pub base: Option<i64>,
    /// Quasi-period of the sample grid.
    #[arg(long, value_parser = clap::value_parser!(i64).range(1..))]
    pub period: Option<i64>,
    /// Degree bound for fitted formulas.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Degree increments tried after a fit failure.
    #[arg(long, default_value_t = 1)]
    pub retries: u32,
    /// Held-out bindings per residue class.
    #[arg(long, default_value_t = 2)]
    pub validation: usize,
    /// Extra sample-grid layers.
    #[arg(long, default_value_t = 0)]
    pub extra_layers: u32,
    /// Cap on enumerated points per binding (also LOOPDMD_MAX_POINTS).
    #[arg(long)]
    pub max_points: Option<u64>,
    /// Run sample bindings one after another.
    #[arg(long)]
    pub sequential: bool,
    /// Abandon the analysis after this many seconds.
    #[arg(long)]
    pub timeout_seconds: Option<f64>,
    /// Print the timestamp space and access maps, then exit.
    #[arg(long)]
    pub dump: bool,
    /// Accepted for compatibility; ignored.
    #[arg(long, value_name = "N")]
    pub max_operations: Option<String>,
    /// Accepted for compatibility; ignored.
    #[arg(long, value_name = "METHOD")]
    pub approximation_method: Option<String>,
}

fn parse_pair(s: &str) -> Result<(String, i64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, found `{s}`"))?;
    let value = value.trim().parse::<i64>().map_err(|e| format!("bad value for `{name}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

impl CliOptions {
    pub fn symbolic_config(&self) -> SymbolicConfig {
        SymbolicConfig {
            base: self.base,
            period: self.period,
            degree: self.degree,
            retries: self.retries,
            validation: self.validation,
            extra_layers: self.extra_layers,
            execution: if self.sequential { Execution::Sequential } else { Execution::Parallel },
            limits: self.limits(),
        }
    }

    pub fn limits(&self) -> Limits {
        match self.max_points {
            Some(cap) => Limits::with_max_points(cap),
            None => Limits::default(),
        }
    }
}

/// Why an analysis produced no report.
#[derive(Debug)]
pub enum Failure {
    Diagnostics(Vec<Diagnostic>),
    Usage(String),
    Resource(ResourceError),
    NoClosedForm(String),
    TimedOut,
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Diagnostics(_) | Failure::NoClosedForm(_) => EXIT_DIAGNOSTICS,
            Failure::Usage(_) | Failure::Resource(_) | Failure::TimedOut => EXIT_ERROR,
        }
    }
}

/// Compiles and analyzes `source`. Checks `limits.cancel` while enumerating.
pub fn analyze(source: &str, opts: &CliOptions, limits: Limits) -> Result<Report, Failure> {
    let program = compile(source).map_err(Failure::Diagnostics)?;
    if !opts.params.is_empty() {
        let binding = ParamBinding::from_pairs(&program, &opts.params).map_err(|e| Failure::Usage(e.to_string()))?;
        return concrete_report(&program, &binding, opts.block_size, opts.num_sets, &limits).map_err(Failure::Resource);
    }
    let config = SymbolicConfig { limits, ..opts.symbolic_config() };
    match analyze_symbolic(&program, opts.block_size, opts.num_sets, &config) {
        Ok(dist) => Ok(symbolic_report(&dist, opts.block_size, opts.num_sets)),
        Err(SymbolicError::Resource(e)) => Err(Failure::Resource(e)),
        Err(e @ SymbolicError::Counts { .. }) => Err(Failure::NoClosedForm(e.to_string())),
        Err(e) => Err(Failure::Usage(e.to_string())),
    }
}

/// [`analyze`] on a worker thread, abandoned after `timeout`.
pub fn analyze_with_timeout(source: &str, opts: &CliOptions, timeout: Option<Duration>) -> Result<Report, Failure> {
    let Some(timeout) = timeout else {
        return analyze(source, opts, opts.limits());
    };
    let cancel = Arc::new(AtomicBool::new(false));
    let limits = Limits { cancel: Some(cancel.clone()), ..opts.limits() };
    let (tx, rx) = mpsc::channel();
    let (source, opts_owned) = (source.to_string(), opts.clone());
    std::thread::spawn(move || {
        let _ = tx.send(analyze(&source, &opts_owned, limits));
    });
    match rx.recv_timeout(timeout) {
        Ok(result) => result,
        Err(_) => {
            cancel.store(true, Ordering::Relaxed);
            Err(Failure::TimedOut)
        }
    }
}

pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let opts = match CliOptions::try_parse_from(args) {
        Ok(o) => o,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_ERROR
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    for (flag, value) in
        [("--max-operations", &opts.max_operations), ("--approximation-method", &opts.approximation_method)]
    {
        if value.is_some() {
            let _ = writeln!(stderr, "warning: {flag} is ignored; counts come from exact enumeration");
        }
    }

    let source = match read_source(&opts, stdin) {
        Ok(s) => s,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_ERROR;
        }
    };

    if opts.dump {
        return match compile(&source) {
            Ok(p) => {
                let text = dump(&p, &build_timestamp_space(&p), &build_access_map(&p, opts.block_size, opts.num_sets));
                let _ = write!(stdout, "{text}");
                EXIT_OK
            }
            Err(diags) => report_diagnostics(&opts, &source, &diags, stderr),
        };
    }

    let timeout = match opts.timeout_seconds {
        Some(t) if t.is_finite() && t > 0.0 => Some(Duration::from_secs_f64(t)),
        Some(t) => {
            let _ = writeln!(stderr, "error: --timeout-seconds must be positive, found {t}");
            return EXIT_ERROR;
        }
        None => None,
    };
    match analyze_with_timeout(&source, &opts, timeout) {
        Ok(report) => {
            let out = if opts.json {
                serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
            } else {
                render_text(&report)
            };
            let _ = stdout.write_all(out.as_bytes());
            EXIT_OK
        }
        Err(Failure::Diagnostics(diags)) => report_diagnostics(&opts, &source, &diags, stderr),
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) => m.clone(),
                Failure::Resource(e) => e.to_string(),
                Failure::NoClosedForm(m) => m.clone(),
                Failure::TimedOut => "analysis timed out".to_string(),
                Failure::Diagnostics(_) => unreachable!(),
            };
            let _ = writeln!(stderr, "error: {msg}");
            f.exit_code()
        }
    }
}

fn read_source(opts: &CliOptions, stdin: &mut dyn Read) -> Result<String, String> {
    match &opts.input {
        Some(path) if path.as_os_str() != "-" => {
            std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
        }
        _ => {
            let mut s = String::new();
            stdin.read_to_string(&mut s).map_err(|e| format!("cannot read stdin: {e}"))?;
            Ok(s)
        }
    }
}

fn report_diagnostics(opts: &CliOptions, source: &str, diags: &[Diagnostic], stderr: &mut dyn Write) -> u8 {
    if opts.json {
        let _ = writeln!(stderr, "{}", serde_json::to_string_pretty(diags).expect("diagnostics serialize"));
    } else {
        for d in diags {
            let _ = writeln!(stderr, "{}", d.render(source));
        }
    }
    EXIT_DIAGNOSTICS
}
