//! `issuepoint`: prepare issue mixtures, fit issue-adjusted ideal points,
//! evaluate them against the classical model and export plot data.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use issuepoint::eval::Variant;
use issuepoint::ErrorKind;

use settings::{parse_override, Settings};

#[derive(Debug)]
pub struct CliError {
    kind: ErrorKind,
    message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Usage, message: m.into() }
    }

    pub fn data(m: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Data, message: m.into() }
    }

    fn code(&self) -> u8 {
        match self.kind {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numeric => 3,
        }
    }
}

impl From<issuepoint::Error> for CliError {
    fn from(e: issuepoint::Error) -> Self {
        Self { kind: e.kind(), message: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "issuepoint", version, about = "Issue-adjusted ideal point models for roll-call votes")]
struct Cli {
    /// Flat `key = value` settings file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Extra setting override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true, value_parser = parse_override)]
    set: Vec<(String, String)>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the phrase vocabulary, topic model and per-bill issue mixtures.
    Prepare(PrepareArgs),
    /// Fit a model to the roll-call data.
    Fit(FitArgs),
    /// Cross-validate variants, score issues and test adjustments.
    Evaluate(EvaluateArgs),
    /// Export parallel-plot, histogram and discriminant data from a fit.
    Explore(ExploreArgs),
    /// Check every file recorded in a manifest against its hash.
    Verify(VerifyArgs),
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s.trim()).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
pub struct DataArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long)]
    pub lawmakers: PathBuf,
    #[arg(long)]
    pub bills: PathBuf,
}

#[derive(Args, Debug, Default)]
struct ModelFlags {
    #[arg(long)]
    seed: Option<u64>,
    /// Rate of the Laplace prior on issue adjustments.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    m_init: Option<usize>,
    #[arg(long)]
    m_growth: Option<f64>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long)]
    ema_decay: Option<f64>,
    #[arg(long)]
    ema_threshold: Option<f64>,
    #[arg(long)]
    step_cap: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    elbo_samples: Option<usize>,
    #[arg(long)]
    var_x: Option<f64>,
    #[arg(long)]
    var_z: Option<f64>,
    #[arg(long)]
    var_a: Option<f64>,
    #[arg(long)]
    var_b: Option<f64>,
}

macro_rules! push_flags {
    ($out:ident, $src:expr, [$($f:ident),* $(,)?]) => {
        {
            $( if let Some(v) = &$src.$f { $out.push((stringify!($f).to_string(), v.to_string())); } )*
        }
    };
}

impl ModelFlags {
    fn overrides(&self, out: &mut Vec<(String, String)>) {
        push_flags!(out, self, [
            seed, lambda, m_init, m_growth, m_max, ema_decay, ema_threshold, step_cap, max_sweeps,
            elbo_samples, var_x, var_z, var_a, var_b,
        ]);
    }
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    #[arg(long)]
    pub bills: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `issue_lda`, `issue_direct` or `standard_lda`.
    #[arg(long, default_value = "issue_lda", value_parser = parse_variant)]
    pub variant: Variant,
    /// Sidecar CSV `phrase,anchortext_freq,expected_count`.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// One bad phrase per line; trains the phrase classifier.
    #[arg(long)]
    pub bad_phrases: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_label_count: Option<usize>,
    #[arg(long)]
    max_phrase_len: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    max_doc_frac: Option<f64>,
    #[arg(long)]
    min_docs: Option<u64>,
    #[arg(long)]
    min_corpus_frac: Option<f64>,
    #[arg(long)]
    smoothing_iterations: Option<usize>,
    /// Number of topics for `standard_lda`.
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    pseudocount: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "issue_lda", value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long)]
    pub mixtures: Option<PathBuf>,
    /// Issue labels; defaults to `labels.txt` beside the mixtures file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from `checkpoint.json` in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Write a checkpoint and stop once this many sweeps are done.
    #[arg(long)]
    pub stop_after_sweeps: Option<usize>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "classic,issue_lda,issue_permuted", value_delimiter = ',', value_parser = parse_variant)]
    pub variants: Vec<Variant>,
    /// Mixtures for `issue_lda` and `issue_permuted`.
    #[arg(long)]
    pub mixtures: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub direct_mixtures: Option<PathBuf>,
    #[arg(long)]
    pub lda_mixtures: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    folds: Option<usize>,
    /// Permutations averaged for `issue_permuted`.
    #[arg(long)]
    permutations: Option<usize>,
    /// Permuted refits for the adjustment significance test; 0 skips it.
    #[arg(long)]
    significance_permutations: Option<usize>,
    /// Regress adjustments on the ideal point with an intercept.
    #[arg(long)]
    with_intercept: bool,
    #[arg(long)]
    baseline_trials: Option<usize>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args, Debug)]
pub struct ExploreArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub lawmakers: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict the parallel plot to one issue label.
    #[arg(long)]
    pub issue: Option<String>,
    /// Write one lawmaker's adjustments and flags.
    #[arg(long)]
    pub lawmaker: Option<String>,
    /// Evaluation report holding significance flags.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    with_intercept: bool,
    #[arg(long)]
    baseline_trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// A manifest file or the directory holding `manifest.json`.
    pub manifest: PathBuf,
}

fn overrides(cli: &Cli) -> Vec<(String, String)> {
    let mut out = cli.set.clone();
    match &cli.command {
        Command::Prepare(a) => push_flags!(out, a, [
            seed, min_label_count, max_phrase_len, vocab_size, max_doc_frac, min_docs, min_corpus_frac,
            smoothing_iterations, topics, alpha, pseudocount,
        ]),
        Command::Fit(a) => a.model.overrides(&mut out),
        Command::Evaluate(a) => {
            a.model.overrides(&mut out);
            push_flags!(out, a, [folds, permutations, significance_permutations, baseline_trials]);
            if a.with_intercept {
                out.push(("with_intercept".into(), "true".into()));
            }
        }
        Command::Explore(a) => {
            push_flags!(out, a, [bins, baseline_trials, seed]);
            if a.with_intercept {
                out.push(("with_intercept".into(), "true".into()));
            }
        }
        Command::Verify(_) => {}
    }
    out
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::usage(e.to_string()))?;
    if let Command::Verify(a) = &cli.command {
        return commands::verify(a);
    }
    let settings = Settings::resolve(cli.config.as_deref(), &overrides(cli)).map_err(|e| match e.kind() {
        ErrorKind::Usage => CliError::usage(e.to_string()),
        _ => CliError::from(e),
    })?;
    match &cli.command {
        Command::Prepare(a) => commands::prepare(a, &settings),
        Command::Fit(a) => commands::fit(a, &settings, cli.threads),
        Command::Evaluate(a) => commands::evaluate(a, &settings),
        Command::Explore(a) => commands::explore(a, &settings),
        Command::Verify(_) => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code())
        }
    }
}
