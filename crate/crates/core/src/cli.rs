//! Command-line entry point: corpus building, training, evaluation,
//! prediction, gradient self-checks, and the multi-seed protocol.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error,
//! 3 numerical failure (non-finite loss, failed gradient check).

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{
    build_dataset, generate_synthetic_corpus, load_dataset, load_name_pool, load_templates,
    tokenize, write_dataset, write_name_pool, write_templates, CurationError, PipelineConfig,
    SyntheticSpec,
};
use crate::encoding::EncodingError;
use crate::evaluation::{evaluate, extract_spans, EvalError};
use crate::layers::{gradcheck_dims, gradient_check, Architecture, Dims, LayerError};
use crate::training::{
    load_checkpoint, run_protocol, save_checkpoint, train_model, CheckpointError, TrainConfig,
    TrainError,
};

#[derive(Parser)]
#[command(
    name = "nametag",
    version,
    about = "Train and evaluate BiLSTM person-name taggers on curated utterance corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build uniqueness-enforced train/test splits from a name pool and
    /// utterance templates (or from the bundled synthetic generator).
    BuildData(BuildDataArgs),
    /// Train one tagger on a JSONL dataset and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a test set and write reports.
    Evaluate(EvaluateArgs),
    /// Extract person names from raw text lines as JSON.
    Predict(PredictArgs),
    /// Check every model gradient against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Train n seeds per architecture and emit the comparison table.
    Protocol(ProtocolArgs),
}

#[derive(Args)]
struct BuildDataArgs {
    /// Name pool CSV (header: name,kind,gender,country). Omit together
    /// with --templates to use the synthetic corpus generator.
    #[arg(long)]
    names: Option<PathBuf>,
    /// Template JSONL, one {"text", "source"} object per line.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Output directory for train.jsonl and test.jsonl.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also emit name-free training utterances.
    #[arg(long)]
    allow_nameless: bool,
    /// Synthetic generator: number of countries.
    #[arg(long, default_value_t = 10)]
    countries: usize,
    /// Synthetic generator: names per country.
    #[arg(long, default_value_t = 100)]
    names_per_country: usize,
    /// Synthetic generator: number of templates.
    #[arg(long, default_value_t = 120)]
    n_templates: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset (JSONL).
    #[arg(long)]
    train: PathBuf,
    /// Optional dev dataset for early stopping.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Where to write the checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "wordchar")]
    arch: Architecture,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Early-stop patience in epochs (requires --dev).
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = 64)]
    word_dim: usize,
    #[arg(long, default_value_t = 16)]
    char_dim: usize,
    #[arg(long, default_value_t = 20)]
    char_hidden: usize,
    #[arg(long, default_value_t = 50)]
    word_hidden: usize,
    #[arg(long, default_value_t = 25)]
    max_word_len: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test dataset (JSONL).
    #[arg(long)]
    test: PathBuf,
    /// Directory for report.json, summary.md, and by_country.csv.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Architecture the checkpoint must hold.
    #[arg(long)]
    arch: Option<Architecture>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// UTF-8 text file, one utterance per line; standard input if omitted.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 5)]
    n_seeds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Directory for protocol.md and protocol.json.
    #[arg(long)]
    report: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<CurationError> for CliError {
    fn from(e: CurationError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EncodingError> for CliError {
    fn from(e: EncodingError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match &e {
            TrainError::NanLoss { .. }
            | TrainError::Layer(LayerError::NonFiniteGradient { .. }) => {
                CliError::Numeric(e.to_string())
            }
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::Protocol { source, .. } => match source.as_ref() {
                TrainError::NanLoss { .. } => CliError::Numeric(e.to_string()),
                TrainError::Config(_) => CliError::Usage(e.to_string()),
                _ => CliError::Data(e.to_string()),
            },
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Train(t) => t.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

fn require_exists(path: &Path) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!(
            "input path does not exist: {}",
            path.display()
        )));
    }
    Ok(())
}

/// Parse `argv` and run the selected subcommand, returning the process
/// exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version print to stdout and exit 0; real parse
            // errors go to stderr with the usage exit code.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { 0 } else { 1 };
        }
    };
    let result = match cli.command {
        Command::BuildData(args) => cmd_build_data(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Protocol(args) => cmd_protocol(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

/// Entry point used by the binary: dispatch on the process arguments.
pub fn run() -> i32 {
    dispatch(std::env::args_os())
}

fn cmd_build_data(args: BuildDataArgs) -> Result<(), CliError> {
    let (templates, pool, synthetic) = match (&args.names, &args.templates) {
        (Some(names), Some(templates)) => {
            require_exists(names)?;
            require_exists(templates)?;
            (load_templates(templates)?, load_name_pool(names)?, false)
        }
        (None, None) => {
            let spec = SyntheticSpec {
                n_templates: args.n_templates,
                n_names_per_country: args.names_per_country,
                countries: args.countries,
                rng_seed: args.seed,
            };
            let (templates, pool) = generate_synthetic_corpus(&spec)?;
            (templates, pool, true)
        }
        _ => {
            return Err(CliError::Usage(
                "--names and --templates must be given together (omit both for synthetic data)"
                    .into(),
            ))
        }
    };

    let config = PipelineConfig {
        test_fraction: args.test_fraction,
        seed: args.seed,
        allow_nameless: args.allow_nameless,
    };
    let (split, report) = build_dataset(&pool, &templates, &config)?;

    std::fs::create_dir_all(&args.out)?;
    if synthetic {
        write_name_pool(&args.out.join("names.csv"), &pool)?;
        write_templates(&args.out.join("templates.jsonl"), &templates)?;
    }
    write_dataset(&args.out.join("train.jsonl"), &split.train)?;
    write_dataset(&args.out.join("test.jsonl"), &split.test)?;

    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "wrote {} train / {} test utterances to {} ({} names rejected, {} duplicates dropped)",
        split.train.len(),
        split.test.len(),
        args.out.display(),
        report.rejected.len(),
        report.dropped.len()
    );
    Ok(())
}

fn train_config_from(args: &TrainArgs) -> TrainConfig {
    let mut config = TrainConfig::new(args.arch);
    config.epochs = args.epochs;
    config.batch_size = args.batch_size;
    config.lr = args.lr;
    config.seed = args.seed;
    config.early_stop_patience = Some(args.patience);
    config.dims = Dims {
        word_dim: args.word_dim,
        char_dim: args.char_dim,
        char_hidden: args.char_hidden,
        word_hidden: args.word_hidden,
    };
    config.max_word_len = args.max_word_len;
    config
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    require_exists(&args.train)?;
    if let Some(dev) = &args.dev {
        require_exists(dev)?;
    }
    let train = load_dataset(&args.train)?;
    let dev = args.dev.as_deref().map(load_dataset).transpose()?;
    let config = train_config_from(&args);
    let ckpt = train_model(&config, &train, dev.as_deref())?;
    save_checkpoint(&ckpt, &args.checkpoint)?;
    let final_loss = ckpt.train_loss_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} model for {} epochs (final train loss {:.6}), checkpoint at {}",
        config.architecture,
        ckpt.train_loss_history.len(),
        final_loss,
        args.checkpoint.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    require_exists(&args.checkpoint)?;
    require_exists(&args.test)?;
    let ckpt = load_checkpoint(&args.checkpoint, args.arch)?;
    let test = load_dataset(&args.test)?;
    let report = evaluate(&ckpt, &test)?;
    println!(
        "strict accuracy {:.4}, partial accuracy {:.4} over {} gold names",
        report.overall.strict_acc, report.overall.partial_acc, report.overall.support
    );
    if let Some(dir) = &args.report {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), report.to_json())?;
        std::fs::write(dir.join("summary.md"), report.to_markdown())?;
        std::fs::write(dir.join("by_country.csv"), report.country_csv())?;
        println!("reports written to {}", dir.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictedName {
    text: String,
    start: usize,
    end: usize,
}

#[derive(Serialize)]
struct PredictionLine {
    text: String,
    names: Vec<PredictedName>,
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    require_exists(&args.checkpoint)?;
    let ckpt = load_checkpoint(&args.checkpoint, None)?;
    let reader: Box<dyn BufRead> = match &args.input {
        Some(path) => {
            require_exists(path)?;
            Box::new(std::io::BufReader::new(std::fs::File::open(path)?))
        }
        None => Box::new(std::io::BufReader::new(std::io::stdin())),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tokens = tokenize(&line);
        let tags = ckpt.predict_tags(&tokens)?;
        let names = extract_spans(&tokens, &tags)
            .into_iter()
            .map(|s| PredictedName {
                text: s.text,
                start: s.start,
                end: s.end,
            })
            .collect();
        let record = PredictionLine { text: line, names };
        writeln!(out, "{}", serde_json::to_string(&record).expect("serializable"))?;
    }
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let dims = gradcheck_dims();
    let mut worst = 0.0f64;
    for arch in [Architecture::Word, Architecture::WordChar] {
        let err = gradient_check(arch, dims, args.seed)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        println!("{arch}: max rel. gradient error {err:.3e}");
        worst = worst.max(err);
    }
    if worst > args.tolerance {
        return Err(CliError::Numeric(format!(
            "gradient check failed: max rel. error {worst:.3e} exceeds tolerance {:.1e}",
            args.tolerance
        )));
    }
    println!("gradient check passed (tolerance {:.1e})", args.tolerance);
    Ok(())
}

fn cmd_protocol(args: ProtocolArgs) -> Result<(), CliError> {
    require_exists(&args.train)?;
    require_exists(&args.test)?;
    let train = load_dataset(&args.train)?;
    let test = load_dataset(&args.test)?;
    let mut base = TrainConfig::new(Architecture::WordChar);
    base.epochs = args.epochs;
    base.batch_size = args.batch_size;
    base.lr = args.lr;
    base.seed = args.seed;
    base.early_stop_patience = None;
    let summary = run_protocol(&base, args.n_seeds, &train, &test)?;
    let markdown = summary.to_markdown();
    println!("{markdown}");
    if let Some(dir) = &args.report {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("protocol.md"), &markdown)?;
        std::fs::write(
            dir.join("protocol.json"),
            serde_json::to_string_pretty(&summary).expect("serializable"),
        )?;
        println!("protocol reports written to {}", dir.display());
    }
    Ok(())
}
