//! Command-line front end. `run` returns the process exit code.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use shotadvisor::corpus::bugzilla::{
    BugzillaClient, BugzillaQuery, CachingTransport, ReplayTransport, ResponseCache,
};
use shotadvisor::corpus::{self, Corpus};
use shotadvisor::eval::{self, BenchmarkModel};
use shotadvisor::pipeline::{self, DraftReport, PipelineConfig, RecommenderKind, TrainedModel};
use shotadvisor::{artifact, Error};

use crate::http;
use crate::transport::ReqwestTransport;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "shotadvisor",
    version,
    about = "Screenshot recommendations for bug reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a corpus file from JSONL or a Bugzilla instance.
    Ingest(IngestArgs),
    /// Attach aggregated annotations and overrides to a corpus.
    Label(LabelArgs),
    /// Train a model artifact.
    Train(TrainArgs),
    /// Score a model on the held-out side of a split.
    Evaluate(EvaluateArgs),
    /// Compare necessity models on one split.
    Benchmark(BenchmarkArgs),
    /// Read a draft report on stdin, print a recommendation.
    Analyze(AnalyzeArgs),
    /// Run the local HTTP service.
    Serve(ServeArgs),
    /// Write a synthetic corpus with planted signal.
    GenCorpus(GenCorpusArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["from_jsonl", "from_bugzilla"])))]
struct IngestArgs {
    /// JSONL file of issue reports (`-` for stdin).
    #[arg(long, value_name = "PATH")]
    from_jsonl: Option<String>,
    /// Bugzilla base URL, e.g. https://bugzilla.mozilla.org
    #[arg(long, value_name = "URL", requires_all = ["product", "since", "until"])]
    from_bugzilla: Option<String>,
    #[arg(long, value_name = "P")]
    product: Option<String>,
    /// First creation date, YYYY-MM-DD.
    #[arg(long, value_name = "D")]
    since: Option<NaiveDate>,
    /// Last creation date (inclusive), YYYY-MM-DD.
    #[arg(long, value_name = "D")]
    until: Option<NaiveDate>,
    #[arg(long, default_value_t = 100)]
    page_size: usize,
    /// Record every response under this directory.
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
    /// Answer every request from --cache without touching the network.
    #[arg(long, requires = "cache")]
    offline: bool,
    /// Output corpus (`-` for stdout).
    #[arg(long, value_name = "PATH", default_value = "-")]
    out: String,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("labels").required(true).multiple(true).args(["annotations", "overrides"])))]
struct LabelArgs {
    #[arg(long, value_name = "PATH", default_value = "-")]
    corpus: String,
    /// JSONL of {image_id, annotator_id, categories}.
    #[arg(long, value_name = "PATH")]
    annotations: Option<PathBuf>,
    /// JSONL of {image_id, label_vector}, applied after the annotations.
    #[arg(long, value_name = "PATH")]
    overrides: Option<PathBuf>,
    #[arg(long, value_name = "PATH", default_value = "-")]
    out: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RecommenderArg {
    Gnb,
    Svm,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Labeled corpus (`-` for stdin).
    #[arg(long, value_name = "PATH", default_value = "-")]
    corpus: String,
    /// Model artifact to write.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also encode comment count and reply latency.
    #[arg(long)]
    include_post_submission_features: bool,
    #[arg(long, value_enum, default_value = "gnb")]
    recommender: RecommenderArg,
    /// Train only on the train side of a split at this ratio, leaving the
    /// rest for `evaluate`.
    #[arg(long, value_name = "RATIO")]
    holdout: Option<f64>,
    #[arg(long, value_name = "N")]
    trees: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long, value_name = "PATH")]
    corpus: String,
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Train share of the split. Defaults to the model's holdout ratio.
    #[arg(long)]
    ratio: Option<f64>,
    /// Split seed. Defaults to the model's training seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[arg(long, value_name = "PATH")]
    corpus: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    #[arg(long, default_value_t = http::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    bind: IpAddr,
    /// Origin allowed by CORS; repeat for several. Defaults to the panel's
    /// dev server.
    #[arg(long = "allow-origin", value_name = "ORIGIN")]
    allow_origin: Vec<String>,
}

#[derive(Args, Debug)]
struct GenCorpusArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH", default_value = "-")]
    out: String,
}

enum Failure {
    Core(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn stdio_error(what: &str, e: std::io::Error) -> Failure {
    Failure::Core(Error::Io {
        path: PathBuf::from(what),
        source: e,
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Label(a) => label(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => bench(a),
        Command::Analyze(a) => analyze(a),
        Command::Serve(a) => serve(a),
        Command::GenCorpus(a) => gen_corpus(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_DATA
            }
        }
    }
}

fn read_corpus_arg(path: &str) -> Result<Corpus, Failure> {
    if path == "-" {
        Ok(corpus::read_corpus(std::io::stdin().lock(), "stdin")?)
    } else {
        Ok(corpus::load_corpus(path)?)
    }
}

fn write_corpus_arg(corpus: &Corpus, path: &str) -> Outcome {
    if path == "-" {
        let mut out = std::io::stdout().lock();
        corpus
            .write_jsonl(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| stdio_error("stdout", e))
    } else {
        Ok(corpus::save_corpus(corpus, path)?)
    }
}

fn ratio_arg(flag: &str, value: f64) -> Outcome {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{flag} must lie strictly between 0 and 1, got {value}"
        )))
    }
}

fn ingest(a: IngestArgs) -> Outcome {
    let corpus = if let Some(path) = &a.from_jsonl {
        read_corpus_arg(path)?
    } else {
        let base = a.from_bugzilla.clone().unwrap_or_default();
        let query = BugzillaQuery {
            product: a.product.clone().unwrap_or_default(),
            since: a.since.unwrap_or_default(),
            until: a.until.unwrap_or_default(),
            page_size: a.page_size,
        };
        if query.page_size == 0 {
            return Err(Failure::Usage("--page-size must be at least 1".into()));
        }
        if query.since > query.until {
            return Err(Failure::Usage("--since is after --until".into()));
        }
        let cache = a.cache.as_ref().map(ResponseCache::open).transpose()?;
        match (&cache, a.offline) {
            (Some(cache), true) => {
                BugzillaClient::new(base, ReplayTransport::new(cache)).fetch(&query)?
            }
            (Some(cache), false) => {
                let t = CachingTransport::new(ReqwestTransport::new()?, cache);
                BugzillaClient::new(base, t).fetch(&query)?
            }
            (None, _) => BugzillaClient::new(base, ReqwestTransport::new()?).fetch(&query)?,
        }
    };
    eprintln!("{} reports", corpus.len());
    write_corpus_arg(&corpus, &a.out)
}

fn label(a: LabelArgs) -> Outcome {
    let mut corpus = read_corpus_arg(&a.corpus)?;
    if let Some(path) = &a.annotations {
        let sets = corpus::load_annotations(path)?;
        let outcome = corpus::label_corpus(&corpus, &sets)?;
        if !outcome.conflicts.is_empty() {
            eprintln!(
                "{} images without a majority category: {}",
                outcome.conflicts.len(),
                outcome.conflicts.join(", ")
            );
        }
        corpus = outcome.corpus;
    }
    if let Some(path) = &a.overrides {
        let overrides = corpus::load_overrides(path)?;
        corpus = corpus::apply_label_overrides(&corpus, &overrides)?;
    }
    write_corpus_arg(&corpus, &a.out)
}

fn train(a: TrainArgs) -> Outcome {
    if let Some(r) = a.holdout {
        ratio_arg("--holdout", r)?;
    }
    let corpus = read_corpus_arg(&a.corpus)?;
    let mut config = PipelineConfig::default();
    config.features.include_post_submission = a.include_post_submission_features;
    config.recommender = match a.recommender {
        RecommenderArg::Gnb => RecommenderKind::Gnb,
        RecommenderArg::Svm => RecommenderKind::Svm,
    };
    if let Some(n) = a.trees {
        config.forest.n_trees = n;
    }
    let model = pipeline::train_pipeline_with_holdout(&corpus, &config, a.seed, a.holdout)?;
    artifact::save_model(&model, &a.out)?;
    eprintln!("wrote {} ({})", a.out.display(), model.model_version());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Outcome {
    let model = artifact::load_model(&a.model)?;
    let corpus = read_corpus_arg(&a.corpus)?;
    let fp = model.fingerprint();
    let ratio = match (a.ratio, fp.holdout_ratio) {
        (Some(r), _) => r,
        (None, Some(r)) => r,
        (None, None) => {
            eprintln!(
                "warning: the model saw the whole corpus; held-out scores will be optimistic"
            );
            0.8
        }
    };
    ratio_arg("--ratio", ratio)?;
    let seed = a.seed.unwrap_or(fp.seed);
    let (train_side, test) = eval::split(&corpus, ratio, seed)?;
    if fp.holdout_ratio.is_some() && pipeline::corpus_sha256(&train_side) != fp.corpus_sha256 {
        eprintln!("warning: this split's train side differs from the model's training data");
    }
    let report = eval::evaluate_model(&model, &test)?;
    let text = match a.format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(&report)
                .map_err(|e| Failure::Core(Error::Data(e.to_string())))?
                + "\n"
        }
        OutputFormat::Text | OutputFormat::Csv => report.to_text(),
    };
    print_stdout(&text)
}

fn bench(a: BenchmarkArgs) -> Outcome {
    ratio_arg("--ratio", a.ratio)?;
    let corpus = read_corpus_arg(&a.corpus)?;
    let table = eval::benchmark(
        &corpus,
        &BenchmarkModel::DEFAULT,
        &PipelineConfig::default(),
        a.ratio,
        a.seed,
    )?;
    let text = match a.format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| match &r.result {
                    Ok(m) => serde_json::json!({"model": r.model, "metrics": m}),
                    Err(e) => serde_json::json!({"model": r.model, "error": e}),
                })
                .collect();
            serde_json::to_string_pretty(&rows)
                .map_err(|e| Failure::Core(Error::Data(e.to_string())))?
                + "\n"
        }
        OutputFormat::Text => table.to_text(),
    };
    print_stdout(&text)
}

/// The exact body `POST /analyze` returns for the same input.
pub fn analyze_json(model: &TrainedModel, input: &str) -> shotadvisor::Result<String> {
    let value: Value = serde_json::from_str(input).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let draft = DraftReport::from_json(&value)?;
    let rec = model.analyze(&draft)?;
    serde_json::to_string(&rec).map_err(|e| Error::Data(e.to_string()))
}

fn analyze(a: AnalyzeArgs) -> Outcome {
    let model = artifact::load_model(&a.model)?;
    let mut input = String::new();
    std::io::stdin()
        .read_to_string(&mut input)
        .map_err(|e| stdio_error("stdin", e))?;
    let json = analyze_json(&model, &input)?;
    print_stdout(&(json + "\n"))
}

fn print_stdout(text: &str) -> Outcome {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| stdio_error("stdout", e))
}

fn serve(a: ServeArgs) -> Outcome {
    let model = Arc::new(artifact::load_model(&a.model)?);
    let origins: Vec<String> = if a.allow_origin.is_empty() {
        http::DEFAULT_ORIGINS
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        a.allow_origin
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| stdio_error("runtime", e))?;
    runtime.block_on(async move {
        let listener = http::bind(SocketAddr::new(a.bind, a.port))
            .await
            .map_err(|e| stdio_error(&format!("{}:{}", a.bind, a.port), e))?;
        let addr = listener
            .local_addr()
            .map_err(|e| stdio_error("listener", e))?;
        tracing::info!(model_version = model.model_version(), "serving");
        print_stdout(&format!("listening on http://{addr}\n"))?;
        http::serve(listener, model, &origins)
            .await
            .map_err(|e| stdio_error("server", e))
    })
}

fn gen_corpus(a: GenCorpusArgs) -> Outcome {
    let corpus = eval::generate_planted_corpus(a.n, a.seed)?;
    write_corpus_arg(&corpus, &a.out)
}
