use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Semantic-similarity evaluation and training for video retrieval.
#[derive(Debug, Parser)]
#[command(name = "semsim", version)]
struct Cli {
    /// Worker threads for parallel stages. Outputs never depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize, tag, lemmatize and stem captions.
    Process(ProcessArgs),
    /// Build a video-by-caption similarity matrix with a semantic proxy.
    Simmat(SimmatArgs),
    /// Evaluate a retrieval run with nDCG, recall and bounds.
    Eval(EvalArgs),
    /// Mean number of relevant captions per video across thresholds.
    Curve(CurveArgs),
    /// Mean per-video Pearson correlation between proxies.
    Correlate(CorrelateArgs),
    /// Agreement of proxies with annotator orderings.
    Agreement(AgreementArgs),
    /// Sample thresholded triplets.
    Triplets(TripletArgs),
    /// Train the linear embedding model.
    Train(TrainArgs),
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    /// Captions JSONL.
    #[arg(long, value_parser = existing_file)]
    pub captions: PathBuf,
    /// Stop-word list, one word per line (built-in list by default).
    #[arg(long, value_parser = existing_file)]
    pub stoplist: Option<PathBuf>,
    /// Part-of-speech lexicon TSV (built-in lexicon by default).
    #[arg(long, value_parser = existing_file)]
    pub lexicon: Option<PathBuf>,
    /// Synset TSV: lemma, pos, synset id.
    #[arg(long, value_parser = existing_file)]
    pub synsets: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProxyArg {
    Bow,
    Pos,
    Syn,
    #[value(alias = "meteor")]
    Met,
    Embed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    V2t,
    T2v,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EmbedSourceArg {
    Captions,
    Videos,
}

#[derive(Debug, Args)]
pub struct SimmatArgs {
    /// Processed captions JSONL from `semsim process`.
    #[arg(long, value_parser = existing_file)]
    pub processed: PathBuf,
    #[arg(long, value_enum)]
    pub proxy: ProxyArg,
    /// Synset TSV used by the syn and met proxies; lexical fallback without it.
    #[arg(long, value_parser = existing_file)]
    pub synsets: Option<PathBuf>,
    /// Embedding CSV for the embed proxy.
    #[arg(long, value_parser = existing_file)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "captions")]
    pub embed_source: EmbedSourceArg,
    /// Part-of-speech weights such as `VERB=0.5,NOUN=0.5`.
    #[arg(long)]
    pub pos_weights: Option<String>,
    /// Fraction of a video's captions a word must occur in.
    #[arg(long, default_value_t = 0.25)]
    pub consensus: f64,
    /// Score METEOR in one direction only.
    #[arg(long)]
    pub no_symmetrize: bool,
    /// Score every pair instead of using the inverted index.
    #[arg(long)]
    pub naive: bool,
    #[arg(long, value_enum, default_value = "v2t")]
    pub direction: DirectionArg,
    /// Sparse TSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional dense binary output.
    #[arg(long)]
    pub dense: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Video-query run: `.jsonl` rankings or a dense score file.
    #[arg(long, value_parser = existing_file)]
    pub run: PathBuf,
    /// Caption-query run; derived from `--run` when that holds scores.
    #[arg(long, value_parser = existing_file)]
    pub run_t2v: Option<PathBuf>,
    /// Similarity matrix as `name=path` (video-by-caption); repeatable.
    #[arg(long = "sim", value_parser = named_file)]
    pub sims: Vec<(String, PathBuf)>,
    /// JSONL with `video_id` and `caption_id` fields.
    #[arg(long, value_parser = existing_file)]
    pub captions: PathBuf,
    #[arg(long)]
    pub ndcg: bool,
    #[arg(long)]
    pub recall: bool,
    #[arg(long)]
    pub gmr: bool,
    /// mAP with relevance `S >= T`.
    #[arg(long, value_name = "T")]
    pub map: Option<f64>,
    /// IVR bounds treating `S > T` as equivalent.
    #[arg(long, value_name = "T")]
    pub bounds: Option<f64>,
    /// Items at or below this similarity are not relevant for nDCG.
    #[arg(long, default_value_t = 0.0)]
    pub floor: f64,
    /// Report JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Similarity matrix as `name=path`; repeatable.
    #[arg(long = "sim", value_parser = named_file, required = true)]
    pub sims: Vec<(String, PathBuf)>,
    /// Comma-separated thresholds; `0,0.1,...,1` by default.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Similarity matrix as `name=path`; at least two.
    #[arg(long = "sim", value_parser = named_file, required = true)]
    pub sims: Vec<(String, PathBuf)>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Annotator orderings JSONL.
    #[arg(long, value_parser = existing_file)]
    pub orderings: PathBuf,
    /// Similarity matrix as `name=path`; repeatable.
    #[arg(long = "sim", value_parser = named_file, required = true)]
    pub sims: Vec<(String, PathBuf)>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TripletArgs {
    /// Video-by-caption similarity matrix.
    #[arg(long, value_parser = existing_file)]
    pub sim: PathBuf,
    #[arg(long)]
    pub threshold: f64,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Video-by-caption similarity matrix used for sampling.
    #[arg(long, value_parser = existing_file)]
    pub sim: PathBuf,
    /// Video feature CSV.
    #[arg(long, value_parser = existing_file)]
    pub video_features: PathBuf,
    /// Caption feature CSV.
    #[arg(long, value_parser = existing_file)]
    pub caption_features: PathBuf,
    /// JSONL with `video_id` and `caption_id`; needed for `--ivr` and `--eval-sim`.
    #[arg(long, value_parser = existing_file)]
    pub captions: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["ivr", "sweep"])]
    pub threshold: Option<f64>,
    /// Sample with instance relevance only.
    #[arg(long, conflicts_with = "sweep", requires = "captions")]
    pub ivr: bool,
    /// Train once per threshold 0.1, 0.2, ..., 1.0.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Triplets drawn per epoch.
    #[arg(long, default_value_t = 2000)]
    pub triplets: usize,
    /// Embedding width.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.2)]
    pub margin: f64,
    #[arg(long)]
    pub seed: u64,
    /// Evaluation matrix as `name=path`; repeatable.
    #[arg(long = "eval-sim", value_parser = named_file, requires = "captions")]
    pub eval_sims: Vec<(String, PathBuf)>,
    /// Output directory for checkpoints, loss traces and reports.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let path = PathBuf::from(s);
    if path.is_file() {
        Ok(path)
    } else {
        Err(format!("no such file: {s}"))
    }
}

fn named_file(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = match s.split_once('=') {
        Some((n, p)) if !n.is_empty() => (n.to_string(), p),
        _ => {
            let stem = std::path::Path::new(s)
                .file_stem()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_else(|| s.to_string());
            (stem, s)
        }
    };
    Ok((name, existing_file(path)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.into())
            .build_global()
        {
            eprintln!("error: --workers: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Process(a) => commands::process(a),
        Command::Simmat(a) => commands::simmat(a),
        Command::Eval(a) => commands::eval(a),
        Command::Curve(a) => commands::curve(a),
        Command::Correlate(a) => commands::correlate(a),
        Command::Agreement(a) => commands::agreement(a),
        Command::Triplets(a) => commands::triplets(a),
        Command::Train(a) => commands::train(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
