use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use venuerec::corpus::Preprocessor;
use venuerec::embedding::EmbeddingFormat;
use venuerec::evaluation::Metric;
use venuerec::ltr::Learner;
use venuerec::pipeline::{self, PipelineConfig, PipelineError};
use venuerec::synthetic::{self, SyntheticConfig};

#[derive(Parser, Debug)]
#[command(
    name = "venuerec",
    version,
    about = "Context-aware venue recommendation with embedding-based preference features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build venue, user, context and gender vectors and cache them in --out-dir
    BuildProfiles,
    /// Write the 13-feature file for every (topic, candidate)
    Extract,
    /// Train a ranker on the feature file
    Train,
    /// Score and rank candidates with the trained model
    Rank,
    /// Compute P@5 and MRR of the run against the qrels
    Eval,
    /// Retrain with each feature zeroed and report the metric change
    Ablate,
    /// Run every stage in order
    Pipeline,
    /// Generate a synthetic planted-signal corpus and a config file for it
    Synth {
        /// directory for the generated inputs
        #[arg(long)]
        dir: PathBuf,
        /// number of topics
        #[arg(long, default_value_t = 20)]
        topics: usize,
    },
}

#[derive(Args, Debug, Default)]
struct Shared {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// random seed for splitting and training [default: 42]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// maximum worker threads [default: all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// output directory for caches, features, model, run and reports [default: out]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// embedding file layout: text|binary [default: text]
    #[arg(long, global = true)]
    embedding_format: Option<EmbeddingFormat>,
    /// nearest neighbours per seed subtraction when expanding context terms [default: 10]
    #[arg(long, global = true)]
    k: Option<usize>,
    /// ratings at or above this count as liked [default: 4]
    #[arg(long, global = true)]
    pos_threshold: Option<i64>,
    /// ratings at or below this count as disliked [default: 3]
    #[arg(long, global = true)]
    neg_threshold: Option<i64>,
    /// ranker: ca (coordinate ascent) or mart [default: mart]
    #[arg(long, global = true)]
    learner: Option<Learner>,
    /// metric for training, early stopping and ablation: p5|mrr [default: p5]
    #[arg(long, global = true)]
    metric: Option<Metric>,
    /// word embedding file
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// venues JSON-lines file
    #[arg(long, global = true)]
    venues: Option<PathBuf>,
    /// user profiles JSON-lines file
    #[arg(long, global = true)]
    profiles: Option<PathBuf>,
    /// topics (context pairs) JSON-lines file
    #[arg(long, global = true)]
    contexts: Option<PathBuf>,
    /// TREC qrels file
    #[arg(long, global = true)]
    qrels: Option<PathBuf>,
    /// fraction of topics used for training, the rest validate [default: 0.67]
    #[arg(long, global = true)]
    split_fraction: Option<f64>,
    /// tag written in the last column of the run file [default: venuerec]
    #[arg(long, global = true)]
    run_tag: Option<String>,
}

fn effective_config(s: &Shared) -> Result<PipelineConfig, PipelineError> {
    let mut c = match &s.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = &s.$field {
                c.$field = v.clone();
            }
        )*};
    }
    set!(seed, out_dir, embedding_format, k, pos_threshold, neg_threshold, learner, metric, split_fraction, run_tag);
    macro_rules! set_opt {
        ($($field:ident),*) => {$(
            if s.$field.is_some() {
                c.$field = s.$field.clone();
            }
        )*};
    }
    set_opt!(threads, embeddings, venues, profiles, contexts, qrels);
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Command::Synth { dir, topics } = &cli.command {
        let syn = SyntheticConfig {
            topics: *topics,
            seed: cli.shared.seed.unwrap_or(SyntheticConfig::default().seed),
            ..Default::default()
        };
        let format = cli.shared.embedding_format.unwrap_or_default();
        let data = synthetic::generate(&syn, &Preprocessor::default());
        let cfg = data.write_to_dir(dir, format)?;
        let path = dir.join("config.toml");
        std::fs::write(&path, cfg.to_toml()).map_err(|source| PipelineError::Io {
            path: path.clone(),
            source,
        })?;
        println!("wrote {} topics, {} venues; config {}", data.contexts.len(), data.venues.len(), path.display());
        return Ok(());
    }

    let cfg = effective_config(&cli.shared)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::BuildProfiles => print!("{}", pipeline::cmd_build_profiles(&cfg)?.to_text()),
        Command::Extract => println!("rows\t{}", pipeline::cmd_extract(&cfg)?.len()),
        Command::Train => {
            let m = pipeline::cmd_train(&cfg)?;
            println!("trained {} model -> {}", m.learner(), cfg.out(pipeline::MODEL).display());
        }
        Command::Rank => {
            let run = pipeline::cmd_rank(&cfg)?;
            println!("ranked {} topics -> {}", run.topics.len(), cfg.out(pipeline::RUN).display());
        }
        Command::Eval => print!("{}", pipeline::cmd_eval(&cfg)?.to_text(5)),
        Command::Ablate => {
            let r = pipeline::cmd_ablate(&cfg)?;
            println!("baseline\t{:.4}", r.baseline);
            r.write_tsv(&mut std::io::stdout())
                .map_err(|source| PipelineError::Io { path: "<stdout>".into(), source })?;
        }
        Command::Pipeline => {
            let o = pipeline::cmd_pipeline(&cfg)?;
            print!("{}", o.build.to_text());
            println!("rows\t{}", o.rows);
            print!("{}", o.metrics.to_text(5));
            println!("ablation_baseline\t{:.4}", o.ablation.baseline);
            o.ablation
                .write_tsv(&mut std::io::stdout())
                .map_err(|source| PipelineError::Io { path: "<stdout>".into(), source })?;
        }
        Command::Synth { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={} message={msg:?}", e.kind());
            ExitCode::FAILURE
        }
    }
}
