use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use textsignal::io::write_jsonl;
use textsignal::pipeline::{synthetic_corpus, Pipeline, PipelineConfig, DEMO_CORPUS_SIZE};

/// Builds a semantic map of a text corpus, prunes its noise and profiles it
/// against a positional dictionary.
#[derive(Parser)]
#[command(name = "textsignal", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory holding all stage artifacts and the manifest.
    #[arg(long, global = true, default_value = "textsignal-run")]
    workdir: PathBuf,
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set k=12`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run even when upstream artifacts changed since they were recorded.
    #[arg(long, global = true)]
    force: bool,
    /// Log progress (-v) or everything (-vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSONL corpus and copy it into the work directory.
    Ingest { input: PathBuf },
    /// Embed every document, reusing cached vectors.
    Embed,
    /// Score every document on each dictionary dimension.
    Score,
    /// Project embeddings to the 5D analysis space and the 2D map.
    Project,
    /// Assign K-Means regions and density-core membership.
    Partition,
    /// Run the global, local and structural filters.
    Prune,
    /// Write band profiles, the centrality histogram and text statistics.
    Profile,
    /// Export the map as CSV and SVG.
    Map {
        /// `region`, `retained` or a dimension id.
        #[arg(long)]
        color_by: Option<String>,
    },
    /// Generate the synthetic corpus and run every stage on it.
    Demo {
        /// Number of documents to generate.
        #[arg(long, default_value_t = DEMO_CORPUS_SIZE)]
        n: usize,
        /// Seed of the corpus generator.
        #[arg(long, default_value_t = 42)]
        corpus_seed: u64,
        /// Only write the corpus file.
        #[arg(long)]
        generate_only: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides = cli.common.overrides.clone();
    if let Some(seed) = cli.common.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Command::Map { color_by: Some(c) } = &cli.command {
        overrides.push(format!("color_by={c:?}"));
    }
    let config = PipelineConfig::load(cli.common.config.as_deref(), &overrides)?;
    let pipeline = Pipeline::new(&cli.common.workdir, config)?.force(cli.common.force);

    match cli.command {
        Command::Ingest { input } => {
            let report = pipeline.ingest(&input)?;
            println!("ingested {} documents ({} without text)", report.count, report.empty.len());
        }
        Command::Embed => println!("embedded {} new documents", pipeline.embed()?),
        Command::Score => println!("computed {} new scores", pipeline.score()?),
        Command::Project => {
            let d = pipeline.project()?;
            println!("projected {} documents; intrinsic dimension {:.2}", d.n_points, d.dimension);
        }
        Command::Partition => {
            let regions = pipeline.partition()?;
            let core = regions.iter().filter(|r| r.density_core).count();
            println!("partitioned {} documents; {core} in the density core", regions.len());
        }
        Command::Prune => print_report(&pipeline.prune()?),
        Command::Profile => {
            pipeline.profile()?;
            println!("profiles written to {}", cli.common.workdir.display());
        }
        Command::Map { .. } => {
            pipeline.map()?;
            println!("map written to {}", cli.common.workdir.display());
        }
        Command::Demo { n, corpus_seed, generate_only } => {
            let source = cli.common.workdir.join("demo_source.jsonl");
            std::fs::create_dir_all(&cli.common.workdir)
                .with_context(|| format!("creating {}", cli.common.workdir.display()))?;
            write_jsonl(&source, &synthetic_corpus(n, corpus_seed))?;
            println!("wrote {n} synthetic documents to {}", source.display());
            if !generate_only {
                print_report(&pipeline.run_all(&source)?);
            }
        }
    }
    Ok(())
}

fn print_report(r: &textsignal::cascade::CascadeReport) {
    println!(
        "removed {} of {} documents ({:.1}%): global {}, local {}, structural {}; density noise {}",
        r.n_unique_removed,
        r.n_total,
        100.0 * r.removal_fraction,
        r.n_global_outliers,
        r.n_local_mavericks,
        r.n_structural_outliers,
        r.n_density_noise
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let transport = err
                .downcast_ref::<textsignal::Error>()
                .is_some_and(textsignal::Error::is_transport);
            if let Some(textsignal::Error::Transport { failed_doc_ids, .. }) = err.downcast_ref() {
                eprintln!("failed doc_ids: {}", failed_doc_ids.join(", "));
            }
            ExitCode::from(if transport { 2 } else { 1 })
        }
    }
}
