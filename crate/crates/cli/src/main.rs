use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use traitcooc::corpus::{open_corpus, read_corpus, ReadError};
use traitcooc_cli::report::write_report;
use traitcooc_cli::results::load_results;
use traitcooc_cli::{Layout, Pipeline, PipelineConfig};

#[derive(Parser)]
#[command(name = "traitcooc", version, about = "Co-occurrence ablation experiments on word embeddings")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = default_jobs())]
    jobs: usize,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build concept-trait subsets from feature norms.
    BuildDataset,
    /// Split each corpus into main and reserve parts.
    Split,
    /// Remove co-occurrences for every (trait type, method) cell.
    Ablate,
    /// Train the with- and without-co-occurrence models.
    Train,
    /// Probe all models and write the results CSV.
    Probe,
    /// Tables, ΔAcc CSV and plots from a results CSV.
    Report {
        /// Results CSV; defaults to the pipeline's own.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// All stages in order.
    Run,
    /// Check CoNLL-U files against the reader and count rejected blocks.
    Validate { files: Vec<PathBuf> },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli.config.as_ref().context("--config is required for this command")?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn pipeline(cli: &Cli) -> Result<Pipeline> {
    Pipeline::new(load_config(cli)?, cli.jobs)
}

fn report(cli: &Cli, results: Option<PathBuf>) -> Result<()> {
    let root = match (&cli.out, &cli.config) {
        (Some(o), _) => o.clone(),
        (None, Some(_)) => load_config(cli)?.out_dir,
        (None, None) => bail!("report needs --config or --out"),
    };
    let layout = Layout::new(&root);
    let results = results.unwrap_or_else(|| layout.results());
    let rows = load_results(&results)?;
    let files = write_report(&rows, &layout.report_dir())?;
    for t in &files.tables {
        println!("{}", t.display());
        print!("{}", std::fs::read_to_string(t)?);
    }
    println!("{}", files.deltas.display());
    for f in &files.figures {
        println!("{}", f.display());
    }
    Ok(())
}

fn validate(files: &[PathBuf]) -> Result<bool> {
    let mut clean = true;
    for f in files {
        let (mut ok, mut rejected) = (0u64, 0u64);
        for item in read_corpus(open_corpus(f)?) {
            match item {
                Ok(_) => ok += 1,
                Err(ReadError::Rejected(e)) => {
                    eprintln!("{}: {e}", f.display());
                    rejected += 1;
                }
                Err(ReadError::Io(e)) => return Err(e).with_context(|| format!("reading {}", f.display())),
            }
        }
        println!("{}\t{ok} sentences\t{rejected} rejected", f.display());
        clean &= rejected == 0;
    }
    Ok(clean)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::BuildDataset => {
            for line in pipeline(cli)?.build_datasets()? {
                println!("{line}");
            }
        }
        Command::Split => {
            let mut p = pipeline(cli)?;
            for (c, info) in p.cfg.corpora.clone().iter().zip(p.split()?) {
                println!("{}\tmain {}\treserve {}\trejected {}", c.name, info.main_sentences, info.reserve_sentences, info.rejected);
            }
        }
        Command::Ablate => {
            let reports = pipeline(cli)?.ablate()?;
            print!("{}", traitcooc::ablation::removal_table(&reports));
        }
        Command::Train => {
            for m in pipeline(cli)?.train()? {
                println!("{}", m.output.display());
            }
        }
        Command::Probe => {
            let mut p = pipeline(cli)?;
            let rows = p.probe()?;
            println!("{} result rows in {}", rows.len(), p.layout.results().display());
        }
        Command::Report { results } => report(cli, results.clone())?,
        Command::Run => {
            let mut p = pipeline(cli)?;
            for line in p.build_datasets()? {
                println!("{line}");
            }
            p.ablate()?;
            p.train()?;
            p.probe()?;
            report(cli, None)?;
        }
        Command::Validate { files } => return validate(files),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
