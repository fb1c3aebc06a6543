use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lemmata_cli::{commands, Experiment};
use lemmata_core::{induce, CacheMode};

#[derive(Parser)]
#[command(name = "lemmata", version, about = "Contextual lemmatization experiments")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured cache mode: live, record or replay.
    #[arg(long, global = true)]
    cache_mode: Option<CacheMode>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read corpora, write normalized copies and corpus statistics.
    Ingest,
    /// Write train/dev/test manifests and split files.
    Split,
    /// Build edit-script inventories, or induce one script with --form/--lemma.
    Induce {
        #[arg(long, requires = "lemma")]
        form: Option<String>,
        #[arg(long, requires = "form")]
        lemma: Option<String>,
    },
    /// Train and save the frequency baselines.
    TrainBaseline,
    /// Produce predictions for every system.
    Run,
    /// Score predictions and run significance tests.
    Score,
    /// Show McNemar results between two systems.
    Compare {
        system_a: String,
        system_b: String,
        #[arg(long)]
        corpus: Option<String>,
    },
    /// Print the results table.
    Report,
}

fn load(cli: &Cli) -> Result<Experiment> {
    let path = cli.config.as_deref().context("--config is required for this command")?;
    let mut exp = Experiment::load(path)?;
    if let Some(mode) = cli.cache_mode {
        exp.config.cache_mode = mode;
    }
    if let Some(dir) = &cli.output_dir {
        exp.config.output_dir = std::env::current_dir()?.join(dir);
    }
    Ok(exp)
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Induce {
            form: Some(form),
            lemma: Some(lemma),
        } => {
            let script = induce(form, lemma);
            println!("{}\tcost={}", script.encode(), script.cost());
        }
        Command::Induce { .. } => print_paths(&commands::cmd_induce(&load(&cli)?)?),
        Command::Ingest => {
            let summaries = commands::cmd_ingest(&load(&cli)?)?;
            print!("{}", commands::render_stats(&summaries));
        }
        Command::Split => print_paths(&commands::cmd_split(&load(&cli)?)?),
        Command::TrainBaseline => print_paths(&commands::cmd_train_baseline(&load(&cli)?)?),
        Command::Run => {
            let summary = commands::cmd_run(&load(&cli)?)?;
            println!(
                "wrote {} files; {} live calls; {} failed sentences",
                summary.files.len(),
                summary.live_calls,
                summary.failures
            );
        }
        Command::Score => print!("{}", commands::cmd_score(&load(&cli)?)?.table()),
        Command::Compare {
            system_a,
            system_b,
            corpus,
        } => {
            for c in commands::cmd_compare(&load(&cli)?, system_a, system_b, corpus.as_deref())? {
                for (level, r) in [("tokens", &c.tokens), ("sentences", &c.sentences)] {
                    println!(
                        "{}\t{} vs {}\t{level}\tb01={} b10={}\t{:?}\tp={:.4e}\t{}",
                        c.corpus,
                        c.system_a,
                        c.system_b,
                        r.b01,
                        r.b10,
                        r.method,
                        r.p_value,
                        if r.significant { "significant" } else { "not significant" }
                    );
                }
            }
        }
        Command::Report => print!("{}", commands::cmd_report(&load(&cli)?)?),
    }
    Ok(())
}
