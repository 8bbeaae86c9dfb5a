use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use kgqa_core::eval::{load_dataset, run_benchmark, write_records_jsonl, write_records_tsv};
use kgqa_core::index::IndexSet;
use kgqa_core::synth::{self, SynthParams};
use kgqa_core::{AskOptions, Config, Pipeline, Status};
use kgqa_cli::commands;
use kgqa_cli::service::{serve_blocking, AskResponse};

#[derive(Parser)]
#[command(name = "kgqa", version, about = "Question answering over RDF knowledge graphs")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, short, global = true, env = "KGQA_CONFIG")]
    config: Option<PathBuf>,
    /// Configuration override, `key=value`; repeatable.
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question.
    Ask {
        question: String,
        /// Gold query for the oracle ranker.
        #[arg(long)]
        gold: Option<String>,
        /// Print the response as JSON.
        #[arg(long)]
        json: bool,
        /// Include the search trace.
        #[arg(long, short)]
        verbose: bool,
        #[arg(long, default_value_t = 20)]
        max_rows: usize,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Write training data for skeleton generation and re-ranking.
    Synth {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a benchmark file of {id, question, sparql} lines.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory for report.json, records.jsonl and records.tsv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search index maintenance.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Knowledge graph files.
    Kg {
        #[command(subcommand)]
        command: KgCommand,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Build entity and property indices from label triples of a graph.
    Build {
        /// Graph as TSV or N-Triples (`.nt`).
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum KgCommand {
    /// Load and check a graph; optionally write it back as TSV.
    Load {
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<Config> {
    Ok(Config::load(cli.config.as_deref(), std::env::vars(), &cli.overrides)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Ask {
            question,
            gold,
            json,
            verbose,
            max_rows,
        } => {
            let cfg = load_config(&cli)?;
            cfg.validate_for_answering()?;
            let hash = cfg.hash();
            let pipeline = Pipeline::from_config(cfg)?;
            let answer = pipeline.answer(
                question,
                &AskOptions {
                    gold_sparql: gold.clone(),
                    config: None,
                },
            )?;
            let code = match answer.status {
                Status::Answered => ExitCode::SUCCESS,
                Status::NoValidQuery => ExitCode::from(2),
            };
            if *json {
                let resp = AskResponse::from_answer(answer, *verbose, hash);
                println!("{}", serde_json::to_string_pretty(&resp)?);
            } else {
                print!("{}", commands::render_answer(&answer, *max_rows, *verbose));
            }
            Ok(code)
        }
        Command::Serve { addr } => {
            let cfg = load_config(&cli)?;
            cfg.validate_for_answering()?;
            let pipeline = Pipeline::from_config(cfg)?;
            serve_blocking(pipeline, addr)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            dataset,
            out,
            epochs,
            seed,
        } => {
            let cfg = load_config(&cli)?;
            let (Some(e), Some(p)) = (&cfg.entity_index, &cfg.property_index) else {
                anyhow::bail!("synth needs entity_index and property_index in the configuration");
            };
            anyhow::ensure!(*epochs >= 1, "epochs must be at least 1");
            let indices = IndexSet::load_with(e, p, cfg.scoring)?;
            let data = synth::load_dataset(dataset)?;
            let manifest = synth::synthesize_epochs(&data, &indices, &SynthParams::default(), *epochs, *seed, out)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { dataset, out } => {
            let cfg = load_config(&cli)?;
            cfg.validate_for_answering()?;
            let workers = cfg.workers;
            let pipeline = Pipeline::from_config(cfg)?;
            let data = load_dataset(dataset)?;
            let (records, report) = run_benchmark(&pipeline, &data, workers);
            if let Some(dir) = out {
                std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
                std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
                write_records_jsonl(&records, BufWriter::new(File::create(dir.join("records.jsonl"))?))?;
                write_records_tsv(&records, BufWriter::new(File::create(dir.join("records.tsv"))?))?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Index {
            command: IndexCommand::Build { kg, out },
        } => {
            let store = commands::load_kg(kg)?;
            let (e, p) = commands::write_entries_for(&store, out)?;
            println!("{e} entities and {p} properties written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Kg {
            command: KgCommand::Load { path, out },
        } => {
            let store = commands::load_kg(path)?;
            let s = commands::kg_stats(&store);
            println!(
                "{} triples, {} subjects, {} predicates, {} literal objects",
                s.triples, s.subjects, s.predicates, s.literals
            );
            if let Some(out) = out {
                let f = File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
                commands::write_kg_tsv(&store, BufWriter::new(f))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
