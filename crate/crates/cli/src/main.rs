use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lopec::harness::{run_experiment, ExperimentConfig, ExperimentKind, Workbench};
use lopec::verify;
use lopec::OverlapGraph;

#[derive(Debug, Parser)]
#[command(name = "lopec", version, about = "Clique-based noise fingerprint workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML experiment configuration; defaults apply to absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration field, e.g. `--set success.trials=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            cfg = cfg.with_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the AP field and save it as JSON.
    GenWorld {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "world.json")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the collection sessions and save the harvested overlap graph.
    Collect {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "graph.json")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Recompute the clustering coefficients of a saved graph.
    Coeffs {
        #[arg(long)]
        graph: PathBuf,
        /// Defaults to rewriting the input file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment and write its CSV tables and summary.
    Exp {
        kind: ExperimentKind,
        #[arg(long)]
        seed: u64,
        /// Use a saved graph as the device graph instead of collecting one.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the oracle-equivalence suites.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenWorld { seed, out, config } => {
            let wb = Workbench::new(config.load()?, seed)?;
            wb.field.save(&out)?;
            println!(
                "{} APs, field seed {}, {} audible-overlap edges at tau -> {}",
                wb.field.len(),
                wb.field.seed(),
                wb.truth.edge_count(),
                out.display()
            );
        }
        Command::Collect { seed, out, config } => {
            let wb = Workbench::new(config.load()?, seed)?;
            let collection = wb.collect()?;
            let g = collection.last();
            g.save(&out)?;
            println!(
                "{} sessions: |V| = {} of {}, |E| = {} of {} -> {}",
                collection.snapshots.len() - 1,
                g.vertex_count(),
                wb.truth.vertex_count(),
                g.edge_count(),
                wb.truth.edge_count(),
                out.display()
            );
        }
        Command::Coeffs { graph, out } => {
            let mut g = OverlapGraph::load(&graph)?;
            g.recompute_coefficients();
            let out = out.unwrap_or(graph);
            g.save(&out)?;
            println!("coefficients for {} vertices -> {}", g.vertex_count(), out.display());
        }
        Command::Exp {
            kind,
            seed,
            graph,
            output_dir,
            config,
        } => {
            let mut cfg = config.load()?;
            if graph.is_some() {
                cfg.graph_file = graph;
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let report = run_experiment(kind, &cfg, seed)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            for path in report.write(&cfg.output_dir)? {
                eprintln!("wrote {}", path.display());
            }
            print!("{}", report.summary_text());
        }
        Command::Verify { seed } => {
            let results = verify::run_all(seed);
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", r.name, r.detail);
            }
            if results.iter().any(|r| !r.passed) {
                bail!("oracle suites failed");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
