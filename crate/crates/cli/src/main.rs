//! Command line front end for the crysfuse pipeline.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 missing or malformed
//! data, 3 numerical blow-up during training.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crysfuse_core::model::AblationMode;
use crysfuse_core::pipeline::{
    run_pipeline, stage_evaluate, stage_featurize, stage_kg_build, stage_kg_embed, stage_predict,
    stage_train, PipelineError, RunConfig,
};

#[derive(Parser)]
#[command(name = "crysfuse", version, about = "Crystal property prediction with a fused element knowledge graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discretize the element table into knowledge-graph triples
    KgBuild(Common),
    /// Generate walk and lexical corpora, then train element embeddings
    KgEmbed(Common),
    /// Build periodic crystal graphs and model inputs for the dataset
    Featurize(Common),
    /// Train the property regressor on the configured split
    Train(TrainArgs),
    /// Score the trained checkpoint on the held-out test split
    Evaluate(Common),
    /// Predict the target for every record in the dataset
    Predict(Common),
    /// Run kg-build, kg-embed, featurize, train, and evaluate in order
    Run(TrainArgs),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON); built-in defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every stage seed is derived from it
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Apply a task preset (band_gap or formation_energy)
    #[arg(long)]
    task: Option<String>,
    /// Skip the composition branch; append element embeddings to node features
    #[arg(long)]
    no_kg_encoder: bool,
}

fn load_config(common: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn finalized(mut cfg: RunConfig) -> Result<RunConfig, PipelineError> {
    cfg.finalize()?;
    Ok(cfg)
}

fn train_config(args: &TrainArgs) -> Result<RunConfig, PipelineError> {
    let mut cfg = load_config(&args.common)?;
    if let Some(task) = &args.task {
        cfg.task = Some(task.clone());
    }
    if args.no_kg_encoder {
        cfg.model.ablation_mode = AblationMode::AttrsAsNodeFeatures;
    }
    Ok(cfg)
}

fn report(files: &BTreeMap<String, String>, cfg: &RunConfig) {
    for name in files.keys() {
        println!("wrote {}", cfg.out_path(name).display());
    }
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::KgBuild(c) => {
            let cfg = finalized(load_config(&c)?)?;
            report(&stage_kg_build(&cfg)?, &cfg);
        }
        Command::KgEmbed(c) => {
            let cfg = finalized(load_config(&c)?)?;
            report(&stage_kg_embed(&cfg)?, &cfg);
        }
        Command::Featurize(c) => {
            let cfg = finalized(load_config(&c)?)?;
            report(&stage_featurize(&cfg)?, &cfg);
        }
        Command::Train(args) => {
            let cfg = finalized(train_config(&args)?)?;
            report(&stage_train(&cfg)?, &cfg);
        }
        Command::Evaluate(c) => {
            let cfg = finalized(load_config(&c)?)?;
            let (eval, files) = stage_evaluate(&cfg)?;
            report(&files, &cfg);
            println!(
                "{} MAE over {} structures: {} {}",
                eval.target, eval.count, eval.mae, eval.unit
            );
        }
        Command::Predict(c) => {
            let cfg = finalized(load_config(&c)?)?;
            report(&stage_predict(&cfg)?, &cfg);
        }
        Command::Run(args) => {
            let cfg = finalized(train_config(&args)?)?;
            let manifest = run_pipeline(&cfg)?;
            report(&manifest.files, &cfg);
            println!("wrote {}", cfg.out_path("manifest.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version come back as errors too; they print to
            // stdout and exit zero, real usage mistakes exit one.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
