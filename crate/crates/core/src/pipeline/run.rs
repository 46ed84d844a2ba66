use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::dataset::{load_dataset, DatasetRecord};
use super::metrics::{mae, write_metrics};
use super::split::split_dataset;
use super::PipelineError;
use crate::crystal::build_graph;
use crate::elementkg::{
    build_kg, build_triples, bundled_table, default_rules, read_triples, write_triples,
    ElementTable,
};
use crate::kgembed::{
    lexical_document, merge_corpora, read_embeddings, structural_document, train_skipgram,
    write_corpus, write_embeddings, EmbeddingTable,
};
use crate::model::{
    predict_value, prepare_sample, train_loop, Checkpoint, CheckpointMeta, PreparedSample,
};

/// Record of one run: the effective config with its hash, the derived stage
/// seeds, and a SHA-256 per output file. The manifest file itself is the
/// only output it cannot list.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub config: RunConfig,
    pub config_sha256: String,
    pub stage_seeds: BTreeMap<String, u64>,
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    fn new(cfg: &RunConfig) -> Self {
        let mut stage_seeds = BTreeMap::new();
        stage_seeds.insert("walks".to_string(), cfg.walk.seed);
        stage_seeds.insert("skipgram".to_string(), cfg.embed.seed);
        stage_seeds.insert("model".to_string(), cfg.model.seed);
        stage_seeds.insert("train".to_string(), cfg.train.seed);
        stage_seeds.insert("split".to_string(), cfg.split.seed);
        let config_json = serde_json::to_vec(cfg).expect("config serializes");
        Self {
            config: cfg.clone(),
            config_sha256: sha256_hex(&config_json),
            stage_seeds,
            files: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Evaluation {
    pub target: String,
    pub unit: String,
    pub mae: f64,
    pub count: usize,
    /// Path of the per-sample residual table, relative to the output dir.
    pub residuals: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes each buffer into the output directory and returns name -> hash.
fn write_files(
    cfg: &RunConfig,
    entries: Vec<(&str, Vec<u8>)>,
) -> Result<BTreeMap<String, String>, PipelineError> {
    fs::create_dir_all(&cfg.out_dir)?;
    let mut files = BTreeMap::new();
    for (name, bytes) in entries {
        fs::write(cfg.out_path(name), &bytes)?;
        files.insert(name.to_string(), sha256_hex(&bytes));
    }
    Ok(files)
}

fn load_table(cfg: &RunConfig) -> Result<Cow<'static, ElementTable>, PipelineError> {
    match &cfg.element_table {
        Some(path) => Ok(Cow::Owned(ElementTable::load(path)?)),
        None => Ok(Cow::Borrowed(bundled_table())),
    }
}

fn load_embeddings(cfg: &RunConfig) -> Result<EmbeddingTable, PipelineError> {
    let path = cfg.embeddings_path();
    let file = File::open(&path).map_err(|e| {
        PipelineError::MissingInput(format!(
            "embedding table {} ({e}); run kg-embed first",
            path.display()
        ))
    })?;
    Ok(read_embeddings(BufReader::new(file))?)
}

/// Discretizes the element table and writes the knowledge-graph triples.
pub fn stage_kg_build(cfg: &RunConfig) -> Result<BTreeMap<String, String>, PipelineError> {
    let table = load_table(cfg)?;
    let rules = default_rules(&table, cfg.kg_bins)?;
    let triples = build_triples(&table, &rules)?;
    let mut buf = Vec::new();
    write_triples(&mut buf, &triples)?;
    write_files(cfg, vec![("triples.tsv", buf)])
}

/// Walks the knowledge graph, merges in the lexical sentences, trains
/// skip-gram, and writes both corpora plus the element embeddings.
pub fn stage_kg_embed(cfg: &RunConfig) -> Result<BTreeMap<String, String>, PipelineError> {
    let path = cfg.out_path("triples.tsv");
    let file = File::open(&path).map_err(|e| {
        PipelineError::MissingInput(format!(
            "triples {} ({e}); run kg-build first",
            path.display()
        ))
    })?;
    let triples = read_triples(BufReader::new(file))?;
    let kg = build_kg(&triples);

    let walks = structural_document(&kg, &cfg.walk);
    let lexical = lexical_document(&kg);
    let corpus = merge_corpora(&walks, &lexical);
    let outcome = train_skipgram(&corpus, &cfg.embed)?;

    let mut walks_buf = Vec::new();
    write_corpus(&mut walks_buf, &walks)?;
    let mut lexical_buf = Vec::new();
    write_corpus(&mut lexical_buf, &lexical)?;
    let mut embed_buf = Vec::new();
    write_embeddings(&mut embed_buf, &outcome.embeddings)?;
    write_files(
        cfg,
        vec![
            ("corpus_walks.txt", walks_buf),
            ("corpus_lexical.txt", lexical_buf),
            ("embeddings.txt", embed_buf),
        ],
    )
}

struct GraphStats {
    id: String,
    atoms: usize,
    edges: usize,
    effective_cutoff: f64,
}

/// Builds crystal graphs and model inputs for every record, in parallel but
/// in input order. Targets are attached when present and checked later.
fn featurize_records(
    records: &[DatasetRecord],
    table: &ElementTable,
    embeddings: &EmbeddingTable,
    cfg: &RunConfig,
) -> Result<Vec<(GraphStats, PreparedSample)>, PipelineError> {
    records
        .par_iter()
        .map(|r| {
            let graph = build_graph(&r.structure, table, &cfg.graph)?;
            let stats = GraphStats {
                id: r.id().to_string(),
                atoms: graph.num_nodes(),
                edges: graph.num_edges(),
                effective_cutoff: graph.effective_cutoff,
            };
            let sample =
                prepare_sample(&graph, Some(embeddings), &cfg.model, r.target(&cfg.target))?;
            Ok((stats, sample))
        })
        .collect()
}

fn require_targets(samples: &[PreparedSample], target: &str) -> Result<(), PipelineError> {
    for s in samples {
        if s.target.is_none() {
            return Err(PipelineError::MissingTarget {
                id: s.id.clone(),
                target: target.to_string(),
            });
        }
    }
    Ok(())
}

/// Featurizes the whole dataset and writes a per-structure graph summary.
/// Fails with MissingInput when the element embeddings are absent.
pub fn stage_featurize(cfg: &RunConfig) -> Result<BTreeMap<String, String>, PipelineError> {
    let table = load_table(cfg)?;
    let records = load_dataset(&cfg.dataset, &table)?;
    let embeddings = load_embeddings(cfg)?;
    let featurized = featurize_records(&records, &table, &embeddings, cfg)?;
    let mut buf = Vec::new();
    for (stats, sample) in &featurized {
        use std::io::Write;
        writeln!(
            buf,
            "{}\t{}\t{}\t{}\t{}",
            stats.id,
            stats.atoms,
            stats.edges,
            stats.effective_cutoff,
            sample.node_features.cols
        )?;
    }
    write_files(cfg, vec![("graphs.tsv", buf)])
}

/// Splits the dataset, trains with the configured preset, and writes the
/// per-epoch metrics plus the selected checkpoint.
pub fn stage_train(cfg: &RunConfig) -> Result<BTreeMap<String, String>, PipelineError> {
    let table = load_table(cfg)?;
    let records = load_dataset(&cfg.dataset, &table)?;
    let embeddings = load_embeddings(cfg)?;
    let (train_r, val_r, _) = split_dataset(&records, &cfg.split)?;

    let train_s: Vec<PreparedSample> = featurize_records(&train_r, &table, &embeddings, cfg)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let val_s: Vec<PreparedSample> = featurize_records(&val_r, &table, &embeddings, cfg)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    require_targets(&train_s, &cfg.target)?;
    require_targets(&val_s, &cfg.target)?;

    let meta = CheckpointMeta {
        model: cfg.model.clone(),
        graph: cfg.graph.clone(),
        target: cfg.target.clone(),
        unit: cfg.unit.clone(),
    };
    let outcome = train_loop(&train_s, &val_s, &meta, &cfg.train)?;

    let mut metrics_buf = Vec::new();
    write_metrics(&mut metrics_buf, &outcome.metrics)?;
    write_files(
        cfg,
        vec![
            ("metrics.tsv", metrics_buf),
            ("checkpoint.bin", outcome.checkpoint.to_bytes()),
        ],
    )
}

fn load_checkpoint(cfg: &RunConfig) -> Result<Checkpoint, PipelineError> {
    let path = cfg.out_path("checkpoint.bin");
    if !path.exists() {
        return Err(PipelineError::MissingInput(format!(
            "checkpoint {}; run train first",
            path.display()
        )));
    }
    Ok(Checkpoint::load(&path)?)
}

/// Runs the trained model over the test split and writes the evaluation
/// summary plus per-sample residuals. The checkpoint's own metadata decides
/// the model shape, target, and unit.
pub fn stage_evaluate(
    cfg: &RunConfig,
) -> Result<(Evaluation, BTreeMap<String, String>), PipelineError> {
    let checkpoint = load_checkpoint(cfg)?;
    let meta = &checkpoint.meta;
    let table = load_table(cfg)?;
    let records = load_dataset(&cfg.dataset, &table)?;
    let embeddings = load_embeddings(cfg)?;
    let (_, _, test_r) = split_dataset(&records, &cfg.split)?;

    let eval_cfg = RunConfig {
        graph: meta.graph.clone(),
        model: meta.model.clone(),
        target: meta.target.clone(),
        ..cfg.clone()
    };
    let samples: Vec<PreparedSample> = featurize_records(&test_r, &table, &embeddings, &eval_cfg)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    require_targets(&samples, &meta.target)?;

    let preds: Vec<f64> = samples
        .par_iter()
        .map(|s| predict_value(&meta.model, &checkpoint.params, s))
        .collect::<Result<_, _>>()?;
    let targets: Vec<f64> = samples.iter().map(|s| s.target.unwrap()).collect();
    let evaluation = Evaluation {
        target: meta.target.clone(),
        unit: meta.unit.clone(),
        mae: mae(&preds, &targets)?,
        count: preds.len(),
        residuals: "residuals.tsv".to_string(),
    };

    let mut eval_buf = serde_json::to_vec_pretty(&evaluation).expect("evaluation serializes");
    eval_buf.push(b'\n');
    let mut residuals = Vec::new();
    for (s, (p, t)) in samples.iter().zip(preds.iter().zip(&targets)) {
        use std::io::Write;
        writeln!(residuals, "{}\t{}\t{}\t{}", s.id, t, p, p - t)?;
    }
    let files = write_files(
        cfg,
        vec![("evaluation.json", eval_buf), ("residuals.tsv", residuals)],
    )?;
    Ok((evaluation, files))
}

/// Predicts every record in the dataset with the trained checkpoint and
/// writes `id<TAB>prediction` lines. Targets are not required.
pub fn stage_predict(cfg: &RunConfig) -> Result<BTreeMap<String, String>, PipelineError> {
    let checkpoint = load_checkpoint(cfg)?;
    let meta = &checkpoint.meta;
    let table = load_table(cfg)?;
    let records = load_dataset(&cfg.dataset, &table)?;
    let embeddings = load_embeddings(cfg)?;

    let predict_cfg = RunConfig {
        graph: meta.graph.clone(),
        model: meta.model.clone(),
        target: meta.target.clone(),
        ..cfg.clone()
    };
    let featurized = featurize_records(&records, &table, &embeddings, &predict_cfg)?;
    let preds: Vec<f64> = featurized
        .par_iter()
        .map(|(_, s)| predict_value(&meta.model, &checkpoint.params, s))
        .collect::<Result<_, _>>()?;

    let mut buf = Vec::new();
    for ((stats, _), p) in featurized.iter().zip(&preds) {
        use std::io::Write;
        writeln!(buf, "{}\t{}", stats.id, p)?;
    }
    write_files(cfg, vec![("predictions.tsv", buf)])
}

/// Fails fast when a configured input path is absent, so a long run cannot
/// die on a typo several stages in.
fn check_inputs(cfg: &RunConfig) -> Result<(), PipelineError> {
    let mut required = vec![("dataset", cfg.dataset.as_path())];
    if let Some(table) = &cfg.element_table {
        required.push(("element table", table.as_path()));
    }
    if let Some(embeddings) = &cfg.embedding_table {
        required.push(("embedding table", embeddings.as_path()));
    }
    for (label, path) in required {
        if !path.exists() {
            return Err(PipelineError::MissingInput(format!(
                "{label} {}",
                path.display()
            )));
        }
    }
    Ok(())
}

/// Runs every stage in order and writes the manifest. Evaluation is
/// skipped when the split holds out no test records.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest, PipelineError> {
    check_inputs(cfg)?;
    let mut manifest = Manifest::new(cfg);
    manifest
        .files
        .extend(stage_kg_build(cfg).map_err(|e| PipelineError::in_stage("kg-build", e))?);
    manifest
        .files
        .extend(stage_kg_embed(cfg).map_err(|e| PipelineError::in_stage("kg-embed", e))?);
    manifest
        .files
        .extend(stage_featurize(cfg).map_err(|e| PipelineError::in_stage("featurize", e))?);
    manifest
        .files
        .extend(stage_train(cfg).map_err(|e| PipelineError::in_stage("train", e))?);
    if cfg.split.n_test > 0 {
        let (_, files) =
            stage_evaluate(cfg).map_err(|e| PipelineError::in_stage("evaluate", e))?;
        manifest.files.extend(files);
    }
    fs::write(cfg.out_path("manifest.json"), manifest.to_json())?;
    Ok(manifest)
}
