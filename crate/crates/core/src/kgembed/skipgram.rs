use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::EmbedError;
use crate::rng::stream;

/// Exponent flattening the unigram distribution for negative sampling.
const NEGATIVE_SAMPLING_POWER: f64 = 0.75;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Symmetric context radius in tokens.
    pub window: usize,
    /// Negative samples per (center, context) pair.
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Tokens rarer than this are dropped from training and the vocabulary.
    pub min_count: u64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            window: 5,
            negatives: 5,
            learning_rate: 0.025,
            epochs: 10,
            min_count: 1,
            seed: 0,
        }
    }
}

/// Tokens surviving `min_count`, sorted by descending count then token, so
/// ids are stable for identical corpora.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    ids: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn from_corpus(corpus: &Corpus, min_count: u64) -> Result<Self, EmbedError> {
        let mut pairs: Vec<(String, u64)> = corpus
            .counts()
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(t, &c)| (t.clone(), c))
            .collect();
        if pairs.is_empty() {
            return Err(EmbedError::EmptyVocabulary);
        }
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut ids = BTreeMap::new();
        let mut tokens = Vec::with_capacity(pairs.len());
        let mut counts = Vec::with_capacity(pairs.len());
        for (i, (t, c)) in pairs.into_iter().enumerate() {
            ids.insert(t.clone(), i);
            tokens.push(t);
            counts.push(c);
        }
        Ok(Self {
            tokens,
            counts,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }
}

/// Input (center) and output (context) vectors, one row per vocabulary id.
#[derive(Debug, Clone)]
pub struct SkipGramParams {
    pub dim: usize,
    pub input: Vec<Vec<f64>>,
    pub output: Vec<Vec<f64>>,
}

impl SkipGramParams {
    /// word2vec-style init: inputs uniform in `[-0.5/dim, 0.5/dim)`, outputs
    /// zero.
    pub fn init(vocab: usize, dim: usize, seed: u64) -> Self {
        let mut rng = stream(seed, &[0x736b6970]);
        let half = 0.5 / dim as f64;
        let input = (0..vocab)
            .map(|_| (0..dim).map(|_| rng.gen_range(-half..half)).collect())
            .collect();
        let output = vec![vec![0.0; dim]; vocab];
        Self { dim, input, output }
    }
}

/// Gradients for one (center, context, negatives) example. Negative entries
/// are per drawn sample; duplicates must be summed by the caller.
#[derive(Debug, Clone)]
pub struct PairGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<(usize, Vec<f64>)>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `-ln sigmoid(x)`, computed without overflow for large `|x|`.
fn softplus_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Negative-sampling loss and exact gradients for one training example:
///
/// `L = -ln sigmoid(u_ctx . v) - sum_neg ln sigmoid(-u_neg . v)`
///
/// with `v` the center's input vector and `u` output vectors.
pub fn skipgram_loss_grad(
    params: &SkipGramParams,
    center: usize,
    context: usize,
    negatives: &[usize],
) -> (f64, PairGradients) {
    let v = &params.input[center];
    let u = &params.output[context];
    let dim = params.dim;

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let s_pos = dot(v, u);
    let mut loss = softplus_neg(s_pos);
    let g_pos = sigmoid(s_pos) - 1.0;

    let mut d_center: Vec<f64> = u.iter().map(|x| g_pos * x).collect();
    let d_context: Vec<f64> = v.iter().map(|x| g_pos * x).collect();

    let mut d_negatives = Vec::with_capacity(negatives.len());
    for &n in negatives {
        let un = &params.output[n];
        let s_neg = dot(v, un);
        loss += softplus_neg(-s_neg);
        let g_neg = sigmoid(s_neg);
        for k in 0..dim {
            d_center[k] += g_neg * un[k];
        }
        d_negatives.push((n, v.iter().map(|x| g_neg * x).collect()));
    }

    (
        loss,
        PairGradients {
            center: d_center,
            context: d_context,
            negatives: d_negatives,
        },
    )
}

/// Token embeddings: the trained input vectors keyed by token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    /// Insertion order follows vocabulary order (count desc, token asc).
    order: Vec<String>,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            order: Vec::new(),
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<(), EmbedError> {
        if vector.len() != self.dim {
            return Err(EmbedError::DimensionMismatch {
                token: token.to_string(),
                found: vector.len(),
                expected: self.dim,
            });
        }
        if !vector.iter().all(|x| x.is_finite()) {
            return Err(EmbedError::Invalid(format!(
                "embedding for {token} has non-finite components"
            )));
        }
        if self.vectors.insert(token.to_string(), vector).is_none() {
            self.order.push(token.to_string());
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone)]
pub struct SkipGramOutcome {
    pub embeddings: EmbeddingTable,
    /// Mean per-pair loss for each epoch.
    pub epoch_loss: Vec<f64>,
}

/// Trains skip-gram with negative sampling by plain SGD over all
/// (center, context) pairs within the window, in document order. Negatives
/// draw from the unigram distribution raised to 3/4. Single threaded and
/// fully determined by `cfg.seed`.
pub fn train_skipgram(corpus: &Corpus, cfg: &SkipGramConfig) -> Result<SkipGramOutcome, EmbedError> {
    if cfg.dim == 0 || cfg.window == 0 {
        return Err(EmbedError::Invalid(
            "dim and window must be positive".into(),
        ));
    }
    let vocab = Vocabulary::from_corpus(corpus, cfg.min_count)?;
    let mut params = SkipGramParams::init(vocab.len(), cfg.dim, cfg.seed);

    // Cumulative table for count^(3/4) sampling.
    let mut cumulative = Vec::with_capacity(vocab.len());
    let mut total = 0.0;
    for id in 0..vocab.len() {
        total += (vocab.count(id) as f64).powf(NEGATIVE_SAMPLING_POWER);
        cumulative.push(total);
    }

    let docs: Vec<Vec<usize>> = corpus
        .documents()
        .iter()
        .map(|doc| doc.iter().filter_map(|t| vocab.id(t)).collect())
        .collect();

    let mut rng = stream(cfg.seed, &[0x747261696e]);
    let draw_negative = |rng: &mut rand_chacha::ChaCha8Rng| {
        let x = rng.gen_range(0.0..total);
        match cumulative.binary_search_by(|c| c.partial_cmp(&x).expect("finite")) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
        .min(vocab.len() - 1)
    };

    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut negatives = Vec::with_capacity(cfg.negatives);
    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0u64;
        for doc in &docs {
            for (pos, &center) in doc.iter().enumerate() {
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window + 1).min(doc.len());
                for ctx_pos in lo..hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = doc[ctx_pos];
                    negatives.clear();
                    for _ in 0..cfg.negatives {
                        let n = draw_negative(&mut rng);
                        // A draw colliding with the true context is skipped,
                        // not redrawn, so sampling always terminates.
                        if n != context {
                            negatives.push(n);
                        }
                    }
                    let (loss, grads) = skipgram_loss_grad(&params, center, context, &negatives);
                    loss_sum += loss;
                    pairs += 1;
                    let lr = cfg.learning_rate;
                    for k in 0..cfg.dim {
                        params.input[center][k] -= lr * grads.center[k];
                    }
                    for k in 0..cfg.dim {
                        params.output[context][k] -= lr * grads.context[k];
                    }
                    for (n, g) in &grads.negatives {
                        for k in 0..cfg.dim {
                            params.output[*n][k] -= lr * g[k];
                        }
                    }
                }
            }
        }
        epoch_loss.push(if pairs == 0 {
            0.0
        } else {
            loss_sum / pairs as f64
        });
    }

    let mut embeddings = EmbeddingTable::new(cfg.dim);
    for id in 0..vocab.len() {
        embeddings.insert(vocab.token(id), params.input[id].clone())?;
    }
    Ok(SkipGramOutcome {
        embeddings,
        epoch_loss,
    })
}

/// Text format: header `<vocab_size> <dim>`, then one `token v1 ... vdim`
/// line per token in table order, full round-trip precision.
pub fn write_embeddings<W: Write>(mut w: W, table: &EmbeddingTable) -> std::io::Result<()> {
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for token in table.tokens() {
        let vector = table.get(token).expect("token in table");
        write!(w, "{token}")?;
        for x in vector {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_embeddings<R: BufRead>(r: R) -> Result<EmbeddingTable, EmbedError> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| EmbedError::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(n), Some(d), None) => {
            let n: usize = n.parse().map_err(|_| EmbedError::Parse {
                line: 1,
                message: "bad vocabulary size".into(),
            })?;
            let d: usize = d.parse().map_err(|_| EmbedError::Parse {
                line: 1,
                message: "bad dimension".into(),
            })?;
            (n, d)
        }
        _ => {
            return Err(EmbedError::Parse {
                line: 1,
                message: "header must be '<vocab_size> <dim>'".into(),
            })
        }
    };

    let mut table = EmbeddingTable::new(dim);
    for (no, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().ok_or_else(|| EmbedError::Parse {
            line: no + 1,
            message: "missing token".into(),
        })?;
        let vector: Vec<f64> = parts
            .map(|s| {
                s.parse::<f64>().map_err(|_| EmbedError::Parse {
                    line: no + 1,
                    message: format!("bad component {s:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        table.insert(token, vector)?;
    }
    if table.len() != count {
        return Err(EmbedError::Parse {
            line: 1,
            message: format!("header claims {count} tokens, file has {}", table.len()),
        });
    }
    Ok(table)
}
