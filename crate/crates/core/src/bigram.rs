//! Open-vocabulary MI-score pipeline for text generation: rule-based
//! tokenize/lemmatize preprocessing, a two-layer logistic bigram model over
//! word embeddings, per-candidate MI scores, and sentence augmentation that
//! duplicates an information-rich word between `[START]`/`[END]` markers.
//!
//! The whole pipeline is deterministic: the lemmatizer is a fixed suffix-rule
//! table, bigram training is seeded per-sample gradient descent over a fixed
//! sample list, and selection ties break toward the earliest sentence
//! position. Preprocessing plus scoring costs O(T + V^2): one marginal table
//! of V^2 joint evaluations, then one score per corpus token.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::Vocab;
use crate::tinylm::MaskedRow;

pub const START_TOKEN: &str = "[START]";
pub const END_TOKEN: &str = "[END]";
pub const DOC_TOKEN: &str = "[DOC]";

#[derive(Debug, thiserror::Error)]
pub enum BigramError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("degenerate corpus: no bigrams")]
    NoBigrams,
    #[error("needs negatives: negatives_per_positive must be at least 1")]
    NeedsNegatives,
    #[error("token id {0} out of vocab")]
    Oov(u32),
    #[error("empty sentence")]
    EmptySentence,
    #[error("model has not been trained")]
    Untrained,
    #[error("invalid dimensions: {0}")]
    Dims(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: invalid record")]
    BadRecord { path: String, line: usize },
}

pub type Result<T> = std::result::Result<T, BigramError>;

// ---------------------------------------------------------------------------
// Preprocessing: sentence split, tokenize, lemmatize
// ---------------------------------------------------------------------------

/// Irregular forms the suffix rules cannot reach.
const LEMMA_EXCEPTIONS: &[(&str, &str)] = &[
    ("am", "be"),
    ("are", "be"),
    ("been", "be"),
    ("is", "be"),
    ("was", "be"),
    ("were", "be"),
    ("did", "do"),
    ("does", "do"),
    ("done", "do"),
    ("had", "have"),
    ("has", "have"),
    ("went", "go"),
    ("gone", "go"),
    ("ran", "run"),
    ("running", "run"),
    ("sat", "sit"),
    ("sitting", "sit"),
    ("children", "child"),
    ("feet", "foot"),
    ("geese", "goose"),
    ("men", "man"),
    ("mice", "mouse"),
    ("teeth", "tooth"),
    ("women", "woman"),
];

fn undouble(stem: &str) -> String {
    let bytes = stem.as_bytes();
    let n = bytes.len();
    if n >= 2 && bytes[n - 1] == bytes[n - 2] && !b"aeiou".contains(&bytes[n - 1]) {
        stem[..n - 1].to_string()
    } else {
        stem.to_string()
    }
}

/// Deterministic rule-based lemmatizer: exception lookup, then ordered
/// suffix rules for -ies/-es/-s/-ing/-ed/-ly with consonant undoubling.
pub fn lemmatize(word: &str) -> String {
    for &(surface, lemma) in LEMMA_EXCEPTIONS {
        if word == surface {
            return lemma.to_string();
        }
    }
    let n = word.len();
    if word.ends_with("ies") && n > 4 {
        return format!("{}y", &word[..n - 3]);
    }
    if word.ends_with("es") && n > 4 {
        let stem = &word[..n - 2];
        if stem.ends_with('s')
            || stem.ends_with('x')
            || stem.ends_with('z')
            || stem.ends_with("ch")
            || stem.ends_with("sh")
        {
            return stem.to_string();
        }
    }
    if word.ends_with('s')
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.ends_with("is")
        && n > 3
    {
        return word[..n - 1].to_string();
    }
    if word.ends_with("ing") && n > 5 {
        return undouble(&word[..n - 3]);
    }
    if word.ends_with("ed") && n > 4 {
        return undouble(&word[..n - 2]);
    }
    if word.ends_with("ly") && n > 4 {
        return word[..n - 2].to_string();
    }
    word.to_string()
}

/// Surface-to-lemma links captured during preprocessing, used to unlemmatize
/// selected words back into surface forms.
#[derive(Debug, Clone, Default)]
pub struct LemmaMap {
    pub lemma_of: HashMap<String, String>,
    /// First surface form seen for each lemma, corpus order.
    pub first_surface: HashMap<String, String>,
}

/// One preprocessed sentence: aligned lemma ids and original surface forms.
#[derive(Debug, Clone)]
pub struct Sentence {
    pub doc: usize,
    pub lemma_ids: Vec<u32>,
    pub surfaces: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub sentences: Vec<Sentence>,
    /// Lemma vocabulary; ids 0..3 are the marker tokens.
    pub vocab: Vocab,
    pub lemma_map: LemmaMap,
    pub n_documents: usize,
}

fn clean_token(raw: &str) -> Option<String> {
    let trimmed: String = raw
        .chars()
        .filter(|c| c.is_alphanumeric() || *c == '\'' || *c == '-')
        .collect();
    let trimmed = trimmed.trim_matches(|c| c == '\'' || c == '-').to_string();
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

/// Splits documents into sentences on `, . : ;`, lowercases, lemmatizes.
pub fn preprocess(corpus: &[String]) -> Result<Preprocessed> {
    if corpus.is_empty() {
        return Err(BigramError::EmptyCorpus);
    }
    let mut vocab = Vocab::new([START_TOKEN, END_TOKEN, DOC_TOKEN]).expect("markers distinct");
    let mut lemma_map = LemmaMap::default();
    let mut sentences = Vec::new();

    for (doc, text) in corpus.iter().enumerate() {
        for raw_sentence in text.split([',', '.', ':', ';']) {
            let mut lemma_ids = Vec::new();
            let mut surfaces = Vec::new();
            for raw in raw_sentence.split_whitespace() {
                let Some(surface) = clean_token(raw) else {
                    continue;
                };
                let lemma = lemmatize(&surface);
                lemma_map
                    .lemma_of
                    .entry(surface.clone())
                    .or_insert_with(|| lemma.clone());
                lemma_map
                    .first_surface
                    .entry(lemma.clone())
                    .or_insert_with(|| surface.clone());
                lemma_ids.push(vocab.intern(&lemma));
                surfaces.push(surface);
            }
            if !lemma_ids.is_empty() {
                sentences.push(Sentence {
                    doc,
                    lemma_ids,
                    surfaces,
                });
            }
        }
    }
    if sentences.is_empty() {
        return Err(BigramError::EmptyCorpus);
    }
    Ok(Preprocessed {
        sentences,
        vocab,
        lemma_map,
        n_documents: corpus.len(),
    })
}

/// Per-document lemma streams with a leading `[DOC]` sentinel; bigram
/// training sees sentence-boundary adjacency, matching the raw text.
pub fn document_streams(pre: &Preprocessed) -> Vec<Vec<u32>> {
    let doc_id = pre.vocab.id_of(DOC_TOKEN).expect("marker present");
    let mut streams: Vec<Vec<u32>> = vec![vec![doc_id]; pre.n_documents];
    for sentence in &pre.sentences {
        streams[sentence.doc].extend_from_slice(&sentence.lemma_ids);
    }
    streams.retain(|s| s.len() > 1);
    streams
}

// ---------------------------------------------------------------------------
// Two-layer logistic bigram model
// ---------------------------------------------------------------------------

const BIGRAM_LR: f64 = 0.05;

/// Joint bigram compatibility model: embeddings plus a two-layer logistic
/// head, `P(s, t) = sigmoid(w2 tanh(w1 [e_s; e_t] + b1) + b2)`.
///
/// The hidden tanh matters: without it the two linear layers collapse into
/// a score additive in (s, t), which cannot represent pair-specific
/// adjacency and turns MI-score selection into frequency ranking.
#[derive(Debug, Clone)]
pub struct BigramModel {
    pub embed: Array2<f64>, // (V, d)
    pub w1: Array2<f64>,    // (h, 2d)
    pub b1: Array1<f64>,
    pub w2: Array1<f64>, // (h)
    pub b2: f64,
    pub d: usize,
    pub h: usize,
    pub vocab: Vocab,
    /// Mean binary cross-entropy over the fixed sample list after each epoch.
    pub epoch_loss: Vec<f64>,
    trained: bool,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl BigramModel {
    fn new(vocab: &Vocab, d: usize, h: usize, seed: u64) -> Result<Self> {
        if d == 0 || h == 0 {
            return Err(BigramError::Dims("d and h must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.1).expect("valid std");
        let v = vocab.len();
        let mut sample = |shape: (usize, usize)| {
            Array2::from_shape_fn(shape, |_| normal.sample(&mut rng))
        };
        let embed = sample((v, d));
        let w1 = sample((h, 2 * d));
        let w2 = {
            let m = sample((1, h));
            m.row(0).to_owned()
        };
        Ok(BigramModel {
            embed,
            w1,
            b1: Array1::zeros(h),
            w2,
            b2: 0.0,
            d,
            h,
            vocab: vocab.clone(),
            epoch_loss: Vec::new(),
            trained: false,
        })
    }

    fn check_id(&self, id: u32) -> Result<()> {
        if (id as usize) < self.embed.nrows() {
            Ok(())
        } else {
            Err(BigramError::Oov(id))
        }
    }

    fn forward(&self, s: u32, t: u32) -> (f64, Array1<f64>) {
        let d = self.d;
        let es = self.embed.row(s as usize);
        let et = self.embed.row(t as usize);
        let mut z = self.b1.clone();
        for j in 0..self.h {
            let row = self.w1.row(j);
            let mut acc = 0.0;
            for c in 0..d {
                acc += row[c] * es[c] + row[d + c] * et[c];
            }
            z[j] = (z[j] + acc).tanh();
        }
        let score = self.w2.dot(&z) + self.b2;
        (score, z)
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }
}

/// Exact forward pass of the joint model; output strictly inside (0, 1).
pub fn joint_prob(model: &BigramModel, s: u32, t: u32) -> Result<f64> {
    model.check_id(s)?;
    model.check_id(t)?;
    let (score, _) = model.forward(s, t);
    // Clamp away from the closed endpoints that sigmoid saturation can hit.
    Ok(sigmoid(score).clamp(1e-300, 1.0 - 1e-16))
}

/// All pairwise joint probabilities aggregated into normalized marginals:
/// `P(t) = sum_s P(s, t) / sum_{s, t'} P(s, t')`. Costs exactly V^2 joint
/// evaluations; build once and reuse.
#[derive(Debug, Clone)]
pub struct MarginalTable {
    marginals: Vec<f64>,
    pub n_joint_evals: usize,
}

impl MarginalTable {
    pub fn build(model: &BigramModel) -> Result<MarginalTable> {
        let v = model.vocab.len();
        let mut sums = vec![0.0f64; v];
        let mut total = 0.0f64;
        let mut evals = 0usize;
        for s in 0..v as u32 {
            for t in 0..v as u32 {
                let p = joint_prob(model, s, t)?;
                sums[t as usize] += p;
                total += p;
                evals += 1;
            }
        }
        Ok(MarginalTable {
            marginals: sums.into_iter().map(|x| x / total).collect(),
            n_joint_evals: evals,
        })
    }

    pub fn get(&self, t: u32) -> Result<f64> {
        self.marginals
            .get(t as usize)
            .copied()
            .ok_or(BigramError::Oov(t))
    }

    pub fn values(&self) -> &[f64] {
        &self.marginals
    }
}

/// Normalized marginal probability of `t` aggregated over all contexts.
pub fn marginal_prob(model: &BigramModel, t: u32, contexts: &Vocab) -> Result<f64> {
    model.check_id(t)?;
    let mut numer = 0.0;
    let mut denom = 0.0;
    for s in 0..contexts.len() as u32 {
        for tp in 0..contexts.len() as u32 {
            let p = joint_prob(model, s, tp)?;
            denom += p;
            if tp == t {
                numer += p;
            }
        }
    }
    Ok(numer / denom)
}

/// MI score of candidate `t` given the last context token:
/// `P(s, t) * ln(P(s, t) / P(t))`.
pub fn mi_score(model: &BigramModel, s_last: u32, t: u32) -> Result<f64> {
    let table = MarginalTable::build(model)?;
    mi_score_with(model, &table, s_last, t)
}

pub fn mi_score_with(
    model: &BigramModel,
    table: &MarginalTable,
    s_last: u32,
    t: u32,
) -> Result<f64> {
    let joint = joint_prob(model, s_last, t)?;
    let marginal = table.get(t)?;
    Ok(joint * (joint / marginal).ln())
}

/// Trains the joint model with a binary logistic objective: adjacent pairs
/// labeled 1, `negatives_per_positive` uniformly sampled pairs labeled 0.
/// Embeddings and head are trained jointly by per-sample gradient descent
/// over a fixed, seeded sample list.
pub fn train_bigram(
    streams: &[Vec<u32>],
    vocab: &Vocab,
    d: usize,
    h: usize,
    negatives_per_positive: usize,
    epochs: usize,
    seed: u64,
) -> Result<BigramModel> {
    if negatives_per_positive == 0 {
        return Err(BigramError::NeedsNegatives);
    }
    let v = vocab.len() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<(u32, u32, f64)> = Vec::new();
    for stream in streams {
        for pair in stream.windows(2) {
            samples.push((pair[0], pair[1], 1.0));
            for _ in 0..negatives_per_positive {
                samples.push((rng.gen_range(0..v), rng.gen_range(0..v), 0.0));
            }
        }
    }
    if samples.is_empty() {
        return Err(BigramError::NoBigrams);
    }

    let mut model = BigramModel::new(vocab, d, h, seed ^ 0xb16a)?;
    for (s, t, _) in &samples {
        model.check_id(*s)?;
        model.check_id(*t)?;
    }

    for _ in 0..epochs {
        for &(s, t, y) in &samples {
            sgd_step(&mut model, s, t, y, BIGRAM_LR);
        }
        // Full fixed-set loss after the epoch's updates.
        let mut loss = 0.0;
        for &(s, t, y) in &samples {
            let (score, _) = model.forward(s, t);
            let p = sigmoid(score).clamp(1e-12, 1.0 - 1e-12);
            loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        }
        model.epoch_loss.push(loss / samples.len() as f64);
    }
    model.trained = true;
    Ok(model)
}

fn sgd_step(model: &mut BigramModel, s: u32, t: u32, y: f64, lr: f64) {
    let d = model.d;
    let h = model.h;
    let (score, z) = model.forward(s, t);
    let p = sigmoid(score);
    let dscore = p - y;

    // Head gradients; z holds tanh activations.
    let mut dz_pre = Array1::<f64>::zeros(h);
    for j in 0..h {
        dz_pre[j] = dscore * model.w2[j] * (1.0 - z[j] * z[j]);
        model.w2[j] -= lr * dscore * z[j];
    }
    model.b2 -= lr * dscore;

    // First layer and embeddings.
    let es = model.embed.row(s as usize).to_owned();
    let et = model.embed.row(t as usize).to_owned();
    let mut des = Array1::<f64>::zeros(d);
    let mut det = Array1::<f64>::zeros(d);
    for j in 0..h {
        let g = dz_pre[j];
        let mut row = model.w1.row_mut(j);
        for c in 0..d {
            des[c] += g * row[c];
            det[c] += g * row[d + c];
            row[c] -= lr * g * es[c];
            row[d + c] -= lr * g * et[c];
        }
        model.b1[j] -= lr * g;
    }
    {
        let mut row = model.embed.row_mut(s as usize);
        for c in 0..d {
            row[c] -= lr * des[c];
        }
    }
    {
        let mut row = model.embed.row_mut(t as usize);
        for c in 0..d {
            row[c] -= lr * det[c];
        }
    }
}

// ---------------------------------------------------------------------------
// Word selection and corpus augmentation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectStrategy {
    MaxMi,
    TfIdf,
    PCond,
}

impl std::str::FromStr for SelectStrategy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "maxmi" => Ok(SelectStrategy::MaxMi),
            "tfidf" => Ok(SelectStrategy::TfIdf),
            "pcond" => Ok(SelectStrategy::PCond),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

fn argmax_earliest(scores: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Picks the sentence token with the highest MI score against the context;
/// ties break toward the earliest sentence position.
pub fn select_word(model: &BigramModel, context_last: u32, sentence: &[u32]) -> Result<u32> {
    let table = MarginalTable::build(model)?;
    select_word_with(model, &table, context_last, sentence)
}

pub fn select_word_with(
    model: &BigramModel,
    table: &MarginalTable,
    context_last: u32,
    sentence: &[u32],
) -> Result<u32> {
    if sentence.is_empty() {
        return Err(BigramError::EmptySentence);
    }
    let scores: Vec<f64> = sentence
        .iter()
        .map(|&t| mi_score_with(model, table, context_last, t))
        .collect::<Result<_>>()?;
    Ok(sentence[argmax_earliest(&scores)])
}

/// Document frequencies over lemmas, for the TF-IDF baseline selector.
#[derive(Debug, Clone)]
pub struct TfIdfStats {
    doc_freq: HashMap<u32, usize>,
    n_documents: usize,
}

impl TfIdfStats {
    pub fn build(pre: &Preprocessed) -> TfIdfStats {
        let mut doc_freq: HashMap<u32, HashMap<usize, ()>> = HashMap::new();
        for sentence in &pre.sentences {
            for &id in &sentence.lemma_ids {
                doc_freq.entry(id).or_default().insert(sentence.doc, ());
            }
        }
        TfIdfStats {
            doc_freq: doc_freq.into_iter().map(|(k, v)| (k, v.len())).collect(),
            n_documents: pre.n_documents,
        }
    }

    fn idf(&self, id: u32) -> f64 {
        let df = self.doc_freq.get(&id).copied().unwrap_or(0).max(1);
        (self.n_documents as f64 / df as f64).ln()
    }
}

fn select_tfidf(stats: &TfIdfStats, sentence: &[u32]) -> Result<u32> {
    if sentence.is_empty() {
        return Err(BigramError::EmptySentence);
    }
    let mut tf: HashMap<u32, usize> = HashMap::new();
    for &id in sentence {
        *tf.entry(id).or_insert(0) += 1;
    }
    let scores: Vec<f64> = sentence
        .iter()
        .map(|&t| tf[&t] as f64 * stats.idf(t))
        .collect();
    Ok(sentence[argmax_earliest(&scores)])
}

fn select_pcond(model: &BigramModel, context_last: u32, sentence: &[u32]) -> Result<u32> {
    if sentence.is_empty() {
        return Err(BigramError::EmptySentence);
    }
    let joints: Vec<f64> = sentence
        .iter()
        .map(|&t| joint_prob(model, context_last, t))
        .collect::<Result<_>>()?;
    let total: f64 = joints.iter().sum();
    let scores: Vec<f64> = joints.into_iter().map(|j| j / total).collect();
    Ok(sentence[argmax_earliest(&scores)])
}

/// A sentence augmented with its selected word wrapped in markers, plus the
/// loss mask excluding `[START]`, the word, `[END]`, and the next token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSentence {
    pub original: Vec<u32>,
    pub selected: String,
    pub start_id: u32,
    pub end_id: u32,
    pub augmented: Vec<u32>,
    pub loss_mask: Vec<bool>,
}

/// Augmented corpus over a surface-form vocabulary (markers first).
#[derive(Debug, Clone)]
pub struct AugmentedCorpus {
    pub vocab: Vocab,
    pub sentences: Vec<AugmentedSentence>,
    pub strategy: SelectStrategy,
    /// Joint-model evaluations spent building the marginal table (V^2).
    pub n_joint_evals: usize,
    /// Candidate tokens scored across the corpus (T).
    pub n_scored: usize,
}

impl AugmentedCorpus {
    /// Rows ready for masked-perplexity evaluation or training.
    pub fn masked_rows(&self) -> Vec<MaskedRow> {
        self.sentences
            .iter()
            .map(|s| (s.augmented.clone(), s.loss_mask.clone()))
            .collect()
    }

    /// The plain counterpart over the same vocabulary: original tokens with
    /// the standard everything-but-first mask.
    pub fn plain_rows(&self) -> Vec<MaskedRow> {
        self.sentences
            .iter()
            .map(|s| {
                let mut mask = vec![true; s.original.len()];
                mask[0] = false;
                (s.original.clone(), mask)
            })
            .collect()
    }
}

/// Augments every sentence: selects a word (context = final token of the
/// previous sentence, `[DOC]` at document starts), unlemmatizes it to the
/// surface form used in that sentence, and wraps it in markers.
pub fn augment_corpus(
    model: &BigramModel,
    pre: &Preprocessed,
    strategy: SelectStrategy,
) -> Result<AugmentedCorpus> {
    if !model.is_trained() {
        return Err(BigramError::Untrained);
    }
    let doc_id = pre.vocab.id_of(DOC_TOKEN).expect("marker present");
    let table = MarginalTable::build(model)?;
    let tfidf = TfIdfStats::build(pre);

    let mut vocab = Vocab::new([START_TOKEN, END_TOKEN, DOC_TOKEN]).expect("markers distinct");
    let start_id = vocab.id_of(START_TOKEN).unwrap();
    let end_id = vocab.id_of(END_TOKEN).unwrap();

    let mut sentences = Vec::with_capacity(pre.sentences.len());
    let mut n_scored = 0usize;
    let mut prev: Option<(usize, u32)> = None; // (doc, last lemma id)

    for sentence in &pre.sentences {
        let context = match prev {
            Some((doc, last)) if doc == sentence.doc => last,
            _ => doc_id,
        };
        let selected_lemma = match strategy {
            SelectStrategy::MaxMi => {
                n_scored += sentence.lemma_ids.len();
                select_word_with(model, &table, context, &sentence.lemma_ids)?
            }
            SelectStrategy::TfIdf => select_tfidf(&tfidf, &sentence.lemma_ids)?,
            SelectStrategy::PCond => {
                n_scored += sentence.lemma_ids.len();
                select_pcond(model, context, &sentence.lemma_ids)?
            }
        };
        // Unlemmatize: the surface form this sentence used for the lemma,
        // falling back to the first surface seen corpus-wide.
        let position = sentence
            .lemma_ids
            .iter()
            .position(|&id| id == selected_lemma);
        let surface = match position {
            Some(pos) => sentence.surfaces[pos].clone(),
            None => {
                let lemma = pre.vocab.symbol(selected_lemma).unwrap_or_default();
                pre.lemma_map
                    .first_surface
                    .get(lemma)
                    .cloned()
                    .unwrap_or_else(|| lemma.to_string())
            }
        };

        let original: Vec<u32> = sentence.surfaces.iter().map(|s| vocab.intern(s)).collect();
        let selected_id = vocab.intern(&surface);
        let mut augmented = vec![start_id, selected_id, end_id];
        augmented.extend_from_slice(&original);
        let mut loss_mask = vec![true; augmented.len()];
        loss_mask[0] = false; // [START]
        loss_mask[1] = false; // selected word
        loss_mask[2] = false; // [END]
        loss_mask[3] = false; // token immediately following [END]
        sentences.push(AugmentedSentence {
            original,
            selected: surface,
            start_id,
            end_id,
            augmented,
            loss_mask,
        });
        prev = Some((sentence.doc, *sentence.lemma_ids.last().expect("nonempty")));
    }

    Ok(AugmentedCorpus {
        vocab,
        sentences,
        strategy,
        n_joint_evals: table.n_joint_evals,
        n_scored,
    })
}

// ---------------------------------------------------------------------------
// Augmented-corpus JSONL
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AugHeader {
    vocab: Vec<String>,
    strategy: SelectStrategy,
    markers: AugMarkers,
}

#[derive(Serialize, Deserialize)]
struct AugMarkers {
    start: u32,
    end: u32,
    doc: u32,
}

#[derive(Serialize, Deserialize)]
struct AugLine {
    tokens: Vec<u32>,
    loss_mask: Vec<bool>,
}

pub fn save_augmented_jsonl(
    corpus: &AugmentedCorpus,
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let io_err = |source| BigramError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    let header = AugHeader {
        vocab: corpus.vocab.symbols().to_vec(),
        strategy: corpus.strategy,
        markers: AugMarkers {
            start: 0,
            end: 1,
            doc: 2,
        },
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("serializable")).map_err(io_err)?;
    for s in &corpus.sentences {
        let line = AugLine {
            tokens: s.augmented.clone(),
            loss_mask: s.loss_mask.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&line).expect("serializable")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Loads an augmented JSONL file into masked rows plus its vocabulary.
pub fn load_augmented_jsonl(
    path: impl AsRef<std::path::Path>,
) -> Result<(Vocab, Vec<MaskedRow>)> {
    use std::io::BufRead;
    let path = path.as_ref();
    let io_err = |source| BigramError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header_line = lines.next().ok_or_else(|| BigramError::BadRecord {
        path: path.display().to_string(),
        line: 1,
    })?;
    let header: AugHeader =
        serde_json::from_str(&header_line.map_err(io_err)?).map_err(|_| BigramError::BadRecord {
            path: path.display().to_string(),
            line: 1,
        })?;
    let vocab = Vocab::new(header.vocab).map_err(|_| BigramError::BadRecord {
        path: path.display().to_string(),
        line: 1,
    })?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AugLine =
            serde_json::from_str(&line).map_err(|_| BigramError::BadRecord {
                path: path.display().to_string(),
                line: i + 2,
            })?;
        rows.push((record.tokens, record.loss_mask));
    }
    Ok((vocab, rows))
}
