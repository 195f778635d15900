//! Evaluation: accuracy, majority baselines, document-level
//! cross-validation, and the stratified shuffling significance test.

use crate::corpus::{corpus_stats, Corpus, CorpusError, Document, PairKey, RelationLabel, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("pair sets differ; symmetric difference: {0:?}")]
    PairMismatch(Vec<PairKey>),
    #[error("empty corpus has no majority label")]
    EmptyCorpus,
    #[error("need at least {folds} documents after holdout, have {docs}")]
    TooFewDocuments { folds: usize, docs: usize },
    #[error("folds must be at least 2, got {0}")]
    BadFolds(usize),
    #[error("learner error: {0}")]
    Learner(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn check_same_pairs<A, B>(
    a: &BTreeMap<PairKey, A>,
    b: &BTreeMap<PairKey, B>,
) -> Result<(), EvalError> {
    if a.len() == b.len() && a.keys().zip(b.keys()).all(|(x, y)| x == y) {
        return Ok(());
    }
    let mut diff: Vec<PairKey> = a.keys().filter(|k| !b.contains_key(*k)).cloned().collect();
    diff.extend(b.keys().filter(|k| !a.contains_key(*k)).cloned());
    Err(EvalError::PairMismatch(diff))
}

/// Fraction of pairs labeled identically. Vacuously 1.0 on empty sets.
pub fn accuracy(
    pred: &BTreeMap<PairKey, RelationLabel>,
    gold: &BTreeMap<PairKey, RelationLabel>,
) -> Result<f64, EvalError> {
    check_same_pairs(pred, gold)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let matches = pred.iter().filter(|(k, l)| gold[*k] == **l).count();
    Ok(matches as f64 / pred.len() as f64)
}

/// Gold-vs-predicted counts keyed (gold, predicted).
pub fn confusion_matrix(
    pred: &BTreeMap<PairKey, RelationLabel>,
    gold: &BTreeMap<PairKey, RelationLabel>,
) -> Result<BTreeMap<(RelationLabel, RelationLabel), usize>, EvalError> {
    check_same_pairs(pred, gold)?;
    let mut out = BTreeMap::new();
    for (key, p) in pred {
        *out.entry((gold[key], *p)).or_insert(0) += 1;
    }
    Ok(out)
}

/// The most frequent label of the corpus and its fraction.
pub fn majority_baseline(
    corpus: &Corpus,
    scheme: Scheme,
) -> Result<(RelationLabel, f64), EvalError> {
    let stats = corpus_stats(corpus, scheme)?;
    stats.majority.ok_or(EvalError::EmptyCorpus)
}

/// A learner that fits on a training corpus and labels event pairs.
pub trait PairLearner {
    fn fit(&self, train: &Corpus) -> Result<Box<dyn PairPredictor>, EvalError>;
}

pub trait PairPredictor: Send + Sync {
    fn predict(&self, doc: &Document, source: &str, target: &str) -> RelationLabel;
}

/// Supervised naive count model over the EM feature set.
pub struct NaiveCountLearner {
    pub scheme: Scheme,
}

struct NaiveCountPredictor {
    model: crate::emtrl::EmModel,
}

impl PairLearner for NaiveCountLearner {
    fn fit(&self, train: &Corpus) -> Result<Box<dyn PairPredictor>, EvalError> {
        let model = crate::emtrl::fit_supervised(train, self.scheme)
            .map_err(|e| EvalError::Learner(e.to_string()))?;
        Ok(Box::new(NaiveCountPredictor { model }))
    }
}

impl PairPredictor for NaiveCountPredictor {
    fn predict(&self, doc: &Document, source: &str, target: &str) -> RelationLabel {
        match crate::emtrl::likelihood_values_for(doc, source, target) {
            Ok(values) => self.model.posterior(&values).argmax(),
            Err(_) => self.model.scheme.labels()[0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossValidation {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Document ids per fold, in evaluation order.
    pub folds: Vec<Vec<String>>,
}

/// Seeded document-level cross-validation. Holdout documents are
/// excluded entirely; each remaining document is tested exactly once.
pub fn cross_validate(
    corpus: &Corpus,
    learner: &dyn PairLearner,
    folds: usize,
    seed: u64,
    holdout_docs: &[String],
) -> Result<CrossValidation, EvalError> {
    if folds < 2 {
        return Err(EvalError::BadFolds(folds));
    }
    let mut doc_ids: Vec<String> = corpus
        .documents
        .iter()
        .map(|d| d.doc_id.clone())
        .filter(|id| !holdout_docs.contains(id))
        .collect();
    if doc_ids.len() < folds {
        return Err(EvalError::TooFewDocuments { folds, docs: doc_ids.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::seq::SliceRandom;
    doc_ids.shuffle(&mut rng);

    let base = doc_ids.len() / folds;
    let extra = doc_ids.len() % folds;
    let mut fold_ids: Vec<Vec<String>> = Vec::with_capacity(folds);
    let mut cursor = 0usize;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        fold_ids.push(doc_ids[cursor..cursor + size].to_vec());
        cursor += size;
    }

    let mut fold_accuracies = Vec::with_capacity(folds);
    for fold in &fold_ids {
        let train = Corpus::new(
            corpus
                .documents
                .iter()
                .filter(|d| !fold.contains(&d.doc_id) && !holdout_docs.contains(&d.doc_id))
                .cloned()
                .collect(),
        );
        let test = Corpus::new(
            corpus.documents.iter().filter(|d| fold.contains(&d.doc_id)).cloned().collect(),
        );
        let predictor = learner.fit(&train)?;
        let gold = crate::corpus::gold_labels(&test);
        let mut pred = BTreeMap::new();
        for doc in &test.documents {
            for link in &doc.tlinks {
                pred.insert(
                    PairKey::new(&doc.doc_id, &link.source, &link.target),
                    predictor.predict(doc, &link.source, &link.target),
                );
            }
        }
        fold_accuracies.push(accuracy(&pred, &gold)?);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
    Ok(CrossValidation { fold_accuracies, mean_accuracy, folds: fold_ids })
}

/// Outcome of the stratified shuffling test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub observed_diff: f64,
    /// Trials whose shuffled difference reached the observed one.
    pub nc: usize,
    pub nt: usize,
    pub p_value: f64,
}

/// Compute-intensive randomization test: per trial, each pair's two
/// predictions swap with probability one half; the p-value is
/// (nc + 1) / (nt + 1) where nc counts trials whose accuracy
/// difference is at least the observed one.
pub fn stratified_shuffling(
    pred_a: &BTreeMap<PairKey, RelationLabel>,
    pred_b: &BTreeMap<PairKey, RelationLabel>,
    gold: &BTreeMap<PairKey, RelationLabel>,
    nt: usize,
    seed: u64,
) -> Result<SignificanceResult, EvalError> {
    check_same_pairs(pred_a, gold)?;
    check_same_pairs(pred_b, gold)?;
    let acc_a = accuracy(pred_a, gold)?;
    let acc_b = accuracy(pred_b, gold)?;
    let observed_diff = (acc_a - acc_b).abs();

    // correctness flags per pair, in key order
    let flags: Vec<(bool, bool)> = gold
        .iter()
        .map(|(k, g)| (pred_a[k] == *g, pred_b[k] == *g))
        .collect();
    let n = flags.len() as f64;

    let nc = (0..nt)
        .into_par_iter()
        .map(|trial| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x100000001b3).wrapping_add(trial as u64));
            let mut correct_a = 0usize;
            let mut correct_b = 0usize;
            for (a, b) in &flags {
                let (a, b) = if rng.gen_bool(0.5) { (*b, *a) } else { (*a, *b) };
                correct_a += usize::from(a);
                correct_b += usize::from(b);
            }
            let diff = (correct_a as f64 - correct_b as f64).abs() / n;
            usize::from(diff >= observed_diff - 1e-12)
        })
        .sum::<usize>();

    Ok(SignificanceResult {
        observed_diff,
        nc,
        nt,
        p_value: (nc + 1) as f64 / (nt + 1) as f64,
    })
}
