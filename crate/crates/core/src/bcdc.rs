//! Bootstrapped cross-document classification: a general one-vs-one
//! margin model retrained per test document on its own most confident
//! predictions over topically related documents.

use crate::classifier::{
    train, train_split, ClassifierError, OvoLinearModel, Routing, TrainConfig,
};
use crate::corpus::{Corpus, Document, PairKey, RelationLabel, Scheme};
use crate::eval::{EvalError, PairLearner, PairPredictor};
use crate::features::{extract_pair, vectorize, FeatureError, FeatureIndex, FeatureSet, SparseVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BcdcError {
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
}

/// Term-frequency document index with smoothed inverse document
/// frequencies, for cosine retrieval of related documents.
#[derive(Debug, Clone, Default)]
pub struct RetrievalIndex {
    doc_ids: Vec<String>,
    vectors: Vec<BTreeMap<String, f64>>,
    norms: Vec<f64>,
    doc_freq: BTreeMap<String, usize>,
    total_docs: usize,
}

fn doc_tokens(doc: &Document) -> Vec<String> {
    doc.sentences.iter().flatten().map(|t| t.to_ascii_lowercase()).collect()
}

fn term_counts(tokens: &[String]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.clone()).or_insert(0) += 1;
    }
    counts
}

impl RetrievalIndex {
    fn idf(&self, term: &str) -> f64 {
        match self.doc_freq.get(term) {
            // terms absent from the pool get zero weight everywhere
            None => 0.0,
            Some(df) => ((self.total_docs as f64 + 1.0) / (*df as f64 + 1.0)).ln() + 1.0,
        }
    }

    /// Log-scaled tf times smoothed idf, for any document.
    pub fn vector_for(&self, doc: &Document) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (term, tf) in term_counts(&doc_tokens(doc)) {
            let idf = self.idf(&term);
            if idf > 0.0 {
                out.insert(term, (1.0 + (tf as f64).ln()) * idf);
            }
        }
        out
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn len(&self) -> usize {
        self.total_docs
    }

    pub fn is_empty(&self) -> bool {
        self.total_docs == 0
    }
}

fn norm(v: &BTreeMap<String, f64>) -> f64 {
    v.values().map(|w| w * w).sum::<f64>().sqrt()
}

fn cosine(a: &BTreeMap<String, f64>, norm_a: f64, b: &BTreeMap<String, f64>, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    let mut dot = 0.0;
    for (term, wa) in a {
        if let Some(wb) = b.get(term) {
            dot += wa * wb;
        }
    }
    dot / (norm_a * norm_b)
}

/// Indexes an unannotated pool for related-document retrieval.
pub fn build_index(pool: &Corpus) -> RetrievalIndex {
    let mut index = RetrievalIndex {
        total_docs: pool.documents.len(),
        ..Default::default()
    };
    for doc in &pool.documents {
        for term in term_counts(&doc_tokens(doc)).keys() {
            *index.doc_freq.entry(term.clone()).or_insert(0) += 1;
        }
    }
    for doc in &pool.documents {
        let vector = index.vector_for(doc);
        index.norms.push(norm(&vector));
        index.vectors.push(vector);
        index.doc_ids.push(doc.doc_id.clone());
    }
    index
}

/// Top-n pool documents by cosine similarity to the query document,
/// ties by document id; the query itself is excluded when present.
pub fn retrieve_related(index: &RetrievalIndex, query: &Document, n: usize) -> Vec<String> {
    let query_vec = index.vector_for(query);
    let query_norm = norm(&query_vec);
    let mut scored: Vec<(f64, &String)> = index
        .doc_ids
        .iter()
        .enumerate()
        .filter(|(_, id)| **id != query.doc_id)
        .map(|(i, id)| {
            (cosine(&query_vec, query_norm, &index.vectors[i], index.norms[i]), id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(n).map(|(_, id)| id.clone()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BcdcConfig {
    /// N: related documents retrieved per test document.
    pub related_docs: usize,
    /// K: confident pseudo-labeled relations injected per round.
    pub confident_per_round: usize,
    pub max_rounds: usize,
    pub reuse_models_for_related_tests: bool,
    /// Jaccard similarity of retrieval sets above which a specialized
    /// model is shared between test documents.
    pub reuse_jaccard: f64,
}

impl Default for BcdcConfig {
    fn default() -> Self {
        BcdcConfig {
            related_docs: 25,
            confident_per_round: 40,
            max_rounds: 10,
            reuse_models_for_related_tests: true,
            reuse_jaccard: 0.5,
        }
    }
}

/// Stage-one model plus everything needed to retrain it: the frozen
/// feature index, the original training vectors, and the settings.
pub struct GeneralModel {
    pub scheme: Scheme,
    pub feature_set: FeatureSet,
    pub index: FeatureIndex,
    pub model: OvoLinearModel,
    pub train_config: TrainConfig,
    train_intra: Vec<(SparseVector, RelationLabel)>,
    train_inter: Vec<(SparseVector, RelationLabel)>,
}

fn same_sentence(doc: &Document, a: &str, b: &str) -> bool {
    match (doc.event(a), doc.event(b)) {
        (Some(x), Some(y)) => x.sentence_index == y.sentence_index,
        _ => false,
    }
}

/// Trains the stage-one general model on an annotated corpus. Uses
/// separate intra-/inter-sentential banks when both can be trained,
/// otherwise a single bank over all pairs.
pub fn train_general(
    corpus: &Corpus,
    scheme: Scheme,
    feature_set: FeatureSet,
    train_config: &TrainConfig,
) -> Result<GeneralModel, BcdcError> {
    let mut index = FeatureIndex::new();
    let mut intra = Vec::new();
    let mut inter = Vec::new();
    for doc in &corpus.documents {
        for link in &doc.tlinks {
            let vec = extract_pair(doc, &link.source, &link.target, feature_set)?;
            let sparse = vectorize(&vec, &mut index, false);
            if same_sentence(doc, &link.source, &link.target) {
                intra.push((sparse, link.label));
            } else {
                inter.push((sparse, link.label));
            }
        }
    }
    let dims = index.dimension_count();
    let split = train_split(&intra, &inter, scheme, dims, train_config);
    let model = match split {
        Ok(model) => model,
        Err(ClassifierError::EmptyClass(_)) => {
            let mut all = intra.clone();
            all.extend(inter.iter().cloned());
            train(&all, scheme, dims, train_config)?
        }
        Err(e) => return Err(e.into()),
    };
    Ok(GeneralModel {
        scheme,
        feature_set,
        index,
        model,
        train_config: train_config.clone(),
        train_intra: intra,
        train_inter: inter,
    })
}

impl GeneralModel {
    fn retrain_with(
        &self,
        pseudo_intra: &[(SparseVector, RelationLabel)],
    ) -> Result<OvoLinearModel, BcdcError> {
        let mut intra = self.train_intra.clone();
        intra.extend(pseudo_intra.iter().cloned());
        let dims = self.index.dimension_count();
        if self.model.routing == Routing::IntraInterSplit {
            Ok(train_split(&intra, &self.train_inter, self.scheme, dims, &self.train_config)?)
        } else {
            let mut all = intra;
            all.extend(self.train_inter.iter().cloned());
            Ok(train(&all, self.scheme, dims, &self.train_config)?)
        }
    }

    /// Feature vector of one pair under the frozen index.
    pub fn features_of(
        &self,
        doc: &Document,
        source: &str,
        target: &str,
    ) -> Result<SparseVector, BcdcError> {
        let vec = extract_pair(doc, source, target, self.feature_set)?;
        let mut frozen = self.index.clone();
        Ok(vectorize(&vec, &mut frozen, true))
    }
}

/// One bootstrap round in the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub injected: usize,
    pub min_confidence: f64,
    pub max_confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BootstrapLog {
    pub related: Vec<String>,
    pub candidate_pairs: usize,
    pub rounds: Vec<RoundLog>,
}

/// Specializes the general model for one test document: repeatedly
/// predicts intra-sentential pairs of the related documents, injects
/// the K most confident unselected ones, and retrains on the original
/// data plus everything selected so far.
pub fn bootstrap(
    general: &GeneralModel,
    test_doc: &Document,
    pool: &Corpus,
    index: &RetrievalIndex,
    cfg: &BcdcConfig,
) -> Result<(OvoLinearModel, BootstrapLog), BcdcError> {
    let related = retrieve_related(index, test_doc, cfg.related_docs);
    let mut log = BootstrapLog { related: related.clone(), ..Default::default() };

    // all intra-sentential candidate pairs of the related documents
    let mut candidates: Vec<(PairKey, SparseVector)> = Vec::new();
    for doc_id in &related {
        let Some(doc) = pool.document(doc_id) else { continue };
        for i in 0..doc.events.len() {
            for j in i + 1..doc.events.len() {
                let (a, b) = (&doc.events[i].event_id, &doc.events[j].event_id);
                if !same_sentence(doc, a, b) {
                    continue;
                }
                let sparse = general.features_of(doc, a, b)?;
                candidates.push((PairKey::new(doc_id, a, b), sparse));
            }
        }
    }
    log.candidate_pairs = candidates.len();

    let mut model = general.model.clone();
    if cfg.max_rounds == 0 || candidates.is_empty() {
        return Ok((model, log));
    }

    let mut selected: BTreeSet<PairKey> = BTreeSet::new();
    let mut pseudo: Vec<(SparseVector, RelationLabel)> = Vec::new();
    for round in 1..=cfg.max_rounds {
        let bank = model.bank(true);
        let mut scored: Vec<(f64, &PairKey, &SparseVector, RelationLabel)> = candidates
            .iter()
            .filter(|(key, _)| !selected.contains(key))
            .map(|(key, sparse)| {
                let (label, _) = bank.classify(general.scheme, sparse);
                let phi = bank.confidence(general.scheme, sparse);
                (phi, key, sparse, label)
            })
            .collect();
        if scored.is_empty() {
            break;
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
        let take = cfg.confident_per_round.min(scored.len());
        let mut round_log = RoundLog {
            round,
            injected: take,
            min_confidence: f64::INFINITY,
            max_confidence: f64::NEG_INFINITY,
        };
        for (phi, key, sparse, label) in scored.into_iter().take(take) {
            selected.insert(key.clone());
            pseudo.push(((*sparse).clone(), label));
            round_log.min_confidence = round_log.min_confidence.min(phi);
            round_log.max_confidence = round_log.max_confidence.max(phi);
        }
        model = general.retrain_with(&pseudo)?;
        log.rounds.push(round_log);
        if selected.len() == candidates.len() {
            break;
        }
    }
    Ok((model, log))
}

/// Labels the tlink pairs of one document with the given model bank
/// weights, routing each pair to the intra- or inter-sentential bank.
pub fn classify_document(
    general: &GeneralModel,
    weights: &OvoLinearModel,
    doc: &Document,
) -> Result<Vec<(PairKey, RelationLabel, f64)>, BcdcError> {
    let mut out = Vec::new();
    for link in &doc.tlinks {
        let sparse = general.features_of(doc, &link.source, &link.target)?;
        let bank = weights.bank(same_sentence(doc, &link.source, &link.target));
        let (label, _) = bank.classify(general.scheme, &sparse);
        let phi = bank.confidence(general.scheme, &sparse);
        out.push((PairKey::new(&doc.doc_id, &link.source, &link.target), label, phi));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocReport {
    pub doc_id: String,
    pub reused_from: Option<String>,
    pub bootstrap: BootstrapLog,
    pub accuracy: Option<f64>,
    pub general_accuracy: Option<f64>,
}

/// Full pipeline outcome: predictions per pair plus per-document logs.
#[derive(Debug, Clone)]
pub struct BcdcRun {
    pub predictions: BTreeMap<PairKey, (RelationLabel, f64)>,
    pub general_predictions: BTreeMap<PairKey, (RelationLabel, f64)>,
    pub per_doc: Vec<DocReport>,
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    inter / union
}

/// Runs the whole pipeline: stage-one training, then per-test-document
/// bootstrapping with optional model reuse across topically related
/// test documents.
pub fn run_bcdc(
    train_corpus: &Corpus,
    tests: &Corpus,
    pool: &Corpus,
    scheme: Scheme,
    feature_set: FeatureSet,
    train_config: &TrainConfig,
    cfg: &BcdcConfig,
) -> Result<BcdcRun, BcdcError> {
    let general = train_general(train_corpus, scheme, feature_set, train_config)?;
    let index = build_index(pool);
    let mut run = BcdcRun {
        predictions: BTreeMap::new(),
        general_predictions: BTreeMap::new(),
        per_doc: Vec::new(),
    };
    let mut cache: Vec<(String, BTreeSet<String>, OvoLinearModel, BootstrapLog)> = Vec::new();

    for doc in &tests.documents {
        let related: BTreeSet<String> =
            retrieve_related(&index, doc, cfg.related_docs).into_iter().collect();
        let mut reused_from = None;
        let mut entry: Option<(OvoLinearModel, BootstrapLog)> = None;
        if cfg.reuse_models_for_related_tests {
            for (prior_id, prior_set, model, log) in &cache {
                if jaccard(prior_set, &related) >= cfg.reuse_jaccard {
                    reused_from = Some(prior_id.clone());
                    entry = Some((model.clone(), log.clone()));
                    break;
                }
            }
        }
        let (weights, log) = match entry {
            Some(e) => e,
            None => {
                let (weights, log) = bootstrap(&general, doc, pool, &index, cfg)?;
                cache.push((doc.doc_id.clone(), related, weights.clone(), log.clone()));
                (weights, log)
            }
        };

        let special = classify_document(&general, &weights, doc)?;
        let baseline = classify_document(&general, &general.model, doc)?;
        let gold: BTreeMap<PairKey, RelationLabel> = doc
            .tlinks
            .iter()
            .map(|l| (PairKey::new(&doc.doc_id, &l.source, &l.target), l.label))
            .collect();
        let acc = |preds: &[(PairKey, RelationLabel, f64)]| {
            if preds.is_empty() {
                return None;
            }
            let correct = preds.iter().filter(|(k, l, _)| gold.get(k) == Some(l)).count();
            Some(correct as f64 / preds.len() as f64)
        };
        run.per_doc.push(DocReport {
            doc_id: doc.doc_id.clone(),
            reused_from,
            bootstrap: log,
            accuracy: acc(&special),
            general_accuracy: acc(&baseline),
        });
        for (key, label, phi) in special {
            run.predictions.insert(key, (label, phi));
        }
        for (key, label, phi) in baseline {
            run.general_predictions.insert(key, (label, phi));
        }
    }
    Ok(run)
}

/// Plain one-vs-one learner over pair features, without bootstrapping.
pub struct OvoLearner {
    pub scheme: Scheme,
    pub feature_set: FeatureSet,
    pub train_config: TrainConfig,
}

struct OvoPredictor {
    general: GeneralModel,
}

impl PairLearner for OvoLearner {
    fn fit(&self, train: &Corpus) -> Result<Box<dyn PairPredictor>, EvalError> {
        let general = train_general(train, self.scheme, self.feature_set, &self.train_config)
            .map_err(|e| EvalError::Learner(e.to_string()))?;
        Ok(Box::new(OvoPredictor { general }))
    }
}

impl PairPredictor for OvoPredictor {
    fn predict(&self, doc: &Document, source: &str, target: &str) -> RelationLabel {
        match self.general.features_of(doc, source, target) {
            Ok(sparse) => {
                let bank = self.general.model.bank(same_sentence(doc, source, target));
                bank.classify(self.general.scheme, &sparse).0
            }
            Err(_) => self.general.scheme.labels()[0],
        }
    }
}
