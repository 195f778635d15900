//! EM-based temporal relation learning: a naive count model over
//! categorical pair features with add-1 smoothing, hard (Viterbi)
//! E-steps, relative-frequency M-steps, three initialization regimes,
//! and optional per-document consistency repair between steps.

mod rules;

pub use rules::{
    lexical_label, parse_attr_rules, parse_lexical_rules, rule_matches, AttrRule, Condition,
    LexRule, RuleBase, RuleError,
};

use crate::algebra::Posterior;
use crate::consistency::{greedy_repair, ilp_repair, ConsistencyError, WeightedGraph};
use crate::corpus::{linked_pairs, Corpus, CorpusError, PairKey, RelationLabel, Scheme};
use crate::features::{extract_pair, FeatureError, FeatureSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmtrlError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("unknown pair {0}")]
    UnknownPair(PairKey),
    #[error("pair sets differ between predictions and gold")]
    PairMismatch,
    #[error("model dump error: {0}")]
    BadDump(String),
}

/// Slot list of the EM likelihood: the pair feature slots with the
/// per-event tense and aspect slots replaced by their per-event joint,
/// since tense and aspect are treated as dependent.
pub fn likelihood_slots() -> Vec<String> {
    let mut slots = Vec::new();
    for suffix in ["1", "2"] {
        for name in [
            "word",
            "lemma",
            "synset",
            "pos",
            "gov_verb",
            "gov_verb_pos",
            "auxiliary",
            "event_class",
            "tense_aspect",
            "modality",
            "polarity",
            "prep",
        ] {
            slots.push(format!("{name}{suffix}"));
        }
    }
    for name in crate::features::EMTRL_PAIR_SLOTS {
        slots.push(name.to_string());
    }
    slots
}

/// Feature values of every linked pair, aligned to a fixed slot order.
#[derive(Debug, Clone)]
pub struct PairFeatures {
    pub slots: Vec<String>,
    pub keys: Vec<PairKey>,
    pub values: Vec<Vec<String>>,
    by_key: BTreeMap<PairKey, usize>,
}

impl PairFeatures {
    pub fn index_of(&self, key: &PairKey) -> Option<usize> {
        self.by_key.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Test-only style constructor over an explicit slot list.
    pub fn from_raw(slots: Vec<String>, rows: Vec<(PairKey, Vec<String>)>) -> Self {
        let mut keys = Vec::new();
        let mut values = Vec::new();
        let mut by_key = BTreeMap::new();
        for (key, row) in rows {
            assert_eq!(row.len(), slots.len());
            by_key.insert(key.clone(), keys.len());
            keys.push(key);
            values.push(row);
        }
        PairFeatures { slots, keys, values, by_key }
    }
}

fn pair_likelihood_values(
    corpus: &Corpus,
    key: &PairKey,
) -> Result<Vec<String>, EmtrlError> {
    let doc = corpus
        .document(&key.doc_id)
        .ok_or_else(|| EmtrlError::UnknownPair(key.clone()))?;
    likelihood_values_for(doc, &key.source, &key.target)
}

/// Likelihood slot values of one event pair within a document.
pub fn likelihood_values_for(
    doc: &crate::corpus::Document,
    source: &str,
    target: &str,
) -> Result<Vec<String>, EmtrlError> {
    let vec = extract_pair(doc, source, target, FeatureSet::Emtrl)?;
    let get = |slot: &str| vec.get(slot).expect("emtrl vector is total").to_string();
    let mut out = Vec::with_capacity(likelihood_slots().len());
    for suffix in ["1", "2"] {
        for name in [
            "word",
            "lemma",
            "synset",
            "pos",
            "gov_verb",
            "gov_verb_pos",
            "auxiliary",
            "event_class",
        ] {
            out.push(get(&format!("{name}{suffix}")));
        }
        out.push(format!(
            "{}|{}",
            get(&format!("tense{suffix}")),
            get(&format!("aspect{suffix}"))
        ));
        for name in ["modality", "polarity", "prep"] {
            out.push(get(&format!("{name}{suffix}")));
        }
    }
    for name in crate::features::EMTRL_PAIR_SLOTS {
        out.push(get(name));
    }
    Ok(out)
}

/// Extracts likelihood features for every linked pair of the corpus.
pub fn extract_corpus_features(corpus: &Corpus) -> Result<PairFeatures, EmtrlError> {
    let keys = linked_pairs(corpus);
    let mut values = Vec::with_capacity(keys.len());
    let mut by_key = BTreeMap::new();
    for (i, key) in keys.iter().enumerate() {
        values.push(pair_likelihood_values(corpus, key)?);
        by_key.insert(key.clone(), i);
    }
    Ok(PairFeatures { slots: likelihood_slots(), keys, values, by_key })
}

/// State of one pair in an assignment: a hard label (absent until the
/// first E-step for pairs initialized with a uniform posterior), the
/// posterior behind it, and whether the label is pinned to gold.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub label: Option<RelationLabel>,
    pub posterior: Posterior,
    pub pinned: bool,
}

/// Hard/soft labeling of every pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub states: BTreeMap<PairKey, PairState>,
}

impl Assignment {
    pub fn labels(&self) -> BTreeMap<PairKey, RelationLabel> {
        self.states
            .iter()
            .filter_map(|(k, s)| s.label.map(|l| (k.clone(), l)))
            .collect()
    }

    pub fn pinned_count(&self) -> usize {
        self.states.values().filter(|s| s.pinned).count()
    }
}

fn uniform_posterior(scheme: Scheme) -> Posterior {
    let n = scheme.label_count();
    Posterior::new(scheme, vec![1.0 / n as f64; n]).expect("uniform sums to one")
}

/// Uniformly random hard label per pair.
pub fn init_random(corpus: &Corpus, scheme: Scheme, seed: u64) -> Assignment {
    let labels = scheme.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = BTreeMap::new();
    for key in linked_pairs(corpus) {
        let label = labels[rng.gen_range(0..labels.len())];
        states.insert(key, PairState { label: Some(label), posterior: Posterior::one_hot(label), pinned: false });
    }
    Assignment { states }
}

/// Pins a stratified random fraction of each gold relation type; the
/// remaining pairs start unlabeled with a uniform posterior.
pub fn init_supervised(
    corpus: &Corpus,
    fraction: f64,
    seed: u64,
) -> Result<Assignment, EmtrlError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EmtrlError::BadFraction(fraction));
    }
    let gold = crate::corpus::gold_labels(corpus);
    let scheme = gold
        .values()
        .next()
        .map(|l| l.scheme())
        .unwrap_or(Scheme::Coarse3);
    let mut per_label: BTreeMap<RelationLabel, Vec<PairKey>> = BTreeMap::new();
    for key in linked_pairs(corpus) {
        per_label.entry(gold[&key]).or_default().push(key);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = BTreeMap::new();
    for (label, mut keys) in per_label {
        keys.shuffle(&mut rng);
        let take = (fraction * keys.len() as f64).ceil() as usize;
        for (i, key) in keys.into_iter().enumerate() {
            let state = if i < take {
                PairState { label: Some(label), posterior: Posterior::one_hot(label), pinned: true }
            } else {
                PairState { label: None, posterior: uniform_posterior(scheme), pinned: false }
            };
            states.insert(key, state);
        }
    }
    Ok(Assignment { states })
}

/// Rule-based initialization: the first matching attribute rule wins,
/// then the strongest lexical precedence rule, then the first matching
/// signal rule; unmatched pairs start unlabeled.
pub fn init_rules(
    corpus: &Corpus,
    rulebase: &RuleBase,
    scheme: Scheme,
) -> Result<Assignment, EmtrlError> {
    rulebase.validate(scheme)?;
    let mut states = BTreeMap::new();
    for key in linked_pairs(corpus) {
        let doc = corpus.document(&key.doc_id).expect("linked pairs come from the corpus");
        let mut label: Option<RelationLabel> = None;
        for rule in &rulebase.attribute_rules {
            if rule_matches(rule, doc, &key.source, &key.target) {
                label = Some(RelationLabel::parse(scheme, &rule.label)?);
                break;
            }
        }
        if label.is_none() {
            if let Some((name, _)) = lexical_label(&rulebase.lexical_rules, doc, &key.source, &key.target)
            {
                if let Ok(l) = RelationLabel::parse(scheme, name) {
                    label = Some(l);
                }
            }
        }
        if label.is_none() {
            for rule in &rulebase.signal_rules {
                if rule_matches(rule, doc, &key.source, &key.target) {
                    label = Some(RelationLabel::parse(scheme, &rule.label)?);
                    break;
                }
            }
        }
        let state = match label {
            Some(l) => PairState { label: Some(l), posterior: Posterior::one_hot(l), pinned: false },
            None => PairState { label: None, posterior: uniform_posterior(scheme), pinned: false },
        };
        states.insert(key, state);
    }
    Ok(Assignment { states })
}

/// Count tables and smoothed conditional probabilities
/// P(value | class, slot) with a uniform class prior.
#[derive(Debug, Clone, PartialEq)]
pub struct EmModel {
    pub scheme: Scheme,
    pub slots: Vec<String>,
    /// N(class): total pair mass assigned to each class.
    pub class_totals: Vec<f64>,
    /// Per slot: value -> per-class count N(value, class). Every value
    /// observed anywhere in the corpus is present (zero-filled).
    pub counts: Vec<BTreeMap<String, Vec<f64>>>,
    /// Add-1 smoothing with one reserved unseen bucket per slot.
    pub smoothing: bool,
}

impl EmModel {
    pub fn vocab_size(&self, slot: usize) -> usize {
        self.counts[slot].len()
    }

    /// Smoothed P(value | class) for one slot; unseen values fall into
    /// the reserved bucket.
    pub fn prob(&self, slot: usize, value: &str, class: usize) -> f64 {
        let n_vc = self.counts[slot].get(value).map(|v| v[class]).unwrap_or(0.0);
        let n_c = self.class_totals[class];
        if self.smoothing {
            (n_vc + 1.0) / (n_c + self.vocab_size(slot) as f64 + 1.0)
        } else if n_c == 0.0 {
            0.0
        } else {
            n_vc / n_c
        }
    }

    pub fn log_prob(&self, slot: usize, value: &str, class: usize) -> f64 {
        self.prob(slot, value, class).ln()
    }

    /// Posterior over classes for one pair's feature values (uniform
    /// class prior), computed in log space.
    pub fn posterior(&self, values: &[String]) -> Posterior {
        let m = self.scheme.label_count();
        let mut logs = vec![-(m as f64).ln(); m];
        for (slot, value) in values.iter().enumerate() {
            for (class, log) in logs.iter_mut().enumerate() {
                *log += self.log_prob(slot, value, class);
            }
        }
        let max = logs.iter().cloned().fold(f64::MIN, f64::max);
        if !max.is_finite() {
            return uniform_posterior(self.scheme);
        }
        let mut probs: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Posterior { scheme: self.scheme, probs }
    }

    /// Log of the per-pair marginal P(pair) under the uniform prior.
    pub fn log_marginal(&self, values: &[String]) -> f64 {
        let m = self.scheme.label_count();
        let mut logs = vec![-(m as f64).ln(); m];
        for (slot, value) in values.iter().enumerate() {
            for (class, log) in logs.iter_mut().enumerate() {
                *log += self.log_prob(slot, value, class);
            }
        }
        let max = logs.iter().cloned().fold(f64::MIN, f64::max);
        if !max.is_finite() {
            return f64::NEG_INFINITY;
        }
        max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }
}

/// Options shared by the M-step and EM driver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EmOptions {
    /// Hard (Viterbi) counting when false; posterior-weighted when true.
    pub soft: bool,
    pub smoothing: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { soft: false, smoothing: true }
    }
}

/// Relative-frequency re-estimation from the current assignment.
/// Unlabeled pairs (uniform initializations before the first E-step)
/// contribute nothing.
pub fn m_step(
    assignment: &Assignment,
    features: &PairFeatures,
    scheme: Scheme,
    opts: EmOptions,
) -> EmModel {
    let m = scheme.label_count();
    let mut counts: Vec<BTreeMap<String, Vec<f64>>> = vec![BTreeMap::new(); features.slots.len()];
    // register the full per-slot vocabulary first so every value is
    // present with zero counts
    for row in &features.values {
        for (slot, value) in row.iter().enumerate() {
            counts[slot].entry(value.clone()).or_insert_with(|| vec![0.0; m]);
        }
    }
    let mut class_totals = vec![0.0; m];
    for (i, key) in features.keys.iter().enumerate() {
        let Some(state) = assignment.states.get(key) else { continue };
        if opts.soft && !state.pinned {
            for (class, p) in state.posterior.probs.iter().enumerate() {
                class_totals[class] += p;
                for (slot, value) in features.values[i].iter().enumerate() {
                    counts[slot].get_mut(value).unwrap()[class] += p;
                }
            }
        } else {
            let Some(label) = state.label else { continue };
            let class = label.index();
            class_totals[class] += 1.0;
            for (slot, value) in features.values[i].iter().enumerate() {
                counts[slot].get_mut(value).unwrap()[class] += 1.0;
            }
        }
    }
    EmModel {
        scheme,
        slots: features.slots.clone(),
        class_totals,
        counts,
        smoothing: opts.smoothing,
    }
}

/// Posterior assignment under the current model. Pinned pairs keep
/// their pinned label but still receive the computed posterior.
pub fn e_step(model: &EmModel, features: &PairFeatures, previous: &Assignment) -> Assignment {
    let states: Vec<(PairKey, PairState)> = features
        .keys
        .par_iter()
        .zip(features.values.par_iter())
        .map(|(key, values)| {
            let posterior = model.posterior(values);
            let prev = previous.states.get(key);
            let pinned = prev.map(|s| s.pinned).unwrap_or(false);
            let label = if pinned {
                prev.and_then(|s| s.label)
            } else {
                Some(posterior.argmax())
            };
            (key.clone(), PairState { label, posterior, pinned })
        })
        .collect();
    Assignment { states: states.into_iter().collect() }
}

/// Complete-data log-likelihood of the hard assignment under the model
/// (uniform class prior). Unlabeled pairs are skipped.
pub fn complete_data_log_likelihood(
    model: &EmModel,
    features: &PairFeatures,
    assignment: &Assignment,
) -> f64 {
    let m = model.scheme.label_count() as f64;
    let mut total = 0.0;
    for (i, key) in features.keys.iter().enumerate() {
        let Some(state) = assignment.states.get(key) else { continue };
        let Some(label) = state.label else { continue };
        let class = label.index();
        total -= m.ln();
        for (slot, value) in features.values[i].iter().enumerate() {
            total += model.log_prob(slot, value, class);
        }
    }
    total
}

/// Which repair runs on each document's E-step output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepairKind {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "ilp")]
    Ilp,
}

impl std::fmt::Display for RepairKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RepairKind::None => "none",
            RepairKind::Greedy => "greedy",
            RepairKind::Ilp => "ilp",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    pub param_tol: f64,
    pub repair: RepairKind,
    #[serde(default)]
    pub options: EmOptions,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 30,
            param_tol: 1e-6,
            repair: RepairKind::None,
            options: EmOptions::default(),
        }
    }
}

/// One EM round in the trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Pairs whose hard label changed relative to the previous round.
    pub label_flips: usize,
    /// Max absolute change of any smoothed conditional probability.
    pub max_param_delta: f64,
    pub complete_data_log_likelihood: f64,
}

#[derive(Debug, Clone)]
pub struct EmRun {
    pub model: EmModel,
    pub assignment: Assignment,
    pub trace: Vec<IterationRecord>,
}

fn max_param_delta(a: &EmModel, b: &EmModel) -> f64 {
    let mut delta: f64 = 0.0;
    for slot in 0..a.slots.len() {
        for value in a.counts[slot].keys() {
            for class in 0..a.scheme.label_count() {
                let d = (a.prob(slot, value, class) - b.prob(slot, value, class)).abs();
                delta = delta.max(d);
            }
        }
    }
    delta
}

fn repair_assignment(
    assignment: &mut Assignment,
    scheme: Scheme,
    repair: RepairKind,
) -> Result<(), EmtrlError> {
    if repair == RepairKind::None {
        return Ok(());
    }
    let mut per_doc: BTreeMap<String, Vec<PairKey>> = BTreeMap::new();
    for key in assignment.states.keys() {
        per_doc.entry(key.doc_id.clone()).or_default().push(key.clone());
    }
    for keys in per_doc.values() {
        let mut graph = WeightedGraph::new(scheme);
        for key in keys {
            let state = &assignment.states[key];
            let posterior = if state.pinned {
                Posterior::one_hot(state.label.expect("pinned pairs carry their gold label"))
            } else {
                state.posterior.clone()
            };
            graph.add_edge(&key.source, &key.target, posterior)?;
        }
        for key in keys {
            if assignment.states[key].pinned {
                graph.pin(&key.source, &key.target)?;
            }
        }
        let outcome = match repair {
            RepairKind::Greedy => greedy_repair(&graph)?,
            RepairKind::Ilp => ilp_repair(&graph)?,
            RepairKind::None => unreachable!(),
        };
        for key in keys {
            let edge = outcome
                .graph
                .edge(&key.source, &key.target)
                .expect("repair preserves edges");
            if let crate::algebra::EdgeValue::Crisp(label) = edge.value {
                let state = assignment.states.get_mut(key).unwrap();
                if !state.pinned {
                    state.label = Some(label);
                }
            }
        }
    }
    Ok(())
}

/// Runs EM starting at the M-step over the initialization, with
/// optional per-document repair of each E-step's hard labels.
pub fn run_em(
    corpus: &Corpus,
    init: Assignment,
    scheme: Scheme,
    config: &EmConfig,
) -> Result<EmRun, EmtrlError> {
    let features = extract_corpus_features(corpus)?;
    run_em_with_features(&features, init, scheme, config)
}

pub fn run_em_with_features(
    features: &PairFeatures,
    init: Assignment,
    scheme: Scheme,
    config: &EmConfig,
) -> Result<EmRun, EmtrlError> {
    let mut assignment = init;
    let mut model = m_step(&assignment, features, scheme, config.options);
    let mut trace = Vec::new();
    for iteration in 1..=config.max_iters {
        let mut next = e_step(&model, features, &assignment);
        repair_assignment(&mut next, scheme, config.repair)?;
        let label_flips = features
            .keys
            .iter()
            .filter(|key| {
                assignment.states.get(*key).and_then(|s| s.label)
                    != next.states.get(*key).and_then(|s| s.label)
            })
            .count();
        let next_model = m_step(&next, features, scheme, config.options);
        let max_delta = max_param_delta(&model, &next_model);
        let ll = complete_data_log_likelihood(&next_model, features, &next);
        trace.push(IterationRecord {
            iteration,
            label_flips,
            max_param_delta: max_delta,
            complete_data_log_likelihood: ll,
        });
        assignment = next;
        model = next_model;
        if max_delta < config.param_tol {
            break;
        }
    }
    Ok(EmRun { model, assignment, trace })
}

/// Argmax prediction for the requested pairs.
pub fn predict(
    model: &EmModel,
    corpus: &Corpus,
    pairs: &[PairKey],
) -> Result<BTreeMap<PairKey, (RelationLabel, Posterior)>, EmtrlError> {
    let mut out = BTreeMap::new();
    for key in pairs {
        let values = pair_likelihood_values(corpus, key)
            .map_err(|_| EmtrlError::UnknownPair(key.clone()))?;
        let posterior = model.posterior(&values);
        out.insert(key.clone(), (posterior.argmax(), posterior));
    }
    Ok(out)
}

/// Label permutation mapping unlabeled clusters onto gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMapping {
    /// mapped label index = permutation[predicted label index].
    pub permutation: Vec<usize>,
    pub mapped_accuracy: f64,
    /// False when the scheme was too large for exhaustive search and a
    /// greedy confusion matching was used instead.
    pub exhaustive: bool,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for sub in permutations(n - 1) {
        for pos in 0..n {
            let mut perm = sub.clone();
            perm.insert(pos, n - 1);
            out.push(perm);
        }
    }
    out.sort();
    out
}

/// Finds the accuracy-maximizing relabeling of predicted clusters.
/// Exhaustive up to 6 labels; greedy confusion matching beyond.
pub fn map_clusters_to_labels(
    predicted: &BTreeMap<PairKey, RelationLabel>,
    gold: &BTreeMap<PairKey, RelationLabel>,
    scheme: Scheme,
) -> Result<ClusterMapping, EmtrlError> {
    if predicted.len() != gold.len() || predicted.keys().any(|k| !gold.contains_key(k)) {
        return Err(EmtrlError::PairMismatch);
    }
    let m = scheme.label_count();
    let mut confusion = vec![vec![0usize; m]; m];
    for (key, pred) in predicted {
        confusion[pred.index()][gold[key].index()] += 1;
    }
    let total = predicted.len();
    if total == 0 {
        return Ok(ClusterMapping {
            permutation: (0..m).collect(),
            mapped_accuracy: 0.0,
            exhaustive: true,
        });
    }
    if m <= 6 {
        let mut best: Option<(Vec<usize>, usize)> = None;
        for perm in permutations(m) {
            let correct: usize = (0..m).map(|p| confusion[p][perm[p]]).sum();
            let better = match &best {
                Some((_, b)) => correct > *b,
                None => true,
            };
            if better {
                best = Some((perm, correct));
            }
        }
        let (permutation, correct) = best.expect("at least one permutation");
        Ok(ClusterMapping {
            permutation,
            mapped_accuracy: correct as f64 / total as f64,
            exhaustive: true,
        })
    } else {
        // greedy: repeatedly take the largest remaining confusion cell
        let mut permutation = vec![usize::MAX; m];
        let mut used_gold = vec![false; m];
        let mut used_pred = vec![false; m];
        for _ in 0..m {
            let mut best = (0usize, 0usize, 0usize);
            let mut found = false;
            for p in 0..m {
                for g in 0..m {
                    if used_pred[p] || used_gold[g] {
                        continue;
                    }
                    if !found || confusion[p][g] > best.2 {
                        best = (p, g, confusion[p][g]);
                        found = true;
                    }
                }
            }
            permutation[best.0] = best.1;
            used_pred[best.0] = true;
            used_gold[best.1] = true;
        }
        let correct: usize = (0..m).map(|p| confusion[p][permutation[p]]).sum();
        Ok(ClusterMapping {
            permutation,
            mapped_accuracy: correct as f64 / total as f64,
            exhaustive: false,
        })
    }
}

/// Applies a cluster mapping to predictions.
pub fn apply_mapping(
    predicted: &BTreeMap<PairKey, RelationLabel>,
    mapping: &ClusterMapping,
    scheme: Scheme,
) -> BTreeMap<PairKey, RelationLabel> {
    let labels = scheme.labels();
    predicted
        .iter()
        .map(|(k, l)| (k.clone(), labels[mapping.permutation[l.index()]]))
        .collect()
}

/// Supervised naive count model: one M-step over the gold labels.
pub fn fit_supervised(corpus: &Corpus, scheme: Scheme) -> Result<EmModel, EmtrlError> {
    let features = extract_corpus_features(corpus)?;
    let gold = crate::corpus::gold_labels(corpus);
    let mut states = BTreeMap::new();
    for (key, label) in gold {
        let label = crate::corpus::label_in_scheme(label, scheme)?;
        states.insert(
            key,
            PairState { label: Some(label), posterior: Posterior::one_hot(label), pinned: false },
        );
    }
    Ok(m_step(&Assignment { states }, &features, scheme, EmOptions::default()))
}

#[derive(Serialize, Deserialize)]
struct EmModelDump {
    version: u32,
    scheme: Scheme,
    smoothing: bool,
    slots: Vec<String>,
    class_totals: Vec<f64>,
    counts: Vec<BTreeMap<String, Vec<f64>>>,
}

impl EmModel {
    /// Text dump of the count tables, sufficient to reconstruct every
    /// smoothed probability bit-exactly.
    pub fn to_dump_string(&self) -> String {
        let dump = EmModelDump {
            version: 1,
            scheme: self.scheme,
            smoothing: self.smoothing,
            slots: self.slots.clone(),
            class_totals: self.class_totals.clone(),
            counts: self.counts.clone(),
        };
        serde_json::to_string_pretty(&dump).expect("dump cannot fail")
    }

    pub fn from_dump_string(s: &str) -> Result<EmModel, EmtrlError> {
        let dump: EmModelDump =
            serde_json::from_str(s).map_err(|e| EmtrlError::BadDump(e.to_string()))?;
        if dump.version != 1 {
            return Err(EmtrlError::BadDump(format!("unsupported version {}", dump.version)));
        }
        Ok(EmModel {
            scheme: dump.scheme,
            slots: dump.slots,
            class_totals: dump.class_totals,
            counts: dump.counts,
            smoothing: dump.smoothing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{
        CoarseRelation as C, Document, EventInstance, Tense, TLink,
    };

    fn coarse(c: C) -> RelationLabel {
        RelationLabel::Coarse(c)
    }

    fn key(doc: &str, s: &str, t: &str) -> PairKey {
        PairKey::new(doc, s, t)
    }

    /// A document with `n` events chained by tlinks carrying `labels`.
    fn chain_doc(doc_id: &str, labels: &[C], tenses: &[(Tense, Tense)]) -> Document {
        let n = labels.len() + 1;
        let sentences: Vec<Vec<String>> =
            (0..n).map(|i| vec![format!("w{i}"), format!("v{i}")]).collect();
        let mut events: Vec<EventInstance> =
            (0..n).map(|i| EventInstance::new(&format!("e{i}"), i, (1, 2), &format!("v{i}"))).collect();
        for (i, (t1, t2)) in tenses.iter().enumerate() {
            events[i].tense = *t1;
            events[i + 1].tense = *t2;
        }
        let tlinks = labels
            .iter()
            .enumerate()
            .map(|(i, l)| TLink {
                source: format!("e{i}"),
                target: format!("e{}", i + 1),
                label: coarse(*l),
            })
            .collect();
        Document {
            doc_id: doc_id.into(),
            topic: None,
            sentences,
            events,
            dominance_pairs: vec![],
            tlinks,
        }
    }

    fn one_slot_features(rows: &[(&PairKey, &str)]) -> PairFeatures {
        PairFeatures::from_raw(
            vec!["tense_match".to_string()],
            rows.iter().map(|(k, v)| ((*k).clone(), vec![v.to_string()])).collect(),
        )
    }

    #[test]
    fn m_step_hand_count_with_add_one_smoothing() {
        let keys = [key("d", "a", "b"), key("d", "b", "c"), key("d", "c", "d")];
        let features =
            one_slot_features(&[(&keys[0], "true"), (&keys[1], "true"), (&keys[2], "false")]);
        let mut states = BTreeMap::new();
        for k in &keys {
            states.insert(
                k.clone(),
                PairState {
                    label: Some(coarse(C::Before)),
                    posterior: Posterior::one_hot(coarse(C::Before)),
                    pinned: false,
                },
            );
        }
        let model =
            m_step(&Assignment { states }, &features, Scheme::Coarse3, EmOptions::default());
        // vocab {true, false}: P(true | BEFORE) = (2+1)/(3+2+1)
        assert!((model.prob(0, "true", 0) - 0.5).abs() < 1e-12);
        // reserved unseen bucket gets 1/(3+2+1)
        assert!((model.prob(0, "mystery", 0) - 1.0 / 6.0).abs() < 1e-12);
        // empty class: uniform over vocab + unseen
        for v in ["true", "false", "unseen"] {
            assert!((model.prob(0, v, 1) - 1.0 / 3.0).abs() < 1e-12);
        }
        // smoothed probabilities over vocab + unseen sum to one
        for class in 0..3 {
            let sum: f64 = ["true", "false"]
                .iter()
                .map(|v| model.prob(0, v, class))
                .sum::<f64>()
                + model.prob(0, "never-seen", class);
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn m_step_counts_are_pair_order_independent() {
        let keys = [key("d", "a", "b"), key("d", "b", "c")];
        let fwd = one_slot_features(&[(&keys[0], "true"), (&keys[1], "false")]);
        let rev = one_slot_features(&[(&keys[1], "false"), (&keys[0], "true")]);
        let mut states = BTreeMap::new();
        for (i, k) in keys.iter().enumerate() {
            let label = coarse(if i == 0 { C::Before } else { C::After });
            states.insert(
                k.clone(),
                PairState { label: Some(label), posterior: Posterior::one_hot(label), pinned: false },
            );
        }
        let assignment = Assignment { states };
        let a = m_step(&assignment, &fwd, Scheme::Coarse3, EmOptions::default());
        let b = m_step(&assignment, &rev, Scheme::Coarse3, EmOptions::default());
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.class_totals, b.class_totals);
    }

    #[test]
    fn untrained_model_yields_uniform_posteriors() {
        let k = key("d", "a", "b");
        let features = one_slot_features(&[(&k, "true")]);
        let model =
            m_step(&Assignment::default(), &features, Scheme::Coarse3, EmOptions::default());
        let assignment = e_step(&model, &features, &Assignment::default());
        let state = &assignment.states[&k];
        for p in &state.posterior.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        // argmax tie breaks to the first scheme label
        assert_eq!(state.label, Some(coarse(C::Before)));
        let sum: f64 = state.posterior.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn planted_slot_drives_the_argmax() {
        // tense pair (past, present) appears only with BEFORE
        let doc = chain_doc(
            "d",
            &[C::Before, C::Overlap, C::Before, C::Overlap],
            &[
                (Tense::Past, Tense::Present),
                (Tense::Present, Tense::Present),
                (Tense::Past, Tense::Present),
                (Tense::Present, Tense::Present),
            ],
        );
        let corpus = Corpus::new(vec![doc]);
        let model = fit_supervised(&corpus, Scheme::Coarse3).unwrap();
        let pairs = linked_pairs(&corpus);
        let predictions = predict(&model, &corpus, &pairs).unwrap();
        assert_eq!(predictions[&pairs[0]].0, coarse(C::Before));
    }

    #[test]
    fn random_init_is_deterministic_and_roughly_uniform() {
        let docs: Vec<Document> = (0..30)
            .map(|i| {
                chain_doc(
                    &format!("d{i}"),
                    &[C::Before; 100],
                    &[(Tense::None, Tense::None); 100],
                )
            })
            .collect();
        let corpus = Corpus::new(docs);
        let a = init_random(&corpus, Scheme::Coarse3, 7);
        let b = init_random(&corpus, Scheme::Coarse3, 7);
        assert_eq!(a, b);
        let n: f64 = 3000.0;
        let sigma = (n * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for label in Scheme::Coarse3.labels() {
            let count =
                a.states.values().filter(|s| s.label == Some(label)).count() as f64;
            assert!((count - n / 3.0).abs() < 5.0 * sigma, "{label}: {count}");
        }
    }

    #[test]
    fn supervised_init_pins_a_stratified_ceiling() {
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        labels.extend(std::iter::repeat(C::Before).take(100));
        labels.extend(std::iter::repeat(C::After).take(50));
        labels.extend(std::iter::repeat(C::Overlap).take(50));
        docs.push(chain_doc("d", &labels, &vec![(Tense::None, Tense::None); labels.len()]));
        let corpus = Corpus::new(docs);
        let init = init_supervised(&corpus, 0.1, 3).unwrap();
        let pinned_per: BTreeMap<RelationLabel, usize> = Scheme::Coarse3
            .labels()
            .into_iter()
            .map(|l| {
                (
                    l,
                    init.states.values().filter(|s| s.pinned && s.label == Some(l)).count(),
                )
            })
            .collect();
        assert_eq!(pinned_per[&coarse(C::Before)], 10);
        assert_eq!(pinned_per[&coarse(C::After)], 5);
        assert_eq!(pinned_per[&coarse(C::Overlap)], 5);
        assert_eq!(init.pinned_count(), 20);

        let all = init_supervised(&corpus, 1.0, 3).unwrap();
        assert_eq!(all.pinned_count(), 200);
        assert!(init_supervised(&corpus, 0.0, 3).is_err());
        assert!(init_supervised(&corpus, 1.5, 3).is_err());
    }

    #[test]
    fn pinned_pairs_never_change_across_iterations() {
        let doc = chain_doc(
            "d",
            &[C::Before, C::After, C::Overlap, C::Before, C::After],
            &[
                (Tense::Past, Tense::Future),
                (Tense::Future, Tense::Past),
                (Tense::None, Tense::None),
                (Tense::Past, Tense::Future),
                (Tense::Future, Tense::Past),
            ],
        );
        let corpus = Corpus::new(vec![doc]);
        let init = init_supervised(&corpus, 0.5, 11).unwrap();
        let pinned: BTreeMap<PairKey, Option<RelationLabel>> = init
            .states
            .iter()
            .filter(|(_, s)| s.pinned)
            .map(|(k, s)| (k.clone(), s.label))
            .collect();
        assert!(!pinned.is_empty());
        let run = run_em(
            &corpus,
            init,
            Scheme::Coarse3,
            &EmConfig { max_iters: 30, ..Default::default() },
        )
        .unwrap();
        for (k, label) in pinned {
            assert_eq!(run.assignment.states[&k].label, label);
            assert!(run.assignment.states[&k].pinned);
        }
    }

    #[test]
    fn zero_iterations_returns_the_initialization_model() {
        let doc = chain_doc("d", &[C::Before], &[(Tense::Past, Tense::Future)]);
        let corpus = Corpus::new(vec![doc]);
        let init = init_random(&corpus, Scheme::Coarse3, 1);
        let features = extract_corpus_features(&corpus).unwrap();
        let expected = m_step(&init, &features, Scheme::Coarse3, EmOptions::default());
        let run = run_em(
            &corpus,
            init.clone(),
            Scheme::Coarse3,
            &EmConfig { max_iters: 0, ..Default::default() },
        )
        .unwrap();
        assert_eq!(run.model, expected);
        assert_eq!(run.assignment, init);
        assert!(run.trace.is_empty());
    }

    #[test]
    fn greedy_repair_keeps_every_document_consistent() {
        use crate::algebra::{check_consistency, EdgeValue, TemporalGraph};
        // a triangle-linked document so repairs have something to do
        let mut doc = chain_doc(
            "d",
            &[C::Before, C::Before],
            &[(Tense::Past, Tense::Present), (Tense::Present, Tense::Future)],
        );
        doc.tlinks.push(TLink { source: "e0".into(), target: "e2".into(), label: coarse(C::Before) });
        let corpus = Corpus::new(vec![doc]);
        let init = init_random(&corpus, Scheme::Coarse3, 5);
        let run = run_em(
            &corpus,
            init,
            Scheme::Coarse3,
            &EmConfig { max_iters: 5, repair: RepairKind::Greedy, ..Default::default() },
        )
        .unwrap();
        let mut graph = TemporalGraph::new();
        for (k, s) in &run.assignment.states {
            graph
                .add_edge(&k.source, &k.target, EdgeValue::Crisp(s.label.unwrap()))
                .unwrap();
        }
        assert!(check_consistency(&graph).unwrap().is_consistent());
    }

    #[test]
    fn corpus_log_likelihood_decomposes_over_pairs() {
        let doc = chain_doc(
            "d",
            &[C::Before, C::After, C::Overlap],
            &[
                (Tense::Past, Tense::Future),
                (Tense::Future, Tense::Past),
                (Tense::None, Tense::None),
            ],
        );
        let corpus = Corpus::new(vec![doc]);
        let features = extract_corpus_features(&corpus).unwrap();
        let model = fit_supervised(&corpus, Scheme::Coarse3).unwrap();
        let per_pair_sum: f64 =
            features.values.iter().map(|v| model.log_marginal(v)).sum();
        let direct_product: f64 = features
            .values
            .iter()
            .map(|v| model.log_marginal(v).exp())
            .product();
        assert!((per_pair_sum - direct_product.ln()).abs() < 1e-9);
    }

    #[test]
    fn hard_em_objective_is_monotone_without_smoothing() {
        let docs: Vec<Document> = (0..6)
            .map(|i| {
                chain_doc(
                    &format!("d{i}"),
                    &[C::Before, C::After, C::Overlap, C::Before],
                    &[
                        (Tense::Past, Tense::Future),
                        (Tense::Future, Tense::Past),
                        (Tense::None, Tense::None),
                        (Tense::Past, Tense::Present),
                    ],
                )
            })
            .collect();
        let corpus = Corpus::new(docs);
        let init = init_random(&corpus, Scheme::Coarse3, 2);
        let config = EmConfig {
            max_iters: 15,
            options: EmOptions { soft: false, smoothing: false },
            ..Default::default()
        };
        let run = run_em(&corpus, init, Scheme::Coarse3, &config).unwrap();
        let lls: Vec<f64> =
            run.trace.iter().map(|r| r.complete_data_log_likelihood).collect();
        for w in lls.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9 * w[0].abs(),
                "objective decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn cluster_mapping_recovers_cyclic_relabelings() {
        let labels = Scheme::Coarse3.labels();
        let mut predicted = BTreeMap::new();
        let mut gold = BTreeMap::new();
        for i in 0..60 {
            let g = labels[i % 3];
            let cycled = labels[(i + 1) % 3];
            let k = key("d", &format!("a{i}"), &format!("b{i}"));
            gold.insert(k.clone(), g);
            predicted.insert(k, cycled);
        }
        let mapping = map_clusters_to_labels(&predicted, &gold, Scheme::Coarse3).unwrap();
        assert_eq!(mapping.mapped_accuracy, 1.0);
        assert!(mapping.exhaustive);
        let mapped = apply_mapping(&predicted, &mapping, Scheme::Coarse3);
        assert_eq!(mapped, gold);
    }

    #[test]
    fn identity_mapping_stays_when_already_optimal() {
        let labels = Scheme::Coarse3.labels();
        let mut predicted = BTreeMap::new();
        let mut gold = BTreeMap::new();
        for i in 0..30 {
            let k = key("d", &format!("a{i}"), &format!("b{i}"));
            gold.insert(k.clone(), labels[i % 3]);
            predicted.insert(k, labels[i % 3]);
        }
        let mapping = map_clusters_to_labels(&predicted, &gold, Scheme::Coarse3).unwrap();
        assert_eq!(mapping.permutation, vec![0, 1, 2]);
        assert_eq!(mapping.mapped_accuracy, 1.0);
    }

    #[test]
    fn mapping_never_hurts_random_predictions() {
        let labels = Scheme::Coarse3.labels();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let mut predicted = BTreeMap::new();
            let mut gold = BTreeMap::new();
            for i in 0..300 {
                let k = key("d", &format!("a{i}"), &format!("b{i}"));
                gold.insert(k.clone(), labels[rng.gen_range(0..3)]);
                predicted.insert(k, labels[rng.gen_range(0..3)]);
            }
            let unmapped = predicted
                .iter()
                .filter(|(k, l)| gold[*k] == **l)
                .count() as f64
                / 300.0;
            let mapping =
                map_clusters_to_labels(&predicted, &gold, Scheme::Coarse3).unwrap();
            assert!(mapping.mapped_accuracy >= unmapped);
        }
    }

    #[test]
    fn model_dump_round_trips_bit_exactly() {
        let doc = chain_doc(
            "d",
            &[C::Before, C::After],
            &[(Tense::Past, Tense::Future), (Tense::Future, Tense::Past)],
        );
        let corpus = Corpus::new(vec![doc]);
        let model = fit_supervised(&corpus, Scheme::Coarse3).unwrap();
        let dump = model.to_dump_string();
        let loaded = EmModel::from_dump_string(&dump).unwrap();
        assert_eq!(model, loaded);
        for slot in 0..model.slots.len() {
            for value in model.counts[slot].keys() {
                for class in 0..3 {
                    assert_eq!(
                        model.prob(slot, value, class).to_bits(),
                        loaded.prob(slot, value, class).to_bits()
                    );
                }
            }
        }
    }

    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
}
