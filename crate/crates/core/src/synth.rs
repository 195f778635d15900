//! Synthetic corpus generator: events are concrete integer intervals,
//! gold labels derive from interval comparison (so gold is consistent
//! by construction), and configurable feature-label correlations are
//! planted for the learners to find.

use crate::algebra::{label_to_allen, BaseRelation};
use crate::corpus::{
    Aspect, Corpus, Document, EventClass, EventInstance, Modality, PairKey, Polarity,
    RelationLabel, Scheme, Tense, TLink,
};
use crate::emtrl::EmModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub documents: usize,
    pub topics: usize,
    /// Inclusive range of events per document.
    pub events_per_doc: (usize, usize),
    /// Probability that an event pair of a document is linked.
    pub pair_link_density: f64,
    pub scheme: Scheme,
    /// Sharpness of the planted feature-label conditionals, 0 = none.
    pub feature_informativeness: f64,
    /// Probability of resampling an event attribute after planting.
    pub annotation_noise_rate: f64,
    /// Target fraction of consecutive events sharing a sentence.
    pub intra_sentence_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            documents: 50,
            topics: 5,
            events_per_doc: (6, 10),
            pair_link_density: 0.5,
            scheme: Scheme::Coarse3,
            feature_informativeness: 0.9,
            annotation_noise_rate: 0.05,
            intra_sentence_fraction: 0.7,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        if self.documents == 0 || self.topics == 0 {
            return Err(SynthError::BadConfig("documents and topics must be positive".into()));
        }
        if self.events_per_doc.0 < 2 || self.events_per_doc.0 > self.events_per_doc.1 {
            return Err(SynthError::BadConfig("events_per_doc range needs at least 2".into()));
        }
        if !(self.pair_link_density > 0.0 && self.pair_link_density <= 1.0) {
            return Err(SynthError::BadConfig("pair_link_density must lie in (0, 1]".into()));
        }
        for (name, v) in [
            ("feature_informativeness", self.feature_informativeness),
            ("annotation_noise_rate", self.annotation_noise_rate),
            ("intra_sentence_fraction", self.intra_sentence_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::BadConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.scheme == Scheme::Raw14 {
            return Err(SynthError::BadConfig("generation targets norm6 or coarse3".into()));
        }
        Ok(())
    }
}

/// Per-topic generation parameters, derived from the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicProfile {
    pub gap_max: i64,
    pub len_max: i64,
    /// Reliability multipliers of the planted per-topic signals.
    pub entity_reliability: f64,
    pub tense_reliability: f64,
    pub aspect_reliability: f64,
    /// Topic-local positional tense mapping (early, middle, late).
    pub tense_map: [Tense; 3],
    /// Topic-local length aspect mapping (short, long).
    pub aspect_map: [Aspect; 2],
}

/// Description of the planted conditional distributions.
#[derive(Debug, Clone)]
pub struct PlantedModel {
    pub scheme: Scheme,
    pub informativeness: f64,
    /// P(dominates value | class), topic-independent.
    pub dominates: BTreeMap<String, Vec<f64>>,
    pub topics: Vec<TopicProfile>,
}

const DOMINATES_VALUES: [&str; 3] = ["fwd", "rev", "none"];

fn dominates_target(label: RelationLabel) -> usize {
    label.index() % 3
}

fn dominates_conditionals(scheme: Scheme, informativeness: f64) -> BTreeMap<String, Vec<f64>> {
    let q = 1.0 / 3.0 + (2.0 / 3.0) * informativeness;
    let rest = (1.0 - q) / 2.0;
    let mut out = BTreeMap::new();
    for (vi, value) in DOMINATES_VALUES.iter().enumerate() {
        let probs: Vec<f64> = scheme
            .labels()
            .iter()
            .map(|l| if dominates_target(*l) == vi { q } else { rest })
            .collect();
        out.insert(value.to_string(), probs);
    }
    out
}

fn derived_seed(seed: u64, stream: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream.wrapping_mul(0xff51_afd7_ed55_8ccd))
        .wrapping_add(index)
}

fn topic_profile(config: &SynthConfig, topic: usize) -> TopicProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(config.seed, 1, topic as u64));
    let tenses = [Tense::Past, Tense::Present, Tense::Future];
    let mut tense_map = tenses;
    // cheap per-topic permutation
    for i in (1..3).rev() {
        tense_map.swap(i, rng.gen_range(0..=i));
    }
    let aspects = [Aspect::None, Aspect::Prog, Aspect::Perfect];
    let aspect_map = [aspects[rng.gen_range(0..3)], aspects[rng.gen_range(0..3)]];
    TopicProfile {
        gap_max: rng.gen_range(2..=5),
        len_max: rng.gen_range(2..=11),
        entity_reliability: 0.3 + 0.7 * rng.gen_range(0.0..1.0),
        tense_reliability: 0.3 + 0.7 * rng.gen_range(0.0..1.0),
        aspect_reliability: 0.3 + 0.7 * rng.gen_range(0.0..1.0),
        tense_map,
        aspect_map,
    }
}

/// Label of the scheme whose interval semantics contains the base
/// relation, with the direction that makes it expressible. Proper
/// overlaps have no norm6 form and yield None there.
fn scheme_label_for(
    scheme: Scheme,
    base: BaseRelation,
) -> Option<(RelationLabel, bool)> {
    for label in scheme.labels() {
        let image = label_to_allen(label).expect("generation schemes map");
        if image.contains(base) {
            return Some((label, false));
        }
    }
    let conv = base.converse();
    for label in scheme.labels() {
        let image = label_to_allen(label).expect("generation schemes map");
        if image.contains(conv) {
            return Some((label, true));
        }
    }
    None
}

const SHARED_WORDS: [&str; 6] = ["the", "a", "of", "to", "in", "said"];
const VERBS: [&str; 20] = [
    "announce", "approve", "begin", "build", "close", "decline", "expand", "fall", "finish",
    "grow", "hold", "keep", "launch", "meet", "open", "report", "rise", "sell", "start", "stop",
];

fn generate_document(
    config: &SynthConfig,
    profiles: &[TopicProfile],
    doc_index: usize,
    entity_counter_base: usize,
) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(config.seed, 2, doc_index as u64));
    let topic = doc_index % config.topics;
    let profile = &profiles[topic];
    let iota = config.feature_informativeness;

    let n = rng.gen_range(config.events_per_doc.0..=config.events_per_doc.1);
    // concrete integer intervals, sequential starts
    let mut intervals: Vec<(i64, i64)> = Vec::with_capacity(n);
    let mut cursor = 0i64;
    for _ in 0..n {
        cursor += rng.gen_range(1..=profile.gap_max);
        let len = rng.gen_range(1..=profile.len_max);
        intervals.push((cursor, cursor + len));
    }

    // sentence placement honoring the intra-sentence fraction
    let mut sentence_of = vec![0usize; n];
    for i in 1..n {
        sentence_of[i] = if rng.gen_bool(config.intra_sentence_fraction) {
            sentence_of[i - 1]
        } else {
            sentence_of[i - 1] + 1
        };
    }
    let sentence_count = sentence_of[n - 1] + 1;
    let mut sentences: Vec<Vec<String>> = vec![Vec::new(); sentence_count];

    // position buckets by interval start rank
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|i| (intervals[*i].0, intervals[*i].1, *i));
    let mut bucket = vec![0usize; n];
    for (rank, idx) in order.iter().enumerate() {
        bucket[*idx] = (3 * rank) / n;
    }

    let mut events: Vec<EventInstance> = Vec::with_capacity(n);
    for i in 0..n {
        let word = VERBS[rng.gen_range(0..VERBS.len())];
        let sentence = &mut sentences[sentence_of[i]];
        let span = (sentence.len(), sentence.len() + 1);
        sentence.push(word.to_string());
        let mut ev = EventInstance::new(&format!("e{i}"), sentence_of[i], span, word);
        ev.lemma = Some(word.to_string());
        ev.pos = crate::corpus::Pos::Verb;
        ev.tense = if rng.gen_bool(iota * profile.tense_reliability) {
            profile.tense_map[bucket[i]]
        } else {
            [Tense::None, Tense::Past, Tense::Present, Tense::Future][rng.gen_range(0..4)]
        };
        let long = intervals[i].1 - intervals[i].0 > 2;
        ev.aspect = if rng.gen_bool(iota * profile.aspect_reliability) {
            profile.aspect_map[usize::from(long)]
        } else {
            [Aspect::None, Aspect::Prog, Aspect::Perfect, Aspect::ProgPerfect]
                [rng.gen_range(0..4)]
        };
        ev.modality = [Modality::None, Modality::Would, Modality::Could][rng.gen_range(0..3)];
        ev.polarity = if rng.gen_bool(0.9) { Polarity::Positive } else { Polarity::Negative };
        ev.event_class = [
            EventClass::Occurrence,
            EventClass::Report,
            EventClass::State,
            EventClass::Aspectual,
        ][rng.gen_range(0..4)];
        ev.in_prep_phrase = rng.gen_bool(0.2);
        events.push(ev);
    }

    // attribute annotation noise
    if config.annotation_noise_rate > 0.0 {
        for ev in events.iter_mut() {
            let rate = config.annotation_noise_rate;
            if rng.gen_bool(rate) {
                ev.tense =
                    [Tense::None, Tense::Past, Tense::Present, Tense::Future][rng.gen_range(0..4)];
            }
            if rng.gen_bool(rate) {
                ev.aspect = [Aspect::None, Aspect::Prog, Aspect::Perfect, Aspect::ProgPerfect]
                    [rng.gen_range(0..4)];
            }
            if rng.gen_bool(rate) {
                ev.polarity =
                    if rng.gen_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
            }
        }
    }

    // linked pairs with interval-derived gold labels
    let mut tlinks = Vec::new();
    let mut dominance_pairs = Vec::new();
    let mut entity_counter = entity_counter_base;
    let q = 1.0 / 3.0 + (2.0 / 3.0) * iota;
    for i in 0..n {
        for j in i + 1..n {
            if !rng.gen_bool(config.pair_link_density) {
                continue;
            }
            // randomize the stored direction so inverse-family labels
            // (AFTER in coarse3) occur; starts ascend with the index
            let (base, lo, hi) = if rng.gen_bool(0.5) {
                (BaseRelation::between(intervals[j], intervals[i]), j, i)
            } else {
                (BaseRelation::between(intervals[i], intervals[j]), i, j)
            };
            let Some((label, swapped)) = scheme_label_for(config.scheme, base) else {
                continue; // not expressible in this scheme
            };
            let (src, tgt) = if swapped { (hi, lo) } else { (lo, hi) };
            let source = format!("e{src}");
            let target = format!("e{tgt}");

            // planted dominance value, topic-independent
            let target_value = dominates_target(label);
            let value = if rng.gen_bool(q) {
                target_value
            } else {
                // uniform over the other two values
                let other = rng.gen_range(0..2);
                (target_value + 1 + other) % 3
            };
            match DOMINATES_VALUES[value] {
                "fwd" => dominance_pairs.push((source.clone(), target.clone())),
                "rev" => dominance_pairs.push((target.clone(), source.clone())),
                _ => {}
            }

            // planted entity sharing, per-topic reliability
            let rel = iota * profile.entity_reliability;
            let wants_share = dominates_target(label) == 2;
            let p_share = rel * if wants_share { 0.9 } else { 0.05 } + (1.0 - rel) * 0.2;
            if rng.gen_bool(p_share) {
                let ent = format!("ent{entity_counter}");
                entity_counter += 1;
                events[src].entity_args.push(ent.clone());
                events[tgt].entity_args.push(ent);
            }

            tlinks.push(TLink { source, target, label });
        }
    }
    // dominance lists may collect duplicates when both orders were drawn
    dominance_pairs.sort();
    dominance_pairs.dedup();

    // topic-indicative filler vocabulary for retrieval
    for sentence in sentences.iter_mut() {
        let fillers = rng.gen_range(3..=5);
        for _ in 0..fillers {
            let u: f64 = rng.gen_range(0.0..1.0);
            let z = ((u * u) * 30.0) as usize;
            sentence.push(format!("t{topic}w{z}"));
        }
        sentence.push(SHARED_WORDS[rng.gen_range(0..SHARED_WORDS.len())].to_string());
    }

    Document {
        doc_id: format!("doc{doc_index:04}"),
        topic: Some(format!("topic{topic}")),
        sentences,
        events,
        dominance_pairs,
        tlinks,
    }
}

/// Generates a corpus with interval-derived gold tlinks and the
/// description of the planted conditionals.
pub fn generate(config: &SynthConfig) -> Result<(Corpus, PlantedModel), SynthError> {
    config.validate()?;
    let profiles: Vec<TopicProfile> =
        (0..config.topics).map(|t| topic_profile(config, t)).collect();
    let documents: Vec<Document> = (0..config.documents)
        .into_par_iter()
        .map(|d| generate_document(config, &profiles, d, d * 10_000))
        .collect();
    let corpus = Corpus::new(documents);
    debug_assert!(corpus.validate().is_ok());
    let planted = PlantedModel {
        scheme: config.scheme,
        informativeness: config.feature_informativeness,
        dominates: dominates_conditionals(config.scheme, config.feature_informativeness),
        topics: profiles,
    };
    Ok((corpus, planted))
}

impl PlantedModel {
    /// The planted dominates conditionals as a count model whose
    /// probabilities equal the planted ones exactly.
    pub fn as_em_model(&self) -> EmModel {
        let m = self.scheme.label_count();
        let mut counts = BTreeMap::new();
        for (value, probs) in &self.dominates {
            counts.insert(value.clone(), probs.clone());
        }
        EmModel {
            scheme: self.scheme,
            slots: vec!["dominates".to_string()],
            class_totals: vec![1.0; m],
            counts: vec![counts],
            smoothing: false,
        }
    }
}

/// Text report of the planted conditional tables, in the count-model
/// dump format.
pub fn describe_planted(planted: &PlantedModel) -> String {
    planted.as_em_model().to_dump_string()
}

/// Splits a corpus into train and test parts by document index.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64) -> (Corpus, Corpus) {
    let cut = ((corpus.documents.len() as f64) * train_fraction).round() as usize;
    let train = Corpus::new(corpus.documents[..cut].to_vec());
    let test = Corpus::new(corpus.documents[cut..].to_vec());
    (train, test)
}

/// Gold labels restricted to one sub-corpus.
pub fn gold_of(corpus: &Corpus) -> BTreeMap<PairKey, RelationLabel> {
    crate::corpus::gold_labels(corpus)
}
