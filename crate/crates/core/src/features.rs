//! Feature extraction from event pairs: the basic and extra
//! event-event feature sets of the margin classifier and the full
//! slot list consumed by the EM learner, plus sparse vectorization.

use crate::corpus::{Document, EventInstance};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown event id {0:?}")]
    UnknownEvent(String),
    #[error("feature index parse error at line {line}: {msg}")]
    IndexParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Value emitted for optional annotations that are absent.
pub const ABSENT: &str = "ABSENT";

/// Per-event slots, suffixed 1/2 in pair vectors.
pub const EVENT_SLOTS: [&str; 13] = [
    "word",
    "lemma",
    "synset",
    "pos",
    "gov_verb",
    "gov_verb_pos",
    "auxiliary",
    "event_class",
    "tense",
    "aspect",
    "modality",
    "polarity",
    "prep",
];

/// Pair-level slots of the EM feature set.
pub const EMTRL_PAIR_SLOTS: [&str; 10] = [
    "tense_match",
    "aspect_match",
    "class_match",
    "tense_pair",
    "aspect_pair",
    "class_pair",
    "pos_pair",
    "text_order",
    "dominates",
    "entity_match",
];

/// Number of slots in an EM pair vector: every per-event slot twice
/// plus the pair-level slots.
pub const EMTRL_SLOT_COUNT: usize = EVENT_SLOTS.len() * 2 + EMTRL_PAIR_SLOTS.len();

/// Which feature set to extract for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    /// Both events' five temporal attributes, word and POS, plus
    /// tense and aspect agreement flags.
    BcdcBasic,
    /// BcdcBasic plus prepositional-phrase flags, the same-sentence
    /// flag, and the sentence distance bucket.
    BcdcExtra,
    /// The full slot list of the EM learner.
    Emtrl,
}

/// One categorical feature observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureValue {
    pub slot: String,
    pub value: String,
}

impl FeatureValue {
    fn new(slot: impl Into<String>, value: impl Into<String>) -> Self {
        FeatureValue { slot: slot.into(), value: value.into() }
    }
}

/// An ordered list of feature values, at most one per slot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVector {
    pub values: Vec<FeatureValue>,
}

impl FeatureVector {
    pub fn get(&self, slot: &str) -> Option<&str> {
        self.values.iter().find(|v| v.slot == slot).map(|v| v.value.as_str())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, slot: impl Into<String>, value: impl Into<String>) {
        let value = FeatureValue::new(slot, value);
        debug_assert!(
            !self.values.iter().any(|v| v.slot == value.slot),
            "duplicate slot {}",
            value.slot
        );
        self.values.push(value);
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn opt(v: &Option<String>) -> String {
    v.clone().unwrap_or_else(|| ABSENT.to_string())
}

/// The seven basic features of a single event.
pub fn extract_basic(event: &EventInstance) -> Vec<FeatureValue> {
    vec![
        FeatureValue::new("tense", event.tense.name()),
        FeatureValue::new("aspect", event.aspect.name()),
        FeatureValue::new("modality", event.modality.name()),
        FeatureValue::new("polarity", event.polarity.name()),
        FeatureValue::new("event_class", event.event_class.name()),
        FeatureValue::new("word", event.word.clone()),
        FeatureValue::new("pos", event.pos.name()),
    ]
}

fn event_position(e: &EventInstance) -> (usize, usize, usize) {
    (e.sentence_index, e.token_span.0, e.token_span.1)
}

fn text_order(a: &EventInstance, b: &EventInstance) -> &'static str {
    use std::cmp::Ordering;
    match event_position(a).cmp(&event_position(b)) {
        Ordering::Less => "first",
        Ordering::Greater => "second",
        Ordering::Equal => "same",
    }
}

fn dominates(doc: &Document, a: &str, b: &str) -> &'static str {
    let fwd = doc.dominance_pairs.iter().any(|(x, y)| x == a && y == b);
    let rev = doc.dominance_pairs.iter().any(|(x, y)| x == b && y == a);
    match (fwd, rev) {
        (true, true) => "both",
        (true, false) => "fwd",
        (false, true) => "rev",
        (false, false) => "none",
    }
}

fn sentence_distance_bucket(a: &EventInstance, b: &EventInstance) -> &'static str {
    match a.sentence_index.abs_diff(b.sentence_index) {
        0 => "0",
        1 => "1",
        _ => "2+",
    }
}

/// Extracts the pair feature vector for two events of a document.
pub fn extract_pair(
    doc: &Document,
    e1: &str,
    e2: &str,
    set: FeatureSet,
) -> Result<FeatureVector, FeatureError> {
    let a = doc.event(e1).ok_or_else(|| FeatureError::UnknownEvent(e1.to_string()))?;
    let b = doc.event(e2).ok_or_else(|| FeatureError::UnknownEvent(e2.to_string()))?;
    let mut vec = FeatureVector::default();

    match set {
        FeatureSet::BcdcBasic | FeatureSet::BcdcExtra => {
            for (suffix, ev) in [("1", a), ("2", b)] {
                for fv in extract_basic(ev) {
                    vec.push(format!("{}{suffix}", fv.slot), fv.value);
                }
            }
            vec.push("tense_match", flag(a.tense == b.tense));
            vec.push("aspect_match", flag(a.aspect == b.aspect));
            if set == FeatureSet::BcdcExtra {
                vec.push("prep1", flag(a.in_prep_phrase));
                vec.push("prep2", flag(b.in_prep_phrase));
                vec.push("same_sentence", flag(a.sentence_index == b.sentence_index));
                vec.push("sentence_distance", sentence_distance_bucket(a, b));
            }
        }
        FeatureSet::Emtrl => {
            for (suffix, ev) in [("1", a), ("2", b)] {
                vec.push(format!("word{suffix}"), ev.word.clone());
                vec.push(format!("lemma{suffix}"), opt(&ev.lemma));
                vec.push(format!("synset{suffix}"), opt(&ev.synset_id));
                vec.push(format!("pos{suffix}"), ev.pos.name());
                vec.push(format!("gov_verb{suffix}"), opt(&ev.governing_verb));
                vec.push(format!("gov_verb_pos{suffix}"), opt(&ev.governing_verb_pos));
                vec.push(format!("auxiliary{suffix}"), opt(&ev.auxiliary));
                vec.push(format!("event_class{suffix}"), ev.event_class.name());
                vec.push(format!("tense{suffix}"), ev.tense.name());
                vec.push(format!("aspect{suffix}"), ev.aspect.name());
                vec.push(format!("modality{suffix}"), ev.modality.name());
                vec.push(format!("polarity{suffix}"), ev.polarity.name());
                vec.push(format!("prep{suffix}"), flag(ev.in_prep_phrase));
            }
            vec.push("tense_match", flag(a.tense == b.tense));
            vec.push("aspect_match", flag(a.aspect == b.aspect));
            vec.push("class_match", flag(a.event_class == b.event_class));
            vec.push("tense_pair", format!("{}|{}", a.tense.name(), b.tense.name()));
            vec.push("aspect_pair", format!("{}|{}", a.aspect.name(), b.aspect.name()));
            vec.push("class_pair", format!("{}|{}", a.event_class.name(), b.event_class.name()));
            vec.push("pos_pair", format!("{}|{}", a.pos.name(), b.pos.name()));
            vec.push("text_order", text_order(a, b));
            vec.push("dominates", dominates(doc, e1, e2));
            vec.push(
                "entity_match",
                flag(a.entity_args.iter().any(|arg| b.entity_args.contains(arg))),
            );
        }
    }
    Ok(vec)
}

/// A sparse indicator vector: (dimension, weight) pairs, weight 1.0.
pub type SparseVector = Vec<(usize, f64)>;

/// Stable mapping from (slot, value) pairs to integer dimensions.
#[derive(Debug, Clone, Default)]
pub struct FeatureIndex {
    map: HashMap<(String, String), usize>,
    entries: Vec<(String, String)>,
}

impl FeatureIndex {
    pub fn new() -> Self {
        FeatureIndex::default()
    }

    pub fn dimension_count(&self) -> usize {
        self.entries.len()
    }

    pub fn lookup(&self, slot: &str, value: &str) -> Option<usize> {
        self.map.get(&(slot.to_string(), value.to_string())).copied()
    }

    pub fn register(&mut self, slot: &str, value: &str) -> usize {
        let key = (slot.to_string(), value.to_string());
        if let Some(&dim) = self.map.get(&key) {
            return dim;
        }
        let dim = self.entries.len();
        self.entries.push(key.clone());
        self.map.insert(key, dim);
        dim
    }

    /// Writes the index as slot<TAB>value<TAB>dimension lines.
    pub fn save<W: Write>(&self, mut writer: W) -> Result<(), FeatureError> {
        for (dim, (slot, value)) in self.entries.iter().enumerate() {
            writeln!(writer, "{slot}\t{value}\t{dim}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, FeatureError> {
        let mut index = FeatureIndex::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (slot, value, dim) = match (parts.next(), parts.next(), parts.next()) {
                (Some(s), Some(v), Some(d)) => (s, v, d),
                _ => {
                    return Err(FeatureError::IndexParse {
                        line: i + 1,
                        msg: "expected slot<TAB>value<TAB>dimension".to_string(),
                    })
                }
            };
            let dim: usize = dim.parse().map_err(|e| FeatureError::IndexParse {
                line: i + 1,
                msg: format!("bad dimension: {e}"),
            })?;
            if dim != index.entries.len() {
                return Err(FeatureError::IndexParse {
                    line: i + 1,
                    msg: format!("dimension {dim} out of order"),
                });
            }
            index.register(slot, value);
        }
        Ok(index)
    }
}

/// Maps a feature vector to sparse indicator form. With `frozen`,
/// unseen (slot, value) pairs are dropped; otherwise they register
/// new dimensions.
pub fn vectorize(vec: &FeatureVector, index: &mut FeatureIndex, frozen: bool) -> SparseVector {
    let mut out: SparseVector = Vec::with_capacity(vec.values.len());
    for fv in &vec.values {
        let dim = if frozen {
            match index.lookup(&fv.slot, &fv.value) {
                Some(d) => d,
                None => continue,
            }
        } else {
            index.register(&fv.slot, &fv.value)
        };
        out.push((dim, 1.0));
    }
    out.sort_by_key(|(d, _)| *d);
    out
}
