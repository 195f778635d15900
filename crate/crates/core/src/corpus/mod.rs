//! Corpus data model: documents, annotated events, temporal links, and
//! the three relation labeling schemes with their conversions.

mod io;
mod timeml;

pub use io::{parse_corpus, serialize_corpus};
pub use timeml::{import_timeml_subset, TimemlImport};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Relation labeling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "raw14")]
    Raw14,
    #[serde(rename = "norm6")]
    Norm6,
    #[serde(rename = "coarse3")]
    Coarse3,
}

impl Scheme {
    /// Labels of the scheme in its fixed tie-break order.
    pub fn labels(&self) -> Vec<RelationLabel> {
        match self {
            Scheme::Raw14 => RawRelation::ALL.iter().map(|&r| RelationLabel::Raw(r)).collect(),
            Scheme::Norm6 => NormRelation::ALL.iter().map(|&r| RelationLabel::Norm(r)).collect(),
            Scheme::Coarse3 => {
                CoarseRelation::ALL.iter().map(|&r| RelationLabel::Coarse(r)).collect()
            }
        }
    }

    pub fn label_count(&self) -> usize {
        match self {
            Scheme::Raw14 => 14,
            Scheme::Norm6 => 6,
            Scheme::Coarse3 => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Raw14 => "raw14",
            Scheme::Norm6 => "norm6",
            Scheme::Coarse3 => "coarse3",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme, CorpusError> {
        match s.to_ascii_lowercase().as_str() {
            "raw14" => Ok(Scheme::Raw14),
            "norm6" => Ok(Scheme::Norm6),
            "coarse3" => Ok(Scheme::Coarse3),
            other => Err(CorpusError::UnsupportedScheme(other.to_string())),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The fourteen TimeML event-event relation types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RawRelation {
    Simultaneous,
    Identity,
    Before,
    After,
    IBefore,
    IAfter,
    Includes,
    IsIncluded,
    During,
    DuringInv,
    Begins,
    BegunBy,
    Ends,
    EndedBy,
}

impl RawRelation {
    pub const ALL: [RawRelation; 14] = [
        RawRelation::Simultaneous,
        RawRelation::Identity,
        RawRelation::Before,
        RawRelation::After,
        RawRelation::IBefore,
        RawRelation::IAfter,
        RawRelation::Includes,
        RawRelation::IsIncluded,
        RawRelation::During,
        RawRelation::DuringInv,
        RawRelation::Begins,
        RawRelation::BegunBy,
        RawRelation::Ends,
        RawRelation::EndedBy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RawRelation::Simultaneous => "SIMULTANEOUS",
            RawRelation::Identity => "IDENTITY",
            RawRelation::Before => "BEFORE",
            RawRelation::After => "AFTER",
            RawRelation::IBefore => "IBEFORE",
            RawRelation::IAfter => "IAFTER",
            RawRelation::Includes => "INCLUDES",
            RawRelation::IsIncluded => "IS_INCLUDED",
            RawRelation::During => "DURING",
            RawRelation::DuringInv => "DURING_INV",
            RawRelation::Begins => "BEGINS",
            RawRelation::BegunBy => "BEGUN_BY",
            RawRelation::Ends => "ENDS",
            RawRelation::EndedBy => "ENDED_BY",
        }
    }
}

/// The six normalized relation types, in majority-table row order
/// (the fixed tie-break order for this scheme).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NormRelation {
    IBefore,
    Begins,
    Ends,
    Simultaneous,
    Includes,
    Before,
}

impl NormRelation {
    pub const ALL: [NormRelation; 6] = [
        NormRelation::IBefore,
        NormRelation::Begins,
        NormRelation::Ends,
        NormRelation::Simultaneous,
        NormRelation::Includes,
        NormRelation::Before,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NormRelation::IBefore => "IBEFORE",
            NormRelation::Begins => "BEGINS",
            NormRelation::Ends => "ENDS",
            NormRelation::Simultaneous => "SIMULTANEOUS",
            NormRelation::Includes => "INCLUDES",
            NormRelation::Before => "BEFORE",
        }
    }
}

/// The three-class coarse relation types, in fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoarseRelation {
    Before,
    After,
    Overlap,
}

impl CoarseRelation {
    pub const ALL: [CoarseRelation; 3] =
        [CoarseRelation::Before, CoarseRelation::After, CoarseRelation::Overlap];

    pub fn name(&self) -> &'static str {
        match self {
            CoarseRelation::Before => "BEFORE",
            CoarseRelation::After => "AFTER",
            CoarseRelation::Overlap => "OVERLAP",
        }
    }

    /// The relation read in the opposite direction.
    pub fn inverse(&self) -> CoarseRelation {
        match self {
            CoarseRelation::Before => CoarseRelation::After,
            CoarseRelation::After => CoarseRelation::Before,
            CoarseRelation::Overlap => CoarseRelation::Overlap,
        }
    }
}

/// A relation label together with its scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationLabel {
    Raw(RawRelation),
    Norm(NormRelation),
    Coarse(CoarseRelation),
}

impl RelationLabel {
    pub fn scheme(&self) -> Scheme {
        match self {
            RelationLabel::Raw(_) => Scheme::Raw14,
            RelationLabel::Norm(_) => Scheme::Norm6,
            RelationLabel::Coarse(_) => Scheme::Coarse3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RelationLabel::Raw(r) => r.name(),
            RelationLabel::Norm(r) => r.name(),
            RelationLabel::Coarse(r) => r.name(),
        }
    }

    /// Index of the label in its scheme's fixed order.
    pub fn index(&self) -> usize {
        match self {
            RelationLabel::Raw(r) => RawRelation::ALL.iter().position(|x| x == r).unwrap(),
            RelationLabel::Norm(r) => NormRelation::ALL.iter().position(|x| x == r).unwrap(),
            RelationLabel::Coarse(r) => CoarseRelation::ALL.iter().position(|x| x == r).unwrap(),
        }
    }

    pub fn parse(scheme: Scheme, value: &str) -> Result<RelationLabel, CorpusError> {
        let up = value.to_ascii_uppercase();
        let found = scheme.labels().into_iter().find(|l| l.name() == up);
        found.ok_or_else(|| {
            CorpusError::Validation(format!("label {value:?} is not in scheme {scheme}"))
        })
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for RelationLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("RelationLabel", 2)?;
        s.serialize_field("scheme", &self.scheme())?;
        s.serialize_field("value", self.name())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for RelationLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            scheme: Scheme,
            value: String,
        }
        let repr = Repr::deserialize(deserializer)?;
        RelationLabel::parse(repr.scheme, &repr.value).map_err(serde::de::Error::custom)
    }
}

macro_rules! categorical_attr {
    ($(#[$meta:meta])* $name:ident, none = $has_none:expr, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn name(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = String;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                $(
                    if s.eq_ignore_ascii_case($text) {
                        return Ok($name::$variant);
                    }
                )+
                // Unknown values fall back to the none member where the
                // attribute has one; attributes without a none member reject.
                if $has_none {
                    Ok(<$name>::fallback())
                } else {
                    Err(format!(concat!("invalid ", stringify!($name), " value {:?}"), s))
                }
            }
        }

        impl From<$name> for String {
            fn from(v: $name) -> String {
                v.name().to_string()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

categorical_attr!(Pos, none = false, {
    Verb => "VERB",
    Noun => "NOUN",
    Adj => "ADJ",
    Other => "OTHER",
});

categorical_attr!(Tense, none = true, {
    None => "none",
    Present => "present",
    Past => "past",
    Future => "future",
});

categorical_attr!(Aspect, none = true, {
    None => "none",
    Prog => "prog",
    Perfect => "perfect",
    ProgPerfect => "prog_perfect",
});

categorical_attr!(Modality, none = true, {
    None => "none",
    To => "to",
    Should => "should",
    Would => "would",
    Could => "could",
    Can => "can",
    Might => "might",
});

categorical_attr!(Polarity, none = false, {
    Positive => "positive",
    Negative => "negative",
});

categorical_attr!(EventClass, none = false, {
    Report => "report",
    Aspectual => "aspectual",
    State => "state",
    IState => "i_state",
    IAction => "i_action",
    Perception => "perception",
    Occurrence => "occurrence",
});

impl Tense {
    fn fallback() -> Tense {
        Tense::None
    }
}
impl Aspect {
    fn fallback() -> Aspect {
        Aspect::None
    }
}
impl Modality {
    fn fallback() -> Modality {
        Modality::None
    }
}

/// Pos has no none member; TryFrom never calls this.
impl Pos {
    fn fallback() -> Pos {
        unreachable!()
    }
}
impl Polarity {
    fn fallback() -> Polarity {
        unreachable!()
    }
}
impl EventClass {
    fn fallback() -> EventClass {
        unreachable!()
    }
}

/// An annotated event occurrence within a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventInstance {
    pub event_id: String,
    pub sentence_index: usize,
    /// Half-open token index range within the sentence.
    pub token_span: (usize, usize),
    pub word: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    pub pos: Pos,
    pub tense: Tense,
    pub aspect: Aspect,
    pub modality: Modality,
    pub polarity: Polarity,
    pub event_class: EventClass,
    #[serde(default)]
    pub in_prep_phrase: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub governing_verb: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub governing_verb_pos: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synset_id: Option<String>,
    #[serde(default)]
    pub entity_args: Vec<String>,
}

impl EventInstance {
    /// Minimal event with all attributes at their neutral values.
    pub fn new(event_id: &str, sentence_index: usize, token_span: (usize, usize), word: &str) -> Self {
        EventInstance {
            event_id: event_id.to_string(),
            sentence_index,
            token_span,
            word: word.to_string(),
            lemma: None,
            pos: Pos::Verb,
            tense: Tense::None,
            aspect: Aspect::None,
            modality: Modality::None,
            polarity: Polarity::Positive,
            event_class: EventClass::Occurrence,
            in_prep_phrase: false,
            governing_verb: None,
            governing_verb_pos: None,
            auxiliary: None,
            synset_id: None,
            entity_args: Vec::new(),
        }
    }
}

/// A temporal link between two events of the same document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TLink {
    pub source: String,
    pub target: String,
    #[serde(flatten)]
    pub label: RelationLabel,
}

/// An annotated text unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    pub sentences: Vec<Vec<String>>,
    pub events: Vec<EventInstance>,
    #[serde(default)]
    pub dominance_pairs: Vec<(String, String)>,
    #[serde(default)]
    pub tlinks: Vec<TLink>,
}

impl Document {
    pub fn event(&self, event_id: &str) -> Option<&EventInstance> {
        self.events.iter().find(|e| e.event_id == event_id)
    }

    /// Checks every structural invariant of the document.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = HashSet::new();
        for ev in &self.events {
            if !ids.insert(ev.event_id.as_str()) {
                return Err(CorpusError::Validation(format!(
                    "document {:?}: duplicate event_id {:?}",
                    self.doc_id, ev.event_id
                )));
            }
            let sentence = self.sentences.get(ev.sentence_index).ok_or_else(|| {
                CorpusError::Validation(format!(
                    "document {:?}: event {:?} references sentence {} of {}",
                    self.doc_id,
                    ev.event_id,
                    ev.sentence_index,
                    self.sentences.len()
                ))
            })?;
            let (start, end) = ev.token_span;
            if start >= end || end > sentence.len() {
                return Err(CorpusError::Validation(format!(
                    "document {:?}: event {:?} token_span [{start}, {end}) outside sentence of {} tokens",
                    self.doc_id,
                    ev.event_id,
                    sentence.len()
                )));
            }
        }
        let check_ref = |id: &str, what: &str| -> Result<(), CorpusError> {
            if ids.contains(id) {
                Ok(())
            } else {
                Err(CorpusError::Validation(format!(
                    "document {:?}: {what} references unknown event {id:?}",
                    self.doc_id
                )))
            }
        };
        let mut seen_links = HashSet::new();
        for link in &self.tlinks {
            check_ref(&link.source, "tlink")?;
            check_ref(&link.target, "tlink")?;
            if !seen_links.insert((link.source.as_str(), link.target.as_str())) {
                return Err(CorpusError::Validation(format!(
                    "document {:?}: duplicate tlink ({:?}, {:?})",
                    self.doc_id, link.source, link.target
                )));
            }
        }
        for (a, b) in &self.dominance_pairs {
            check_ref(a, "dominance pair")?;
            check_ref(b, "dominance pair")?;
        }
        Ok(())
    }
}

/// An ordered collection of documents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Corpus { documents }
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = HashSet::new();
        for doc in &self.documents {
            if !ids.insert(doc.doc_id.as_str()) {
                return Err(CorpusError::Validation(format!(
                    "duplicate doc_id {:?}",
                    doc.doc_id
                )));
            }
            doc.validate()?;
        }
        Ok(())
    }

    pub fn total_tlinks(&self) -> usize {
        self.documents.iter().map(|d| d.tlinks.len()).sum()
    }
}

/// Identifies one linked event pair across the corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub doc_id: String,
    pub source: String,
    pub target: String,
}

impl PairKey {
    pub fn new(doc_id: &str, source: &str, target: &str) -> Self {
        PairKey {
            doc_id: doc_id.to_string(),
            source: source.to_string(),
            target: target.to_string(),
        }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}->{}", self.doc_id, self.source, self.target)
    }
}

/// All linked pairs of the corpus in document order.
pub fn linked_pairs(corpus: &Corpus) -> Vec<PairKey> {
    let mut out = Vec::new();
    for doc in &corpus.documents {
        for link in &doc.tlinks {
            out.push(PairKey::new(&doc.doc_id, &link.source, &link.target));
        }
    }
    out
}

/// Gold labels of all linked pairs, keyed by pair.
pub fn gold_labels(corpus: &Corpus) -> BTreeMap<PairKey, RelationLabel> {
    let mut out = BTreeMap::new();
    for doc in &corpus.documents {
        for link in &doc.tlinks {
            out.insert(PairKey::new(&doc.doc_id, &link.source, &link.target), link.label);
        }
    }
    out
}

/// Converts a raw relation to its normalized form. The boolean is true
/// when the conversion swaps the endpoints of the link.
pub fn normalize_relation(raw: RawRelation) -> (NormRelation, bool) {
    match raw {
        RawRelation::Simultaneous => (NormRelation::Simultaneous, false),
        RawRelation::Identity => (NormRelation::Simultaneous, false),
        RawRelation::Before => (NormRelation::Before, false),
        RawRelation::After => (NormRelation::Before, true),
        RawRelation::IBefore => (NormRelation::IBefore, false),
        RawRelation::IAfter => (NormRelation::IBefore, true),
        RawRelation::Includes => (NormRelation::Includes, false),
        RawRelation::IsIncluded => (NormRelation::Includes, true),
        RawRelation::During => (NormRelation::Includes, true),
        RawRelation::DuringInv => (NormRelation::Includes, false),
        RawRelation::Begins => (NormRelation::Begins, false),
        RawRelation::BegunBy => (NormRelation::Begins, true),
        RawRelation::Ends => (NormRelation::Ends, false),
        RawRelation::EndedBy => (NormRelation::Ends, true),
    }
}

/// Collapses a raw relation into the three-class scheme.
pub fn coarsen_relation(raw: RawRelation) -> CoarseRelation {
    match raw {
        RawRelation::Before | RawRelation::IBefore => CoarseRelation::Before,
        RawRelation::After | RawRelation::IAfter => CoarseRelation::After,
        _ => CoarseRelation::Overlap,
    }
}

/// Collapses a normalized relation into the three-class scheme.
pub fn coarsen_norm(norm: NormRelation) -> CoarseRelation {
    match norm {
        NormRelation::Before | NormRelation::IBefore => CoarseRelation::Before,
        _ => CoarseRelation::Overlap,
    }
}

/// Expresses a label in the requested scheme without touching link
/// direction (used for counting). Errors when not expressible.
pub fn label_in_scheme(label: RelationLabel, scheme: Scheme) -> Result<RelationLabel, CorpusError> {
    match (label, scheme) {
        (l, s) if l.scheme() == s => Ok(l),
        (RelationLabel::Raw(r), Scheme::Norm6) => Ok(RelationLabel::Norm(normalize_relation(r).0)),
        (RelationLabel::Raw(r), Scheme::Coarse3) => Ok(RelationLabel::Coarse(coarsen_relation(r))),
        (RelationLabel::Norm(n), Scheme::Coarse3) => Ok(RelationLabel::Coarse(coarsen_norm(n))),
        (l, s) => Err(CorpusError::UnsupportedScheme(format!(
            "label {} ({}) is not expressible in scheme {s}",
            l.name(),
            l.scheme()
        ))),
    }
}

/// Rewrites every tlink of a document into the normalized scheme,
/// swapping endpoints where the conversion requires it.
pub fn normalize_document(doc: &Document) -> Result<Document, CorpusError> {
    let mut out = doc.clone();
    let mut links = Vec::with_capacity(doc.tlinks.len());
    for link in &doc.tlinks {
        let (source, target, norm) = match link.label {
            RelationLabel::Raw(r) => {
                let (norm, swapped) = normalize_relation(r);
                if swapped {
                    (link.target.clone(), link.source.clone(), norm)
                } else {
                    (link.source.clone(), link.target.clone(), norm)
                }
            }
            RelationLabel::Norm(n) => (link.source.clone(), link.target.clone(), n),
            RelationLabel::Coarse(_) => {
                return Err(CorpusError::UnsupportedScheme(
                    "coarse3 links cannot be normalized to norm6".to_string(),
                ))
            }
        };
        links.push(TLink { source, target, label: RelationLabel::Norm(norm) });
    }
    out.tlinks = dedup_links(links);
    Ok(out)
}

/// Rewrites every tlink of a document into the three-class scheme.
/// Link direction is preserved; AFTER-family labels stay AFTER.
pub fn coarsen_document(doc: &Document) -> Result<Document, CorpusError> {
    let mut out = doc.clone();
    let mut links = Vec::with_capacity(doc.tlinks.len());
    for link in &doc.tlinks {
        let coarse = match link.label {
            RelationLabel::Raw(r) => coarsen_relation(r),
            RelationLabel::Norm(n) => coarsen_norm(n),
            RelationLabel::Coarse(c) => c,
        };
        links.push(TLink {
            source: link.source.clone(),
            target: link.target.clone(),
            label: RelationLabel::Coarse(coarse),
        });
    }
    out.tlinks = dedup_links(links);
    Ok(out)
}

/// Endpoint swaps during normalization can collide with an existing
/// link on the same ordered pair; later duplicates are dropped.
fn dedup_links(links: Vec<TLink>) -> Vec<TLink> {
    let mut seen = HashSet::new();
    links
        .into_iter()
        .filter(|l| seen.insert((l.source.clone(), l.target.clone())))
        .collect()
}

pub fn convert_corpus(corpus: &Corpus, scheme: Scheme) -> Result<Corpus, CorpusError> {
    let documents = corpus
        .documents
        .iter()
        .map(|d| match scheme {
            Scheme::Norm6 => normalize_document(d),
            Scheme::Coarse3 => coarsen_document(d),
            Scheme::Raw14 => Ok(d.clone()),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus::new(documents))
}

/// Per-label tlink counts over a corpus, with the majority label.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub scheme: Scheme,
    pub counts: BTreeMap<RelationLabel, usize>,
    pub total: usize,
    /// Majority label and its fraction of the total; None when empty.
    pub majority: Option<(RelationLabel, f64)>,
}

/// Counts tlinks per label under the given scheme.
pub fn corpus_stats(corpus: &Corpus, scheme: Scheme) -> Result<CorpusStats, CorpusError> {
    let mut counts: BTreeMap<RelationLabel, usize> = BTreeMap::new();
    let mut total = 0usize;
    for doc in &corpus.documents {
        for link in &doc.tlinks {
            let label = label_in_scheme(link.label, scheme)?;
            *counts.entry(label).or_insert(0) += 1;
            total += 1;
        }
    }
    Ok(CorpusStats { scheme, majority: majority_of(&counts, total, scheme), counts, total })
}

/// Majority from a prebuilt count table (ties break by scheme order).
pub fn stats_from_counts(
    counts: BTreeMap<RelationLabel, usize>,
    scheme: Scheme,
) -> CorpusStats {
    let total = counts.values().sum();
    CorpusStats { scheme, majority: majority_of(&counts, total, scheme), counts, total }
}

fn majority_of(
    counts: &BTreeMap<RelationLabel, usize>,
    total: usize,
    scheme: Scheme,
) -> Option<(RelationLabel, f64)> {
    if total == 0 {
        return None;
    }
    let mut best: Option<(RelationLabel, usize)> = None;
    for label in scheme.labels() {
        let c = counts.get(&label).copied().unwrap_or(0);
        match best {
            Some((_, b)) if b >= c => {}
            _ => best = Some((label, c)),
        }
    }
    best.map(|(l, c)| (l, c as f64 / total as f64))
}

/// Event pair ids of a document keyed by tlinks, preserving order.
pub fn doc_linked_pairs(doc: &Document) -> Vec<(String, String)> {
    doc.tlinks.iter().map(|l| (l.source.clone(), l.target.clone())).collect()
}

/// Lookup table from event id to its index in `doc.events`.
pub fn event_index(doc: &Document) -> HashMap<&str, usize> {
    doc.events.iter().enumerate().map(|(i, e)| (e.event_id.as_str(), i)).collect()
}

/// Distinct topics of a corpus in sorted order.
pub fn topics(corpus: &Corpus) -> Vec<String> {
    let set: BTreeSet<String> =
        corpus.documents.iter().filter_map(|d| d.topic.clone()).collect();
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_event_doc() -> Document {
        Document {
            doc_id: "d1".to_string(),
            topic: None,
            sentences: vec![vec!["he".into(), "ran".into(), "then".into(), "fell".into()]],
            events: vec![
                EventInstance::new("e1", 0, (1, 2), "ran"),
                EventInstance::new("e2", 0, (3, 4), "fell"),
            ],
            dominance_pairs: vec![],
            tlinks: vec![TLink {
                source: "e1".into(),
                target: "e2".into(),
                label: RelationLabel::Coarse(CoarseRelation::Before),
            }],
        }
    }

    #[test]
    fn normalization_matches_conversion_table() {
        use NormRelation as N;
        use RawRelation as R;
        let expect = [
            (R::After, N::Before, true),
            (R::IAfter, N::IBefore, true),
            (R::EndedBy, N::Ends, true),
            (R::BegunBy, N::Begins, true),
            (R::IsIncluded, N::Includes, true),
            (R::During, N::Includes, true),
            (R::Identity, N::Simultaneous, false),
            (R::DuringInv, N::Includes, false),
            (R::Simultaneous, N::Simultaneous, false),
            (R::Before, N::Before, false),
            (R::IBefore, N::IBefore, false),
            (R::Includes, N::Includes, false),
            (R::Begins, N::Begins, false),
            (R::Ends, N::Ends, false),
        ];
        for (raw, norm, swapped) in expect {
            assert_eq!(normalize_relation(raw), (norm, swapped), "{raw:?}");
        }
    }

    #[test]
    fn coarsening_merges_as_specified() {
        assert_eq!(coarsen_relation(RawRelation::IBefore), CoarseRelation::Before);
        assert_eq!(coarsen_relation(RawRelation::IAfter), CoarseRelation::After);
        assert_eq!(coarsen_relation(RawRelation::Begins), CoarseRelation::Overlap);
        let overlaps = RawRelation::ALL
            .iter()
            .filter(|r| coarsen_relation(**r) == CoarseRelation::Overlap)
            .count();
        assert_eq!(overlaps, 10);
    }

    #[test]
    fn coarsening_commutes_with_normalization_under_swap() {
        for raw in RawRelation::ALL {
            let direct = coarsen_relation(raw);
            let (norm, swapped) = normalize_relation(raw);
            let mut via_norm = coarsen_norm(norm);
            if swapped {
                via_norm = via_norm.inverse();
            }
            assert_eq!(direct, via_norm, "{raw:?}");
        }
    }

    #[test]
    fn stats_majority_matches_reported_distributions() {
        use NormRelation as N;
        let counts: BTreeMap<RelationLabel, usize> = [
            (N::Before, 1335),
            (N::Simultaneous, 1304),
            (N::Includes, 588),
            (N::Ends, 114),
            (N::Begins, 77),
            (N::IBefore, 63),
        ]
        .into_iter()
        .map(|(l, c)| (RelationLabel::Norm(l), c))
        .collect();
        let stats = stats_from_counts(counts, Scheme::Norm6);
        assert_eq!(stats.total, 3481);
        let (label, frac) = stats.majority.unwrap();
        assert_eq!(label, RelationLabel::Norm(N::Before));
        assert!((frac - 0.3835).abs() < 1e-4);

        use CoarseRelation as C;
        let counts: BTreeMap<RelationLabel, usize> =
            [(C::Overlap, 2083), (C::Before, 706), (C::After, 692)]
                .into_iter()
                .map(|(l, c)| (RelationLabel::Coarse(l), c))
                .collect();
        let stats = stats_from_counts(counts, Scheme::Coarse3);
        assert_eq!(stats.total, 3481);
        let (label, frac) = stats.majority.unwrap();
        assert_eq!(label, RelationLabel::Coarse(C::Overlap));
        assert!((frac - 0.5983).abs() < 1e-4);
    }

    #[test]
    fn stats_single_link_and_empty() {
        let corpus = Corpus::new(vec![two_event_doc()]);
        let stats = corpus_stats(&corpus, Scheme::Coarse3).unwrap();
        assert_eq!(stats.total, 1);
        assert_eq!(stats.majority.unwrap().1, 1.0);

        let empty = corpus_stats(&Corpus::default(), Scheme::Coarse3).unwrap();
        assert_eq!(empty.total, 0);
        assert!(empty.majority.is_none());
    }

    #[test]
    fn stats_are_document_order_invariant() {
        let mut d2 = two_event_doc();
        d2.doc_id = "d2".into();
        d2.tlinks[0].label = RelationLabel::Coarse(CoarseRelation::Overlap);
        let a = Corpus::new(vec![two_event_doc(), d2.clone()]);
        let b = Corpus::new(vec![d2, two_event_doc()]);
        assert_eq!(
            corpus_stats(&a, Scheme::Coarse3).unwrap().counts,
            corpus_stats(&b, Scheme::Coarse3).unwrap().counts
        );
    }

    #[test]
    fn validation_rejects_dangling_and_duplicate_references() {
        let mut doc = two_event_doc();
        doc.tlinks.push(TLink {
            source: "e1".into(),
            target: "e9".into(),
            label: RelationLabel::Coarse(CoarseRelation::Before),
        });
        let err = doc.validate().unwrap_err();
        assert!(err.to_string().contains("e9"), "{err}");

        let mut doc = two_event_doc();
        doc.tlinks.push(doc.tlinks[0].clone());
        assert!(doc.validate().is_err());

        let mut doc = two_event_doc();
        doc.events[1].token_span = (3, 9);
        assert!(doc.validate().is_err());
    }

    #[test]
    fn unknown_attribute_values_fall_back_to_none_or_reject() {
        assert_eq!(Tense::try_from("mystery".to_string()).unwrap(), Tense::None);
        assert_eq!(Modality::try_from("must".to_string()).unwrap(), Modality::None);
        assert!(Polarity::try_from("mystery".to_string()).is_err());
        assert!(EventClass::try_from("mystery".to_string()).is_err());
        assert!(Pos::try_from("mystery".to_string()).is_err());
    }

    #[test]
    fn normalize_document_swaps_endpoints() {
        let mut doc = two_event_doc();
        doc.tlinks = vec![TLink {
            source: "e1".into(),
            target: "e2".into(),
            label: RelationLabel::Raw(RawRelation::After),
        }];
        let norm = normalize_document(&doc).unwrap();
        assert_eq!(norm.tlinks[0].source, "e2");
        assert_eq!(norm.tlinks[0].target, "e1");
        assert_eq!(norm.tlinks[0].label, RelationLabel::Norm(NormRelation::Before));
    }
}
