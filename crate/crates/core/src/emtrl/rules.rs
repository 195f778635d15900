//! Rule bases for rule-based initialization: attribute condition
//! blocks, lexical happens-before precedence rules, and signal-word
//! rules in the attribute block format.

use crate::corpus::{Document, EventInstance, RelationLabel, Scheme};
use std::io::BufRead;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule {rule}: {msg}")]
    Parse { rule: usize, msg: String },
    #[error("lexical rule line {line}: {msg}")]
    LexParse { line: usize, msg: String },
    #[error("rule {rule}: label {label:?} is not in scheme {scheme}")]
    LabelNotInScheme { rule: usize, label: String, scheme: Scheme },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Condition keys an attribute rule may reference.
const CONDITION_KEYS: [&str; 20] = [
    "event1.class",
    "event2.class",
    "event1.tense",
    "event2.tense",
    "event1.aspect",
    "event2.aspect",
    "event1.modality",
    "event2.modality",
    "event1.polarity",
    "event2.polarity",
    "event1.pos",
    "event2.pos",
    "event1.word",
    "event2.word",
    "event1.lemma",
    "event2.lemma",
    "isTheSameSentence",
    "conjBetweenEvents",
    "signal",
    "signalBetweenTwoEvents",
];

const CONJUNCTIONS: [&str; 6] = ["and", "or", "but", "nor", "yet", "so"];

/// One key = value1|value2 condition; values match case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub key: String,
    pub allowed: Vec<String>,
}

/// A GTag-style condition block concluding in a relation label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrRule {
    pub index: usize,
    pub conditions: Vec<Condition>,
    pub label: String,
}

/// A happens-before precedence entry between two lemmas.
#[derive(Debug, Clone, PartialEq)]
pub struct LexRule {
    pub lemma1: String,
    pub lemma2: String,
    pub strength: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RuleBase {
    pub attribute_rules: Vec<AttrRule>,
    pub lexical_rules: Vec<LexRule>,
    pub signal_rules: Vec<AttrRule>,
}

/// Parses a file of condition blocks:
///
/// ```text
/// if event1.class = OCCURRENCE|PERCEPTION &&
///    event2.tense = PAST
/// then relation = AFTER
/// ```
pub fn parse_attr_rules<R: BufRead>(reader: R) -> Result<Vec<AttrRule>, RuleError> {
    let mut rules = Vec::new();
    let mut current: Option<Vec<Condition>> = None;
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rule_idx = rules.len();
        let lower = line.to_ascii_lowercase();
        if lower == "if" || lower.starts_with("if ") {
            if current.is_some() {
                return Err(RuleError::Parse {
                    rule: rule_idx,
                    msg: "nested if without then".to_string(),
                });
            }
            current = Some(Vec::new());
            let rest = line[2..].trim();
            if !rest.is_empty() {
                current.as_mut().unwrap().push(parse_condition(rest, rule_idx)?);
            }
        } else if lower.starts_with("then") {
            let conditions = current.take().ok_or_else(|| RuleError::Parse {
                rule: rule_idx,
                msg: "then without if".to_string(),
            })?;
            let label = parse_then(line, rule_idx)?;
            rules.push(AttrRule { index: rule_idx, conditions, label });
        } else {
            let conditions = current.as_mut().ok_or_else(|| RuleError::Parse {
                rule: rule_idx,
                msg: format!("condition outside a rule block: {line:?}"),
            })?;
            conditions.push(parse_condition(line, rule_idx)?);
        }
    }
    if current.is_some() {
        return Err(RuleError::Parse { rule: rules.len(), msg: "if without then".to_string() });
    }
    Ok(rules)
}

fn parse_condition(line: &str, rule: usize) -> Result<Condition, RuleError> {
    let body = line.trim().trim_end_matches("&&").trim();
    let eq = body
        .find('=')
        .ok_or_else(|| RuleError::Parse { rule, msg: format!("condition without '=': {body:?}") })?;
    let key_raw = body[..eq].trim();
    let key = CONDITION_KEYS
        .iter()
        .find(|k| k.eq_ignore_ascii_case(key_raw))
        .ok_or_else(|| RuleError::Parse { rule, msg: format!("unknown condition key {key_raw:?}") })?;
    let allowed: Vec<String> = body[eq + 1..]
        .trim()
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split('|')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if allowed.is_empty() {
        return Err(RuleError::Parse { rule, msg: format!("condition without values: {body:?}") });
    }
    Ok(Condition { key: key.to_string(), allowed })
}

fn parse_then(line: &str, rule: usize) -> Result<String, RuleError> {
    // accepts `then relation = X` and `then relation(event1, event2) = X`
    let rest = line[4..].trim();
    let eq = rest
        .rfind('=')
        .ok_or_else(|| RuleError::Parse { rule, msg: "then without '='".to_string() })?;
    let head = rest[..eq].trim();
    if !head.to_ascii_lowercase().starts_with("relation") {
        return Err(RuleError::Parse {
            rule,
            msg: format!("expected `relation = LABEL`, got {rest:?}"),
        });
    }
    let label = rest[eq + 1..].trim();
    if label.is_empty() {
        return Err(RuleError::Parse { rule, msg: "empty rule label".to_string() });
    }
    Ok(label.to_string())
}

/// Parses lemma1<TAB>lemma2<TAB>strength precedence rules.
pub fn parse_lexical_rules<R: BufRead>(reader: R) -> Result<Vec<LexRule>, RuleError> {
    let mut rules = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (l1, l2, s) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(s)) => (a.trim(), b.trim(), s.trim()),
            _ => {
                return Err(RuleError::LexParse {
                    line: i + 1,
                    msg: "expected lemma1<TAB>lemma2<TAB>strength".to_string(),
                })
            }
        };
        let strength: f64 = s.parse().map_err(|e| RuleError::LexParse {
            line: i + 1,
            msg: format!("bad strength: {e}"),
        })?;
        if !strength.is_finite() {
            return Err(RuleError::LexParse { line: i + 1, msg: "non-finite strength".to_string() });
        }
        rules.push(LexRule { lemma1: l1.to_string(), lemma2: l2.to_string(), strength });
    }
    Ok(rules)
}

impl RuleBase {
    /// Checks that every rule label resolves in the scheme.
    pub fn validate(&self, scheme: Scheme) -> Result<(), RuleError> {
        for rule in self.attribute_rules.iter().chain(&self.signal_rules) {
            if RelationLabel::parse(scheme, &rule.label).is_err() {
                return Err(RuleError::LabelNotInScheme {
                    rule: rule.index,
                    label: rule.label.clone(),
                    scheme,
                });
            }
        }
        Ok(())
    }
}

fn attr_value(event: &EventInstance, attr: &str) -> String {
    match attr {
        "class" => event.event_class.name().to_string(),
        "tense" => event.tense.name().to_string(),
        "aspect" => event.aspect.name().to_string(),
        "modality" => event.modality.name().to_string(),
        "polarity" => event.polarity.name().to_string(),
        "pos" => event.pos.name().to_string(),
        "word" => event.word.clone(),
        "lemma" => event.lemma.clone().unwrap_or_else(|| event.word.clone()),
        _ => unreachable!("keys validated at parse"),
    }
}

fn truthy(values: &[String]) -> bool {
    values
        .iter()
        .any(|v| matches!(v.to_ascii_lowercase().as_str(), "true" | "yes" | "1"))
}

/// Tokens strictly between the two events in text order.
fn tokens_between<'d>(doc: &'d Document, a: &EventInstance, b: &EventInstance) -> Vec<&'d str> {
    let (first, second) = if (a.sentence_index, a.token_span.0) <= (b.sentence_index, b.token_span.0)
    {
        (a, b)
    } else {
        (b, a)
    };
    let mut out = Vec::new();
    for s in first.sentence_index..=second.sentence_index.min(doc.sentences.len() - 1) {
        let sentence = &doc.sentences[s];
        let lo = if s == first.sentence_index { first.token_span.1 } else { 0 };
        let hi = if s == second.sentence_index { second.token_span.0 } else { sentence.len() };
        for token in sentence.iter().take(hi).skip(lo) {
            out.push(token.as_str());
        }
    }
    out
}

/// Whether the rule's conditions all hold for the pair (e1, e2).
pub fn rule_matches(rule: &AttrRule, doc: &Document, e1: &str, e2: &str) -> bool {
    let (Some(a), Some(b)) = (doc.event(e1), doc.event(e2)) else {
        return false;
    };
    let signal_token = rule
        .conditions
        .iter()
        .find(|c| c.key == "signal")
        .and_then(|c| c.allowed.first())
        .map(|s| s.to_ascii_lowercase());
    for cond in &rule.conditions {
        let holds = match cond.key.as_str() {
            "isTheSameSentence" => (a.sentence_index == b.sentence_index) == truthy(&cond.allowed),
            "conjBetweenEvents" => {
                let present = a.sentence_index == b.sentence_index
                    && tokens_between(doc, a, b)
                        .iter()
                        .any(|t| CONJUNCTIONS.iter().any(|c| t.eq_ignore_ascii_case(c)));
                present == truthy(&cond.allowed)
            }
            "signal" => {
                let lo = a.sentence_index.min(b.sentence_index);
                let hi = a.sentence_index.max(b.sentence_index);
                doc.sentences[lo..=hi.min(doc.sentences.len() - 1)]
                    .iter()
                    .flatten()
                    .any(|t| cond.allowed.iter().any(|v| t.eq_ignore_ascii_case(v)))
            }
            "signalBetweenTwoEvents" => match &signal_token {
                Some(signal) => {
                    let between = tokens_between(doc, a, b)
                        .iter()
                        .any(|t| t.eq_ignore_ascii_case(signal));
                    between == truthy(&cond.allowed)
                }
                None => false,
            },
            key => {
                let (event, attr) = if let Some(attr) = key.strip_prefix("event1.") {
                    (a, attr)
                } else if let Some(attr) = key.strip_prefix("event2.") {
                    (b, attr)
                } else {
                    return false;
                };
                let actual = attr_value(event, attr);
                cond.allowed.iter().any(|v| v.eq_ignore_ascii_case(&actual))
            }
        };
        if !holds {
            return false;
        }
    }
    true
}

/// Best lexical-precedence label for a pair: the highest-strength rule
/// whose lemma pair matches in either direction.
pub fn lexical_label(
    rules: &[LexRule],
    doc: &Document,
    e1: &str,
    e2: &str,
) -> Option<(&'static str, f64)> {
    let (a, b) = (doc.event(e1)?, doc.event(e2)?);
    let la = a.lemma.clone().unwrap_or_else(|| a.word.clone()).to_ascii_lowercase();
    let lb = b.lemma.clone().unwrap_or_else(|| b.word.clone()).to_ascii_lowercase();
    if la == lb {
        return None;
    }
    let mut best: Option<(&'static str, f64)> = None;
    for rule in rules {
        let l1 = rule.lemma1.to_ascii_lowercase();
        let l2 = rule.lemma2.to_ascii_lowercase();
        let label = if la == l1 && lb == l2 {
            "BEFORE"
        } else if la == l2 && lb == l1 {
            "AFTER"
        } else {
            continue;
        };
        let better = match best {
            Some((_, s)) => rule.strength > s,
            None => true,
        };
        if better {
            best = Some((label, rule.strength));
        }
    }
    best
}
