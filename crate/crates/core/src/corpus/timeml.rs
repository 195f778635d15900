//! Importer for a TimeML tag subset: EVENT, MAKEINSTANCE, and TLINK
//! between event instances. Links involving time expressions are
//! skipped and counted; all other tags contribute text only.

use super::{
    Aspect, CorpusError, Document, EventClass, EventInstance, Modality, Polarity, Pos,
    RawRelation, RelationLabel, Tense, TLink,
};
use std::collections::HashMap;

/// Result of importing one TimeML document.
#[derive(Debug, Clone)]
pub struct TimemlImport {
    pub document: Document,
    /// TLINKs referencing a time expression on either side.
    pub skipped_time_links: usize,
    /// Exact duplicates of an already imported ordered event pair.
    pub skipped_duplicate_links: usize,
}

#[derive(Debug)]
struct RawTag {
    name: String,
    attrs: HashMap<String, String>,
    closing: bool,
    self_closing: bool,
}

#[derive(Debug)]
enum Piece {
    Text(String),
    Tag(RawTag),
}

fn parse_err(msg: impl Into<String>) -> CorpusError {
    CorpusError::Parse { line: 0, msg: msg.into() }
}

fn decode_entities(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

fn scan_pieces(text: &str) -> Result<Vec<Piece>, CorpusError> {
    let mut pieces = Vec::new();
    let bytes = text.as_bytes();
    let mut pos = 0usize;
    while pos < bytes.len() {
        if bytes[pos] == b'<' {
            let end = text[pos..]
                .find('>')
                .map(|i| pos + i)
                .ok_or_else(|| parse_err("unterminated tag"))?;
            let inner = text[pos + 1..end].trim();
            if inner.is_empty() {
                return Err(parse_err("empty tag"));
            }
            pieces.push(Piece::Tag(parse_tag(inner)?));
            pos = end + 1;
        } else {
            let next = text[pos..].find('<').map(|i| pos + i).unwrap_or(bytes.len());
            pieces.push(Piece::Text(decode_entities(&text[pos..next])));
            pos = next;
        }
    }
    Ok(pieces)
}

fn parse_tag(inner: &str) -> Result<RawTag, CorpusError> {
    let closing = inner.starts_with('/');
    let body = if closing { inner[1..].trim() } else { inner };
    let self_closing = body.ends_with('/');
    let body = if self_closing { body[..body.len() - 1].trim() } else { body };
    let mut chars = body.char_indices().peekable();
    let mut name_end = body.len();
    for (i, c) in chars.by_ref() {
        if c.is_whitespace() {
            name_end = i;
            break;
        }
    }
    let name = body[..name_end].to_string();
    if name.is_empty() {
        return Err(parse_err("tag without a name"));
    }
    let mut attrs = HashMap::new();
    let mut rest = body[name_end..].trim();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| parse_err(format!("malformed attribute in <{name}>")))?;
        let key = rest[..eq].trim().to_string();
        let after = rest[eq + 1..].trim_start();
        let quote = after
            .chars()
            .next()
            .filter(|c| *c == '"' || *c == '\'')
            .ok_or_else(|| parse_err(format!("unquoted attribute value in <{name}>")))?;
        let val_end = after[1..]
            .find(quote)
            .map(|i| i + 1)
            .ok_or_else(|| parse_err(format!("unterminated attribute value in <{name}>")))?;
        attrs.insert(key, decode_entities(&after[1..val_end]));
        rest = after[val_end + 1..].trim_start();
    }
    Ok(RawTag { name, attrs, closing, self_closing })
}

fn is_sentence_end(token: &str) -> bool {
    token.ends_with('.') || token.ends_with('!') || token.ends_with('?')
}

#[derive(Debug)]
struct EventSpan {
    eid: String,
    class: EventClass,
    word: String,
    sentence_index: usize,
    token_span: (usize, usize),
}

#[derive(Debug)]
struct Instance {
    eiid: String,
    event_id: String,
    tense: Tense,
    aspect: Aspect,
    polarity: Polarity,
    modality: Modality,
    pos: Pos,
}

fn map_timeml_pos(value: &str) -> Result<Pos, CorpusError> {
    match value.to_ascii_uppercase().as_str() {
        "VERB" => Ok(Pos::Verb),
        "NOUN" => Ok(Pos::Noun),
        "ADJECTIVE" | "ADJ" => Ok(Pos::Adj),
        "PREPOSITION" | "OTHER" => Ok(Pos::Other),
        other => Err(CorpusError::Validation(format!("unknown MAKEINSTANCE pos {other:?}"))),
    }
}

fn map_timeml_aspect(value: &str) -> Aspect {
    match value.to_ascii_uppercase().as_str() {
        "PROGRESSIVE" => Aspect::Prog,
        "PERFECTIVE" => Aspect::Perfect,
        "PERFECTIVE_PROGRESSIVE" => Aspect::ProgPerfect,
        other => Aspect::try_from(other.to_string()).unwrap_or(Aspect::None),
    }
}

fn map_timeml_polarity(value: &str) -> Result<Polarity, CorpusError> {
    match value.to_ascii_uppercase().as_str() {
        "POS" | "POSITIVE" => Ok(Polarity::Positive),
        "NEG" | "NEGATIVE" => Ok(Polarity::Negative),
        other => Err(CorpusError::Validation(format!("unknown MAKEINSTANCE polarity {other:?}"))),
    }
}

fn map_rel_type(value: &str) -> Result<RawRelation, CorpusError> {
    let up = value.to_ascii_uppercase();
    RawRelation::ALL
        .iter()
        .find(|r| r.name() == up)
        .copied()
        .ok_or_else(|| CorpusError::Validation(format!("unknown TLINK relType {value:?}")))
}

/// Imports one TimeML-annotated document. Only EVENT, MAKEINSTANCE,
/// and event-event TLINK tags are interpreted.
pub fn import_timeml_subset(text: &str, doc_id: &str) -> Result<TimemlImport, CorpusError> {
    let pieces = scan_pieces(text)?;

    let mut sentences: Vec<Vec<String>> = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut event_spans: Vec<EventSpan> = Vec::new();
    let mut instances: Vec<Instance> = Vec::new();
    let mut tlink_tags: Vec<HashMap<String, String>> = Vec::new();
    let mut open_event: Option<(String, EventClass, String)> = None;

    for piece in pieces {
        match piece {
            Piece::Text(text) => {
                if let Some((_, _, buf)) = open_event.as_mut() {
                    buf.push_str(&text);
                } else {
                    for token in text.split_whitespace() {
                        current.push(token.to_string());
                        if is_sentence_end(token) {
                            sentences.push(std::mem::take(&mut current));
                        }
                    }
                }
            }
            Piece::Tag(tag) => match tag.name.as_str() {
                "EVENT" => {
                    if tag.closing {
                        let (eid, class, buf) = open_event
                            .take()
                            .ok_or_else(|| parse_err("</EVENT> without matching <EVENT>"))?;
                        let tokens: Vec<String> =
                            buf.split_whitespace().map(|t| t.to_string()).collect();
                        if tokens.is_empty() {
                            return Err(parse_err(format!("EVENT {eid} wraps no text")));
                        }
                        let start = current.len();
                        let word = tokens.join(" ");
                        current.extend(tokens);
                        event_spans.push(EventSpan {
                            eid,
                            class,
                            word,
                            sentence_index: sentences.len(),
                            token_span: (start, current.len()),
                        });
                    } else {
                        if open_event.is_some() {
                            return Err(parse_err("nested <EVENT> tags"));
                        }
                        if tag.self_closing {
                            return Err(parse_err("<EVENT/> wraps no text"));
                        }
                        let eid = tag
                            .attrs
                            .get("eid")
                            .cloned()
                            .ok_or_else(|| parse_err("<EVENT> without eid"))?;
                        let class_attr = tag
                            .attrs
                            .get("class")
                            .cloned()
                            .ok_or_else(|| parse_err(format!("<EVENT {eid}> without class")))?;
                        let class = EventClass::try_from(class_attr)
                            .map_err(CorpusError::Validation)?;
                        open_event = Some((eid, class, String::new()));
                    }
                }
                "MAKEINSTANCE" => {
                    if tag.closing {
                        continue;
                    }
                    let get = |key: &str| tag.attrs.get(key).cloned();
                    let eiid =
                        get("eiid").ok_or_else(|| parse_err("MAKEINSTANCE without eiid"))?;
                    let event_id = get("eventID")
                        .ok_or_else(|| parse_err("MAKEINSTANCE without eventID"))?;
                    instances.push(Instance {
                        eiid,
                        event_id,
                        tense: get("tense")
                            .map(Tense::try_from)
                            .transpose()
                            .map_err(CorpusError::Validation)?
                            .unwrap_or(Tense::None),
                        aspect: get("aspect").map(|v| map_timeml_aspect(&v)).unwrap_or(Aspect::None),
                        polarity: get("polarity")
                            .map(|v| map_timeml_polarity(&v))
                            .transpose()?
                            .unwrap_or(Polarity::Positive),
                        modality: get("modality")
                            .map(Modality::try_from)
                            .transpose()
                            .map_err(CorpusError::Validation)?
                            .unwrap_or(Modality::None),
                        pos: get("pos").map(|v| map_timeml_pos(&v)).transpose()?.unwrap_or(Pos::Other),
                    });
                }
                "TLINK" => {
                    if !tag.closing {
                        tlink_tags.push(tag.attrs);
                    }
                }
                _ => {} // other markup contributes only its text
            },
        }
    }
    if let Some((eid, _, _)) = open_event {
        return Err(parse_err(format!("<EVENT {eid}> never closed")));
    }
    if !current.is_empty() {
        sentences.push(current);
    }

    let span_by_eid: HashMap<&str, &EventSpan> =
        event_spans.iter().map(|s| (s.eid.as_str(), s)).collect();
    let mut events = Vec::new();
    for inst in &instances {
        let span = span_by_eid.get(inst.event_id.as_str()).ok_or_else(|| {
            CorpusError::Validation(format!(
                "MAKEINSTANCE {} references unknown EVENT {:?}",
                inst.eiid, inst.event_id
            ))
        })?;
        let mut ev = EventInstance::new(&inst.eiid, span.sentence_index, span.token_span, &span.word);
        ev.pos = inst.pos;
        ev.tense = inst.tense;
        ev.aspect = inst.aspect;
        ev.modality = inst.modality;
        ev.polarity = inst.polarity;
        ev.event_class = span.class;
        events.push(ev);
    }

    let mut tlinks: Vec<TLink> = Vec::new();
    let mut skipped_time_links = 0usize;
    let mut skipped_duplicate_links = 0usize;
    for attrs in &tlink_tags {
        let involves_time = attrs.contains_key("timeID")
            || attrs.contains_key("relatedToTime")
            || !(attrs.contains_key("eventInstanceID")
                && attrs.contains_key("relatedToEventInstance"));
        if involves_time {
            skipped_time_links += 1;
            continue;
        }
        let source = attrs["eventInstanceID"].clone();
        let target = attrs["relatedToEventInstance"].clone();
        let rel_type = attrs
            .get("relType")
            .ok_or_else(|| parse_err("TLINK without relType"))?;
        let label = RelationLabel::Raw(map_rel_type(rel_type)?);
        if tlinks.iter().any(|l| l.source == source && l.target == target) {
            skipped_duplicate_links += 1;
            continue;
        }
        tlinks.push(TLink { source, target, label });
    }

    let document = Document {
        doc_id: doc_id.to_string(),
        topic: None,
        sentences,
        events,
        dominance_pairs: Vec::new(),
        tlinks,
    };
    document.validate()?;
    Ok(TimemlImport { document, skipped_time_links, skipped_duplicate_links })
}
