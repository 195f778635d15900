//! Line-delimited corpus file format: one structured document record
//! per line, UTF-8.

use super::{Corpus, CorpusError, Document};
use std::io::{BufRead, Write};

/// Reads a corpus from a line-delimited record stream. Order is
/// preserved and every document is validated.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        doc.validate()?;
        documents.push(doc);
    }
    let corpus = Corpus::new(documents);
    corpus.validate()?;
    Ok(corpus)
}

/// Writes the corpus in the native one-record-per-line format.
pub fn serialize_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> Result<(), CorpusError> {
    for doc in &corpus.documents {
        let line = serde_json::to_string(doc)
            .map_err(|e| CorpusError::Validation(format!("serialization failed: {e}")))?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CoarseRelation, EventInstance, RelationLabel, TLink};
    use std::io::Cursor;

    fn doc(doc_id: &str) -> Document {
        Document {
            doc_id: doc_id.to_string(),
            topic: Some("markets".to_string()),
            sentences: vec![vec!["prices".into(), "rose".into(), "and".into(), "fell".into()]],
            events: vec![
                EventInstance::new("e1", 0, (1, 2), "rose"),
                EventInstance::new("e2", 0, (3, 4), "fell"),
            ],
            dominance_pairs: vec![("e1".into(), "e2".into())],
            tlinks: vec![TLink {
                source: "e1".into(),
                target: "e2".into(),
                label: RelationLabel::Coarse(CoarseRelation::Before),
            }],
        }
    }

    #[test]
    fn parses_minimal_document() {
        let mut buf = Vec::new();
        serialize_corpus(&Corpus::new(vec![doc("d1")]), &mut buf).unwrap();
        let corpus = parse_corpus(Cursor::new(buf)).unwrap();
        assert_eq!(corpus.documents.len(), 1);
        assert_eq!(corpus.total_tlinks(), 1);
    }

    #[test]
    fn reports_line_number_on_malformed_record() {
        let input = format!(
            "{}\n{{not json\n",
            serde_json::to_string(&doc("d1")).unwrap()
        );
        let err = parse_corpus(Cursor::new(input)).unwrap_err();
        match err {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_dangling_event_reference() {
        let mut d = doc("d1");
        d.tlinks[0].target = "e9".into();
        let mut buf = Vec::new();
        for line in [serde_json::to_string(&d).unwrap()] {
            buf.extend_from_slice(line.as_bytes());
            buf.push(b'\n');
        }
        let err = parse_corpus(Cursor::new(buf)).unwrap_err();
        assert!(err.to_string().contains("e9"));
    }

    #[test]
    fn round_trip_is_structurally_equal() {
        let corpus = Corpus::new(vec![doc("d1"), doc("d2"), doc("d3")]);
        let mut buf = Vec::new();
        serialize_corpus(&corpus, &mut buf).unwrap();
        let reparsed = parse_corpus(Cursor::new(buf.clone())).unwrap();
        assert_eq!(corpus, reparsed);

        let mut buf2 = Vec::new();
        serialize_corpus(&reparsed, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn field_names_match_the_published_schema() {
        let value: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&doc("d1")).unwrap()).unwrap();
        let obj = value.as_object().unwrap();
        for key in ["doc_id", "topic", "sentences", "events", "dominance_pairs", "tlinks"] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        let link = &obj["tlinks"][0];
        for key in ["source", "target", "scheme", "value"] {
            assert!(link.get(key).is_some(), "missing tlink field {key}");
        }
        let event = value["events"][0].as_object().unwrap();
        for key in [
            "event_id",
            "sentence_index",
            "token_span",
            "word",
            "pos",
            "tense",
            "aspect",
            "modality",
            "polarity",
            "event_class",
            "in_prep_phrase",
            "entity_args",
        ] {
            assert!(event.contains_key(key), "missing event field {key}");
        }
    }
}
