//! File formats shared by the subcommands: prediction records, the
//! reproducibility manifest, and small read/write helpers.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use temprel_core::algebra::Posterior;
use temprel_core::corpus::{parse_corpus, serialize_corpus, Corpus, PairKey, RelationLabel, Scheme};

/// One predicted relation, one JSON record per line on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub source: String,
    pub target: String,
    pub scheme: Scheme,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<BTreeMap<String, f64>>,
}

impl PredictionRecord {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.doc_id, &self.source, &self.target)
    }

    pub fn parsed_label(&self) -> Result<RelationLabel> {
        Ok(RelationLabel::parse(self.scheme, &self.label)?)
    }

    pub fn parsed_posterior(&self) -> Result<Option<Posterior>> {
        let Some(map) = &self.posterior else { return Ok(None) };
        let labels = self.scheme.labels();
        let mut probs = Vec::with_capacity(labels.len());
        for label in labels {
            let p = map.get(label.name()).copied().unwrap_or(0.0);
            probs.push(p);
        }
        Ok(Some(Posterior::new(self.scheme, probs).map_err(|e| {
            anyhow::anyhow!("{}:{}->{}: {e}", self.doc_id, self.source, self.target)
        })?))
    }
}

pub fn posterior_map(posterior: &Posterior) -> BTreeMap<String, f64> {
    posterior
        .scheme
        .labels()
        .iter()
        .zip(&posterior.probs)
        .map(|(l, p)| (l.name().to_string(), *p))
        .collect()
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).with_context(|| format!("open {}", path.display()))?;
    Ok(parse_corpus(BufReader::new(file))?)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    serialize_corpus(corpus, &mut writer)?;
    writer.flush()?;
    Ok(())
}

pub fn write_predictions(records: &[PredictionRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = fs::File::open(path).with_context(|| format!("open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        out.push(record);
    }
    Ok(out)
}

/// Checks every record shares one scheme and returns it.
pub fn records_scheme(records: &[PredictionRecord]) -> Result<Scheme> {
    let Some(first) = records.first() else { bail!("no prediction records") };
    for r in records {
        if r.scheme != first.scheme {
            bail!("mixed schemes in prediction file: {} and {}", first.scheme, r.scheme);
        }
    }
    Ok(first.scheme)
}

pub fn records_to_labels(
    records: &[PredictionRecord],
) -> Result<BTreeMap<PairKey, RelationLabel>> {
    let mut out = BTreeMap::new();
    for r in records {
        out.insert(r.key(), r.parsed_label()?);
    }
    Ok(out)
}

/// Gold tlink labels of a corpus, expressed in the given scheme.
pub fn gold_in_scheme(
    corpus: &Corpus,
    scheme: Scheme,
) -> Result<BTreeMap<PairKey, RelationLabel>> {
    let mut out = BTreeMap::new();
    for doc in &corpus.documents {
        for link in &doc.tlinks {
            out.insert(
                PairKey::new(&doc.doc_id, &link.source, &link.target),
                temprel_core::corpus::label_in_scheme(link.label, scheme)?,
            );
        }
    }
    Ok(out)
}

/// Reproducibility manifest written by every run.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    /// The full argument vector, re-executable by the rerun command.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
}

pub fn write_manifest(out_dir: &Path, argv: &[String], config: serde_json::Value) -> Result<()> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        argv: argv.to_vec(),
        config,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(out_dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn ensure_out_dir(out: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("create {}", out.display()))?;
    Ok(out.to_path_buf())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("write {}", path.display()))?;
    Ok(())
}
