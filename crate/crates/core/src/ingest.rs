//! Score ingestion: embeddings, similarity computation, and per-group
//! genuine/impostor score pools.
//!
//! All scores leave this module normalized to "higher = more similar":
//! Euclidean distance is negated so one threshold convention serves the whole
//! pipeline.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Demographic group label. Non-empty; compared by exact string equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(String);

impl GroupId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Data("group name must be non-empty".into()));
        }
        Ok(GroupId(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A feature vector extracted for one sample of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub subject_id: String,
    pub group: GroupId,
    pub vector: Vec<f64>,
}

impl Embedding {
    pub fn new(subject_id: impl Into<String>, group: GroupId, vector: Vec<f64>) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::Data("embedding vector must be non-empty".into()));
        }
        if let Some(v) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("embedding contains non-finite value {v}")));
        }
        Ok(Embedding { subject_id: subject_id.into(), group, vector })
    }
}

/// Genuine and impostor similarity scores for one demographic group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScoreSet {
    pub group: GroupId,
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityMeasure {
    Cosine,
    NegativeEuclidean,
}

impl FromStr for SimilarityMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(SimilarityMeasure::Cosine),
            "negative-euclidean" => Ok(SimilarityMeasure::NegativeEuclidean),
            other => Err(Error::InvalidConfig(format!(
                "unknown similarity measure {other:?} (expected cosine or negative-euclidean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Genuine,
    Impostor,
}

impl FromStr for PairLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genuine" => Ok(PairLabel::Genuine),
            "impostor" => Ok(PairLabel::Impostor),
            other => Err(Error::Data(format!(
                "unknown pair label {other:?} (expected genuine or impostor)"
            ))),
        }
    }
}

/// One comparison to score: two embedding ids and the ground-truth label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub id_a: String,
    pub id_b: String,
    pub label: PairLabel,
}

/// Similarity between two embeddings, normalized so higher = more similar.
///
/// Cosine lands in [-1, 1]; Euclidean distance is returned negated.
pub fn compute_similarity(a: &Embedding, b: &Embedding, measure: SimilarityMeasure) -> Result<f64> {
    if a.vector.len() != b.vector.len() {
        return Err(Error::DimensionMismatch(format!(
            "embedding lengths differ: {} vs {}",
            a.vector.len(),
            b.vector.len()
        )));
    }
    match measure {
        SimilarityMeasure::Cosine => {
            let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
            let na = a.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                return Err(Error::Degenerate(
                    "cosine similarity undefined for an all-zero vector".into(),
                ));
            }
            Ok(dot / (na * nb))
        }
        SimilarityMeasure::NegativeEuclidean => {
            let dist2: f64 = a
                .vector
                .iter()
                .zip(&b.vector)
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            Ok(-dist2.sqrt())
        }
    }
}

/// Score every pair and bucket the results into per-group sets.
///
/// Impostor pairs are attributed to the group of the first member; a genuine
/// pair spanning two groups is a data error. Groups come out sorted by name.
pub fn build_score_sets(
    embeddings: &[Embedding],
    pairs: &[Pair],
    measure: SimilarityMeasure,
) -> Result<Vec<LabeledScoreSet>> {
    if let Some(first) = embeddings.first() {
        let dim = first.vector.len();
        if let Some(bad) = embeddings.iter().find(|e| e.vector.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "embedding {} has length {} but the collection uses {}",
                bad.subject_id,
                bad.vector.len(),
                dim
            )));
        }
    }
    let mut by_id: HashMap<&str, &Embedding> = HashMap::with_capacity(embeddings.len());
    for e in embeddings {
        if by_id.insert(e.subject_id.as_str(), e).is_some() {
            return Err(Error::Data(format!("duplicate subject id {:?}", e.subject_id)));
        }
    }

    let mut groups: BTreeMap<GroupId, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for pair in pairs {
        let a = *by_id
            .get(pair.id_a.as_str())
            .ok_or_else(|| Error::Data(format!("unknown subject id {:?}", pair.id_a)))?;
        let b = *by_id
            .get(pair.id_b.as_str())
            .ok_or_else(|| Error::Data(format!("unknown subject id {:?}", pair.id_b)))?;
        if pair.label == PairLabel::Genuine && a.group != b.group {
            return Err(Error::Data(format!(
                "genuine pair ({:?}, {:?}) spans groups {} and {}",
                pair.id_a, pair.id_b, a.group, b.group
            )));
        }
        let score = compute_similarity(a, b, measure)?;
        let entry = groups.entry(a.group.clone()).or_default();
        match pair.label {
            PairLabel::Genuine => entry.0.push(score),
            PairLabel::Impostor => entry.1.push(score),
        }
    }

    Ok(groups
        .into_iter()
        .map(|(group, (genuine, impostor))| LabeledScoreSet { group, genuine, impostor })
        .collect())
}

fn check_score(score: f64, line: u64) -> Result<f64> {
    if !score.is_finite() {
        return Err(Error::Data(format!("non-finite score at line {line}")));
    }
    Ok(score)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn expect_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let headers = reader.headers()?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Parse the score CSV schema `group,label,score` into per-group sets.
///
/// Groups come out sorted by name; rows keep file order within each set.
pub fn parse_score_reader(input: impl Read) -> Result<Vec<LabeledScoreSet>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    expect_header(&mut reader, &["group", "label", "score"])?;

    let mut groups: BTreeMap<GroupId, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let group = GroupId::new(&record[0]).map_err(|_| Error::Parse {
            line,
            message: "group name must be non-empty".into(),
        })?;
        let label: PairLabel = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("unknown label {:?}", &record[1]),
        })?;
        let score: f64 = record[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid score {:?}", &record[2]),
        })?;
        let score = check_score(score, line)?;
        let entry = groups.entry(group).or_default();
        match label {
            PairLabel::Genuine => entry.0.push(score),
            PairLabel::Impostor => entry.1.push(score),
        }
    }

    Ok(groups
        .into_iter()
        .map(|(group, (genuine, impostor))| LabeledScoreSet { group, genuine, impostor })
        .collect())
}

pub fn parse_score_file(path: impl AsRef<Path>) -> Result<Vec<LabeledScoreSet>> {
    parse_score_reader(std::fs::File::open(path)?)
}

/// Write sets back out in the score CSV schema. Scores are printed with
/// Rust's shortest round-trip formatting, so parse(write(x)) == x.
pub fn write_score_sets(sets: &[LabeledScoreSet], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["group", "label", "score"])?;
    for set in sets {
        for s in &set.genuine {
            writer.write_record([set.group.name(), "genuine", &format!("{s}")])?;
        }
        for s in &set.impostor {
            writer.write_record([set.group.name(), "impostor", &format!("{s}")])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_score_file(sets: &[LabeledScoreSet], path: impl AsRef<Path>) -> Result<()> {
    write_score_sets(sets, std::fs::File::create(path)?)
}

/// Parse the embedding CSV schema `subject_id,group,v0,...,vD-1`.
pub fn parse_embedding_reader(input: impl Read) -> Result<Vec<Embedding>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers()?;
    let got: Vec<&str> = headers.iter().collect();
    let dim = got.len().saturating_sub(2);
    let expected: Vec<String> = ["subject_id".to_string(), "group".to_string()]
        .into_iter()
        .chain((0..dim).map(|i| format!("v{i}")))
        .collect();
    if dim == 0 || got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header subject_id,group,v0,...,vD-1, found {:?}",
                got.join(",")
            ),
        });
    }

    let mut embeddings = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != dim + 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", dim + 2, record.len()),
            });
        }
        let group = GroupId::new(&record[1]).map_err(|_| Error::Parse {
            line,
            message: "group name must be non-empty".into(),
        })?;
        let mut vector = Vec::with_capacity(dim);
        for i in 0..dim {
            let v: f64 = record[i + 2].parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid value {:?} in column v{i}", &record[i + 2]),
            })?;
            vector.push(v);
        }
        embeddings.push(Embedding::new(&record[0], group, vector)?);
    }
    Ok(embeddings)
}

pub fn parse_embedding_file(path: impl AsRef<Path>) -> Result<Vec<Embedding>> {
    parse_embedding_reader(std::fs::File::open(path)?)
}

/// Parse the pair CSV schema `id_a,id_b,label`.
pub fn parse_pair_reader(input: impl Read) -> Result<Vec<Pair>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    expect_header(&mut reader, &["id_a", "id_b", "label"])?;

    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let label: PairLabel = record[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("unknown label {:?}", &record[2]),
        })?;
        pairs.push(Pair { id_a: record[0].to_string(), id_b: record[1].to_string(), label });
    }
    Ok(pairs)
}

pub fn parse_pair_file(path: impl AsRef<Path>) -> Result<Vec<Pair>> {
    parse_pair_reader(std::fs::File::open(path)?)
}
