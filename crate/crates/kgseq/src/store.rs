//! Benchmark dataset loading, truth-set membership, negative sampling, and
//! training-proportion subsampling.
//!
//! A dataset directory holds `train.tsv`, `dev.tsv`, `test.tsv` with
//! tab-separated `<head> <relation> <tail>` identifier lines, plus
//! `entity2text.txt` and `relation2text.txt` mapping identifiers to surface
//! text. Dev/test lines may carry an optional fourth column (`1` or `-1`) for
//! classification benchmarks that ship labeled negatives; negative lines are
//! kept for classification but excluded from the truth set used for filtering
//! and negative-sample rejection.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::rng::rng_from;

/// Dense entity index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

/// Dense relation index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A `(head, relation, tail)` fact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head.0, self.relation.0, self.tail.0)
    }
}

impl serde::Serialize for Triple {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.head.0, self.relation.0, self.tail.0].serialize(serializer)
    }
}

/// A triple with a binary plausibility label (true = drawn from the positive
/// set, false = generated or provided negative).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub label: bool,
}

/// Dataset split selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

/// Which surface text the loader reads for entities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextSource {
    /// `entity2text.txt`
    Names,
    /// `entity2textlong.txt`
    Descriptions,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("dataset format error in {path}: {reason}")]
    DatasetFormat { path: PathBuf, reason: String },
    #[error("unknown identifier `{identifier}` in {path} line {line}")]
    UnknownIdentifier {
        identifier: String,
        path: PathBuf,
        line: usize,
    },
    #[error("split file {path} is empty")]
    EmptySplit { path: PathBuf },
    #[error("triple {triple} references an out-of-range id (entities={entities}, relations={relations})")]
    InvalidTriple {
        triple: Triple,
        entities: usize,
        relations: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Configuration for Eq.-style negative generation: corrupt exactly one
/// entity slot of a positive and reject anything already in the positive set.
#[derive(Clone, Copy, Debug)]
pub struct NegativeSamplingConfig {
    pub negatives_per_positive: usize,
    pub corruption: Corruption,
    pub seed: u64,
    pub max_rejection_attempts: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    /// Pick head or tail uniformly at random per generated negative.
    HeadOrTailUniform,
}

impl NegativeSamplingConfig {
    pub fn new(
        negatives_per_positive: usize,
        seed: u64,
        max_rejection_attempts: usize,
    ) -> Result<Self, StoreError> {
        if negatives_per_positive < 1 {
            return Err(StoreError::InvalidArgument(
                "negatives_per_positive must be >= 1".into(),
            ));
        }
        if max_rejection_attempts < negatives_per_positive {
            return Err(StoreError::InvalidArgument(
                "max_rejection_attempts must be >= negatives_per_positive".into(),
            ));
        }
        Ok(Self {
            negatives_per_positive,
            corruption: Corruption::HeadOrTailUniform,
            seed,
            max_rejection_attempts,
        })
    }
}

/// Result of one negative-sampling call. `missing` is nonzero when rejection
/// sampling ran out of attempts before finding enough valid negatives.
#[derive(Clone, Debug)]
pub struct NegativeSample {
    pub negatives: Vec<LabeledTriple>,
    pub missing: usize,
}

/// Named entity or relation with its surface text.
#[derive(Clone, Debug)]
pub struct TextEntry {
    pub raw_id: String,
    pub text: String,
}

/// An indexed knowledge graph: vocabularies, splits, optional dev/test labels,
/// and membership indexes. Immutable after construction and safe to share
/// across threads.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vec<TextEntry>,
    relations: Vec<TextEntry>,
    train: Vec<Triple>,
    dev: Vec<Triple>,
    test: Vec<Triple>,
    dev_labels: Vec<bool>,
    test_labels: Vec<bool>,
    /// Positive triples from train ∪ dev ∪ test.
    truth: HashSet<Triple>,
    /// Positive triples from the train split only; the exclusion set for
    /// training-time negative sampling.
    train_truth: HashSet<Triple>,
}

impl KnowledgeGraph {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entities(&self) -> &[TextEntry] {
        &self.entities
    }

    pub fn relations(&self) -> &[TextEntry] {
        &self.relations
    }

    pub fn entity_text(&self, id: EntityId) -> &str {
        &self.entities[id.index()].text
    }

    pub fn relation_text(&self, id: RelationId) -> &str {
        &self.relations[id.index()].text
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    /// Labels for a split; train is all-positive by construction.
    pub fn split_labels(&self, split: Split) -> Vec<bool> {
        match split {
            Split::Train => vec![true; self.train.len()],
            Split::Dev => self.dev_labels.clone(),
            Split::Test => self.test_labels.clone(),
        }
    }

    /// Whether the split file carried explicit negative labels.
    pub fn split_has_negatives(&self, split: Split) -> bool {
        self.split_labels(split).iter().any(|l| !l)
    }

    pub fn labeled_split(&self, split: Split) -> Vec<LabeledTriple> {
        self.split(split)
            .iter()
            .zip(self.split_labels(split))
            .map(|(&triple, label)| LabeledTriple { triple, label })
            .collect()
    }

    fn check_ids(&self, t: Triple) -> Result<(), StoreError> {
        if t.head.index() >= self.entities.len()
            || t.tail.index() >= self.entities.len()
            || t.relation.index() >= self.relations.len()
        {
            return Err(StoreError::InvalidTriple {
                triple: t,
                entities: self.entities.len(),
                relations: self.relations.len(),
            });
        }
        Ok(())
    }

    /// True iff `t` is a positive triple of train ∪ dev ∪ test.
    pub fn is_known(&self, t: Triple) -> Result<bool, StoreError> {
        self.check_ids(t)?;
        Ok(self.truth.contains(&t))
    }

    /// Membership check without id validation, for hot loops over ids the
    /// caller already knows are in range.
    #[inline]
    pub fn is_known_unchecked(&self, t: &Triple) -> bool {
        self.truth.contains(t)
    }

    #[inline]
    pub fn in_train(&self, t: &Triple) -> bool {
        self.train_truth.contains(t)
    }

    pub fn truth_len(&self) -> usize {
        self.truth.len()
    }

    /// Generates up to `cfg.negatives_per_positive` distinct negatives for
    /// `positive` by corrupting exactly one entity slot, rejecting candidates
    /// found in the positive training set.
    pub fn sample_negatives(
        &self,
        positive: Triple,
        cfg: &NegativeSamplingConfig,
    ) -> Result<NegativeSample, StoreError> {
        self.check_ids(positive)?;
        let n_ent = self.entities.len() as u32;
        if n_ent < 2 {
            return Err(StoreError::InvalidArgument(
                "negative sampling needs at least 2 entities".into(),
            ));
        }
        let mut rng = rng_from(cfg.seed);
        let mut found: Vec<LabeledTriple> = Vec::with_capacity(cfg.negatives_per_positive);
        let mut seen: HashSet<Triple> = HashSet::new();
        for _ in 0..cfg.max_rejection_attempts {
            if found.len() == cfg.negatives_per_positive {
                break;
            }
            let corrupt_head = rng.random::<bool>();
            let keep = if corrupt_head {
                positive.head.0
            } else {
                positive.tail.0
            };
            // Uniform over entities other than the one being replaced.
            let mut e = rng.random_range(0..n_ent - 1);
            if e >= keep {
                e += 1;
            }
            let candidate = if corrupt_head {
                Triple {
                    head: EntityId(e),
                    ..positive
                }
            } else {
                Triple {
                    tail: EntityId(e),
                    ..positive
                }
            };
            if self.train_truth.contains(&candidate) || !seen.insert(candidate) {
                continue;
            }
            found.push(LabeledTriple {
                triple: candidate,
                label: false,
            });
        }
        let missing = cfg.negatives_per_positive - found.len();
        Ok(NegativeSample {
            negatives: found,
            missing,
        })
    }

    /// Returns a copy whose train split is a uniform sample of
    /// `round(proportion * len)` triples (half-to-even rounding). Dev, test,
    /// and both truth indexes keep reflecting the full original splits so
    /// filtered evaluation is unchanged.
    pub fn subsample_training(&self, proportion: f64, seed: u64) -> Result<Self, StoreError> {
        if !(proportion > 0.0 && proportion <= 1.0) {
            return Err(StoreError::InvalidArgument(format!(
                "train proportion must be in (0, 1], got {proportion}"
            )));
        }
        let target = subsample_size(self.train.len(), proportion);
        let mut out = self.clone();
        if target == self.train.len() {
            return Ok(out);
        }
        let mut indices: Vec<usize> = (0..self.train.len()).collect();
        indices.shuffle(&mut rng_from(seed));
        indices.truncate(target);
        indices.sort_unstable();
        out.train = indices.into_iter().map(|i| self.train[i]).collect();
        Ok(out)
    }

    /// Assembles a graph from already-indexed parts. Intended for tests and
    /// generators; validates the same invariants as the file loader.
    pub fn from_parts(
        entities: Vec<TextEntry>,
        relations: Vec<TextEntry>,
        train: Vec<Triple>,
        dev: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self, StoreError> {
        let dev_labels = vec![true; dev.len()];
        let test_labels = vec![true; test.len()];
        Self::from_labeled_parts(entities, relations, train, dev, dev_labels, test, test_labels)
    }

    pub fn from_labeled_parts(
        entities: Vec<TextEntry>,
        relations: Vec<TextEntry>,
        train: Vec<Triple>,
        dev: Vec<Triple>,
        dev_labels: Vec<bool>,
        test: Vec<Triple>,
        test_labels: Vec<bool>,
    ) -> Result<Self, StoreError> {
        assert_eq!(dev.len(), dev_labels.len());
        assert_eq!(test.len(), test_labels.len());
        let mut kg = Self {
            entities,
            relations,
            train,
            dev,
            test,
            dev_labels,
            test_labels,
            truth: HashSet::new(),
            train_truth: HashSet::new(),
        };
        for split in [Split::Train, Split::Dev, Split::Test] {
            for &t in kg.split(split) {
                kg.check_ids(t)?;
            }
        }
        kg.rebuild_truth();
        Ok(kg)
    }

    fn rebuild_truth(&mut self) {
        self.train_truth = self.train.iter().copied().collect();
        let mut truth = self.train_truth.clone();
        for (t, &pos) in self.dev.iter().zip(&self.dev_labels) {
            if pos {
                truth.insert(*t);
            }
        }
        for (t, &pos) in self.test.iter().zip(&self.test_labels) {
            if pos {
                truth.insert(*t);
            }
        }
        self.truth = truth;
    }
}

/// Half-to-even rounded subsample size.
pub fn subsample_size(total: usize, proportion: f64) -> usize {
    (proportion * total as f64).round_ties_even() as usize
}

/// Loads a benchmark directory into an indexed [`KnowledgeGraph`].
///
/// Entity and relation ids are assigned by sorting the raw identifiers of the
/// text maps, so reloading a dataset always yields identical ids.
pub fn load_dataset(dir: &Path, text_source: TextSource) -> Result<KnowledgeGraph, StoreError> {
    let entity_file = match text_source {
        TextSource::Names => "entity2text.txt",
        TextSource::Descriptions => "entity2textlong.txt",
    };
    let entities = read_text_map(&dir.join(entity_file))?;
    let relations = read_text_map(&dir.join("relation2text.txt"))?;

    let entity_ids: HashMap<&str, u32> = entities
        .iter()
        .enumerate()
        .map(|(i, e)| (e.raw_id.as_str(), i as u32))
        .collect();
    let relation_ids: HashMap<&str, u32> = relations
        .iter()
        .enumerate()
        .map(|(i, r)| (r.raw_id.as_str(), i as u32))
        .collect();

    let (train, train_labels) = read_split(&dir.join("train.tsv"), &entity_ids, &relation_ids)?;
    if train_labels.iter().any(|l| !l) {
        return Err(StoreError::DatasetFormat {
            path: dir.join("train.tsv"),
            reason: "train split must not contain labeled negatives".into(),
        });
    }
    let (dev, dev_labels) = read_split(&dir.join("dev.tsv"), &entity_ids, &relation_ids)?;
    let (test, test_labels) = read_split(&dir.join("test.tsv"), &entity_ids, &relation_ids)?;

    KnowledgeGraph::from_labeled_parts(
        entities,
        relations,
        train,
        dev,
        dev_labels,
        test,
        test_labels,
    )
}

fn read_to_string(path: &Path) -> Result<String, StoreError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(source) if source.kind() == std::io::ErrorKind::NotFound => {
            Err(StoreError::DatasetFormat {
                path: path.to_path_buf(),
                reason: "required file is missing".into(),
            })
        }
        Err(source) => Err(StoreError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// Reads an identifier → text map, sorted by raw identifier.
fn read_text_map(path: &Path) -> Result<Vec<TextEntry>, StoreError> {
    let content = read_to_string(path)?;
    let mut entries: Vec<TextEntry> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (raw_id, text) = line.split_once('\t').ok_or_else(|| StoreError::DatasetFormat {
            path: path.to_path_buf(),
            reason: format!("line {}: expected `<id>\\t<text>`", lineno + 1),
        })?;
        if !seen.insert(raw_id.to_string()) {
            return Err(StoreError::DatasetFormat {
                path: path.to_path_buf(),
                reason: format!("line {}: duplicate identifier `{raw_id}`", lineno + 1),
            });
        }
        entries.push(TextEntry {
            raw_id: raw_id.to_string(),
            text: text.to_string(),
        });
    }
    if entries.is_empty() {
        return Err(StoreError::DatasetFormat {
            path: path.to_path_buf(),
            reason: "text map is empty".into(),
        });
    }
    entries.sort_by(|a, b| a.raw_id.cmp(&b.raw_id));
    Ok(entries)
}

fn read_split(
    path: &Path,
    entity_ids: &HashMap<&str, u32>,
    relation_ids: &HashMap<&str, u32>,
) -> Result<(Vec<Triple>, Vec<bool>), StoreError> {
    let content = read_to_string(path)?;
    let mut triples = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(StoreError::DatasetFormat {
                path: path.to_path_buf(),
                reason: format!(
                    "line {}: expected 3 or 4 tab-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                ),
            });
        }
        let lookup_entity = |raw: &str| {
            entity_ids
                .get(raw)
                .copied()
                .ok_or_else(|| StoreError::UnknownIdentifier {
                    identifier: raw.to_string(),
                    path: path.to_path_buf(),
                    line: lineno + 1,
                })
        };
        let head = lookup_entity(fields[0])?;
        let relation =
            relation_ids
                .get(fields[1])
                .copied()
                .ok_or_else(|| StoreError::UnknownIdentifier {
                    identifier: fields[1].to_string(),
                    path: path.to_path_buf(),
                    line: lineno + 1,
                })?;
        let tail = lookup_entity(fields[2])?;
        let label = if fields.len() == 4 {
            match fields[3] {
                "1" => true,
                "-1" => false,
                other => {
                    return Err(StoreError::DatasetFormat {
                        path: path.to_path_buf(),
                        reason: format!("line {}: bad label `{other}` (want 1 or -1)", lineno + 1),
                    })
                }
            }
        } else {
            true
        };
        triples.push(Triple::new(head, relation, tail));
        labels.push(label);
    }
    if triples.is_empty() {
        return Err(StoreError::EmptySplit {
            path: path.to_path_buf(),
        });
    }
    Ok((triples, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three entities A, B, C and one relation; positive set {(A, r, B)}.
    fn tiny_kg() -> KnowledgeGraph {
        let entities = ["A", "B", "C"]
            .iter()
            .map(|s| TextEntry {
                raw_id: s.to_string(),
                text: s.to_string(),
            })
            .collect();
        let relations = vec![TextEntry {
            raw_id: "r".into(),
            text: "r".into(),
        }];
        KnowledgeGraph::from_parts(
            entities,
            relations,
            vec![Triple::new(0, 0, 1)],
            vec![Triple::new(0, 0, 1)],
            vec![Triple::new(0, 0, 1)],
        )
        .unwrap()
    }

    /// Brute-force enumeration of the one-slot corruption set, excluding the
    /// positive training set. Oracle for `sample_negatives`.
    fn enumerate_candidates(kg: &KnowledgeGraph, p: Triple) -> HashSet<Triple> {
        let mut out = HashSet::new();
        for e in 0..kg.num_entities() as u32 {
            if e != p.head.0 {
                let c = Triple {
                    head: EntityId(e),
                    ..p
                };
                if !kg.in_train(&c) {
                    out.insert(c);
                }
            }
            if e != p.tail.0 {
                let c = Triple {
                    tail: EntityId(e),
                    ..p
                };
                if !kg.in_train(&c) {
                    out.insert(c);
                }
            }
        }
        out
    }

    #[test]
    fn negative_candidates_match_hand_enumeration() {
        let kg = tiny_kg();
        let p = Triple::new(0, 0, 1);
        let expected: HashSet<Triple> = [
            Triple::new(1, 0, 1),
            Triple::new(2, 0, 1),
            Triple::new(0, 0, 0),
            Triple::new(0, 0, 2),
        ]
        .into_iter()
        .collect();
        assert_eq!(enumerate_candidates(&kg, p), expected);

        // Exhaustive sampling finds exactly that set.
        let cfg = NegativeSamplingConfig::new(4, 11, 10_000).unwrap();
        let sample = kg.sample_negatives(p, &cfg).unwrap();
        assert_eq!(sample.missing, 0);
        let got: HashSet<Triple> = sample.negatives.iter().map(|l| l.triple).collect();
        assert_eq!(got, expected);
        assert!(sample.negatives.iter().all(|l| !l.label));
    }

    #[test]
    fn negative_sampling_is_deterministic() {
        let kg = tiny_kg();
        let p = Triple::new(0, 0, 1);
        let cfg = NegativeSamplingConfig::new(2, 99, 100).unwrap();
        let a = kg.sample_negatives(p, &cfg).unwrap();
        let b = kg.sample_negatives(p, &cfg).unwrap();
        assert_eq!(a.negatives, b.negatives);
    }

    #[test]
    fn negative_sampling_reports_shortfall_on_dense_graph() {
        // Two entities, every corruption of (A, r, B) is already positive.
        let entities = ["A", "B"]
            .iter()
            .map(|s| TextEntry {
                raw_id: s.to_string(),
                text: s.to_string(),
            })
            .collect();
        let relations = vec![TextEntry {
            raw_id: "r".into(),
            text: "r".into(),
        }];
        let kg = KnowledgeGraph::from_parts(
            entities,
            relations,
            vec![Triple::new(0, 0, 1), Triple::new(1, 0, 1), Triple::new(0, 0, 0)],
            vec![Triple::new(0, 0, 1)],
            vec![Triple::new(0, 0, 1)],
        )
        .unwrap();
        let cfg = NegativeSamplingConfig::new(2, 5, 64).unwrap();
        let sample = kg.sample_negatives(Triple::new(0, 0, 1), &cfg).unwrap();
        assert!(sample.negatives.is_empty());
        assert_eq!(sample.missing, 2);
    }

    #[test]
    fn config_rejects_zero_negatives() {
        assert!(NegativeSamplingConfig::new(0, 1, 10).is_err());
        assert!(NegativeSamplingConfig::new(5, 1, 4).is_err());
    }

    #[test]
    fn is_known_matches_definition() {
        let kg = tiny_kg();
        assert!(kg.is_known(Triple::new(0, 0, 1)).unwrap());
        assert!(!kg.is_known(Triple::new(0, 0, 2)).unwrap());
        assert!(kg.is_known(Triple::new(7, 0, 1)).is_err());
    }

    #[test]
    fn subsample_identity_and_errors() {
        let kg = tiny_kg();
        let same = kg.subsample_training(1.0, 3).unwrap();
        assert_eq!(same.split(Split::Train), kg.split(Split::Train));
        assert!(kg.subsample_training(0.0, 3).is_err());
        assert!(kg.subsample_training(1.5, 3).is_err());
    }

    #[test]
    fn subsample_size_uses_half_even_rounding() {
        assert_eq!(subsample_size(316_232, 0.05), 15_812);
        assert_eq!(subsample_size(112_581, 0.1), 11_258);
        // Exact .5 ties round to even.
        assert_eq!(subsample_size(5, 0.5), 2);
        assert_eq!(subsample_size(7, 0.5), 4);
    }

    #[test]
    fn subsample_preserves_truth_set() {
        let entities: Vec<TextEntry> = (0..10)
            .map(|i| TextEntry {
                raw_id: format!("e{i}"),
                text: format!("e{i}"),
            })
            .collect();
        let relations = vec![TextEntry {
            raw_id: "r".into(),
            text: "r".into(),
        }];
        let train: Vec<Triple> = (0..9).map(|i| Triple::new(i, 0, i + 1)).collect();
        let kg = KnowledgeGraph::from_parts(
            entities,
            relations,
            train,
            vec![Triple::new(9, 0, 0)],
            vec![Triple::new(9, 0, 1)],
        )
        .unwrap();
        let sub = kg.subsample_training(0.5, 17).unwrap();
        assert_eq!(sub.split(Split::Train).len(), 4); // round_ties_even(4.5)
        assert_eq!(sub.truth_len(), kg.truth_len());
        // Dropped train triples still count as known.
        for t in kg.split(Split::Train) {
            assert!(sub.is_known(*t).unwrap());
        }
        // Same seed, same result.
        let sub2 = kg.subsample_training(0.5, 17).unwrap();
        assert_eq!(sub.split(Split::Train), sub2.split(Split::Train));
    }
}
