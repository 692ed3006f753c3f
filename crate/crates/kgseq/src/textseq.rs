//! Subword vocabulary, tokenization, and encoder input packing.
//!
//! The vocabulary is learned from the dataset's own entity/relation texts by
//! iterative pair merging over lowercased, punctuation-split words, with `##`
//! marking word-internal continuation pieces. Tokenization is greedy
//! longest-prefix matching against that vocabulary. Packing lays tokens out as
//! `[CLS] head [SEP] relation [SEP] tail [SEP]` (triple mode) or
//! `[CLS] head [SEP] tail [SEP]` (pair mode) with segment and position ids.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::store::KnowledgeGraph;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

/// The special tokens, in their fixed id order 0..=4.
pub const SPECIALS: [&str; 5] = [PAD, UNK, CLS, SEP, MASK];

const CONTINUATION: &str = "##";

/// Subword token id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const PAD: TokenId = TokenId(0);
    pub const UNK: TokenId = TokenId(1);
    pub const CLS: TokenId = TokenId(2);
    pub const SEP: TokenId = TokenId(3);
    pub const MASK: TokenId = TokenId(4);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error)]
pub enum TextSeqError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary target size {0} is too small (need >= 100)")]
    TargetSizeTooSmall(usize),
    #[error("bad vocabulary file: {0}")]
    BadVocabFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("max_len {max_len} cannot hold specials plus one token per segment (need {needed})")]
    MaxLenTooSmall { max_len: usize, needed: usize },
    #[error("{which} text tokenizes to zero tokens")]
    EmptyText { which: &'static str },
    #[error("packing config invalid: {0}")]
    BadConfig(String),
}

/// Fixed-order subword vocabulary. Ids 0..=4 are the special tokens.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    tokens: Vec<String>,
    lookup: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit token strings (specials prepended).
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut all: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        for t in tokens {
            if !all.contains(&t) {
                all.push(t);
            }
        }
        Self::from_complete(all)
    }

    fn from_complete(tokens: Vec<String>) -> Self {
        let lookup = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), TokenId(i as u32)))
            .collect();
        Self { tokens, lookup }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_str(&self, id: TokenId) -> &str {
        &self.tokens[id.index()]
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.lookup.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line, line number = id.
    pub fn write_file(&self, path: &Path) -> Result<(), TextSeqError> {
        let mut out = String::with_capacity(self.tokens.len() * 8);
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, TextSeqError> {
        let content = std::fs::read_to_string(path)?;
        let tokens: Vec<String> = content.lines().map(|l| l.to_string()).collect();
        if tokens.len() < SPECIALS.len() {
            return Err(TextSeqError::BadVocabFile(
                "fewer lines than special tokens".into(),
            ));
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            if tokens[i] != *s {
                return Err(TextSeqError::BadVocabFile(format!(
                    "line {} must be {s}, found `{}`",
                    i + 1,
                    tokens[i]
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tokens {
            if !seen.insert(t) {
                return Err(TextSeqError::BadVocabFile(format!("duplicate token `{t}`")));
            }
        }
        Ok(Self::from_complete(tokens))
    }

    /// Greedy longest-prefix subword segmentation of one text.
    ///
    /// Lowercases, splits on whitespace and punctuation (punctuation marks are
    /// kept as their own words), then matches the longest vocabulary prefix;
    /// word-internal pieces carry the `##` prefix. A character with no match
    /// becomes `[UNK]` and matching continues after it. Total: never fails.
    pub fn tokenize(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        for word in split_words(text) {
            self.tokenize_word(&word, &mut out);
        }
        out
    }

    /// Token strings rather than ids, mainly for dumps and tests.
    pub fn tokenize_str(&self, text: &str) -> Vec<String> {
        self.tokenize(text)
            .into_iter()
            .map(|t| self.token_str(t).to_string())
            .collect()
    }

    fn tokenize_word(&self, word: &str, out: &mut Vec<TokenId>) {
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut matched = None;
            while end > start {
                let piece: String = chars[start..end].iter().collect();
                let candidate = if start == 0 {
                    piece
                } else {
                    format!("{CONTINUATION}{piece}")
                };
                if let Some(id) = self.lookup.get(candidate.as_str()) {
                    matched = Some((*id, end));
                    break;
                }
                end -= 1;
            }
            match matched {
                Some((id, end)) => {
                    out.push(id);
                    start = end;
                }
                None => {
                    out.push(TokenId::UNK);
                    start += 1;
                }
            }
        }
    }
}

/// Lowercased word split on whitespace and punctuation; punctuation marks are
/// emitted as single-character words.
pub fn split_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            words.push(ch.to_lowercase().collect());
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Learns a subword vocabulary from all entity and relation texts.
///
/// Starts from single characters (word-initial and `##`-continuation forms)
/// and repeatedly merges the most frequent adjacent pair until `target_size`
/// is reached or no pair occurs at least twice. Ties break toward the
/// lexicographically smallest pair so the result is deterministic.
pub fn build_vocab(kg: &KnowledgeGraph, target_size: usize) -> Result<Vocabulary, TextSeqError> {
    let corpus = kg
        .entities()
        .iter()
        .chain(kg.relations().iter())
        .map(|e| e.text.as_str());
    build_vocab_from_texts(corpus, target_size)
}

pub fn build_vocab_from_texts<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    target_size: usize,
) -> Result<Vocabulary, TextSeqError> {
    if target_size < 100 {
        return Err(TextSeqError::TargetSizeTooSmall(target_size));
    }
    // Word frequencies over the whole corpus.
    let mut word_freq: HashMap<String, u64> = HashMap::new();
    for text in texts {
        for w in split_words(text) {
            *word_freq.entry(w).or_insert(0) += 1;
        }
    }
    if word_freq.is_empty() {
        return Err(TextSeqError::EmptyCorpus);
    }

    // Each word as a sequence of symbols; the alphabet is the fallback layer.
    let mut words: Vec<(Vec<String>, u64)> = {
        let mut v: Vec<(&String, &u64)> = word_freq.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v.into_iter()
            .map(|(w, &f)| {
                let syms: Vec<String> = w
                    .chars()
                    .enumerate()
                    .map(|(i, c)| {
                        if i == 0 {
                            c.to_string()
                        } else {
                            format!("{CONTINUATION}{c}")
                        }
                    })
                    .collect();
                (syms, f)
            })
            .collect()
    };

    let mut alphabet: Vec<String> = {
        let mut set: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        for (syms, _) in &words {
            for s in syms {
                set.insert(s.clone());
            }
        }
        set.into_iter().collect()
    };
    let budget = target_size - SPECIALS.len();
    alphabet.truncate(budget);
    let mut vocab: Vec<String> = alphabet;

    while vocab.len() < budget {
        // Count adjacent pairs weighted by word frequency.
        let mut pair_freq: HashMap<(String, String), u64> = HashMap::new();
        for (syms, f) in &words {
            for pair in syms.windows(2) {
                *pair_freq
                    .entry((pair[0].clone(), pair[1].clone()))
                    .or_insert(0) += f;
            }
        }
        let best = pair_freq
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        let Some(((left, right), _)) = best else {
            break;
        };
        let merged = format!("{left}{}", right.trim_start_matches(CONTINUATION));
        if !vocab.contains(&merged) {
            vocab.push(merged.clone());
        }
        for (syms, _) in &mut words {
            let mut i = 0;
            while i + 1 < syms.len() {
                if syms[i] == left && syms[i + 1] == right {
                    syms[i] = merged.clone();
                    syms.remove(i + 1);
                } else {
                    i += 1;
                }
            }
        }
    }

    Ok(Vocabulary::from_tokens(vocab))
}

/// Packing layout variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqKind {
    /// `[CLS] head [SEP] relation [SEP] tail [SEP]`
    Triple,
    /// `[CLS] head [SEP] tail [SEP]`
    Pair,
}

/// Segment A (entities and their separators) vs B (relation span in triple
/// mode, tail-entity span in pair mode).
pub const SEGMENT_A: u8 = 0;
pub const SEGMENT_B: u8 = 1;

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct PackingConfig {
    pub max_len: usize,
}

impl PackingConfig {
    pub fn new(max_len: usize) -> Result<Self, TextSeqError> {
        if max_len < 8 {
            return Err(TextSeqError::BadConfig(format!(
                "max_len must be >= 8, got {max_len}"
            )));
        }
        Ok(Self { max_len })
    }
}

impl Default for PackingConfig {
    fn default() -> Self {
        Self { max_len: 32 }
    }
}

/// One encoder-ready input sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedSequence {
    pub token_ids: Vec<TokenId>,
    pub segment_ids: Vec<u8>,
    pub position_ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub kind: SeqKind,
    pub label: Option<u32>,
}

impl PackedSequence {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Number of non-padding positions.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    /// Extends with `[PAD]` up to `len`; positions stay consecutive and the
    /// attention mask marks the padding.
    pub fn pad_to(&mut self, len: usize) {
        while self.token_ids.len() < len {
            self.token_ids.push(TokenId::PAD);
            self.segment_ids.push(SEGMENT_A);
            self.position_ids.push(self.position_ids.len() as u32);
            self.attention_mask.push(0);
        }
    }

    pub fn with_label(mut self, label: u32) -> Self {
        self.label = Some(label);
        self
    }
}

/// Packs a `(head, relation, tail)` text triple.
pub fn pack_triple(
    vocab: &Vocabulary,
    head_text: &str,
    relation_text: &str,
    tail_text: &str,
    cfg: &PackingConfig,
) -> Result<PackedSequence, TextSeqError> {
    let head = vocab.tokenize(head_text);
    let relation = vocab.tokenize(relation_text);
    let tail = vocab.tokenize(tail_text);
    pack_triple_tokens(&head, &relation, &tail, cfg)
}

/// Packs already-tokenized texts; the hot path for batch scoring.
pub fn pack_triple_tokens(
    head: &[TokenId],
    relation: &[TokenId],
    tail: &[TokenId],
    cfg: &PackingConfig,
) -> Result<PackedSequence, TextSeqError> {
    if cfg.max_len < 7 {
        return Err(TextSeqError::MaxLenTooSmall {
            max_len: cfg.max_len,
            needed: 7,
        });
    }
    if head.is_empty() {
        return Err(TextSeqError::EmptyText { which: "head" });
    }
    if relation.is_empty() {
        return Err(TextSeqError::EmptyText { which: "relation" });
    }
    if tail.is_empty() {
        return Err(TextSeqError::EmptyText { which: "tail" });
    }
    let budget = cfg.max_len - 4; // [CLS] and three [SEP]
    let (head_len, tail_len, rel_len) =
        truncate_lengths(head.len(), tail.len(), Some(relation.len()), budget);

    let mut token_ids = Vec::with_capacity(4 + head_len + rel_len + tail_len);
    let mut segment_ids = Vec::with_capacity(token_ids.capacity());
    token_ids.push(TokenId::CLS);
    segment_ids.push(SEGMENT_A);
    token_ids.extend_from_slice(&head[..head_len]);
    segment_ids.extend(std::iter::repeat(SEGMENT_A).take(head_len));
    token_ids.push(TokenId::SEP);
    segment_ids.push(SEGMENT_A);
    token_ids.extend_from_slice(&relation[..rel_len]);
    segment_ids.extend(std::iter::repeat(SEGMENT_B).take(rel_len));
    token_ids.push(TokenId::SEP);
    segment_ids.push(SEGMENT_B);
    token_ids.extend_from_slice(&tail[..tail_len]);
    segment_ids.extend(std::iter::repeat(SEGMENT_A).take(tail_len));
    token_ids.push(TokenId::SEP);
    segment_ids.push(SEGMENT_A);

    Ok(finish(token_ids, segment_ids, SeqKind::Triple))
}

/// Packs a `(head, tail)` entity pair.
pub fn pack_pair(
    vocab: &Vocabulary,
    head_text: &str,
    tail_text: &str,
    cfg: &PackingConfig,
) -> Result<PackedSequence, TextSeqError> {
    let head = vocab.tokenize(head_text);
    let tail = vocab.tokenize(tail_text);
    pack_pair_tokens(&head, &tail, cfg)
}

pub fn pack_pair_tokens(
    head: &[TokenId],
    tail: &[TokenId],
    cfg: &PackingConfig,
) -> Result<PackedSequence, TextSeqError> {
    if cfg.max_len < 5 {
        return Err(TextSeqError::MaxLenTooSmall {
            max_len: cfg.max_len,
            needed: 5,
        });
    }
    if head.is_empty() {
        return Err(TextSeqError::EmptyText { which: "head" });
    }
    if tail.is_empty() {
        return Err(TextSeqError::EmptyText { which: "tail" });
    }
    let budget = cfg.max_len - 3; // [CLS] and two [SEP]
    let (head_len, tail_len, _) = truncate_lengths(head.len(), tail.len(), None, budget);

    let mut token_ids = Vec::with_capacity(3 + head_len + tail_len);
    let mut segment_ids = Vec::with_capacity(token_ids.capacity());
    token_ids.push(TokenId::CLS);
    segment_ids.push(SEGMENT_A);
    token_ids.extend_from_slice(&head[..head_len]);
    segment_ids.extend(std::iter::repeat(SEGMENT_A).take(head_len));
    token_ids.push(TokenId::SEP);
    segment_ids.push(SEGMENT_A);
    token_ids.extend_from_slice(&tail[..tail_len]);
    segment_ids.extend(std::iter::repeat(SEGMENT_B).take(tail_len));
    token_ids.push(TokenId::SEP);
    segment_ids.push(SEGMENT_B);

    Ok(finish(token_ids, segment_ids, SeqKind::Pair))
}

/// Longest-first truncation: trim the currently longest entity span (head on
/// ties) until the budget fits; the relation is touched only after both
/// entities are down to a single token.
fn truncate_lengths(
    mut head: usize,
    mut tail: usize,
    relation: Option<usize>,
    budget: usize,
) -> (usize, usize, usize) {
    let mut rel = relation.unwrap_or(0);
    while head + tail + rel > budget {
        if head > 1 && head >= tail {
            head -= 1;
        } else if tail > 1 {
            tail -= 1;
        } else if rel > 1 {
            rel -= 1;
        } else {
            break;
        }
    }
    (head, tail, rel)
}

fn finish(token_ids: Vec<TokenId>, segment_ids: Vec<u8>, kind: SeqKind) -> PackedSequence {
    let len = token_ids.len();
    PackedSequence {
        token_ids,
        segment_ids,
        position_ids: (0..len as u32).collect(),
        attention_mask: vec![1; len],
        kind,
        label: None,
    }
}

/// Pretokenized entity and relation texts for a whole graph, so batch scoring
/// does not re-run the tokenizer per candidate.
#[derive(Clone, Debug)]
pub struct TextIndex {
    pub entity_tokens: Vec<Vec<TokenId>>,
    pub relation_tokens: Vec<Vec<TokenId>>,
}

impl TextIndex {
    pub fn build(kg: &KnowledgeGraph, vocab: &Vocabulary) -> Self {
        Self {
            entity_tokens: kg
                .entities()
                .iter()
                .map(|e| vocab.tokenize(&e.text))
                .collect(),
            relation_tokens: kg
                .relations()
                .iter()
                .map(|r| vocab.tokenize(&r.text))
                .collect(),
        }
    }

    pub fn pack_triple(
        &self,
        t: crate::store::Triple,
        cfg: &PackingConfig,
    ) -> Result<PackedSequence, TextSeqError> {
        pack_triple_tokens(
            &self.entity_tokens[t.head.index()],
            &self.relation_tokens[t.relation.index()],
            &self.entity_tokens[t.tail.index()],
            cfg,
        )
    }

    pub fn pack_pair(
        &self,
        head: crate::store::EntityId,
        tail: crate::store::EntityId,
        cfg: &PackingConfig,
    ) -> Result<PackedSequence, TextSeqError> {
        pack_pair_tokens(
            &self.entity_tokens[head.index()],
            &self.entity_tokens[tail.index()],
            cfg,
        )
    }
}
