//! Output plumbing: stderr logging gated by `KGSEQ_LOG`, atomic file writes,
//! and the metrics JSON schema.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Error = 0,
    Warn = 1,
    Info = 2,
    Debug = 3,
}

pub fn log_level() -> Level {
    match std::env::var("KGSEQ_LOG").as_deref() {
        Ok("error") => Level::Error,
        Ok("info") => Level::Info,
        Ok("debug") => Level::Debug,
        _ => Level::Warn,
    }
}

macro_rules! log_at {
    ($level:expr, $tag:expr, $($arg:tt)*) => {
        if crate::output::log_level() >= $level {
            eprintln!("[kgseq {}] {}", $tag, format!($($arg)*));
        }
    };
}

macro_rules! info {
    ($($arg:tt)*) => { log_at!(crate::output::Level::Info, "info", $($arg)*) };
}

macro_rules! warn_log {
    ($($arg:tt)*) => { log_at!(crate::output::Level::Warn, "warn", $($arg)*) };
}

/// Writes through a temp file + rename so interrupted runs never leave a
/// partial file at the target path.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Machine-readable result of a ranking evaluation.
#[derive(Debug, Serialize)]
pub struct MetricsJson {
    pub task: String,
    pub split: String,
    pub filtered: bool,
    pub mean_rank: f64,
    pub hits: std::collections::BTreeMap<String, f64>,
    pub num_queries: usize,
    pub wall_ms: u128,
}

impl MetricsJson {
    pub fn from_report(
        task: &str,
        split: &str,
        filtered: bool,
        report: &kgseq::eval::RankingReport,
        wall_ms: u128,
    ) -> Self {
        Self {
            task: task.to_string(),
            split: split.to_string(),
            filtered,
            mean_rank: report.mean_rank,
            hits: report
                .hits_at_k
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            num_queries: report.num_queries,
            wall_ms,
        }
    }
}

/// Per-query CSV: raw head/relation/tail identifiers, corrupted side, rank.
pub fn per_query_csv(kg: &kgseq::store::KnowledgeGraph, report: &kgseq::eval::RankingReport) -> String {
    let mut out = String::from("head,relation,tail,side,rank\n");
    for rec in &report.records {
        let t = rec.triple;
        out.push_str(&format!(
            "{},{},{},{:?},{}\n",
            kg.entities()[t.head.index()].raw_id,
            kg.relations()[t.relation.index()].raw_id,
            kg.entities()[t.tail.index()].raw_id,
            rec.side,
            rec.rank
        ));
    }
    out
}
