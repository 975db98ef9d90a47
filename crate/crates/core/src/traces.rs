//! Reasoning-trace records and the estimators computed from them.
//!
//! A trace file holds one JSON object per line, one line per sample:
//!
//! ```text
//! {"task_id":"t0","model":"Qwen3-8B","attn":"block-top-k","kv_budget":256,"max_new_tokens":32768,"sample_id":0,"gen_len":9123,"correct":true}
//! ```
//!
//! `kv_budget` is `null` for dense attention. Samples are grouped by task and
//! [`ConfigKey`]; groups with different `max_new_tokens` are never pooled.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{AttnVariant, CostError, GenLenStats};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("traces: cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("traces: line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("traces: line {line}: duplicate sample_id {sample_id} for task {task} under {key}")]
    DuplicateSample {
        line: usize,
        task: String,
        key: ConfigKey,
        sample_id: u64,
    },
    #[error("traces: no samples for task {task} under {key}")]
    MissingGroup { task: String, key: ConfigKey },
    #[error("traces: pass@k needs 1 <= k <= s and c <= s, got s={s}, c={c}, k={k}")]
    PassAtK { s: u64, c: u64, k: u64 },
    #[error("traces: k exceeds the sample count in {} group(s): {}", .0.len(), .0.join("; "))]
    KExceedsSamples(Vec<String>),
    #[error("traces: {0}")]
    Write(#[from] io::Error),
    #[error(transparent)]
    Cost(#[from] CostError),
}

pub const TRACE_FIELDS: [&str; 8] = [
    "task_id",
    "model",
    "attn",
    "kv_budget",
    "max_new_tokens",
    "sample_id",
    "gen_len",
    "correct",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub task_id: String,
    pub model: String,
    pub attn: AttnVariant,
    pub kv_budget: Option<u64>,
    pub max_new_tokens: u64,
    pub sample_id: u64,
    pub gen_len: u64,
    pub correct: bool,
}

impl SampleRecord {
    pub fn key(&self) -> ConfigKey {
        ConfigKey {
            model: self.model.clone(),
            attn: self.attn,
            kv_budget: self.kv_budget,
            max_new_tokens: self.max_new_tokens,
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.task_id.is_empty() {
            return Err("task_id is empty".into());
        }
        if self.model.is_empty() {
            return Err("model is empty".into());
        }
        if self.max_new_tokens == 0 {
            return Err("max_new_tokens must be >= 1".into());
        }
        if self.gen_len > self.max_new_tokens {
            return Err(format!(
                "gen_len {} exceeds max_new_tokens {}",
                self.gen_len, self.max_new_tokens
            ));
        }
        match (self.attn, self.kv_budget) {
            (AttnVariant::Dense, Some(b)) => Err(format!("dense record carries kv_budget {b}; expected null")),
            (v, None) if v.is_sparse() => Err(format!("{v} record needs a kv_budget")),
            (_, Some(0)) => Err("kv_budget must be >= 1".into()),
            _ => Ok(()),
        }
    }
}

/// Everything about a sample's configuration except the task.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ConfigKey {
    pub model: String,
    pub attn: AttnVariant,
    pub kv_budget: Option<u64>,
    pub max_new_tokens: u64,
}

impl fmt::Display for ConfigKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.model, self.attn)?;
        if let Some(b) = self.kv_budget {
            write!(f, "/B={b}")?;
        }
        write!(f, "/n={}", self.max_new_tokens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub sample_id: u64,
    pub gen_len: u64,
    pub correct: bool,
}

/// Samples of one (task, configuration) pair, sorted by `sample_id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    samples: Vec<Sample>,
}

impl Group {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> u64 {
        self.samples.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn correct(&self) -> u64 {
        self.samples.iter().filter(|s| s.correct).count() as u64
    }

    pub fn moments(&self) -> GenLenStats {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().map(|s| s.gen_len as f64).sum::<f64>() / n;
        let second = self
            .samples
            .iter()
            .map(|s| (s.gen_len as f64) * (s.gen_len as f64))
            .sum::<f64>()
            / n;
        GenLenStats {
            mean,
            second_moment: second,
            count: self.len(),
        }
    }

    pub fn pass_at_k(&self, k: u64) -> Result<f64, TraceError> {
        pass_at_k(self.len(), self.correct(), k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestOptions {
    /// Reject records carrying fields outside [`TRACE_FIELDS`].
    pub strict: bool,
}

/// Validated samples grouped by `(task_id, ConfigKey)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceSet {
    groups: BTreeMap<(String, ConfigKey), Group>,
}

impl TraceSet {
    pub fn ingest(path: &Path, opts: IngestOptions) -> Result<Self, TraceError> {
        let file = File::open(path).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::ingest_reader(BufReader::new(file), opts).map_err(|e| match e {
            TraceError::Write(source) => TraceError::Io {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn ingest_reader<R: BufRead>(reader: R, opts: IngestOptions) -> Result<Self, TraceError> {
        let mut builder = Builder::default();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = parse_line(&line, opts).map_err(|message| TraceError::Malformed { line: line_no, message })?;
            builder.push(record, line_no)?;
        }
        Ok(builder.finish())
    }

    pub fn from_records<I: IntoIterator<Item = SampleRecord>>(records: I) -> Result<Self, TraceError> {
        let mut builder = Builder::default();
        for (idx, record) in records.into_iter().enumerate() {
            builder.push(record, idx + 1)?;
        }
        Ok(builder.finish())
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_records(&self) -> usize {
        self.groups.values().map(|g| g.samples.len()).sum()
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, &ConfigKey, &Group)> {
        self.groups.iter().map(|((t, k), g)| (t.as_str(), k, g))
    }

    pub fn group(&self, task: &str, key: &ConfigKey) -> Result<&Group, TraceError> {
        self.groups
            .get(&(task.to_string(), key.clone()))
            .ok_or_else(|| TraceError::MissingGroup {
                task: task.to_string(),
                key: key.clone(),
            })
    }

    /// Sorted, deduplicated task ids, optionally restricted to one model.
    pub fn tasks(&self, model: Option<&str>) -> Vec<String> {
        let mut out: Vec<String> = self
            .groups
            .keys()
            .filter(|(_, k)| model.is_none_or(|m| k.model == m))
            .map(|(t, _)| t.clone())
            .collect();
        out.dedup();
        out
    }

    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = self.groups.keys().map(|(_, k)| k.model.clone()).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn length_moments(&self, task: &str, key: &ConfigKey) -> Result<GenLenStats, TraceError> {
        Ok(self.group(task, key)?.moments())
    }

    /// All records in group order, samples ascending by id.
    pub fn records(&self) -> impl Iterator<Item = SampleRecord> + '_ {
        self.groups.iter().flat_map(|((task, key), g)| {
            g.samples.iter().map(move |s| SampleRecord {
                task_id: task.clone(),
                model: key.model.clone(),
                attn: key.attn,
                kv_budget: key.kv_budget,
                max_new_tokens: key.max_new_tokens,
                sample_id: s.sample_id,
                gen_len: s.gen_len,
                correct: s.correct,
            })
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), TraceError> {
        for record in self.records() {
            serde_json::to_writer(&mut out, &record).map_err(io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn parse_line(line: &str, opts: IngestOptions) -> Result<SampleRecord, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("expected a JSON object")?;
    if opts.strict {
        if let Some(extra) = obj.keys().find(|k| !TRACE_FIELDS.contains(&k.as_str())) {
            return Err(format!("unknown field `{extra}`"));
        }
    }
    for field in TRACE_FIELDS {
        if !obj.contains_key(field) {
            return Err(format!("missing field `{field}`"));
        }
    }
    let record: SampleRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
    record.check()?;
    Ok(record)
}

#[derive(Default)]
struct Builder {
    groups: BTreeMap<(String, ConfigKey), Vec<Sample>>,
}

impl Builder {
    fn push(&mut self, record: SampleRecord, line: usize) -> Result<(), TraceError> {
        record
            .check()
            .map_err(|message| TraceError::Malformed { line, message })?;
        let key = record.key();
        let slot = self.groups.entry((record.task_id.clone(), key.clone())).or_default();
        if slot.iter().any(|s| s.sample_id == record.sample_id) {
            return Err(TraceError::DuplicateSample {
                line,
                task: record.task_id,
                key,
                sample_id: record.sample_id,
            });
        }
        slot.push(Sample {
            sample_id: record.sample_id,
            gen_len: record.gen_len,
            correct: record.correct,
        });
        Ok(())
    }

    fn finish(self) -> TraceSet {
        let groups = self
            .groups
            .into_iter()
            .map(|(k, mut samples)| {
                samples.sort_by_key(|s| s.sample_id);
                (k, Group { samples })
            })
            .collect();
        TraceSet { groups }
    }
}

/// Unbiased Pass@K from `s` samples of which `c` are correct:
/// `1 - C(s - c, k) / C(s, k)`, evaluated as a running product.
pub fn pass_at_k(s: u64, c: u64, k: u64) -> Result<f64, TraceError> {
    if k == 0 || k > s || c > s {
        return Err(TraceError::PassAtK { s, c, k });
    }
    if s - c < k {
        return Ok(1.0);
    }
    let mut miss = 1.0;
    for i in 0..k {
        miss *= 1.0 - c as f64 / (s - i) as f64;
    }
    Ok(1.0 - miss)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRateRow {
    pub task_id: String,
    pub key: ConfigKey,
    pub k: u64,
    pub samples: u64,
    pub correct: u64,
    pub pass_at_k: f64,
}

/// Pass@K for every group and every `k`, ordered by task, configuration, then `k`.
pub fn solve_rate_table(ts: &TraceSet, ks: &[u64]) -> Result<Vec<SolveRateRow>, TraceError> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let too_big: Vec<String> = ts
        .groups()
        .filter_map(|(task, key, g)| {
            let max_k = *ks.last()?;
            (max_k > g.len()).then(|| format!("{task} {key} has S={} < k={max_k}", g.len()))
        })
        .collect();
    if !too_big.is_empty() {
        return Err(TraceError::KExceedsSamples(too_big));
    }
    let mut rows = Vec::with_capacity(ts.num_groups() * ks.len());
    for (task, key, g) in ts.groups() {
        for &k in &ks {
            rows.push(SolveRateRow {
                task_id: task.to_string(),
                key: key.clone(),
                k,
                samples: g.len(),
                correct: g.correct(),
                pass_at_k: g.pass_at_k(k)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(task: &str, sample_id: u64, gen_len: u64, correct: bool) -> SampleRecord {
        SampleRecord {
            task_id: task.into(),
            model: "m".into(),
            attn: AttnVariant::Dense,
            kv_budget: None,
            max_new_tokens: 100,
            sample_id,
            gen_len,
            correct,
        }
    }

    fn line(r: &SampleRecord) -> String {
        serde_json::to_string(r).unwrap()
    }

    fn ingest_str(text: &str, strict: bool) -> Result<TraceSet, TraceError> {
        TraceSet::ingest_reader(text.as_bytes(), IngestOptions { strict })
    }

    // Counts the K-subsets of {0..s} that contain at least one of the first c items.
    fn brute_pass(s: u64, c: u64, k: u64) -> f64 {
        let (mut hit, mut total) = (0u64, 0u64);
        for mask in 0u32..(1 << s) {
            if u64::from(mask.count_ones()) != k {
                continue;
            }
            total += 1;
            if (0..c).any(|i| mask & (1 << i) != 0) {
                hit += 1;
            }
        }
        hit as f64 / total as f64
    }

    #[test]
    fn groups_and_counts() {
        let mut text = String::new();
        for t in ["a", "b"] {
            for i in 0..4 {
                text += &line(&rec(t, i, 10 * i, i % 2 == 0));
                text.push('\n');
            }
        }
        let ts = ingest_str(&text, true).unwrap();
        assert_eq!(ts.num_groups(), 2);
        assert!(ts.groups().all(|(_, _, g)| g.len() == 4));
        assert_eq!(ts.tasks(None), vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn invariant_violation_reports_line() {
        let text = format!("{}\n{}\n", line(&rec("a", 0, 5, true)), line(&rec("a", 1, 101, true)));
        match ingest_str(&text, false) {
            Err(TraceError::Malformed { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("gen_len"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_duplicate_lines() {
        assert!(matches!(ingest_str("{not json\n", false), Err(TraceError::Malformed { line: 1, .. })));
        let text = format!("{}\n{}\n", line(&rec("a", 3, 5, true)), line(&rec("a", 3, 6, true)));
        assert!(matches!(
            ingest_str(&text, false),
            Err(TraceError::DuplicateSample { line: 2, sample_id: 3, .. })
        ));
        let mut sparse = rec("a", 0, 5, true);
        sparse.attn = AttnVariant::BlockTopK;
        assert!(ingest_str(&line(&sparse), false).is_err());
        let missing = r#"{"task_id":"a","model":"m","attn":"dense","max_new_tokens":10,"sample_id":0,"gen_len":1,"correct":true}"#;
        assert!(ingest_str(missing, false).is_err());
    }

    #[test]
    fn unknown_fields_only_rejected_when_strict() {
        let extra = r#"{"task_id":"a","model":"m","attn":"dense","kv_budget":null,"max_new_tokens":10,"sample_id":0,"gen_len":1,"correct":true,"grader":"x"}"#;
        assert!(ingest_str(extra, false).is_ok());
        match ingest_str(extra, true) {
            Err(TraceError::Malformed { message, .. }) => assert!(message.contains("grader")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_valid_but_queries_fail() {
        let ts = ingest_str("", true).unwrap();
        assert!(ts.is_empty());
        let key = rec("a", 0, 0, true).key();
        assert!(matches!(ts.length_moments("a", &key), Err(TraceError::MissingGroup { .. })));
    }

    #[test]
    fn moments_examples() {
        let ts = TraceSet::from_records((0..3).map(|i| rec("a", i, 10, true))).unwrap();
        let key = rec("a", 0, 0, true).key();
        let m = ts.length_moments("a", &key).unwrap();
        assert_eq!((m.mean, m.second_moment, m.count), (10.0, 100.0, 3));
        let ts = TraceSet::from_records([rec("a", 0, 0, true), rec("a", 1, 20, true)]).unwrap();
        let m = ts.length_moments("a", &key).unwrap();
        assert_eq!((m.mean, m.second_moment, m.count), (10.0, 200.0, 2));
        let ts = TraceSet::from_records([rec("a", 0, 37, true)]).unwrap();
        let m = ts.length_moments("a", &key).unwrap();
        assert_eq!((m.mean, m.second_moment, m.count), (37.0, 1369.0, 1));
    }

    #[test]
    fn pass_at_k_examples() {
        assert!((pass_at_k(4, 2, 2).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(pass_at_k(7, 7, 3).unwrap(), 1.0);
        assert_eq!(pass_at_k(7, 0, 3).unwrap(), 0.0);
        assert!((pass_at_k(10, 3, 1).unwrap() - 0.3).abs() < 1e-15);
        assert!(pass_at_k(3, 1, 4).is_err());
        assert!(pass_at_k(3, 4, 1).is_err());
        assert!(pass_at_k(3, 1, 0).is_err());
    }

    #[test]
    fn pass_at_k_matches_enumeration() {
        for s in 1..=8 {
            for c in 0..=s {
                for k in 1..=s {
                    let got = pass_at_k(s, c, k).unwrap();
                    assert!((got - brute_pass(s, c, k)).abs() <= 1e-12, "s={s} c={c} k={k}");
                }
            }
        }
    }

    #[test]
    fn solve_rate_rows() {
        let ts = TraceSet::from_records((0..4).map(|i| rec("a", i, 10, i < 2))).unwrap();
        let rows = solve_rate_table(&ts, &[2, 1]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].k, 1);
        assert_eq!(rows[0].pass_at_k, 0.5);
        assert_eq!(rows[1].pass_at_k, pass_at_k(4, 2, 2).unwrap());
        assert!(matches!(solve_rate_table(&ts, &[5]), Err(TraceError::KExceedsSamples(v)) if v.len() == 1));
        let all = TraceSet::from_records((0..4).map(|i| rec("a", i, 10, true))).unwrap();
        assert!(solve_rate_table(&all, &[1, 2, 3, 4]).unwrap().iter().all(|r| r.pass_at_k == 1.0));
    }

    #[test]
    fn mixed_n_not_pooled() {
        let mut other = rec("a", 0, 10, true);
        other.max_new_tokens = 200;
        let ts = TraceSet::from_records([rec("a", 0, 10, true), other]).unwrap();
        assert_eq!(ts.num_groups(), 2);
    }

    fn arb_record() -> impl Strategy<Value = SampleRecord> {
        (
            0u8..3,
            0u8..2,
            prop::sample::select(vec![None, Some(32u64), Some(64)]),
            prop::sample::select(vec![64u64, 128]),
            0u64..40,
            0u64..=64,
            any::<bool>(),
        )
            .prop_map(|(t, m, b, n, id, len, ok)| SampleRecord {
                task_id: format!("task-{t}"),
                model: format!("model-{m}"),
                attn: if b.is_some() { AttnVariant::BlockTopK } else { AttnVariant::Dense },
                kv_budget: b,
                max_new_tokens: n,
                sample_id: id,
                gen_len: len,
                correct: ok,
            })
    }

    fn dedup_ids(mut records: Vec<SampleRecord>) -> Vec<SampleRecord> {
        let mut seen = std::collections::BTreeSet::new();
        records.retain(|r| seen.insert((r.task_id.clone(), r.key(), r.sample_id)));
        records
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(records in prop::collection::vec(arb_record(), 0..80)) {
            let ts = TraceSet::from_records(dedup_ids(records)).unwrap();
            let mut buf = Vec::new();
            ts.write_jsonl(&mut buf).unwrap();
            let back = TraceSet::ingest_reader(buf.as_slice(), IngestOptions { strict: true }).unwrap();
            prop_assert_eq!(&back, &ts);
        }

        #[test]
        fn second_moment_dominates(records in prop::collection::vec(arb_record(), 1..80)) {
            let ts = TraceSet::from_records(dedup_ids(records)).unwrap();
            for (_, _, g) in ts.groups() {
                let m = g.moments();
                prop_assert!(m.second_moment >= m.mean * m.mean * (1.0 - 1e-12));
            }
        }

        #[test]
        fn pass_at_k_monotone(s in 1u64..60, c in 0u64..60, k in 1u64..60) {
            let c = c.min(s);
            let k = k.min(s);
            let p = pass_at_k(s, c, k).unwrap();
            if k < s {
                prop_assert!(pass_at_k(s, c, k + 1).unwrap() >= p - 1e-15);
            }
            if c < s {
                prop_assert!(pass_at_k(s, c + 1, k).unwrap() >= p - 1e-15);
            }
            prop_assert_eq!(pass_at_k(s, c, s).unwrap() == 1.0, c >= 1);
        }
    }
}
