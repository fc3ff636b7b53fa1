//! Data pool ingestion.
//!
//! A pool is read from JSONL, one record per line. Every record is rendered to a
//! deterministic byte payload (`role: content\n` per message) which is what the
//! compressor sees. Preference data ("chosen"/"rejected" pairs) is rendered as a
//! single atomic sample so that a pair is always selected or dropped together.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separator placed between the rendered chosen and rejected halves of a pair.
pub const PAIR_SEPARATOR: &[u8] = b"\n\n";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("input contains no records")]
    Empty,
    #[error("record has no messages")]
    NoMessages,
    #[error("message role label is empty")]
    EmptyRole,
    #[error("invalid budget {0:?}: expected UNIT:AMOUNT with UNIT in samples|bytes|tokens and AMOUNT >= 1")]
    BadBudget(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Role {
    System,
    User,
    Assistant,
    Other(String),
}

impl Role {
    pub fn parse(label: &str) -> Result<Self, CorpusError> {
        match label {
            "" => Err(CorpusError::EmptyRole),
            "system" => Ok(Role::System),
            "user" => Ok(Role::User),
            "assistant" => Ok(Role::Assistant),
            other => Ok(Role::Other(other.to_string())),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Other(label) => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Pair,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Single => "single",
            Mode::Pair => "pair",
        })
    }
}

/// How records are turned into compressor input. Only the plain
/// `role: content` layout exists today.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderTemplate {
    #[default]
    RoleContent,
}

/// A parsed input record before rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Single {
        id: Option<String>,
        messages: Vec<Message>,
        tokens: Option<u64>,
    },
    Pair {
        id: Option<String>,
        chosen: Vec<Message>,
        rejected: Vec<Message>,
        tokens: Option<u64>,
    },
}

impl Record {
    pub fn id(&self) -> Option<&str> {
        match self {
            Record::Single { id, .. } | Record::Pair { id, .. } => id.as_deref(),
        }
    }

    pub fn tokens(&self) -> Option<u64> {
        match self {
            Record::Single { tokens, .. } | Record::Pair { tokens, .. } => *tokens,
        }
    }
}

#[derive(Deserialize)]
struct RawMessage {
    role: String,
    content: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Number(serde_json::Number),
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<RawId>,
    messages: Option<Vec<RawMessage>>,
    chosen: Option<Vec<RawMessage>>,
    rejected: Option<Vec<RawMessage>>,
    tokens: Option<u64>,
}

fn convert_messages(raw: Vec<RawMessage>) -> Result<Vec<Message>, String> {
    raw.into_iter()
        .map(|m| {
            Role::parse(&m.role)
                .map(|role| Message::new(role, m.content))
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// Parses one JSONL line into a [`Record`] for the given mode. The returned
/// error string is a human readable reason; callers attach the line number.
pub fn parse_record(line: &str, mode: Mode) -> Result<Record, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let id = raw.id.map(|id| match id {
        RawId::Text(s) => s,
        RawId::Number(n) => n.to_string(),
    });
    if raw.tokens == Some(0) {
        return Err("tokens must be >= 1".into());
    }
    match mode {
        Mode::Single => {
            let messages = raw.messages.ok_or("missing \"messages\"")?;
            if messages.is_empty() {
                return Err("\"messages\" is empty".into());
            }
            Ok(Record::Single {
                id,
                messages: convert_messages(messages)?,
                tokens: raw.tokens,
            })
        }
        Mode::Pair => {
            let chosen = raw.chosen.ok_or("missing \"chosen\"")?;
            let rejected = raw.rejected.ok_or("missing \"rejected\"")?;
            if chosen.is_empty() || rejected.is_empty() {
                return Err("\"chosen\" and \"rejected\" must both be non-empty".into());
            }
            Ok(Record::Pair {
                id,
                chosen: convert_messages(chosen)?,
                rejected: convert_messages(rejected)?,
                tokens: raw.tokens,
            })
        }
    }
}

fn render_messages(messages: &[Message], out: &mut Vec<u8>) -> Result<(), CorpusError> {
    if messages.is_empty() {
        return Err(CorpusError::NoMessages);
    }
    for m in messages {
        out.extend_from_slice(m.role.label().as_bytes());
        out.extend_from_slice(b": ");
        out.extend_from_slice(m.content.as_bytes());
        out.push(b'\n');
    }
    Ok(())
}

/// Renders a record into the byte payload that gets compressed.
pub fn render_sample(record: &Record, template: RenderTemplate) -> Result<Vec<u8>, CorpusError> {
    let RenderTemplate::RoleContent = template;
    let mut out = Vec::new();
    match record {
        Record::Single { messages, .. } => render_messages(messages, &mut out)?,
        Record::Pair {
            chosen, rejected, ..
        } => {
            render_messages(chosen, &mut out)?;
            out.extend_from_slice(PAIR_SEPARATOR);
            render_messages(rejected, &mut out)?;
        }
    }
    Ok(out)
}

/// Number of whitespace-delimited tokens, at least 1 for non-empty input.
pub fn whitespace_tokens(payload: &[u8]) -> u64 {
    let n = payload
        .split(|b| b.is_ascii_whitespace())
        .filter(|w| !w.is_empty())
        .count() as u64;
    if payload.is_empty() {
        0
    } else {
        n.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub payload: Vec<u8>,
    pub token_len: u64,
    pub source_index: usize,
    pub kind: Mode,
}

impl Sample {
    pub fn from_record(
        record: &Record,
        source_index: usize,
        template: RenderTemplate,
    ) -> Result<Self, CorpusError> {
        let payload = render_sample(record, template)?;
        let token_len = record
            .tokens()
            .unwrap_or_else(|| whitespace_tokens(&payload));
        let kind = match record {
            Record::Single { .. } => Mode::Single,
            Record::Pair { .. } => Mode::Pair,
        };
        Ok(Self {
            id: record
                .id()
                .map(str::to_string)
                .unwrap_or_else(|| source_index.to_string()),
            payload,
            token_len,
            source_index,
            kind,
        })
    }

    pub fn byte_len(&self) -> u64 {
        self.payload.len() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetUnit {
    Samples,
    Bytes,
    Tokens,
}

impl fmt::Display for BudgetUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BudgetUnit::Samples => "samples",
            BudgetUnit::Bytes => "bytes",
            BudgetUnit::Tokens => "tokens",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub unit: BudgetUnit,
    pub amount: u64,
}

impl BudgetSpec {
    pub fn new(unit: BudgetUnit, amount: u64) -> Result<Self, CorpusError> {
        if amount == 0 {
            return Err(CorpusError::BadBudget(format!("{unit}:0")));
        }
        Ok(Self { unit, amount })
    }

    pub fn samples(amount: u64) -> Self {
        Self::new(BudgetUnit::Samples, amount).expect("sample budget must be >= 1")
    }
}

impl FromStr for BudgetSpec {
    type Err = CorpusError;

    /// Parses `UNIT:AMOUNT`, e.g. `tokens:250000`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::BadBudget(s.to_string());
        let (unit, amount) = s.split_once(':').ok_or_else(bad)?;
        let unit = match unit {
            "samples" => BudgetUnit::Samples,
            "bytes" => BudgetUnit::Bytes,
            "tokens" => BudgetUnit::Tokens,
            _ => return Err(bad()),
        };
        let amount: u64 = amount.parse().map_err(|_| bad())?;
        Self::new(unit, amount).map_err(|_| bad())
    }
}

impl fmt::Display for BudgetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.unit, self.amount)
    }
}

pub fn budget_weight(sample: &Sample, unit: BudgetUnit) -> u64 {
    match unit {
        BudgetUnit::Samples => 1,
        BudgetUnit::Bytes => sample.byte_len(),
        BudgetUnit::Tokens => sample.token_len,
    }
}

/// Immutable, ordered collection of samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    samples: Vec<Sample>,
    /// Original JSONL line for each sample, used when writing selections back out.
    records: Vec<String>,
    mode: Mode,
    total_bytes: u64,
    total_tokens: u64,
}

impl Pool {
    /// Builds a pool from already rendered samples. Ids must be unique and
    /// `source_index` must match position.
    pub fn from_samples(
        samples: Vec<Sample>,
        records: Vec<String>,
        mode: Mode,
    ) -> Result<Self, CorpusError> {
        if samples.is_empty() {
            return Err(CorpusError::Empty);
        }
        assert_eq!(samples.len(), records.len());
        let mut seen = HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            debug_assert_eq!(s.source_index, i);
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: s.id.clone(),
                });
            }
        }
        let total_bytes = samples.iter().map(Sample::byte_len).sum();
        let total_tokens = samples.iter().map(|s| s.token_len).sum();
        Ok(Self {
            samples,
            records,
            mode,
            total_bytes,
            total_tokens,
        })
    }

    /// Parses a whole JSONL document. Blank lines are rejected like any other
    /// malformed line; only a single trailing newline is tolerated.
    pub fn parse_jsonl(
        text: &str,
        mode: Mode,
        template: RenderTemplate,
    ) -> Result<Self, CorpusError> {
        let mut samples = Vec::new();
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            let record = parse_record(line, mode).map_err(|reason| CorpusError::Malformed {
                line: lineno,
                reason,
            })?;
            let sample =
                Sample::from_record(&record, samples.len(), template).map_err(|e| {
                    CorpusError::Malformed {
                        line: lineno,
                        reason: e.to_string(),
                    }
                })?;
            if !seen.insert(sample.id.clone()) {
                return Err(CorpusError::DuplicateId {
                    line: lineno,
                    id: sample.id,
                });
            }
            samples.push(sample);
            records.push(line.to_string());
        }
        Self::from_samples(samples, records, mode)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn records(&self) -> &[String] {
        &self.records
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_bytes
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn total_weight(&self, unit: BudgetUnit) -> u64 {
        match unit {
            BudgetUnit::Samples => self.samples.len() as u64,
            BudgetUnit::Bytes => self.total_bytes,
            BudgetUnit::Tokens => self.total_tokens,
        }
    }

    pub fn get(&self, index: usize) -> &Sample {
        &self.samples[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.samples.iter().position(|s| s.id == id)
    }
}

pub fn load_pool(
    path: impl AsRef<Path>,
    mode: Mode,
    template: RenderTemplate,
) -> Result<Pool, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Pool::parse_jsonl(&text, mode, template)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(messages: Vec<Message>) -> Record {
        Record::Single {
            id: None,
            messages,
            tokens: None,
        }
    }

    #[test]
    fn renders_role_content_lines() {
        let r = single(vec![
            Message::new(Role::User, "hi"),
            Message::new(Role::Assistant, "hello"),
        ]);
        let bytes = render_sample(&r, RenderTemplate::RoleContent).unwrap();
        assert_eq!(bytes, b"user: hi\nassistant: hello\n");
    }

    #[test]
    fn renders_empty_content() {
        let r = single(vec![Message::new(Role::User, "")]);
        assert_eq!(
            render_sample(&r, RenderTemplate::RoleContent).unwrap(),
            b"user: \n"
        );
    }

    #[test]
    fn renders_pair_with_separator() {
        let r = Record::Pair {
            id: None,
            chosen: vec![Message::new(Role::Assistant, "a")],
            rejected: vec![Message::new(Role::Assistant, "b")],
            tokens: None,
        };
        assert_eq!(
            render_sample(&r, RenderTemplate::RoleContent).unwrap(),
            b"assistant: a\n\n\nassistant: b\n"
        );
    }

    #[test]
    fn zero_messages_is_an_error() {
        assert!(matches!(
            render_sample(&single(vec![]), RenderTemplate::RoleContent),
            Err(CorpusError::NoMessages)
        ));
    }

    #[test]
    fn custom_roles_keep_their_label() {
        let r = single(vec![Message::new(Role::parse("tool").unwrap(), "x")]);
        assert_eq!(
            render_sample(&r, RenderTemplate::RoleContent).unwrap(),
            b"tool: x\n"
        );
        assert!(Role::parse("").is_err());
    }

    #[test]
    fn budget_weights() {
        let line = r#"{"messages":[{"role":"user","content":"hi"},{"role":"assistant","content":"hello"}]}"#;
        let pool = Pool::parse_jsonl(line, Mode::Single, RenderTemplate::RoleContent).unwrap();
        let s = pool.get(0);
        assert_eq!(budget_weight(s, BudgetUnit::Samples), 1);
        assert_eq!(budget_weight(s, BudgetUnit::Bytes), 26);
        // "user:", "hi", "assistant:", "hello"
        assert_eq!(budget_weight(s, BudgetUnit::Tokens), 4);

        let line = r#"{"messages":[{"role":"user","content":"hi"}],"tokens":137}"#;
        let pool = Pool::parse_jsonl(line, Mode::Single, RenderTemplate::RoleContent).unwrap();
        assert_eq!(budget_weight(pool.get(0), BudgetUnit::Tokens), 137);
    }

    #[test]
    fn whitespace_token_floor() {
        assert_eq!(whitespace_tokens(b""), 0);
        assert_eq!(whitespace_tokens(b" \n"), 1);
        assert_eq!(whitespace_tokens(b"a  b\tc\n"), 3);
    }

    #[test]
    fn totals_and_synthesized_ids() {
        let text = concat!(
            r#"{"messages":[{"role":"user","content":"a"}]}"#,
            "\n",
            r#"{"id":"x","messages":[{"role":"user","content":"bb"}]}"#,
            "\n",
            r#"{"messages":[{"role":"user","content":"ccc"}],"extra":1}"#,
            "\n"
        );
        let pool = Pool::parse_jsonl(text, Mode::Single, RenderTemplate::RoleContent).unwrap();
        assert_eq!(pool.len(), 3);
        let ids: Vec<_> = pool.samples().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["0", "x", "2"]);
        let sum: u64 = pool.samples().iter().map(|s| s.payload.len() as u64).sum();
        assert_eq!(pool.total_bytes(), sum);
        assert_eq!(pool.total_bytes(), 8 + 9 + 10);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = Pool::parse_jsonl("{", Mode::Single, RenderTemplate::RoleContent).unwrap_err();
        assert!(err.to_string().starts_with("line 1: malformed record"), "{err}");

        let text = concat!(r#"{"messages":[{"role":"user","content":"a"}]}"#, "\n", "\n");
        let err = Pool::parse_jsonl(text, Mode::Single, RenderTemplate::RoleContent).unwrap_err();
        assert!(err.to_string().starts_with("line 2: malformed record"), "{err}");
    }

    #[test]
    fn duplicate_ids_and_empty_input_fail() {
        let text = concat!(
            r#"{"id":"a","messages":[{"role":"user","content":"1"}]}"#,
            "\n",
            r#"{"id":"a","messages":[{"role":"user","content":"2"}]}"#
        );
        assert!(matches!(
            Pool::parse_jsonl(text, Mode::Single, RenderTemplate::RoleContent),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
        assert!(matches!(
            Pool::parse_jsonl("", Mode::Single, RenderTemplate::RoleContent),
            Err(CorpusError::Empty)
        ));
    }

    #[test]
    fn pair_mode_requires_both_sides() {
        let ok = r#"{"chosen":[{"role":"assistant","content":"a"}],"rejected":[{"role":"assistant","content":"b"}]}"#;
        let pool = Pool::parse_jsonl(ok, Mode::Pair, RenderTemplate::RoleContent).unwrap();
        assert_eq!(pool.get(0).kind, Mode::Pair);
        assert_eq!(pool.get(0).payload, b"assistant: a\n\n\nassistant: b\n");

        let missing = r#"{"chosen":[{"role":"assistant","content":"a"}]}"#;
        assert!(Pool::parse_jsonl(missing, Mode::Pair, RenderTemplate::RoleContent).is_err());
        // single-mode records are not pairs
        let single = r#"{"messages":[{"role":"user","content":"a"}]}"#;
        assert!(Pool::parse_jsonl(single, Mode::Pair, RenderTemplate::RoleContent).is_err());
    }

    #[test]
    fn parses_budget_specs() {
        let b: BudgetSpec = "tokens:250000".parse().unwrap();
        assert_eq!(b.unit, BudgetUnit::Tokens);
        assert_eq!(b.amount, 250_000);
        assert_eq!(b.to_string(), "tokens:250000");
        for bad in ["samples:0", "samples", "pages:3", "bytes:-1", "bytes:x", ""] {
            assert!(bad.parse::<BudgetSpec>().is_err(), "{bad}");
        }
    }
}
