//! Session ingestion, label binarization, turn alignment and windowing.
//!
//! A session file holds one JSON record per line:
//!
//! ```text
//! {"session_id": "s1", "client_id": "c1",
//!  "subscores": {"ag": 4, "ap": 3, ...},
//!  "turns": [{"speaker": "therapist", "embedding": [0.1, ...], "text": "..."}, ...]}
//! ```
//!
//! Turns are aligned into a therapist matrix `X` and a client matrix `Y`
//! (one column per therapist-to-client exchange) and then cut into
//! overlapping windows of `w` transition steps.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sub-score threshold for a high-competence label.
pub const SUBSCORE_THRESHOLD: u8 = 4;
/// Total-score threshold for a high-competence session.
pub const TOTAL_THRESHOLD: u32 = 40;
/// Largest value a single sub-score can take.
pub const SUBSCORE_MAX: u8 = 6;

/// The eleven rating sub-scores plus the summary total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKey {
    Ag,
    Ap,
    Co,
    Fb,
    Gd,
    Hw,
    Ip,
    Cb,
    Pt,
    Sc,
    Un,
    Ctrs,
}

impl ScoreKey {
    /// Sub-score keys in canonical order (excludes the total).
    pub const SUBSCORES: [ScoreKey; 11] = [
        ScoreKey::Ag,
        ScoreKey::Ap,
        ScoreKey::Co,
        ScoreKey::Fb,
        ScoreKey::Gd,
        ScoreKey::Hw,
        ScoreKey::Ip,
        ScoreKey::Cb,
        ScoreKey::Pt,
        ScoreKey::Sc,
        ScoreKey::Un,
    ];

    /// All twelve label keys, total last.
    pub const ALL: [ScoreKey; 12] = [
        ScoreKey::Ag,
        ScoreKey::Ap,
        ScoreKey::Co,
        ScoreKey::Fb,
        ScoreKey::Gd,
        ScoreKey::Hw,
        ScoreKey::Ip,
        ScoreKey::Cb,
        ScoreKey::Pt,
        ScoreKey::Sc,
        ScoreKey::Un,
        ScoreKey::Ctrs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKey::Ag => "ag",
            ScoreKey::Ap => "ap",
            ScoreKey::Co => "co",
            ScoreKey::Fb => "fb",
            ScoreKey::Gd => "gd",
            ScoreKey::Hw => "hw",
            ScoreKey::Ip => "ip",
            ScoreKey::Cb => "cb",
            ScoreKey::Pt => "pt",
            ScoreKey::Sc => "sc",
            ScoreKey::Un => "un",
            ScoreKey::Ctrs => "ctrs",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ScoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreKey::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Validation(format!("unknown score key '{s}'")))
    }
}

/// The eleven integer sub-scores of one session, each in `0..=6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subscores([u8; 11]);

impl Subscores {
    /// Validates a raw key/value map. Every sub-score key must appear exactly
    /// once with a value in range; unknown keys and `ctrs` are rejected.
    pub fn from_map<'a, I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, i64)>,
    {
        let mut values: [Option<u8>; 11] = [None; 11];
        for (key, value) in entries {
            let k: ScoreKey = key.parse()?;
            if k == ScoreKey::Ctrs {
                return Err(Error::Validation(
                    "'ctrs' is derived from the sub-scores and cannot be given directly".into(),
                ));
            }
            if !(0..=SUBSCORE_MAX as i64).contains(&value) {
                return Err(Error::Validation(format!(
                    "sub-score {k} = {value} outside 0..={SUBSCORE_MAX}"
                )));
            }
            let slot = &mut values[k.index()];
            if slot.is_some() {
                return Err(Error::Validation(format!("sub-score {k} given twice")));
            }
            *slot = Some(value as u8);
        }
        let mut out = [0u8; 11];
        for (i, v) in values.iter().enumerate() {
            out[i] = v.ok_or_else(|| {
                Error::Validation(format!("missing sub-score {}", ScoreKey::SUBSCORES[i]))
            })?;
        }
        Ok(Subscores(out))
    }

    /// Every sub-score set to `value` (clamped to the valid range).
    pub fn uniform(value: u8) -> Self {
        Subscores([value.min(SUBSCORE_MAX); 11])
    }

    pub fn get(&self, key: ScoreKey) -> Option<u8> {
        (key != ScoreKey::Ctrs).then(|| self.0[key.index()])
    }

    pub fn with(mut self, key: ScoreKey, value: u8) -> Self {
        assert!(key != ScoreKey::Ctrs && value <= SUBSCORE_MAX);
        self.0[key.index()] = value;
        self
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&v| v as u32).sum()
    }

    /// Raw score for any key; the total for `ctrs`.
    pub fn raw(&self, key: ScoreKey) -> u32 {
        self.get(key).map_or_else(|| self.total(), u32::from)
    }

    fn to_map(self) -> BTreeMap<&'static str, u8> {
        ScoreKey::SUBSCORES
            .iter()
            .map(|k| (k.as_str(), self.0[k.index()]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Therapist,
    Client,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TalkTurn {
    pub speaker: Speaker,
    pub embedding: Vec<f64>,
    pub text: Option<String>,
}

impl TalkTurn {
    pub fn new(speaker: Speaker, embedding: Vec<f64>) -> Self {
        TalkTurn {
            speaker,
            embedding,
            text: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub client_id: String,
    pub turns: Vec<TalkTurn>,
    pub subscores: Subscores,
}

impl Session {
    pub fn total(&self) -> u32 {
        self.subscores.total()
    }

    /// Embedding dimension, if the session has any turns.
    pub fn dim(&self) -> Option<usize> {
        self.turns.first().map(|t| t.embedding.len())
    }
}

/// Binary labels for all twelve score keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSet([u8; 12]);

impl LabelSet {
    pub fn get(&self, key: ScoreKey) -> u8 {
        self.0[key.index()]
    }
}

/// Sub-scores of 4 or more and totals of 40 or more are high competence.
pub fn binarize_labels(session: &Session) -> LabelSet {
    let mut labels = [0u8; 12];
    for key in ScoreKey::SUBSCORES {
        let v = session.subscores.get(key).unwrap_or(0);
        labels[key.index()] = u8::from(v >= SUBSCORE_THRESHOLD);
    }
    labels[ScoreKey::Ctrs.index()] = u8::from(session.total() >= TOTAL_THRESHOLD);
    LabelSet(labels)
}

/// Merges runs of same-speaker turns (element-wise mean of embeddings),
/// drops a leading client turn and a trailing therapist turn, so the result
/// strictly alternates therapist, client, therapist, client.
pub fn normalize_turns(session: &Session) -> Result<Session> {
    let mut merged: Vec<TalkTurn> = Vec::with_capacity(session.turns.len());
    let mut run_len = 0usize;
    for turn in &session.turns {
        match merged.last_mut() {
            Some(last) if last.speaker == turn.speaker => {
                if last.embedding.len() != turn.embedding.len() {
                    return Err(Error::DimensionMismatch {
                        location: format!("session {}", session.session_id),
                        expected: last.embedding.len(),
                        found: turn.embedding.len(),
                    });
                }
                // running sum, divided once the run ends
                for (a, b) in last.embedding.iter_mut().zip(&turn.embedding) {
                    *a += b;
                }
                last.text = match (last.text.take(), &turn.text) {
                    (Some(a), Some(b)) => Some(format!("{a} {b}")),
                    (a, b) => a.or_else(|| b.clone()),
                };
                run_len += 1;
            }
            _ => {
                finish_run(&mut merged, run_len);
                merged.push(turn.clone());
                run_len = 1;
            }
        }
    }
    finish_run(&mut merged, run_len);

    if merged.first().is_some_and(|t| t.speaker == Speaker::Client) {
        merged.remove(0);
    }
    if merged.last().is_some_and(|t| t.speaker == Speaker::Therapist) {
        merged.pop();
    }
    if merged.is_empty() {
        return Err(Error::EmptySession(session.session_id.clone()));
    }
    Ok(Session {
        turns: merged,
        ..session.clone()
    })
}

fn finish_run(merged: &mut [TalkTurn], run_len: usize) {
    if run_len > 1 {
        if let Some(last) = merged.last_mut() {
            let n = run_len as f64;
            last.embedding.iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// Therapist inputs `x` and client observations `y`, one column per exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub session_id: String,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl AlignedPair {
    /// Number of aligned exchanges.
    pub fn len(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.y.nrows()
    }
}

/// Column `j` of `x` is the therapist turn immediately preceding the client
/// turn in column `j` of `y`. Requires a normalized session.
pub fn align_pairs(session: &Session) -> Result<AlignedPair> {
    let turns = &session.turns;
    if turns.is_empty() || turns.len() % 2 != 0 {
        return Err(Error::Precondition(format!(
            "session {} is not normalized: {} turns",
            session.session_id,
            turns.len()
        )));
    }
    let d = turns[0].embedding.len();
    let n = turns.len() / 2;
    let mut x = DMatrix::zeros(d, n);
    let mut y = DMatrix::zeros(d, n);
    for (j, pair) in turns.chunks_exact(2).enumerate() {
        if pair[0].speaker != Speaker::Therapist || pair[1].speaker != Speaker::Client {
            return Err(Error::Precondition(format!(
                "session {} does not alternate therapist/client at exchange {j}",
                session.session_id
            )));
        }
        for turn in pair {
            if turn.embedding.len() != d {
                return Err(Error::DimensionMismatch {
                    location: format!("session {} exchange {j}", session.session_id),
                    expected: d,
                    found: turn.embedding.len(),
                });
            }
        }
        x.column_mut(j).copy_from_slice(&pair[0].embedding);
        y.column_mut(j).copy_from_slice(&pair[1].embedding);
    }
    Ok(AlignedPair {
        session_id: session.session_id.clone(),
        x,
        y,
    })
}

/// One window of `w` transition steps starting at exchange `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub session_id: String,
    pub t: usize,
    pub w: usize,
    /// Client columns `y_t .. y_{t+w-1}`.
    pub y_past: DMatrix<f64>,
    /// Therapist columns `x_t .. x_{t+w-1}`.
    pub x_in: DMatrix<f64>,
    /// Client columns `y_{t+1} .. y_{t+w}`.
    pub y_next: DMatrix<f64>,
}

/// Number of windows `extract_windows` produces.
pub fn window_count(exchanges: usize, w: usize, stride: usize) -> usize {
    if exchanges > w && stride > 0 {
        (exchanges - w - 1) / stride + 1
    } else {
        0
    }
}

/// Window start offsets `0, stride, 2*stride, ...` for every window that has
/// `w + 1` client columns available.
pub fn extract_windows(pair: &AlignedPair, w: usize, stride: usize) -> Result<Vec<Window>> {
    if w < 2 {
        return Err(Error::Precondition(format!("window size {w} < 2")));
    }
    if stride < 1 {
        return Err(Error::Precondition("stride must be positive".into()));
    }
    let count = window_count(pair.len(), w, stride);
    let windows = (0..count)
        .map(|i| {
            let t = i * stride;
            Window {
                session_id: pair.session_id.clone(),
                t,
                w,
                y_past: pair.y.columns(t, w).into_owned(),
                x_in: pair.x.columns(t, w).into_owned(),
                y_next: pair.y.columns(t + 1, w).into_owned(),
            }
        })
        .collect();
    Ok(windows)
}

// ---------------------------------------------------------------------------
// Session file I/O

#[derive(Deserialize)]
struct RawSession {
    session_id: String,
    client_id: String,
    subscores: BTreeMap<String, i64>,
    #[serde(default)]
    total: Option<i64>,
    turns: Vec<RawTurn>,
}

#[derive(Deserialize)]
struct RawTurn {
    speaker: Speaker,
    embedding: Vec<RawNumber>,
    #[serde(default)]
    text: Option<String>,
}

/// A number, or one of the string spellings of non-finite values some
/// serializers emit.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Num(f64),
    Str(String),
}

impl RawNumber {
    fn value(&self) -> Option<f64> {
        match self {
            RawNumber::Num(v) => Some(*v),
            RawNumber::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
                "nan" | "+nan" | "-nan" => Some(f64::NAN),
                "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
                "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
                _ => None,
            },
        }
    }
}

#[derive(Serialize)]
struct SessionRecord<'a> {
    session_id: &'a str,
    client_id: &'a str,
    subscores: BTreeMap<&'static str, u8>,
    turns: Vec<TurnRecord<'a>>,
}

#[derive(Serialize)]
struct TurnRecord<'a> {
    speaker: Speaker,
    embedding: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
}

/// Quotes bare `NaN` / `Infinity` / `-Infinity` tokens outside string
/// literals so the record parses and the value can be rejected by validation
/// with a precise message.
fn quote_nonfinite_tokens(line: &str) -> std::borrow::Cow<'_, str> {
    if !line.contains("NaN") && !line.contains("Infinity") {
        return std::borrow::Cow::Borrowed(line);
    }
    let mut out = String::with_capacity(line.len() + 16);
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = line;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
            out.push(c);
            rest = &rest[1..];
            continue;
        }
        let token = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|tok| rest.starts_with(tok));
        match token {
            Some(tok) => {
                out.push('"');
                out.push_str(tok);
                out.push('"');
                rest = &rest[tok.len()..];
            }
            None => {
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    std::borrow::Cow::Owned(out)
}

fn parse_record(line: &str, line_no: usize) -> Result<Session> {
    let raw: RawSession = serde_json::from_str(&quote_nonfinite_tokens(line)).map_err(|e| {
        Error::Parse {
            line: line_no,
            message: e.to_string(),
        }
    })?;
    let at = |msg: String| Error::Validation(format!("line {line_no}: {msg}"));

    let subscores = Subscores::from_map(raw.subscores.iter().map(|(k, v)| (k.as_str(), *v)))
        .map_err(|e| at(e.to_string()))?;
    if let Some(total) = raw.total {
        if total != subscores.total() as i64 {
            return Err(at(format!(
                "total {total} does not equal the sub-score sum {}",
                subscores.total()
            )));
        }
    }

    let mut turns = Vec::with_capacity(raw.turns.len());
    for (i, turn) in raw.turns.into_iter().enumerate() {
        let mut embedding = Vec::with_capacity(turn.embedding.len());
        for (j, n) in turn.embedding.iter().enumerate() {
            match n.value() {
                Some(v) if v.is_finite() => embedding.push(v),
                _ => {
                    return Err(at(format!(
                        "session {} turn {i} embedding[{j}] is not a finite number",
                        raw.session_id
                    )))
                }
            }
        }
        turns.push(TalkTurn {
            speaker: turn.speaker,
            embedding,
            text: turn.text,
        });
    }
    Ok(Session {
        session_id: raw.session_id,
        client_id: raw.client_id,
        turns,
        subscores,
    })
}

/// Reads a line-delimited session file. Blank lines are skipped; every
/// embedding in the corpus must share one dimension.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Session>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_corpus(reader: impl BufRead) -> Result<Vec<Session>> {
    let mut sessions = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let session = parse_record(&line, line_no)?;
        for turn in &session.turns {
            let expected = *dim.get_or_insert(turn.embedding.len());
            if turn.embedding.len() != expected {
                return Err(Error::DimensionMismatch {
                    location: format!("line {line_no} (session {})", session.session_id),
                    expected,
                    found: turn.embedding.len(),
                });
            }
        }
        sessions.push(session);
    }
    Ok(sessions)
}

pub fn write_corpus(path: impl AsRef<Path>, sessions: &[Session]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_sessions(&mut out, sessions).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sessions(out: &mut impl Write, sessions: &[Session]) -> std::io::Result<()> {
    for s in sessions {
        let record = SessionRecord {
            session_id: &s.session_id,
            client_id: &s.client_id,
            subscores: s.subscores.to_map(),
            turns: s
                .turns
                .iter()
                .map(|t| TurnRecord {
                    speaker: t.speaker,
                    embedding: &t.embedding,
                    text: t.text.as_deref(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn turn(speaker: Speaker, v: &[f64]) -> TalkTurn {
        TalkTurn::new(speaker, v.to_vec())
    }

    fn session(turns: Vec<TalkTurn>) -> Session {
        Session {
            session_id: "s".into(),
            client_id: "c".into(),
            turns,
            subscores: Subscores::uniform(0),
        }
    }

    fn alternating(n_exchanges: usize, d: usize) -> Session {
        let mut turns = Vec::new();
        for j in 0..n_exchanges {
            let base = j as f64;
            turns.push(turn(Speaker::Therapist, &vec![base + 0.25; d]));
            turns.push(turn(Speaker::Client, &vec![base + 0.5; d]));
        }
        session(turns)
    }

    #[test]
    fn binarize_all_fours() {
        let s = Session {
            subscores: Subscores::uniform(4),
            ..alternating(1, 2)
        };
        assert_eq!(s.total(), 44);
        let labels = binarize_labels(&s);
        for key in ScoreKey::ALL {
            assert_eq!(labels.get(key), 1, "{key}");
        }
    }

    #[test]
    fn binarize_all_zero() {
        let labels = binarize_labels(&alternating(1, 2));
        assert!(ScoreKey::ALL.iter().all(|&k| labels.get(k) == 0));
    }

    #[test]
    fn binarize_total_exactly_forty() {
        let s = Session {
            subscores: Subscores::uniform(4).with(ScoreKey::Hw, 0),
            ..alternating(1, 2)
        };
        assert_eq!(s.total(), 40);
        let labels = binarize_labels(&s);
        assert_eq!(labels.get(ScoreKey::Hw), 0);
        assert_eq!(labels.get(ScoreKey::Ctrs), 1);
        assert_eq!(labels.get(ScoreKey::Ag), 1);
    }

    #[test]
    fn subscores_missing_key_is_validation_error() {
        let entries: Vec<(&str, i64)> = ScoreKey::SUBSCORES[..10]
            .iter()
            .map(|k| (k.as_str(), 3))
            .collect();
        let err = Subscores::from_map(entries).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("un")), "{err}");
    }

    #[test]
    fn subscores_out_of_range_rejected() {
        let entries: Vec<(&str, i64)> = ScoreKey::SUBSCORES
            .iter()
            .map(|k| (k.as_str(), if *k == ScoreKey::Co { 7 } else { 1 }))
            .collect();
        assert!(Subscores::from_map(entries).is_err());
    }

    #[test]
    fn normalize_keeps_alternating() {
        let s = alternating(2, 3);
        assert_eq!(normalize_turns(&s).unwrap(), s);
    }

    #[test]
    fn normalize_merges_by_mean() {
        let s = session(vec![
            turn(Speaker::Therapist, &[1.0, 2.0]),
            turn(Speaker::Therapist, &[3.0, 6.0]),
            turn(Speaker::Client, &[5.0, 5.0]),
        ]);
        let n = normalize_turns(&s).unwrap();
        assert_eq!(n.turns.len(), 2);
        assert_eq!(n.turns[0].embedding, vec![2.0, 4.0]);
        assert_eq!(n.turns[1].embedding, vec![5.0, 5.0]);
    }

    #[test]
    fn normalize_mean_of_three() {
        let s = session(vec![
            turn(Speaker::Therapist, &[0.0]),
            turn(Speaker::Client, &[1.0]),
            turn(Speaker::Client, &[2.0]),
            turn(Speaker::Client, &[6.0]),
        ]);
        let n = normalize_turns(&s).unwrap();
        assert_eq!(n.turns[1].embedding, vec![3.0]);
    }

    #[test]
    fn normalize_client_then_therapist_is_empty() {
        let s = session(vec![
            turn(Speaker::Client, &[1.0]),
            turn(Speaker::Therapist, &[1.0]),
        ]);
        assert!(matches!(normalize_turns(&s), Err(Error::EmptySession(_))));
    }

    #[test]
    fn normalize_trims_both_ends() {
        let s = session(vec![
            turn(Speaker::Client, &[9.0]),
            turn(Speaker::Therapist, &[1.0]),
            turn(Speaker::Client, &[2.0]),
            turn(Speaker::Therapist, &[3.0]),
        ]);
        let n = normalize_turns(&s).unwrap();
        let speakers: Vec<_> = n.turns.iter().map(|t| t.speaker).collect();
        assert_eq!(speakers, vec![Speaker::Therapist, Speaker::Client]);
    }

    #[test]
    fn align_counts_exchanges() {
        assert_eq!(align_pairs(&alternating(2, 4)).unwrap().len(), 2);
        assert_eq!(align_pairs(&alternating(9, 4)).unwrap().len(), 9);
        let one = align_pairs(&alternating(1, 4)).unwrap();
        assert_eq!((one.x.shape(), one.y.shape()), ((4, 1), (4, 1)));
    }

    #[test]
    fn align_rejects_non_alternating() {
        let s = session(vec![
            turn(Speaker::Therapist, &[1.0]),
            turn(Speaker::Therapist, &[1.0]),
        ]);
        assert!(matches!(align_pairs(&s), Err(Error::Precondition(_))));
    }

    #[test]
    fn window_counts() {
        let ten = align_pairs(&alternating(10, 2)).unwrap();
        assert_eq!(extract_windows(&ten, 3, 1).unwrap().len(), 7);
        let nine = align_pairs(&alternating(9, 2)).unwrap();
        assert_eq!(extract_windows(&nine, 8, 1).unwrap().len(), 1);
        let five = align_pairs(&alternating(5, 2)).unwrap();
        assert!(extract_windows(&five, 8, 1).unwrap().is_empty());
    }

    #[test]
    fn window_rejects_bad_parameters() {
        let p = align_pairs(&alternating(5, 2)).unwrap();
        assert!(extract_windows(&p, 1, 1).is_err());
        assert!(extract_windows(&p, 3, 0).is_err());
    }

    #[test]
    fn window_column_layout() {
        let p = align_pairs(&alternating(6, 1)).unwrap();
        let win = &extract_windows(&p, 3, 2).unwrap()[1];
        assert_eq!(win.t, 2);
        assert_eq!(win.y_past.as_slice(), &[2.5, 3.5, 4.5]);
        assert_eq!(win.x_in.as_slice(), &[2.25, 3.25, 4.25]);
        assert_eq!(win.y_next.as_slice(), &[3.5, 4.5, 5.5]);
    }

    #[test]
    fn nonfinite_token_quoting_leaves_strings_alone() {
        let line = r#"{"text":"NaN Infinity","e":[NaN,-Infinity,1]}"#;
        assert_eq!(
            quote_nonfinite_tokens(line),
            r#"{"text":"NaN Infinity","e":["NaN","-Infinity",1]}"#
        );
    }

    prop_compose! {
        fn arb_turns()(spk in prop::collection::vec(any::<bool>(), 2..24),
                       vals in prop::collection::vec(-4.0f64..4.0, 24)) -> Vec<TalkTurn> {
            spk.iter().enumerate().map(|(i, &t)| {
                let speaker = if t { Speaker::Therapist } else { Speaker::Client };
                turn(speaker, &[vals[i], vals[(i * 7) % 24]])
            }).collect()
        }
    }

    proptest! {
        #[test]
        fn window_count_formula(t in 0usize..60, w in 2usize..10, stride in 1usize..6) {
            let p = align_pairs(&alternating(t.max(1), 1)).unwrap();
            let t = p.len();
            let windows = extract_windows(&p, w, stride).unwrap();
            let expected = if t > w { (t - w - 1) / stride + 1 } else { 0 };
            prop_assert_eq!(windows.len(), expected);
            for win in &windows {
                for c in 0..w {
                    prop_assert_eq!(win.y_past.column(c), p.y.column(win.t + c));
                    prop_assert_eq!(win.x_in.column(c), p.x.column(win.t + c));
                    prop_assert_eq!(win.y_next.column(c), p.y.column(win.t + c + 1));
                }
            }
        }

        #[test]
        fn normalize_is_idempotent(turns in arb_turns()) {
            if let Ok(once) = normalize_turns(&session(turns)) {
                let twice = normalize_turns(&once).unwrap();
                prop_assert_eq!(&twice, &once);
                prop_assert!(align_pairs(&once).is_ok());
            }
        }

        #[test]
        fn binarize_is_monotone(scores in prop::collection::vec(0u8..=6, 11), which in 0usize..11, bump in 1u8..=6) {
            let base = ScoreKey::SUBSCORES.iter().zip(&scores)
                .fold(Subscores::uniform(0), |s, (&k, &v)| s.with(k, v));
            let key = ScoreKey::SUBSCORES[which];
            let raised = base.with(key, (base.get(key).unwrap() + bump).min(6));
            let mut s = alternating(1, 1);
            s.subscores = base;
            let before = binarize_labels(&s);
            s.subscores = raised;
            let after = binarize_labels(&s);
            for k in ScoreKey::ALL {
                prop_assert!(after.get(k) >= before.get(k));
            }
        }
    }
}
