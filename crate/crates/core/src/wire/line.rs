//! Line-protocol parsing and serialization.
//!
//! Grammar: `measurement[,tag=value...] field=value[,field=value...] [timestamp]`.
//! In the measurement, tag keys, tag values and field keys a backslash escapes
//! `,`, `=`, space or another backslash; any other escape is rejected. String
//! field values are double-quoted with `\"` and `\\` escapes. Integers carry an
//! `i` suffix. Timestamps are nanoseconds since the Unix epoch.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest accepted string field value, in bytes.
pub const MAX_STRING_FIELD_LEN: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Integer(i64),
    Float(f64),
    Boolean(bool),
    String(String),
}

impl FieldValue {
    /// Numeric view used by the time-series store. Booleans and strings are
    /// not numeric.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FieldValue::Float(v) => Some(*v),
            FieldValue::Integer(v) => Some(*v as f64),
            FieldValue::Boolean(_) | FieldValue::String(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            FieldValue::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            FieldValue::Boolean(b) => Some(*b),
            _ => None,
        }
    }
}

impl From<f64> for FieldValue {
    fn from(v: f64) -> Self {
        FieldValue::Float(v)
    }
}

impl From<i64> for FieldValue {
    fn from(v: i64) -> Self {
        FieldValue::Integer(v)
    }
}

impl From<bool> for FieldValue {
    fn from(v: bool) -> Self {
        FieldValue::Boolean(v)
    }
}

impl From<&str> for FieldValue {
    fn from(v: &str) -> Self {
        FieldValue::String(v.to_owned())
    }
}

impl From<String> for FieldValue {
    fn from(v: String) -> Self {
        FieldValue::String(v)
    }
}

/// One timestamped measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub measurement: String,
    pub tags: BTreeMap<String, String>,
    pub fields: BTreeMap<String, FieldValue>,
    pub timestamp: i64,
}

impl MetricSample {
    pub fn new(measurement: impl Into<String>, timestamp: i64) -> Self {
        MetricSample {
            measurement: measurement.into(),
            tags: BTreeMap::new(),
            fields: BTreeMap::new(),
            timestamp,
        }
    }

    pub fn tag(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.tags.insert(key.into(), value.into());
        self
    }

    pub fn field(mut self, key: impl Into<String>, value: impl Into<FieldValue>) -> Self {
        self.fields.insert(key.into(), value.into());
        self
    }

    pub fn host(&self) -> Option<&str> {
        self.tags.get("host").map(String::as_str)
    }

    /// Serializes to one line of line protocol (no trailing newline).
    pub fn to_line(&self) -> String {
        let mut out = String::with_capacity(64);
        write_line(&mut out, self);
        out
    }
}

impl fmt::Display for MetricSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

pub(crate) fn push_escaped(out: &mut String, s: &str) {
    for ch in s.chars() {
        if matches!(ch, ',' | '=' | ' ' | '\\') {
            out.push('\\');
        }
        out.push(ch);
    }
}

/// Appends the line-protocol form of `sample` to `out`.
pub fn write_line(out: &mut String, sample: &MetricSample) {
    push_escaped(out, &sample.measurement);
    for (k, v) in &sample.tags {
        out.push(',');
        push_escaped(out, k);
        out.push('=');
        push_escaped(out, v);
    }
    out.push(' ');
    for (i, (k, v)) in sample.fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_escaped(out, k);
        out.push('=');
        write_field_value(out, v);
    }
    let _ = write!(out, " {}", sample.timestamp);
}

pub(crate) fn write_field_value(out: &mut String, v: &FieldValue) {
    match v {
        FieldValue::Float(x) => {
            let _ = write!(out, "{x}");
        }
        FieldValue::Integer(x) => {
            let _ = write!(out, "{x}i");
        }
        FieldValue::Boolean(b) => out.push_str(if *b { "true" } else { "false" }),
        FieldValue::String(s) => {
            out.push('"');
            for ch in s.chars() {
                if ch == '"' || ch == '\\' {
                    out.push('\\');
                }
                out.push(ch);
            }
            out.push('"');
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("missing measurement name")]
    EmptyMeasurement,
    #[error("empty tag key")]
    EmptyTagKey,
    #[error("empty tag value")]
    EmptyTagValue,
    #[error("expected '='")]
    MissingEquals,
    #[error("empty field key")]
    EmptyFieldKey,
    #[error("empty field value")]
    EmptyFieldValue,
    #[error("no fields")]
    NoFields,
    #[error("duplicate tag key {0:?}")]
    DuplicateTag(String),
    #[error("duplicate field key {0:?}")]
    DuplicateField(String),
    #[error("malformed escape sequence")]
    MalformedEscape,
    #[error("unterminated string value")]
    UnterminatedString,
    #[error("string value longer than {MAX_STRING_FIELD_LEN} bytes")]
    StringTooLong,
    #[error("invalid integer value {0:?}")]
    InvalidInteger(String),
    #[error("invalid field value {0:?}")]
    InvalidFieldValue(String),
    #[error("invalid timestamp {0:?}")]
    InvalidTimestamp(String),
    #[error("unexpected character {0:?}")]
    Unexpected(char),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(offset: usize, kind: ParseErrorKind) -> Self {
        ParseError { offset, kind }
    }
}

struct Cursor<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    /// Reads an escaped name up to (not including) the first unescaped byte in
    /// `stops`.
    fn escaped(&mut self, stops: &[u8]) -> Result<String, ParseError> {
        let start = self.pos;
        let mut plain = true;
        while let Some(b) = self.peek() {
            if stops.contains(&b) {
                break;
            }
            if b == b'\\' {
                plain = false;
                match self.bytes.get(self.pos + 1) {
                    Some(b',' | b'=' | b' ' | b'\\') => self.pos += 2,
                    _ => return Err(ParseError::at(self.pos, ParseErrorKind::MalformedEscape)),
                }
            } else {
                self.pos += 1;
            }
        }
        let raw = &self.src[start..self.pos];
        if plain {
            return Ok(raw.to_owned());
        }
        let mut out = String::with_capacity(raw.len());
        let mut chars = raw.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                // validated above
                out.extend(chars.next());
            } else {
                out.push(c);
            }
        }
        Ok(out)
    }

    fn expect(&mut self, b: u8, kind: ParseErrorKind) -> Result<(), ParseError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::at(self.pos, kind))
        }
    }

    fn skip_spaces(&mut self) -> usize {
        let start = self.pos;
        while self.peek() == Some(b' ') {
            self.pos += 1;
        }
        self.pos - start
    }

    fn string_value(&mut self) -> Result<String, ParseError> {
        let open = self.pos;
        self.pos += 1;
        let mut out = String::new();
        let mut seg = self.pos;
        loop {
            match self.peek() {
                None => return Err(ParseError::at(open, ParseErrorKind::UnterminatedString)),
                Some(b'"') => {
                    out.push_str(&self.src[seg..self.pos]);
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => match self.bytes.get(self.pos + 1) {
                    Some(&c @ (b'"' | b'\\')) => {
                        out.push_str(&self.src[seg..self.pos]);
                        out.push(c as char);
                        self.pos += 2;
                        seg = self.pos;
                    }
                    _ => return Err(ParseError::at(self.pos, ParseErrorKind::MalformedEscape)),
                },
                Some(_) => self.pos += 1,
            }
            if out.len() + (self.pos - seg) > MAX_STRING_FIELD_LEN {
                return Err(ParseError::at(open, ParseErrorKind::StringTooLong));
            }
        }
        Ok(out)
    }

    fn bare_value(&mut self) -> Result<FieldValue, ParseError> {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b == b',' || b == b' ' {
                break;
            }
            self.pos += 1;
        }
        let tok = &self.src[start..self.pos];
        if tok.is_empty() {
            return Err(ParseError::at(start, ParseErrorKind::EmptyFieldValue));
        }
        parse_bare(tok).map_err(|kind| ParseError::at(start, kind))
    }
}

fn parse_bare(tok: &str) -> Result<FieldValue, ParseErrorKind> {
    match tok {
        "t" | "T" | "true" | "True" | "TRUE" => return Ok(FieldValue::Boolean(true)),
        "f" | "F" | "false" | "False" | "FALSE" => return Ok(FieldValue::Boolean(false)),
        _ => {}
    }
    if let Some(digits) = tok.strip_suffix('i') {
        let ok = !digits.is_empty()
            && digits
                .strip_prefix('-')
                .unwrap_or(digits)
                .bytes()
                .all(|b| b.is_ascii_digit());
        return match digits.parse::<i64>() {
            Ok(v) if ok => Ok(FieldValue::Integer(v)),
            _ => Err(ParseErrorKind::InvalidInteger(tok.to_owned())),
        };
    }
    // Restrict to plain decimal notation; `inf`, `NaN` and friends are not
    // representable in the protocol.
    let numeric_chars = tok
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    match tok.parse::<f64>() {
        Ok(v) if numeric_chars && v.is_finite() => Ok(FieldValue::Float(v)),
        _ => Err(ParseErrorKind::InvalidFieldValue(tok.to_owned())),
    }
}

/// Parses one line. `receipt_ns` stamps samples that carry no timestamp.
pub fn parse_line(line: &str, receipt_ns: i64) -> Result<MetricSample, ParseError> {
    let mut cur = Cursor {
        src: line,
        bytes: line.as_bytes(),
        pos: 0,
    };

    let measurement = cur.escaped(b", ")?;
    if measurement.is_empty() {
        return Err(ParseError::at(0, ParseErrorKind::EmptyMeasurement));
    }

    let mut tags = BTreeMap::new();
    while cur.peek() == Some(b',') {
        cur.pos += 1;
        let key_at = cur.pos;
        let key = cur.escaped(b"=, ")?;
        if key.is_empty() {
            return Err(ParseError::at(key_at, ParseErrorKind::EmptyTagKey));
        }
        cur.expect(b'=', ParseErrorKind::MissingEquals)?;
        let val_at = cur.pos;
        let value = cur.escaped(b", ")?;
        if value.is_empty() {
            return Err(ParseError::at(val_at, ParseErrorKind::EmptyTagValue));
        }
        if tags.contains_key(&key) {
            return Err(ParseError::at(key_at, ParseErrorKind::DuplicateTag(key)));
        }
        tags.insert(key, value);
    }

    if cur.skip_spaces() == 0 || cur.at_end() {
        return Err(ParseError::at(cur.pos, ParseErrorKind::NoFields));
    }

    let mut fields = BTreeMap::new();
    loop {
        let key_at = cur.pos;
        let key = cur.escaped(b"=, ")?;
        if key.is_empty() {
            return Err(ParseError::at(key_at, ParseErrorKind::EmptyFieldKey));
        }
        cur.expect(b'=', ParseErrorKind::MissingEquals)?;
        let value = if cur.peek() == Some(b'"') {
            FieldValue::String(cur.string_value()?)
        } else {
            cur.bare_value()?
        };
        if fields.contains_key(&key) {
            return Err(ParseError::at(key_at, ParseErrorKind::DuplicateField(key)));
        }
        fields.insert(key, value);
        match cur.peek() {
            Some(b',') => cur.pos += 1,
            Some(b' ') | None => break,
            Some(b) => return Err(ParseError::at(cur.pos, ParseErrorKind::Unexpected(b as char))),
        }
    }

    cur.skip_spaces();
    let timestamp = if cur.at_end() {
        receipt_ns
    } else {
        let start = cur.pos;
        let tok = line[start..].trim_end();
        let digits_ok = !tok.is_empty() && tok.strip_prefix('-').unwrap_or(tok).bytes().all(|b| b.is_ascii_digit());
        match tok.parse::<i64>() {
            Ok(ts) if digits_ok => ts,
            _ => return Err(ParseError::at(start, ParseErrorKind::InvalidTimestamp(tok.to_owned()))),
        }
    };

    Ok(MetricSample {
        measurement,
        tags,
        fields,
        timestamp,
    })
}

/// Outcome of parsing a multi-line body. Errors carry 1-based line numbers.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct BatchParse {
    pub samples: Vec<MetricSample>,
    pub errors: Vec<(usize, ParseError)>,
}

/// Parses newline-separated lines independently. Blank lines and lines whose
/// first non-space character is `#` are skipped.
pub fn parse_batch(text: &str, receipt_ns: i64) -> BatchParse {
    let mut out = BatchParse::default();
    for (idx, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_line(trimmed, receipt_ns) {
            Ok(s) => out.samples.push(s),
            Err(e) => out.errors.push((idx + 1, e)),
        }
    }
    out
}

/// Serializes samples as newline-terminated lines.
pub fn to_batch<'a, I>(samples: I) -> String
where
    I: IntoIterator<Item = &'a MetricSample>,
{
    let mut out = String::new();
    for s in samples {
        write_line(&mut out, s);
        out.push('\n');
    }
    out
}
