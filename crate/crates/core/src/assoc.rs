//! Sparse associative arrays keyed by string row and column labels.
//!
//! An [`AssocArray`] maps `(row, col)` string pairs to `f64` values and
//! supports the small algebra used to correlate telemetry dimensions:
//! element-wise addition, plus-times matrix multiplication, transposition and
//! range selection. Explicit zeros are never stored, and iteration is always
//! lexicographic by row then column.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::ops::Bound;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssocError {
    #[error("non-finite value {value} for triple ({row:?}, {col:?})")]
    NonFinite { row: String, col: String, value: f64 },
    #[error("inverted key interval: {lower:?} > {upper:?}")]
    InvertedInterval { lower: String, upper: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv record {record}: {message}")]
    BadRecord { record: usize, message: String },
}

/// Key filter applied to one dimension by [`AssocArray::select`].
#[derive(Debug, Clone, PartialEq)]
pub enum KeySelector {
    All,
    /// Inclusive interval; `None` leaves that side open.
    Range {
        lower: Option<String>,
        upper: Option<String>,
    },
    Set(BTreeSet<String>),
}

impl KeySelector {
    pub fn range(lower: impl Into<String>, upper: impl Into<String>) -> Result<Self, AssocError> {
        let (lower, upper) = (lower.into(), upper.into());
        if lower > upper {
            return Err(AssocError::InvertedInterval { lower, upper });
        }
        Ok(KeySelector::Range {
            lower: Some(lower),
            upper: Some(upper),
        })
    }

    pub fn set<I, S>(keys: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        KeySelector::Set(keys.into_iter().map(Into::into).collect())
    }

    fn validate(&self) -> Result<(), AssocError> {
        if let KeySelector::Range {
            lower: Some(lo),
            upper: Some(hi),
        } = self
        {
            if lo > hi {
                return Err(AssocError::InvertedInterval {
                    lower: lo.clone(),
                    upper: hi.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        match self {
            KeySelector::All => true,
            KeySelector::Range { lower, upper } => {
                lower.as_deref().is_none_or(|lo| key >= lo) && upper.as_deref().is_none_or(|hi| key <= hi)
            }
            KeySelector::Set(keys) => keys.contains(key),
        }
    }

    /// Intersection of two selectors on the same dimension.
    pub fn intersect(&self, other: &KeySelector) -> KeySelector {
        match (self, other) {
            (KeySelector::All, s) | (s, KeySelector::All) => s.clone(),
            (KeySelector::Set(a), s) | (s, KeySelector::Set(a)) => {
                KeySelector::Set(a.iter().filter(|k| s.contains(k)).cloned().collect())
            }
            (KeySelector::Range { lower: l1, upper: u1 }, KeySelector::Range { lower: l2, upper: u2 }) => {
                let lower = match (l1, l2) {
                    (Some(a), Some(b)) => Some(a.max(b).clone()),
                    (a, b) => a.clone().or_else(|| b.clone()),
                };
                let upper = match (u1, u2) {
                    (Some(a), Some(b)) => Some(a.min(b).clone()),
                    (a, b) => a.clone().or_else(|| b.clone()),
                };
                match (&lower, &upper) {
                    // Empty intersection. Represented as an empty set so the
                    // result stays a valid (non-inverted) selector.
                    (Some(lo), Some(hi)) if lo > hi => KeySelector::Set(BTreeSet::new()),
                    _ => KeySelector::Range { lower, upper },
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssocArray {
    entries: BTreeMap<(String, String), f64>,
}

impl AssocArray {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an array from `(row, col, value)` triples. Duplicate keys are
    /// summed and zero results pruned.
    pub fn from_triples<I, R, C>(triples: I) -> Result<Self, AssocError>
    where
        I: IntoIterator<Item = (R, C, f64)>,
        R: Into<String>,
        C: Into<String>,
    {
        let mut entries: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (row, col, value) in triples {
            let (row, col) = (row.into(), col.into());
            if !value.is_finite() {
                return Err(AssocError::NonFinite { row, col, value });
            }
            *entries.entry((row, col)).or_insert(0.0) += value;
        }
        Ok(Self::pruned(entries))
    }

    fn pruned(mut entries: BTreeMap<(String, String), f64>) -> Self {
        entries.retain(|_, v| *v != 0.0);
        AssocArray { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        self.entries.get(&(row.to_owned(), col.to_owned())).copied()
    }

    /// Entries in row-major lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.entries.iter().map(|((r, c), v)| (r.as_str(), c.as_str(), *v))
    }

    pub fn row_keys(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|(r, _)| r.as_str()).collect()
    }

    pub fn col_keys(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|(_, c)| c.as_str()).collect()
    }

    pub fn add(&self, other: &AssocArray) -> AssocArray {
        let mut entries = self.entries.clone();
        for (k, v) in &other.entries {
            *entries.entry(k.clone()).or_insert(0.0) += v;
        }
        Self::pruned(entries)
    }

    /// Plus-times product over the shared key dimension (`self` columns
    /// against `other` rows). Unmatched keys contribute nothing.
    pub fn matmul(&self, other: &AssocArray) -> AssocArray {
        let mut by_row: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
        for ((r, c), v) in &other.entries {
            by_row.entry(r.as_str()).or_default().push((c.as_str(), *v));
        }
        let mut out: BTreeMap<(String, String), f64> = BTreeMap::new();
        for ((r, k), a) in &self.entries {
            let Some(row) = by_row.get(k.as_str()) else {
                continue;
            };
            for (c, b) in row {
                *out.entry((r.clone(), (*c).to_owned())).or_insert(0.0) += a * b;
            }
        }
        Self::pruned(out)
    }

    pub fn transpose(&self) -> AssocArray {
        AssocArray {
            entries: self
                .entries
                .iter()
                .map(|((r, c), v)| ((c.clone(), r.clone()), *v))
                .collect(),
        }
    }

    /// Entries whose row key matches `rows` and column key matches `cols`.
    pub fn select(&self, rows: &KeySelector, cols: &KeySelector) -> Result<AssocArray, AssocError> {
        rows.validate()?;
        cols.validate()?;
        let entries = match rows {
            // Row ranges map onto a contiguous span of the row-major map.
            KeySelector::Range { lower, upper } => {
                let lo = match lower {
                    Some(l) => Bound::Included((l.clone(), String::new())),
                    None => Bound::Unbounded,
                };
                self.entries
                    .range((lo, Bound::Unbounded))
                    .take_while(|((r, _), _)| upper.as_deref().is_none_or(|hi| r.as_str() <= hi))
                    .filter(|((_, c), _)| cols.contains(c))
                    .map(|(k, v)| (k.clone(), *v))
                    .collect()
            }
            _ => self
                .entries
                .iter()
                .filter(|((r, c), _)| rows.contains(r) && cols.contains(c))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        };
        Ok(AssocArray { entries })
    }

    /// Writes `row,col,value` lines. Keys containing commas or quotes are
    /// quoted per RFC 4180.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), AssocError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for (r, c, v) in self.iter() {
            w.write_record([r, c, &v.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<AssocArray, AssocError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut triples = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 3 {
                return Err(AssocError::BadRecord {
                    record: i + 1,
                    message: format!("expected 3 fields, got {}", record.len()),
                });
            }
            let value: f64 = record[2].trim().parse().map_err(|_| AssocError::BadRecord {
                record: i + 1,
                message: format!("bad value {:?}", &record[2]),
            })?;
            triples.push((record[0].to_owned(), record[1].to_owned(), value));
        }
        AssocArray::from_triples(triples)
    }
}

impl<'a> IntoIterator for &'a AssocArray {
    type Item = (&'a str, &'a str, f64);
    type IntoIter = Box<dyn Iterator<Item = (&'a str, &'a str, f64)> + 'a>;

    fn into_iter(self) -> Self::IntoIter {
        Box::new(self.iter())
    }
}
