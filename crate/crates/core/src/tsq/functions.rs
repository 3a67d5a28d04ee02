//! Row-level building blocks of query evaluation. `eval_query` is a
//! composition of these.

use std::collections::BTreeMap;

use serde::Serialize;

use super::query::{Duration, Interval};
use super::store::Tags;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Str(_) => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

/// One output row: bucket (or point) time, group tags, named values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub time: i64,
    pub tags: Tags,
    pub values: BTreeMap<String, Value>,
}

impl ResultRow {
    pub fn new(time: i64, tags: Tags) -> Self {
        ResultRow {
            time,
            tags,
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: Value) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(Value::as_f64)
    }
}

pub const MEAN: &str = "mean";
pub const NON_NEGATIVE_DERIVATIVE: &str = "non_negative_derivative";
pub const TOP: &str = "top";

/// Start of the epoch-aligned bucket holding `t`.
pub fn bucket_start(t: i64, width: Duration) -> i64 {
    t - t.rem_euclid(width.nanos())
}

/// Arithmetic mean of `points` per epoch-aligned bucket, restricted to
/// `range`. Empty buckets are omitted. With no bucket width the whole range
/// is one bucket stamped at its lower bound (or 0 when unbounded).
pub fn mean_windows(points: &[(i64, f64)], range: Interval, bucket: Option<Duration>, tags: &Tags) -> Vec<ResultRow> {
    let mut sums: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    let whole = if range.lo == i64::MIN { 0 } else { range.lo };
    for &(t, v) in points {
        if !range.contains(t) {
            continue;
        }
        let key = bucket.map_or(whole, |w| bucket_start(t, w));
        let slot = sums.entry(key).or_insert((0.0, 0));
        slot.0 += v;
        slot.1 += 1;
    }
    sums.into_iter()
        .map(|(t, (sum, n))| ResultRow::new(t, tags.clone()).with(MEAN, Value::Float(sum / n as f64)))
        .collect()
}

/// Rate of change between consecutive rows of each group, scaled to `unit`
/// and emitted at the later row's time. Negative rates are dropped, zero is
/// kept, and the first row of a group produces nothing.
pub fn nonneg_derivative(rows: &[ResultRow], value_name: &str, unit: Duration) -> Vec<ResultRow> {
    let mut prev: BTreeMap<&Tags, (i64, f64)> = BTreeMap::new();
    let mut out = Vec::new();
    for row in rows {
        let Some(v) = row.value(value_name) else {
            continue;
        };
        if let Some((t0, v0)) = prev.insert(&row.tags, (row.time, v)) {
            if row.time <= t0 {
                continue;
            }
            let rate = (v - v0) * unit.nanos() as f64 / (row.time - t0) as f64;
            if rate >= 0.0 {
                out.push(ResultRow::new(row.time, row.tags.clone()).with(NON_NEGATIVE_DERIVATIVE, Value::Float(rate)));
            }
        }
    }
    out
}

/// The `n` greatest values of `value_name` across all groups, descending.
/// Ties go to the earlier timestamp, then the lexicographically smaller tag
/// set.
pub fn top_n(rows: &[ResultRow], value_name: &str, n: usize) -> Vec<ResultRow> {
    let mut ranked: Vec<(f64, &ResultRow)> = rows
        .iter()
        .filter_map(|r| r.value(value_name).map(|v| (v, r)))
        .collect();
    ranked.sort_by(|(va, a), (vb, b)| {
        vb.total_cmp(va)
            .then(a.time.cmp(&b.time))
            .then_with(|| a.tags.cmp(&b.tags))
    });
    ranked
        .into_iter()
        .take(n)
        .map(|(v, r)| ResultRow::new(r.time, r.tags.clone()).with(TOP, Value::Float(v)))
        .collect()
}

/// Half-away-from-zero rounding to an integer value.
pub fn round_value(v: f64) -> Value {
    let r = v.round();
    if r >= i64::MIN as f64 && r < i64::MAX as f64 {
        Value::Int(r as i64)
    } else {
        Value::Float(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(job: &str) -> Tags {
        Tags::from([("jobid".to_owned(), job.to_owned())])
    }

    fn ten_min() -> Duration {
        Duration::from_mins(10).unwrap()
    }

    #[test]
    fn mean_single_point_and_pair() {
        let t = Tags::new();
        let rows = mean_windows(&[(5, 7.0)], Interval::ALL, Some(ten_min()), &t);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].value(MEAN), Some(7.0));
        assert_eq!(rows[0].time, 0);

        let rows = mean_windows(&[(1, 2.0), (2, 4.0)], Interval::ALL, Some(ten_min()), &t);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].value(MEAN), Some(3.0));
    }

    #[test]
    fn mean_buckets_align_to_epoch() {
        let w = ten_min();
        let t0 = 1_623_339_600_000_000_000; // 15:40:00Z
        let pts = [(t0 - 1, 1.0), (t0, 2.0), (t0 + w.nanos() - 1, 4.0)];
        let rows = mean_windows(&pts, Interval::ALL, Some(w), &Tags::new());
        let got: Vec<_> = rows.iter().map(|r| (r.time, r.value(MEAN).unwrap())).collect();
        assert_eq!(got, vec![(t0 - w.nanos(), 1.0), (t0, 3.0)]);
        assert_eq!(bucket_start(-1, w), -w.nanos());
    }

    #[test]
    fn mean_respects_range() {
        let rows = mean_windows(
            &[(1, 1.0), (5, 3.0), (9, 100.0)],
            Interval { lo: 2, hi: 8 },
            None,
            &Tags::new(),
        );
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].time, 2);
        assert_eq!(rows[0].value(MEAN), Some(3.0));
    }

    fn means(job: &str, vals: &[f64]) -> Vec<ResultRow> {
        let w = ten_min().nanos();
        vals.iter()
            .enumerate()
            .map(|(i, v)| ResultRow::new(i as i64 * w, tags(job)).with(MEAN, Value::Float(*v)))
            .collect()
    }

    #[test]
    fn derivative_constant_series_kept_as_zero() {
        let out = nonneg_derivative(&means("a", &[5.0, 5.0, 5.0]), MEAN, ten_min());
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|r| r.value(NON_NEGATIVE_DERIVATIVE) == Some(0.0)));
    }

    #[test]
    fn derivative_adjacent_buckets() {
        let out = nonneg_derivative(&means("a", &[100.0, 300.0]), MEAN, ten_min());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].time, ten_min().nanos());
        assert_eq!(out[0].value(NON_NEGATIVE_DERIVATIVE), Some(200.0));

        let out = nonneg_derivative(&means("a", &[300.0, 250.0]), MEAN, ten_min());
        assert!(out.is_empty());
    }

    #[test]
    fn derivative_scales_by_unit() {
        let out = nonneg_derivative(&means("a", &[0.0, 60.0]), MEAN, Duration::from_secs(60).unwrap());
        assert_eq!(out[0].value(NON_NEGATIVE_DERIVATIVE), Some(6.0));
    }

    #[test]
    fn derivative_per_group() {
        let mut rows = means("a", &[1.0, 2.0]);
        rows.extend(means("b", &[10.0, 5.0]));
        let out = nonneg_derivative(&rows, MEAN, ten_min());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tags, tags("a"));
    }

    #[test]
    fn top_orders_and_truncates() {
        let rows: Vec<_> = [("a", 5.0), ("b", 9.0), ("c", 1.0)]
            .iter()
            .map(|(j, v)| ResultRow::new(0, tags(j)).with("x", Value::Float(*v)))
            .collect();
        let top = top_n(&rows, "x", 2);
        let got: Vec<_> = top
            .iter()
            .map(|r| (r.tags["jobid"].as_str(), r.value(TOP).unwrap()))
            .collect();
        assert_eq!(got, vec![("b", 9.0), ("a", 5.0)]);
        assert_eq!(top_n(&rows, "x", 10).len(), 3);
    }

    #[test]
    fn top_tie_breaks() {
        let rows = vec![
            ResultRow::new(20, tags("a")).with("x", Value::Float(1.0)),
            ResultRow::new(10, tags("z")).with("x", Value::Float(1.0)),
            ResultRow::new(10, tags("b")).with("x", Value::Float(1.0)),
        ];
        let order: Vec<_> = top_n(&rows, "x", 3).iter().map(|r| r.tags["jobid"].clone()).collect();
        assert_eq!(order, vec!["b", "z", "a"]);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_value(2.5), Value::Int(3));
        assert_eq!(round_value(-2.5), Value::Int(-3));
        assert_eq!(round_value(893_816.999_999), Value::Int(893_817));
    }
}
