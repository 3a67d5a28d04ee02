use std::collections::{BTreeMap, HashMap};

use crate::wire::{FieldValue, MetricSample};

pub type Tags = BTreeMap<String, String>;

/// Canonical identity of a series: measurement plus its sorted tag set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeriesKey {
    pub measurement: String,
    pub tags: Tags,
}

impl SeriesKey {
    pub fn new(measurement: impl Into<String>, tags: Tags) -> Self {
        SeriesKey {
            measurement: measurement.into(),
            tags,
        }
    }
}

/// Points of one series. Numeric fields keep full history keyed by
/// timestamp; other fields keep only their latest value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesData {
    numeric: BTreeMap<String, BTreeMap<i64, f64>>,
    latest: BTreeMap<String, (i64, FieldValue)>,
}

impl SeriesData {
    pub fn field(&self, name: &str) -> Option<&BTreeMap<i64, f64>> {
        self.numeric.get(name)
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &BTreeMap<i64, f64>)> + '_ {
        self.numeric.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Points of `name` with `lo <= t <= hi`; empty when `lo > hi`.
    pub fn range(&self, name: &str, lo: i64, hi: i64) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.numeric
            .get(name)
            .filter(|_| lo <= hi)
            .into_iter()
            .flat_map(move |m| m.range(lo..=hi).map(|(t, v)| (*t, *v)))
    }

    /// Latest point of a numeric field, or latest value of a non-numeric one.
    pub fn latest(&self, name: &str) -> Option<(i64, FieldValue)> {
        let numeric = self
            .numeric
            .get(name)
            .and_then(|m| m.last_key_value())
            .map(|(t, v)| (*t, FieldValue::Float(*v)));
        let other = self.latest.get(name).cloned();
        match (numeric, other) {
            (Some(a), Some(b)) => Some(if b.0 >= a.0 { b } else { a }),
            (a, b) => a.or(b),
        }
    }

    pub fn latest_non_numeric(&self) -> impl Iterator<Item = (&str, i64, &FieldValue)> + '_ {
        self.latest.iter().map(|(k, (t, v))| (k.as_str(), *t, v))
    }

    pub fn last_timestamp(&self) -> Option<i64> {
        let a = self.numeric.values().filter_map(|m| m.keys().next_back().copied());
        let b = self.latest.values().map(|(t, _)| *t);
        a.chain(b).max()
    }

    pub fn point_count(&self) -> usize {
        self.numeric.values().map(BTreeMap::len).sum()
    }

    fn insert(&mut self, name: &str, ts: i64, value: &FieldValue) {
        match value.as_f64() {
            Some(v) => {
                if let Some(m) = self.numeric.get_mut(name) {
                    m.insert(ts, v);
                } else {
                    self.numeric.insert(name.to_owned(), BTreeMap::from([(ts, v)]));
                }
            }
            None => match self.latest.get_mut(name) {
                Some(slot) if slot.0 > ts => {}
                Some(slot) => *slot = (ts, value.clone()),
                None => {
                    self.latest.insert(name.to_owned(), (ts, value.clone()));
                }
            },
        }
    }

    fn prune_before(&mut self, cutoff: i64) {
        for m in self.numeric.values_mut() {
            *m = m.split_off(&cutoff);
        }
        self.numeric.retain(|_, m| !m.is_empty());
        self.latest.retain(|_, (t, _)| *t >= cutoff);
    }

    fn is_empty(&self) -> bool {
        self.numeric.is_empty() && self.latest.is_empty()
    }
}

/// In-memory time-series store, grouped by measurement then tag set.
#[derive(Debug, Clone, Default)]
pub struct Store {
    measurements: HashMap<String, BTreeMap<Tags, SeriesData>>,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sample: &MetricSample) {
        let by_tags = match self.measurements.get_mut(&sample.measurement) {
            Some(m) => m,
            None => self.measurements.entry(sample.measurement.clone()).or_default(),
        };
        let series = match by_tags.get_mut(&sample.tags) {
            Some(s) => s,
            None => by_tags.entry(sample.tags.clone()).or_default(),
        };
        for (name, value) in &sample.fields {
            series.insert(name, sample.timestamp, value);
        }
    }

    pub fn insert_all<'a, I: IntoIterator<Item = &'a MetricSample>>(&mut self, samples: I) {
        for s in samples {
            self.insert(s);
        }
    }

    /// Series of one measurement, ordered by tag set.
    pub fn series(&self, measurement: &str) -> impl Iterator<Item = (&Tags, &SeriesData)> + '_ {
        self.measurements.get(measurement).into_iter().flat_map(|m| m.iter())
    }

    pub fn get(&self, key: &SeriesKey) -> Option<&SeriesData> {
        self.measurements.get(&key.measurement)?.get(&key.tags)
    }

    pub fn measurements(&self) -> impl Iterator<Item = &str> + '_ {
        self.measurements.keys().map(String::as_str)
    }

    pub fn series_count(&self) -> usize {
        self.measurements.values().map(BTreeMap::len).sum()
    }

    /// Numeric points held across all series.
    pub fn point_count(&self) -> usize {
        self.measurements
            .values()
            .flat_map(BTreeMap::values)
            .map(SeriesData::point_count)
            .sum()
    }

    /// Timestamp of the newest point in any series.
    pub fn newest_timestamp(&self) -> Option<i64> {
        self.measurements
            .values()
            .flat_map(BTreeMap::values)
            .filter_map(SeriesData::last_timestamp)
            .max()
    }

    /// Drops points older than `cutoff` and any series left empty.
    pub fn prune_before(&mut self, cutoff: i64) {
        for by_tags in self.measurements.values_mut() {
            for s in by_tags.values_mut() {
                s.prune_before(cutoff);
            }
            by_tags.retain(|_, s| !s.is_empty());
        }
        self.measurements.retain(|_, m| !m.is_empty());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ts: i64, v: f64) -> MetricSample {
        MetricSample::new("cpu", ts).tag("host", "n1").field("load1", v)
    }

    #[test]
    fn insert_then_range_read() {
        let mut st = Store::new();
        st.insert(&sample(10, 1.5));
        let key = SeriesKey::new("cpu", Tags::from([("host".into(), "n1".into())]));
        let pts: Vec<_> = st.get(&key).unwrap().range("load1", 0, 100).collect();
        assert_eq!(st.get(&key).unwrap().range("load1", 100, 0).count(), 0);
        assert_eq!(pts, vec![(10, 1.5)]);
    }

    #[test]
    fn same_timestamp_overwrites() {
        let mut st = Store::new();
        st.insert(&sample(10, 1.0));
        st.insert(&sample(10, 2.0));
        assert_eq!(st.point_count(), 1);
        let (_, s) = st.series("cpu").next().unwrap();
        assert_eq!(s.latest("load1"), Some((10, FieldValue::Float(2.0))));
    }

    #[test]
    fn non_numeric_fields_keep_latest_only() {
        let mut st = Store::new();
        st.insert(&MetricSample::new("sys", 5).tag("host", "a").field("v", "x"));
        st.insert(&MetricSample::new("sys", 3).tag("host", "a").field("v", "old"));
        st.insert(&MetricSample::new("sys", 2).tag("host", "a").field("ok", true));
        let (_, s) = st.series("sys").next().unwrap();
        assert_eq!(s.latest("v"), Some((5, FieldValue::String("x".into()))));
        assert_eq!(s.latest("ok"), Some((2, FieldValue::Boolean(true))));
        assert_eq!(st.point_count(), 0);
        assert_eq!(s.last_timestamp(), Some(5));
    }

    #[test]
    fn prune_drops_old_points() {
        let mut st = Store::new();
        for t in 0..10 {
            st.insert(&sample(t, t as f64));
        }
        st.prune_before(7);
        assert_eq!(st.point_count(), 3);
        st.prune_before(100);
        assert_eq!(st.series_count(), 0);
    }
}
