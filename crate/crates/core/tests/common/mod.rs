//! Oracles and generators shared by the property suites and the acceptance
//! target.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use clusterview::assoc::{AssocArray, KeySelector};
use clusterview::tsq::{ResultRow, Store, Tags, Value};
use clusterview::wire::MetricSample;
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// Associative arrays against dense matrices

pub const ROWS: [&str; 5] = ["a", "b", "c", "d", "e"];
pub const MIDS: [&str; 4] = ["k0", "k1", "k2", "k3"];
pub const COLS: [&str; 5] = ["v", "w", "x", "y", "z"];

/// Row-major dense matrix over fixed key universes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<f64>>,
}

impl Dense {
    pub fn zeros(rows: &[&str], cols: &[&str]) -> Self {
        Dense {
            rows: rows.iter().map(|s| s.to_string()).collect(),
            cols: cols.iter().map(|s| s.to_string()).collect(),
            cells: vec![vec![0.0; cols.len()]; rows.len()],
        }
    }

    pub fn to_assoc(&self) -> AssocArray {
        let mut t = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            for (j, c) in self.cols.iter().enumerate() {
                if self.cells[i][j] != 0.0 {
                    t.push((r.clone(), c.clone(), self.cells[i][j]));
                }
            }
        }
        AssocArray::from_triples(t).unwrap()
    }

    pub fn add(&self, o: &Dense) -> Dense {
        let mut out = self.clone();
        for i in 0..self.rows.len() {
            for j in 0..self.cols.len() {
                out.cells[i][j] += o.cells[i][j];
            }
        }
        out
    }

    pub fn matmul(&self, o: &Dense) -> Dense {
        let mut out = Dense {
            rows: self.rows.clone(),
            cols: o.cols.clone(),
            cells: vec![vec![0.0; o.cols.len()]; self.rows.len()],
        };
        for i in 0..self.rows.len() {
            for j in 0..o.cols.len() {
                let mut s = 0.0;
                for k in 0..self.cols.len() {
                    s += self.cells[i][k] * o.cells[k][j];
                }
                out.cells[i][j] = s;
            }
        }
        out
    }

    pub fn transpose(&self) -> Dense {
        let mut out = Dense {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            cells: vec![vec![0.0; self.rows.len()]; self.cols.len()],
        };
        for i in 0..self.rows.len() {
            for j in 0..self.cols.len() {
                out.cells[j][i] = self.cells[i][j];
            }
        }
        out
    }

    pub fn mask(&self, keep_row: impl Fn(&str) -> bool, keep_col: impl Fn(&str) -> bool) -> Dense {
        let mut out = self.clone();
        for (i, r) in self.rows.iter().enumerate() {
            for (j, c) in self.cols.iter().enumerate() {
                if !(keep_row(r) && keep_col(c)) {
                    out.cells[i][j] = 0.0;
                }
            }
        }
        out
    }

    /// Checks that `a` holds exactly the non-zero cells, with no extras.
    pub fn matches(&self, a: &AssocArray) -> Result<(), String> {
        let mut nonzero = 0;
        for (i, r) in self.rows.iter().enumerate() {
            for (j, c) in self.cols.iter().enumerate() {
                let want = self.cells[i][j];
                let got = a.get(r, c);
                if want == 0.0 {
                    if got.is_some() {
                        return Err(format!("({r},{c}) should be absent, got {got:?}"));
                    }
                } else {
                    nonzero += 1;
                    if got != Some(want) {
                        return Err(format!("({r},{c}) = {got:?}, want {want}"));
                    }
                }
            }
        }
        if a.len() != nonzero {
            return Err(format!("{} entries, want {nonzero}", a.len()));
        }
        if a.iter().any(|(_, _, v)| v == 0.0) {
            return Err("explicit zero stored".into());
        }
        Ok(())
    }
}

/// Small integer cells keep float sums exact, and frequent zeros exercise
/// pruning.
pub fn dense(rows: &'static [&'static str], cols: &'static [&'static str]) -> impl Strategy<Value = Dense> {
    prop::collection::vec(
        prop::collection::vec(prop_oneof![3 => Just(0i32), 2 => -4i32..=4], cols.len()),
        rows.len(),
    )
    .prop_map(move |cells| Dense {
        rows: rows.iter().map(|s| s.to_string()).collect(),
        cols: cols.iter().map(|s| s.to_string()).collect(),
        cells: cells
            .into_iter()
            .map(|r| r.into_iter().map(f64::from).collect())
            .collect(),
    })
}

#[derive(Debug, Clone)]
pub enum SelSpec {
    All,
    Range(Option<usize>, Option<usize>),
    Set(Vec<usize>),
}

impl SelSpec {
    pub fn build(&self, keys: &[&str]) -> KeySelector {
        match self {
            SelSpec::All => KeySelector::All,
            SelSpec::Range(lo, hi) => KeySelector::Range {
                lower: lo.map(|i| keys[i].to_string()),
                upper: hi.map(|i| keys[i].to_string()),
            },
            SelSpec::Set(ix) => KeySelector::set(ix.iter().map(|&i| keys[i])),
        }
    }

    /// Oracle membership, computed from key indices.
    pub fn keep(&self, keys: &[&str], key: &str) -> bool {
        let i = keys.iter().position(|k| *k == key).unwrap();
        match self {
            SelSpec::All => true,
            SelSpec::Range(lo, hi) => lo.is_none_or(|l| i >= l) && hi.is_none_or(|h| i <= h),
            SelSpec::Set(ix) => ix.contains(&i),
        }
    }
}

pub fn selector(n: usize) -> impl Strategy<Value = SelSpec> {
    prop_oneof![
        Just(SelSpec::All),
        (prop::option::of(0..n), prop::option::of(0..n)).prop_map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) if a > b => SelSpec::Range(Some(b), Some(a)),
            (a, b) => SelSpec::Range(a, b),
        }),
        prop::collection::vec(0..n, 0..n).prop_map(SelSpec::Set),
    ]
}

/// Runs every operation against the dense oracle plus the algebraic
/// identities. Returns a description of the first mismatch.
pub fn check_add(a: &Dense, b: &Dense) -> Result<(), String> {
    let (x, y) = (a.to_assoc(), b.to_assoc());
    a.add(b).matches(&x.add(&y)).map_err(|e| format!("add: {e}"))?;
    if x.add(&y) != y.add(&x) {
        return Err("add is not commutative".into());
    }
    Ok(())
}

pub fn check_matmul(a: &Dense, b: &Dense) -> Result<(), String> {
    let (x, y) = (a.to_assoc(), b.to_assoc());
    let xy = x.matmul(&y);
    a.matmul(b).matches(&xy).map_err(|e| format!("matmul: {e}"))?;
    // (AB)^T = B^T A^T
    if xy.transpose() != y.transpose().matmul(&x.transpose()) {
        return Err("matmul-transpose identity fails".into());
    }
    Ok(())
}

pub fn check_transpose(a: &Dense) -> Result<(), String> {
    let x = a.to_assoc();
    a.transpose()
        .matches(&x.transpose())
        .map_err(|e| format!("transpose: {e}"))?;
    if x.transpose().transpose() != x {
        return Err("transpose is not an involution".into());
    }
    Ok(())
}

pub fn check_select(a: &Dense, rs: &SelSpec, cs: &SelSpec) -> Result<(), String> {
    let x = a.to_assoc();
    let got = x
        .select(&rs.build(&ROWS), &cs.build(&COLS))
        .map_err(|e| format!("select failed: {e}"))?;
    a.mask(|r| rs.keep(&ROWS, r), |c| cs.keep(&COLS, c))
        .matches(&got)
        .map_err(|e| format!("select {rs:?} {cs:?}: {e}"))
}

// ---------------------------------------------------------------------------
// Query engine against a brute-force evaluator over raw points

pub const SECOND: i64 = 1_000_000_000;
pub const MEASUREMENT: &str = "m";
pub const TAG_KEYS: [&str; 2] = ["host", "job"];
pub const FIELDS: [&str; 2] = ["f", "g"];

/// One raw point: tags, time and field values.
#[derive(Debug, Clone)]
pub struct RawPoint {
    pub tags: Tags,
    pub time: i64,
    pub fields: BTreeMap<String, f64>,
}

pub fn raw_points() -> impl Strategy<Value = Vec<RawPoint>> {
    let point = (
        0..3usize,
        prop::option::of(0..3usize),
        0..240i64,
        prop::option::of(-50i32..=50),
        prop::option::of(prop_oneof![(-50i32..=50).prop_map(f64::from), -5.0..5.0f64]),
    );
    prop::collection::vec(point, 0..60).prop_map(|pts| {
        let mut seen = BTreeSet::new();
        pts.into_iter()
            .filter_map(|(h, j, t, f, g)| {
                let mut tags = Tags::from([("host".to_string(), format!("h{h}"))]);
                if let Some(j) = j {
                    tags.insert("job".into(), format!("j{j}"));
                }
                let time = t * 15 * SECOND;
                // One point per series and timestamp, as in a real store.
                if !seen.insert((tags.clone(), time, f.is_some(), g.is_some())) {
                    return None;
                }
                let mut fields = BTreeMap::new();
                if let Some(f) = f {
                    fields.insert("f".to_string(), f64::from(f));
                }
                if let Some(g) = g {
                    fields.insert("g".to_string(), g);
                }
                if fields.is_empty() {
                    return None;
                }
                Some(RawPoint { tags, time, fields })
            })
            .collect()
    })
}

pub fn store_of(points: &[RawPoint]) -> Store {
    let mut st = Store::new();
    for p in points {
        let mut s = MetricSample::new(MEASUREMENT, p.time);
        for (k, v) in &p.tags {
            s = s.tag(k.clone(), v.clone());
        }
        for (k, v) in &p.fields {
            s = s.field(k.clone(), *v);
        }
        st.insert(&s);
    }
    st
}

/// Latest value per (series, time, field): later points overwrite earlier
/// ones, as the store does.
fn dedup(points: &[RawPoint]) -> Vec<RawPoint> {
    let mut m: BTreeMap<(Tags, i64), BTreeMap<String, f64>> = BTreeMap::new();
    for p in points {
        let e = m.entry((p.tags.clone(), p.time)).or_default();
        for (k, v) in &p.fields {
            e.insert(k.clone(), *v);
        }
    }
    m.into_iter()
        .map(|((tags, time), fields)| RawPoint { tags, time, fields })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub enum Bound {
    Abs(i64),
    NowMinus(i64),
}

#[derive(Debug, Clone)]
pub struct RangeSpec {
    pub lower: Option<(Bound, bool)>,
    pub upper: Option<(Bound, bool)>,
}

impl RangeSpec {
    fn resolve_bound(b: Bound, now: i64) -> i64 {
        match b {
            Bound::Abs(t) => t,
            Bound::NowMinus(s) => now - s * SECOND,
        }
    }

    pub fn contains(&self, t: i64, now: i64) -> bool {
        let lo_ok = self.lower.is_none_or(|(b, inc)| {
            let x = Self::resolve_bound(b, now);
            if inc {
                t >= x
            } else {
                t > x
            }
        });
        let hi_ok = self.upper.is_none_or(|(b, inc)| {
            let x = Self::resolve_bound(b, now);
            if inc {
                t <= x
            } else {
                t < x
            }
        });
        lo_ok && hi_ok
    }

    /// Stamp of a whole-range mean: the inclusive lower bound, or 0.
    pub fn whole_stamp(&self, now: i64) -> i64 {
        match self.lower {
            None => 0,
            Some((b, true)) => Self::resolve_bound(b, now),
            Some((b, false)) => Self::resolve_bound(b, now) + 1,
        }
    }

    pub fn text(&self) -> String {
        let fmt = |b: Bound| match b {
            Bound::Abs(t) => t.to_string(),
            Bound::NowMinus(s) => format!("now() - {s}s"),
        };
        let mut parts = Vec::new();
        if let Some((b, inc)) = self.lower {
            parts.push(format!("time {} {}", if inc { ">=" } else { ">" }, fmt(b)));
        }
        if let Some((b, inc)) = self.upper {
            parts.push(format!("time {} {}", if inc { "<=" } else { "<" }, fmt(b)));
        }
        if parts.is_empty() {
            String::new()
        } else {
            format!(" WHERE {}", parts.join(" AND "))
        }
    }
}

#[derive(Debug, Clone)]
pub enum QuerySpec {
    /// `SELECT [ROUND(]MEAN(f)[)], ... FROM m [WHERE] [GROUP BY tags, time(w)]`
    Mean {
        fields: Vec<&'static str>,
        round: bool,
        range: RangeSpec,
        tags: Vec<&'static str>,
        window_s: Option<i64>,
    },
    /// `SELECT NON_NEGATIVE_DERIVATIVE(MEAN(f), u) ... GROUP BY tags, time(w)`
    Derivative {
        field: &'static str,
        unit_s: i64,
        range: RangeSpec,
        tags: Vec<&'static str>,
        window_s: i64,
    },
    /// `SELECT [tag,] [ROUND(]TOP(f, n)[)] FROM m [WHERE] [GROUP BY tags]`
    Top {
        field: &'static str,
        n: usize,
        round: bool,
        tag_col: Option<&'static str>,
        range: RangeSpec,
        tags: Vec<&'static str>,
    },
    /// Top-n of bucket derivatives through a subquery.
    Nested {
        field: &'static str,
        n: usize,
        window_s: i64,
        range: RangeSpec,
        tag: &'static str,
    },
}

fn bound() -> impl Strategy<Value = Bound> {
    prop_oneof![
        (0..3600i64).prop_map(|s| Bound::Abs(s * SECOND)),
        (1..3600i64).prop_map(Bound::NowMinus),
    ]
}

fn range_spec() -> impl Strategy<Value = RangeSpec> {
    (
        prop::option::of((bound(), any::<bool>())),
        prop::option::of((bound(), any::<bool>())),
    )
        .prop_map(|(lower, upper)| RangeSpec { lower, upper })
}

fn group_tags() -> impl Strategy<Value = Vec<&'static str>> {
    prop_oneof![
        Just(vec![]),
        Just(vec!["host"]),
        Just(vec!["job"]),
        Just(vec!["host", "job"]),
    ]
}

const WINDOWS: [i64; 4] = [30, 60, 300, 600];

pub fn query_spec() -> impl Strategy<Value = QuerySpec> {
    let window = prop::sample::select(WINDOWS.to_vec());
    prop_oneof![
        (
            prop_oneof![Just(vec!["f"]), Just(vec!["g"]), Just(vec!["f", "g"])],
            any::<bool>(),
            range_spec(),
            group_tags(),
            prop::option::of(window.clone()),
        )
            .prop_map(|(fields, round, range, tags, window_s)| QuerySpec::Mean {
                fields,
                round,
                range,
                tags,
                window_s,
            }),
        (
            prop::sample::select(FIELDS.to_vec()),
            prop::sample::select(vec![1i64, 60, 600]),
            range_spec(),
            group_tags(),
            window.clone(),
        )
            .prop_map(|(field, unit_s, range, tags, window_s)| QuerySpec::Derivative {
                field,
                unit_s,
                range,
                tags,
                window_s,
            }),
        (
            prop::sample::select(FIELDS.to_vec()),
            1..8usize,
            any::<bool>(),
            range_spec(),
            group_tags(),
        )
            .prop_flat_map(|(field, n, round, range, tags)| {
                let choices: Vec<Option<&'static str>> =
                    std::iter::once(None).chain(tags.iter().map(|t| Some(*t))).collect();
                prop::sample::select(choices).prop_map(move |tag_col| QuerySpec::Top {
                    field,
                    n,
                    round,
                    tag_col,
                    range: range.clone(),
                    tags: tags.clone(),
                })
            }),
        (
            prop::sample::select(FIELDS.to_vec()),
            1..10usize,
            window,
            range_spec(),
            prop::sample::select(TAG_KEYS.to_vec()),
        )
            .prop_map(|(field, n, window_s, range, tag)| QuerySpec::Nested {
                field,
                n,
                window_s,
                range,
                tag,
            }),
    ]
}

fn group_clause(tags: &[&str], window_s: Option<i64>) -> String {
    let mut parts: Vec<String> = tags.iter().map(|t| format!("\"{t}\"")).collect();
    if let Some(w) = window_s {
        parts.push(format!("time({w}s)"));
    }
    if parts.is_empty() {
        String::new()
    } else {
        format!(" GROUP BY {}", parts.join(", "))
    }
}

impl QuerySpec {
    pub fn text(&self) -> String {
        match self {
            QuerySpec::Mean {
                fields,
                round,
                range,
                tags,
                window_s,
            } => {
                let proj: Vec<String> = fields
                    .iter()
                    .map(|f| {
                        if *round {
                            format!("ROUND(MEAN(\"{f}\")) AS \"{f}_avg\"")
                        } else {
                            format!("MEAN(\"{f}\") AS \"{f}_avg\"")
                        }
                    })
                    .collect();
                format!(
                    "SELECT {} FROM \"{MEASUREMENT}\"{}{}",
                    proj.join(", "),
                    range.text(),
                    group_clause(tags, *window_s)
                )
            }
            QuerySpec::Derivative {
                field,
                unit_s,
                range,
                tags,
                window_s,
            } => format!(
                "SELECT NON_NEGATIVE_DERIVATIVE(MEAN(\"{field}\"), {unit_s}s) AS \"d\" FROM \"{MEASUREMENT}\"{}{}",
                range.text(),
                group_clause(tags, Some(*window_s))
            ),
            QuerySpec::Top {
                field,
                n,
                round,
                tag_col,
                range,
                tags,
            } => {
                let sel = if *round {
                    format!("ROUND(TOP(\"{field}\", {n})) AS \"t\"")
                } else {
                    format!("TOP(\"{field}\", {n}) AS \"t\"")
                };
                let proj = match tag_col {
                    Some(t) => format!("\"{t}\", {sel}"),
                    None => sel,
                };
                format!(
                    "SELECT {proj} FROM \"{MEASUREMENT}\"{}{}",
                    range.text(),
                    group_clause(tags, None)
                )
            }
            QuerySpec::Nested {
                field,
                n,
                window_s,
                range,
                tag,
            } => format!(
                "SELECT \"{tag}\", ROUND(TOP(\"x\", {n})) AS \"top_x\" FROM (SELECT NON_NEGATIVE_DERIVATIVE(MEAN(\"{field}\"), {window_s}s) AS \"x\" FROM \"{MEASUREMENT}\"{} GROUP BY \"{tag}\", time({window_s}s))",
                range.text()
            ),
        }
    }
}

/// Expected output row: time, group tags, column values.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub time: i64,
    pub tags: Tags,
    pub values: BTreeMap<String, Value>,
}

fn group_key(tags: &Tags, keys: &[&str]) -> Tags {
    keys.iter()
        .map(|k| (k.to_string(), tags.get(*k).cloned().unwrap_or_default()))
        .collect()
}

fn floor_to(t: i64, w: i64) -> i64 {
    t - t.rem_euclid(w)
}

fn round_half_away(v: f64) -> Value {
    let r = v.abs().floor() + if v.abs().fract() >= 0.5 { 1.0 } else { 0.0 };
    Value::Int((r.copysign(v)) as i64)
}

/// Per-group bucket means computed by scanning every raw point for every
/// candidate bucket.
fn brute_means(
    pts: &[RawPoint],
    field: &str,
    range: &RangeSpec,
    keys: &[&str],
    window_s: Option<i64>,
    now: i64,
) -> BTreeMap<Tags, Vec<(i64, f64)>> {
    let inside: Vec<&RawPoint> = pts
        .iter()
        .filter(|p| p.fields.contains_key(field) && range.contains(p.time, now))
        .collect();
    let groups: BTreeSet<Tags> = inside.iter().map(|p| group_key(&p.tags, keys)).collect();
    let mut out = BTreeMap::new();
    for g in groups {
        let members: Vec<&&RawPoint> = inside.iter().filter(|p| group_key(&p.tags, keys) == g).collect();
        let stamps: BTreeSet<i64> = members
            .iter()
            .map(|p| match window_s {
                Some(w) => floor_to(p.time, w * SECOND),
                None => range.whole_stamp(now),
            })
            .collect();
        let mut rows = Vec::new();
        for s in stamps {
            let mut in_bucket: Vec<(i64, f64)> = members
                .iter()
                .filter(|p| match window_s {
                    Some(w) => p.time >= s && p.time < s + w * SECOND,
                    None => true,
                })
                .map(|p| (p.time, p.fields[field]))
                .collect();
            in_bucket.sort_by_key(|x| x.0);
            let sum: f64 = in_bucket.iter().map(|x| x.1).sum();
            rows.push((s, sum / in_bucket.len() as f64));
        }
        out.insert(g, rows);
    }
    out
}

fn brute_derivative(means: &BTreeMap<Tags, Vec<(i64, f64)>>, unit_s: i64) -> Vec<(Tags, i64, f64)> {
    let mut out = Vec::new();
    for (g, rows) in means {
        for w in rows.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            let rate = (v1 - v0) * (unit_s * SECOND) as f64 / (t1 - t0) as f64;
            if rate >= 0.0 {
                out.push((g.clone(), t1, rate));
            }
        }
    }
    out
}

/// Ranks candidates descending by value, then earlier time, then tags.
fn brute_top(mut cands: Vec<(Tags, i64, f64)>, n: usize) -> Vec<(Tags, i64, f64)> {
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then_with(|| a.0.cmp(&b.0)));
    cands.truncate(n);
    cands
}

pub fn oracle(spec: &QuerySpec, points: &[RawPoint], now: i64) -> Vec<OracleRow> {
    let pts = dedup(points);
    match spec {
        QuerySpec::Mean {
            fields,
            round,
            range,
            tags,
            window_s,
        } => {
            let mut joined: BTreeMap<(Tags, i64), BTreeMap<String, Value>> = BTreeMap::new();
            for f in fields {
                for (g, rows) in brute_means(&pts, f, range, tags, *window_s, now) {
                    for (t, v) in rows {
                        let v = if *round { round_half_away(v) } else { Value::Float(v) };
                        joined.entry((g.clone(), t)).or_default().insert(format!("{f}_avg"), v);
                    }
                }
            }
            joined
                .into_iter()
                .map(|((tags, time), values)| OracleRow { time, tags, values })
                .collect()
        }
        QuerySpec::Derivative {
            field,
            unit_s,
            range,
            tags,
            window_s,
        } => {
            let means = brute_means(&pts, field, range, tags, Some(*window_s), now);
            let mut rows: Vec<OracleRow> = brute_derivative(&means, *unit_s)
                .into_iter()
                .map(|(tags, time, v)| OracleRow {
                    time,
                    tags,
                    values: BTreeMap::from([("d".to_string(), Value::Float(v))]),
                })
                .collect();
            rows.sort_by(|a, b| (&a.tags, a.time).cmp(&(&b.tags, b.time)));
            rows
        }
        QuerySpec::Top {
            field,
            n,
            round,
            tag_col,
            range,
            tags,
        } => {
            let cands = pts
                .iter()
                .filter(|p| range.contains(p.time, now))
                .filter_map(|p| p.fields.get(*field).map(|v| (group_key(&p.tags, tags), p.time, *v)))
                .collect();
            brute_top(cands, *n)
                .into_iter()
                .map(|(g, time, v)| {
                    let mut values = BTreeMap::new();
                    values.insert(
                        "t".to_string(),
                        if *round { round_half_away(v) } else { Value::Float(v) },
                    );
                    if let Some(tc) = tag_col {
                        values.insert(tc.to_string(), Value::Str(g[*tc].clone()));
                    }
                    OracleRow { time, tags: g, values }
                })
                .collect()
        }
        QuerySpec::Nested {
            field,
            n,
            window_s,
            range,
            tag,
        } => {
            let means = brute_means(&pts, field, range, &[tag], Some(*window_s), now);
            let derivs = brute_derivative(&means, *window_s);
            brute_top(derivs, *n)
                .into_iter()
                .map(|(g, time, v)| {
                    let mut values = BTreeMap::new();
                    values.insert("top_x".to_string(), round_half_away(v));
                    values.insert(tag.to_string(), Value::Str(g[*tag].clone()));
                    OracleRow { time, tags: g, values }
                })
                .collect()
        }
    }
}

/// Integers must match exactly; floats within 1e-9 relative.
pub fn rows_match(got: &[ResultRow], want: &[OracleRow]) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!(
            "{} rows, want {}: got {got:?}, want {want:?}",
            got.len(),
            want.len()
        ));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if g.time != w.time || g.tags != w.tags {
            return Err(format!(
                "row {i}: ({}, {:?}) want ({}, {:?})",
                g.time, g.tags, w.time, w.tags
            ));
        }
        if g.values.keys().collect::<Vec<_>>() != w.values.keys().collect::<Vec<_>>() {
            return Err(format!("row {i}: columns {:?} want {:?}", g.values, w.values));
        }
        for (k, wv) in &w.values {
            let gv = &g.values[k];
            let ok = match (gv, wv) {
                (Value::Int(a), Value::Int(b)) => a == b,
                (Value::Float(a), Value::Float(b)) => a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()),
                (Value::Str(a), Value::Str(b)) => a == b,
                _ => false,
            };
            if !ok {
                return Err(format!("row {i} column {k}: {gv:?} want {wv:?}"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Simulator driving a service in process, one evaluation per simulated tick

use std::sync::Arc;

use clusterview::service::{ClusterSnapshot, Service, ServiceConfig, StreamEvent};
use clusterview::sim::{SimConfig, Simulator, TickOutput, TopologySpec};

pub struct Session {
    pub sim: Simulator,
    pub svc: Service,
}

impl Session {
    pub fn new(cfg: SimConfig) -> Session {
        let svc = Service::new(ServiceConfig {
            topology: cfg.topology.clone(),
            ..Default::default()
        })
        .expect("service config is valid");
        Session {
            sim: Simulator::new(cfg).expect("sim config is valid"),
            svc,
        }
    }

    /// Feeds one tick to the service without evaluating.
    pub fn feed(&mut self) -> TickOutput {
        let t = self.sim.step();
        self.svc.apply_job_events(&t.job_events);
        let rep = self.svc.apply_ingest(&t.telemetry, t.timestamp);
        assert_eq!(rep.rejected, 0, "simulator output must parse: {:?}", rep.first_errors);
        t
    }

    pub fn step(&mut self) -> (Arc<ClusterSnapshot>, Vec<StreamEvent>) {
        let t = self.feed();
        self.svc.evaluation_tick(t.timestamp)
    }
}

/// Two racks of CPU nodes with a GPU share, so every scenario has targets.
pub fn mixed_topology(seed: u64) -> TopologySpec {
    TopologySpec {
        racks: 2,
        nodes_per_rack: 16,
        profiles: vec![("xeon-p8260".into(), 3.0), ("gaia-v100".into(), 1.0)],
        seed,
        ..Default::default()
    }
}

/// Serializes timing-sensitive tests within one test binary.
pub fn serial() -> std::sync::MutexGuard<'static, ()> {
    static LOCK: std::sync::Mutex<()> = std::sync::Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}
