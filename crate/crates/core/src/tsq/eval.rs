use std::collections::{BTreeMap, BTreeSet};

use super::functions::{
    mean_windows, nonneg_derivative, round_value, top_n, ResultRow, Value, MEAN, NON_NEGATIVE_DERIVATIVE, TOP,
};
use super::query::{Duration, Expr, Interval, Query, Source};
use super::store::{Store, Tags};

/// Rows produced by a query, with the column order used for display.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub name: String,
    /// Display columns after `time`: unprojected group tags, then projections.
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultSet {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Cell for `column` in `row`: a projected value or a group tag.
    pub fn cell(&self, row: &ResultRow, column: &str) -> Option<Value> {
        row.values
            .get(column)
            .cloned()
            .or_else(|| row.tags.get(column).map(|t| Value::Str(t.clone())))
    }
}

struct Group {
    tags: Tags,
    fields: BTreeMap<String, Vec<(i64, f64)>>,
}

/// Grouped numeric input for one query level.
struct Input {
    groups: Vec<Group>,
    group_tags: Vec<String>,
}

impl Input {
    fn from_store(store: &Store, measurement: &str, q: &Query, range: Interval, wanted: &BTreeSet<String>) -> Input {
        let mut by_group: BTreeMap<Tags, BTreeMap<String, Vec<(i64, f64)>>> = BTreeMap::new();
        for (tags, series) in store.series(measurement) {
            let key: Tags = q
                .group_by
                .tags
                .iter()
                .map(|k| (k.clone(), tags.get(k).cloned().unwrap_or_default()))
                .collect();
            let fields = by_group.entry(key).or_default();
            for name in wanted {
                let pts: Vec<_> = series.range(name, range.lo, range.hi).collect();
                if !pts.is_empty() {
                    fields.entry(name.clone()).or_default().extend(pts);
                }
            }
        }
        let groups = by_group
            .into_iter()
            .map(|(tags, mut fields)| {
                for pts in fields.values_mut() {
                    pts.sort_by_key(|(t, _)| *t);
                }
                Group { tags, fields }
            })
            .collect();
        Input {
            groups,
            group_tags: q.group_by.tags.clone(),
        }
    }

    fn from_rows(rows: &[ResultRow], group_tags: Vec<String>, range: Interval) -> Input {
        let mut by_group: BTreeMap<Tags, BTreeMap<String, Vec<(i64, f64)>>> = BTreeMap::new();
        for row in rows.iter().filter(|r| range.contains(r.time)) {
            let fields = by_group.entry(row.tags.clone()).or_default();
            for (name, v) in &row.values {
                if let Some(x) = v.as_f64() {
                    fields.entry(name.clone()).or_default().push((row.time, x));
                }
            }
        }
        let groups = by_group
            .into_iter()
            .map(|(tags, mut fields)| {
                for pts in fields.values_mut() {
                    pts.sort_by_key(|(t, _)| *t);
                }
                Group { tags, fields }
            })
            .collect();
        Input { groups, group_tags }
    }
}

struct Ctx {
    range: Interval,
    interval: Option<Duration>,
}

fn referenced_fields(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Ref(f) | Expr::Top { field: f, .. } => {
            out.insert(f.clone());
        }
        Expr::Mean(inner) | Expr::Round(inner) => referenced_fields(inner, out),
        Expr::NonNegativeDerivative { expr, .. } => referenced_fields(expr, out),
    }
}

/// Evaluates `e` to rows carrying one value, returned with that value's name.
fn eval_expr(e: &Expr, input: &Input, ctx: &Ctx) -> (Vec<ResultRow>, String) {
    match e {
        Expr::Ref(name) => {
            let mut rows = Vec::new();
            for g in &input.groups {
                for &(t, v) in g.fields.get(name).into_iter().flatten() {
                    rows.push(ResultRow::new(t, g.tags.clone()).with(name.clone(), Value::Float(v)));
                }
            }
            (rows, name.clone())
        }
        Expr::Mean(inner) => {
            let (rows, name) = eval_expr(inner, input, ctx);
            let mut per_group: BTreeMap<&Tags, Vec<(i64, f64)>> = BTreeMap::new();
            let mut order: Vec<&Tags> = Vec::new();
            for r in &rows {
                if let Some(v) = r.value(&name) {
                    per_group
                        .entry(&r.tags)
                        .or_insert_with(|| {
                            order.push(&r.tags);
                            Vec::new()
                        })
                        .push((r.time, v));
                }
            }
            let mut out = Vec::new();
            for tags in order {
                let pts = &per_group[tags];
                out.extend(mean_windows(pts, ctx.range, ctx.interval, tags));
            }
            (out, MEAN.to_owned())
        }
        Expr::NonNegativeDerivative { expr, unit } => {
            let (rows, name) = eval_expr(expr, input, ctx);
            (
                nonneg_derivative(&rows, &name, *unit),
                NON_NEGATIVE_DERIVATIVE.to_owned(),
            )
        }
        Expr::Round(inner) => {
            let (rows, name) = eval_expr(inner, input, ctx);
            let out = rows
                .into_iter()
                .filter_map(|r| {
                    let v = r.value(&name)?;
                    Some(ResultRow::new(r.time, r.tags).with("round", round_value(v)))
                })
                .collect();
            (out, "round".to_owned())
        }
        Expr::Top { field, n } => {
            let (rows, name) = eval_expr(&Expr::Ref(field.clone()), input, ctx);
            (top_n(&rows, &name, *n), TOP.to_owned())
        }
    }
}

fn unique_names(q: &Query) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    q.projections
        .iter()
        .map(|p| {
            let base = p.name().to_owned();
            let count = seen.entry(base.clone()).or_insert(0);
            let name = if *count == 0 {
                base.clone()
            } else {
                format!("{base}_{count}")
            };
            *count += 1;
            name
        })
        .collect()
}

fn eval_level(store: &Store, q: &Query, now: i64) -> ResultSet {
    let range = q.range.resolve(now);
    let input = match &q.source {
        Source::Measurement(m) => {
            let mut wanted = BTreeSet::new();
            for p in &q.projections {
                referenced_fields(&p.expr, &mut wanted);
            }
            Input::from_store(store, m, q, range, &wanted)
        }
        Source::Subquery(sub) => {
            let inner = eval_level(store, sub, now);
            Input::from_rows(&inner.rows, sub.group_by.tags.clone(), range)
        }
    };
    let ctx = Ctx {
        range,
        interval: q.group_by.interval,
    };

    let names = unique_names(q);
    let is_tag = |e: &Expr| matches!(e, Expr::Ref(n) if input.group_tags.contains(n));

    let mut value_cols: Vec<(String, Vec<ResultRow>, String)> = Vec::new();
    let mut tag_cols: Vec<(String, String)> = Vec::new();
    for (p, col) in q.projections.iter().zip(&names) {
        match &p.expr {
            Expr::Ref(tag) if is_tag(&p.expr) => tag_cols.push((col.clone(), tag.clone())),
            e => {
                let (rows, vname) = eval_expr(e, &input, &ctx);
                value_cols.push((col.clone(), rows, vname));
            }
        }
    }

    let attach_tags = |row: &mut ResultRow| {
        for (col, tag) in &tag_cols {
            if let Some(v) = row.tags.get(tag) {
                row.values.insert(col.clone(), Value::Str(v.clone()));
            }
        }
    };

    let has_top = q.projections.iter().any(|p| p.expr.contains_top());
    let rows = if has_top {
        // Selector output keeps the selector's order.
        let (col, rows, vname) = value_cols.pop().expect("TOP projection present");
        rows.into_iter()
            .map(|r| {
                let mut row = ResultRow::new(r.time, r.tags.clone());
                if let Some(v) = r.values.get(&vname) {
                    row.values.insert(col.clone(), v.clone());
                }
                attach_tags(&mut row);
                row
            })
            .collect()
    } else {
        let mut joined: BTreeMap<(Tags, i64), BTreeMap<String, Value>> = BTreeMap::new();
        for (col, rows, vname) in value_cols {
            for r in rows {
                if let Some(v) = r.values.get(&vname) {
                    joined
                        .entry((r.tags.clone(), r.time))
                        .or_default()
                        .insert(col.clone(), v.clone());
                }
            }
        }
        joined
            .into_iter()
            .map(|((tags, time), values)| {
                let mut row = ResultRow { time, tags, values };
                attach_tags(&mut row);
                row
            })
            .collect()
    };

    let projected_tags: BTreeSet<&str> = tag_cols.iter().map(|(_, t)| t.as_str()).collect();
    let mut columns: Vec<String> = input
        .group_tags
        .iter()
        .filter(|t| !projected_tags.contains(t.as_str()))
        .cloned()
        .collect();
    columns.extend(names);
    ResultSet {
        name: q.measurement().to_owned(),
        columns,
        rows,
    }
}

/// Evaluates a parsed query against `store` with `now` anchoring relative
/// time literals. Missing fields or measurements yield an empty result.
pub fn eval_query(store: &Store, q: &Query, now: i64) -> ResultSet {
    eval_level(store, q, now)
}
