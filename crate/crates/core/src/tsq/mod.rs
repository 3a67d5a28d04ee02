//! In-memory time-series store and a query-language subset covering mean
//! windows, non-negative derivatives, top-n selection and rounding over one
//! level of subquery.

mod eval;
mod format;
mod functions;
mod query;
mod store;

pub use eval::{eval_query, ResultSet};
pub use format::rfc3339;
pub use functions::{
    bucket_start, mean_windows, nonneg_derivative, round_value, top_n, ResultRow, Value, MEAN, NON_NEGATIVE_DERIVATIVE,
    TOP,
};
pub use query::{
    parse_query, Duration, Expr, GroupBy, Interval, Projection, Query, QueryError, QueryErrorKind, Source, TimeBound,
    TimeExpr, TimeRange, NANOS_PER_SECOND,
};
pub use store::{SeriesData, SeriesKey, Store, Tags};

/// Parses and evaluates in one step.
pub fn run_query(store: &Store, text: &str, now: i64) -> Result<ResultSet, QueryError> {
    let q = parse_query(text)?;
    Ok(eval_query(store, &q, now))
}
