//! Query-language subset: lexer, AST and recursive-descent parser.
//!
//! ```text
//! SELECT <expr> [AS <name>][, ...]
//!   FROM (<measurement> | (<subquery>))
//!   [WHERE time <op> <t> [AND time <op> <t>]]
//!   [GROUP BY <tag>[, ...][, time(<dur>)]]
//! ```
//!
//! Functions: `MEAN(expr)`, `TOP(field, n)`, `ROUND(expr)` and
//! `NON_NEGATIVE_DERIVATIVE(expr[, dur])`. Durations are `<int>(s|m|h)`;
//! time literals are `now()`, `now() - <dur>`, RFC 3339 strings or integer
//! nanoseconds.

use std::fmt;

use thiserror::Error;

pub const NANOS_PER_SECOND: i64 = 1_000_000_000;

/// A strictly positive span of time in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Duration(i64);

impl Duration {
    pub fn from_nanos(ns: i64) -> Option<Self> {
        (ns > 0).then_some(Duration(ns))
    }

    pub fn from_secs(s: i64) -> Option<Self> {
        s.checked_mul(NANOS_PER_SECOND).and_then(Self::from_nanos)
    }

    pub fn from_mins(m: i64) -> Option<Self> {
        Self::from_secs(m.checked_mul(60)?)
    }

    pub fn nanos(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0 / NANOS_PER_SECOND;
        if self.0 % NANOS_PER_SECOND != 0 {
            write!(f, "{}ns", self.0)
        } else if s % 3600 == 0 {
            write!(f, "{}h", s / 3600)
        } else if s % 60 == 0 {
            write!(f, "{}m", s / 60)
        } else {
            write!(f, "{s}s")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Ref(String),
    Mean(Box<Expr>),
    Top { field: String, n: usize },
    Round(Box<Expr>),
    NonNegativeDerivative { expr: Box<Expr>, unit: Duration },
}

impl Expr {
    /// Column name used when no alias is given.
    pub fn default_name(&self) -> &str {
        match self {
            Expr::Ref(name) => name,
            Expr::Mean(_) => "mean",
            Expr::Top { .. } => "top",
            Expr::Round(_) => "round",
            Expr::NonNegativeDerivative { .. } => "non_negative_derivative",
        }
    }

    pub fn function_count(&self) -> usize {
        match self {
            Expr::Ref(_) => 0,
            Expr::Top { .. } => 1,
            Expr::Mean(e) | Expr::Round(e) => 1 + e.function_count(),
            Expr::NonNegativeDerivative { expr, .. } => 1 + expr.function_count(),
        }
    }

    pub fn contains_top(&self) -> bool {
        match self {
            Expr::Ref(_) => false,
            Expr::Top { .. } => true,
            Expr::Mean(e) | Expr::Round(e) => e.contains_top(),
            Expr::NonNegativeDerivative { expr, .. } => expr.contains_top(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Ref(name) => write!(f, "{name:?}"),
            Expr::Mean(e) => write!(f, "MEAN({e})"),
            Expr::Top { field, n } => write!(f, "TOP({field:?}, {n})"),
            Expr::Round(e) => write!(f, "ROUND({e})"),
            Expr::NonNegativeDerivative { expr, unit } => {
                write!(f, "NON_NEGATIVE_DERIVATIVE({expr}, {unit})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl Projection {
    pub fn name(&self) -> &str {
        self.alias.as_deref().unwrap_or_else(|| self.expr.default_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Measurement(String),
    Subquery(Box<Query>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeExpr {
    Now,
    NowMinus(Duration),
    NowPlus(Duration),
    Absolute(i64),
}

impl TimeExpr {
    pub fn resolve(self, now: i64) -> i64 {
        match self {
            TimeExpr::Now => now,
            TimeExpr::NowMinus(d) => now.saturating_sub(d.nanos()),
            TimeExpr::NowPlus(d) => now.saturating_add(d.nanos()),
            TimeExpr::Absolute(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeBound {
    pub at: TimeExpr,
    pub inclusive: bool,
}

/// `time` predicate. Missing sides are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TimeRange {
    pub lower: Option<TimeBound>,
    pub upper: Option<TimeBound>,
}

/// Concrete inclusive interval `[lo, hi]` in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub const ALL: Interval = Interval {
        lo: i64::MIN,
        hi: i64::MAX,
    };

    pub fn contains(&self, t: i64) -> bool {
        self.lo <= t && t <= self.hi
    }
}

impl TimeRange {
    pub fn resolve(&self, now: i64) -> Interval {
        let lo = match self.lower {
            None => i64::MIN,
            Some(b) if b.inclusive => b.at.resolve(now),
            Some(b) => b.at.resolve(now).saturating_add(1),
        };
        let hi = match self.upper {
            None => i64::MAX,
            Some(b) if b.inclusive => b.at.resolve(now),
            Some(b) => b.at.resolve(now).saturating_sub(1),
        };
        Interval { lo, hi }
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.is_none() && self.upper.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupBy {
    pub tags: Vec<String>,
    pub interval: Option<Duration>,
}

impl GroupBy {
    pub fn is_empty(&self) -> bool {
        self.tags.is_empty() && self.interval.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub projections: Vec<Projection>,
    pub source: Source,
    pub range: TimeRange,
    pub group_by: GroupBy,
}

impl Query {
    pub fn subquery(&self) -> Option<&Query> {
        match &self.source {
            Source::Subquery(q) => Some(q),
            Source::Measurement(_) => None,
        }
    }

    /// Name of the measurement ultimately read.
    pub fn measurement(&self) -> &str {
        match &self.source {
            Source::Measurement(m) => m,
            Source::Subquery(q) => q.measurement(),
        }
    }

    /// Number of data-transformation functions, counting a `time(...)`
    /// bucketing clause as one.
    pub fn function_count(&self) -> usize {
        let own: usize = self.projections.iter().map(|p| p.expr.function_count()).sum::<usize>()
            + usize::from(self.group_by.interval.is_some());
        own + self.subquery().map_or(0, Query::function_count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEnd(String),
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("{func} expects {expected}")]
    Arity { func: &'static str, expected: &'static str },
    #[error("TOP is only allowed in the outermost projection list")]
    TopNotTopLevel,
    #[error("TOP cannot be combined with other value projections")]
    TopWithOtherValues,
    #[error("subqueries may be nested at most one level deep")]
    SubqueryTooDeep,
    #[error("GROUP BY is given both inside and outside the subquery")]
    ConflictingGroupBy,
    #[error("invalid duration {0:?}")]
    BadDuration(String),
    #[error("invalid time literal {0:?}")]
    BadTime(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("position {position}: {kind}")]
pub struct QueryError {
    pub position: usize,
    pub kind: QueryErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Str(String),
    Int(i64),
    Duration(Duration),
    LParen,
    RParen,
    Comma,
    Minus,
    Plus,
    Ge,
    Le,
    Gt,
    Lt,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Quoted(s) => write!(f, "{s:?}"),
            Tok::Str(s) => write!(f, "'{s}'"),
            Tok::Int(i) => write!(f, "{i}"),
            Tok::Duration(d) => write!(f, "{d}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::Comma => f.write_str(","),
            Tok::Minus => f.write_str("-"),
            Tok::Plus => f.write_str("+"),
            Tok::Ge => f.write_str(">="),
            Tok::Le => f.write_str("<="),
            Tok::Gt => f.write_str(">"),
            Tok::Lt => f.write_str("<"),
        }
    }
}

fn err(position: usize, kind: QueryErrorKind) -> QueryError {
    QueryError { position, kind }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, QueryError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b if b.is_ascii_whitespace() => {
                i += 1;
                continue;
            }
            b'(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            b',' => {
                out.push((start, Tok::Comma));
                i += 1;
            }
            b'-' => {
                out.push((start, Tok::Minus));
                i += 1;
            }
            b'+' => {
                out.push((start, Tok::Plus));
                i += 1;
            }
            b'>' | b'<' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                let tok = match (b, eq) {
                    (b'>', true) => Tok::Ge,
                    (b'>', false) => Tok::Gt,
                    (_, true) => Tok::Le,
                    _ => Tok::Lt,
                };
                out.push((start, tok));
                i += if eq { 2 } else { 1 };
            }
            b'"' | b'\'' => {
                let quote = b;
                i += 1;
                let mut s = String::new();
                loop {
                    match bytes.get(i) {
                        None => return Err(err(start, QueryErrorKind::UnexpectedEnd("closing quote".into()))),
                        Some(&c) if c == quote => {
                            i += 1;
                            break;
                        }
                        Some(b'\\') if bytes.get(i + 1).is_some() => {
                            let ch = src[i + 1..].chars().next().unwrap();
                            s.push(ch);
                            i += 1 + ch.len_utf8();
                        }
                        Some(_) => {
                            let ch = src[i..].chars().next().unwrap();
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                out.push((start, if quote == b'"' { Tok::Quoted(s) } else { Tok::Str(s) }));
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let digits = &src[start..i];
                let unit_start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let unit = &src[unit_start..i];
                let n: i64 = digits
                    .parse()
                    .map_err(|_| err(start, QueryErrorKind::Syntax(format!("number {digits} out of range"))))?;
                if unit.is_empty() {
                    out.push((start, Tok::Int(n)));
                } else {
                    let d = match unit {
                        "s" => Duration::from_secs(n),
                        "m" => Duration::from_mins(n),
                        "h" => n.checked_mul(60).and_then(Duration::from_mins),
                        _ => None,
                    }
                    .ok_or_else(|| err(start, QueryErrorKind::BadDuration(src[start..i].into())))?;
                    out.push((start, Tok::Duration(d)));
                }
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_owned())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap();
                return Err(err(
                    start,
                    QueryErrorKind::Syntax(format!("unexpected character {ch:?}")),
                ));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn fail<T>(&self, expected: &str) -> Result<T, QueryError> {
        match self.toks.get(self.pos) {
            None => Err(err(self.end, QueryErrorKind::UnexpectedEnd(expected.into()))),
            Some((p, t)) => Err(err(
                *p,
                QueryErrorKind::Syntax(format!("expected {expected}, found {t}")),
            )),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.peek_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(kw)
        }
    }

    fn punct(&mut self, tok: Tok) -> Result<(), QueryError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(&format!("'{tok}'"))
        }
    }

    fn name(&mut self) -> Result<String, QueryError> {
        match self.peek() {
            Some(Tok::Ident(s)) | Some(Tok::Quoted(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail("identifier"),
        }
    }

    fn query(&mut self, depth: usize) -> Result<Query, QueryError> {
        self.keyword("SELECT")?;
        let mut projections = vec![self.projection()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            projections.push(self.projection()?);
        }
        self.keyword("FROM")?;
        let source = if self.peek() == Some(&Tok::LParen) {
            let at = self.position();
            if depth >= 1 {
                return Err(err(at, QueryErrorKind::SubqueryTooDeep));
            }
            self.pos += 1;
            let sub = self.query(depth + 1)?;
            self.punct(Tok::RParen)?;
            Source::Subquery(Box::new(sub))
        } else {
            Source::Measurement(self.name()?)
        };
        let range = if self.peek_keyword("WHERE") {
            self.pos += 1;
            self.where_clause()?
        } else {
            TimeRange::default()
        };
        let group_by = if self.peek_keyword("GROUP") {
            self.pos += 1;
            self.keyword("BY")?;
            self.group_by()?
        } else {
            GroupBy::default()
        };
        Ok(Query {
            projections,
            source,
            range,
            group_by,
        })
    }

    fn projection(&mut self) -> Result<Projection, QueryError> {
        let expr = self.expr()?;
        let alias = if self.peek_keyword("AS") {
            self.pos += 1;
            Some(self.name()?)
        } else {
            None
        };
        Ok(Projection { expr, alias })
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        let at = self.position();
        let is_call =
            matches!(self.peek(), Some(Tok::Ident(_))) && matches!(self.toks.get(self.pos + 1), Some((_, Tok::LParen)));
        if !is_call {
            return Ok(Expr::Ref(self.name()?));
        }
        let Some(Tok::Ident(func)) = self.next() else {
            unreachable!()
        };
        self.pos += 1; // '('
        let upper = func.to_ascii_uppercase();
        let expr = match upper.as_str() {
            "MEAN" => Expr::Mean(Box::new(self.expr()?)),
            "ROUND" => Expr::Round(Box::new(self.expr()?)),
            "NON_NEGATIVE_DERIVATIVE" => {
                let inner = self.expr()?;
                let unit = if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    match self.next() {
                        Some(Tok::Duration(d)) => d,
                        _ => {
                            return Err(err(
                                at,
                                QueryErrorKind::Arity {
                                    func: "NON_NEGATIVE_DERIVATIVE",
                                    expected: "(expr[, duration])",
                                },
                            ))
                        }
                    }
                } else {
                    Duration::from_secs(1).unwrap()
                };
                Expr::NonNegativeDerivative {
                    expr: Box::new(inner),
                    unit,
                }
            }
            "TOP" => {
                let arity = QueryErrorKind::Arity {
                    func: "TOP",
                    expected: "(field, n) with n >= 1",
                };
                let field = match self.expr()? {
                    Expr::Ref(f) => f,
                    _ => return Err(err(at, arity)),
                };
                self.punct(Tok::Comma).map_err(|_| err(at, arity.clone()))?;
                match self.next() {
                    Some(Tok::Int(n)) if n >= 1 => Expr::Top { field, n: n as usize },
                    _ => return Err(err(at, arity)),
                }
            }
            _ => return Err(err(at, QueryErrorKind::UnknownFunction(func))),
        };
        self.punct(Tok::RParen)?;
        Ok(expr)
    }

    fn where_clause(&mut self) -> Result<TimeRange, QueryError> {
        let mut range = TimeRange::default();
        loop {
            self.keyword("time")?;
            let op = self.next();
            let bound_at = self.position();
            let at = self.time_expr()?;
            match op {
                Some(Tok::Ge) => range.lower = Some(TimeBound { at, inclusive: true }),
                Some(Tok::Gt) => range.lower = Some(TimeBound { at, inclusive: false }),
                Some(Tok::Le) => range.upper = Some(TimeBound { at, inclusive: true }),
                Some(Tok::Lt) => range.upper = Some(TimeBound { at, inclusive: false }),
                _ => {
                    return Err(err(
                        bound_at,
                        QueryErrorKind::Syntax("expected comparison operator after 'time'".into()),
                    ))
                }
            }
            if self.peek_keyword("AND") {
                self.pos += 1;
            } else {
                return Ok(range);
            }
        }
    }

    fn time_expr(&mut self) -> Result<TimeExpr, QueryError> {
        let at = self.position();
        match self.next() {
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("now") => {
                self.punct(Tok::LParen)?;
                self.punct(Tok::RParen)?;
                let sign = match self.peek() {
                    Some(Tok::Minus) => -1,
                    Some(Tok::Plus) => 1,
                    _ => return Ok(TimeExpr::Now),
                };
                self.pos += 1;
                match self.next() {
                    Some(Tok::Duration(d)) if sign < 0 => Ok(TimeExpr::NowMinus(d)),
                    Some(Tok::Duration(d)) => Ok(TimeExpr::NowPlus(d)),
                    _ => {
                        self.pos -= 1;
                        self.fail("duration")
                    }
                }
            }
            Some(Tok::Str(s)) => chrono::DateTime::parse_from_rfc3339(&s)
                .ok()
                .and_then(|dt| dt.timestamp_nanos_opt())
                .map(TimeExpr::Absolute)
                .ok_or_else(|| err(at, QueryErrorKind::BadTime(s))),
            Some(Tok::Int(n)) => Ok(TimeExpr::Absolute(n)),
            _ => {
                self.pos -= 1;
                self.fail("time literal")
            }
        }
    }

    fn group_by(&mut self) -> Result<GroupBy, QueryError> {
        let mut g = GroupBy::default();
        loop {
            let is_time = self.peek_keyword("time") && matches!(self.toks.get(self.pos + 1), Some((_, Tok::LParen)));
            if is_time {
                self.pos += 2;
                match self.next() {
                    Some(Tok::Duration(d)) => g.interval = Some(d),
                    _ => {
                        self.pos -= 1;
                        return self.fail("duration");
                    }
                }
                self.punct(Tok::RParen)?;
            } else {
                g.tags.push(self.name()?);
            }
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            } else {
                return Ok(g);
            }
        }
    }
}

fn validate(q: &Query, top_level: bool) -> Result<(), QueryError> {
    let mut has_top = false;
    let mut value_projections = 0;
    for p in &q.projections {
        check_top_placement(&p.expr, top_level)?;
        if p.expr.contains_top() {
            has_top = true;
        }
        if !matches!(p.expr, Expr::Ref(_)) {
            value_projections += 1;
        }
    }
    if has_top && value_projections > 1 {
        return Err(err(0, QueryErrorKind::TopWithOtherValues));
    }
    if let Some(sub) = q.subquery() {
        validate(sub, false)?;
    }
    Ok(())
}

fn check_top_placement(e: &Expr, top_level: bool) -> Result<(), QueryError> {
    match e {
        Expr::Ref(_) => Ok(()),
        Expr::Top { .. } if top_level => Ok(()),
        Expr::Top { .. } => Err(err(0, QueryErrorKind::TopNotTopLevel)),
        // ROUND is element-wise, so TOP may sit directly beneath it.
        Expr::Round(inner) => check_top_placement(inner, top_level),
        Expr::Mean(inner) | Expr::NonNegativeDerivative { expr: inner, .. } => check_top_placement(inner, false),
    }
}

/// Parses query text into a [`Query`].
///
/// A `GROUP BY` written after a subquery's closing parenthesis is attached to
/// the subquery when the subquery has none of its own. Outer functions operate
/// on subquery rows as-is, so that is the only grouping such a clause can
/// mean. In that position one unmatched trailing `)` is tolerated, so the
/// form `FROM (SELECT ... WHERE ...) GROUP BY tag, time(d))` parses the same
/// as having the clause inside the parentheses.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let mut q = p.query(0)?;

    let hoist = q.subquery().is_some() && !q.group_by.is_empty();
    if hoist && p.peek() == Some(&Tok::RParen) && p.pos + 1 == p.toks.len() {
        p.pos += 1;
    }
    if p.pos < p.toks.len() {
        return p.fail("end of query");
    }
    if hoist {
        let outer = std::mem::take(&mut q.group_by);
        let Source::Subquery(sub) = &mut q.source else {
            unreachable!()
        };
        if !sub.group_by.is_empty() {
            return Err(err(0, QueryErrorKind::ConflictingGroupBy));
        }
        sub.group_by = outer;
    }
    validate(&q, true)?;
    Ok(q)
}
