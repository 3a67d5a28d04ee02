use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{Map, Value as Json};

use super::eval::ResultSet;
use super::functions::Value;

pub fn rfc3339(ns: i64) -> String {
    DateTime::<Utc>::from_timestamp_nanos(ns).to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn json_value(v: &Value) -> Json {
    match v {
        Value::Int(i) => Json::from(*i),
        Value::Float(f) => serde_json::Number::from_f64(*f).map_or(Json::Null, Json::Number),
        Value::Str(s) => Json::from(s.as_str()),
    }
}

impl ResultSet {
    /// Aligned text table: a `name:` header, then `time`, group tags and
    /// value columns.
    pub fn to_table(&self) -> String {
        let mut header = vec!["time".to_owned()];
        header.extend(self.columns.iter().cloned());
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![rfc3339(r.time)];
                for c in &self.columns {
                    cells.push(self.cell(r, c).map(|v| v.to_string()).unwrap_or_default());
                }
                cells
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                body.iter()
                    .map(|row| row[i].len())
                    .chain([header[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let render = |cells: &[String]| {
            let mut line = String::new();
            for (i, cell) in cells.iter().enumerate() {
                if i + 1 == cells.len() {
                    line.push_str(cell);
                } else {
                    line.push_str(&format!("{cell:<w$} ", w = widths[i]));
                }
            }
            line.trim_end().to_owned()
        };
        let dashes: Vec<String> = header.iter().map(|h| "-".repeat(h.len())).collect();
        let mut out = format!("name: {}\n", self.name);
        out.push_str(&render(&header));
        out.push('\n');
        out.push_str(&render(&dashes));
        out.push('\n');
        for row in &body {
            out.push_str(&render(row));
            out.push('\n');
        }
        out
    }

    /// One flat JSON object per row keyed by column name, `time` in RFC 3339.
    pub fn to_json_rows(&self) -> Vec<Json> {
        self.rows
            .iter()
            .map(|r| {
                let mut obj = Map::new();
                obj.insert("time".into(), Json::from(rfc3339(r.time)));
                for c in &self.columns {
                    if let Some(v) = self.cell(r, c) {
                        obj.insert(c.clone(), json_value(&v));
                    }
                }
                Json::Object(obj)
            })
            .collect()
    }

    pub fn to_json(&self) -> Json {
        let mut columns = vec![Json::from("time")];
        columns.extend(self.columns.iter().map(|c| Json::from(c.as_str())));
        serde_json::json!({
            "name": self.name,
            "columns": columns,
            "rows": self.to_json_rows(),
        })
    }
}
