//! Report trees and their json, csv and text renderings.

use std::fmt::Write as _;

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// Currency: cents in text output.
    Money,
    /// Dimensionless ratios and factors.
    Ratio,
    /// Quantities, prices and multipliers.
    Plain,
}

#[derive(Debug, Clone)]
pub enum Field {
    Num(f64, Unit),
    Str(String),
    Bool(bool),
    Null,
    List(Vec<Field>),
    Obj(Obj),
}

#[derive(Debug, Clone, Default)]
pub struct Obj {
    fields: Vec<(String, Field)>,
}

impl Obj {
    pub fn new() -> Self {
        Obj::default()
    }

    pub fn field(mut self, key: &str, value: Field) -> Self {
        self.fields.push((key.to_string(), value));
        self
    }

    pub fn money(self, key: &str, v: f64) -> Self {
        self.field(key, Field::Num(v, Unit::Money))
    }

    pub fn ratio(self, key: &str, v: f64) -> Self {
        self.field(key, Field::Num(v, Unit::Ratio))
    }

    pub fn num(self, key: &str, v: f64) -> Self {
        self.field(key, Field::Num(v, Unit::Plain))
    }

    pub fn opt(self, key: &str, v: Option<f64>, unit: Unit) -> Self {
        self.field(key, v.map_or(Field::Null, |x| Field::Num(x, unit)))
    }

    pub fn text(self, key: &str, v: impl ToString) -> Self {
        self.field(key, Field::Str(v.to_string()))
    }

    pub fn opt_text(self, key: &str, v: Option<&str>) -> Self {
        self.field(key, v.map_or(Field::Null, |s| Field::Str(s.to_string())))
    }

    pub fn flag(self, key: &str, v: bool) -> Self {
        self.field(key, Field::Bool(v))
    }

    pub fn nums(self, key: &str, values: &[f64], unit: Unit) -> Self {
        self.field(key, Field::List(values.iter().map(|v| Field::Num(*v, unit)).collect()))
    }

    pub fn list(self, key: &str, items: Vec<Obj>) -> Self {
        self.field(key, Field::List(items.into_iter().map(Field::Obj).collect()))
    }

    pub fn texts(self, key: &str, items: &[String]) -> Self {
        self.field(key, Field::List(items.iter().cloned().map(Field::Str).collect()))
    }

    pub fn obj(self, key: &str, value: Obj) -> Self {
        self.field(key, Field::Obj(value))
    }
}

/// A rendered analysis: the report tree plus an optional flat table used
/// for csv output.
pub struct Report {
    pub body: Obj,
    pub table: Option<Table>,
    /// Preformatted text that replaces the generic text rendering.
    pub text: Option<String>,
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(body: Obj) -> Self {
        Report {
            body,
            table: None,
            text: None,
        }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn with_text(mut self, text: String) -> Self {
        self.text = Some(text);
        self
    }
}

/// Six significant digits, as a json number.
fn rounded(v: f64) -> Value {
    if let Some(s) = non_finite(v) {
        return Value::String(s.into());
    }
    let r: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    number(r)
}

fn full(v: f64) -> Value {
    match non_finite(v) {
        Some(s) => Value::String(s.into()),
        None => number(v),
    }
}

fn number(v: f64) -> Value {
    // Normalize negative zero so output does not depend on solver signs.
    let v = if v == 0.0 { 0.0 } else { v };
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn non_finite(v: f64) -> Option<&'static str> {
    if v.is_nan() {
        Some("nan")
    } else if v == f64::INFINITY {
        Some("inf")
    } else if v == f64::NEG_INFINITY {
        Some("-inf")
    } else {
        None
    }
}

fn is_numeric(f: &Field) -> bool {
    match f {
        Field::Num(..) => true,
        Field::List(items) => !items.is_empty() && items.iter().all(|i| matches!(i, Field::Num(..))),
        _ => false,
    }
}

fn json_field(f: &Field, full_precision: bool) -> Value {
    match f {
        Field::Num(v, _) if full_precision => full(*v),
        Field::Num(v, _) => rounded(*v),
        Field::Str(s) => Value::String(s.clone()),
        Field::Bool(b) => Value::Bool(*b),
        Field::Null => Value::Null,
        Field::List(items) => Value::Array(items.iter().map(|i| json_field(i, full_precision)).collect()),
        Field::Obj(o) => json_obj(o),
    }
}

/// Numbers carry six significant digits; every object with numeric fields
/// gets a `full_precision` sidecar holding the exact values.
pub fn json_obj(o: &Obj) -> Value {
    let mut map = Map::new();
    let mut sidecar = Map::new();
    for (k, f) in &o.fields {
        map.insert(k.clone(), json_field(f, false));
        if is_numeric(f) {
            sidecar.insert(k.clone(), json_field(f, true));
        }
    }
    if !sidecar.is_empty() {
        map.insert("full_precision".into(), Value::Object(sidecar));
    }
    Value::Object(map)
}

pub fn to_json(r: &Report) -> String {
    let mut s = serde_json::to_string_pretty(&json_obj(&r.body)).expect("json values serialize");
    s.push('\n');
    s
}

fn text_num(v: f64, unit: Unit) -> String {
    if let Some(s) = non_finite(v) {
        return s.to_string();
    }
    let v = if v == 0.0 { 0.0 } else { v };
    match unit {
        Unit::Money => format!("{v:.2}"),
        Unit::Ratio => format!("{v:.4}"),
        Unit::Plain => {
            let r: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
            if r != 0.0 && !(1e-4..1e9).contains(&r.abs()) {
                format!("{r:e}")
            } else {
                format!("{r}")
            }
        }
    }
}

fn text_scalar(f: &Field) -> Option<String> {
    match f {
        Field::Num(v, u) => Some(text_num(*v, *u)),
        Field::Str(s) => Some(s.clone()),
        Field::Bool(b) => Some(b.to_string()),
        Field::Null => Some("-".into()),
        Field::List(items) if items.iter().all(|i| !matches!(i, Field::Obj(_) | Field::List(_))) => {
            Some(format!(
                "[{}]",
                items.iter().filter_map(text_scalar).collect::<Vec<_>>().join(", ")
            ))
        }
        _ => None,
    }
}

fn text_obj(o: &Obj, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    for (k, f) in &o.fields {
        if let Some(s) = text_scalar(f) {
            let _ = writeln!(out, "{pad}{k}: {s}");
            continue;
        }
        let _ = writeln!(out, "{pad}{k}:");
        match f {
            Field::Obj(inner) => text_obj(inner, indent + 2, out),
            Field::List(items) => {
                for item in items {
                    match item {
                        Field::Obj(inner) => {
                            let mut block = String::new();
                            text_obj(inner, indent + 4, &mut block);
                            let trimmed = block.trim_start();
                            let _ = write!(out, "{pad}  - {trimmed}");
                        }
                        other => {
                            let _ = writeln!(out, "{pad}  - {}", text_scalar(other).unwrap_or_default());
                        }
                    }
                }
            }
            _ => unreachable!("scalars handled above"),
        }
    }
}

pub fn to_text(r: &Report) -> String {
    if let Some(t) = &r.text {
        return t.clone();
    }
    let mut out = String::new();
    text_obj(&r.body, 0, &mut out);
    out
}

fn csv_scalar(f: &Field) -> String {
    match f {
        Field::Num(v, _) => match non_finite(*v) {
            Some(s) => s.to_string(),
            None => format!("{}", if *v == 0.0 { 0.0 } else { *v }),
        },
        Field::Str(s) => s.clone(),
        Field::Bool(b) => b.to_string(),
        Field::Null => String::new(),
        Field::List(items) => items.iter().map(csv_scalar).collect::<Vec<_>>().join(";"),
        Field::Obj(_) => String::new(),
    }
}

fn flatten(o: &Obj, prefix: &str, rows: &mut Vec<Vec<String>>) {
    for (k, f) in &o.fields {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match f {
            Field::Obj(inner) => flatten(inner, &key, rows),
            Field::List(items) if items.iter().any(|i| matches!(i, Field::Obj(_))) => {
                for (i, item) in items.iter().enumerate() {
                    if let Field::Obj(inner) = item {
                        flatten(inner, &format!("{key}.{i}"), rows);
                    }
                }
            }
            other => rows.push(vec![key, csv_scalar(other)]),
        }
    }
}

/// The report's table when it has one, otherwise `key,value` rows at full
/// precision.
pub fn to_csv(r: &Report) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match &r.table {
        Some(t) => {
            w.write_record(&t.header)?;
            for row in &t.rows {
                w.write_record(row)?;
            }
        }
        None => {
            w.write_record(["key", "value"])?;
            let mut rows = Vec::new();
            flatten(&r.body, "", &mut rows);
            for row in rows {
                w.write_record(row)?;
            }
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Full-precision csv cell.
pub fn cell(v: f64) -> String {
    csv_scalar(&Field::Num(v, Unit::Plain))
}
