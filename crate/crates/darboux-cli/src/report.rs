//! Deterministic result documents: an insertion-ordered key/value tree
//! serialized as TOML text, with every float printed at 17 significant
//! digits so runs are reproducible byte for byte and re-parseable by any
//! TOML reader.

use std::fmt::Write as _;

/// A scalar or nested value of a result document.
#[derive(Debug, Clone)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    /// Inline array; may nest (matrices are arrays of arrays).
    Array(Vec<Value>),
}

impl Value {
    pub fn floats(values: impl IntoIterator<Item = f64>) -> Value {
        Value::Array(values.into_iter().map(Value::Float).collect())
    }

    pub fn matrix(rows: &nalgebra::DMatrix<f64>) -> Value {
        Value::Array(
            (0..rows.nrows())
                .map(|r| Value::floats((0..rows.ncols()).map(|c| rows[(r, c)])))
                .collect(),
        )
    }

    pub fn strings(values: impl IntoIterator<Item = String>) -> Value {
        Value::Array(values.into_iter().map(Value::Str).collect())
    }
}

/// Insertion-ordered table of scalars and inline arrays.
#[derive(Debug, Clone, Default)]
pub struct Table {
    entries: Vec<(String, Value)>,
}

impl Table {
    pub fn new() -> Self {
        Table::default()
    }

    pub fn push(&mut self, key: &str, value: Value) -> &mut Self {
        self.entries.push((key.to_string(), value));
        self
    }
}

/// One result document: top-level scalars, named sub-tables, and named
/// arrays of tables, emitted in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Doc {
    scalars: Table,
    tables: Vec<(String, Table)>,
    table_arrays: Vec<(String, Vec<Table>)>,
}

impl Doc {
    pub fn new() -> Self {
        Doc::default()
    }

    pub fn push(&mut self, key: &str, value: Value) -> &mut Self {
        self.scalars.push(key, value);
        self
    }

    pub fn push_table(&mut self, name: &str, table: Table) -> &mut Self {
        self.tables.push((name.to_string(), table));
        self
    }

    pub fn push_table_array(&mut self, name: &str, tables: Vec<Table>) -> &mut Self {
        self.table_arrays.push((name.to_string(), tables));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        write_table_body(&mut out, &self.scalars);
        for (name, table) in &self.tables {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{}]", escape_key_path(name));
            write_table_body(&mut out, table);
        }
        for (name, tables) in &self.table_arrays {
            for table in tables {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[[{}]]", escape_key_path(name));
                write_table_body(&mut out, table);
            }
        }
        out
    }
}

fn write_table_body(out: &mut String, table: &Table) {
    for (key, value) in &table.entries {
        let _ = writeln!(out, "{} = {}", escape_key(key), render_value(value));
    }
}

fn render_value(value: &Value) -> String {
    match value {
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(x) => format_float(*x),
        Value::Str(s) => escape_string(s),
        Value::Array(items) => {
            let inner: Vec<String> = items.iter().map(render_value).collect();
            format!("[{}]", inner.join(", "))
        }
    }
}

/// 17 significant digits in exponent form; valid TOML and exact for f64.
/// Non-finite numbers must never reach the writer.
pub fn format_float(x: f64) -> String {
    assert!(x.is_finite(), "result records carry only finite numbers");
    format!("{x:.16e}")
}

fn escape_key(key: &str) -> String {
    let bare = !key.is_empty()
        && key
            .bytes()
            .all(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'-');
    if bare {
        key.to_string()
    } else {
        escape_string(key)
    }
}

fn escape_key_path(name: &str) -> String {
    name.split('.')
        .map(escape_key)
        .collect::<Vec<_>>()
        .join(".")
}

fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_parseable_toml() {
        let mut doc = Doc::new();
        doc.push("command", Value::Str("invariant".into()));
        doc.push("count", Value::Int(3));
        doc.push("flag", Value::Bool(true));
        doc.push("x", Value::Float(0.1));
        let mut table = Table::new();
        table.push("values", Value::floats([1.0, -2.5e-7, 3.0]));
        doc.push_table("summary", table);
        let mut point = Table::new();
        point.push("u", Value::floats([0.0, 0.5]));
        doc.push_table_array("points", vec![point.clone(), point]);

        let text = doc.render();
        let parsed: toml::Value = text.parse().expect("writer output must be valid TOML");
        assert_eq!(parsed["command"].as_str(), Some("invariant"));
        assert_eq!(parsed["count"].as_integer(), Some(3));
        assert_eq!(parsed["x"].as_float(), Some(0.1));
        assert_eq!(parsed["points"].as_array().map(Vec::len), Some(2));
    }

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1, -1.0 / 3.0, 2.0_f64.powi(-40), 12345.678901234567, 0.0] {
            let text = format_float(x);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back, x, "{text} did not round trip");
        }
    }

    #[test]
    fn strings_are_escaped() {
        let mut doc = Doc::new();
        doc.push("s", Value::Str("a \"quote\"\nand \\slash".into()));
        let parsed: toml::Value = doc.render().parse().unwrap();
        assert_eq!(parsed["s"].as_str(), Some("a \"quote\"\nand \\slash"));
    }
}
