//! Canonical serialization for machine-readable results.
//!
//! Result JSON must be byte-identical across runs for fixed inputs, so it
//! is emitted by a small writer with sorted keys and a fixed float format
//! (17 significant digits), rather than through a general-purpose
//! serializer. Complex numbers are `[re, im]` pairs; CSV traces carry a
//! fixed header row.

use std::collections::BTreeMap;

use crate::linalg::CMatrix;

/// JSON value with deterministic rendering.
#[derive(Clone, Debug)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Array(Vec<Value>),
    Object(BTreeMap<String, Value>),
}

impl Value {
    pub fn object() -> BTreeMap<String, Value> {
        BTreeMap::new()
    }

    fn write(&self, out: &mut String) {
        match self {
            Value::Null => out.push_str("null"),
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Value::Int(i) => out.push_str(&i.to_string()),
            Value::Float(x) => out.push_str(&format_float(*x)),
            Value::Str(s) => write_json_string(s, out),
            Value::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write(out);
                }
                out.push(']');
            }
            Value::Object(map) => {
                out.push('{');
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_json_string(k, out);
                    out.push(':');
                    v.write(out);
                }
                out.push('}');
            }
        }
    }

    /// Render with a trailing newline.
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.write(&mut s);
        s.push('\n');
        s
    }
}

/// Fixed 17-significant-digit float rendering.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "\"nan\"".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "\"inf\"".into() } else { "\"-inf\"".into() };
    }
    format!("{x:.16e}")
}

fn write_json_string(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Unitary matrix as row-major `[re, im]` pairs.
pub fn matrix_value(m: &CMatrix) -> Value {
    let mut rows = Vec::with_capacity(m.nrows());
    for r in 0..m.nrows() {
        let mut row = Vec::with_capacity(m.ncols());
        for s in 0..m.ncols() {
            row.push(Value::Array(vec![
                Value::Float(m[(r, s)].re),
                Value::Float(m[(r, s)].im),
            ]));
        }
        rows.push(Value::Array(row));
    }
    Value::Array(rows)
}

/// CSV table with a fixed header.
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// CSV float cell (same fixed format as JSON floats).
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// FNV-1a 64-bit hash, hex-encoded; used for config provenance.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_render_with_17_significant_digits() {
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(-0.5), "-5.0000000000000000e-1");
        let pi = std::f64::consts::PI;
        let rendered = format_float(pi);
        let parsed: f64 = rendered.parse().unwrap();
        assert_eq!(parsed, pi);
    }

    #[test]
    fn objects_render_sorted_and_stable() {
        let mut obj = Value::object();
        obj.insert("zeta".into(), Value::Int(1));
        obj.insert("alpha".into(), Value::Float(2.0));
        let v = Value::Object(obj);
        assert_eq!(v.render(), "{\"alpha\":2.0000000000000000e0,\"zeta\":1}\n");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(fnv1a_hex(b""), "cbf29ce484222325");
        assert_eq!(fnv1a_hex(b"a"), fnv1a_hex(b"a"));
        assert_ne!(fnv1a_hex(b"a"), fnv1a_hex(b"b"));
    }
}
