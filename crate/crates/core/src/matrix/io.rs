//! Plain-text and JSON exchange formats.
//!
//! Text: first line `rows cols`, then one line of space-separated integers
//! per row. Blank lines and `#` comments are ignored.
//! JSON: `{"rows": r, "cols": c, "entries": [...]}` with row-major entries,
//! each an integer or a decimal string.

use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use super::{IntMatrix, MatrixError, Result};

fn parse_err(msg: impl Into<String>) -> MatrixError {
    MatrixError::Parse(msg.into())
}

impl IntMatrix {
    /// Parses one matrix from the front of `lines`, consuming exactly the
    /// header and `rows` data lines.
    pub(crate) fn parse_text_lines<'a, I>(lines: &mut I) -> Result<Self>
    where
        I: Iterator<Item = &'a str>,
    {
        let header = lines
            .next()
            .ok_or_else(|| parse_err("missing 'rows cols' header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(format!("bad dimension '{t}'"))))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(parse_err(format!("header must be 'rows cols', got '{header}'")));
        };
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| parse_err(format!("missing row {i}")))?;
            let row: Vec<BigInt> = line
                .split_whitespace()
                .map(|t| BigInt::from_str(t).map_err(|_| parse_err(format!("bad entry '{t}'"))))
                .collect::<Result<_>>()?;
            if row.len() != cols {
                return Err(parse_err(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
        IntMatrix::new(rows, cols, entries)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let m = Self::parse_text_lines(&mut lines)?;
        if let Some(extra) = lines.next() {
            return Err(parse_err(format!("trailing data '{extra}'")));
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|v| match v.to_i64() {
                Some(x) => json!(x),
                None => json!(v.to_string()),
            })
            .collect();
        json!({ "rows": self.rows, "cols": self.cols, "entries": entries })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let dim = |key: &str| {
            value
                .get(key)
                .and_then(Value::as_u64)
                .map(|v| v as usize)
                .ok_or_else(|| parse_err(format!("missing '{key}'")))
        };
        let rows = dim("rows")?;
        let cols = dim("cols")?;
        let raw = value
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err("missing 'entries'"))?;
        let entries = raw
            .iter()
            .map(|e| match e {
                Value::Number(n) => n
                    .as_i64()
                    .map(BigInt::from)
                    .ok_or_else(|| parse_err(format!("non-integer entry {n}"))),
                Value::String(s) => {
                    BigInt::from_str(s).map_err(|_| parse_err(format!("bad entry '{s}'")))
                }
                other => Err(parse_err(format!("bad entry {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        IntMatrix::new(rows, cols, entries)
    }

    /// Accepts either format, deciding on the first non-blank character.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            let v: Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
            Self::from_json(&v)
        } else {
            Self::from_text(text)
        }
    }
}

/// Non-blank lines with `#` comments stripped.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = IntMatrix::from_rows(&[[1, -2, 3], [4, 5, -6]]).unwrap();
        assert_eq!(IntMatrix::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn comments_and_blank_lines() {
        let m = IntMatrix::parse("# demo\n2 2\n\n1 2 # first\n3 4\n").unwrap();
        assert_eq!(m, IntMatrix::from_rows(&[[1, 2], [3, 4]]).unwrap());
    }

    #[test]
    fn json_accepts_big_strings() {
        let v = serde_json::json!({"rows": 1, "cols": 2, "entries": [7, "123456789012345678901234567890"]});
        let m = IntMatrix::from_json(&v).unwrap();
        assert_eq!(m.get(0, 1).to_string(), "123456789012345678901234567890");
        assert_eq!(IntMatrix::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn malformed_inputs() {
        assert!(IntMatrix::parse("2 2\n1 2\n").is_err());
        assert!(IntMatrix::parse("2 2\n1 2\n3\n").is_err());
        assert!(IntMatrix::parse("2\n1 2\n").is_err());
        assert!(IntMatrix::parse("1 1\n5\n6\n").is_err());
        assert!(IntMatrix::parse("{\"rows\": 1}").is_err());
    }
}
