//! Flat result records and their CSV and JSON encodings.
//!
//! Every report is flattened to `operation`, a parameter map, an output map,
//! `elapsed_ms` and the tool version. Both encodings decode back to equal
//! records. In CSV, floats are written with 17 significant digits, and text
//! cells that would otherwise read back as another type start with `'`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sieve::Rational;
use crate::VERSION;

/// One cell of a record.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i128),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Text(a), Value::Text(b)) => a == b,
            _ => false,
        }
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn rational(r: Rational) -> Value {
        Value::Text(format!("{}/{}", r.numer(), r.denom()))
    }

    fn csv_cell(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(x) => format_float(*x),
            Value::Bool(b) => b.to_string(),
            Value::Text(t) => {
                if t.is_empty() || t.starts_with('\'') || !matches!(infer_cell(t), Value::Text(_)) {
                    format!("'{t}")
                } else {
                    t.clone()
                }
            }
        }
    }
}

/// `x` with 17 significant digits, or `NaN`, `inf`, `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn is_integer_text(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn parse_special_float(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

fn infer_cell(s: &str) -> Value {
    if let Some(rest) = s.strip_prefix('\'') {
        return Value::Text(rest.to_string());
    }
    if is_integer_text(s) {
        if let Ok(i) = s.parse() {
            return Value::Int(i);
        }
    }
    if let Some(x) = parse_special_float(s) {
        return Value::Float(x);
    }
    if s.contains(['e', 'E', '.'])
        && s.bytes()
            .all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b))
    {
        if let Ok(x) = s.parse() {
            return Value::Float(x);
        }
    }
    match s {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::Text(s.to_string()),
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&format_float(*x)),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(t) => f.write_str(t),
        }
    }
}

macro_rules! int_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Value {
            fn from(v: $t) -> Self {
                Value::Int(v as i128)
            }
        }
    )*};
}
int_from!(i8, i32, i64, u8, u32, u64, usize);

impl From<u128> for Value {
    fn from(v: u128) -> Self {
        i128::try_from(v)
            .map(Value::Int)
            .unwrap_or_else(|_| Value::Float(v as f64))
    }
}

impl From<i128> for Value {
    fn from(v: i128) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<Rational> for Value {
    fn from(v: Rational) -> Self {
        Value::rational(v)
    }
}

// JSON integers beyond 64 bits travel as digit strings and non-finite floats
// as "NaN", "inf" or "-inf". Text that would read back as either starts with `'`.
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Value::Int(i) => {
                if let Ok(v) = i64::try_from(*i) {
                    s.serialize_i64(v)
                } else if let Ok(v) = u64::try_from(*i) {
                    s.serialize_u64(v)
                } else {
                    s.serialize_str(&i.to_string())
                }
            }
            Value::Float(x) if x.is_finite() => s.serialize_f64(*x),
            Value::Float(x) => s.serialize_str(&format_float(*x)),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Text(t) => {
                if t.starts_with('\'') || is_integer_text(t) || parse_special_float(t).is_some() {
                    s.serialize_str(&format!("'{t}"))
                } else {
                    s.serialize_str(t)
                }
            }
        }
    }
}

struct ValueVisitor;

impl<'de> Visitor<'de> for ValueVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number, boolean or string")
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> std::result::Result<Value, E> {
        Ok(Value::Bool(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Value, E> {
        Ok(Value::Int(v as i128))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Value, E> {
        Ok(Value::Int(v as i128))
    }

    fn visit_i128<E: de::Error>(self, v: i128) -> std::result::Result<Value, E> {
        Ok(Value::Int(v))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Value, E> {
        Ok(Value::Float(v))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Value, E> {
        if let Some(rest) = v.strip_prefix('\'') {
            return Ok(Value::Text(rest.to_string()));
        }
        if is_integer_text(v) {
            if let Ok(i) = v.parse::<i128>() {
                return Ok(Value::Int(i));
            }
        }
        Ok(parse_special_float(v)
            .map(Value::Float)
            .unwrap_or_else(|| Value::Text(v.to_string())))
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Value, D::Error> {
        d.deserialize_any(ValueVisitor)
    }
}

/// One flat row of results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub operation: String,
    pub params: BTreeMap<String, Value>,
    pub outputs: BTreeMap<String, Value>,
    pub elapsed_ms: u64,
    pub version: String,
}

impl ResultRecord {
    pub fn new(operation: impl Into<String>) -> Self {
        ResultRecord {
            operation: operation.into(),
            params: BTreeMap::new(),
            outputs: BTreeMap::new(),
            elapsed_ms: 0,
            version: VERSION.to_string(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn output(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.outputs.insert(key.to_string(), value.into());
        self
    }

    /// Adds `value` as the `<key>_re`, `<key>_im` pair.
    pub fn complex(self, key: &str, value: Complex64) -> Self {
        self.output(&format!("{key}_re"), value.re)
            .output(&format!("{key}_im"), value.im)
    }

    pub fn maybe_output(self, key: &str, value: Option<impl Into<Value>>) -> Self {
        match value {
            Some(v) => self.output(key, v),
            None => self,
        }
    }

    pub fn with_elapsed(mut self, ms: u64) -> Self {
        self.elapsed_ms = ms;
        self
    }

    /// The `ratio` output as a float, if present.
    pub fn ratio(&self) -> Option<f64> {
        self.outputs.get("ratio").and_then(Value::as_f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid(format!("unknown format {other:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

const PARAM_PREFIX: &str = "param.";
const OUTPUT_PREFIX: &str = "out.";
const FIXED_COLUMNS: [&str; 3] = ["operation", "version", "elapsed_ms"];

fn io_error(e: impl fmt::Display) -> Error {
    Error::invalid(format!("i/o: {e}"))
}

/// Serializes `records` to a string.
pub fn encode(records: &[ResultRecord], format: Format) -> Result<String> {
    let mut buf = Vec::new();
    write_records(records, format, &mut buf)?;
    String::from_utf8(buf).map_err(io_error)
}

/// Writes `records` as one CSV table (the union of all keys as columns) or
/// as a JSON array.
pub fn write_records<W: Write>(records: &[ResultRecord], format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, records).map_err(io_error)?;
            out.write_all(b"\n").map_err(io_error)
        }
        Format::Csv => {
            let mut params: Vec<&str> = records
                .iter()
                .flat_map(|r| r.params.keys().map(String::as_str))
                .collect();
            params.sort_unstable();
            params.dedup();
            let mut outputs: Vec<&str> = records
                .iter()
                .flat_map(|r| r.outputs.keys().map(String::as_str))
                .collect();
            outputs.sort_unstable();
            outputs.dedup();
            let mut w = csv::Writer::from_writer(out);
            let header: Vec<String> = FIXED_COLUMNS
                .iter()
                .map(|c| c.to_string())
                .chain(params.iter().map(|k| format!("{PARAM_PREFIX}{k}")))
                .chain(outputs.iter().map(|k| format!("{OUTPUT_PREFIX}{k}")))
                .collect();
            w.write_record(&header).map_err(io_error)?;
            for rec in records {
                let mut row = vec![
                    rec.operation.clone(),
                    rec.version.clone(),
                    rec.elapsed_ms.to_string(),
                ];
                row.extend(
                    params
                        .iter()
                        .map(|k| rec.params.get(*k).map(Value::csv_cell).unwrap_or_default()),
                );
                row.extend(
                    outputs
                        .iter()
                        .map(|k| rec.outputs.get(*k).map(Value::csv_cell).unwrap_or_default()),
                );
                w.write_record(&row).map_err(io_error)?;
            }
            w.flush().map_err(io_error)
        }
    }
}

/// Parses records written by [`write_records`].
pub fn decode(text: &str, format: Format) -> Result<Vec<ResultRecord>> {
    match format {
        Format::Json => {
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad JSON records: {e}")))
        }
        Format::Csv => {
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            let header = rdr.headers().map_err(io_error)?.clone();
            if header.len() < FIXED_COLUMNS.len() || header.iter().take(3).ne(FIXED_COLUMNS) {
                return Err(Error::invalid(
                    "CSV header must start with operation,version,elapsed_ms",
                ));
            }
            let mut records = Vec::new();
            for row in rdr.records() {
                let row = row.map_err(io_error)?;
                let mut rec = ResultRecord::new(&row[0]);
                rec.version = row[1].to_string();
                rec.elapsed_ms = row[2]
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad elapsed_ms {:?}", &row[2])))?;
                for (name, cell) in header.iter().zip(row.iter()).skip(3) {
                    if cell.is_empty() {
                        continue;
                    }
                    let value = infer_cell(cell);
                    if let Some(k) = name.strip_prefix(PARAM_PREFIX) {
                        rec.params.insert(k.to_string(), value);
                    } else if let Some(k) = name.strip_prefix(OUTPUT_PREFIX) {
                        rec.outputs.insert(k.to_string(), value);
                    } else {
                        return Err(Error::invalid(format!("unexpected CSV column {name:?}")));
                    }
                }
                records.push(rec);
            }
            Ok(records)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ResultRecord> {
        vec![
            ResultRecord::new("energy")
                .param("kind", "e2")
                .param("r", 101u64)
                .param("j", -3i64)
                .output("energy", u128::from(u64::MAX) * 4)
                .output("ratio", 0.1 + 0.2)
                .output("pass", true)
                .complex("value", Complex64::new(-1e-300, 3.5)),
            ResultRecord::new("odd")
                .param("label", "12")
                .param("tricky", "'quoted")
                .param("x", Value::rational(Rational::new(-3, 9)))
                .output("nan", f64::NAN)
                .output("inf", f64::NEG_INFINITY)
                .output("empty", "")
                .output("word", "true")
                .output("exp", "1e5")
                .output("neg_zero", -0.0)
                .with_elapsed(17),
        ]
    }

    #[test]
    fn csv_and_json_round_trip() {
        let recs = sample();
        for format in [Format::Csv, Format::Json] {
            let text = encode(&recs, format).unwrap();
            let back = decode(&text, format).unwrap();
            assert_eq!(back, recs, "{format}: {text}");
            assert_eq!(encode(&back, format).unwrap(), text);
        }
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.0), "-2.0000000000000000e0");
        let text = encode(
            &[ResultRecord::new("x").output("v", 1.0 / 3.0)],
            Format::Csv,
        )
        .unwrap();
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
        assert_eq!(Value::rational(Rational::new(4, 2)).to_string(), "2/1");
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(decode("a,b\n1,2\n", Format::Csv).is_err());
        assert!(decode("operation,version,elapsed_ms,zzz\nx,1,0,5\n", Format::Csv).is_err());
        assert!(decode("{", Format::Json).is_err());
        assert!("xml".parse::<Format>().is_err());
    }
}
