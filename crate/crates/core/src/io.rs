//! Serialization helpers: complex numbers as `[re, im]` pairs, 12-significant
//! digit output, and plain numeric CSV tables.

use std::io::Write;

use serde::ser::{SerializeSeq, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Significant digits used for summaries and traces.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Round to [`SIGNIFICANT_DIGITS`] significant digits. Non-finite values
/// pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let y: f64 = s.parse().unwrap_or(x);
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

/// Shortest text for `round_sig(x)`.
pub fn fmt_sig(x: f64) -> String {
    let y = round_sig(x);
    if y == y.trunc() && y.abs() < 1e15 {
        format!("{y:.1}")
    } else {
        format!("{y:?}")
    }
}

/// Round every number inside a JSON document.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(_), _, _) | (_, Some(_), _) => Value::Number(n),
            (_, _, Some(f)) => serde_json::Number::from_f64(round_sig(f))
                .map(Value::Number)
                .unwrap_or(Value::Null),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn vec_to_pairs<'a>(it: impl IntoIterator<Item = &'a C64>) -> Vec<[f64; 2]> {
    it.into_iter().map(|z| pair(*z)).collect()
}

pub fn pairs_to_vec(p: &[[f64; 2]]) -> Vec<C64> {
    p.iter().map(|[re, im]| C64::new(*re, *im)).collect()
}

pub fn ser_complex<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&z.re)?;
    seq.serialize_element(&z.im)?;
    seq.end()
}

pub fn ser_opt_complex<S: Serializer>(z: &Option<C64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match z {
        Some(z) => ser_complex(z, s),
        None => s.serialize_none(),
    }
}

pub fn ser_complex_vec<S: Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&pair(*z))?;
    }
    seq.end()
}

/// Write a numeric table with a header row; every value is rounded to
/// [`SIGNIFICANT_DIGITS`].
pub fn write_csv<W: Write>(out: W, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(format!("writing CSV: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch { expected: header.len(), found: row.len() });
        }
        w.write_record(row.iter().map(|x| fmt_sig(*x))).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("writing CSV: {e}")))?;
    Ok(())
}

/// Read a numeric CSV table with a header row.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let err = |e: csv::Error| Error::InvalidInput(format!("reading CSV: {e}"));
    let header = r.headers().map_err(err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(err)?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("CSV row {}: `{f}` is not a number", line + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.75f64.sqrt()), 0.866025403784);
        assert_eq!(round_sig(-0.75f64.sqrt()), -0.866025403784);
        assert_eq!(fmt_sig(3f64.sqrt()), "1.73205080757");
        assert_eq!(fmt_sig(1.0), "1.0");
        assert_eq!(fmt_sig(1.5e-20), "1.5e-20");
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn json_rounding() {
        let v = serde_json::json!({"a": [std::f64::consts::PI, 2], "b": {"c": 1.0 / 3.0}});
        let r = round_json(v);
        assert_eq!(r["a"][0].as_f64().unwrap(), 3.14159265359);
        assert_eq!(r["a"][1].as_i64().unwrap(), 2);
        assert_eq!(r["b"]["c"].as_f64().unwrap(), 0.333333333333);
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        let header = vec!["x".to_string(), "y".to_string()];
        write_csv(&mut buf, &header, vec![vec![1.0, 2.5], vec![-0.125, 1e-30]]).unwrap();
        let (h, rows) = read_csv(buf.as_slice()).unwrap();
        assert_eq!(h, header);
        assert_eq!(rows, vec![vec![1.0, 2.5], vec![-0.125, 1e-30]]);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let header = vec!["x".to_string()];
        let err = write_csv(Vec::new(), &header, vec![vec![1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
