//! Reading pooled-analysis inputs and writing machine-readable output.
//!
//! Machine formats print every number with 17 significant digits, trailing
//! zeros trimmed, so `1.0` is written as `1` and `0.75` as `0.75`. Text
//! output rounds to 4 significant digits.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::pool::ImputationResult;

pub const POOL_HEADER: [&str; 3] = ["imputation", "estimate", "variance"];

/// Decimal rendering with `digits` significant digits and no trailing
/// zeros. Non-finite values come out as `NaN`, `inf` or `-inf`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits_str: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits_str = digits_str.trim_end_matches('0');
    let digits_str = if digits_str.is_empty() { "0" } else { digits_str };

    let body = if (-7..21).contains(&exp) {
        let point = exp + 1;
        if point <= 0 {
            format!("0.{}{}", "0".repeat((-point) as usize), digits_str)
        } else if point as usize >= digits_str.len() {
            format!("{}{}", digits_str, "0".repeat(point as usize - digits_str.len()))
        } else {
            let (int, frac) = digits_str.split_at(point as usize);
            format!("{int}.{frac}")
        }
    } else {
        let (first, rest) = digits_str.split_at(1);
        if rest.is_empty() {
            format!("{first}e{exp}")
        } else {
            format!("{first}.{rest}e{exp}")
        }
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Machine format.
pub fn fmt_num(x: f64) -> String {
    format_sig(x, 17)
}

/// Human format.
pub fn fmt_text(x: f64) -> String {
    format_sig(x, 4)
}

/// Compact JSON in which every float is printed through [`fmt_num`].
/// Field order follows the serialized type; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("output types always serialize");
    let mut out = String::new();
    write_value(&value, &mut out);
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => out.push_str(&u.to_string()),
            (None, Some(i)) => out.push_str(&i.to_string()),
            _ => out.push_str(&fmt_num(n.as_f64().expect("float"))),
        },
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(v, out);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Parse the per-imputation CSV (`imputation,estimate,variance`). Rows may
/// come in any order and are returned sorted by imputation index.
pub fn read_pool_csv<R: Read>(reader: R) -> Result<Vec<ImputationResult>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(POOL_HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "expected header `{}`, got `{}`",
            POOL_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = BTreeMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or_default();
        let line = line + 2;
        let idx: u64 = field(0)
            .parse()
            .map_err(|_| Error::Format(format!("line {line}: imputation index `{}` is not a positive integer", field(0))))?;
        if idx == 0 {
            return Err(Error::Format(format!("line {line}: imputation indices are 1-based")));
        }
        let parse = |i: usize, name: &str| -> Result<f64> {
            field(i).parse().map_err(|_| Error::Format(format!("line {line}: {name} `{}` is not a number", field(i))))
        };
        let r = ImputationResult::new(parse(1, "estimate")?, parse(2, "variance")?)?;
        if rows.insert(idx, r).is_some() {
            return Err(Error::Format(format!("line {line}: duplicate imputation index {idx}")));
        }
    }
    Ok(rows.into_values().collect())
}

pub fn write_pool_csv(results: &[ImputationResult]) -> String {
    let mut out = format!("{}\n", POOL_HEADER.join(","));
    for (i, r) in results.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, fmt_num(r.estimate), fmt_num(r.within_variance)));
    }
    out
}

/// Render rows of numbers as CSV with machine formatting.
pub fn numeric_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_num).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parse any CSV written by [`numeric_csv`] into its header and rows.
pub fn read_numeric_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Format(format!("`{s}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Deserialize rows of a numeric CSV into a typed record.
pub fn read_records<R: Read, T: for<'de> Deserialize<'de>>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}
