//! Deterministic report serialization.
//!
//! Reports are JSON with keys in sorted order and every float written with
//! 17 significant digits, so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::solver::{GraphFunction, IterationRecord};

/// `x` with 17 significant digits; negative zero prints as zero.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => write!(out, "{i}").unwrap(),
            (_, Some(u), _) => write!(out, "{u}").unwrap(),
            (_, _, Some(f)) => out.push_str(&format_float(f)),
            _ => out.push_str("null"),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (j, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(out, item, indent + 2);
                out.push_str(if j + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (j, k) in keys.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*k], indent + 2);
                out.push_str(if j + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Pretty JSON with sorted keys and fixed float formatting. Non-finite
/// floats become `null`.
pub fn to_json(value: &impl Serialize) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Invalid(format!("serialization: {e}")))?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

/// `fiber_index, xi_1.., phi_1..` for every tabulated fiber and node.
pub fn write_phi_csv<W: Write>(phi: &GraphFunction, out: W) -> Result<()> {
    let e = phi.grid().dim();
    let d = phi.fibers().dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["fiber_index".to_string()];
    header.extend((1..=e).map(|k| format!("xi_{k}")));
    header.extend((1..=d).map(|k| format!("phi_{k}")));
    w.write_record(&header).map_err(csv_error)?;
    for (i, xi, val) in phi.rows() {
        let mut rec = vec![i.to_string()];
        rec.extend(xi.iter().chain(val.iter()).map(|&x| format_float(x)));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per application of the fixed-point map.
pub fn write_trace_csv<W: Write>(steps: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "d1", "d2", "d", "ratio", "clamps"])
        .map_err(csv_error)?;
    for s in steps {
        w.write_record([
            s.iteration.to_string(),
            format_float(s.d1),
            format_float(s.d2),
            format_float(s.d),
            s.ratio.map(format_float).unwrap_or_default(),
            s.clamps.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sorted_and_fixed_width() {
        let s = to_json(&json!({"b": 0.1, "a": [1, -0.0, f64::NAN], "c": {"z": true, "y": "q\""}})).unwrap();
        let expected = "{\n  \"a\": [\n    1,\n    0.0000000000000000e0,\n    null\n  ],\n  \"b\": 1.0000000000000001e-1,\n  \"c\": {\n    \"y\": \"q\\\"\",\n    \"z\": true\n  }\n}\n";
        assert_eq!(s, expected);
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, std::f64::consts::PI] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
