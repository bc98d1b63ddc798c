//! Number formatting for emitted files: every float carries 17 significant
//! digits so reports round-trip bit-exactly.

use std::str::FromStr;

use serde::Serialize;
use serde_json::{Number, Value};

/// `x` in scientific notation with 17 significant digits; empty for NaN.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Pretty JSON in which every non-integer number is rewritten with 17
/// significant digits.
pub fn to_json17<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(value)?;
    rewrite(&mut v);
    serde_json::to_string_pretty(&v)
}

fn rewrite(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(x) = n.as_f64() {
                if let Ok(num) = Number::from_str(&fmt17(x)) {
                    *n = num;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(rewrite),
        Value::Object(map) => map.values_mut().for_each(rewrite),
        _ => {}
    }
}
