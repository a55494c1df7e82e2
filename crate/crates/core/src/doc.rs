//! Canonical JSON text for plan and tutorial documents: sorted keys,
//! floats rounded to nine significant digits, trailing newline.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Number, Value};

pub const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds to [`SIGNIFICANT_DIGITS`]; idempotent.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    let text = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let r: f64 = text.parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"));
            *n = Number::from_f64(r).expect("finite");
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn to_canonical_value<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("document serializes");
    round_value(&mut v);
    v
}

pub fn to_canonical_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(&to_canonical_value(value)).expect("document serializes");
    s.push('\n');
    s
}

/// Round trip through canonical text, so in-memory values match what a
/// reader of the written document sees.
pub fn canonicalize<T: Serialize + DeserializeOwned>(value: &T) -> T {
    serde_json::from_value(to_canonical_value(value)).expect("canonical document parses")
}
