//! Stable numeric output: every float is cut to 12 significant digits and
//! then printed in shortest round-trip form.

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::Result;

/// `v` rounded to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Rounds every float in a JSON tree in place. Non-finite values become `null`.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let f = n.as_f64().unwrap_or(f64::NAN);
            *v = Number::from_f64(round12(f)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Serializes `value` with rounded floats, keeping field order.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    Ok(serde_json::to_string(&v)?)
}

/// A float for CSV cells; empty for `None`.
pub fn cell(v: Option<f64>) -> String {
    match v {
        Some(f) => {
            let r = round12(f);
            if r.is_finite() {
                serde_json::to_string(&r).unwrap_or_default()
            } else {
                String::new()
            }
        }
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(round12(1.0 / 18.0), 0.0555555555556);
        assert_eq!(round12(2.0), 2.0);
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(cell(Some(2.0)), "2.0");
        assert_eq!(cell(None), "");
    }

    #[test]
    fn json_tree() {
        let s = to_json(&serde_json::json!({"b": 1.0 / 3.0, "a": [1, f64::NAN], "n": 7})).unwrap();
        assert_eq!(s, r#"{"b":0.333333333333,"a":[1,null],"n":7}"#);
    }
}
