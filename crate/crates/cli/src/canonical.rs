//! Canonical JSON: sorted keys and floats rounded to 12 significant digits,
//! so equal inputs give byte-identical output.

use serde::Serialize;
use serde_json::Value;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

fn canonicalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number);
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(canonicalize),
        Value::Object(m) => m.values_mut().for_each(canonicalize),
        _ => {}
    }
}

pub fn to_value(x: &impl Serialize) -> Value {
    let mut v = serde_json::to_value(x).expect("report types serialize");
    canonicalize(&mut v);
    v
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn to_string(x: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(x)).expect("values serialize");
    s.push('\n');
    s
}

/// `x` rounded to 12 significant digits in its shortest round-trip form.
pub fn format_float(x: f64) -> String {
    let r = round_sig(x);
    if !r.is_finite() || r == 0.0 {
        format!("{r:?}")
    } else if r.abs() < 1e-4 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else if r == r.trunc() {
        format!("{r:.1}")
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_floats_rounded() {
        let s = to_string(&json!({"b": 0.1 + 0.2, "a": [1, 2.0 / 3.0], "c": null}));
        assert_eq!(
            s,
            "{\n  \"a\": [\n    1,\n    0.666666666667\n  ],\n  \"b\": 0.3,\n  \"c\": null\n}\n"
        );
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(-123456.7890123456), -123456.789012);
        assert_eq!(round_sig(1e-300 / 3.0), 3.33333333333e-301);
        assert_eq!(format_float(2.0), "2.0");
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(1.083983597621e-13), "1.08398359762e-13");
        assert_eq!(format_float(0.0), "0.0");
    }
}
