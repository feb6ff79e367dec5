//! Primitive JavaScript values as seen by constant propagation.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A compile-time-known primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JsConst {
    Str(String),
    Num(f64),
    Bool(bool),
    Null,
    Undefined,
}

/// Longest string constant propagation will materialize.
pub const MAX_CONST_LEN: usize = 64 * 1024;

impl JsConst {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            JsConst::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_string(&self) -> bool {
        matches!(self, JsConst::Str(_))
    }

    /// `ToString` for primitives.
    pub fn to_js_string(&self) -> String {
        match self {
            JsConst::Str(s) => s.clone(),
            JsConst::Num(n) => number_to_string(*n),
            JsConst::Bool(b) => b.to_string(),
            JsConst::Null => "null".to_string(),
            JsConst::Undefined => "undefined".to_string(),
        }
    }

    fn to_number(&self) -> f64 {
        match self {
            JsConst::Num(n) => *n,
            JsConst::Bool(b) => f64::from(u8::from(*b)),
            JsConst::Null => 0.0,
            JsConst::Undefined => f64::NAN,
            JsConst::Str(s) => {
                let t = s.trim();
                if t.is_empty() {
                    0.0
                } else {
                    t.parse().unwrap_or(f64::NAN)
                }
            }
        }
    }

    /// The binary `+` operator. Returns `None` if the result would exceed [`MAX_CONST_LEN`].
    pub fn add(&self, rhs: &JsConst) -> Option<JsConst> {
        if self.is_string() || rhs.is_string() {
            let l = self.to_js_string();
            let r = rhs.to_js_string();
            if l.len() + r.len() > MAX_CONST_LEN {
                return None;
            }
            Some(JsConst::Str(l + &r))
        } else {
            Some(JsConst::Num(self.to_number() + rhs.to_number()))
        }
    }
}

impl fmt::Display for JsConst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_js_string())
    }
}

/// `Number.prototype.toString()` with radix 10.
pub fn number_to_string(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Infinity" } else { "-Infinity" }.to_string();
    }
    if x < 0.0 {
        return format!("-{}", number_to_string(-x));
    }
    // Shortest round-trip digits and decimal exponent.
    let exp_form = format!("{x:e}");
    let (mantissa, exp) = exp_form.split_once('e').expect("LowerExp output has an exponent");
    let exp: i32 = exp.parse().expect("LowerExp exponent is an integer");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let k = digits.len() as i32;
    let n = exp + 1;

    if k <= n && n <= 21 {
        let mut s = digits;
        s.extend(std::iter::repeat('0').take((n - k) as usize));
        s
    } else if 0 < n && n <= 21 {
        format!("{}.{}", &digits[..n as usize], &digits[n as usize..])
    } else if -6 < n && n <= 0 {
        format!("0.{}{}", "0".repeat((-n) as usize), digits)
    } else {
        let e = n - 1;
        let sign = if e >= 0 { '+' } else { '-' };
        if k == 1 {
            format!("{digits}e{sign}{}", e.abs())
        } else {
            format!("{}.{}e{sign}{}", &digits[..1], &digits[1..], e.abs())
        }
    }
}
