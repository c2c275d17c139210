//! Float serialization for reports: six significant digits, so that report
//! bytes do not depend on the last bits of platform float arithmetic.

use serde::Serializer;

pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

pub fn sig6<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig6(*x))
}

pub fn sig6_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_f64(round_sig6(*v)),
        None => s.serialize_none(),
    }
}
