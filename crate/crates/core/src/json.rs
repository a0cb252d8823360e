//! JSON helpers for numbers written with a fixed 17 significant digits.

use serde::ser::{Error as _, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// `x` in scientific notation with 17 significant digits.
pub fn format17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // not representable in JSON; callers validate finiteness first
        "null".to_string()
    }
}

fn raw<E: serde::ser::Error>(x: f64) -> Result<Box<RawValue>, E> {
    RawValue::from_string(format17(x)).map_err(E::custom)
}

pub fn f64_17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return Err(S::Error::custom("non-finite float"));
    }
    raw::<S::Error>(*x)?.serialize(s)
}

pub fn vecs_17<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(rows.len()))?;
    for row in rows {
        let cells = row
            .iter()
            .map(|&x| raw::<S::Error>(x))
            .collect::<Result<Vec<_>, _>>()?;
        seq.serialize_element(&cells)?;
    }
    seq.end()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format17(0.1), "1.0000000000000001e-1");
        assert_eq!(format17(-2.0), "-2.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, -7.25e-300, 6.02e23] {
            assert_eq!(format17(x).parse::<f64>().unwrap(), x);
        }
    }
}
