//! Serde helpers writing `f64` values as JSON numbers with 17 significant
//! digits, which round-trips every finite double exactly.

use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

pub fn format(v: f64) -> String {
    format!("{v:.16e}")
}

fn raw<E: serde::ser::Error>(v: f64) -> Result<Box<RawValue>, E> {
    if !v.is_finite() {
        return Err(E::custom("non-finite number"));
    }
    RawValue::from_string(format(v)).map_err(E::custom)
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    raw::<S::Error>(*v)?.serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    f64::deserialize(d)
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for &x in v {
            seq.serialize_element(&raw::<S::Error>(x)?)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<f64>::deserialize(d)
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -0.0] {
            let s = super::format(v);
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(super::format(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn rejects_non_finite() {
        #[derive(serde::Serialize)]
        struct W(#[serde(with = "super")] f64);
        assert!(serde_json::to_string(&W(f64::NAN)).is_err());
    }
}
