//! Trace classification, interpolation and the supporting lattice machinery for
//! weighted Fock spaces on critical lattices.

pub mod acceptance;
pub mod classifier;
pub mod error;
pub mod numerics;
pub mod functions;
pub mod interpolator;
pub mod job;
pub mod lattice;
pub mod multiplier;
pub mod transforms;
pub mod weight;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Serde helper writing an exponent p as a number, or the string "inf" when infinite.
pub mod serde_p {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if p.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*p)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) if v >= 1.0 => Ok(v),
            Repr::Num(v) => Err(D::Error::custom(format!("p must be at least 1, got {v}"))),
            Repr::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(f64::INFINITY),
            Repr::Str(s) => Err(D::Error::custom(format!("invalid exponent {s:?}"))),
        }
    }
}
