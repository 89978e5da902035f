//! Pairwise MRF energy minimization with discriminative pre-processing.
//!
//! The crate is organised bottom-up:
//!
//! * [`energy`]: pairwise energies, labelings, conditioning and expansion subproblems.
//! * [`oracle`]: brute-force ground truth for small instances.
//! * [`marginals`]: the factorized distributions used to weigh neighbor configurations.
//! * [`preprocess`]: the persistency classifier and the construction loop that fixes variables.
//! * [`inference`]: max-flow, roof duality and the expansion-move driver.
//! * [`bounds`]: optimality certificates derived from a pre-processing run.
//! * [`harness`]: instance generators, JSON I/O, measurements and the benchmark suite.

pub mod bounds;
pub mod energy;
pub mod error;
pub mod harness;
pub mod inference;
pub mod marginals;
pub mod oracle;
pub mod preprocess;

pub use energy::{EnergyBuilder, EnergyFunction, Labeling, Neighbor, PartialLabeling};
pub use error::{Error, Result};

/// Default strictness tolerance for "> 0" energy comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Reads the global tolerance from `MRF_TOL`, falling back to [`DEFAULT_TOL`].
pub fn tolerance_from_env() -> f64 {
    std::env::var("MRF_TOL")
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|t| t.is_finite() && *t >= 0.0)
        .unwrap_or(DEFAULT_TOL)
}

/// Serializes `f64::INFINITY` as the string `"inf"`; finite values stay numbers.
pub(crate) mod serde_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
