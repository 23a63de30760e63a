//! Seed derivation for every instance and run.
//!
//! All randomness hangs off `StreamKey::root(master_seed)`:
//!
//! ```text
//! root / n:<n> / <ensemble>:<i>                     instance key
//!      instance key / instance:0                    -> instance seed (first 8 bytes)
//!      instance key / length:<l> / repeat:<r> / <series>:0   -> run stream
//! ```
//!
//! Instance seeds do not depend on the method, so every method sees the same
//! instances for a given master seed.

use qeopt::rng::StreamKey;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    /// Instances used to sweep lengths and fit the optimum.
    Tune,
    /// Fresh instances used to evaluate at the fitted optimum.
    Eval,
}

impl Ensemble {
    pub fn label(self) -> &'static str {
        match self {
            Self::Tune => "tune",
            Self::Eval => "eval",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tune" => Some(Self::Tune),
            "eval" => Some(Self::Eval),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeedTree {
    root: StreamKey,
}

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        Self {
            root: StreamKey::root(master_seed),
        }
    }

    pub fn instance_key(&self, n: usize, ensemble: Ensemble, instance: usize) -> StreamKey {
        self.root.child("n", n as u64).child(ensemble.label(), instance as u64)
    }

    pub fn instance_seed(&self, n: usize, ensemble: Ensemble, instance: usize) -> u64 {
        self.instance_key(n, ensemble, instance).child("instance", 0).to_u64()
    }

    pub fn run_key(&self, coord: &RunCoord) -> StreamKey {
        self.instance_key(coord.n, coord.ensemble, coord.instance)
            .child("length", coord.length)
            .child("repeat", coord.repeat as u64)
            .child(&coord.series, 0)
    }
}

/// Position of a single run in an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunCoord {
    pub series: String,
    pub n: usize,
    pub ensemble: Ensemble,
    pub instance: usize,
    pub length: u64,
    pub repeat: usize,
}

/// One line of the seed ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub series: String,
    pub n: usize,
    pub ensemble: Ensemble,
    pub instance: usize,
    pub instance_seed: u64,
    pub length: u64,
    pub repeat: usize,
    pub stream_key: String,
}

impl SeedTree {
    pub fn ledger_row(&self, coord: &RunCoord) -> LedgerRow {
        LedgerRow {
            series: coord.series.clone(),
            n: coord.n,
            ensemble: coord.ensemble,
            instance: coord.instance,
            instance_seed: self.instance_seed(coord.n, coord.ensemble, coord.instance),
            length: coord.length,
            repeat: coord.repeat,
            stream_key: self.run_key(coord).to_hex(),
        }
    }
}
