//! Causal-effect estimation for moderation actions in threaded-discussion logs.
//!
//! The crate ingests comment/removal logs, extracts behavioral features from
//! per-user timelines, and estimates the effect of comment removal on
//! subsequent behavior via two designs: an interrupted time-series regression
//! around each removal, and a delayed-feedback matched comparison that uses
//! slow moderation as a source of quasi-random treatment timing. A seeded
//! synthetic-corpus generator with known injected effects validates both
//! estimators end to end.

pub mod corpus;
pub mod df;
pub mod features;
pub mod its;
pub mod round;
pub mod stats;
pub mod synth;
