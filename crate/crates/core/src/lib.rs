//! Pace-layer sonification engine.
//!
//! Six data streams, each changing at its own pace, are fetched (or replayed
//! from fixtures), narrated into a sentence with three emotion labels, matched
//! against a labeled sound library, and rendered as a rule-congruent event
//! stream. Two pointer "hands" pluck five strings laid across the layer bands.
//!
//! The crate is synchronous and deterministic. The live server in the
//! `sonifier` crate drives a [`session::Session`] from an async event loop;
//! headless runs drive the same session from a pointer script on a logical
//! clock.

pub mod ingestion;
pub mod interaction;
pub mod layers;
pub mod library;
pub mod music;
pub mod semantic;
pub mod session;
pub mod time;

pub use layers::{LayerId, PaceLayer};
pub use time::Timestamp;
