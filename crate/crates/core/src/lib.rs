//! Trace-driven simulation of predictive edge caching for live tiled 360°
//! video.
//!
//! The crate is layered bottom-up:
//!
//! * [`trace`] holds viewer head traces, the tile grid and FoV/tile overlap.
//! * [`fovcast`] predicts which tiles a viewer will fetch.
//! * [`score`] turns predicted requests into time-discounted caching scores.
//! * [`transgain`] prices cached levels when lower ones can be transcoded.
//! * [`cache`] is the store and every eviction policy.
//! * [`sim`] replays a cohort through a policy and accounts bytes and dollars.
//!
//! Data-parallel loops go through [`par`], which falls back to plain
//! iteration when the `parallel` feature is off.

pub mod cache;
pub mod error;
pub mod fovcast;
pub mod par;
pub mod score;
pub mod sim;
pub mod trace;
pub mod transgain;

pub use error::{Error, Result};
