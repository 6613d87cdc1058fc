//! Seeded Monte-Carlo simulator and analysis toolkit for the Impact Market
//! peer-review protocol.
//!
//! The crate models one conference cycle as a ground-truth paper universe
//! ([`universe`]) and an investor community ([`investor`]), runs one of three
//! review protocols over it ([`protocol`]), and scores the outcome
//! ([`scoring`]). Multi-cycle Investor-Rating feedback lives in
//! [`calibration`], collusion rings and their detection in [`collusion`].
//! [`load`] and [`longtail`] are standalone analytics, and [`experiment`]
//! wires everything to TOML scenario files and CSV outputs.

pub mod calibration;
pub mod cli;
pub mod collusion;
pub mod config;
pub mod error;
pub mod experiment;
pub mod investor;
pub mod load;
pub mod longtail;
pub mod protocol;
pub mod rng;
pub mod scoring;
pub mod universe;

pub use error::{Error, Result};
