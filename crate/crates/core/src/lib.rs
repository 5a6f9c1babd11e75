//! Credit portfolio loss distributions with random integer severities,
//! including distributions conditional on the default of one or two obligors.
//!
//! The modules build on each other: [`model`] holds the validated portfolio,
//! [`pmf`] the truncated distribution algebra, [`engine`] the sector system
//! and (stressed) loss distributions, [`conditional`] the default scenarios,
//! [`simulate`] an independent Monte Carlo reference and [`cli`] the command
//! line front end.

pub mod cli;
pub mod conditional;
pub mod engine;
pub mod model;
pub mod pmf;
pub mod simulate;
