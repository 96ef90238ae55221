//! Distribution-regression decomposition of annual earnings.
//!
//! Annual earnings factor as participation x hours x hourly wage, with hours
//! censored at zero and wages observed for workers only. This crate fits
//! distribution regressions for hours and (selection-corrected, through an
//! estimated control function) wages, composes them into counterfactual
//! earnings distributions that swap the participation, hours, composition and
//! wage-structure components across two years, and decomposes distributional
//! change into those four channels with weighted-bootstrap inference. A
//! configurable synthetic-data generator with closed-form targets supports
//! validation end to end.

pub mod basis;
pub mod bootstrap;
pub mod control;
pub mod counterfactual;
pub mod decomposition;
pub mod dgp;
pub mod dr;
pub mod error;
pub mod exec;
pub mod model;
pub mod rng;
pub mod stats;
pub mod structural;

pub use error::{Error, Result};
