//! Value-added school performance analytics.
//!
//! The crate scores pupil progress as residuals from a dummy-variable
//! least-squares regression of Attainment 8 on KS2 prior-attainment groups
//! (optionally adjusted for pupil background), aggregates them to school
//! scores with confidence intervals, bands and ranks schools, compares
//! measures, tests group gaps with school-clustered Wald tests, and offers
//! an empirical-Bayes shrinkage alternative. A seeded synthetic cohort
//! generator makes every stage testable without restricted pupil data.

pub mod accountability;
pub mod cohort;
pub mod design;
pub mod io;
pub mod numerics;
pub mod synth;
pub mod valueadded;

mod error;

pub use error::Error;
