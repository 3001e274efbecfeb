pub mod chartcurv;
pub mod comparators;
pub mod config;
pub mod error;
pub mod experiments;
pub mod functional;
pub mod jet;
pub mod models;
pub mod report;
pub mod suites;
pub mod symalg;
pub mod varform;

pub use error::{LabError, Result};
