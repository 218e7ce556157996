//! Multi-robot perception toolkit.
//!
//! The crate bundles the pieces needed to run and evaluate a multi-camera
//! multi-target tracking pipeline alongside an EKF-SLAM filter:
//!
//! - [`ekf`]: joint robot-pose/landmark estimation with an iterated
//!   measurement update and landmark augmentation.
//! - [`features`]: image-gradient fields and dominant-orientation
//!   extraction from luminance patches.
//! - [`tracker`]: multi-view triangulation, gating, and bounded
//!   multi-hypothesis data association.
//! - [`sim`]: seeded synthetic scenario generation (walkers, cameras,
//!   detection corruption).
//! - [`metrics`]: CLEAR-MOT evaluation (MOTA/MOTP, identity switches).
//! - [`formats`]: the CSV/JSON file formats shared by the CLI and tests.

pub mod assignment;
pub mod ekf;
pub mod error;
pub mod features;
pub mod formats;
pub mod metrics;
pub mod sim;
pub mod tracker;

pub use error::{Error, Result};
