//! Spatial-configuration similarity benchmark: dataset generation, graph
//! network classifiers on a small reverse-mode autodiff core, training and
//! analysis.

pub mod alignment;
pub mod analysis;
pub mod autograd;
pub mod datagen;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod models;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
