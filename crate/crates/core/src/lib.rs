//! Road-network extraction from raster maps by iterative graph search, with
//! the per-step decision made by an adaptive-structure deep belief network.

pub mod adaptive;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod dbn;
pub mod decision;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod pretrain;
pub mod raster;
pub mod rbm;
pub mod render;
pub mod search;
pub mod world;

pub use error::{Error, Result};
