//! Drawing-tutorial synthesis: fit scaffolding primitives to a segmented
//! model, snap them to easy-to-construct proportions, choose an anchoring
//! order, and compile per-view step sequences with construction guides.

pub mod candidates;
pub mod config;
pub mod doc;
pub mod fixtures;
pub mod geom;
pub mod model_io;
pub mod plan;
pub mod primitives;
pub mod projective;
pub mod relations;
pub mod render;
pub mod selection;
pub mod tutorial;
