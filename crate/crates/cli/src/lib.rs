//! Command-line and HTTP front ends for the drawing-tutorial engine.

pub mod cache;
pub mod commands;
pub mod service;
