//! Command-line tools and HTTP job service for `sarlab-core`.

pub mod presets;
pub mod render;
pub mod service;
