//! Near-field synthetic aperture radar laboratory.
//!
//! The crate covers the full chain from system description to labeled data:
//!
//! ```text
//! waveform + aperture + scene ──simulate──▶ echo (signal domain)
//!        echo ──bpa / rma-*──▶ k-space stages (intermediate domain) ──▶ image
//!        image ──analysis──▶ PSF widths, resolution reports, NCC
//! ```
//!
//! Everything is double precision. Complex samples use [`num_complex::Complex64`].

pub mod analysis;
pub mod aperture;
pub mod config;
pub mod cvnn;
pub mod dataset;
pub mod engine;
mod error;
pub mod fft;
pub mod forward;
pub mod recon;
pub mod sarb;
pub mod scene;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum (m/s).
pub const C: f64 = 299_792_458.0;
