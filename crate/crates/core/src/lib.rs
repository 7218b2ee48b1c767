//! Radiomic texture descriptors computed on tumor ROIs and on the feature maps
//! of a small 3D convolutional network, together with the survival statistics
//! and random-forest tooling used to test whether those descriptors separate
//! short- from long-term survivors.

pub mod conv3d;
pub mod error;
pub mod learn;
pub mod pipeline;
pub mod survival;
pub mod table;
pub mod texture;
pub mod volume_io;

pub use error::{Error, Result};
