pub mod combination;
pub mod cores;
pub mod error;
pub mod fixtures;
pub mod group;
pub mod harmonic;
pub mod io;
pub mod moebius;
pub mod sphere;
pub mod vec3;
pub mod verdict;

pub use error::{Error, Result};
