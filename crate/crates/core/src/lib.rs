//! Cyclotomic p-adic heights of rational points on elliptic curves over Q
//! with good ordinary reduction at p >= 5.

pub mod divpoly;
pub mod error;
pub mod formal_group;
pub mod height;
pub mod kedlaya;
mod ntt;
pub mod padic;
pub mod curve;
pub mod series;
pub mod sigma;

pub use error::{Error, Result};

