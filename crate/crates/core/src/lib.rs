//! Rate-energy trade-offs for simultaneous wireless information and power
//! transfer over fading channels.

pub mod duality;
pub mod error;
pub mod fading;
pub mod region;
mod roots;
pub mod simo;
pub mod siso;

pub use error::{Error, Result};
