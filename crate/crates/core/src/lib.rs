pub mod emm;
pub mod girsanov;
pub mod error;
pub mod kernel;
pub mod levy;
pub mod par;
pub mod pipeline;
pub mod quad;
pub mod scenario;
pub mod sim;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
