pub mod codedesign;
pub mod config;
pub mod error;
pub mod evolution;
pub mod lp;
pub mod mmse;
pub mod path;
pub mod pathfinder;
pub mod quad;
pub mod rates;
pub mod transfer;

pub use config::{load_config, snr_sum, Config, MimoConfig, Modulation, SystemConfig};
pub use error::{Error, Result};
pub use path::{validate_path, MsePath, RateTuple};
