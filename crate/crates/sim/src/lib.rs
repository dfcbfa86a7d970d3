//! Monte-Carlo link simulation for iterative IDMA receivers with LDPC codes.

pub mod bp;
pub mod error;
pub mod ldpc;
pub mod link;
pub mod rng;
pub mod stats;

pub use error::{Result, SimError};
pub use ldpc::{build_ldpc, LdpcCode};
pub use link::{
    capture_llr_histograms, histograms_csv, run_link, run_scm_link, HistSpec, LinkParams, LinkRun,
    LlrHistogram, ScmRun, UserStats,
};
