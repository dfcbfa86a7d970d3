use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid path at breakpoint {index}, coordinate {coord}: {msg}")]
    InvalidPath {
        index: usize,
        coord: usize,
        msg: String,
    },
    #[error("user index {index} out of range for K={k}")]
    InvalidUser { index: usize, k: usize },
    #[error("not a permutation of 0..{k}: {detail}")]
    InvalidPermutation { k: usize, detail: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("quadrature did not converge on segment {segment}")]
    Quadrature { segment: usize },
    #[error("rate tuple outside capacity region: violates {constraint}")]
    OutsideRegion { constraint: String },
    #[error("path solve failed after multi-start budget, best residual {residual:.3e}")]
    SolverFailed { residual: f64 },
    #[error("template has {free} free coordinates, need at least {need}")]
    Template { free: usize, need: usize },
    #[error("LP infeasible, most violated grid point rho={rho:.6}, I_EV={iev:.6}")]
    LpInfeasible { rho: f64, iev: f64 },
    #[error("target variance unreachable at this rho ({rho:.6})")]
    Unreachable { rho: f64 },
    #[error("no sign change in bracket [{lo}, {hi}] dB")]
    NoBracket { lo: f64, hi: f64 },
    #[error(
        "layer power does not divide all user powers; largest valid layer power is {suggest:.9}"
    )]
    LayerSplit { suggest: f64 },
    #[error("region check refused for K={0} > 20")]
    RegionTooLarge(usize),
    #[error("profile: {0}")]
    Profile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
