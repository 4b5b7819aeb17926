//! Bayesian logic regression with genetically modified mode-jumping MCMC.
//!
//! Numeric kernels (`linalg`, `likelihood`, `data`, the model prior) are
//! generic over [`num::Real`]; the search engine runs on `f64`, and the
//! aliases below name the concrete types it uses.

pub mod bits;
pub mod config;
pub mod data;
pub mod gmjmcmc;
pub mod io;
pub mod likelihood;
pub mod linalg;
pub mod logic_tree;
pub mod mjmcmc;
pub mod model_space;
pub mod num;
pub mod parallel;
pub mod report;
pub mod score;
pub mod simbench;

pub use data::Family;
pub use gmjmcmc::{aggregate, detect, run_chain, run_chains, GmjmcmcConfig};
pub use likelihood::PriorKind;
pub use logic_tree::LogicTree;

/// Dataset with `f64` responses.
pub type Dataset = data::Dataset<f64>;
/// GLM fit in `f64`.
pub type GlmFit = likelihood::GlmFit<f64>;
/// Dense `f64` matrix.
pub type Matrix = linalg::Matrix<f64>;
