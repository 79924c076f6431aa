//! Generalized linear network eigenmodels (GLNEMs) for undirected weighted
//! networks with dyadic covariates, with automatic latent-space dimension
//! selection under a spike-and-slab Indian buffet process prior.

pub mod assignment;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod families;
pub mod gof;
pub mod hmc;
pub mod linalg;
pub mod manifold;
pub mod parallel;
pub mod postprocess;
pub mod report;
pub mod sampler;
pub mod selection;
pub mod simulate;
pub mod ssibp;
pub mod special;

pub use error::{GlnemError, Result};

// The guide's code samples double as tests: each chapter is attached as a
// doc comment on a hidden item so `cargo test` compiles and runs them.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub struct Overview;
    #[doc = include_str!("../../../book/src/model.md")]
    pub struct Model;
    #[doc = include_str!("../../../book/src/families.md")]
    pub struct Families;
    #[doc = include_str!("../../../book/src/manifold.md")]
    pub struct Manifold;
    #[doc = include_str!("../../../book/src/prior.md")]
    pub struct Prior;
    #[doc = include_str!("../../../book/src/sampling.md")]
    pub struct Sampling;
    #[doc = include_str!("../../../book/src/postprocess.md")]
    pub struct Postprocess;
    #[doc = include_str!("../../../book/src/selection.md")]
    pub struct Selection;
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub struct Simulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
