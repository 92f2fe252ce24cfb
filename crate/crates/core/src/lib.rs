//! A small laboratory for retrieval-augmented question answering in which
//! one policy decides when to retrieve, what query to send, and how to answer,
//! and is trained end to end with behavior cloning followed by PPO against a
//! simulated knowledge base.

pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod policy;
pub mod retriever;
pub mod text;
pub mod training;
pub mod worldgen;

pub use error::{Error, Result};
