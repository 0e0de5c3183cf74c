pub mod cbf;
pub mod cli;
pub mod config;
pub mod cost;
pub mod dynamics;
pub mod env;
pub mod experiments;
pub mod sampler;
pub mod valuefn;
