pub mod capacity;
pub mod cli;
pub mod config;
pub mod error;
pub mod kernel;
pub mod lp;
pub mod montecarlo;
pub mod spatial;
pub mod wiener;
