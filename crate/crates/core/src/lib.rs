pub mod cli;
pub mod densities;
pub mod error;
pub mod hedging;
pub mod mc;
pub mod measure;
pub mod par;
pub mod pricer;
pub mod quadrature;
pub mod quantile;
pub mod regime;
pub mod rng;
pub mod special;
