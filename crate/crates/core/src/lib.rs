pub mod config;
pub mod economics;
pub mod formulation;
pub mod lp;
pub mod pipeline;
pub mod presets;
pub mod timeseries;
pub mod validation;
