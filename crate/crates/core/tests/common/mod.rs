#![allow(dead_code)]

pub mod vertex_oracle;
pub mod spikes;
