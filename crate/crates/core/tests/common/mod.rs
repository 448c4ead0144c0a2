#![allow(dead_code)]

pub mod oracles;
pub mod phi_oracle;
pub mod suite;
