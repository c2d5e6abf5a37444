//! Independent oracles shared by integration tests and the acceptance run.
#![allow(dead_code)]

pub mod naive_felzenszwalb;
pub mod planted;
