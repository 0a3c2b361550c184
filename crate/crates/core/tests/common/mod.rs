#![allow(dead_code)]

pub mod corpus;
pub mod gen;
pub mod laws;
pub mod pars;
