#![allow(dead_code)]
pub mod dd;
pub mod kernel;
