#![allow(dead_code)]

pub mod audit;
pub mod diff;
pub mod gen;
pub mod mix;
pub mod reference;
pub mod traffic;
