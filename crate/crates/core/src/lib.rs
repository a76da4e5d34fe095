#![no_std]
#![doc = include_str!("../README.md")]

extern crate alloc;

pub mod controller;
pub mod disturbance;
pub mod error;
pub mod learning;
pub mod linalg;
pub mod model;
pub mod problem;
pub mod qp;
pub mod scenarios;
pub mod tube;

pub use error::{Error, Result};
