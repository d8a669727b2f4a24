//! Numerical solver for the Fu–Yau Hessian equations on flat complex tori.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod hessian;
pub mod linalg;
pub mod operator;
pub mod solver;
pub mod verify;
