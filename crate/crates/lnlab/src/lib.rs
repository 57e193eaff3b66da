//! Boundary blow-up solutions of Δu = ¼n(n−2)u^((n+2)/(n−2)) near singular
//! boundary points.

pub mod analysis;
pub mod blowup_solver;
pub mod cap_profile;
pub mod cli;
pub mod config;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod spectral;
pub mod spline;
