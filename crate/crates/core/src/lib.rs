//! Cut-cell finite elements on uniform B-spline grids: geometry, cut-cell
//! quadrature, a stabilized incompressible Navier-Stokes solver with weak
//! boundary conditions, a staggered rigid-body FSI coupler and the study
//! drivers built on top of them.

pub mod config;
pub mod error;
pub mod flowsolver;
pub mod fsi;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod quadrature;
pub mod splinegrid;

pub use config::{RunConfig, Study};
pub use error::{Error, Result};
pub use geometry::{
    CartesianGrid, CellBox, CellClass, FluidDomain, FluidRegion, FluidSide, ImplicitShape, Point2, PolygonBoundary,
};
