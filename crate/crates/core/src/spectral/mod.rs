//! Spectral building blocks: Chebyshev and Fourier operators, the disk and
//! annulus grids, mapped frames and the iterative elliptic solver.

pub mod cheb;
pub mod fourier;
pub mod frame;
pub mod gmres;
pub mod grid;

pub use frame::Frame;
pub use gmres::{GmresOptions, GmresStats};
pub use grid::{AnnulusGrid, DiskGrid, Grid, ModeSolver, Ring};
