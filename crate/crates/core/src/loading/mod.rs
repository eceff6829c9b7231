//! Wall loads from fluid tractions.
//!
//! Tractions are stored as the fluid side sees them, `t^f = σ^f n` with `n`
//! the mesh normal (pointing out of the lumen). The wall receives the
//! opposite, `t^s = -t^f`, so a positive lumen pressure pushes the wall
//! outward and a downstream flow drags it downstream.

mod program;
mod series;
mod traction;

pub use program::{LoadMode, LoadProgram, ProgramLoad, Waveform};
pub use series::{read_traction_csv, read_traction_series, write_traction_csv, write_traction_series, TractionSeries};
pub use traction::{analytic_poiseuille, nodal_forces, node_normals, poiseuille_wall_shear, WallTraction, BLOOD_VISCOSITY};
