//! Discrete 2-D TM scattering model: grid, Green operators, forward solver,
//! noise, phantoms and the analytic cylinder solution.

pub mod forward;
mod instance;
pub mod mie;
pub mod operators;
pub mod phantom;
pub mod setup;

pub use forward::{add_noise, coupling_residual, forward_solve, ContrastImage, CurrentSet, MeasurementSet};
pub use instance::Instance;
pub use operators::{
    build_operators, total_field, CountingOperators, CurrentScaling, FieldOperators, ScatteringOperators,
};
pub use phantom::{make_phantom, PhantomKind};
pub use setup::{build_grid, GridGeometry, ImagingSetup, SPEED_OF_LIGHT};
