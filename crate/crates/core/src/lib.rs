//! Contrast-source inversion for 2-D TM microwave tomography.

pub mod criterion;
pub mod error;
pub mod inversion;
pub mod io;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod special;

pub use error::{Error, Result};
pub use linalg::C64;
pub use model::{
    add_noise, build_grid, build_operators, forward_solve, make_phantom, total_field, ContrastImage, CurrentSet,
    FieldOperators, GridGeometry, ImagingSetup, Instance, MeasurementSet, PhantomKind, ScatteringOperators,
};
