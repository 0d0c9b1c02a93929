use crate::error::Result;
use crate::model::{
    add_noise, build_grid, build_operators, forward_solve, make_phantom, ContrastImage, CurrentSet, GridGeometry,
    ImagingSetup, MeasurementSet, PhantomKind, ScatteringOperators,
};

/// A synthetic experiment: model, ground truth and simulated data.
#[derive(Debug, Clone)]
pub struct Instance {
    pub setup: ImagingSetup,
    pub grid: GridGeometry,
    pub ops: ScatteringOperators,
    pub truth: ContrastImage,
    pub true_currents: CurrentSet,
    pub clean: MeasurementSet,
    /// `clean` with noise at the requested SNR, seeded by `setup.seed`.
    pub data: MeasurementSet,
}

impl Instance {
    pub fn synthetic(setup: ImagingSetup, phantom: PhantomKind, snr_db: f64) -> Result<Self> {
        let grid = build_grid(&setup)?;
        let ops = build_operators(&setup, &grid)?;
        let truth = make_phantom(phantom, &grid);
        Self::from_truth(setup, grid, ops, truth, snr_db)
    }

    pub fn from_truth(
        setup: ImagingSetup,
        grid: GridGeometry,
        ops: ScatteringOperators,
        truth: ContrastImage,
        snr_db: f64,
    ) -> Result<Self> {
        let (true_currents, clean) = forward_solve(&truth, &ops, setup.frequency)?;
        let data = add_noise(&clean, snr_db, setup.seed);
        Ok(Self { setup, grid, ops, truth, true_currents, clean, data })
    }
}
