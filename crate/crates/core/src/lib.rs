pub mod dense;
pub mod error;
pub mod fit;
pub mod grid;
pub mod init;
pub mod io;
pub mod kernels;
pub mod kron;
pub mod logdet;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod warp;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases of the main generic types.
pub type GridDataset = grid::GridDataset<f64>;
pub type Observations = grid::Observations<f64>;
pub type KernelSpec = kernels::KernelSpec<f64>;
pub type ChangeSurface = warp::ChangeSurface<f64>;
pub type RksWeight = warp::RksWeight<f64>;
pub type ChangeSurfaceModel = model::ChangeSurfaceModel<f64>;
pub type KronOperator = kron::KronOperator<f64>;
pub type EigenSpectrum = kron::EigenSpectrum<f64>;
pub type Gmm1D = init::Gmm1D<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type GridDataset = crate::grid::GridDataset<f32>;
    pub type Observations = crate::grid::Observations<f32>;
    pub type KernelSpec = crate::kernels::KernelSpec<f32>;
    pub type ChangeSurface = crate::warp::ChangeSurface<f32>;
    pub type RksWeight = crate::warp::RksWeight<f32>;
    pub type ChangeSurfaceModel = crate::model::ChangeSurfaceModel<f32>;
    pub type KronOperator = crate::kron::KronOperator<f32>;
    pub type EigenSpectrum = crate::kron::EigenSpectrum<f32>;
    pub type Gmm1D = crate::init::Gmm1D<f32>;
}
