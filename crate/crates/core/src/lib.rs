//! Spectral geometries on finite metric spaces.
//!
//! The crate builds finite spectral geometries M(B, m) over exact distance
//! matrices: support sets with prescribed density, marked spectra of bounded
//! deformations, Connes metrics via incidence-graph shortest paths, and
//! spectral / box / Hausdorff-reference dimension estimators.
//!
//! Everything is generic over the scalar type through [`scalar::Scalar`]
//! (implemented for `f32` and `f64`); the aliases at the crate root fix the
//! default `f64` instantiation.

pub mod connes;
pub mod deformation;
pub mod dimension;
pub mod geometry;
pub mod net;
pub mod scalar;
pub mod spaces;
pub mod support;
pub mod verify;

pub use scalar::Scalar;

/// Default `f64` instantiations of the core types.
pub type Space = spaces::FiniteMetricSpace<f64>;
pub type Cantor = spaces::CantorSpec<f64>;
pub type Support = support::SupportSet<f64>;
pub type Spectrum = deformation::MarkedSpectrum<f64>;
pub type Geometry = geometry::SpectralGeometry<f64>;
pub type Metric = connes::MetricOnSubset<f64>;
pub type Report = dimension::DimensionReport<f64>;
