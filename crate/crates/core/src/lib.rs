//! Synthetic turbulence generation from stochastic wavelet modes.
//!
//! A velocity fluctuation field is assembled as the curl of a vector
//! potential that is a sum of randomly placed, randomly oriented
//! tensor-product wavelets. Mode weights are normalized against a
//! prescribed energy spectrum so the generated field reproduces the
//! target turbulent kinetic energy distribution; an optional Cholesky
//! map imprints a full Reynolds stress tensor on top of it.
//!
//! The crate is organized around the generation pipeline:
//!
//! * [`wavelet`] — the mother wavelet, tensor-product basis and gradients
//! * [`spectrum`] — von Karman-Pao energy spectrum and wavenumber shells
//! * [`domain`] — flow domain and boundary policies (periodic, no-slip)
//! * [`profile`] — wall-normal RANS statistics ingested from CSV
//! * [`bandplan`] — per-location retained wavenumber band under an
//!   energy-loss budget
//! * [`sampler`] — stochastic mode population and Monte Carlo weight
//!   normalization
//! * [`synthesis`] — curl evaluation, anisotropy map, grid sampling
//! * [`dynamics`] — scale-separated time advancement
//! * [`diagnostics`] — spectra, structure functions, autocorrelations,
//!   Reynolds stress estimators
//! * [`config`], [`field`] — run configuration and field export

pub mod bandplan;
pub mod config;
pub mod diagnostics;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod profile;
pub mod rng;
pub mod sampler;
pub mod spectrum;
pub mod synthesis;
pub mod wavelet;

pub use error::{Error, Result};
