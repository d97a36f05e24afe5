//! Reconstruction of 2D attenuation fields from sparse parallel-beam x-ray
//! projections.
//!
//! The field is modeled as a zero-mean Gaussian process whose covariance is
//! approximated by a truncated Laplace eigenbasis on a rectangle. Because
//! each basis function integrates in closed form along a ray, the sinogram
//! likelihood separates into a geometry matrix `Φ` (assembled once) and a
//! diagonal of spectral-density weights `Λ` (cheap to rebuild), which makes
//! hyperparameter estimation by Metropolis–Hastings practical. Classical
//! Tikhonov and Laplacian regularization fit the same machinery through
//! their spectral densities, and a filtered-backprojection baseline with the
//! five standard filters is included for comparison.
//!
//! Modules:
//! * [`geometry`] — rays, scan layouts, ellipse phantoms, projectors, noise;
//! * [`covariance`] — SE/Matérn/Tikhonov/Laplacian priors and spectral
//!   densities;
//! * [`basis`] — Laplace eigenbasis and closed-form ray integrals;
//! * [`gp`] — reduced-rank posterior fields and marginal likelihoods;
//! * [`hyper`] — Metropolis–Hastings, L-curve, cross-validation;
//! * [`fbp`] — filtered backprojection;
//! * [`metrics`] — relative error and PSNR;
//! * [`io`] — the text/binary file formats shared with the CLI.

pub mod basis;
pub mod covariance;
pub mod error;
pub mod fbp;
pub mod geometry;
pub mod gp;
pub mod hyper;
pub mod io;
pub mod linalg;
pub mod metrics;

pub use basis::{assemble, assemble_from_rays, assemble_phi, lambda_vector, BasisSystem, ProjectedBasis};
pub use covariance::{CovFamily, CovarianceSpec};
pub use error::{Error, Result};
pub use fbp::{fbp_reconstruct, filter_projection, window_gain, FilterKind};
pub use geometry::{
    add_noise, analytic_sinogram, chest_like_phantom, disk_phantom, pixel_sinogram,
    pixel_sinogram_with_step, Ellipse, EllipsePhantom, ImageGrid, Ray, ScanGeometry, Sinogram,
};
pub use gp::{
    fit_weights, fit_weights_data_space, fit_weights_weight_space, log_marginal_likelihood,
    lml_data_space, lml_weight_space, predict_field, predict_measurements, GridSpec, HyperParams,
    InverseProblem, PosteriorField, WeightPosterior,
};
pub use hyper::{
    chain_estimate, cross_validate, l_curve, mh_sample, mh_sample_from, random_walk_mh,
    ChainEstimate, ChainSample, ChainTrace, CvOutcome, CvResult, LCurve, LCurvePoint, MhOptions,
};
pub use metrics::{metrics, psnr, relative_error, Metrics};
