//! Reduced-rank Gaussian-process inference.
//!
//! With basis integrals `Φ`, spectral weights `Λ` and noise scale `σ`, the
//! posterior over basis coefficients has precision `A = Λ⁻¹ + Φ Φᵀ / σ²`.
//! Everything here is computed through one of two symmetric factorizations:
//!
//! * weight space (m × m): `B = σ² I + Λ^{1/2} Φ Φᵀ Λ^{1/2}`, so that
//!   `A⁻¹ = σ² Λ^{1/2} B⁻¹ Λ^{1/2}` without ever inverting `Λ`;
//! * data space (n × n): `B = σ² I + Φᵀ Λ Φ` with the Woodbury identity for
//!   `A⁻¹`.
//!
//! The two are algebraically identical; the cheaper one is chosen from an
//! operation-count model. The marginal likelihood uses the matrix-determinant
//! lemma `det(σ²Iₙ + ΦᵀΛΦ) = σ^{2(n-m)} det(σ²I_m + Λ^{1/2}ΦΦᵀΛ^{1/2})` on
//! the weight-space route.

use ndarray::{Array1, Array2, Axis};

use crate::basis::{BasisSystem, ProjectedBasis};
use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::geometry::{ImageGrid, Ray, Sinogram};
use crate::linalg::{self, SpdFactor};

/// Hyperparameters of the hierarchical model: prior magnitude, prior length
/// scale where the family has one, and the noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub sigma_f: f64,
    pub length_scale: Option<f64>,
    pub sigma: f64,
}

impl HyperParams {
    pub fn new(sigma_f: f64, length_scale: Option<f64>, sigma: f64) -> Self {
        HyperParams {
            sigma_f,
            length_scale,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f > 0.0 && self.sigma_f.is_finite()) {
            return Err(Error::invalid(format!("sigma_f must be positive, got {}", self.sigma_f)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Some(l) = self.length_scale {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("length scale must be positive, got {l}")));
            }
        }
        Ok(())
    }
}

/// Pixel grid specification for posterior field evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub l1: f64,
    pub l2: f64,
}

impl GridSpec {
    pub fn square(n: usize, half_width: f64) -> Self {
        GridSpec {
            n1: n,
            n2: n,
            l1: half_width,
            l2: half_width,
        }
    }

    /// Pixel centers in row-major order.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        let img = ImageGrid::zeros(self.n1, self.n2, self.l1, self.l2);
        let mut out = Vec::with_capacity(self.n1 * self.n2);
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                out.push(img.pixel_center(i, j));
            }
        }
        out
    }
}

enum PosteriorFactor {
    WeightSpace {
        factor: SpdFactor,
        sqrt_lambda: Array1<f64>,
    },
    DataSpace {
        factor: SpdFactor,
    },
}

/// Gaussian posterior over basis coefficients: mean vector and a factorized
/// representation of the posterior precision.
pub struct WeightPosterior {
    /// Posterior mean of the coefficients.
    pub mu: Array1<f64>,
    /// Noise standard deviation used in the fit.
    pub sigma: f64,
    /// Diagonal jitter that was added before factorizing.
    pub jitter: f64,
    factor: PosteriorFactor,
}

impl WeightPosterior {
    /// `Uᵀ A⁻¹ U` for an m × p block `U`, through the stored factorization.
    /// `basis` must be the one the posterior was fitted on.
    pub fn precision_inv_quad(&self, basis: &ProjectedBasis, u: &Array2<f64>) -> Array2<f64> {
        match &self.factor {
            PosteriorFactor::WeightSpace { factor, sqrt_lambda } => {
                let mut s = u.clone();
                for (mut row, &d) in s.axis_iter_mut(Axis(0)).zip(sqrt_lambda.iter()) {
                    row *= d;
                }
                let z = factor.solve_mat(&s);
                linalg::at_b(&s, &z) * (self.sigma * self.sigma)
            }
            PosteriorFactor::DataSpace { factor } => {
                // A⁻¹ = Λ - ΛΦ B⁻¹ ΦᵀΛ
                let lambda = basis.lambda();
                let mut lu = u.clone();
                for (mut row, &d) in lu.axis_iter_mut(Axis(0)).zip(lambda.iter()) {
                    row *= d;
                }
                let t = linalg::at_b(basis.phi(), &lu); // n × p
                let z = factor.solve_mat(&t);
                linalg::at_b(&u, &lu) - linalg::at_b(&t, &z)
            }
        }
    }

    /// Marginal posterior variances `diag(Uᵀ A⁻¹ U)` for an m × p block.
    fn precision_inv_diag(&self, basis: &ProjectedBasis, u: &Array2<f64>) -> Array1<f64> {
        match &self.factor {
            PosteriorFactor::WeightSpace { factor, sqrt_lambda } => {
                let mut s = u.clone();
                for (mut row, &d) in s.axis_iter_mut(Axis(0)).zip(sqrt_lambda.iter()) {
                    row *= d;
                }
                let z = factor.solve_mat(&s);
                let mut out = Array1::zeros(u.ncols());
                for j in 0..u.ncols() {
                    out[j] = s.column(j).dot(&z.column(j)) * self.sigma * self.sigma;
                }
                out
            }
            PosteriorFactor::DataSpace { factor } => {
                let lambda = basis.lambda();
                let mut lu = u.clone();
                for (mut row, &d) in lu.axis_iter_mut(Axis(0)).zip(lambda.iter()) {
                    row *= d;
                }
                let t = linalg::at_b(basis.phi(), &lu);
                let z = factor.solve_mat(&t);
                let mut out = Array1::zeros(u.ncols());
                for j in 0..u.ncols() {
                    out[j] = u.column(j).dot(&lu.column(j)) - t.column(j).dot(&z.column(j));
                }
                out
            }
        }
    }
}

fn check_fit_inputs(basis: &ProjectedBasis, y: &Array1<f64>, sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("noise sigma must be positive, got {sigma}")));
    }
    if basis.n() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "phi has {} columns but y has {} entries",
            basis.n(),
            y.len()
        )));
    }
    Ok(())
}

/// Estimated cost of the two solve routes, in fused multiply-adds.
fn weight_space_cost(m: usize, n: usize, gram_cached: bool) -> f64 {
    let (m, n) = (m as f64, n as f64);
    let gram = if gram_cached { 0.0 } else { m * m * n / 2.0 };
    gram + m * m * m / 6.0 + 2.0 * m * m
}

fn data_space_cost(m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    m * n * n / 2.0 + n * n * n / 6.0 + m * n
}

fn prefer_weight_space(basis: &ProjectedBasis) -> bool {
    weight_space_cost(basis.m(), basis.n(), basis.gram_cached())
        <= data_space_cost(basis.m(), basis.n())
}

/// Posterior over coefficients via the m × m weight-space system.
pub fn fit_weights_weight_space(
    basis: &ProjectedBasis,
    y: &Array1<f64>,
    sigma: f64,
) -> Result<WeightPosterior> {
    check_fit_inputs(basis, y, sigma)?;
    let sqrt_lambda = basis.lambda().mapv(f64::sqrt);
    let b = scaled_gram_system(basis, &sqrt_lambda, sigma);
    let factor = SpdFactor::new(&b)?;
    let phi_y = basis.phi().dot(y);
    let rhs = &phi_y * &sqrt_lambda;
    let z = factor.solve_vec(&rhs);
    let mu = &z * &sqrt_lambda;
    Ok(WeightPosterior {
        mu,
        sigma,
        jitter: factor.jitter,
        factor: PosteriorFactor::WeightSpace { factor, sqrt_lambda },
    })
}

/// Posterior over coefficients via the n × n data-space system.
pub fn fit_weights_data_space(
    basis: &ProjectedBasis,
    y: &Array1<f64>,
    sigma: f64,
) -> Result<WeightPosterior> {
    check_fit_inputs(basis, y, sigma)?;
    let factor = SpdFactor::new(&data_space_system(basis, sigma))?;
    let z = factor.solve_vec(y);
    let mu = basis.phi().dot(&z) * basis.lambda();
    Ok(WeightPosterior {
        mu,
        sigma,
        jitter: factor.jitter,
        factor: PosteriorFactor::DataSpace { factor },
    })
}

/// Posterior over coefficients, solved through whichever of the two
/// equivalent systems is cheaper for the problem shape.
pub fn fit_weights(basis: &ProjectedBasis, y: &Array1<f64>, sigma: f64) -> Result<WeightPosterior> {
    if prefer_weight_space(basis) {
        fit_weights_weight_space(basis, y, sigma)
    } else {
        fit_weights_data_space(basis, y, sigma)
    }
}

/// `σ² I + Λ^{1/2} Φ Φᵀ Λ^{1/2}` (m × m).
fn scaled_gram_system(basis: &ProjectedBasis, sqrt_lambda: &Array1<f64>, sigma: f64) -> Array2<f64> {
    let g = basis.gram();
    let m = basis.m();
    let mut b = Array2::zeros((m, m));
    for i in 0..m {
        let di = sqrt_lambda[i];
        for j in 0..m {
            b[[i, j]] = di * sqrt_lambda[j] * g[[i, j]];
        }
        b[[i, i]] += sigma * sigma;
    }
    b
}

/// `σ² I + Φᵀ Λ Φ` (n × n).
fn data_space_system(basis: &ProjectedBasis, sigma: f64) -> Array2<f64> {
    let sqrt_lambda = basis.lambda().mapv(f64::sqrt);
    let mut w = basis.phi().clone();
    for (mut row, &d) in w.axis_iter_mut(Axis(0)).zip(sqrt_lambda.iter()) {
        row *= d;
    }
    let mut b = linalg::at_b(&w, &w);
    for i in 0..basis.n() {
        b[[i, i]] += sigma * sigma;
    }
    b
}

/// Noise-free reprojection `Φᵀ μ` of the posterior mean.
pub fn predict_measurements(weights: &WeightPosterior, basis: &ProjectedBasis) -> Array1<f64> {
    basis.phi().t().dot(&weights.mu)
}

/// Posterior mean (and optionally variance) fields on a pixel grid.
#[derive(Debug, Clone)]
pub struct PosteriorField {
    pub mean: ImageGrid,
    pub variance: Option<ImageGrid>,
    /// Hyperparameters the field was computed at.
    pub params: HyperParams,
    /// Basis truncation.
    pub m: usize,
}

/// Pixels processed per block when evaluating fields, bounding transient
/// feature-matrix memory.
const PIXEL_BLOCK: usize = 4096;

/// Evaluate the posterior field on a grid. The grid must lie inside the
/// basis rectangle. Variance evaluation is optional because it dominates
/// the cost on large grids.
pub fn predict_field(
    weights: &WeightPosterior,
    basis: &ProjectedBasis,
    grid: &GridSpec,
    with_variance: bool,
    params: HyperParams,
) -> Result<PosteriorField> {
    let system = &basis.system;
    if grid.l1 > system.l1 || grid.l2 > system.l2 {
        return Err(Error::invalid(format!(
            "grid extent ({}, {}) exceeds the basis rectangle ({}, {})",
            grid.l1, grid.l2, system.l1, system.l2
        )));
    }
    let centers = grid.centers();
    let p = centers.len();
    let mut mean_flat = Array1::zeros(p);
    let mut var_flat = with_variance.then(|| Array1::zeros(p));

    let mut start = 0;
    while start < p {
        let end = (start + PIXEL_BLOCK).min(p);
        let feats = system.point_features(&centers[start..end]);
        let mean_block = feats.t().dot(&weights.mu);
        mean_flat.slice_mut(ndarray::s![start..end]).assign(&mean_block);
        if let Some(var) = var_flat.as_mut() {
            let v = weights.precision_inv_diag(basis, &feats);
            // Clamp the numerical floor: tiny negatives are roundoff.
            let v = v.mapv(|x| x.max(0.0));
            var.slice_mut(ndarray::s![start..end]).assign(&v);
        }
        start = end;
    }

    let to_grid = |flat: Array1<f64>| {
        ImageGrid::from_data(
            Array2::from_shape_vec((grid.n1, grid.n2), flat.to_vec()).expect("shape"),
            grid.l1,
            grid.l2,
        )
    };
    Ok(PosteriorField {
        mean: to_grid(mean_flat),
        variance: var_flat.map(to_grid),
        params,
        m: basis.m(),
    })
}

/// Prior variance `φ*ᵀ Λ φ*` at grid points (used by tests and diagnostics).
pub fn prior_variance(basis: &ProjectedBasis, points: &[[f64; 2]]) -> Array1<f64> {
    let feats = basis.system.point_features(points);
    let lambda = basis.lambda();
    let mut out = Array1::zeros(points.len());
    for j in 0..points.len() {
        let col = feats.column(j);
        out[j] = col
            .iter()
            .zip(lambda.iter())
            .map(|(&f, &l)| l * f * f)
            .sum();
    }
    out
}

/// Constant-free log marginal likelihood
/// `-½ log det(ΦᵀΛΦ + σ²I) - ½ yᵀ(ΦᵀΛΦ + σ²I)⁻¹ y`
/// via the m × m determinant-lemma route.
pub fn lml_weight_space(basis: &ProjectedBasis, y: &Array1<f64>, sigma: f64) -> Result<f64> {
    check_fit_inputs(basis, y, sigma)?;
    let (m, n) = (basis.m(), basis.n());
    let sqrt_lambda = basis.lambda().mapv(f64::sqrt);
    let factor = SpdFactor::new(&scaled_gram_system(basis, &sqrt_lambda, sigma))?;
    let log_det = 2.0 * (n as f64 - m as f64) * sigma.ln() + factor.log_det();
    let rhs = basis.phi().dot(y) * &sqrt_lambda;
    let quad = (y.dot(y) - factor.inv_quad_vec(&rhs)) / (sigma * sigma);
    Ok(-0.5 * log_det - 0.5 * quad)
}

/// Constant-free log marginal likelihood via the direct n × n evaluation.
pub fn lml_data_space(basis: &ProjectedBasis, y: &Array1<f64>, sigma: f64) -> Result<f64> {
    check_fit_inputs(basis, y, sigma)?;
    let factor = SpdFactor::new(&data_space_system(basis, sigma))?;
    Ok(-0.5 * factor.log_det() - 0.5 * factor.inv_quad_vec(y))
}

/// Constant-free log marginal likelihood through the cheaper route.
pub fn log_marginal_likelihood(basis: &ProjectedBasis, y: &Array1<f64>, sigma: f64) -> Result<f64> {
    if prefer_weight_space(basis) {
        lml_weight_space(basis, y, sigma)
    } else {
        lml_data_space(basis, y, sigma)
    }
}

/// A fixed tomography problem: geometry-dependent `Φ` assembled once, data
/// `y`, and a prior family whose magniture/length scale vary during
/// hyperparameter search.
pub struct InverseProblem {
    basis: ProjectedBasis,
    cov_template: CovarianceSpec,
    y: Array1<f64>,
    radius: f64,
}

impl InverseProblem {
    pub fn new(
        system: &BasisSystem,
        rays: &[Ray],
        radius: f64,
        cov_template: &CovarianceSpec,
        y: Array1<f64>,
    ) -> Result<Self> {
        if rays.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rays but {} measurements",
                rays.len(),
                y.len()
            )));
        }
        let basis = crate::basis::assemble_from_rays(system, rays, radius, cov_template)?;
        Ok(InverseProblem {
            basis,
            cov_template: *cov_template,
            y,
            radius,
        })
    }

    pub fn from_sinogram(
        system: &BasisSystem,
        cov_template: &CovarianceSpec,
        sinogram: &Sinogram,
    ) -> Result<Self> {
        Self::new(
            system,
            &sinogram.rays,
            sinogram.radius,
            cov_template,
            sinogram.values.clone(),
        )
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn m(&self) -> usize {
        self.basis.m()
    }

    pub fn system(&self) -> &BasisSystem {
        &self.basis.system
    }

    pub fn covariance_template(&self) -> &CovarianceSpec {
        &self.cov_template
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Whether the prior family carries a length scale (3-state chains) or
    /// not (2-state chains).
    pub fn has_length_scale(&self) -> bool {
        self.cov_template.family.has_length_scale()
    }

    fn spec_for(&self, params: &HyperParams) -> Result<CovarianceSpec> {
        params.validate()?;
        if self.has_length_scale() && params.length_scale.is_none() {
            return Err(Error::invalid(format!(
                "{} prior requires a length scale",
                self.cov_template.family.name()
            )));
        }
        self.cov_template
            .with_params(params.sigma_f, params.length_scale.unwrap_or(1.0))
    }

    /// `Φ` with the spectral weights for the given hyperparameters; shares
    /// the assembled `Φ` and its Gram cache.
    pub fn basis_for(&self, params: &HyperParams) -> Result<ProjectedBasis> {
        self.basis.with_covariance(&self.spec_for(params)?)
    }

    /// Precompute `Φ Φᵀ` when repeated evaluations would settle on the
    /// weight-space route, so its one-off cost is paid before the loop.
    pub fn warm_gram_for_iteration(&self) {
        let (m, n) = (self.basis.m(), self.basis.n());
        if weight_space_cost(m, n, true) <= data_space_cost(m, n) {
            let _ = self.basis.gram();
        }
    }

    /// Constant-free log marginal likelihood at the given hyperparameters.
    pub fn log_marginal_likelihood(&self, params: &HyperParams) -> Result<f64> {
        let basis = self.basis_for(params)?;
        log_marginal_likelihood(&basis, &self.y, params.sigma)
    }

    /// Constant-free log posterior of the hyperparameters: the marginal
    /// likelihood plus `log σ_f + log ℓ + log σ` (the `log ℓ` term only for
    /// families with a length scale).
    pub fn log_marginal_posterior(&self, params: &HyperParams) -> Result<f64> {
        let mut v = self.log_marginal_likelihood(params)? + params.sigma_f.ln() + params.sigma.ln();
        if self.has_length_scale() {
            v += params.length_scale.unwrap().ln();
        }
        Ok(v)
    }

    /// Fit the coefficient posterior at the given hyperparameters.
    pub fn fit(&self, params: &HyperParams) -> Result<WeightPosterior> {
        let basis = self.basis_for(params)?;
        fit_weights(&basis, &self.y, params.sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{assemble_from_rays, BasisSystem, ProjectedBasis};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Hand-built basis with explicit Φ and Λ, bypassing geometry.
    fn synthetic_basis(phi: Array2<f64>, lambda: Array1<f64>) -> ProjectedBasis {
        let m = phi.nrows();
        let system = BasisSystem::new(1.0, 1.0, m, 1).unwrap();
        ProjectedBasis::from_parts(system, phi, lambda).unwrap()
    }

    fn random_basis(m: usize, n: usize, seed: u64) -> (ProjectedBasis, Array1<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let phi = Array2::from_shape_fn((m, n), |_| rng.gen_range(-1.0..1.0));
        let lambda = Array1::from_shape_fn(m, |_| rng.gen_range(0.2..2.0));
        let y = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        (synthetic_basis(phi, lambda), y)
    }

    #[test]
    fn scalar_case_mean_variance_and_reprojection() {
        // m = n = 1: Λ = 1, Φ = 2, σ² = 1, y = 5.
        let basis = synthetic_basis(array![[2.0]], array![1.0]);
        let y = array![5.0];
        for fit in [fit_weights_weight_space, fit_weights_data_space] {
            let w = fit(&basis, &y, 1.0).unwrap();
            assert_relative_eq!(w.mu[0], 2.0, max_relative = 1e-9);
            // At φ* = 0.5: mean 1.0, variance 0.25 - 0.2 = 0.05.
            let u = array![[0.5]];
            let mean = u.t().dot(&w.mu);
            assert_relative_eq!(mean[0], 1.0, max_relative = 1e-9);
            let var = w.precision_inv_quad(&basis, &u);
            assert_relative_eq!(var[[0, 0]], 0.05, max_relative = 1e-8);
            let reproj = predict_measurements(&w, &basis);
            assert_relative_eq!(reproj[0], 4.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_data_gives_zero_posterior_mean() {
        let (basis, _) = random_basis(12, 9, 5);
        let y = Array1::zeros(9);
        let w = fit_weights(&basis, &y, 0.7).unwrap();
        assert!(w.mu.iter().all(|&v| v.abs() < 1e-14));
        assert!(predict_measurements(&w, &basis).iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn weight_and_data_space_agree() {
        for &(m, n, seed) in &[(20usize, 15usize, 1u64), (15, 20, 2), (8, 8, 3)] {
            let (basis, y) = random_basis(m, n, seed);
            let ww = fit_weights_weight_space(&basis, &y, 0.5).unwrap();
            let wd = fit_weights_data_space(&basis, &y, 0.5).unwrap();
            let scale = ww.mu.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..m {
                assert_abs_diff_eq!(ww.mu[i], wd.mu[i], epsilon = 1e-10 * scale.max(1.0));
            }
            // Posterior covariance quadratic forms agree too.
            let mut rng = ChaCha20Rng::seed_from_u64(seed + 100);
            let u = Array2::from_shape_fn((m, 3), |_| rng.gen_range(-1.0..1.0));
            let qw = ww.precision_inv_quad(&basis, &u);
            let qd = wd.precision_inv_quad(&basis, &u);
            for i in 0..3 {
                for j in 0..3 {
                    assert_relative_eq!(qw[[i, j]], qd[[i, j]], max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn posterior_variance_below_prior_variance() {
        let (basis, y) = random_basis(10, 14, 9);
        let w = fit_weights(&basis, &y, 0.3).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let u = Array2::from_shape_fn((10, 6), |_| rng.gen_range(-1.0..1.0));
        let post = w.precision_inv_quad(&basis, &u);
        for j in 0..6 {
            let prior: f64 = u
                .column(j)
                .iter()
                .zip(basis.lambda().iter())
                .map(|(&f, &l)| l * f * f)
                .sum();
            assert!(post[[j, j]] <= prior * (1.0 + 1e-10));
            assert!(post[[j, j]] >= 0.0);
        }
    }

    #[test]
    fn mean_is_linear_in_data_and_variance_ignores_it() {
        let (basis, y1) = random_basis(12, 10, 21);
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let y2 = Array1::from_shape_fn(10, |_| rng.gen_range(-1.0..1.0));
        let (a, b) = (0.7, -1.3);
        let combo = &y1 * a + &y2 * b;
        let wa = fit_weights(&basis, &y1, 0.4).unwrap();
        let wb = fit_weights(&basis, &y2, 0.4).unwrap();
        let wc = fit_weights(&basis, &combo, 0.4).unwrap();
        for i in 0..12 {
            assert_abs_diff_eq!(wc.mu[i], a * wa.mu[i] + b * wb.mu[i], epsilon = 1e-10);
        }
        // Variance fields identical regardless of y.
        let u = Array2::from_shape_fn((12, 4), |_| rng.gen_range(-1.0..1.0));
        let va = wa.precision_inv_quad(&basis, &u);
        let vb = wb.precision_inv_quad(&basis, &u);
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(va[[i, j]], vb[[i, j]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tikhonov_weights_satisfy_classical_stationarity() {
        // With Λ = σ_f² I the posterior mean minimizes
        // ‖y - Φᵀw‖²/(2σ²) + ‖w‖²/(2σ_f²); its gradient at μ must vanish.
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let (m, n) = (18, 25);
        let phi = Array2::from_shape_fn((m, n), |_| rng.gen_range(-1.0..1.0));
        let sigma_f = 0.8;
        let lambda = Array1::from_elem(m, sigma_f * sigma_f);
        let basis = synthetic_basis(phi.clone(), lambda);
        let y = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        let sigma = 0.45;
        let w = fit_weights(&basis, &y, sigma).unwrap();
        let resid = phi.t().dot(&w.mu) - &y;
        let grad = phi.dot(&resid) / (sigma * sigma) + &w.mu / (sigma_f * sigma_f);
        let rhs_scale = (phi.dot(&y) / (sigma * sigma)).dot(&(phi.dot(&y) / (sigma * sigma))).sqrt();
        let grad_norm = grad.dot(&grad).sqrt();
        assert!(
            grad_norm <= 1e-8 * rhs_scale,
            "stationarity violated: {grad_norm:.3e} vs scale {rhs_scale:.3e}"
        );
    }

    #[test]
    fn residual_norm_nonincreasing_as_sigma_decreases() {
        let (basis, y) = random_basis(16, 12, 41);
        let mut last = f64::INFINITY;
        for k in 0..8 {
            let sigma = 10.0_f64.powf(1.0 - 0.4 * k as f64);
            let w = fit_weights(&basis, &y, sigma).unwrap();
            let r = predict_measurements(&w, &basis) - &y;
            let norm = r.dot(&r).sqrt();
            assert!(norm <= last * (1.0 + 1e-12), "residual grew: {norm} > {last}");
            last = norm;
        }
    }

    #[test]
    fn extra_measurement_never_increases_variance() {
        let mut rng = ChaCha20Rng::seed_from_u64(51);
        let m = 10;
        let phi_full = Array2::from_shape_fn((m, 8), |_| rng.gen_range(-1.0..1.0));
        let lambda = Array1::from_shape_fn(m, |_| rng.gen_range(0.3..1.5));
        let y_full = Array1::from_shape_fn(8, |_| rng.gen_range(-1.0..1.0));
        let u = Array2::from_shape_fn((m, 5), |_| rng.gen_range(-1.0..1.0));

        let basis_small = synthetic_basis(
            phi_full.slice(ndarray::s![.., ..7]).to_owned(),
            lambda.clone(),
        );
        let basis_large = synthetic_basis(phi_full.clone(), lambda.clone());
        let w_small = fit_weights(&basis_small, &y_full.slice(ndarray::s![..7]).to_owned(), 0.5).unwrap();
        let w_large = fit_weights(&basis_large, &y_full, 0.5).unwrap();
        let v_small = w_small.precision_inv_quad(&basis_small, &u);
        let v_large = w_large.precision_inv_quad(&basis_large, &u);
        for j in 0..5 {
            assert!(v_large[[j, j]] <= v_small[[j, j]] * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn lml_scalar_case() {
        // n = 1, Q + σ² = 5, y = 5, prior terms dropped: -½ ln 5 - 2.5.
        let basis = synthetic_basis(array![[2.0]], array![1.0]);
        let y = array![5.0];
        let expected = -0.5 * 5.0f64.ln() - 2.5;
        for lml in [lml_weight_space, lml_data_space] {
            assert_relative_eq!(lml(&basis, &y, 1.0).unwrap(), expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn lml_routes_agree_on_random_instances() {
        for seed in 0..20u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let m = rng.gen_range(1..=30);
            let n = rng.gen_range(1..=20);
            let (basis, y) = random_basis(m, n, seed + 1000);
            let sigma = rng.gen_range(0.5..2.0);
            let a = lml_weight_space(&basis, &y, sigma).unwrap();
            let b = lml_data_space(&basis, &y, sigma).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn lml_invariant_to_measurement_permutation() {
        let (basis, y) = random_basis(14, 11, 77);
        let base = log_marginal_likelihood(&basis, &y, 0.6).unwrap();
        // Reverse-order permutation of rays and data together.
        let idx: Vec<usize> = (0..11).rev().collect();
        let permuted_basis = basis.select_rays(&idx);
        let y_perm = Array1::from_shape_fn(11, |i| y[idx[i]]);
        let permuted = log_marginal_likelihood(&permuted_basis, &y_perm, 0.6).unwrap();
        assert_relative_eq!(base, permuted, max_relative = 1e-10);
    }

    #[test]
    fn log_marginal_posterior_adds_prior_terms() {
        let sys = BasisSystem::new(1.25, 1.25, 4, 4).unwrap();
        let geometry = crate::geometry::ScanGeometry::half_circle(1.0, 3, 7).unwrap();
        let cov = CovarianceSpec::matern(1.0, 0.5, 1.0).unwrap();
        let rays = geometry.rays();
        let basis = assemble_from_rays(&sys, &rays, 1.0, &cov).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let y = Array1::from_shape_fn(21, |_| rng.gen_range(-1.0..1.0));
        let problem = InverseProblem::new(&sys, &rays, 1.0, &cov, y.clone()).unwrap();
        let p = HyperParams::new(0.9, Some(0.4), 0.3);
        let lml = problem.log_marginal_likelihood(&p).unwrap();
        let lmp = problem.log_marginal_posterior(&p).unwrap();
        assert_relative_eq!(
            lmp,
            lml + 0.9f64.ln() + 0.4f64.ln() + 0.3f64.ln(),
            max_relative = 1e-12
        );
        let _ = basis;
    }

    #[test]
    fn invalid_inputs_rejected() {
        let (basis, y) = random_basis(5, 4, 9);
        assert!(fit_weights(&basis, &y, 0.0).is_err());
        assert!(fit_weights(&basis, &Array1::zeros(3), 1.0).is_err());
        assert!(lml_weight_space(&basis, &y, -1.0).is_err());
    }

    #[test]
    fn predict_field_shapes_and_variance_flag() {
        let sys = BasisSystem::new(1.25, 1.25, 6, 6).unwrap();
        let geometry = crate::geometry::ScanGeometry::half_circle(1.0, 5, 9).unwrap();
        let cov = CovarianceSpec::squared_exponential(1.0, 0.4).unwrap();
        let basis = crate::basis::assemble(&sys, &geometry, &cov).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let y = Array1::from_shape_fn(45, |_| rng.gen_range(-0.5..0.5));
        let w = fit_weights(&basis, &y, 0.3).unwrap();
        let grid = GridSpec::square(12, 1.0);
        let p = HyperParams::new(1.0, Some(0.4), 0.3);
        let field = predict_field(&w, &basis, &grid, true, p).unwrap();
        assert_eq!(field.mean.data.dim(), (12, 12));
        let var = field.variance.as_ref().unwrap();
        assert!(var.data.iter().all(|&v| v >= 0.0));
        // Posterior variance is bounded by the prior variance pointwise.
        let centers = grid.centers();
        let prior = prior_variance(&basis, &centers);
        for (k, &v) in var.data.iter().enumerate() {
            assert!(v <= prior[k] * (1.0 + 1e-10) + 1e-12);
        }
        let field = predict_field(&w, &basis, &grid, false, p).unwrap();
        assert!(field.variance.is_none());
        // Grid larger than the rectangle is rejected.
        let big = GridSpec::square(4, 2.0);
        assert!(predict_field(&w, &basis, &big, false, p).is_err());
    }
}
