//! Laplace eigenbasis on a rectangle and its integrals along rays.
//!
//! The field is expanded in the Dirichlet eigenfunctions of the negative
//! Laplacian on `[-L1, L1] × [-L2, L2]`. Each basis function integrates in
//! closed form along a straight ray, which detaches the geometry (the `Φ`
//! matrix) from the prior hyperparameters (the diagonal `Λ` of spectral
//! densities at the eigenvalue frequencies).

use std::sync::{Arc, OnceLock};

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::geometry::{Ray, ScanGeometry};
use crate::linalg;

/// Threshold on `|α ∓ γ|·R` below which the antiderivative term is replaced
/// by its constant-integrand limit; the Taylor error is then below 1e-20
/// relative.
const DEGENERATE_EPS: f64 = 1e-10;

/// Separable sine eigenbasis on `[-l1, l1] × [-l2, l2]` with `m1 × m2`
/// functions. Flat indices are zero-based and column-of-`i1`-major:
/// `i = (i1 - 1) + m1 (i2 - 1)` for one-based per-axis indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSystem {
    pub l1: f64,
    pub l2: f64,
    pub m1: usize,
    pub m2: usize,
}

impl BasisSystem {
    pub fn new(l1: f64, l2: f64, m1: usize, m2: usize) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0) {
            return Err(Error::invalid(format!("rectangle half-widths must be positive, got ({l1}, {l2})")));
        }
        if m1 == 0 || m2 == 0 {
            return Err(Error::invalid("basis counts m1, m2 must be positive"));
        }
        Ok(BasisSystem { l1, l2, m1, m2 })
    }

    /// Total number of basis functions.
    pub fn len(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One-based per-axis indices of flat index `i`.
    pub fn index_pair(&self, i: usize) -> (usize, usize) {
        assert!(i < self.len(), "basis index {i} out of range (m = {})", self.len());
        (i % self.m1 + 1, i / self.m1 + 1)
    }

    /// Per-axis wavenumbers `φ_{i1} = π i1 / (2 L1)`, `φ_{i2} = π i2 / (2 L2)`.
    pub fn wavenumbers(&self, i: usize) -> (f64, f64) {
        let (i1, i2) = self.index_pair(i);
        (
            std::f64::consts::PI * i1 as f64 / (2.0 * self.l1),
            std::f64::consts::PI * i2 as f64 / (2.0 * self.l2),
        )
    }

    /// Laplace eigenvalue `λ_i = φ_{i1}² + φ_{i2}²`.
    pub fn eigenvalue(&self, i: usize) -> f64 {
        let (p1, p2) = self.wavenumbers(i);
        p1 * p1 + p2 * p2
    }

    /// Basis function value at a point inside the rectangle.
    pub fn eval(&self, i: usize, x: [f64; 2]) -> f64 {
        let (p1, p2) = self.wavenumbers(i);
        (p1 * (x[0] + self.l1)).sin() * (p2 * (x[1] + self.l2)).sin()
            / (self.l1 * self.l2).sqrt()
    }

    /// Exact line integral of basis function `i` along `ray` over the arc
    /// `s ∈ [-radius, radius]`.
    ///
    /// With `a = -φ_{i1} sin θ`, `b = φ_{i1}(r cos θ + L1)`, `g = φ_{i2} cos θ`,
    /// `d = φ_{i2}(r sin θ + L2)` the integrand is `sin(b + a s) sin(d + g s)`,
    /// whose product-to-sum antiderivative evaluates over the symmetric range
    /// to `f(a-g) cos(b-d) - f(a+g) cos(b+d)` with `f(c) = sin(cR)/c`.
    pub fn phi_entry(&self, i: usize, ray: &Ray, radius: f64) -> f64 {
        assert!(
            radius <= self.l1.min(self.l2) * (1.0 + 1e-12),
            "scan radius {radius} exceeds the basis rectangle ({}, {})",
            self.l1,
            self.l2
        );
        let (p1, p2) = self.wavenumbers(i);
        let (sin_t, cos_t) = ray.theta.sin_cos();
        let a = -p1 * sin_t;
        let b = p1 * (ray.r * cos_t + self.l1);
        let g = p2 * cos_t;
        let d = p2 * (ray.r * sin_t + self.l2);
        let f = |c: f64| {
            if (c * radius).abs() < DEGENERATE_EPS {
                radius
            } else {
                (c * radius).sin() / c
            }
        };
        (f(a - g) * (b - d).cos() - f(a + g) * (b + d).cos()) / (self.l1 * self.l2).sqrt()
    }

    /// Feature matrix `Ψ` (m × P): basis functions evaluated at `points`.
    pub fn point_features(&self, points: &[[f64; 2]]) -> Array2<f64> {
        let m = self.len();
        let mut out = Array2::zeros((m, points.len()));
        // Separable evaluation: sin factors per axis, then outer product.
        let s1: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                (1..=self.m1)
                    .map(|i1| (std::f64::consts::PI * i1 as f64 / (2.0 * self.l1) * (p[0] + self.l1)).sin())
                    .collect()
            })
            .collect();
        let s2: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                (1..=self.m2)
                    .map(|i2| (std::f64::consts::PI * i2 as f64 / (2.0 * self.l2) * (p[1] + self.l2)).sin())
                    .collect()
            })
            .collect();
        let norm = 1.0 / (self.l1 * self.l2).sqrt();
        for (j, _) in points.iter().enumerate() {
            for i2 in 0..self.m2 {
                let f2 = s2[j][i2] * norm;
                for i1 in 0..self.m1 {
                    out[[i1 + self.m1 * i2, j]] = s1[j][i1] * f2;
                }
            }
        }
        out
    }
}

/// `Φ` (m × n) and `Λ` (length m) assembled for a ray set and a prior.
#[derive(Debug, Clone)]
pub struct ProjectedBasis {
    pub system: BasisSystem,
    phi: Arc<Array2<f64>>,
    lambda: Array1<f64>,
    gram: Arc<OnceLock<Array2<f64>>>,
}

impl ProjectedBasis {
    /// Number of basis functions.
    pub fn m(&self) -> usize {
        self.phi.nrows()
    }

    /// Number of rays.
    pub fn n(&self) -> usize {
        self.phi.ncols()
    }

    pub fn phi(&self) -> &Array2<f64> {
        &self.phi
    }

    pub fn lambda(&self) -> &Array1<f64> {
        &self.lambda
    }

    /// `Φ Φᵀ` (m × m), computed once and shared across clones.
    pub fn gram(&self) -> &Array2<f64> {
        self.gram.get_or_init(|| linalg::a_at(&self.phi))
    }

    /// Whether the Gram matrix is already cached.
    pub fn gram_cached(&self) -> bool {
        self.gram.get().is_some()
    }

    /// Same geometry, new prior: recomputes `Λ`, shares `Φ` and its Gram.
    pub fn with_covariance(&self, spec: &CovarianceSpec) -> Result<ProjectedBasis> {
        Ok(ProjectedBasis {
            system: self.system,
            phi: Arc::clone(&self.phi),
            lambda: lambda_vector(&self.system, spec)?,
            gram: Arc::clone(&self.gram),
        })
    }

    /// Restrict to a subset of rays (columns). The Gram cache is not carried
    /// over.
    pub fn select_rays(&self, indices: &[usize]) -> ProjectedBasis {
        let phi = self
            .phi
            .select(ndarray::Axis(1), indices)
            .as_standard_layout()
            .to_owned();
        ProjectedBasis {
            system: self.system,
            phi: Arc::new(phi),
            lambda: self.lambda.clone(),
            gram: Arc::new(OnceLock::new()),
        }
    }

    pub fn from_parts(system: BasisSystem, phi: Array2<f64>, lambda: Array1<f64>) -> Result<Self> {
        if phi.nrows() != system.len() || lambda.len() != system.len() {
            return Err(Error::DimensionMismatch(format!(
                "phi has {} rows, lambda {} entries, system expects {}",
                phi.nrows(),
                lambda.len(),
                system.len()
            )));
        }
        Ok(ProjectedBasis {
            system,
            phi: Arc::new(phi),
            lambda,
            gram: Arc::new(OnceLock::new()),
        })
    }
}

/// Spectral-density weights `Λ_ii = S(√λ_i)` for every basis index.
pub fn lambda_vector(system: &BasisSystem, spec: &CovarianceSpec) -> Result<Array1<f64>> {
    let mut lambda = Array1::zeros(system.len());
    for i in 0..system.len() {
        lambda[i] = spec.spectral_density_iso(system.eigenvalue(i).sqrt())?;
    }
    Ok(lambda)
}

/// `Φ` alone for an arbitrary ray set, columns parallelized per ray.
pub fn assemble_phi(system: &BasisSystem, rays: &[Ray], radius: f64) -> Result<Array2<f64>> {
    if radius > system.l1.min(system.l2) * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "scan radius {radius} exceeds the basis rectangle ({}, {})",
            system.l1, system.l2
        )));
    }
    let m = system.len();
    let cols: Vec<Vec<f64>> = rays
        .par_iter()
        .map(|ray| (0..m).map(|i| system.phi_entry(i, ray, radius)).collect())
        .collect();
    let mut phi = Array2::zeros((m, rays.len()));
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            phi[[i, j]] = v;
        }
    }
    Ok(phi)
}

/// Assemble `Φ` and `Λ` for a regular scan.
pub fn assemble(
    system: &BasisSystem,
    geometry: &ScanGeometry,
    spec: &CovarianceSpec,
) -> Result<ProjectedBasis> {
    assemble_from_rays(system, &geometry.rays(), geometry.radius, spec)
}

/// Assemble `Φ` and `Λ` for an arbitrary ray set.
pub fn assemble_from_rays(
    system: &BasisSystem,
    rays: &[Ray],
    radius: f64,
    spec: &CovarianceSpec,
) -> Result<ProjectedBasis> {
    let phi = assemble_phi(system, rays, radius)?;
    ProjectedBasis::from_parts(*system, phi, lambda_vector(system, spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Composite Simpson quadrature of a basis function along a ray.
    fn quadrature_entry(system: &BasisSystem, i: usize, ray: &Ray, radius: f64, n: usize) -> f64 {
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = 2.0 * radius / n as f64;
        let f = |s: f64| system.eval(i, ray.point(s));
        let mut acc = f(-radius) + f(radius);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(-radius + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn eval_center_and_boundary() {
        let sys = BasisSystem::new(1.0, 1.0, 3, 3).unwrap();
        // i1 = i2 = 1 at the origin: sin(π/2)² / 1 = 1.
        assert_abs_diff_eq!(sys.eval(0, [0.0, 0.0]), 1.0, epsilon = 1e-15);
        // Dirichlet boundary.
        for i in 0..sys.len() {
            assert_abs_diff_eq!(sys.eval(i, [-1.0, 0.3]), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sys.eval(i, [0.4, 1.0]), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn first_eigenvalue() {
        let sys = BasisSystem::new(1.0, 1.0, 2, 2).unwrap();
        assert_relative_eq!(
            sys.eigenvalue(0),
            std::f64::consts::PI * std::f64::consts::PI / 2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn out_of_range_index_rejected() {
        let sys = BasisSystem::new(1.0, 1.0, 2, 2).unwrap();
        sys.eval(4, [0.0, 0.0]);
    }

    #[test]
    fn index_map_is_a_bijection() {
        let sys = BasisSystem::new(1.0, 2.0, 5, 7).unwrap();
        let mut seen = vec![false; sys.len()];
        for i in 0..sys.len() {
            let (i1, i2) = sys.index_pair(i);
            assert!((1..=5).contains(&i1) && (1..=7).contains(&i2));
            let flat = (i1 - 1) + 5 * (i2 - 1);
            assert_eq!(flat, i);
            assert!(!seen[flat]);
            seen[flat] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn eigenvalues_nondecreasing_along_each_axis() {
        let sys = BasisSystem::new(1.3, 0.9, 6, 6).unwrap();
        for i2 in 1..=6usize {
            for i1 in 1..6usize {
                let a = sys.eigenvalue((i1 - 1) + 6 * (i2 - 1));
                let b = sys.eigenvalue(i1 + 6 * (i2 - 1));
                assert!(b > a);
            }
        }
    }

    #[test]
    fn phi_entry_axis_aligned_ray() {
        // L1 = L2 = R = 1, i1 = i2 = 1, θ = 0, r = 0:
        // ∫_{-1}^{1} sin(π(s+1)/2) ds = 4/π.
        let sys = BasisSystem::new(1.0, 1.0, 1, 1).unwrap();
        let got = sys.phi_entry(0, &Ray::new(0.0, 0.0), 1.0);
        assert_relative_eq!(got, 4.0 / std::f64::consts::PI, max_relative = 1e-14);
        let quad = quadrature_entry(&sys, 0, &Ray::new(0.0, 0.0), 1.0, 20_000);
        assert_relative_eq!(got, quad, max_relative = 1e-10);
    }

    #[test]
    fn phi_entry_matches_quadrature_on_random_rays() {
        let sys = BasisSystem::new(1.25, 1.25, 8, 8).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..200 {
            let i = rng.gen_range(0..sys.len());
            let ray = Ray::new(
                rng.gen_range(0.0..std::f64::consts::PI),
                rng.gen_range(-1.0..1.0),
            );
            let exact = sys.phi_entry(i, &ray, 1.0);
            let quad = quadrature_entry(&sys, i, &ray, 1.0, 40_000);
            assert_abs_diff_eq!(exact, quad, epsilon = 1e-10);
        }
    }

    #[test]
    fn phi_entry_degenerate_branches() {
        // i1 = i2 with L1 = L2 forces |α| = |γ|: θ = π/4 hits α + γ = 0 and
        // θ = 3π/4 hits α - γ = 0 exactly.
        let sys = BasisSystem::new(1.0, 1.0, 4, 4).unwrap();
        for &theta in &[std::f64::consts::FRAC_PI_4, 3.0 * std::f64::consts::FRAC_PI_4] {
            for i1 in 1..=4usize {
                let i = (i1 - 1) + 4 * (i1 - 1);
                for &r in &[0.0, 0.2, -0.63] {
                    let ray = Ray::new(theta, r);
                    let exact = sys.phi_entry(i, &ray, 1.0);
                    assert!(exact.is_finite());
                    let quad = quadrature_entry(&sys, i, &ray, 1.0, 40_000);
                    assert_abs_diff_eq!(exact, quad, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn phi_entry_corner_tangent_ray_is_finite() {
        let sys = BasisSystem::new(1.0, 1.0, 5, 5).unwrap();
        // Ray through the rectangle corner (1, 1): θ = 3π/4, r = √2 clipped
        // to the scan radius 1.
        let ray = Ray::new(3.0 * std::f64::consts::FRAC_PI_4, 1.0);
        for i in 0..sys.len() {
            assert!(sys.phi_entry(i, &ray, 1.0).is_finite());
        }
    }

    #[test]
    fn basis_is_orthonormal_under_quadrature() {
        // ∬ φ_i φ_j over the rectangle separates into two 1-D sine integrals.
        let sys = BasisSystem::new(1.1, 0.8, 5, 5).unwrap();
        let simpson_1d = |k: usize, l: usize, half: f64| -> f64 {
            let n = 4096;
            let h = 2.0 * half / n as f64;
            let f = |x: f64| {
                (std::f64::consts::PI * k as f64 / (2.0 * half) * (x + half)).sin()
                    * (std::f64::consts::PI * l as f64 / (2.0 * half) * (x + half)).sin()
            };
            let mut acc = f(-half) + f(half);
            for t in 1..n {
                acc += if t % 2 == 1 { 4.0 } else { 2.0 } * f(-half + t as f64 * h);
            }
            acc * h / 3.0
        };
        for i in 0..sys.len() {
            let (i1, i2) = sys.index_pair(i);
            for j in i..sys.len() {
                let (j1, j2) = sys.index_pair(j);
                let integral = simpson_1d(i1, j1, sys.l1) * simpson_1d(i2, j2, sys.l2)
                    / (sys.l1 * sys.l2);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(integral, expected, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn assemble_shapes_and_degenerate_lambdas() {
        let sys = BasisSystem::new(1.25, 1.25, 10, 10).unwrap();
        let geometry = ScanGeometry::half_circle(1.0, 9, 19).unwrap();

        let tik = CovarianceSpec::tikhonov(0.7).unwrap();
        let basis = assemble(&sys, &geometry, &tik).unwrap();
        assert_eq!(basis.phi().dim(), (100, 171));
        assert!(basis.lambda().iter().all(|&v| (v - 0.49).abs() < 1e-15));

        let lap = CovarianceSpec::laplacian(1.3).unwrap();
        let basis = assemble(&sys, &geometry, &lap).unwrap();
        for i in 0..sys.len() {
            let li = sys.eigenvalue(i);
            assert_relative_eq!(basis.lambda()[i], 1.3 * 1.3 / (li * li), max_relative = 1e-12);
        }
    }

    #[test]
    fn truncated_kernel_error_never_grows_with_m() {
        // Max |k̃_m - k_SE| over random point pairs in the scan disk is
        // nonincreasing when m1, m2 double.
        let spec = CovarianceSpec::squared_exponential(1.0, 0.5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let pairs: Vec<([f64; 2], [f64; 2])> = (0..40)
            .map(|_| {
                let mut draw = || loop {
                    let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    if p[0] * p[0] + p[1] * p[1] <= 1.0 {
                        return p;
                    }
                };
                (draw(), draw())
            })
            .collect();
        let max_err = |m: usize| -> f64 {
            let sys = BasisSystem::new(1.25, 1.25, m, m).unwrap();
            let lambda = lambda_vector(&sys, &spec).unwrap();
            pairs
                .iter()
                .map(|(x, y)| {
                    let mut k = 0.0;
                    for i in 0..sys.len() {
                        k += lambda[i] * sys.eval(i, *x) * sys.eval(i, *y);
                    }
                    (k - spec.covariance([x[0] - y[0], x[1] - y[1]]).unwrap()).abs()
                })
                .fold(0.0, f64::max)
        };
        let e8 = max_err(8);
        let e16 = max_err(16);
        let e32 = max_err(32);
        assert!(e16 <= e8 * (1.0 + 1e-12), "e8={e8:.3e} e16={e16:.3e}");
        assert!(e32 <= e16 * (1.0 + 1e-12), "e16={e16:.3e} e32={e32:.3e}");
    }

    #[test]
    fn point_features_match_eval() {
        let sys = BasisSystem::new(1.2, 0.9, 4, 6).unwrap();
        let points = [[0.1, -0.3], [0.8, 0.5], [-1.0, 0.2]];
        let feats = sys.point_features(&points);
        for (j, p) in points.iter().enumerate() {
            for i in 0..sys.len() {
                assert_abs_diff_eq!(feats[[i, j]], sys.eval(i, *p), epsilon = 1e-14);
            }
        }
    }
}
