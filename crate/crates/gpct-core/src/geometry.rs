//! Scan geometry, analytic phantoms, forward projectors and noise injection.
//!
//! A parallel-beam ray is indexed by its angle `theta` and signed offset `r`
//! from the origin; the scanned object lives inside a disk of radius `R`.
//! Line integrals over that disk are the measurements. Two projectors are
//! provided: an exact one for ellipse phantoms (closed-form chord lengths)
//! and a sampling one for arbitrary raster images. Data generation and
//! inference deliberately use different discretizations.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// One projection line: angle `theta` in radians, signed offset `r` from the
/// origin in the same length unit as the scan radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub theta: f64,
    pub r: f64,
}

impl Ray {
    pub fn new(theta: f64, r: f64) -> Self {
        Ray { theta, r }
    }

    /// Point on the line at arc length `s`:
    /// `(r cos θ − s sin θ, r sin θ + s cos θ)`.
    pub fn point(&self, s: f64) -> [f64; 2] {
        let (sin_t, cos_t) = self.theta.sin_cos();
        [
            self.r * cos_t - s * sin_t,
            self.r * sin_t + s * cos_t,
        ]
    }
}

/// Parallel-beam acquisition layout: `n_angles` view angles uniformly spaced
/// over `angle_span` (endpoint excluded), each with `n_rays` offsets uniformly
/// spaced over `[-radius, radius]` (endpoints included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGeometry {
    pub radius: f64,
    pub n_angles: usize,
    pub angle_span: f64,
    pub n_rays: usize,
}

impl ScanGeometry {
    pub fn new(radius: f64, n_angles: usize, angle_span: f64, n_rays: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid(format!("scan radius must be positive, got {radius}")));
        }
        if n_angles == 0 || n_rays == 0 {
            return Err(Error::invalid("n_angles and n_rays must be positive"));
        }
        if !(angle_span > 0.0 && angle_span.is_finite()) {
            return Err(Error::invalid(format!("angle span must be positive, got {angle_span}")));
        }
        Ok(ScanGeometry {
            radius,
            n_angles,
            angle_span,
            n_rays,
        })
    }

    /// Half-circle scan (`angle_span = π`), the usual parallel-beam setup.
    pub fn half_circle(radius: f64, n_angles: usize, n_rays: usize) -> Result<Self> {
        Self::new(radius, n_angles, std::f64::consts::PI, n_rays)
    }

    /// Total number of measurements `n_angles · n_rays`.
    pub fn len(&self) -> usize {
        self.n_angles * self.n_rays
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn angle(&self, a: usize) -> f64 {
        a as f64 * self.angle_span / self.n_angles as f64
    }

    pub fn offset(&self, j: usize) -> f64 {
        if self.n_rays == 1 {
            0.0
        } else {
            -self.radius + j as f64 * self.ray_spacing()
        }
    }

    /// Detector sampling step along the offset axis.
    pub fn ray_spacing(&self) -> f64 {
        if self.n_rays == 1 {
            2.0 * self.radius
        } else {
            2.0 * self.radius / (self.n_rays - 1) as f64
        }
    }

    /// All rays in angle-major order (all offsets of the first angle, then
    /// the second, ...).
    pub fn rays(&self) -> Vec<Ray> {
        let mut out = Vec::with_capacity(self.len());
        for a in 0..self.n_angles {
            let theta = self.angle(a);
            for j in 0..self.n_rays {
                out.push(Ray::new(theta, self.offset(j)));
            }
        }
        out
    }
}

/// One ellipse of an additive phantom: center, semi-axes, rotation angle of
/// the major axis, and the attenuation value added inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    pub rotation: f64,
    pub value: f64,
}

impl Ellipse {
    pub fn new(center: [f64; 2], semi_axes: [f64; 2], rotation: f64, value: f64) -> Result<Self> {
        if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
            return Err(Error::invalid(format!(
                "ellipse semi-axes must be positive, got ({}, {})",
                semi_axes[0], semi_axes[1]
            )));
        }
        Ok(Ellipse {
            center,
            semi_axes,
            rotation,
            value,
        })
    }

    /// Map a point into the frame where the ellipse is the unit circle.
    fn to_unit_frame(&self, p: [f64; 2]) -> [f64; 2] {
        let (sin_p, cos_p) = self.rotation.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        [
            (cos_p * dx + sin_p * dy) / self.semi_axes[0],
            (-sin_p * dx + cos_p * dy) / self.semi_axes[1],
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let v = self.to_unit_frame(p);
        v[0] * v[0] + v[1] * v[1] <= 1.0
    }

    /// Length of the intersection of `ray` with the ellipse interior.
    ///
    /// The ray is mapped into the unit-circle frame; the quadratic
    /// `|q + s d|² = 1` in the arc length s then gives the chord directly
    /// because the map is affine in s.
    pub fn chord(&self, ray: &Ray) -> f64 {
        let (sin_t, cos_t) = ray.theta.sin_cos();
        let q = self.to_unit_frame([ray.r * cos_t, ray.r * sin_t]);
        let (sin_p, cos_p) = self.rotation.sin_cos();
        let d = [
            (cos_p * -sin_t + sin_p * cos_t) / self.semi_axes[0],
            (-sin_p * -sin_t + cos_p * cos_t) / self.semi_axes[1],
        ];
        let dd = d[0] * d[0] + d[1] * d[1];
        let qd = q[0] * d[0] + q[1] * d[1];
        let qq = q[0] * q[0] + q[1] * q[1];
        let disc = qd * qd - dd * (qq - 1.0);
        if disc <= 0.0 {
            0.0
        } else {
            2.0 * disc.sqrt() / dd
        }
    }

    /// Upper bound on the distance of any ellipse point from the origin.
    pub fn outer_radius(&self) -> f64 {
        let c = (self.center[0] * self.center[0] + self.center[1] * self.center[1]).sqrt();
        c + self.semi_axes[0].max(self.semi_axes[1])
    }
}

/// Additive ellipse phantom: the attenuation at a point is the sum of the
/// values of all ellipses containing it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EllipsePhantom {
    ellipses: Vec<Ellipse>,
}

impl EllipsePhantom {
    pub fn new(ellipses: Vec<Ellipse>) -> Self {
        EllipsePhantom { ellipses }
    }

    pub fn ellipses(&self) -> &[Ellipse] {
        &self.ellipses
    }

    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        self.ellipses
            .iter()
            .filter(|e| e.contains(p))
            .map(|e| e.value)
            .sum()
    }

    /// Exact line integral of the phantom along `ray`.
    pub fn line_integral(&self, ray: &Ray) -> f64 {
        self.ellipses.iter().map(|e| e.value * e.chord(ray)).sum()
    }

    /// Largest `outer_radius` over the ellipses; 0 for an empty phantom.
    pub fn outer_radius(&self) -> f64 {
        self.ellipses
            .iter()
            .map(Ellipse::outer_radius)
            .fold(0.0, f64::max)
    }

    /// Conservative check that the whole phantom lies inside the disk of the
    /// given radius.
    pub fn fits_in_disk(&self, radius: f64) -> bool {
        self.outer_radius() <= radius * (1.0 + 1e-12)
    }

    /// Point-sample the phantom on a pixel grid. `supersample = 1` samples
    /// pixel centers; larger values average a `supersample × supersample`
    /// sub-grid per pixel.
    pub fn rasterize(&self, n1: usize, n2: usize, l1: f64, l2: f64, supersample: usize) -> ImageGrid {
        let ss = supersample.max(1);
        let mut grid = ImageGrid::zeros(n1, n2, l1, l2);
        let w1 = 2.0 * l1 / n2 as f64;
        let w2 = 2.0 * l2 / n1 as f64;
        let rows: Vec<Vec<f64>> = (0..n1)
            .into_par_iter()
            .map(|i| {
                (0..n2)
                    .map(|j| {
                        let [cx, cy] = grid.pixel_center(i, j);
                        let mut acc = 0.0;
                        for a in 0..ss {
                            for b in 0..ss {
                                let x = cx + w1 * ((b as f64 + 0.5) / ss as f64 - 0.5);
                                let y = cy + w2 * ((a as f64 + 0.5) / ss as f64 - 0.5);
                                acc += self.value_at([x, y]);
                            }
                        }
                        acc / (ss * ss) as f64
                    })
                    .collect()
            })
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                grid.data[[i, j]] = v;
            }
        }
        grid
    }
}

/// Pixel raster on the rectangle `[-l1, l1] × [-l2, l2]`: `n1` rows by `n2`
/// columns, row 0 at the top (largest `x₂`), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub n1: usize,
    pub n2: usize,
    pub l1: f64,
    pub l2: f64,
    pub data: Array2<f64>,
}

impl ImageGrid {
    pub fn zeros(n1: usize, n2: usize, l1: f64, l2: f64) -> Self {
        ImageGrid {
            n1,
            n2,
            l1,
            l2,
            data: Array2::zeros((n1, n2)),
        }
    }

    pub fn from_data(data: Array2<f64>, l1: f64, l2: f64) -> Self {
        let (n1, n2) = data.dim();
        ImageGrid { n1, n2, l1, l2, data }
    }

    /// Physical coordinates of the center of pixel (row `i`, column `j`).
    pub fn pixel_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            -self.l1 + (j as f64 + 0.5) * 2.0 * self.l1 / self.n2 as f64,
            self.l2 - (i as f64 + 0.5) * 2.0 * self.l2 / self.n1 as f64,
        ]
    }

    /// Physical area covered by one pixel.
    pub fn pixel_area(&self) -> f64 {
        (2.0 * self.l1 / self.n2 as f64) * (2.0 * self.l2 / self.n1 as f64)
    }

    /// Smallest pixel edge length.
    pub fn min_pixel_width(&self) -> f64 {
        (2.0 * self.l1 / self.n2 as f64).min(2.0 * self.l2 / self.n1 as f64)
    }

    /// Whether the scan disk of the given radius fits inside the extent.
    pub fn contains_disk(&self, radius: f64) -> bool {
        self.l1 >= radius && self.l2 >= radius
    }

    /// Bilinear interpolation between pixel centers; zero beyond them.
    pub fn sample(&self, p: [f64; 2]) -> f64 {
        let jf = (p[0] + self.l1) / (2.0 * self.l1) * self.n2 as f64 - 0.5;
        let if_ = (self.l2 - p[1]) / (2.0 * self.l2) * self.n1 as f64 - 0.5;
        let j0 = jf.floor();
        let i0 = if_.floor();
        let tx = jf - j0;
        let ty = if_ - i0;
        let mut acc = 0.0;
        for (di, wy) in [(0i64, 1.0 - ty), (1, ty)] {
            for (dj, wx) in [(0i64, 1.0 - tx), (1, tx)] {
                let i = i0 as i64 + di;
                let j = j0 as i64 + dj;
                if i >= 0 && j >= 0 && (i as usize) < self.n1 && (j as usize) < self.n2 {
                    acc += wy * wx * self.data[[i as usize, j as usize]];
                }
            }
        }
        acc
    }

    /// Zero all pixels whose centers lie outside the disk of the given radius.
    pub fn mask_outside_disk(&mut self, radius: f64) {
        let r2 = radius * radius;
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                let [x, y] = self.pixel_center(i, j);
                if x * x + y * y > r2 {
                    self.data[[i, j]] = 0.0;
                }
            }
        }
    }
}

/// A measurement set: rays, their line-integral values, the scan radius, the
/// noise level if known, and the regular acquisition layout if the rays came
/// from one.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub rays: Vec<Ray>,
    pub values: Array1<f64>,
    pub radius: f64,
    pub noise_sigma: Option<f64>,
    pub geometry: Option<ScanGeometry>,
}

impl Sinogram {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Exact noise-free sinogram of an ellipse phantom.
pub fn analytic_sinogram(phantom: &EllipsePhantom, geometry: &ScanGeometry) -> Result<Sinogram> {
    if !phantom.fits_in_disk(geometry.radius) {
        return Err(Error::invalid(format!(
            "phantom (outer radius {:.6}) does not fit in the scan disk (radius {:.6})",
            phantom.outer_radius(),
            geometry.radius
        )));
    }
    let rays = geometry.rays();
    let values: Vec<f64> = rays
        .par_iter()
        .map(|ray| phantom.line_integral(ray))
        .collect();
    Ok(Sinogram {
        rays,
        values: Array1::from_vec(values),
        radius: geometry.radius,
        noise_sigma: Some(0.0),
        geometry: Some(*geometry),
    })
}

/// Noise-free sinogram of a raster image by sampled line integration:
/// trapezoid rule along each ray with bilinear interpolation, step `h`.
pub fn pixel_sinogram_with_step(
    image: &ImageGrid,
    geometry: &ScanGeometry,
    h: f64,
) -> Result<Sinogram> {
    if !image.contains_disk(geometry.radius) {
        return Err(Error::invalid(format!(
            "image extent ({}, {}) does not contain the scan disk (radius {})",
            image.l1, image.l2, geometry.radius
        )));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("sampling step must be positive"));
    }
    let r = geometry.radius;
    let steps = ((2.0 * r / h).ceil() as usize).max(1);
    let dt = 2.0 * r / steps as f64;
    let rays = geometry.rays();
    let values: Vec<f64> = rays
        .par_iter()
        .map(|ray| {
            let mut acc = 0.5 * (image.sample(ray.point(-r)) + image.sample(ray.point(r)));
            for k in 1..steps {
                acc += image.sample(ray.point(-r + k as f64 * dt));
            }
            acc * dt
        })
        .collect();
    Ok(Sinogram {
        rays,
        values: Array1::from_vec(values),
        radius: geometry.radius,
        noise_sigma: Some(0.0),
        geometry: Some(*geometry),
    })
}

/// [`pixel_sinogram_with_step`] at the default step of half the smallest
/// pixel width.
pub fn pixel_sinogram(image: &ImageGrid, geometry: &ScanGeometry) -> Result<Sinogram> {
    pixel_sinogram_with_step(image, geometry, image.min_pixel_width() / 2.0)
}

/// Add iid Gaussian noise of standard deviation `sigma` from a seeded
/// generator. The same seed always produces the same output.
pub fn add_noise(sinogram: &Sinogram, sigma: f64, seed: u64) -> Result<Sinogram> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("noise sigma must be nonnegative, got {sigma}")));
    }
    let mut out = sinogram.clone();
    if sigma > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
        for v in out.values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    out.noise_sigma = Some(sigma);
    Ok(out)
}

/// A fixed multi-ellipse phantom loosely shaped like a thorax cross-section:
/// a body outline, two low-attenuation lung regions and a bright spine blob.
/// Everything fits inside the disk of the given radius.
pub fn chest_like_phantom(radius: f64) -> EllipsePhantom {
    let r = radius;
    EllipsePhantom::new(vec![
        Ellipse::new([0.0, 0.0], [0.72 * r, 0.54 * r], 0.0, 1.0).unwrap(),
        Ellipse::new([-0.32 * r, 0.05 * r], [0.26 * r, 0.32 * r], 0.25, -0.6).unwrap(),
        Ellipse::new([0.32 * r, 0.05 * r], [0.26 * r, 0.32 * r], -0.25, -0.6).unwrap(),
        Ellipse::new([0.0, -0.36 * r], [0.12 * r, 0.10 * r], 0.0, 0.8).unwrap(),
        Ellipse::new([0.0, 0.30 * r], [0.10 * r, 0.14 * r], 0.0, 0.4).unwrap(),
    ])
}

/// A centered disk phantom of the given radius fraction and value.
pub fn disk_phantom(radius: f64, fraction: f64, value: f64) -> EllipsePhantom {
    let a = radius * fraction;
    EllipsePhantom::new(vec![Ellipse::new([0.0, 0.0], [a, a], 0.0, value).unwrap()])
}
