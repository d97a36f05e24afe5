//! Bridge between `ndarray` containers and `faer` dense kernels.
//!
//! Matrices live in `ndarray` (row-major) throughout the crate; products and
//! factorizations that dominate runtime are dispatched to `faer`.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, MatRef, Side};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Relative jitter added to the diagonal before every SPD factorization.
pub const JITTER_REL: f64 = 1e-10;

/// Jitter escalation factor and retry count on factorization failure.
const JITTER_GROWTH: f64 = 10.0;
const JITTER_RETRIES: usize = 3;

fn view(a: &Array2<f64>) -> MatRef<'_, f64> {
    let (r, c) = a.dim();
    let slice = a
        .as_slice()
        .expect("matrix must be in standard (row-major) layout");
    MatRef::from_row_major_slice(slice, r, c)
}

fn to_ndarray(a: &Mat<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// `A Aᵀ`.
pub fn a_at(a: &Array2<f64>) -> Array2<f64> {
    let v = view(a);
    to_ndarray(&(v * v.transpose()))
}

/// `Aᵀ B`.
pub fn at_b(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    to_ndarray(&(view(a).transpose() * view(b)))
}

/// `A B`.
pub fn ab(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    to_ndarray(&(view(a) * view(b)))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &Array2<f64>) -> Result<Vec<f64>> {
    view(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Factorization {
            size: a.nrows(),
            jitter: 0.0,
            detail: format!("eigendecomposition failed: {e:?}"),
        })
}

/// Cholesky factorization of a symmetric positive-definite matrix with the
/// crate's deterministic jitter policy: the first attempt is exact; on
/// failure `JITTER_REL · trace / size` is added to the diagonal and
/// escalated tenfold, at most [`JITTER_RETRIES`] times. The jitter actually
/// applied is recorded on the factor.
pub struct SpdFactor {
    llt: Llt<f64>,
    /// Jitter actually applied to the diagonal (0 when the exact
    /// factorization succeeded).
    pub jitter: f64,
    pub size: usize,
}

impl SpdFactor {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!(
                "cholesky of a {r}×{c} matrix"
            )));
        }
        let trace: f64 = (0..r).map(|i| a[[i, i]]).sum();
        let base = JITTER_REL * trace / r.max(1) as f64;
        let mut jitter = 0.0;
        for attempt in 0..=JITTER_RETRIES {
            let mut m = Mat::from_fn(r, c, |i, j| a[[i, j]]);
            for i in 0..r {
                m[(i, i)] += jitter;
            }
            match m.llt(Side::Lower) {
                Ok(llt) => {
                    return Ok(SpdFactor {
                        llt,
                        jitter,
                        size: r,
                    })
                }
                Err(_) if attempt < JITTER_RETRIES => {
                    jitter = if jitter == 0.0 { base } else { jitter * JITTER_GROWTH };
                }
                Err(e) => {
                    return Err(Error::Factorization {
                        size: r,
                        jitter,
                        detail: format!(
                            "matrix is not positive definite after jitter escalation \
                             (base {base:.3e}): {e:?}"
                        ),
                    })
                }
            }
        }
        unreachable!()
    }

    /// `log det` of the factored matrix.
    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        (0..self.size).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
    }

    pub fn solve_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        Array1::from_shape_fn(b.len(), |i| x[(i, 0)])
    }

    pub fn solve_mat(&self, b: &Array2<f64>) -> Array2<f64> {
        let x = self.llt.solve(&view(b));
        to_ndarray(&x)
    }

    /// Quadratic form `bᵀ M⁻¹ b` through the factorization.
    pub fn inv_quad_vec(&self, b: &Array1<f64>) -> f64 {
        self.solve_vec(b).dot(b)
    }
}
