//! Prior families for the attenuation field.
//!
//! Squared-exponential and Matérn priors have both a stationary covariance
//! function and a spectral density. The Tikhonov (white-noise) and Laplacian
//! regularization priors are degenerate: their covariance kernels are
//! ill-defined, but their spectral densities exist and are all the basis
//! expansion needs. Input dimension is fixed at 2.

use crate::error::{Error, Result};

/// Input dimension of the field.
pub const DIM: usize = 2;

/// Prior family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovFamily {
    SquaredExponential,
    Matern,
    Tikhonov,
    Laplacian,
}

impl CovFamily {
    pub fn name(&self) -> &'static str {
        match self {
            CovFamily::SquaredExponential => "se",
            CovFamily::Matern => "matern",
            CovFamily::Tikhonov => "tikhonov",
            CovFamily::Laplacian => "laplacian",
        }
    }

    /// Whether the family carries a length scale.
    pub fn has_length_scale(&self) -> bool {
        matches!(self, CovFamily::SquaredExponential | CovFamily::Matern)
    }
}

impl std::str::FromStr for CovFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "squared_exponential" | "squaredexponential" => Ok(CovFamily::SquaredExponential),
            "matern" => Ok(CovFamily::Matern),
            "tikhonov" => Ok(CovFamily::Tikhonov),
            "laplacian" => Ok(CovFamily::Laplacian),
            other => Err(Error::invalid(format!("unknown covariance family `{other}`"))),
        }
    }
}

/// A prior family with its hyperparameters: magnitude `sigma_f` always,
/// `length_scale` for SE/Matérn, smoothness `nu` for Matérn only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    pub family: CovFamily,
    pub sigma_f: f64,
    pub length_scale: Option<f64>,
    pub nu: Option<f64>,
}

impl CovarianceSpec {
    pub fn squared_exponential(sigma_f: f64, length_scale: f64) -> Result<Self> {
        CovarianceSpec {
            family: CovFamily::SquaredExponential,
            sigma_f,
            length_scale: Some(length_scale),
            nu: None,
        }
        .validated()
    }

    pub fn matern(sigma_f: f64, length_scale: f64, nu: f64) -> Result<Self> {
        CovarianceSpec {
            family: CovFamily::Matern,
            sigma_f,
            length_scale: Some(length_scale),
            nu: Some(nu),
        }
        .validated()
    }

    pub fn tikhonov(sigma_f: f64) -> Result<Self> {
        CovarianceSpec {
            family: CovFamily::Tikhonov,
            sigma_f,
            length_scale: None,
            nu: None,
        }
        .validated()
    }

    pub fn laplacian(sigma_f: f64) -> Result<Self> {
        CovarianceSpec {
            family: CovFamily::Laplacian,
            sigma_f,
            length_scale: None,
            nu: None,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.sigma_f > 0.0 && self.sigma_f.is_finite()) {
            return Err(Error::invalid(format!("sigma_f must be positive, got {}", self.sigma_f)));
        }
        if self.family.has_length_scale() {
            match self.length_scale {
                Some(l) if l > 0.0 && l.is_finite() => {}
                other => {
                    return Err(Error::invalid(format!(
                        "{} prior requires a positive length scale, got {other:?}",
                        self.family.name()
                    )))
                }
            }
        } else if self.length_scale.is_some() {
            return Err(Error::invalid(format!(
                "{} prior carries no length scale",
                self.family.name()
            )));
        }
        if self.family == CovFamily::Matern {
            match self.nu {
                Some(nu) if nu > 0.0 && nu.is_finite() => {}
                other => {
                    return Err(Error::invalid(format!(
                        "Matern prior requires positive nu, got {other:?}"
                    )))
                }
            }
        } else if self.nu.is_some() {
            return Err(Error::invalid(format!(
                "{} prior carries no smoothness parameter",
                self.family.name()
            )));
        }
        Ok(self)
    }

    /// Same family and fixed shape parameters, new magnitude/length scale.
    /// `length_scale` is ignored by families that do not carry one.
    pub fn with_params(&self, sigma_f: f64, length_scale: f64) -> Result<Self> {
        CovarianceSpec {
            family: self.family,
            sigma_f,
            length_scale: self.family.has_length_scale().then_some(length_scale),
            nu: self.nu,
        }
        .validated()
    }

    /// Stationary covariance at displacement `r`. Defined for SE and Matérn;
    /// the degenerate regularization families return an error.
    pub fn covariance(&self, r: [f64; 2]) -> Result<f64> {
        self.covariance_iso((r[0] * r[0] + r[1] * r[1]).sqrt())
    }

    /// Covariance as a function of the displacement norm.
    pub fn covariance_iso(&self, dist: f64) -> Result<f64> {
        let sf2 = self.sigma_f * self.sigma_f;
        match self.family {
            CovFamily::SquaredExponential => {
                let l = self.length_scale.unwrap();
                Ok(sf2 * (-0.5 * dist * dist / (l * l)).exp())
            }
            CovFamily::Matern => {
                if dist == 0.0 {
                    // k(0) = sigma_f^2; the direct expression is a 0·inf limit.
                    return Ok(sf2);
                }
                let l = self.length_scale.unwrap();
                let nu = self.nu.unwrap();
                let arg = (2.0 * nu).sqrt() * dist / l;
                let (_, k_nu) = puruspe::Inu_Knu(nu, arg);
                Ok(sf2 * 2.0f64.powf(1.0 - nu) / puruspe::gamma(nu) * arg.powf(nu) * k_nu)
            }
            CovFamily::Tikhonov => Err(Error::DegenerateCovariance("tikhonov")),
            CovFamily::Laplacian => Err(Error::DegenerateCovariance("laplacian")),
        }
    }

    /// Spectral density at angular frequency `omega` (d = 2).
    pub fn spectral_density(&self, omega: [f64; 2]) -> Result<f64> {
        self.spectral_density_iso((omega[0] * omega[0] + omega[1] * omega[1]).sqrt())
    }

    /// Spectral density as a function of the frequency norm.
    pub fn spectral_density_iso(&self, omega_norm: f64) -> Result<f64> {
        let sf2 = self.sigma_f * self.sigma_f;
        let d = DIM as f64;
        match self.family {
            CovFamily::SquaredExponential => {
                let l = self.length_scale.unwrap();
                Ok(sf2
                    * (2.0 * std::f64::consts::PI).powf(d / 2.0)
                    * l.powf(d)
                    * (-0.5 * l * l * omega_norm * omega_norm).exp())
            }
            CovFamily::Matern => {
                let l = self.length_scale.unwrap();
                let nu = self.nu.unwrap();
                let two_nu = 2.0 * nu;
                let coeff = sf2 * 2.0f64.powf(d) * std::f64::consts::PI.powf(d / 2.0)
                    * puruspe::gamma(nu + d / 2.0)
                    * two_nu.powf(nu)
                    / (puruspe::gamma(nu) * l.powf(2.0 * nu));
                Ok(coeff * (two_nu / (l * l) + omega_norm * omega_norm).powf(-(nu + d / 2.0)))
            }
            CovFamily::Tikhonov => Ok(sf2),
            CovFamily::Laplacian => {
                if omega_norm == 0.0 {
                    return Err(Error::SpectralSingularity);
                }
                Ok(sf2 / omega_norm.powi(4))
            }
        }
    }
}
