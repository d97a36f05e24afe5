//! Text and binary file formats.
//!
//! All text formats are whitespace-delimited with `#` comment lines and
//! floats printed to 17 significant digits, so write→read round-trips are
//! bit-exact. Parse failures name the offending file and line.
//!
//! * phantom: one ellipse per line, `c1 c2 a b psi rho`;
//! * sinogram: header `n R`, then `theta r y` per measurement;
//! * image: header `N1 N2 L1 L2`, then `N1` rows of `N2` values
//!   (top row = largest x₂);
//! * chain trace: header `iter sigma_f l sigma logpost accepted`
//!   (`l` written as 0 for length-scale-free families);
//! * prior config: `key=value` lines (`family`, `sigma_f`, `length_scale`,
//!   `nu`);
//! * Φ cache: two little-endian u64 dimensions, then row-major f64 entries.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::basis::ProjectedBasis;
use crate::covariance::{CovFamily, CovarianceSpec};
use crate::error::{Error, Result};
use crate::geometry::{Ellipse, EllipsePhantom, ImageGrid, Ray, ScanGeometry, Sinogram};
use crate::hyper::{ChainSample, ChainTrace};

/// Float formatting used by every text writer: 17 significant digits.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Non-comment, non-blank lines with their 1-based numbers.
fn content_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| parse_err(path, 0, format!("cannot open: {e}")))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| parse_err(path, idx + 1, format!("read error: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((idx + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn parse_f64(path: &Path, line: usize, token: &str, what: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{token}`")))
}

fn parse_usize(path: &Path, line: usize, token: &str, what: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{token}`")))
}

// ---------------------------------------------------------------------------
// Phantom descriptions
// ---------------------------------------------------------------------------

pub fn write_phantom(path: &Path, phantom: &EllipsePhantom) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# ellipse phantom: c1 c2 a b psi rho")?;
    for e in phantom.ellipses() {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            fmt(e.center[0]),
            fmt(e.center[1]),
            fmt(e.semi_axes[0]),
            fmt(e.semi_axes[1]),
            fmt(e.rotation),
            fmt(e.value)
        )?;
    }
    Ok(())
}

pub fn read_phantom(path: &Path) -> Result<EllipsePhantom> {
    let mut ellipses = Vec::new();
    for (lineno, line) in content_lines(path)? {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 6 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 6 values `c1 c2 a b psi rho`, found {}", tokens.len()),
            ));
        }
        let v: Vec<f64> = tokens
            .iter()
            .map(|t| parse_f64(path, lineno, t, "ellipse value"))
            .collect::<Result<_>>()?;
        ellipses.push(
            Ellipse::new([v[0], v[1]], [v[2], v[3]], v[4], v[5])
                .map_err(|e| parse_err(path, lineno, e.to_string()))?,
        );
    }
    Ok(EllipsePhantom::new(ellipses))
}

// ---------------------------------------------------------------------------
// Sinograms
// ---------------------------------------------------------------------------

pub fn write_sinogram(path: &Path, sinogram: &Sinogram) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# sinogram: header `n R`, then `theta r y` per measurement")?;
    writeln!(w, "{} {}", sinogram.len(), fmt(sinogram.radius))?;
    for (ray, y) in sinogram.rays.iter().zip(sinogram.values.iter()) {
        writeln!(w, "{} {} {}", fmt(ray.theta), fmt(ray.r), fmt(*y))?;
    }
    Ok(())
}

/// Recover the regular acquisition layout from a ray list, if there is one:
/// angle-major blocks of equal size, first angle zero, uniform angle steps,
/// offsets on the inclusive uniform grid over `[-R, R]`.
fn detect_geometry(rays: &[Ray], radius: f64) -> Option<ScanGeometry> {
    if rays.is_empty() {
        return None;
    }
    let n_rays = rays
        .iter()
        .position(|r| r.theta != rays[0].theta)
        .unwrap_or(rays.len());
    if rays.len() % n_rays != 0 {
        return None;
    }
    let n_angles = rays.len() / n_rays;
    let tol = 1e-9 * radius.max(1.0);
    if rays[0].theta.abs() > tol {
        return None;
    }
    let span = if n_angles == 1 {
        std::f64::consts::PI
    } else {
        (rays[n_rays].theta - rays[0].theta) * n_angles as f64
    };
    let geometry = ScanGeometry::new(radius, n_angles, span, n_rays).ok()?;
    for (i, ray) in rays.iter().enumerate() {
        let expect_theta = geometry.angle(i / n_rays);
        let expect_r = geometry.offset(i % n_rays);
        if (ray.theta - expect_theta).abs() > tol || (ray.r - expect_r).abs() > tol {
            return None;
        }
    }
    Some(geometry)
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    let lines = content_lines(path)?;
    if lines.is_empty() {
        return Err(parse_err(path, 1, "missing `n R` header"));
    }
    let (header_line, header) = &lines[0];
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 2 {
        return Err(parse_err(path, *header_line, "header must be `n R`"));
    }
    let n = parse_usize(path, *header_line, tokens[0], "measurement count")?;
    let radius = parse_f64(path, *header_line, tokens[1], "scan radius")?;
    if !(radius > 0.0) {
        return Err(parse_err(path, *header_line, "scan radius must be positive"));
    }
    if lines.len() - 1 != n {
        return Err(parse_err(
            path,
            *header_line,
            format!("header promises {n} measurements, file has {}", lines.len() - 1),
        ));
    }
    let mut rays = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (lineno, line) in &lines[1..] {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(parse_err(path, *lineno, "expected `theta r y`"));
        }
        rays.push(Ray::new(
            parse_f64(path, *lineno, tokens[0], "angle")?,
            parse_f64(path, *lineno, tokens[1], "offset")?,
        ));
        values.push(parse_f64(path, *lineno, tokens[2], "measurement")?);
    }
    let geometry = detect_geometry(&rays, radius);
    Ok(Sinogram {
        rays,
        values: Array1::from_vec(values),
        radius,
        noise_sigma: None,
        geometry,
    })
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

pub fn write_image(path: &Path, image: &ImageGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# image: header `N1 N2 L1 L2`, then N1 rows of N2 values")?;
    writeln!(
        w,
        "{} {} {} {}",
        image.n1,
        image.n2,
        fmt(image.l1),
        fmt(image.l2)
    )?;
    for i in 0..image.n1 {
        let row: Vec<String> = (0..image.n2).map(|j| fmt(image.data[[i, j]])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_image(path: &Path) -> Result<ImageGrid> {
    let lines = content_lines(path)?;
    if lines.is_empty() {
        return Err(parse_err(path, 1, "missing `N1 N2 L1 L2` header"));
    }
    let (header_line, header) = &lines[0];
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 {
        return Err(parse_err(path, *header_line, "header must be `N1 N2 L1 L2`"));
    }
    let n1 = parse_usize(path, *header_line, tokens[0], "row count")?;
    let n2 = parse_usize(path, *header_line, tokens[1], "column count")?;
    let l1 = parse_f64(path, *header_line, tokens[2], "half-width L1")?;
    let l2 = parse_f64(path, *header_line, tokens[3], "half-width L2")?;
    if lines.len() - 1 != n1 {
        return Err(parse_err(
            path,
            *header_line,
            format!("header promises {n1} rows, file has {}", lines.len() - 1),
        ));
    }
    let mut data = Array2::zeros((n1, n2));
    for (i, (lineno, line)) in lines[1..].iter().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != n2 {
            return Err(parse_err(
                path,
                *lineno,
                format!("expected {n2} values, found {}", tokens.len()),
            ));
        }
        for (j, t) in tokens.iter().enumerate() {
            data[[i, j]] = parse_f64(path, *lineno, t, "pixel value")?;
        }
    }
    Ok(ImageGrid::from_data(data, l1, l2))
}

// ---------------------------------------------------------------------------
// Chain traces
// ---------------------------------------------------------------------------

pub fn write_trace(path: &Path, trace: &ChainTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iter sigma_f l sigma logpost accepted")?;
    for s in &trace.samples {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            s.iteration,
            fmt(s.sigma_f),
            fmt(s.length_scale.unwrap_or(0.0)),
            fmt(s.sigma),
            fmt(s.log_target),
            u8::from(s.accepted)
        )?;
    }
    Ok(())
}

pub fn read_trace_samples(path: &Path) -> Result<Vec<ChainSample>> {
    let lines = content_lines(path)?;
    if lines.is_empty() {
        return Err(parse_err(path, 1, "missing trace header"));
    }
    let (header_line, header) = &lines[0];
    if header.split_whitespace().collect::<Vec<_>>()
        != ["iter", "sigma_f", "l", "sigma", "logpost", "accepted"]
    {
        return Err(parse_err(
            path,
            *header_line,
            "header must be `iter sigma_f l sigma logpost accepted`",
        ));
    }
    let mut samples = Vec::with_capacity(lines.len() - 1);
    for (lineno, line) in &lines[1..] {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 6 {
            return Err(parse_err(path, *lineno, "expected 6 columns"));
        }
        let l = parse_f64(path, *lineno, tokens[2], "length scale")?;
        samples.push(ChainSample {
            iteration: parse_usize(path, *lineno, tokens[0], "iteration")?,
            sigma_f: parse_f64(path, *lineno, tokens[1], "sigma_f")?,
            length_scale: (l != 0.0).then_some(l),
            sigma: parse_f64(path, *lineno, tokens[3], "sigma")?,
            log_target: parse_f64(path, *lineno, tokens[4], "log posterior")?,
            accepted: match tokens[5] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(parse_err(path, *lineno, format!("invalid accepted flag `{other}`")))
                }
            },
        });
    }
    Ok(samples)
}

// ---------------------------------------------------------------------------
// Prior configuration
// ---------------------------------------------------------------------------

pub fn write_prior_config(path: &Path, spec: &CovarianceSpec) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "family={}", spec.family.name())?;
    writeln!(w, "sigma_f={}", fmt(spec.sigma_f))?;
    if let Some(l) = spec.length_scale {
        writeln!(w, "length_scale={}", fmt(l))?;
    }
    if let Some(nu) = spec.nu {
        writeln!(w, "nu={}", fmt(nu))?;
    }
    Ok(())
}

pub fn read_prior_config(path: &Path) -> Result<CovarianceSpec> {
    let mut family: Option<CovFamily> = None;
    let mut sigma_f: Option<f64> = None;
    let mut length_scale: Option<f64> = None;
    let mut nu: Option<f64> = None;
    for (lineno, line) in content_lines(path)? {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, lineno, "expected `key=value`"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "family" => {
                family = Some(
                    value
                        .parse()
                        .map_err(|e: Error| parse_err(path, lineno, e.to_string()))?,
                )
            }
            "sigma_f" => sigma_f = Some(parse_f64(path, lineno, value, "sigma_f")?),
            "length_scale" => length_scale = Some(parse_f64(path, lineno, value, "length_scale")?),
            "nu" => nu = Some(parse_f64(path, lineno, value, "nu")?),
            other => return Err(parse_err(path, lineno, format!("unknown key `{other}`"))),
        }
    }
    let family = family.ok_or_else(|| parse_err(path, 1, "missing `family`"))?;
    let sigma_f = sigma_f.ok_or_else(|| parse_err(path, 1, "missing `sigma_f`"))?;
    CovarianceSpec {
        family,
        sigma_f,
        length_scale,
        nu,
    }
    .validated()
    .map_err(|e| parse_err(path, 1, e.to_string()))
}

// ---------------------------------------------------------------------------
// Binary Φ cache
// ---------------------------------------------------------------------------

pub fn write_phi_binary(path: &Path, phi: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (rows, cols) = phi.dim();
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for v in phi.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_phi_binary(path: &Path) -> Result<Array2<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut dims = [0u8; 16];
    r.read_exact(&mut dims)?;
    let rows = u64::from_le_bytes(dims[..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(dims[8..].try_into().unwrap()) as usize;
    let mut data = vec![0.0f64; rows * cols];
    let mut buf = [0u8; 8];
    for v in data.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
}

/// Dump the assembled `Φ` of a basis for caching.
pub fn write_projected_phi(path: &Path, basis: &ProjectedBasis) -> Result<()> {
    write_phi_binary(path, basis.phi())
}
