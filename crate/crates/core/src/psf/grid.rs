//! Uniformly sampled PSFs: fourth-order finite differences for derivatives
//! and six-point Lagrange interpolation between samples.

use super::{Psf, AMPLITUDE_FLOOR};
use crate::error::{Error, Result};
use std::path::Path;

/// A PSF amplitude sampled on `origin + k·spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPsf {
    origin: f64,
    spacing: f64,
    amp: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    sigma_eq: f64,
}

impl GridPsf {
    /// Normalizes the samples and precomputes derivative samples.
    ///
    /// The amplitude must decay below 1e−12 of its peak at both ends.
    pub fn new(samples: Vec<f64>, origin: f64, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) || !origin.is_finite() {
            return Err(Error::Domain("grid spacing must be positive and finite".into()));
        }
        if samples.len() < 8 {
            return Err(Error::Domain("a sampled PSF needs at least 8 samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("PSF samples must be finite".into()));
        }
        let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return Err(Error::Domain("PSF samples are identically zero".into()));
        }
        let edge = samples[0].abs().max(samples[samples.len() - 1].abs()) / peak;
        if edge > AMPLITUDE_FLOOR {
            return Err(Error::InsufficientGrid {
                edge,
                tolerance: AMPLITUDE_FLOOR,
            });
        }
        let norm = (samples.iter().map(|v| v * v).sum::<f64>() * spacing).sqrt();
        let amp: Vec<f64> = samples.iter().map(|v| v / norm).collect();
        let n = amp.len();
        let at = |i: isize| -> f64 {
            if i < 0 || i as usize >= n {
                0.0
            } else {
                amp[i as usize]
            }
        };
        let h = spacing;
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        for i in 0..n as isize {
            let (m2, m1, c, p1, p2) = (at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2));
            d1.push((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h));
            d2.push((-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h));
        }
        let kappa = d1.iter().map(|v| v * v).sum::<f64>() * h;
        Ok(Self {
            origin,
            spacing,
            amp,
            d1,
            d2,
            sigma_eq: 0.5 / kappa.sqrt(),
        })
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn samples(&self) -> &[f64] {
        &self.amp
    }

    /// Width of the Gaussian with the same ⟨P²⟩.
    pub fn equivalent_sigma(&self) -> f64 {
        self.sigma_eq
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            self.origin,
            self.origin + self.spacing * (self.amp.len() - 1) as f64,
        )
    }

    pub(crate) fn eval(&self, x: f64) -> (f64, f64, f64) {
        let t = (x - self.origin) / self.spacing;
        let n = self.amp.len() as isize;
        if !(t > -1.0 && t < n as f64) {
            return (0.0, 0.0, 0.0);
        }
        let j = t.floor() as isize;
        let first = j - 2;
        let u = t - first as f64;
        let mut w = [0.0; 6];
        for (k, wk) in w.iter_mut().enumerate() {
            let mut l = 1.0;
            for m in 0..6 {
                if m != k {
                    l *= (u - m as f64) / (k as f64 - m as f64);
                }
            }
            *wk = l;
        }
        let mut out = (0.0, 0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            let i = first + k as isize;
            if i >= 0 && i < n {
                let i = i as usize;
                out.0 += wk * self.amp[i];
                out.1 += wk * self.d1[i];
                out.2 += wk * self.d2[i];
            }
        }
        out
    }
}

/// Reads a two-column `x amplitude` text file into a grid PSF.
///
/// Blank lines and lines starting with `#` are skipped; columns may be
/// separated by whitespace or commas. Spacing must be uniform to 1e−9
/// relative.
pub fn read_psf_file(path: impl AsRef<Path>) -> Result<Psf> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_psf_table(&text)
}

pub(crate) fn parse_psf_table(text: &str) -> Result<Psf> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected two columns, found {}",
                lineno + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        xs.push(parse(cols[0])?);
        ys.push(parse(cols[1])?);
    }
    if xs.len() < 8 {
        return Err(Error::Parse("PSF file needs at least 8 samples".into()));
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::Parse("abscissae must increase".into()));
    }
    for w in xs.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::Parse(format!(
                "non-uniform spacing near x = {}: step {} vs {}",
                w[0],
                w[1] - w[0],
                h
            )));
        }
    }
    Ok(Psf::from_grid(GridPsf::new(ys, xs[0], h)?))
}
