//! One-dimensional real point-spread functions and their moment integrals.
//!
//! A [`Psf`] is a normalized real amplitude ψ(x) with intensity I(x) = ψ(x)².
//! Three kinds are supported: analytic Gaussians, analytic Hermite–Gauss
//! mixtures (used to build controlled perturbations of a Gaussian), and
//! uniformly sampled amplitudes read from data.

mod grid;
mod hermite;
mod moments;

pub use grid::{read_psf_file, GridPsf};
pub(crate) use moments::intensity_window;
pub use moments::{
    cross_moments, direct_integrals, moment_set, momentum_moment, overlap_delta, overlap_gamma,
    DirectImagingIntegrals, MomentSet,
};

use crate::error::{Error, Result};
use hermite::HermiteGauss;
use serde::{Deserialize, Serialize};

/// Relative amplitude below which a PSF is treated as zero.
pub(crate) const AMPLITUDE_FLOOR: f64 = 1e-12;

/// The representation behind a [`Psf`].
#[derive(Debug, Clone, PartialEq)]
pub enum PsfKind {
    Gaussian { sigma: f64 },
    HermiteGauss(HermiteGauss),
    Grid(GridPsf),
}

/// A normalized real point-spread amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    kind: PsfKind,
}

/// Weights of the Hermite–Gauss modes that make up a perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMix {
    pub hg2: f64,
    pub hg4: f64,
}

impl PerturbationMix {
    pub fn hg2() -> Self {
        Self { hg2: 1.0, hg4: 0.0 }
    }

    pub fn hg4() -> Self {
        Self { hg2: 0.0, hg4: 1.0 }
    }

    /// Builds a mix from `(mode, weight)` pairs. Only modes 2 and 4 exist.
    pub fn from_modes(modes: &[(u32, f64)]) -> Result<Self> {
        let mut mix = Self { hg2: 0.0, hg4: 0.0 };
        for &(n, w) in modes {
            match n {
                2 => mix.hg2 += w,
                4 => mix.hg4 += w,
                _ => {
                    return Err(Error::Domain(format!(
                        "unsupported perturbation mode {n}; only 2 and 4 are available"
                    )))
                }
            }
        }
        Ok(mix)
    }
}

/// Analytic Gaussian ψ(x) = (2πσ²)^(−1/4) exp(−x²/4σ²).
pub fn make_gaussian(sigma: f64) -> Result<Psf> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(Psf {
        kind: PsfKind::Gaussian { sigma },
    })
}

/// Rotates a Gaussian towards a unit Hermite–Gauss perturbation:
/// ψ2 = cos θ·ψ_base + sin θ·φ with φ built from modes 2 and 4.
///
/// The weights are normalized, so ⟨ψ_base|ψ2⟩ = cos θ.
pub fn make_perturbed(base: &Psf, theta: f64, mix: PerturbationMix) -> Result<Psf> {
    let sigma = match base.kind {
        PsfKind::Gaussian { sigma } => sigma,
        _ => {
            return Err(Error::Domain(
                "perturbations are defined around an analytic Gaussian base".into(),
            ))
        }
    };
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::Domain(format!("theta must lie in [0, pi/2), got {theta}")));
    }
    let norm = mix.hg2.hypot(mix.hg4);
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Domain("perturbation weights must not all vanish".into()));
    }
    let (s, c) = theta.sin_cos();
    let modes = [
        (0, c),
        (2, s * mix.hg2 / norm),
        (4, s * mix.hg4 / norm),
    ];
    Ok(Psf {
        kind: PsfKind::HermiteGauss(HermiteGauss::new(sigma, &modes)),
    })
}

impl Psf {
    /// Wraps a sampled amplitude; see [`GridPsf::new`].
    pub fn from_grid(grid: GridPsf) -> Self {
        Self {
            kind: PsfKind::Grid(grid),
        }
    }

    pub fn kind(&self) -> &PsfKind {
        &self.kind
    }

    /// Width of the Gaussian when the PSF is one.
    pub fn gaussian_sigma(&self) -> Option<f64> {
        match self.kind {
            PsfKind::Gaussian { sigma } => Some(sigma),
            _ => None,
        }
    }

    /// ψ(x).
    pub fn amplitude(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// ψ′(x).
    pub fn deriv(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// ψ″(x).
    pub fn deriv2(&self, x: f64) -> f64 {
        self.eval(x).2
    }

    /// I(x) = ψ(x)².
    pub fn intensity(&self, x: f64) -> f64 {
        match self.kind {
            PsfKind::Gaussian { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            _ => {
                let a = self.amplitude(x);
                a * a
            }
        }
    }

    /// (ψ, ψ′, ψ″) at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match &self.kind {
            PsfKind::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                let a = (2.0 * std::f64::consts::PI * s2).powf(-0.25) * (-x * x / (4.0 * s2)).exp();
                let d1 = -x / (2.0 * s2) * a;
                let d2 = (x * x / (4.0 * s2 * s2) - 1.0 / (2.0 * s2)) * a;
                (a, d1, d2)
            }
            PsfKind::HermiteGauss(hg) => hg.eval(x),
            PsfKind::Grid(g) => g.eval(x),
        }
    }

    /// Interval outside which the amplitude is negligible.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            PsfKind::Gaussian { sigma } => (-12.0 * sigma, 12.0 * sigma),
            PsfKind::HermiteGauss(hg) => {
                let l = 13.0 * hg.sigma();
                (-l, l)
            }
            PsfKind::Grid(g) => g.extent(),
        }
    }

    /// Characteristic width: σ for Gaussian kinds, 1/(2√⟨P²⟩) otherwise.
    pub fn width(&self) -> f64 {
        match &self.kind {
            PsfKind::Gaussian { sigma } => *sigma,
            PsfKind::HermiteGauss(hg) => hg.sigma(),
            PsfKind::Grid(g) => g.equivalent_sigma(),
        }
    }

    /// Suggested number of initial quadrature pieces over the support.
    pub(crate) fn quadrature_pieces(&self, lo: f64, hi: f64) -> usize {
        let w = match &self.kind {
            PsfKind::Grid(g) => g.equivalent_sigma().min(50.0 * g.spacing()),
            _ => self.width(),
        };
        (((hi - lo) / (1.5 * w)).ceil() as usize).clamp(4, 400)
    }
}
