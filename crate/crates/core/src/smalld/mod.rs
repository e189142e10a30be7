//! Small-separation expansions of the unknown-imbalance precision.
//!
//! Numerator and denominator of H_d are expanded to fourth order in d. For
//! identical PSFs a common d² cancels and H_d ≈ C d²/(D1 + D2 d²); for a
//! general pair H_d ≈ (A0 + A2 d² + A4 d⁴)/(B0 + B2 d² + B4 d⁴). All
//! coefficients here are per unit N_tot.

mod regime;

pub use regime::{
    default_schedule, regime_ratio, regime_verify, validate_exponents, ExponentCheck, PsfFamily,
    RegimeOutcome, RegimeSpec, RegimeTable, RegimeVerification,
};

use crate::error::{Error, Result};
use crate::psf::{moment_set, MomentSet, Psf};
use serde::{Deserialize, Serialize};

/// Fourth-order expansion coefficients with the moments they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum SeriesCoefficients {
    /// H/N ≈ C d²/(D1 + D2 d²).
    Identical {
        c: f64,
        d1: f64,
        d2: f64,
        eps: f64,
        moments: MomentSet,
    },
    /// H/N ≈ (A0 + A2 d² + A4 d⁴)/(B0 + B2 d² + B4 d⁴).
    General {
        a0: f64,
        a2: f64,
        a4: f64,
        b0: f64,
        b2: f64,
        b4: f64,
        eps: f64,
        moments: MomentSet,
    },
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("imbalance must lie in (-1, 1), got {eps}")))
    }
}

/// C = 3(1−ε²)⟨P²⟩Var(P²), D1 = 12ε²⟨P²⟩, D2 = 3Var(P²) − 4ε²⟨P⁴⟩.
pub fn coeffs_identical(psf: &Psf, eps: f64) -> Result<SeriesCoefficients> {
    check_eps(eps)?;
    Ok(identical_from_moments(moment_set(psf, psf, 0.0), eps))
}

fn identical_from_moments(m: MomentSet, eps: f64) -> SeriesCoefficients {
    let k = m.kappa1;
    let var = m.p4_1 - k * k;
    let e2 = eps * eps;
    SeriesCoefficients::Identical {
        c: 3.0 * (1.0 - e2) * k * var,
        d1: 12.0 * e2 * k,
        d2: 3.0 * var - 4.0 * e2 * m.p4_1,
        eps,
        moments: m,
    }
}

/// General-pair coefficients from the overlap, ξ, χ, κ_tot and ⟨P⁴⟩₁₂.
pub fn coeffs_general(psf1: &Psf, psf2: &Psf, eps: f64) -> Result<SeriesCoefficients> {
    check_eps(eps)?;
    Ok(general_from_moments(moment_set(psf1, psf2, 0.0), eps))
}

fn general_from_moments(m: MomentSet, eps: f64) -> SeriesCoefficients {
    let kt = m.kappa_tot;
    let chi = m.chi;
    let o = m.overlap0;
    let xi = 0.5 - m.xi_gap;
    let p4 = m.p4_12;
    let e = eps;
    let e2 = e * e;
    // 1 − o² and 2ξ − o from the stable small quantities.
    let one_minus_o2 = m.u0 * (2.0 - m.u0);
    let two_xi_minus_o = m.u0 - 2.0 * m.xi_gap;
    let q = 3.0 * xi * xi * kt * kt;
    SeriesCoefficients::General {
        a0: -12.0 * (1.0 - chi * chi) * (1.0 - e2) * one_minus_o2 * kt,
        b0: -24.0 * (1.0 + chi * e) * one_minus_o2,
        a2: 12.0 * kt * kt * xi * (1.0 - e2) * (two_xi_minus_o + chi * chi * o + 2.0 * xi * chi * e),
        b2: 24.0 * xi * kt * (two_xi_minus_o - chi * e * o - 2.0 * xi * e2),
        a4: (1.0 - e2)
            * kt
            * (q - 8.0 * xi * p4 + o * p4 - 8.0 * xi * chi * e * p4 - chi * chi * (o * p4 + q)),
        b4: 2.0 * (q - 8.0 * xi * p4 + o * p4 + 8.0 * xi * e2 * p4 + chi * e * (o * p4 + q)),
        eps,
        moments: m,
    }
}

/// Coefficients appropriate for a moment set: the identical variant when the
/// two PSFs coincide exactly, the general one otherwise.
pub fn coeffs_from_moments(m: &MomentSet, eps: f64) -> SeriesCoefficients {
    if m.u0 == 0.0 && m.chi == 0.0 && m.xi_gap == 0.0 {
        identical_from_moments(*m, eps)
    } else {
        general_from_moments(*m, eps)
    }
}

/// Per-photon precision from the truncated expansion.
pub fn hd_series(coeffs: &SeriesCoefficients, d: f64) -> Result<f64> {
    let d2 = d * d;
    match *coeffs {
        SeriesCoefficients::Identical { c, d1, d2: dd2, .. } => {
            if d1 == 0.0 {
                // ε = 0: the common d² cancels for every d.
                return Ok(c / dd2);
            }
            let num = c * d2;
            let den = d1 + dd2 * d2;
            Ok(num / den)
        }
        SeriesCoefficients::General {
            a0,
            a2,
            a4,
            b0,
            b2,
            b4,
            ..
        } => {
            let num = a0 + d2 * (a2 + d2 * a4);
            let den = b0 + d2 * (b2 + d2 * b4);
            if num.abs() < 1e-300 && den.abs() < 1e-300 {
                return Err(Error::IndeterminateSeries { d });
            }
            Ok(num / den)
        }
    }
}

/// Expansion coefficients of the closed Gaussian form, in the normalization
/// where A0 = 8(1−ε²)(σ1−σ2)²(σ1²+σ2²)² per unit N_tot.
///
/// These differ from [`coeffs_general`] by a d-dependent common factor, so
/// only ratios such as A0/B0 agree between the two sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSeries {
    pub a0: f64,
    pub a2: f64,
    pub a4: f64,
    pub b0: f64,
    pub b2: f64,
    pub b4: f64,
}

impl GaussianSeries {
    pub fn new(sigma1: f64, sigma2: f64, eps: f64) -> Self {
        let (s1, s2, e) = (sigma1, sigma2, eps);
        let s = s1 * s1 + s2 * s2;
        let w = s1 * s1 * (1.0 + e) + s2 * s2 * (1.0 - e);
        let dsig2 = (s1 - s2).powi(2);
        let p = s1 * s2;
        Self {
            a0: 8.0 * (1.0 - e * e) * dsig2 * s * s,
            b0: 16.0 * dsig2 * s * s * w,
            a2: 4.0 * (1.0 - e * e) * (s * s - 2.0 * p * w),
            b2: 8.0 * (s * s * w - 8.0 * p.powi(3) * (1.0 - e * e)),
            a4: s * (1.0 - e * e),
            b4: 2.0 * s * w,
        }
    }

    /// Per-photon precision from this expansion.
    pub fn value(&self, d: f64) -> f64 {
        let d2 = d * d;
        (self.a0 + d2 * (self.a2 + d2 * self.a4)) / (self.b0 + d2 * (self.b2 + d2 * self.b4))
    }
}

/// The quantities whose vanishing drives the small-separation behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalQuantities {
    /// 1 − ⟨ψ1|ψ2⟩.
    pub u: f64,
    pub chi: f64,
    /// ½ − ξ.
    pub xi_gap: f64,
    /// Length scale 1/√⟨P²⟩ with ⟨P²⟩ the mean of the pair.
    pub scale_v: f64,
}

pub fn critical_quantities(psf1: &Psf, psf2: &Psf) -> CriticalQuantities {
    let m = moment_set(psf1, psf2, 0.0);
    CriticalQuantities {
        u: m.u0,
        chi: m.chi,
        xi_gap: m.xi_gap,
        scale_v: 1.0 / m.kappa_bar().sqrt(),
    }
}

/// How a dimensionless separation was formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DTildeConvention {
    /// d̃ = d·√⟨P²⟩, used by the general regime table.
    Momentum,
    /// d̃ = d/σ̄ with σ̄ the mean Gaussian width, used by the Gaussian table.
    MeanWidth,
}

/// A dimensionless separation tagged with its convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DTilde {
    pub value: f64,
    pub convention: DTildeConvention,
}

impl DTilde {
    pub fn momentum(value: f64) -> Self {
        Self {
            value,
            convention: DTildeConvention::Momentum,
        }
    }

    pub fn mean_width(value: f64) -> Self {
        Self {
            value,
            convention: DTildeConvention::MeanWidth,
        }
    }

    /// Physical separation given ⟨P²⟩ and σ̄.
    pub fn separation(&self, p2: f64, sigma_bar: f64) -> f64 {
        match self.convention {
            DTildeConvention::Momentum => self.value / p2.sqrt(),
            DTildeConvention::MeanWidth => self.value * sigma_bar,
        }
    }

    pub fn from_separation(d: f64, convention: DTildeConvention, p2: f64, sigma_bar: f64) -> Self {
        let value = match convention {
            DTildeConvention::Momentum => d * p2.sqrt(),
            DTildeConvention::MeanWidth => d / sigma_bar,
        };
        Self { value, convention }
    }

    /// Re-expresses the same separation in the other convention.
    pub fn convert(&self, to: DTildeConvention, p2: f64, sigma_bar: f64) -> Self {
        Self::from_separation(self.separation(p2, sigma_bar), to, p2, sigma_bar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::make_gaussian;
    use crate::qcrb::{hd_exact_general, hd_exact_identical, SourceScene};

    fn scene(d: f64, e: f64) -> SourceScene {
        SourceScene::from_eps(0.0, d, e, 1.0).unwrap()
    }

    #[test]
    fn identical_coefficients_of_unit_gaussian() {
        let g = make_gaussian(1.0).unwrap();
        let c0 = coeffs_identical(&g, 0.0).unwrap();
        if let SeriesCoefficients::Identical { d1, .. } = c0 {
            assert_eq!(d1, 0.0);
        }
        for &d in &[1e-3, 0.1, 0.4] {
            assert!((hd_series(&c0, d).unwrap() - 0.25).abs() < 1e-12);
        }
        let c3 = coeffs_identical(&g, 0.3).unwrap();
        match c3 {
            SeriesCoefficients::Identical { c, d1, d2, .. } => {
                assert!((d1 - 0.27).abs() < 1e-12);
                assert!(c > 0.0);
                assert!(d2 * 0.01 / (d1 + d2 * 0.01) < 1.0);
            }
            _ => unreachable!(),
        }
        // (1−ε²)d²/(32ε² + (4 − 8ε²)d²) for σ = 1.
        for &d in &[0.05, 0.2] {
            let e: f64 = 0.3;
            let expect = (1.0 - e * e) * d * d / (32.0 * e * e + (4.0 - 8.0 * e * e) * d * d);
            assert!((hd_series(&c3, d).unwrap() / expect - 1.0).abs() < 1e-12);
        }
        match coeffs_identical(&g, 0.999_999).unwrap() {
            SeriesCoefficients::Identical { c, .. } => assert!(c < 1e-6),
            _ => unreachable!(),
        }
        assert!(coeffs_identical(&g, 1.0).is_err());
    }

    #[test]
    fn general_coefficients_reduce_for_identical_pair() {
        let g = make_gaussian(1.0).unwrap();
        for &e in &[0.0, 0.3] {
            let gen = general_from_moments(moment_set(&g, &g, 0.0), e);
            let idc = coeffs_identical(&g, e).unwrap();
            let (SeriesCoefficients::General { a0, a2, a4, b0, b2, b4, .. }, SeriesCoefficients::Identical { c, d1, d2, .. }) = (gen, idc) else {
                unreachable!()
            };
            assert!(a0.abs() < 1e-12 && b0.abs() < 1e-12 && a2.abs() < 1e-12);
            assert!((a4 + 2.0 * c).abs() < 1e-12);
            assert!((b2 + 2.0 * d1).abs() < 1e-12);
            assert!((b4 + 2.0 * d2).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_normalization_example_and_ratio() {
        let gs = GaussianSeries::new(1.0, 1.2, 0.0);
        assert!((gs.a0 - 1.9052).abs() < 1e-4);
        let c = coeffs_general(&make_gaussian(1.0).unwrap(), &make_gaussian(1.2).unwrap(), 0.0).unwrap();
        let SeriesCoefficients::General { a0, b0, .. } = c else { unreachable!() };
        assert!((a0 / b0 / (gs.a0 / gs.b0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn series_limit_equals_zero_separation_value() {
        let (s1, s2, e) = (1.0, 1.2, 0.3);
        let g1 = make_gaussian(s1).unwrap();
        let g2 = make_gaussian(s2).unwrap();
        let c = coeffs_general(&g1, &g2, e).unwrap();
        let exact = hd_exact_general(&g1, &g2, &scene(0.0, e)).unwrap().h_d;
        assert!((hd_series(&c, 0.0).unwrap() / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn general_series_error_is_sixth_order() {
        let g1 = make_gaussian(1.0).unwrap();
        let g2 = make_gaussian(1.2).unwrap();
        let c = coeffs_general(&g1, &g2, 0.3).unwrap();
        let err = |dt: f64| {
            let d = dt * 1.1;
            let ex = hd_exact_general(&g1, &g2, &scene(d, 0.3)).unwrap().h_d;
            (hd_series(&c, d).unwrap() / ex - 1.0).abs()
        };
        let (e1, e2) = (err(0.2), err(0.1));
        let slope = (e1 / e2).log2();
        assert!((slope - 6.0).abs() < 0.5, "slope {slope}");
    }

    #[test]
    fn identical_series_error_is_second_order() {
        let g = make_gaussian(1.0).unwrap();
        let c = coeffs_identical(&g, 0.3).unwrap();
        let err = |d: f64| {
            let ex = hd_exact_identical(&g, &scene(d, 0.3)).unwrap().h_d;
            (hd_series(&c, d).unwrap() / ex - 1.0).abs()
        };
        assert!(err(0.1) < 0.01);
        let r = err(0.1) / err(0.05);
        assert!((r - 4.0).abs() < 1.0, "ratio {r}");
    }

    #[test]
    fn critical_quantities_of_pairs() {
        let g = make_gaussian(1.0).unwrap();
        let cq = critical_quantities(&g, &g);
        assert_eq!((cq.u, cq.chi, cq.xi_gap), (0.0, 0.0, 0.0));
        assert!((cq.scale_v - 2.0).abs() < 1e-12);
        let us: Vec<f64> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&eta: &f64| {
                let s2 = 1.0 + 2.0 * eta / (1.0 - eta);
                critical_quantities(&g, &make_gaussian(s2).unwrap()).u
            })
            .collect();
        let slope = (us[2] / us[0]).log2() / 2.0;
        assert!((slope - 2.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn d_tilde_conventions_convert() {
        // Equal widths σ: d√κ = d/(2σ).
        let sigma = 1.5;
        let p2 = 0.25 / (sigma * sigma);
        let a = DTilde::mean_width(0.4);
        let b = a.convert(DTildeConvention::Momentum, p2, sigma);
        assert!((b.value - 0.2).abs() < 1e-15);
        assert!((b.separation(p2, sigma) - 0.6).abs() < 1e-15);
    }
}
