//! Overlap and momentum integrals between a PSF and a displaced partner.
//!
//! Quantities that appear in differences of nearly equal numbers (1−δ,
//! the Gram determinants, ½−ξ, κ2−κ1, 1−⟨ψ1|ψ2⟩) are integrated from
//! pointwise differences of the amplitudes so that they keep full relative
//! precision when the two displaced PSFs nearly coincide.

use super::Psf;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use serde::{Deserialize, Serialize};

/// Moment integrals of a PSF pair at one separation `d`, with ψ2 displaced by `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub separation: f64,
    /// ⟨P²⟩ of each PSF, ∫ψ′².
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_tot: f64,
    /// (κ2−κ1)/κ_tot.
    pub chi: f64,
    /// ∫ψ1(x)ψ2(x−d)dx.
    pub delta: f64,
    /// −∫ψ1′(x)ψ2(x−d)dx, positive for identical PSFs at d > 0.
    pub gamma: f64,
    /// ⟨P²⟩₁₂/κ_tot.
    pub xi: f64,
    /// ∫ψ1″ψ2″ at zero displacement.
    pub p4_12: f64,
    /// ∫ψ1′ψ2′ at zero displacement.
    pub p2sq_12: f64,
    /// ∫ψ1″² and ∫ψ2″².
    pub p4_1: f64,
    pub p4_2: f64,
    /// ⟨ψ1|ψ2⟩ at zero displacement.
    pub overlap0: f64,
    /// 1−⟨ψ1|ψ2⟩ at zero displacement.
    pub u0: f64,
    /// ½−ξ.
    pub xi_gap: f64,
    /// 1−δ.
    pub one_minus_delta: f64,
    /// (1−δ²)κ1−γ², the Gram determinant of {ψ1, ψ2(·−d), ψ1′}.
    pub gram1: f64,
    /// (1−δ²)κ2−γ², the Gram determinant of {ψ1, ψ2(·−d), ψ2′(·−d)}.
    pub gram2: f64,
}

impl MomentSet {
    /// 1−δ², evaluated without cancellation.
    pub fn one_minus_delta_sq(&self) -> f64 {
        self.one_minus_delta * (2.0 - self.one_minus_delta)
    }

    /// Mean ⟨P²⟩ of the pair, κ_tot/2.
    pub fn kappa_bar(&self) -> f64 {
        0.5 * self.kappa_tot
    }
}

/// Direct-imaging intensity integrals of a single PSF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectImagingIntegrals {
    /// ∫(I′)²/I.
    pub alpha1: f64,
    /// ∫(I″)²/I.
    pub alpha2: f64,
    /// ∫(I′)⁴/I³.
    pub beta: f64,
}

struct Pair<'a> {
    p1: &'a Psf,
    p2: &'a Psf,
    d: f64,
    lo: f64,
    hi: f64,
    opts: QuadOptions,
}

impl<'a> Pair<'a> {
    fn new(p1: &'a Psf, p2: &'a Psf, d: f64) -> Self {
        let (a1, b1) = p1.support();
        let (a2, b2) = p2.support();
        let lo = a1.min(a2 + d);
        let hi = b1.max(b2 + d);
        let pieces = p1
            .quadrature_pieces(lo, hi)
            .max(p2.quadrature_pieces(lo, hi));
        Self {
            p1,
            p2,
            d,
            lo,
            hi,
            opts: QuadOptions::default().with_pieces(pieces),
        }
    }

    /// ∫ f(ψ1(x), ψ2(x−d)) dx where each argument is (ψ, ψ′, ψ″).
    fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn((f64, f64, f64), (f64, f64, f64)) -> f64,
    {
        integrate(
            |x| f(self.p1.eval(x), self.p2.eval(x - self.d)),
            self.lo,
            self.hi,
            &self.opts,
        )
        .value
    }
}

fn single(psf: &Psf, f: impl Fn((f64, f64, f64)) -> f64) -> f64 {
    let (lo, hi) = psf.support();
    let opts = QuadOptions::default().with_pieces(psf.quadrature_pieces(lo, hi));
    integrate(|x| f(psf.eval(x)), lo, hi, &opts).value
}

/// δ(d) = ∫ψ1(x)ψ2(x−d)dx.
pub fn overlap_delta(psf1: &Psf, psf2: &Psf, d: f64) -> f64 {
    Pair::new(psf1, psf2, d).integrate(|a, b| a.0 * b.0)
}

/// γ(d) = −∫ψ1′(x)ψ2(x−d)dx.
pub fn overlap_gamma(psf1: &Psf, psf2: &Psf, d: f64) -> f64 {
    Pair::new(psf1, psf2, d).integrate(|a, b| -a.1 * (b.0 - a.0))
}

/// ⟨P²⟩ = ∫ψ′² (order 2) or ⟨P⁴⟩ = ∫ψ″² (order 4).
pub fn momentum_moment(psf: &Psf, order: u32) -> Result<f64> {
    match order {
        2 => Ok(single(psf, |v| v.1 * v.1)),
        4 => Ok(single(psf, |v| v.2 * v.2)),
        _ => Err(Error::Domain(format!(
            "momentum moments of order {order} are not supported; use 2 or 4"
        ))),
    }
}

/// (⟨P²⟩₁₂, ⟨P⁴⟩₁₂) = (∫ψ1′ψ2′, ∫ψ1″ψ2″) at zero displacement.
pub fn cross_moments(psf1: &Psf, psf2: &Psf) -> (f64, f64) {
    let pair = Pair::new(psf1, psf2, 0.0);
    (
        pair.integrate(|a, b| a.1 * b.1),
        pair.integrate(|a, b| a.2 * b.2),
    )
}

/// Squared norm of the component of `g` orthogonal to `v`, times 1−δ².
fn gram_det(pair: &Pair, u_d: f64, n2: f64, first: bool) -> f64 {
    if n2 <= 0.0 {
        return 0.0;
    }
    // v2 = ψ_other(displaced) − δ·ψ_self written as a difference plus u_d·ψ_self.
    let v2 = |a: (f64, f64, f64), b: (f64, f64, f64)| -> (f64, f64) {
        if first {
            ((b.0 - a.0) + u_d * a.0, a.1)
        } else {
            ((a.0 - b.0) + u_d * b.0, b.1)
        }
    };
    let proj = pair.integrate(|a, b| {
        let (v, g) = v2(a, b);
        v * g
    });
    let c = proj / n2;
    let rest = pair.integrate(|a, b| {
        let (v, g) = v2(a, b);
        let r = g - c * v;
        r * r
    });
    n2 * rest
}

/// Full set of moments of the pair at separation `d`.
pub fn moment_set(psf1: &Psf, psf2: &Psf, d: f64) -> MomentSet {
    let at0 = Pair::new(psf1, psf2, 0.0);
    let kappa1 = single(psf1, |v| v.1 * v.1);
    let kappa2 = single(psf2, |v| v.1 * v.1);
    let p4_1 = single(psf1, |v| v.2 * v.2);
    let p4_2 = single(psf2, |v| v.2 * v.2);
    let kappa_tot = kappa1 + kappa2;
    let p2sq_12 = at0.integrate(|a, b| a.1 * b.1);
    let p4_12 = at0.integrate(|a, b| a.2 * b.2);
    let u0 = 0.5 * at0.integrate(|a, b| (a.0 - b.0).powi(2));
    let overlap0 = at0.integrate(|a, b| a.0 * b.0);
    let xi_gap = at0.integrate(|a, b| (a.1 - b.1).powi(2)) / (2.0 * kappa_tot);
    let chi = at0.integrate(|a, b| (b.1 - a.1) * (b.1 + a.1)) / kappa_tot;

    let pair = Pair::new(psf1, psf2, d);
    let one_minus_delta = 0.5 * pair.integrate(|a, b| (a.0 - b.0).powi(2));
    let delta = pair.integrate(|a, b| a.0 * b.0);
    let gamma = pair.integrate(|a, b| -a.1 * (b.0 - a.0));
    let n2 = one_minus_delta * (2.0 - one_minus_delta);
    let gram1 = gram_det(&pair, one_minus_delta, n2, true);
    let gram2 = gram_det(&pair, one_minus_delta, n2, false);

    MomentSet {
        separation: d,
        kappa1,
        kappa2,
        kappa_tot,
        chi,
        delta,
        gamma,
        xi: p2sq_12 / kappa_tot,
        p4_12,
        p2sq_12,
        p4_1,
        p4_2,
        overlap0,
        u0,
        xi_gap,
        one_minus_delta,
        gram1,
        gram2,
    }
}

/// α1, α2, β of a single PSF, with tails cut where I < 1e−14·max I.
pub fn direct_integrals(psf: &Psf) -> Result<DirectImagingIntegrals> {
    let (lo, hi) = intensity_window(|x| psf.intensity(x), psf.support(), 1e-14)?;
    // A sign change of ψ inside the window is a zero of I between samples.
    let n = 4000;
    let step = (hi - lo) / n as f64;
    let mut prev = psf.amplitude(lo);
    for i in 1..=n {
        let x = lo + step * i as f64;
        let cur = psf.amplitude(x);
        if prev * cur <= 0.0 {
            return Err(Error::SingularIntegrand { at: x });
        }
        prev = cur;
    }
    let opts = QuadOptions::default().with_pieces(psf.quadrature_pieces(lo, hi));
    let alpha1 = integrate(|x| 4.0 * psf.deriv(x).powi(2), lo, hi, &opts).value;
    let alpha2 = integrate(
        |x| {
            let (a, b, c) = psf.eval(x);
            4.0 * (b * b + a * c).powi(2) / (a * a)
        },
        lo,
        hi,
        &opts,
    )
    .value;
    let beta = integrate(
        |x| {
            let (a, b, _) = psf.eval(x);
            16.0 * b.powi(4) / (a * a)
        },
        lo,
        hi,
        &opts,
    )
    .value;
    Ok(DirectImagingIntegrals {
        alpha1,
        alpha2,
        beta,
    })
}

/// Interval on which `intensity ≥ rel_floor·max`, rejecting interior zeros.
pub(crate) fn intensity_window(
    intensity: impl Fn(f64) -> f64,
    (a, b): (f64, f64),
    rel_floor: f64,
) -> Result<(f64, f64)> {
    const SAMPLES: usize = 4000;
    let step = (b - a) / SAMPLES as f64;
    let xs: Vec<f64> = (0..=SAMPLES).map(|i| a + step * i as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| intensity(x)).collect();
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Domain("intensity vanishes everywhere".into()));
    }
    let floor = rel_floor * peak;
    let first = vals.iter().position(|&v| v >= floor).unwrap_or(0);
    let last = vals.iter().rposition(|&v| v >= floor).unwrap_or(SAMPLES);
    if let Some(k) = (first..=last).find(|&k| vals[k] < floor) {
        return Err(Error::SingularIntegrand { at: xs[k] });
    }
    let edge = |inside: f64, outside: f64| {
        let (mut i, mut o) = (inside, outside);
        for _ in 0..60 {
            let m = 0.5 * (i + o);
            if intensity(m) >= floor {
                i = m;
            } else {
                o = m;
            }
        }
        i
    };
    let lo = if first == 0 { a } else { edge(xs[first], xs[first - 1]) };
    let hi = if last == SAMPLES { b } else { edge(xs[last], xs[last + 1]) };
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::{make_gaussian, make_perturbed, PerturbationMix};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn gauss_delta(s1: f64, s2: f64, d: f64) -> f64 {
        let s = s1 * s1 + s2 * s2;
        (2.0 * s1 * s2 / s).sqrt() * (-d * d / (4.0 * s)).exp()
    }

    fn gauss_gamma(s1: f64, s2: f64, d: f64) -> f64 {
        let s = s1 * s1 + s2 * s2;
        d * (s1 * s2 / (2.0 * s.powi(3))).sqrt() * (-d * d / (4.0 * s)).exp()
    }

    #[test]
    fn overlap_examples() {
        let g1 = make_gaussian(1.0).unwrap();
        let g2 = make_gaussian(2.0).unwrap();
        assert!((overlap_delta(&g1, &g1, 0.0) - 1.0).abs() < 1e-13);
        assert!((overlap_delta(&g1, &g1, 2.0) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((overlap_delta(&g1, &g2, 0.0) - 0.8f64.sqrt()).abs() < 1e-12);
        assert!(overlap_gamma(&g1, &g2, 0.0).abs() < 1e-15);
        assert!((overlap_gamma(&g1, &g1, 1.0) - 0.25 * (-0.125f64).exp()).abs() < 1e-12);
        assert!((overlap_gamma(&g1, &g1, 1e-4) / 1e-4 - 0.25).abs() < 1e-8);
    }

    #[test]
    fn gaussian_closed_forms_over_widths_and_separations() {
        for &s1 in &[0.5, 0.9, 1.4, 2.0] {
            for &s2 in &[0.5, 1.0, 1.7, 2.0] {
                let p1 = make_gaussian(s1).unwrap();
                let p2 = make_gaussian(s2).unwrap();
                for &d in &[0.0, 0.3, 1.0, 2.5, 5.0] {
                    let m = moment_set(&p1, &p2, d);
                    assert!(rel(m.delta, gauss_delta(s1, s2, d)) < 1e-8);
                    if d > 0.0 {
                        assert!(rel(m.gamma, gauss_gamma(s1, s2, d)) < 1e-8);
                    }
                    assert!(rel(m.kappa1, 0.25 / (s1 * s1)) < 1e-8);
                    assert!(rel(m.kappa2, 0.25 / (s2 * s2)) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn momentum_moments_of_unit_gaussian() {
        let g = make_gaussian(1.0).unwrap();
        let p2 = momentum_moment(&g, 2).unwrap();
        let p4 = momentum_moment(&g, 4).unwrap();
        assert!((p2 - 0.25).abs() < 1e-13);
        assert!((p4 - 0.1875).abs() < 1e-13);
        assert!((p4 - p2 * p2 - 0.125).abs() < 1e-13);
        assert!(momentum_moment(&g, 3).is_err());
    }

    #[test]
    fn cross_moments_match_overlap_curvature() {
        let p1 = make_gaussian(1.0).unwrap();
        let p2 = make_gaussian(1.2).unwrap();
        let (p2_12, _) = cross_moments(&p1, &p2);
        // δ(d) ≈ δ0 − ½⟨P²⟩₁₂d² + c d⁴; fit from three separations.
        let ds = [0.01, 0.02, 0.04];
        let d0 = overlap_delta(&p1, &p2, 0.0);
        let ys: Vec<f64> = ds.iter().map(|&d| (overlap_delta(&p1, &p2, d) - d0) / (d * d)).collect();
        // ys = −½p + c d²: eliminate c with the first two points.
        let slope = (ys[1] - ys[0]) / (ds[1] * ds[1] - ds[0] * ds[0]);
        let fitted = -2.0 * (ys[0] - slope * ds[0] * ds[0]);
        assert!(rel(fitted, p2_12) < 1e-5, "{fitted} {p2_12}");
        let g = make_gaussian(1.0).unwrap();
        let (a, b) = cross_moments(&g, &g);
        assert!((a - 0.25).abs() < 1e-13 && (b - 0.1875).abs() < 1e-13);
    }

    #[test]
    fn moment_set_identical_at_zero() {
        let g = make_gaussian(1.0).unwrap();
        let m = moment_set(&g, &g, 0.0);
        assert!((m.delta - 1.0).abs() < 1e-13);
        assert_eq!(m.gamma, 0.0);
        assert_eq!(m.chi, 0.0);
        assert!((m.xi - 0.5).abs() < 1e-13);
        assert_eq!(m.u0, 0.0);
        assert_eq!(m.gram1, 0.0);
    }

    #[test]
    fn moment_set_chi_for_unequal_widths() {
        let m = moment_set(&make_gaussian(1.0).unwrap(), &make_gaussian(2.0).unwrap(), 0.7);
        assert!((m.chi + 0.6).abs() < 1e-12);
    }

    #[test]
    fn stable_quantities_agree_with_plain_formulas() {
        let p1 = make_gaussian(1.0).unwrap();
        let p2 = make_gaussian(1.2).unwrap();
        let m = moment_set(&p1, &p2, 0.5);
        let n2 = 1.0 - m.delta * m.delta;
        assert!(rel(m.one_minus_delta_sq(), n2) < 1e-10);
        assert!(rel(m.gram1, n2 * m.kappa1 - m.gamma * m.gamma) < 1e-8);
        assert!(rel(m.gram2, n2 * m.kappa2 - m.gamma * m.gamma) < 1e-8);
        assert!(rel(m.xi_gap, 0.5 - m.xi) < 1e-10);
        assert!(rel(m.chi, (m.kappa2 - m.kappa1) / m.kappa_tot) < 1e-12);
        assert!(rel(m.u0, 1.0 - m.overlap0) < 1e-10);
    }

    #[test]
    fn perturbed_overlap_is_cosine() {
        let base = make_gaussian(1.0).unwrap();
        let p = make_perturbed(&base, 0.1, PerturbationMix::hg2()).unwrap();
        let m = moment_set(&base, &p, 0.0);
        assert!(rel(m.u0, 1.0 - 0.1f64.cos()) < 1e-10);
        assert!((m.u0 - 4.9958e-3).abs() < 1e-7);
    }

    #[test]
    fn direct_integrals_of_gaussians() {
        let d1 = direct_integrals(&make_gaussian(1.0).unwrap()).unwrap();
        assert!(rel(d1.alpha1, 1.0) < 1e-8);
        assert!(rel(d1.alpha2, 2.0) < 1e-8);
        assert!(rel(d1.beta, 3.0) < 1e-8);
        let d2 = direct_integrals(&make_gaussian(2.0).unwrap()).unwrap();
        assert!(rel(d2.alpha2, 0.125) < 1e-8);
    }

    #[test]
    fn direct_integrals_reject_interior_zero() {
        let base = make_gaussian(1.0).unwrap();
        let p = make_perturbed(&base, 0.5, PerturbationMix { hg2: -1.0, hg4: 0.0 }).unwrap();
        assert!(matches!(direct_integrals(&p), Err(Error::SingularIntegrand { .. })));
    }
}
