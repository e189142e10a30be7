//! Closed forms for two Gaussian PSFs of widths σ1, σ2.
//!
//! Ratios are relative to H_d^opt = N_tot/(4σ̄²) with σ̄ = (σ1+σ2)/2, and the
//! separation is measured as d̃ = d/σ̄. The width asymmetry is
//! η = (σ2−σ1)/(σ1+σ2).

mod lambert;

pub use lambert::lambert_w0;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Two Gaussian widths and a photon-number imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianScene {
    sigma1: f64,
    sigma2: f64,
    eps: f64,
}

impl GaussianScene {
    pub fn new(sigma1: f64, sigma2: f64, eps: f64) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
            return Err(Error::Domain("Gaussian widths must be positive and finite".into()));
        }
        check_eps(eps)?;
        Ok(Self { sigma1, sigma2, eps })
    }

    /// Scene with σ̄ = 1 and the given asymmetry.
    pub fn from_eta(eta: f64, eps: f64) -> Result<Self> {
        check_eta(eta)?;
        Self::new(1.0 - eta, 1.0 + eta, eps)
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eta(&self) -> f64 {
        (self.sigma2 - self.sigma1) / (self.sigma1 + self.sigma2)
    }

    pub fn sigma_bar(&self) -> f64 {
        0.5 * (self.sigma1 + self.sigma2)
    }

    pub fn d_tilde(&self, d: f64) -> f64 {
        d / self.sigma_bar()
    }
}

/// N_tot/(4σ̄²).
pub fn h_opt(n_tot: f64, sigma_bar: f64) -> f64 {
    n_tot / (4.0 * sigma_bar * sigma_bar)
}

/// A precision ratio together with the flags of the degenerate points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianRatio {
    pub value: f64,
    /// The precision vanishes at zero separation.
    pub curse: bool,
    /// The point (η = 0, d̃ = 0, ε ≠ 0) where the iterated limits differ.
    /// `value` is then the limit taken along η = 0.
    pub ambiguous: bool,
}

impl GaussianRatio {
    fn regular(value: f64) -> Self {
        Self {
            value,
            curse: false,
            ambiguous: false,
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("imbalance must lie in (-1, 1), got {eps}")))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("width asymmetry must lie in (-1, 1), got {eta}")))
    }
}

fn check_d(d_tilde: f64) -> Result<()> {
    if d_tilde >= 0.0 && !d_tilde.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!("separation must be non-negative, got {d_tilde}")))
    }
}

/// e^y − 1 − y without cancellation for small y.
fn expm1_minus(y: f64) -> f64 {
    if y.abs() < 0.1 {
        let mut term = y * y / 2.0;
        let mut sum = term;
        for k in 3..30 {
            term *= y / k as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        y.exp_m1() - y
    }
}

/// Exact ratio for equal widths.
pub fn ratio_samewidth(eps: f64, d_tilde: f64) -> Result<GaussianRatio> {
    check_eps(eps)?;
    check_d(d_tilde)?;
    if d_tilde == 0.0 {
        return Ok(if eps == 0.0 {
            GaussianRatio::regular(1.0)
        } else {
            GaussianRatio {
                value: 0.0,
                curse: true,
                ambiguous: false,
            }
        });
    }
    if d_tilde.is_infinite() {
        return Ok(GaussianRatio::regular(1.0 - eps * eps));
    }
    let g = 4.0 * expm1_minus(0.25 * d_tilde * d_tilde);
    let value = if g.is_infinite() {
        1.0 - eps * eps
    } else {
        (1.0 - eps * eps) * g / (g + eps * eps * d_tilde * d_tilde)
    };
    Ok(GaussianRatio::regular(value))
}

/// Leading small-separation form (1−ε²)d̃²/(8ε²+d̃²) for equal widths.
pub fn ratio_samewidth_small_d(eps: f64, d_tilde: f64) -> Result<GaussianRatio> {
    check_eps(eps)?;
    check_d(d_tilde)?;
    if d_tilde == 0.0 {
        return ratio_samewidth(eps, 0.0);
    }
    let d2 = d_tilde * d_tilde;
    Ok(GaussianRatio::regular((1.0 - eps * eps) * d2 / (8.0 * eps * eps + d2)))
}

/// Exact ratio for arbitrary widths.
pub fn ratio_general(scene: &GaussianScene, d_tilde: f64) -> Result<GaussianRatio> {
    ratio_eta(scene.eta(), scene.eps(), d_tilde)
}

/// [`ratio_general`] parametrized directly by (η, ε).
pub fn ratio_eta(eta: f64, eps: f64, d_tilde: f64) -> Result<GaussianRatio> {
    check_eta(eta)?;
    check_eps(eps)?;
    check_d(d_tilde)?;
    if eta == 0.0 {
        let mut r = ratio_samewidth(eps, d_tilde)?;
        r.ambiguous = r.curse;
        return Ok(r);
    }
    let e2 = eta * eta;
    let s = 1.0 + e2;
    let q = 1.0 - 2.0 * eta * eps + e2;
    let y = d_tilde * d_tilde / (4.0 * s);
    if y > 600.0 {
        return Ok(GaussianRatio::regular(limit_large_separation(eta, eps)?));
    }
    let d2 = d_tilde * d_tilde;
    let core = s * expm1_minus(y) + 2.0 * e2;
    let eps2 = eps * eps;
    let p = eps2 - 2.0 * eta * eps + 6.0 * e2 - 4.0 * e2 * eta * eps - 3.0 * e2 * eps2
        + 3.0 * e2 * e2 * eps2
        - 2.0 * e2 * e2 * eta * eps
        + 2.0 * e2 * e2 * e2
        - e2 * e2 * e2 * eps2;
    let num = (1.0 - eps2)
        * (4.0 * s * s * core + 2.0 * eta * d2 * ((eta + eps) + e2 * (eta - eps)));
    let den = 4.0 * s * s * q * core + d2 * p;
    Ok(GaussianRatio::regular(num / den))
}

/// Value of the ratio at d̃ → ∞, which equals its value at d̃ = 0 when η ≠ 0.
pub fn limit_large_separation(eta: f64, eps: f64) -> Result<f64> {
    check_eta(eta)?;
    check_eps(eps)?;
    Ok((1.0 - eps * eps) / (eta * eta - 2.0 * eta * eps + 1.0))
}

/// Stationary points of the ratio in d̃ for η ≠ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremePoints {
    pub d_tilde_1: f64,
    pub d_tilde_2: f64,
    /// Small-η estimate 2√(2|η|) of `d_tilde_2`.
    pub approx: f64,
    /// W0[(η²−1)/(e(η²+1))].
    pub w0: f64,
}

/// Solves 1 − (1−v)e^v = t for v ∈ (0, 1), i.e. v = w0 + 1.
///
/// Near the branch point w0 + 1 is tiny, so it is found directly instead of
/// subtracting 1 from a W0 value.
fn branch_offset(t: f64) -> f64 {
    let phi = |v: f64| -> f64 {
        if v < 0.5 {
            let mut term = v;
            let mut sum = 0.0;
            for k in 2..40 {
                term *= v / k as f64;
                sum += (k - 1) as f64 * term;
                if term < 1e-18 * sum {
                    break;
                }
            }
            sum
        } else {
            1.0 - (1.0 - v) * v.exp()
        }
    };
    let mut v = (2.0 * t).sqrt().min(1.0);
    for _ in 0..100 {
        let step = (phi(v) - t) / (v * v.exp());
        let next = (v - step).clamp(0.5 * v, 1.0);
        let done = (next - v).abs() <= 1e-16 * v;
        v = next;
        if done {
            break;
        }
    }
    v
}

/// d̃₁ = 0 and d̃₂ = 2√(η²+1)·√(w0+1).
pub fn extreme_points(eta: f64) -> Result<ExtremePoints> {
    check_eta(eta)?;
    if eta == 0.0 {
        return Err(Error::Domain(
            "equal widths have a single extremum at zero separation; use extreme_point_samewidth".into(),
        ));
    }
    let e2 = eta * eta;
    let v = branch_offset(2.0 * e2 / (1.0 + e2));
    Ok(ExtremePoints {
        d_tilde_1: 0.0,
        d_tilde_2: 2.0 * (1.0 + e2).sqrt() * v.sqrt(),
        approx: 2.0 * (2.0 * eta.abs()).sqrt(),
        w0: v - 1.0,
    })
}

/// The only extremum for equal widths, at d̃ = 0.
pub fn extreme_point_samewidth() -> f64 {
    0.0
}

/// Nature of a stationary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremumKind {
    Maximum,
    Minimum,
    /// The curve is flat: ε = 2η/(1+η²) makes the ratio independent of d̃.
    Flat,
}

/// A labelled stationary point of the ratio curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub d_tilde: f64,
    pub kind: ExtremumKind,
    pub value: f64,
    /// ∂²ratio/∂d̃² at the point.
    pub second_derivative: f64,
}

/// ε for which the ratio does not depend on d̃.
fn flat_eps(eta: f64) -> f64 {
    2.0 * eta / (1.0 + eta * eta)
}

/// Value of the ratio at the interior minimum d̃₂.
pub fn minimal_value(eta: f64, eps: f64, w0: f64) -> f64 {
    let e2 = eta * eta;
    let q = e2 - 2.0 * eta * eps + 1.0;
    let one_m = 1.0 - eps * eps;
    one_m * (e2 + w0 * q + 1.0) / ((1.0 - e2).powi(2) * one_m * w0 + (1.0 + e2) * q)
}

/// Locates and labels the stationary points of d̃ ↦ ratio.
pub fn classify_extrema(eta: f64, eps: f64) -> Result<Vec<Extremum>> {
    check_eta(eta)?;
    check_eps(eps)?;
    let e2 = eta * eta;
    if eta == 0.0 {
        if eps == 0.0 {
            return Ok(vec![Extremum {
                d_tilde: 0.0,
                kind: ExtremumKind::Flat,
                value: 1.0,
                second_derivative: 0.0,
            }]);
        }
        // Ratio ≈ (1−ε²)d̃²/(8ε²) near zero.
        return Ok(vec![Extremum {
            d_tilde: 0.0,
            kind: ExtremumKind::Minimum,
            value: 0.0,
            second_derivative: (1.0 / (eps * eps) - 1.0) / 4.0,
        }]);
    }
    let q = e2 - 2.0 * eta * eps + 1.0;
    let lever = eps - 2.0 * eta + e2 * eps;
    let curv0 = -(1.0 - e2) * (1.0 - eps * eps) * lever * lever
        / (4.0 * e2 * (1.0 + e2).powi(2) * q * q);
    let top = limit_large_separation(eta, eps)?;
    let pts = extreme_points(eta)?;
    let flat = lever == 0.0 || (eps - flat_eps(eta)).abs() <= 1e-15;
    let low = minimal_value(eta, eps, pts.w0);
    let h = 1e-3 * pts.d_tilde_2.max(1e-3);
    let f = |x: f64| ratio_eta(eta, eps, x).map(|r| r.value);
    let curv2 = (f(pts.d_tilde_2 + h)? - 2.0 * f(pts.d_tilde_2)? + f(pts.d_tilde_2 - h)?) / (h * h);
    let kind = |k: ExtremumKind| if flat { ExtremumKind::Flat } else { k };
    Ok(vec![
        Extremum {
            d_tilde: 0.0,
            kind: kind(ExtremumKind::Maximum),
            value: top,
            second_derivative: curv0,
        },
        Extremum {
            d_tilde: pts.d_tilde_2,
            kind: kind(ExtremumKind::Minimum),
            value: low,
            second_derivative: if flat { 0.0 } else { curv2 },
        },
    ])
}

/// The two iterated limits of the ratio at (η, d̃) → (0, 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discontinuity {
    pub eps: f64,
    /// lim_{d̃→0} lim_{η→0}.
    pub limit_eta_first: f64,
    /// lim_{η→0} lim_{d̃→0}.
    pub limit_d_first: f64,
    pub witnesses: Vec<LimitWitness>,
}

impl Discontinuity {
    pub fn is_discontinuous(&self) -> bool {
        self.limit_eta_first != self.limit_d_first
    }
}

/// A numerical evaluation close to one of the iterated limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitWitness {
    pub eta: f64,
    pub d_tilde: f64,
    pub ratio: f64,
    /// Which limit it approaches.
    pub eta_first: bool,
}

/// Nested evaluation points: (small, large) pairs at two successive decades.
pub const WITNESS_SCHEDULE: [(f64, f64); 2] = [(1e-8, 1e-3), (1e-9, 1e-4)];

/// Iterated limits at ε, with numerical witnesses on [`WITNESS_SCHEDULE`].
pub fn discontinuity_probe(eps: f64) -> Result<Discontinuity> {
    check_eps(eps)?;
    let limit_eta_first = if eps == 0.0 { 1.0 } else { 0.0 };
    let limit_d_first = 1.0 - eps * eps;
    let mut witnesses = Vec::new();
    for &(small, large) in &WITNESS_SCHEDULE {
        witnesses.push(LimitWitness {
            eta: small,
            d_tilde: large,
            ratio: ratio_eta(small, eps, large)?.value,
            eta_first: true,
        });
        witnesses.push(LimitWitness {
            eta: large,
            d_tilde: small,
            ratio: ratio_eta(large, eps, small)?.value,
            eta_first: false,
        });
    }
    Ok(Discontinuity {
        eps,
        limit_eta_first,
        limit_d_first,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(eta: f64, eps: f64, d: f64) -> f64 {
        ratio_eta(eta, eps, d).unwrap().value
    }

    #[test]
    fn samewidth_balanced_is_optimal() {
        for &d in &[1e-6, 0.01, 0.5, 3.0, 40.0] {
            assert!((ratio_samewidth(0.0, d).unwrap().value - 1.0).abs() < 1e-15);
        }
        assert_eq!(ratio_samewidth(0.0, 0.0).unwrap().value, 1.0);
        let z = ratio_samewidth(0.4, 0.0).unwrap();
        assert!(z.curse && z.value == 0.0);
    }

    #[test]
    fn samewidth_matches_literal_formula() {
        for &(eps, d) in &[(0.3, 1.0), (-0.7, 2.5), (0.9, 0.4)] {
            let e: f64 = (d * d / 4.0_f64).exp();
            let lit = (4.0 * e - d * d - 4.0) * (1.0 - eps * eps) / (4.0 * e - d * d * (1.0 - eps * eps) - 4.0);
            assert!((ratio_samewidth(eps, d).unwrap().value - lit).abs() < 1e-13);
        }
    }

    #[test]
    fn small_d_form() {
        let v = ratio_samewidth_small_d(0.1, 0.2).unwrap().value;
        assert!((v - 0.33).abs() < 1e-12);
        let exact = ratio_samewidth(0.1, 0.2).unwrap().value;
        assert!((exact - v).abs() / v < 0.01);
    }

    #[test]
    fn scaled_imbalance_limit() {
        // ε = d̃ → 1/9 as d̃ → 0.
        let v = ratio_samewidth(1e-4, 1e-4).unwrap().value;
        assert!((v - 1.0 / 9.0).abs() < 1e-6);
    }

    #[test]
    fn general_reduces_to_samewidth() {
        for &eps in &[0.0, 0.3, -0.8] {
            for &d in &[1e-3, 0.2, 1.0, 4.0] {
                let a = r(0.0, eps, d);
                let b = ratio_samewidth(eps, d).unwrap().value;
                assert!((a - b).abs() < 1e-12);
                if d < 0.1 {
                    // The (η, d̃) → 0 corner is discontinuous, so skip it here.
                    continue;
                }
                let c = r(1e-12, eps, d);
                assert!((c - b).abs() < 1e-9 * b.max(1e-3), "{eps} {d}: {c} {b}");
            }
        }
        let z = ratio_eta(0.0, 0.5, 0.0).unwrap();
        assert!(z.ambiguous && z.curse);
    }

    #[test]
    fn zero_separation_limits() {
        for &(eta, eps) in &[(0.1, 0.3), (-0.4, 0.2), (0.3, 0.3)] {
            let expect = (1.0 - eps * eps) / (1.0 - 2.0 * eta * eps + eta * eta);
            assert!((r(eta, eps, 0.0) - expect).abs() < 1e-14);
            assert!((r(eta, eps, 50.0) - expect).abs() < 1e-6);
            assert!((r(eta, eps, 1e5) - expect).abs() < 1e-14);
        }
        assert!((r(0.3, 0.3, 0.0) - 1.0).abs() < 1e-15);
        assert!((limit_large_separation(0.1, 0.0).unwrap() - 1.0 / 1.01).abs() < 1e-15);
    }

    #[test]
    fn extremum_location() {
        let p = extreme_points(0.005).unwrap();
        assert!((p.d_tilde_2 - 0.2).abs() / 0.2 < 0.02);
        assert!((p.d_tilde_2 - p.approx).abs() / p.d_tilde_2 < 0.02);
        let wx = (0.005f64.powi(2) - 1.0) / (std::f64::consts::E * (0.005f64.powi(2) + 1.0));
        let w = lambert_w0(wx).unwrap();
        assert!((w - p.w0).abs() < 1e-9);
        assert!(extreme_points(0.0).is_err());
    }

    #[test]
    fn derivative_vanishes_at_interior_extremum() {
        for &eta in &[0.005, 0.01, 0.1, -0.3, 0.7] {
            let p = extreme_points(eta).unwrap();
            let h = 1e-4 * p.d_tilde_2;
            for &eps in &[0.3, -0.5] {
                let der = (r(eta, eps, p.d_tilde_2 + h) - r(eta, eps, p.d_tilde_2 - h)) / (2.0 * h);
                assert!(der.abs() < 1e-8, "{eta} {eps}: {der}");
            }
        }
    }

    #[test]
    fn extremal_values_match_closed_forms() {
        for &(eta, eps) in &[(0.1, 0.3), (0.3, -0.5), (0.005, 0.3), (-0.2, 0.6)] {
            let ex = classify_extrema(eta, eps).unwrap();
            assert_eq!(ex[0].kind, ExtremumKind::Maximum);
            assert_eq!(ex[1].kind, ExtremumKind::Minimum);
            assert!((ex[1].value - r(eta, eps, ex[1].d_tilde)).abs() < 1e-10);
            assert!((ex[0].value - r(eta, eps, 0.0)).abs() < 1e-12);
            assert!(ex[1].second_derivative > 0.0);
        }
    }

    #[test]
    fn second_derivative_at_zero() {
        let ex = classify_extrema(0.1, 0.3).unwrap();
        let h = 1e-3;
        let fd = 2.0 * (r(0.1, 0.3, h) - r(0.1, 0.3, 0.0)) / (h * h);
        assert!((ex[0].second_derivative - fd).abs() < 1e-4 * fd.abs());
        let e0 = classify_extrema(0.0, 0.5).unwrap();
        assert_eq!(e0.len(), 1);
        assert_eq!(e0[0].kind, ExtremumKind::Minimum);
        let fd0 = 2.0 * ratio_samewidth(0.5, h).unwrap().value / (h * h);
        assert!((e0[0].second_derivative - fd0).abs() < 1e-4);
    }

    #[test]
    fn flat_curve() {
        let eta = 0.2;
        let eps = 2.0 * eta / (1.0 + eta * eta);
        let ex = classify_extrema(eta, eps).unwrap();
        assert!(ex.iter().all(|e| e.kind == ExtremumKind::Flat));
        assert!((r(eta, eps, 0.7) - r(eta, eps, 3.0)).abs() < 1e-13);
    }

    #[test]
    fn discontinuity_witnesses() {
        let p = discontinuity_probe(0.5).unwrap();
        assert!(p.is_discontinuous());
        assert_eq!(p.limit_eta_first, 0.0);
        assert!((p.limit_d_first - 0.75).abs() < 1e-15);
        for w in &p.witnesses {
            let target = if w.eta_first { p.limit_eta_first } else { p.limit_d_first };
            assert!((w.ratio - target).abs() < 1e-3, "{w:?}");
        }
        let p0 = discontinuity_probe(0.0).unwrap();
        assert!(!p0.is_discontinuous());
        for w in &p0.witnesses {
            assert!((w.ratio - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn scene_conventions() {
        let s = GaussianScene::new(1.0, 1.2, 0.3).unwrap();
        assert!((s.eta() - 0.2 / 2.2).abs() < 1e-15);
        assert!((s.sigma_bar() - 1.1).abs() < 1e-15);
        assert!((s.d_tilde(2.2) - 2.0).abs() < 1e-15);
        assert!(GaussianScene::new(1.0, 0.0, 0.0).is_err());
        assert!(GaussianScene::new(1.0, 1.0, -1.0).is_err());
        assert!((h_opt(100.0, 0.5) - 100.0).abs() < 1e-12);
    }
}
