//! Fisher matrices and separation precisions of the three estimation models:
//! direct imaging, quantum with known photon numbers, and quantum with an
//! unknown imbalance.

use super::{FisherMatrix, Method, Model, Param, PrecisionReport, SourceScene};
use crate::error::Result;
use crate::psf::{moment_set, momentum_moment, MomentSet, Psf};
use crate::quadrature::{integrate, QuadOptions};
use crate::smalld::{coeffs_from_moments, hd_series};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Relative size of the precision denominator below which the small-separation
/// series replaces the closed form.
const SERIES_SWITCH: f64 = 1e-10;

fn weights(eps: f64) -> (f64, f64) {
    (0.5 * (1.0 - eps), 0.5 * (1.0 + eps))
}

/// Per-photon precision of the unknown-imbalance model from a moment set.
///
/// Uses H/N = (1−ε²)·Δ_N/Δ_D with
/// Δ_N = ½(1+ε)κ2·G1 + ½(1−ε)κ1·G2 and Δ_D = ½(1−ε)G1 + ½(1+ε)G2 + ε²γ²,
/// where G1, G2 are the Gram determinants stored in the moment set. This is
/// algebraically the usual rational form but free of cancellation at small d.
/// Returns the value, the evaluation method and the curse flag.
pub fn hd_from_moments(m: &MomentSet, eps: f64) -> Result<(f64, Method, bool)> {
    let (a, b) = weights(eps);
    let dn = b * m.kappa2 * m.gram1 + a * m.kappa1 * m.gram2;
    let dd = a * m.gram1 + b * m.gram2 + eps * eps * m.gamma * m.gamma;
    if dd >= SERIES_SWITCH * m.kappa_bar() {
        return Ok(((1.0 - eps * eps) * dn / dd, Method::ClosedForm, false));
    }
    let d = m.separation;
    let coeffs = coeffs_from_moments(m, eps);
    let h = hd_series(&coeffs, d)?;
    Ok((h, Method::Series, d == 0.0 && eps != 0.0 && h == 0.0))
}

/// The unknown-imbalance precision per photon evaluated literally as
/// κt(1−ε²)[(1−δ²)(1−χ²)κt−2γ²(1+χε)] / [2κt(1−δ²)(1+χε)−4γ²(1−ε²)].
///
/// Loses accuracy at small separations; kept as an independent route for tests.
pub fn hd_literal_general(m: &MomentSet, eps: f64) -> f64 {
    let kt = m.kappa_tot;
    let chi = m.chi;
    let n2 = 1.0 - m.delta * m.delta;
    let g2 = m.gamma * m.gamma;
    kt * (1.0 - eps * eps) * (n2 * (1.0 - chi * chi) * kt - 2.0 * g2 * (1.0 + chi * eps))
        / (2.0 * kt * n2 * (1.0 + chi * eps) - 4.0 * g2 * (1.0 - eps * eps))
}

/// Quantum Fisher matrix over (X̄, d) when both photon numbers are known.
pub fn qfi_known(psf: &Psf, scene: &SourceScene) -> Result<FisherMatrix> {
    let m = moment_set(psf, psf, scene.separation());
    let k = m.kappa1;
    let e = scene.eps();
    let q = DMatrix::from_row_slice(
        2,
        2,
        &[
            4.0 * k - 4.0 * m.gamma * m.gamma * (1.0 - e * e),
            2.0 * k * e,
            2.0 * k * e,
            k,
        ],
    );
    FisherMatrix::new(vec![Param::Centroid, Param::Separation], q)
}

fn imbalance_block(m: &MomentSet, eps: f64) -> f64 {
    m.one_minus_delta_sq() / (1.0 - eps * eps)
}

/// Quantum Fisher matrix over (X̄, d, ε) for identical PSFs.
pub fn qfi_unknown_identical(psf: &Psf, scene: &SourceScene) -> Result<FisherMatrix> {
    let m = moment_set(psf, psf, scene.separation());
    let k = m.kappa1;
    let e = scene.eps();
    let gd = 2.0 * m.gamma * m.delta;
    let q = DMatrix::from_row_slice(
        3,
        3,
        &[
            4.0 * k - 4.0 * m.gamma * m.gamma * (1.0 - e * e),
            2.0 * k * e,
            gd,
            2.0 * k * e,
            k,
            0.0,
            gd,
            0.0,
            imbalance_block(&m, e),
        ],
    );
    let f = FisherMatrix::new(vec![Param::Centroid, Param::Separation, Param::Imbalance], q)?;
    Ok(flag_zero_separation(f, &m))
}

/// Quantum Fisher matrix over (X̄, d, ε) for two arbitrary real PSFs.
pub fn qfi_unknown_general(psf1: &Psf, psf2: &Psf, scene: &SourceScene) -> Result<FisherMatrix> {
    let m = moment_set(psf1, psf2, scene.separation());
    Ok(flag_zero_separation(qfi_general_from_moments(&m, scene.eps())?, &m))
}

pub(crate) fn qfi_general_from_moments(m: &MomentSet, e: f64) -> Result<FisherMatrix> {
    let kt = m.kappa_tot;
    let chi = m.chi;
    let gd = 2.0 * m.gamma * m.delta;
    let q = DMatrix::from_row_slice(
        3,
        3,
        &[
            2.0 * kt * (1.0 + chi * e) - 4.0 * m.gamma * m.gamma * (1.0 - e * e),
            kt * (chi + e),
            gd,
            kt * (chi + e),
            0.5 * kt * (1.0 + chi * e),
            0.0,
            gd,
            0.0,
            imbalance_block(m, e),
        ],
    );
    FisherMatrix::new(vec![Param::Centroid, Param::Separation, Param::Imbalance], q)
}

fn flag_zero_separation(f: FisherMatrix, m: &MomentSet) -> FisherMatrix {
    if m.one_minus_delta == 0.0 {
        f.with_note(
            "displaced PSFs coincide: the imbalance entry vanishes and the matrix is singular",
        )
    } else {
        f
    }
}

fn photon_fisher(
    psf1: &Psf,
    psf2: &Psf,
    scene: &SourceScene,
    with_imbalance: bool,
) -> Result<FisherMatrix> {
    let (w1, w2) = weights(scene.eps());
    let (x1, x2) = (scene.x1(), scene.x2());
    let lambda = |x: f64| w1 * psf1.intensity(x - x1) + w2 * psf2.intensity(x - x2);
    let (a1, b1) = psf1.support();
    let (a2, b2) = psf2.support();
    let (lo, hi) = crate::psf::intensity_window(
        lambda,
        ((a1 + x1).min(a2 + x2), (b1 + x1).max(b2 + x2)),
        1e-14,
    )?;
    let pieces = psf1
        .quadrature_pieces(lo, hi)
        .max(psf2.quadrature_pieces(lo, hi));
    let opts = QuadOptions::default().with_pieces(pieces);
    // Scores ∂Λ for (X̄, d, ε) at x.
    let grads = |x: f64| -> ([f64; 3], f64) {
        let (p1, q1, _) = psf1.eval(x - x1);
        let (p2, q2, _) = psf2.eval(x - x2);
        let (i1, i2) = (p1 * p1, p2 * p2);
        let (di1, di2) = (2.0 * p1 * q1, 2.0 * p2 * q2);
        let lam = w1 * i1 + w2 * i2;
        (
            [
                -w1 * di1 - w2 * di2,
                0.5 * w1 * di1 - 0.5 * w2 * di2,
                0.5 * (i2 - i1),
            ],
            lam,
        )
    };
    let n = if with_imbalance { 3 } else { 2 };
    let mut j = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in r..n {
            let v = integrate(
                |x| {
                    let (g, lam) = grads(x);
                    if lam > 0.0 {
                        g[r] * g[c] / lam
                    } else {
                        0.0
                    }
                },
                lo,
                hi,
                &opts,
            )
            .value;
            j[(r, c)] = v;
            j[(c, r)] = v;
        }
    }
    let params = if with_imbalance {
        vec![Param::Centroid, Param::Separation, Param::Imbalance]
    } else {
        vec![Param::Centroid, Param::Separation]
    };
    FisherMatrix::new(params, j)
}

/// Per-photon classical Fisher matrix of direct imaging over (X̄, d).
pub fn classical_fisher_direct(psf1: &Psf, psf2: &Psf, scene: &SourceScene) -> Result<FisherMatrix> {
    photon_fisher(psf1, psf2, scene, false)
}

/// Per-photon classical Fisher matrix of direct imaging over (X̄, d, ε).
pub fn classical_fisher_direct_full(
    psf1: &Psf,
    psf2: &Psf,
    scene: &SourceScene,
) -> Result<FisherMatrix> {
    photon_fisher(psf1, psf2, scene, true)
}

/// Direct-imaging precision with known imbalance, N_tot/(J⁻¹)_dd.
pub fn hd_direct(psf1: &Psf, psf2: &Psf, scene: &SourceScene) -> Result<PrecisionReport> {
    let j = classical_fisher_direct(psf1, psf2, scene)?;
    let m = j.matrix();
    // Schur complement of the centroid block: exact for 2×2 and finite at d = 0.
    let per_photon = (m[(1, 1)] - m[(0, 1)] * m[(0, 1)] / m[(0, 0)]).max(0.0);
    let kt = momentum_moment(psf1, 2)? + momentum_moment(psf2, 2)?;
    let n = scene.n_tot();
    Ok(PrecisionReport::new(
        Model::Direct,
        n * per_photon,
        0.5 * n * kt,
        Method::Quadrature,
        per_photon == 0.0,
    ))
}

/// Quantum precision with known photon numbers (identical PSFs):
/// N_tot·κ(1−ε²)(κ−γ²)/(κ−γ²(1−ε²)).
pub fn hd_known(psf: &Psf, scene: &SourceScene) -> Result<PrecisionReport> {
    let m = moment_set(psf, psf, scene.separation());
    let k = m.kappa1;
    let e = scene.eps();
    let g2 = m.gamma * m.gamma;
    let h = k * (1.0 - e * e) * (k - g2) / (k - g2 * (1.0 - e * e));
    let n = scene.n_tot();
    Ok(PrecisionReport::new(Model::KnownN, n * h, n * k, Method::ClosedForm, false))
}

/// Quantum precision with unknown imbalance for identical PSFs.
pub fn hd_exact_identical(psf: &Psf, scene: &SourceScene) -> Result<PrecisionReport> {
    let m = moment_set(psf, psf, scene.separation());
    let (h, method, curse) = hd_from_moments(&m, scene.eps())?;
    let n = scene.n_tot();
    Ok(PrecisionReport::new(
        Model::UnknownIdentical,
        n * h,
        n * m.kappa1,
        method,
        curse,
    ))
}

/// Quantum precision with unknown imbalance for two arbitrary PSFs.
pub fn hd_exact_general(psf1: &Psf, psf2: &Psf, scene: &SourceScene) -> Result<PrecisionReport> {
    let m = moment_set(psf1, psf2, scene.separation());
    let (h, method, curse) = hd_from_moments(&m, scene.eps())?;
    let n = scene.n_tot();
    Ok(PrecisionReport::new(
        Model::UnknownGeneral,
        n * h,
        0.5 * n * m.kappa_tot,
        method,
        curse,
    ))
}

/// Whether the single-parameter bound is attainable for these inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationNote {
    /// Every [`Psf`] is real, so the density matrix and its derivatives are real.
    pub real_amplitudes: bool,
    pub statement: String,
}

/// Records the attainability condition Im Tr(ρ L_i L_j) = 0 for real PSFs.
///
/// The numerical check lives in [`crate::oracle::sld_commutator_check`].
pub fn saturation_check_inputs(_psf1: &Psf, _psf2: &Psf) -> SaturationNote {
    SaturationNote {
        real_amplitudes: true,
        statement: "real amplitudes give a real density matrix and real symmetric logarithmic \
                    derivatives, so Im Tr(rho L_i L_j) = 0 and the multiparameter bound on d \
                    is attainable; see oracle::sld_commutator_check for the numerical test"
            .into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::make_gaussian;
    use crate::qcrb::separation_precision;

    fn scene(d: f64, eps: f64) -> SourceScene {
        SourceScene::from_eps(0.0, d, eps, 1.0).unwrap()
    }

    #[test]
    fn direct_small_separation_matches_expansion() {
        let g = make_gaussian(1.0).unwrap();
        let j = classical_fisher_direct(&g, &g, &scene(1e-3, 0.0)).unwrap();
        let jdd = j.entry(Param::Separation, Param::Separation).unwrap();
        assert!((jdd / 1.25e-7 - 1.0).abs() < 0.01);
        let h = hd_direct(&g, &g, &scene(1e-3, 0.5)).unwrap();
        let approx = 2.0 * 1e-6 * 0.75f64.powi(2) / 16.0;
        assert!((h.h_d / approx - 1.0).abs() < 0.01, "{} {}", h.h_d, approx);
        let h0 = hd_direct(&g, &g, &scene(0.0, 0.0)).unwrap();
        assert_eq!(h0.h_d, 0.0);
        assert!(h0.curse);
    }

    #[test]
    fn known_model_examples() {
        let g = make_gaussian(1.0).unwrap();
        for &d in &[1e-4, 0.3, 1.0, 3.0] {
            let r = hd_known(&g, &scene(d, 0.0)).unwrap();
            assert!((r.h_d - 0.25).abs() < 1e-12);
        }
        let r = hd_known(&g, &scene(1e-5, 0.6)).unwrap();
        assert!((r.h_d - 0.16).abs() < 1e-9);
        let q = qfi_known(&g, &scene(0.7, 0.3)).unwrap();
        let b = separation_precision(&q, 1.0).unwrap();
        let r = hd_known(&g, &scene(0.7, 0.3)).unwrap();
        assert!((b.h_d / r.h_d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_reduction_of_general_matrix() {
        let g = make_gaussian(1.0).unwrap();
        let s = scene(1.0, 0.3);
        let a = qfi_unknown_identical(&g, &s).unwrap();
        let b = qfi_unknown_general(&g, &g, &s).unwrap();
        assert!((a.matrix() - b.matrix()).amax() < 1e-12);
        let e = qfi_unknown_identical(&g, &scene(1.0, 0.0)).unwrap();
        assert_eq!(e.entry(Param::Centroid, Param::Separation), Some(0.0));
    }

    #[test]
    fn zero_separation_is_flagged() {
        let g = make_gaussian(1.0).unwrap();
        let q = qfi_unknown_identical(&g, &scene(0.0, 0.3)).unwrap();
        assert_eq!(q.entry(Param::Imbalance, Param::Imbalance), Some(0.0));
        assert!(!q.notes().is_empty());
        assert!(separation_precision(&q, 1.0).is_err());
    }

    #[test]
    fn matrix_route_matches_closed_forms() {
        let g1 = make_gaussian(1.0).unwrap();
        let g2 = make_gaussian(1.2).unwrap();
        for &(d, e) in &[(0.5, 0.3), (1.0, -0.6), (2.0, 0.0), (3.0, 0.9)] {
            let s = scene(d, e);
            let q = qfi_unknown_general(&g1, &g2, &s).unwrap();
            let b = separation_precision(&q, 1.0).unwrap();
            let r = hd_exact_general(&g1, &g2, &s).unwrap();
            assert!((b.h_d / r.h_d - 1.0).abs() < 1e-12, "{d} {e}: {} {}", b.h_d, r.h_d);
            let q = qfi_unknown_identical(&g1, &s).unwrap();
            let b = separation_precision(&q, 1.0).unwrap();
            let r = hd_exact_identical(&g1, &s).unwrap();
            assert!((b.h_d / r.h_d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn general_limit_at_zero_separation() {
        let (s1, s2) = (1.0, 1.2);
        let g1 = make_gaussian(s1).unwrap();
        let g2 = make_gaussian(s2).unwrap();
        let e = 0.3;
        let r = hd_exact_general(&g1, &g2, &scene(0.0, e)).unwrap();
        let (k1, k2) = (0.25 / (s1 * s1), 0.25 / (s2 * s2));
        let kt = k1 + k2;
        let chi = (k2 - k1) / kt;
        let expect = kt * (1.0 - chi * chi) * (1.0 - e * e) / (2.0 * (1.0 + chi * e));
        assert!((r.h_d / expect - 1.0).abs() < 1e-10);
        // ε = η gives the optimum at d → 0.
        let eta = (s2 - s1) / (s1 + s2);
        let r = hd_exact_general(&g1, &g2, &scene(0.0, eta)).unwrap();
        // Relative to N/(4σ̄²).
        let sb = 0.5 * (s1 + s2);
        assert!((r.h_d * 4.0 * sb * sb - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identical_curse_and_limits() {
        let g = make_gaussian(1.0).unwrap();
        let r = hd_exact_identical(&g, &scene(0.0, 0.0)).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12);
        let r = hd_exact_identical(&g, &scene(0.0, 0.4)).unwrap();
        assert_eq!(r.h_d, 0.0);
        assert!(r.curse);
        for &d in &[1e-6, 0.01, 1.0, 4.0] {
            let r = hd_exact_identical(&g, &scene(d, 0.0)).unwrap();
            assert!((r.h_d - 0.25).abs() < 1e-10, "{d}: {}", r.h_d);
        }
        let r = hd_exact_identical(&g, &scene(0.01, 0.3)).unwrap();
        let approx = 0.91 * 0.125 * 1e-4 / 0.36;
        assert!((r.h_d / approx - 1.0).abs() < 0.01);
    }

    #[test]
    fn literal_and_stable_forms_agree_at_moderate_separation() {
        let g1 = make_gaussian(0.8).unwrap();
        let g2 = make_gaussian(1.5).unwrap();
        for &d in &[0.4, 1.0, 2.5] {
            let m = moment_set(&g1, &g2, d);
            for &e in &[-0.7, 0.0, 0.5] {
                let (h, _, _) = hd_from_moments(&m, e).unwrap();
                assert!((h / hd_literal_general(&m, e) - 1.0).abs() < 1e-10);
            }
        }
    }
}
