//! Maximum-likelihood fits of photon positions under direct imaging.
//!
//! A Nelder–Mead search locates the maximum, then Newton steps with the
//! analytic Hessian polish it.

use super::sampler::intensity_derivs;
use crate::error::{Error, Result};
use crate::psf::Psf;
use crate::qcrb::Param;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Iteration cap of the derivative-free stage.
pub const MAX_SIMPLEX_ITERATIONS: usize = 500;
/// The polish stops when the log-likelihood gains less than this per photon.
pub const POLISH_TOLERANCE: f64 = 1e-10;
/// Spread of −log-likelihood across the simplex at which the search hands
/// over to the polish; well inside the statistical uncertainty (Δℓ = ½).
const SIMPLEX_TOLERANCE: f64 = 1e-2;
const MAX_POLISH_ITERATIONS: usize = 100;
const EPS_LIMIT: f64 = 1.0 - 1e-9;

/// Which parameters are estimated; the others are held at their start values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    SeparationOnly,
    CentroidSeparation,
    Full,
}

impl FitModel {
    pub fn free(&self) -> &'static [usize] {
        match self {
            FitModel::SeparationOnly => &[1],
            FitModel::CentroidSeparation => &[0, 1],
            FitModel::Full => &[0, 1, 2],
        }
    }

    pub fn params(&self) -> Vec<Param> {
        const ALL: [Param; 3] = [Param::Centroid, Param::Separation, Param::Imbalance];
        self.free().iter().map(|&i| ALL[i]).collect()
    }

    pub fn tag(&self) -> &'static str {
        match self {
            FitModel::SeparationOnly => "d",
            FitModel::CentroidSeparation => "xbar-d",
            FitModel::Full => "xbar-d-eps",
        }
    }
}

impl std::str::FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" | "separation" => Ok(FitModel::SeparationOnly),
            "xbar-d" => Ok(FitModel::CentroidSeparation),
            "xbar-d-eps" | "full" => Ok(FitModel::Full),
            _ => Err(Error::Parse(format!("unknown fit model '{s}'; expected d, xbar-d or xbar-d-eps"))),
        }
    }
}

/// Result of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub centroid: f64,
    pub separation: f64,
    pub eps: f64,
    pub loglik: f64,
    pub converged: bool,
    pub simplex_iterations: usize,
    pub polish_iterations: usize,
}

struct Likelihood<'a> {
    psf1: &'a Psf,
    psf2: &'a Psf,
    xs: &'a [f64],
}

impl Likelihood<'_> {
    fn value(&self, th: &[f64; 3]) -> f64 {
        let (xb, d, e) = (th[0], th[1], th[2]);
        if !(e.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        let (x1, x2) = (xb - 0.5 * d, xb + 0.5 * d);
        let (p1, p2) = (0.5 * (1.0 - e), 0.5 * (1.0 + e));
        let mut acc = 0.0;
        for &x in self.xs {
            let l = p1 * self.psf1.intensity(x - x1) + p2 * self.psf2.intensity(x - x2);
            if !(l > 0.0) {
                return f64::NEG_INFINITY;
            }
            acc += l.ln();
        }
        acc
    }

    /// Value, gradient and Hessian over all three parameters.
    fn derivs(&self, th: &[f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        let (xb, d, e) = (th[0], th[1], th[2]);
        let (x1, x2) = (xb - 0.5 * d, xb + 0.5 * d);
        let (p1, p2) = (0.5 * (1.0 - e), 0.5 * (1.0 + e));
        let mut f = 0.0;
        let mut g = [0.0; 3];
        let mut h = [[0.0; 3]; 3];
        for &x in self.xs {
            let (i1, i1p, i1pp) = intensity_derivs(self.psf1, x - x1);
            let (i2, i2p, i2pp) = intensity_derivs(self.psf2, x - x2);
            let l = p1 * i1 + p2 * i2;
            if !(l > 0.0) {
                return (f64::NEG_INFINITY, g, h);
            }
            let la = [-p1 * i1p - p2 * i2p, 0.5 * (p1 * i1p - p2 * i2p), 0.5 * (i2 - i1)];
            let s = p1 * i1pp + p2 * i2pp;
            let dd = -0.5 * p1 * i1pp + 0.5 * p2 * i2pp;
            let lab = [
                [s, dd, 0.5 * (i1p - i2p)],
                [dd, 0.25 * s, -0.25 * (i1p + i2p)],
                [0.5 * (i1p - i2p), -0.25 * (i1p + i2p), 0.0],
            ];
            f += l.ln();
            let inv = 1.0 / l;
            for a in 0..3 {
                g[a] += la[a] * inv;
                for b in 0..3 {
                    h[a][b] += lab[a][b] * inv - la[a] * la[b] * inv * inv;
                }
            }
        }
        (f, g, h)
    }
}

/// Maps simplex coordinates to parameters: d is reflected and ε = tanh(t).
fn to_params(model: FitModel, base: &[f64; 3], z: &[f64]) -> [f64; 3] {
    let mut th = *base;
    for (k, &i) in model.free().iter().enumerate() {
        th[i] = match i {
            1 => z[k].abs(),
            2 => z[k].tanh().clamp(-EPS_LIMIT, EPS_LIMIT),
            _ => z[k],
        };
    }
    th
}

fn to_coords(model: FitModel, th: &[f64; 3]) -> Vec<f64> {
    model
        .free()
        .iter()
        .map(|&i| if i == 2 { th[2].clamp(-EPS_LIMIT, EPS_LIMIT).atanh() } else { th[i] })
        .collect()
}

/// Minimizes `f` by Nelder–Mead; returns (best point, iterations, converged).
fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: Vec<f64>, steps: &[f64], ftol: f64, cap: usize) -> (Vec<f64>, usize, bool) {
    let n = start.len();
    let mut pts: Vec<Vec<f64>> = vec![start.clone()];
    for k in 0..n {
        let mut p = start.clone();
        p[k] += steps[k];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    for it in 0..cap {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= ftol {
            return (pts[0].clone(), it, true);
        }
        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |c: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + c * (pts[n][k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    pts[i] = (0..n).map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k])).collect();
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    (pts[best].clone(), cap, false)
}

/// Maximizes Σ log Λ(xᵢ) over the free parameters of `model`.
///
/// `start` is (X̄, d, ε); entries that are not free are taken as known.
pub fn mle_fit(psf1: &Psf, psf2: &Psf, positions: &[f64], model: FitModel, start: [f64; 3]) -> Result<FitOutcome> {
    if positions.is_empty() {
        return Err(Error::Domain("cannot fit an empty sample".into()));
    }
    if !(start[2].abs() < 1.0) || start.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("start point must be finite with |eps| < 1".into()));
    }
    let lik = Likelihood { psf1, psf2, xs: positions };
    let n = positions.len() as f64;
    let w = psf1.width().min(psf2.width());
    let free = model.free();

    let steps: Vec<f64> = free
        .iter()
        .map(|&i| match i {
            0 => 0.1 * w,
            1 => (0.2 * start[1].abs()).max(0.2 * w),
            _ => 0.2,
        })
        .collect();
    let objective = |z: &[f64]| -lik.value(&to_params(model, &start, z));
    let (z, simplex_iterations, _) =
        nelder_mead(objective, to_coords(model, &start), &steps, SIMPLEX_TOLERANCE, MAX_SIMPLEX_ITERATIONS);
    let mut th = to_params(model, &start, &z);

    let k = free.len();
    let mut converged = false;
    let mut polish_iterations = 0;
    let mut stalled = 0;
    let mut f = lik.value(&th);
    for it in 0..MAX_POLISH_ITERATIONS {
        polish_iterations = it + 1;
        let (_, g, h) = lik.derivs(&th);
        let gv = DVector::from_iterator(k, free.iter().map(|&i| g[i]));
        let neg_h = DMatrix::from_fn(k, k, |a, b| -h[free[a]][free[b]]);
        // Newton step when −H is positive definite, otherwise the Newton step
        // of −H shifted just enough to become positive definite.
        let (step, newton) = match neg_h.clone().cholesky() {
            Some(c) => (c.solve(&gv), true),
            None => {
                let eig = neg_h.clone().symmetric_eigen();
                let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
                let shift = (-eig.eigenvalues.min()).max(0.0) * 2.0 + 1e-8 * scale;
                let mut s = DVector::zeros(k);
                for i in 0..k {
                    let v = eig.eigenvectors.column(i);
                    s += v * (v.dot(&gv) / (eig.eigenvalues[i] + shift));
                }
                (s, false)
            }
        };
        // Predicted gain of a full Newton step, ½ gᵀ(−H)⁻¹g.
        let predicted = 0.5 * gv.dot(&step);
        if newton && predicted < POLISH_TOLERANCE * n {
            converged = true;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut cand = th;
            for (a, &i) in free.iter().enumerate() {
                cand[i] += alpha * step[a];
            }
            cand[1] = cand[1].abs();
            if cand[2].abs() < EPS_LIMIT {
                let fc = lik.value(&cand);
                if fc >= f {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                let gain = fc - f;
                th = cand;
                f = fc;
                // On a flat ridge the likelihood no longer changes at the
                // tolerance, which is the convergence criterion itself.
                stalled = if gain < POLISH_TOLERANCE * n { stalled + 1 } else { 0 };
                if stalled >= 3 {
                    converged = true;
                }
            }
            None => {
                // No ascent left along the step: stationary to working precision
                // only if the step was a genuine Newton step.
                converged = newton;
                break;
            }
        }
        if converged {
            break;
        }
    }
    Ok(FitOutcome {
        centroid: th[0],
        separation: th[1],
        eps: th[2],
        loglik: f,
        converged: converged && f.is_finite(),
        simplex_iterations,
        polish_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::make_gaussian;

    #[test]
    fn analytic_derivatives_match_differences() {
        let p1 = make_gaussian(1.0).unwrap();
        let p2 = make_gaussian(1.3).unwrap();
        let xs: Vec<f64> = (0..50).map(|i| -3.0 + 0.12 * i as f64).collect();
        let lik = Likelihood { psf1: &p1, psf2: &p2, xs: &xs };
        let th = [0.1, 0.8, 0.2];
        let (f, g, h) = lik.derivs(&th);
        assert!((f - lik.value(&th)).abs() < 1e-10);
        let e = 1e-5;
        for a in 0..3 {
            let mut tp = th;
            let mut tm = th;
            tp[a] += e;
            tm[a] -= e;
            let fd = (lik.value(&tp) - lik.value(&tm)) / (2.0 * e);
            assert!((fd - g[a]).abs() < 1e-6 * (1.0 + g[a].abs()), "grad {a}");
            let (_, gp, _) = lik.derivs(&tp);
            let (_, gm, _) = lik.derivs(&tm);
            for b in 0..3 {
                let fd2 = (gp[b] - gm[b]) / (2.0 * e);
                assert!((fd2 - h[a][b]).abs() < 1e-5 * (1.0 + h[a][b].abs()), "hess {a}{b}");
            }
        }
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (x, _, ok) = nelder_mead(
            |z| (z[0] - 1.0).powi(2) + 3.0 * (z[1] + 2.0).powi(2),
            vec![0.0, 0.0],
            &[0.5, 0.5],
            1e-14,
            500,
        );
        assert!(ok);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn fit_model_tags_round_trip() {
        for m in [FitModel::SeparationOnly, FitModel::CentroidSeparation, FitModel::Full] {
            assert_eq!(m.tag().parse::<FitModel>().unwrap(), m);
        }
        assert!("xyz".parse::<FitModel>().is_err());
    }
}
