//! Limits of H_d/H_d^opt as d̃ → 0 when the PSF difference and the imbalance
//! themselves scale as powers of d̃.
//!
//! General table: 1−⟨ψ1|ψ2⟩ = b·d̃ʰ, χ = c·d̃ᵉ, ½−ξ = a·d̃ᶠ, ε = y·d̃ˢ with
//! d̃ = d·√⟨P²⟩. Gaussian table: η = z·d̃ᵗ, ε = y·d̃ˢ with d̃ = d/σ̄.

use crate::error::{Error, Result};
use crate::psf::{make_gaussian, make_perturbed, moment_set, MomentSet, PerturbationMix, Psf};
use crate::qcrb::{hd_exact_general, hd_exact_identical, SourceScene};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeTable {
    General,
    Gaussian,
}

/// Exponents and coefficients of one regime cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub table: RegimeTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

impl RegimeSpec {
    fn empty(table: RegimeTable) -> Self {
        Self {
            table,
            h: None,
            f: None,
            e: None,
            s: None,
            t: None,
            a: None,
            b: None,
            c: None,
            y: None,
            z: None,
        }
    }

    /// General-table cell with exponents (h, f, e, s).
    pub fn general(h: u32, f: u32, e: u32, s: u32) -> Self {
        Self {
            h: Some(h),
            f: Some(f),
            e: Some(e),
            s: Some(s),
            ..Self::empty(RegimeTable::General)
        }
    }

    /// Gaussian-table cell with exponents (t, s).
    pub fn gaussian(t: u32, s: u32) -> Self {
        Self {
            t: Some(t),
            s: Some(s),
            ..Self::empty(RegimeTable::Gaussian)
        }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }
    pub fn with_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }
    pub fn with_c(mut self, c: f64) -> Self {
        self.c = Some(c);
        self
    }
    pub fn with_y(mut self, y: f64) -> Self {
        self.y = Some(y);
        self
    }
    pub fn with_z(mut self, z: f64) -> Self {
        self.z = Some(z);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("regime spec serializes")
    }
}

/// Result of [`validate_exponents`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentCheck {
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Checks h/2 ≤ e ≤ h ≤ f ≤ 2h for the general table, and that the
/// exponents and coefficients a cell needs are present and finite.
pub fn validate_exponents(spec: &RegimeSpec) -> ExponentCheck {
    let mut v = Vec::new();
    for (name, val) in [
        ("a", spec.a),
        ("b", spec.b),
        ("c", spec.c),
        ("y", spec.y),
        ("z", spec.z),
    ] {
        if let Some(x) = val {
            if !x.is_finite() {
                v.push(format!("{name} is not finite"));
            }
        }
    }
    if spec.s.is_none() {
        v.push("missing s".into());
    }
    match spec.table {
        RegimeTable::General => match (spec.h, spec.e, spec.f) {
            (Some(h), Some(e), Some(f)) => {
                if 2 * e < h {
                    v.push("e < h/2".into());
                }
                if e > h {
                    v.push("e > h".into());
                }
                if f < h {
                    v.push("f < h".into());
                }
                if f > 2 * h {
                    v.push("f > 2h".into());
                }
                if let Some(b) = spec.b {
                    if !(b > 0.0) {
                        v.push("b must be positive".into());
                    }
                }
            }
            _ => v.push("general table needs h, e and f".into()),
        },
        RegimeTable::Gaussian => {
            if spec.t.is_none() {
                v.push("gaussian table needs t".into());
            }
        }
    }
    ExponentCheck {
        valid: v.is_empty(),
        violations: v,
    }
}

/// Predicted limit of H_d/H_d^opt for a regime cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum RegimeOutcome {
    /// The optimal precision is recovered (ratio 1).
    Optimal,
    /// The precision collapses (ratio 0).
    Curse,
    /// An intermediate value given by the cell formula.
    Formula(f64),
    /// The cell is not covered by the tables, with the reason.
    Unclassified(String),
}

impl RegimeOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            RegimeOutcome::Optimal => Some(1.0),
            RegimeOutcome::Curse => Some(0.0),
            RegimeOutcome::Formula(v) => Some(*v),
            RegimeOutcome::Unclassified(_) => None,
        }
    }
}

fn need(v: Option<f64>, name: &str) -> std::result::Result<f64, RegimeOutcome> {
    v.ok_or_else(|| RegimeOutcome::Unclassified(format!("cell needs coefficient {name}")))
}

/// Table value of the limit. `moments` supplies ⟨P²⟩₁₂ and ⟨P⁴⟩₁₂ of the
/// limiting pair (general table only).
pub fn regime_ratio(spec: &RegimeSpec, moments: Option<&MomentSet>) -> RegimeOutcome {
    let check = validate_exponents(spec);
    if !check.valid {
        return RegimeOutcome::Unclassified(check.violations.join("; "));
    }
    let s = spec.s.expect("validated");
    let out = match spec.table {
        RegimeTable::General => general_cell(spec, spec.h.expect("validated"), s, moments),
        RegimeTable::Gaussian => gaussian_cell(spec, spec.t.expect("validated"), s),
    };
    out.unwrap_or_else(|o| o)
}

fn general_cell(
    spec: &RegimeSpec,
    h: u32,
    s: u32,
    moments: Option<&MomentSet>,
) -> std::result::Result<RegimeOutcome, RegimeOutcome> {
    use RegimeOutcome::*;
    let pvar = || -> std::result::Result<(f64, f64), RegimeOutcome> {
        let m = moments.ok_or_else(|| Unclassified("cell needs the PSF moments".into()))?;
        let p2 = m.p2sq_12;
        Ok((p2, m.p4_12 - p2 * p2))
    };
    Ok(match (h, s) {
        (5.., 2..) | (4, 2..) | (3, 1..) | (2, 1..) | (1, 1..) => Optimal,
        (3.., 0) => Curse,
        (5.., 1) => {
            let y = need(spec.y, "y")?;
            let (p2, var) = pvar()?;
            Formula(var / (4.0 * y * y * p2 * p2 + var))
        }
        (4, 1) => {
            let (y, b) = (need(spec.y, "y")?, need(spec.b, "b")?);
            let (p2, var) = pvar()?;
            Formula((8.0 * b * p2 * p2 + var) / (4.0 * (2.0 * b + y * y) * p2 * p2 + var))
        }
        (2, 0) => {
            let (y, b) = (need(spec.y, "y")?, need(spec.b, "b")?);
            Formula(2.0 * b * (1.0 - y * y) / (2.0 * b + y * y))
        }
        (1, 0) => {
            let y = need(spec.y, "y")?;
            Formula(1.0 - y * y)
        }
        (0, 1..) => {
            let c = need(spec.c, "c")?;
            Formula(1.0 - c * c)
        }
        (0, 0) => {
            let (y, c) = (need(spec.y, "y")?, need(spec.c, "c")?);
            Formula((1.0 - c * c) * (1.0 - y * y) / (1.0 + c * y))
        }
    })
}

fn gaussian_cell(
    spec: &RegimeSpec,
    t: u32,
    s: u32,
) -> std::result::Result<RegimeOutcome, RegimeOutcome> {
    use RegimeOutcome::*;
    Ok(match (t, s) {
        (2.., 2..) | (1, 1..) => Optimal,
        (2.., 0) => Curse,
        (3.., 1) => {
            let y = need(spec.y, "y")?;
            Formula(1.0 / (1.0 + 8.0 * y * y))
        }
        (2, 1) => {
            let (y, z) = (need(spec.y, "y")?, need(spec.z, "z")?);
            Formula((1.0 + 64.0 * z * z) / (1.0 + 64.0 * z * z + 8.0 * y * y))
        }
        (1, 0) => {
            let (y, z) = (need(spec.y, "y")?, need(spec.z, "z")?);
            Formula(8.0 * (1.0 - y * y) * z * z / (y * y + 8.0 * z * z))
        }
        (0, 1..) => {
            let z = need(spec.z, "z")?;
            Formula(1.0 / (1.0 + z * z))
        }
        (0, 0) => {
            let (y, z) = (need(spec.y, "y")?, need(spec.z, "z")?);
            Formula((1.0 - y * y) / (1.0 - 2.0 * y * z + z * z))
        }
    })
}

/// A family of PSF pairs whose differences scale with d̃ along a schedule.
#[derive(Debug, Clone, PartialEq)]
pub enum PsfFamily {
    /// Gaussians of widths σ̄(1∓η) with η = z·d̃ᵗ (Gaussian table).
    GaussianWidths { sigma_bar: f64 },
    /// A Gaussian and its Hermite–Gauss perturbation with 1−⟨ψ1|ψ2⟩ = b·d̃ʰ
    /// (general table). Mode 2 realizes e = h/2, mode 4 realizes e = h.
    Perturbed { base_sigma: f64 },
    /// Two copies of one PSF.
    Identical { psf: Psf },
}

/// Numerical confirmation of a regime cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerification {
    /// (d̃, H_d/H_d^opt) along the schedule.
    pub points: Vec<(f64, f64)>,
    /// Two-point Richardson extrapolation to d̃ = 0.
    pub limit: f64,
    pub predicted: RegimeOutcome,
    /// |limit − predicted| when a prediction exists.
    pub deviation: Option<f64>,
}

/// The schedule 0.1, 0.05, 0.025, … down to 1e−3.
pub fn default_schedule() -> Vec<f64> {
    let mut v = Vec::new();
    let mut x = 0.1;
    while x > 1.5e-3 {
        v.push(x);
        x *= 0.5;
    }
    v.push(1e-3);
    v
}

/// Two-point Richardson extrapolation assuming an O(h²) correction.
pub(crate) fn richardson(h1: f64, f1: f64, h2: f64, f2: f64) -> f64 {
    (f2 * h1 * h1 - f1 * h2 * h2) / (h1 * h1 - h2 * h2)
}

fn power(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

/// Evaluates the family along `schedule` and compares the extrapolated limit
/// with [`regime_ratio`].
pub fn regime_verify(
    spec: &RegimeSpec,
    family: &PsfFamily,
    schedule: &[f64],
) -> Result<RegimeVerification> {
    if schedule.len() < 2
        || schedule.iter().any(|&x| !(x > 0.0 && x.is_finite()))
        || schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::NonMonotoneSchedule);
    }
    let check = validate_exponents(spec);
    if !check.valid {
        return Err(Error::InvalidExponents(check.violations.join("; ")));
    }
    let s = spec.s.expect("validated");
    let y = spec
        .y
        .ok_or_else(|| Error::InvalidExponents("verification needs coefficient y".into()))?;
    let eps_at = |dt: f64| y * power(dt, s);

    let (evaluate, predicted): (Box<dyn Fn(f64) -> Result<f64> + Sync>, RegimeOutcome) =
        match (family, spec.table) {
            (PsfFamily::GaussianWidths { sigma_bar }, RegimeTable::Gaussian) => {
                let sb = *sigma_bar;
                let t = spec.t.expect("validated");
                let z = spec.z.unwrap_or(1.0);
                let f = move |dt: f64| -> Result<f64> {
                    let eta = z * power(dt, t);
                    if !(eta.abs() < 1.0) {
                        return Err(Error::Domain(format!("width ratio {eta} out of range")));
                    }
                    let g1 = make_gaussian(sb * (1.0 - eta))?;
                    let g2 = make_gaussian(sb * (1.0 + eta))?;
                    let scene = SourceScene::from_eps(0.0, dt * sb, eps_at(dt), 1.0)?;
                    Ok(hd_exact_general(&g1, &g2, &scene)?.h_d * 4.0 * sb * sb)
                };
                (Box::new(f), regime_ratio(spec, None))
            }
            (PsfFamily::Identical { psf }, table) => {
                let m = moment_set(psf, psf, 0.0);
                let limit_ok = match table {
                    RegimeTable::General => spec.h.is_some_and(|h| h >= 5),
                    RegimeTable::Gaussian => spec.t.is_some_and(|t| t >= 3),
                };
                if !limit_ok {
                    return Err(Error::InvalidExponents(
                        "identical PSFs only realize the h ≥ 5 (or t ≥ 3) cells".into(),
                    ));
                }
                let scale = match table {
                    RegimeTable::General => 1.0 / m.kappa1.sqrt(),
                    RegimeTable::Gaussian => psf.width(),
                };
                let psf = psf.clone();
                let f = move |dt: f64| -> Result<f64> {
                    let scene = SourceScene::from_eps(0.0, dt * scale, eps_at(dt), 1.0)?;
                    let r = hd_exact_identical(&psf, &scene)?;
                    Ok(match table {
                        RegimeTable::General => r.ratio,
                        RegimeTable::Gaussian => r.h_d * 4.0 * scale * scale,
                    })
                };
                (Box::new(f), regime_ratio(spec, Some(&m)))
            }
            (PsfFamily::Perturbed { base_sigma }, RegimeTable::General) => {
                let base = make_gaussian(*base_sigma)?;
                let (h, e, f) = (
                    spec.h.expect("validated"),
                    spec.e.expect("validated"),
                    spec.f.expect("validated"),
                );
                let b = spec
                    .b
                    .ok_or_else(|| Error::InvalidExponents("verification needs coefficient b".into()))?;
                let mix = if h == 0 || 2 * e == h {
                    PerturbationMix::hg2()
                } else if e == h {
                    PerturbationMix::hg4()
                } else {
                    return Err(Error::InvalidExponents(format!(
                        "e = {e} is not reachable by the perturbed family (needs e = h/2 or e = h)"
                    )));
                };
                if f != h {
                    return Err(Error::InvalidExponents(format!(
                        "f = {f} is not reachable by the perturbed family (it realizes f = h)"
                    )));
                }
                let kappa = 0.25 / (base_sigma * base_sigma);
                let angle = move |dt: f64| -> Result<f64> {
                    let u = b * power(dt, h);
                    if !(u < 1.0) {
                        return Err(Error::Domain(format!("overlap defect {u} too large")));
                    }
                    Ok(2.0 * (0.5 * u).sqrt().asin())
                };
                let limit_moments = moment_set(&base, &base, 0.0);
                let mut spec_used = *spec;
                if h == 0 {
                    // χ is fixed by the family at this overlap, not a free input.
                    let p = make_perturbed(&base, angle(1.0)?, mix)?;
                    spec_used.c = Some(moment_set(&base, &p, 0.0).chi);
                }
                let predicted = regime_ratio(&spec_used, Some(&limit_moments));
                let f = move |dt: f64| -> Result<f64> {
                    let p = make_perturbed(&base, angle(dt)?, mix)?;
                    let scene = SourceScene::from_eps(0.0, dt / kappa.sqrt(), eps_at(dt), 1.0)?;
                    Ok(hd_exact_general(&base, &p, &scene)?.ratio)
                };
                (Box::new(f), predicted)
            }
            (family, table) => {
                return Err(Error::Domain(format!(
                    "family {family:?} does not realize {table:?}-table cells"
                )))
            }
        };

    let values: Vec<Result<f64>> = schedule.par_iter().map(|&dt| evaluate(dt)).collect();
    let mut points = Vec::with_capacity(schedule.len());
    for (&dt, v) in schedule.iter().zip(values) {
        points.push((dt, v?));
    }
    let n = points.len();
    let (h1, f1) = points[n - 2];
    let (h2, f2) = points[n - 1];
    let limit = richardson(h1, f1, h2, f2);
    let deviation = predicted.value().map(|p| (limit - p).abs());
    Ok(RegimeVerification {
        points,
        limit,
        predicted,
        deviation,
    })
}
