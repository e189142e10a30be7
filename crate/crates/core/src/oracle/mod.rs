//! Brute-force quantum Fisher information on a position grid.
//!
//! The single-photon density operator is sampled as a dense Hermitian
//! matrix, diagonalized, and the Fisher matrix and symmetric logarithmic
//! derivatives are built from its spectrum. Nothing here uses the moment
//! integrals or closed forms of [`crate::qcrb`], so the two can be compared.

use crate::error::{Error, Result};
use crate::psf::{overlap_delta, Psf, AMPLITUDE_FLOOR};
use crate::qcrb::{qfi_unknown_general, FisherMatrix, Param, SourceScene};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Eigenvalues at or below this value are treated as outside the support.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

const PARAMS: [Param; 3] = [Param::Centroid, Param::Separation, Param::Imbalance];

/// A uniform grid `center − half_width + k·spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: f64,
    pub half_width: f64,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(center: f64, half_width: f64, spacing: f64) -> Result<Self> {
        if !(half_width > 0.0 && spacing > 0.0 && half_width.is_finite() && center.is_finite()) {
            return Err(Error::Domain("grid half-width and spacing must be positive".into()));
        }
        if half_width / spacing > 5e3 {
            return Err(Error::Domain(format!(
                "grid of {} points is too large for a dense eigensolve",
                (2.0 * half_width / spacing) as usize
            )));
        }
        Ok(Self {
            center,
            half_width,
            spacing,
        })
    }

    /// Half-width 12·max width + d and spacing min width / 10, centred on X̄.
    pub fn default_for(psf1: &Psf, psf2: &Psf, scene: &SourceScene) -> Self {
        let wmax = psf1.width().max(psf2.width());
        let wmin = psf1.width().min(psf2.width());
        Self {
            center: scene.centroid(),
            half_width: 12.0 * wmax + scene.separation(),
            spacing: wmin / 10.0,
        }
    }

    pub fn with_spacing(self, spacing: f64) -> Self {
        Self { spacing, ..self }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = (2.0 * self.half_width / self.spacing).round() as usize;
        (0..=n)
            .map(|k| self.center - self.half_width + k as f64 * self.spacing)
            .collect()
    }
}

/// How the derivatives of the displaced amplitudes are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DerivativeMode {
    Analytic,
    /// Central differences in the parameters with the given step.
    FiniteDifference { step: f64 },
}

/// The two largest eigenvalues of ρ with their eigenvectors (grid-normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Smaller of the two.
    pub lambda1: f64,
    pub lambda2: f64,
    pub v1: DVector<Complex64>,
    pub v2: DVector<Complex64>,
}

/// ½(1 ∓ √(ε² + δ²(1−ε²))).
pub fn closed_form_eigenvalues(eps: f64, delta: f64) -> (f64, f64) {
    let s = (eps * eps + delta * delta * (1.0 - eps * eps)).sqrt();
    (0.5 * (1.0 - s), 0.5 * (1.0 + s))
}

/// Sampled density operator ρ = p1|a1⟩⟨a1| + p2|a2⟩⟨a2| and its derivatives.
///
/// Vectors are scaled by √Δx so that the matrix has unit trace.
#[derive(Debug, Clone)]
pub struct GridDensityOperator {
    grid: GridSpec,
    scene: SourceScene,
    weights: [f64; 2],
    amps: [DVector<Complex64>; 2],
    rho: DMatrix<Complex64>,
    drho: [DMatrix<Complex64>; 3],
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
}

type Amplitude<'a> = &'a dyn Fn(f64) -> (Complex64, Complex64);

fn real_amplitude(psf: &Psf) -> impl Fn(f64) -> (Complex64, Complex64) + '_ {
    move |x| {
        let (a, d, _) = psf.eval(x);
        (Complex64::new(a, 0.0), Complex64::new(d, 0.0))
    }
}

/// Samples ρ for two real PSFs with analytic derivatives.
pub fn build_rho(psf1: &Psf, psf2: &Psf, scene: &SourceScene, grid: &GridSpec) -> Result<GridDensityOperator> {
    build_rho_with(psf1, psf2, scene, grid, DerivativeMode::Analytic)
}

pub fn build_rho_with(
    psf1: &Psf,
    psf2: &Psf,
    scene: &SourceScene,
    grid: &GridSpec,
    mode: DerivativeMode,
) -> Result<GridDensityOperator> {
    let a1 = real_amplitude(psf1);
    let a2 = real_amplitude(psf2);
    let reach = 30.0 * psf1.width().max(psf2.width());
    build(&a1, &a2, scene, grid, mode, reach)
}

/// Samples ρ for arbitrary complex amplitudes given as x ↦ (ψ(x), ψ′(x)).
///
/// The amplitudes must be normalized; `reach` bounds the search for the
/// half-width reported when the grid is too narrow.
pub fn build_rho_amplitudes(
    amp1: impl Fn(f64) -> (Complex64, Complex64),
    amp2: impl Fn(f64) -> (Complex64, Complex64),
    scene: &SourceScene,
    grid: &GridSpec,
    reach: f64,
) -> Result<GridDensityOperator> {
    build(&amp1, &amp2, scene, grid, DerivativeMode::Analytic, reach)
}

/// Smallest half-width around the centre outside which both amplitudes fall
/// below the floor.
fn required_half_width(a1: Amplitude, a2: Amplitude, scene: &SourceScene, center: f64, peak: f64, reach: f64) -> f64 {
    let step = reach / 3000.0;
    let mut r = reach;
    while r > 0.0 {
        let hot = [center - r, center + r].iter().any(|&x| {
            a1(x - scene.x1()).0.norm() > AMPLITUDE_FLOOR * peak || a2(x - scene.x2()).0.norm() > AMPLITUDE_FLOOR * peak
        });
        if hot {
            return r + step;
        }
        r -= step;
    }
    0.0
}

fn build(
    a1: Amplitude,
    a2: Amplitude,
    scene: &SourceScene,
    grid: &GridSpec,
    mode: DerivativeMode,
    reach: f64,
) -> Result<GridDensityOperator> {
    let xs = grid.nodes();
    let n = xs.len();
    let sq = grid.spacing.sqrt();
    let (x1, x2) = (scene.x1(), scene.x2());
    let sample = |amp: Amplitude, shift: f64| -> DVector<Complex64> {
        DVector::from_iterator(n, xs.iter().map(|&x| amp(x - shift).0 * sq))
    };
    let v1 = sample(a1, x1);
    let v2 = sample(a2, x2);
    let peak = v1.iter().chain(v2.iter()).fold(0.0f64, |m, z| m.max(z.norm())) / sq;
    let edge = [0, n - 1]
        .iter()
        .map(|&i| v1[i].norm().max(v2[i].norm()) / sq)
        .fold(0.0f64, f64::max);
    if edge > AMPLITUDE_FLOOR * peak {
        return Err(Error::GridTooNarrow {
            half_width: grid.half_width,
            required: required_half_width(a1, a2, scene, grid.center, peak, reach.max(2.0 * grid.half_width)),
        });
    }
    let p = [0.5 * (1.0 - scene.eps()), 0.5 * (1.0 + scene.eps())];
    let dp = [[0.0, 0.0], [0.0, 0.0], [-0.5, 0.5]];

    // Derivatives of the displaced amplitudes: rows are (X̄, d), columns the sources.
    let damps: [[DVector<Complex64>; 2]; 2] = match mode {
        DerivativeMode::Analytic => {
            let deriv = |amp: Amplitude, shift: f64, c: f64| -> DVector<Complex64> {
                DVector::from_iterator(n, xs.iter().map(|&x| amp(x - shift).1 * (c * sq)))
            };
            [
                [deriv(a1, x1, -1.0), deriv(a2, x2, -1.0)],
                [deriv(a1, x1, 0.5), deriv(a2, x2, -0.5)],
            ]
        }
        DerivativeMode::FiniteDifference { step } => {
            let fd = |amp: Amplitude, sp: f64, sm: f64| -> DVector<Complex64> {
                (sample(amp, sp) - sample(amp, sm)) / Complex64::new(2.0 * step, 0.0)
            };
            [
                [fd(a1, x1 + step, x1 - step), fd(a2, x2 + step, x2 - step)],
                [fd(a1, x1 - 0.5 * step, x1 + 0.5 * step), fd(a2, x2 + 0.5 * step, x2 - 0.5 * step)],
            ]
        }
    };

    let amps = [v1, v2];
    let outer = |u: &DVector<Complex64>, v: &DVector<Complex64>| u * v.adjoint();
    let rho = outer(&amps[0], &amps[0]) * Complex64::from(p[0]) + outer(&amps[1], &amps[1]) * Complex64::from(p[1]);
    let drho: [DMatrix<Complex64>; 3] = std::array::from_fn(|i| {
        let mut m = DMatrix::zeros(n, n);
        for k in 0..2 {
            if dp[i][k] != 0.0 {
                m += outer(&amps[k], &amps[k]) * Complex64::from(dp[i][k]);
            }
            if i < 2 {
                let t = outer(&damps[i][k], &amps[k]);
                m += (&t + t.adjoint()) * Complex64::from(p[k]);
            }
        }
        m
    });
    let eig = SymmetricEigen::new(rho.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    Ok(GridDensityOperator {
        grid: *grid,
        scene: *scene,
        weights: p,
        amps,
        rho,
        drho,
        eigenvalues,
        eigenvectors,
    })
}

fn param_index(p: Param) -> usize {
    match p {
        Param::Centroid => 0,
        Param::Separation => 1,
        Param::Imbalance => 2,
    }
}

impl GridDensityOperator {
    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn scene(&self) -> &SourceScene {
        &self.scene
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn derivative(&self, p: Param) -> &DMatrix<Complex64> {
        &self.drho[param_index(p)]
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// max |ρ − ρ†|.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// All eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigen_pair(&self) -> EigenPair {
        EigenPair {
            lambda1: self.eigenvalues[1],
            lambda2: self.eigenvalues[0],
            v1: self.eigenvectors.column(1).into_owned(),
            v2: self.eigenvectors.column(0).into_owned(),
        }
    }

    /// Indices of eigenvalues above [`SUPPORT_CUTOFF`].
    fn support(&self) -> Vec<usize> {
        (0..self.eigenvalues.len())
            .take_while(|&k| self.eigenvalues[k] > SUPPORT_CUTOFF)
            .collect()
    }

    fn vec(&self, k: usize) -> DVector<Complex64> {
        self.eigenvectors.column(k).into_owned()
    }
}

/// Quantum Fisher matrix over (X̄, d, ε) from the support formula
/// Q_ij = Σ_k 4⟨k|∂ᵢρ∂ⱼρ|k⟩/λ_k
///      + Σ_{k,h} 2(1/(λ_k+λ_h) − 1/λ_k − 1/λ_h)⟨h|∂ᵢρ|k⟩⟨k|∂ⱼρ|h⟩,
/// both sums over the support.
pub fn qfi_numeric(op: &GridDensityOperator) -> Result<FisherMatrix> {
    let s = op.support();
    let lam: Vec<f64> = s.iter().map(|&k| op.eigenvalues[k]).collect();
    let vs: Vec<DVector<Complex64>> = s.iter().map(|&k| op.vec(k)).collect();
    // w[i][k] = ∂ᵢρ|k⟩ and m[i][(h,k)] = ⟨h|∂ᵢρ|k⟩.
    let w: Vec<Vec<DVector<Complex64>>> = (0..3)
        .map(|i| vs.iter().map(|v| &op.drho[i] * v).collect())
        .collect();
    let m: Vec<DMatrix<Complex64>> = (0..3)
        .map(|i| DMatrix::from_fn(s.len(), s.len(), |h, k| vs[h].dotc(&w[i][k])))
        .collect();
    let mut q = DMatrix::zeros(3, 3);
    let mut imag: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..s.len() {
                acc += w[i][k].dotc(&w[j][k]) * (4.0 / lam[k]);
                for h in 0..s.len() {
                    let c = 2.0 * (1.0 / (lam[k] + lam[h]) - 1.0 / lam[k] - 1.0 / lam[h]);
                    acc += m[i][(h, k)] * m[j][(k, h)] * c;
                }
            }
            q[(i, j)] = acc.re;
            imag = imag.max(acc.im.abs());
        }
    }
    let q = (&q + q.transpose()) * 0.5;
    let mut f = FisherMatrix::new(PARAMS.to_vec(), q)?;
    if s.len() < 2 {
        f = f.with_note("density operator has rank one on this grid");
    }
    if imag > 1e-8 * f.matrix().trace().abs() {
        f = f.with_note(format!("complex amplitudes: imaginary part up to {imag:.3e}"));
    }
    Ok(f)
}

/// Symmetric logarithmic derivative solving ½(Lρ + ρL) = ∂ρ on the support
/// and on its coupling to the kernel.
#[derive(Debug, Clone)]
pub struct Sld {
    pub param: Param,
    pub matrix: DMatrix<Complex64>,
}

pub fn sld_build(op: &GridDensityOperator, param: Param) -> Result<Sld> {
    let i = param_index(param);
    let s = op.support();
    if s.is_empty() {
        return Err(Error::Domain("density operator has no support above the cutoff".into()));
    }
    let d = &op.drho[i];
    let vs: Vec<DVector<Complex64>> = s.iter().map(|&k| op.vec(k)).collect();
    let lam: Vec<f64> = s.iter().map(|&k| op.eigenvalues[k]).collect();
    let n = op.dim();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for (k, vk) in vs.iter().enumerate() {
        let wk = d * vk;
        // Component of ∂ρ|k⟩ outside the support.
        let mut perp = wk.clone();
        for vh in &vs {
            perp -= vh * vh.dotc(&wk);
        }
        for (h, vh) in vs.iter().enumerate() {
            let c = vk.dotc(&(d * vh)) * (2.0 / (lam[k] + lam[h]));
            l += vk * vh.adjoint() * c;
        }
        let c = Complex64::from(2.0 / lam[k]);
        l += (&perp * vk.adjoint() + vk * perp.adjoint()) * c;
    }
    Ok(Sld { param, matrix: l })
}

/// Frobenius norm of ½(Lρ + ρL) − ∂ρ.
pub fn sld_residual(op: &GridDensityOperator, sld: &Sld) -> f64 {
    let mut lrho = DMatrix::<Complex64>::zeros(op.dim(), op.dim());
    for k in 0..2 {
        lrho += (&sld.matrix * &op.amps[k]) * op.amps[k].adjoint() * Complex64::from(op.weights[k]);
    }
    let r = (&lrho + lrho.adjoint()) * Complex64::from(0.5) - op.derivative(sld.param);
    r.norm()
}

/// max_{i<j} |Im Tr(ρ Lᵢ Lⱼ)| over the three parameters.
pub fn sld_commutator_check(op: &GridDensityOperator) -> Result<f64> {
    let slds: Vec<Sld> = PARAMS.iter().map(|&p| sld_build(op, p)).collect::<Result<_>>()?;
    let la: Vec<Vec<DVector<Complex64>>> = slds
        .iter()
        .map(|l| op.amps.iter().map(|a| &l.matrix * a).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            let t: Complex64 = (0..2).map(|k| la[i][k].dotc(&la[j][k]) * op.weights[k]).sum();
            worst = worst.max(t.im.abs());
        }
    }
    Ok(worst)
}

/// Largest entrywise relative difference between two Fisher matrices.
///
/// Entries smaller than 1e−8 of the largest reference entry are compared
/// against that scale instead of their own magnitude.
pub fn entry_error(numeric: &FisherMatrix, reference: &FisherMatrix) -> f64 {
    let a = numeric.matrix();
    let b = reference.matrix();
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-8 * scale))
        .fold(0.0, f64::max)
}

/// Agreement of the grid oracle with the moment-based Fisher matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub spacing: f64,
    pub dimension: usize,
    pub max_rel_error: f64,
    pub eigenvalue_error: f64,
    pub trace_error: f64,
    pub third_eigenvalue: f64,
}

/// Runs the oracle on `grid` and compares it with the moment-based matrix.
pub fn compare_with_closed_form(psf1: &Psf, psf2: &Psf, scene: &SourceScene, grid: &GridSpec) -> Result<OracleComparison> {
    let op = build_rho(psf1, psf2, scene, grid)?;
    let numeric = qfi_numeric(&op)?;
    let reference = qfi_unknown_general(psf1, psf2, scene)?;
    let delta = overlap_delta(psf1, psf2, scene.separation());
    let (l1, l2) = closed_form_eigenvalues(scene.eps(), delta);
    let ev = op.eigenvalues();
    Ok(OracleComparison {
        spacing: grid.spacing,
        dimension: op.dim(),
        max_rel_error: entry_error(&numeric, &reference),
        eigenvalue_error: (ev[0] - l2).abs().max((ev[1] - l1).abs()),
        trace_error: (op.trace() - 1.0).abs(),
        third_eigenvalue: ev.get(2).copied().unwrap_or(0.0),
    })
}

/// Oracle error at a coarse spacing and at half of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub coarse_spacing: f64,
    pub coarse_error: f64,
    pub fine_error: f64,
    /// coarse_error / fine_error.
    pub factor: f64,
}

/// Coarse spacing at which the discretization error is visible above the
/// round-off floor: 0.9 × min width.
///
/// Sums of smooth, rapidly decaying integrands converge faster than any power
/// of the spacing, so at the default spacing the error is already at the floor
/// and a refinement test needs a coarse starting grid.
pub fn default_coarse_spacing(psf1: &Psf, psf2: &Psf) -> f64 {
    0.9 * psf1.width().min(psf2.width())
}

pub fn refinement_check(psf1: &Psf, psf2: &Psf, scene: &SourceScene, coarse_spacing: f64) -> Result<Refinement> {
    let base = GridSpec::default_for(psf1, psf2, scene);
    let coarse = compare_with_closed_form(psf1, psf2, scene, &base.with_spacing(coarse_spacing))?;
    let fine = compare_with_closed_form(psf1, psf2, scene, &base.with_spacing(0.5 * coarse_spacing))?;
    Ok(Refinement {
        coarse_spacing,
        coarse_error: coarse.max_rel_error,
        fine_error: fine.max_rel_error,
        factor: coarse.max_rel_error / fine.max_rel_error.max(f64::MIN_POSITIVE),
    })
}
