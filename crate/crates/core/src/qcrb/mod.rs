//! Classical and quantum Fisher information for the two-source model and the
//! separation precision H_d = N_tot/(F⁻¹)_dd derived from them.
//!
//! Matrices are per photon. Precisions are multiplied by N_tot when a
//! [`PrecisionReport`] is produced.

mod models;

pub use models::{
    classical_fisher_direct, classical_fisher_direct_full, hd_direct, hd_exact_general,
    hd_exact_identical, hd_from_moments, hd_known, hd_literal_general, qfi_known,
    qfi_unknown_general, qfi_unknown_identical, saturation_check_inputs, SaturationNote,
};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Largest condition number accepted before a matrix is declared singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Two incoherent sources at X̄ ∓ d/2 with mean photon numbers n1, n2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceScene {
    centroid: f64,
    separation: f64,
    eps: f64,
    n_tot: f64,
}

impl SourceScene {
    pub fn new(centroid: f64, separation: f64, n1: f64, n2: f64) -> Result<Self> {
        if !(n1 > 0.0 && n2 > 0.0 && n1.is_finite() && n2.is_finite()) {
            return Err(Error::Domain("photon numbers must be positive and finite".into()));
        }
        Self::checked(centroid, separation, (n2 - n1) / (n1 + n2), n1 + n2)
    }

    /// Builds a scene from the imbalance ε = (n2−n1)/(n1+n2) and N_tot.
    pub fn from_eps(centroid: f64, separation: f64, eps: f64, n_tot: f64) -> Result<Self> {
        if !(n_tot > 0.0 && n_tot.is_finite()) {
            return Err(Error::Domain("total photon number must be positive".into()));
        }
        Self::checked(centroid, separation, eps, n_tot)
    }

    fn checked(centroid: f64, separation: f64, eps: f64, n_tot: f64) -> Result<Self> {
        if !centroid.is_finite() {
            return Err(Error::Domain("centroid must be finite".into()));
        }
        if !(separation >= 0.0 && separation.is_finite()) {
            return Err(Error::Domain(format!(
                "separation must be finite and non-negative, got {separation}"
            )));
        }
        if !(eps.abs() < 1.0) {
            return Err(Error::Domain(format!("imbalance must lie in (-1, 1), got {eps}")));
        }
        Ok(Self {
            centroid,
            separation,
            eps,
            n_tot,
        })
    }

    pub fn centroid(&self) -> f64 {
        self.centroid
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n_tot(&self) -> f64 {
        self.n_tot
    }

    pub fn n1(&self) -> f64 {
        0.5 * self.n_tot * (1.0 - self.eps)
    }

    pub fn n2(&self) -> f64 {
        0.5 * self.n_tot * (1.0 + self.eps)
    }

    /// Position of the first source, X̄ − d/2.
    pub fn x1(&self) -> f64 {
        self.centroid - 0.5 * self.separation
    }

    /// Position of the second source, X̄ + d/2.
    pub fn x2(&self) -> f64 {
        self.centroid + 0.5 * self.separation
    }

    /// Same scene with another separation.
    pub fn with_separation(&self, separation: f64) -> Result<Self> {
        Self::checked(self.centroid, separation, self.eps, self.n_tot)
    }
}

/// Estimated parameters, in their fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Param {
    Centroid,
    Separation,
    Imbalance,
}

impl Param {
    pub fn label(&self) -> &'static str {
        match self {
            Param::Centroid => "centroid",
            Param::Separation => "separation",
            Param::Imbalance => "imbalance",
        }
    }
}

/// A per-photon Fisher information matrix over a subset of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    params: Vec<Param>,
    matrix: DMatrix<f64>,
    notes: Vec<String>,
}

impl FisherMatrix {
    pub fn new(params: Vec<Param>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != params.len() || matrix.ncols() != params.len() {
            return Err(Error::Domain("matrix shape does not match the parameter list".into()));
        }
        Ok(Self {
            params,
            matrix,
            notes: Vec::new(),
        })
    }

    pub(crate) fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Diagnostic remarks, e.g. a parameter that is locally unidentifiable.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn index_of(&self, p: Param) -> Option<usize> {
        self.params.iter().position(|&q| q == p)
    }

    pub fn entry(&self, a: Param, b: Param) -> Option<f64> {
        Some(self.matrix[(self.index_of(a)?, self.index_of(b)?)])
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let m = &self.matrix;
        (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Positive semidefinite up to −1e−10 of the trace.
    pub fn is_psd(&self) -> bool {
        let tr = self.matrix.trace().abs();
        self.eigenvalues().iter().all(|&l| l >= -1e-10 * tr)
    }
}

/// Separation precision extracted from a Fisher matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationBound {
    pub h_d: f64,
    pub condition_number: f64,
}

/// H_d = n_tot/(F⁻¹)_dd, refusing matrices with condition number above 1e14.
pub fn separation_precision(q: &FisherMatrix, n_tot: f64) -> Result<SeparationBound> {
    let k = q
        .index_of(Param::Separation)
        .ok_or_else(|| Error::Domain("Fisher matrix does not contain the separation".into()))?;
    let eig = SymmetricEigen::new(q.matrix.clone());
    let (mut imin, mut imax) = (0, 0);
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i].abs() < eig.eigenvalues[imin].abs() {
            imin = i;
        }
        if eig.eigenvalues[i].abs() > eig.eigenvalues[imax].abs() {
            imax = i;
        }
    }
    let lmin = eig.eigenvalues[imin];
    let lmax = eig.eigenvalues[imax].abs();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular {
            condition,
            null_direction: eig.eigenvectors.column(imin).iter().cloned().collect(),
            labels: q.params.iter().map(|p| p.label().to_string()).collect(),
        });
    }
    let inv = q
        .matrix
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| q.matrix.clone().try_inverse())
        .ok_or_else(|| Error::Singular {
            condition,
            null_direction: eig.eigenvectors.column(imin).iter().cloned().collect(),
            labels: q.params.iter().map(|p| p.label().to_string()).collect(),
        })?;
    Ok(SeparationBound {
        h_d: n_tot / inv[(k, k)],
        condition_number: condition,
    })
}

/// Which estimation model a precision refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "direct")]
    Direct,
    #[serde(rename = "known-N")]
    KnownN,
    #[serde(rename = "unknown-identical")]
    UnknownIdentical,
    #[serde(rename = "unknown-general")]
    UnknownGeneral,
}

impl Model {
    pub fn tag(&self) -> &'static str {
        match self {
            Model::Direct => "direct",
            Model::KnownN => "known-N",
            Model::UnknownIdentical => "unknown-identical",
            Model::UnknownGeneral => "unknown-general",
        }
    }
}

/// How a precision value was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Series,
    Quadrature,
}

/// Separation precision of one model with its reference optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub model: Model,
    /// Precision of the separation, already multiplied by N_tot.
    pub h_d: f64,
    /// Reference precision: N_tot·κ for identical PSFs, ½N_tot·κ_tot otherwise.
    pub h_d_opt: f64,
    pub ratio: f64,
    pub method: Method,
    /// Set when H_d vanishes because the separation and the imbalance
    /// cannot be told apart at d = 0.
    pub curse: bool,
}

impl PrecisionReport {
    pub(crate) fn new(model: Model, h_d: f64, h_d_opt: f64, method: Method, curse: bool) -> Self {
        Self {
            model,
            h_d,
            h_d_opt,
            ratio: h_d / h_d_opt,
            method,
            curse,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_derived_quantities() {
        let s = SourceScene::new(0.5, 2.0, 30.0, 70.0).unwrap();
        assert_eq!(s.n_tot(), 100.0);
        assert!((s.eps() - 0.4).abs() < 1e-15);
        assert_eq!(s.x1(), -0.5);
        assert_eq!(s.x2(), 1.5);
        assert!((s.n1() - 30.0).abs() < 1e-12);
        assert!(SourceScene::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(SourceScene::from_eps(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(SourceScene::from_eps(0.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn diagonal_matrix_precision() {
        let q = FisherMatrix::new(
            vec![Param::Centroid, Param::Separation],
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 0.5])),
        )
        .unwrap();
        let b = separation_precision(&q, 10.0).unwrap();
        assert!((b.h_d - 5.0).abs() < 1e-14);
        assert!((b.condition_number - 6.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_reports_direction() {
        let q = FisherMatrix::new(
            vec![Param::Separation, Param::Imbalance],
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        )
        .unwrap();
        match separation_precision(&q, 1.0) {
            Err(Error::Singular { null_direction, labels, .. }) => {
                assert_eq!(labels, vec!["separation", "imbalance"]);
                assert!((null_direction[0] + null_direction[1]).abs() < 1e-12);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn precision_requires_separation() {
        let q = FisherMatrix::new(vec![Param::Centroid], DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!(separation_precision(&q, 1.0).is_err());
    }
}
