//! Monte-Carlo check that maximum-likelihood estimation from direct imaging
//! attains the classical Cramér–Rao bound, and that no simulated estimator
//! does better.

mod mle;
mod sampler;

pub use mle::{mle_fit, FitModel, FitOutcome, MAX_SIMPLEX_ITERATIONS, POLISH_TOLERANCE};
pub use sampler::{photon_density, sample_photons, trial_rng, PhotonSample, PhotonSampler};

use crate::error::{Error, Result};
use crate::psf::Psf;
use crate::qcrb::{classical_fisher_direct_full, SourceScene};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One configuration of an experiment.
#[derive(Debug, Clone)]
pub struct ExperimentScene {
    pub label: String,
    pub psf1: Psf,
    pub psf2: Psf,
    pub scene: SourceScene,
    pub model: FitModel,
    /// Start point (X̄, d, ε); the truth when `None`.
    pub start: Option<[f64; 3]>,
}

/// Estimates from one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialEstimate {
    pub trial: usize,
    pub xbar_hat: f64,
    pub d_hat: f64,
    pub eps_hat: f64,
    pub loglik: f64,
    pub converged: bool,
}

/// Aggregated results of the trials of one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub label: String,
    pub model: FitModel,
    pub trials: usize,
    pub photons: usize,
    pub estimates: Vec<TrialEstimate>,
    /// Trials left out of the statistics because the fit did not converge.
    pub excluded: usize,
    pub mean_d: f64,
    pub bias_d: f64,
    pub var_d: f64,
    /// Covariance of the free parameters over converged trials.
    pub covariance: Vec<Vec<f64>>,
    /// Cramér–Rao bound on d for the fitted model.
    pub crb_d: f64,
    /// Bound on d when only X̄ and d are unknown.
    pub crb_d_known_eps: f64,
    /// var_d / crb_d.
    pub ratio: f64,
}

impl TrialReport {
    /// Lower edge 1 − 2√(2/M) of the statistical window for var/CRB.
    pub fn slack_floor(&self) -> f64 {
        let m = (self.trials - self.excluded) as f64;
        1.0 - 2.0 * (2.0 / m).sqrt()
    }

    /// Standard error of the mean separation estimate.
    pub fn standard_error_d(&self) -> f64 {
        (self.var_d / (self.trials - self.excluded) as f64).sqrt()
    }

    /// Writes the per-trial CSV. Parameters that were not estimated are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "d_hat", "xbar_hat", "eps_hat", "loglik", "converged"])?;
        let free = self.model.free();
        for e in &self.estimates {
            let opt = |i: usize, v: f64| if free.contains(&i) { format!("{v}") } else { String::new() };
            w.write_record([
                e.trial.to_string(),
                format!("{}", e.d_hat),
                opt(0, e.xbar_hat),
                opt(2, e.eps_hat),
                format!("{}", e.loglik),
                e.converged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// CRB of d per `photons` photons for the given free parameters.
pub fn crb_separation(psf1: &Psf, psf2: &Psf, scene: &SourceScene, model: FitModel, photons: usize) -> Result<f64> {
    let j = classical_fisher_direct_full(psf1, psf2, scene)?;
    let free = model.free();
    let sub = DMatrix::from_fn(free.len(), free.len(), |a, b| j.matrix()[(free[a], free[b])]);
    let k = free.iter().position(|&i| i == 1).unwrap_or(0);
    let inv = sub
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NoConvergence("direct-imaging Fisher matrix is singular".into()))?;
    Ok(inv[(k, k)] / photons as f64)
}

/// Runs `trials` independent fits of `photons` photons for every scene.
///
/// Trial t of scene s uses RNG substream (s, t) of `seed`, so reports are
/// identical whatever the scheduling.
pub fn crb_experiment(scenes: &[ExperimentScene], trials: usize, photons: usize, seed: u64) -> Result<Vec<TrialReport>> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    if photons == 0 {
        return Err(Error::Domain("at least one photon per trial is required".into()));
    }
    scenes
        .iter()
        .enumerate()
        .map(|(s, sc)| run_scene(s as u64, sc, trials, photons, seed))
        .collect()
}

fn run_scene(index: u64, sc: &ExperimentScene, trials: usize, photons: usize, seed: u64) -> Result<TrialReport> {
    let sampler = PhotonSampler::new(&sc.psf1, &sc.psf2, &sc.scene)?;
    let truth = [sc.scene.centroid(), sc.scene.separation(), sc.scene.eps()];
    let start = sc.start.unwrap_or(truth);
    let estimates: Vec<TrialEstimate> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, (index << 32) | t as u64);
            let xs = sampler.draw(&mut rng, photons);
            let fit = mle_fit(&sc.psf1, &sc.psf2, &xs, sc.model, start)?;
            Ok(TrialEstimate {
                trial: t,
                xbar_hat: fit.centroid,
                d_hat: fit.separation,
                eps_hat: fit.eps,
                loglik: fit.loglik,
                converged: fit.converged,
            })
        })
        .collect::<Result<_>>()?;

    let ok: Vec<&TrialEstimate> = estimates.iter().filter(|e| e.converged).collect();
    if ok.len() < 2 {
        return Err(Error::NoConvergence(format!(
            "only {} of {trials} fits converged for scene '{}'",
            ok.len(),
            sc.label
        )));
    }
    let free = sc.model.free();
    let value = |e: &TrialEstimate, i: usize| [e.xbar_hat, e.d_hat, e.eps_hat][i];
    let m = ok.len() as f64;
    let means: Vec<f64> = free.iter().map(|&i| ok.iter().map(|e| value(e, i)).sum::<f64>() / m).collect();
    let covariance: Vec<Vec<f64>> = (0..free.len())
        .map(|a| {
            (0..free.len())
                .map(|b| {
                    ok.iter()
                        .map(|e| (value(e, free[a]) - means[a]) * (value(e, free[b]) - means[b]))
                        .sum::<f64>()
                        / (m - 1.0)
                })
                .collect()
        })
        .collect();
    let kd = free.iter().position(|&i| i == 1).unwrap_or(0);
    let var_d = covariance[kd][kd];
    let crb_d = crb_separation(&sc.psf1, &sc.psf2, &sc.scene, sc.model, photons)?;
    let crb_d_known_eps = crb_separation(&sc.psf1, &sc.psf2, &sc.scene, FitModel::CentroidSeparation, photons)?;
    Ok(TrialReport {
        label: sc.label.clone(),
        model: sc.model,
        trials,
        photons,
        excluded: estimates.len() - ok.len(),
        estimates,
        mean_d: means[kd],
        bias_d: means[kd] - sc.scene.separation(),
        var_d,
        covariance,
        crb_d,
        crb_d_known_eps,
        ratio: var_d / crb_d,
    })
}
