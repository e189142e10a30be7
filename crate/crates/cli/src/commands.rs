//! Command implementations.

use crate::config::*;
use crate::error::CliError;
use crate::output::{check_writable, emit, emit_json, SCHEMA_VERSION};
use rayon::prelude::*;
use serde_json::{json, Value};
use superres::gaussian::{ratio_eta, ratio_samewidth, GaussianRatio};
use superres::lab::{crb_experiment, ExperimentScene, FitModel};
use superres::oracle::{
    build_rho, compare_with_closed_form, default_coarse_spacing, entry_error, qfi_numeric, refinement_check,
    sld_commutator_check, GridSpec,
};
use superres::psf::{make_gaussian, make_perturbed, moment_set, read_psf_file, PerturbationMix, Psf};
use superres::qcrb::{
    hd_direct, hd_exact_general, hd_exact_identical, hd_known, qfi_unknown_identical, SourceScene,
};
use superres::smalld::{
    default_schedule, regime_ratio, regime_verify, validate_exponents, PsfFamily, RegimeSpec, RegimeTable,
};

type Res<T> = Result<T, CliError>;

/// Largest photons × trials product accepted without `--force`.
const SIMULATION_BUDGET: f64 = 1e9;

pub fn run(cmd: &Command) -> Res<()> {
    match cmd {
        Command::Precision(a) => precision(a),
        Command::Scan(a) => scan(a),
        Command::Regime(a) => regime(a),
        Command::OracleCheck(a) => oracle_check(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn base_psf(a: &PsfArgs) -> Res<Psf> {
    match a.psf {
        PsfKindArg::Gaussian => {
            let s = a.sigma.ok_or_else(|| CliError::usage("--sigma is required for a Gaussian PSF"))?;
            Ok(make_gaussian(s)?)
        }
        PsfKindArg::Grid => {
            let p = a.psf_file.as_ref().ok_or_else(|| CliError::usage("--psf-file is required for a grid PSF"))?;
            Ok(read_psf_file(p)?)
        }
        PsfKindArg::Perturbed => Err(CliError::usage("only the second PSF can be a perturbation")),
    }
}

/// Both PSFs and whether they are the same function.
fn psf_pair(a: &PsfArgs) -> Res<(Psf, Psf, bool)> {
    let p1 = base_psf(a)?;
    let p2 = match a.psf2 {
        None => {
            if a.sigma2.is_some() || a.psf2_file.is_some() || a.theta.is_some() {
                return Err(CliError::usage("second-PSF options need --psf2"));
            }
            return Ok((p1.clone(), p1, true));
        }
        Some(PsfKindArg::Gaussian) => {
            let s = a.sigma2.ok_or_else(|| CliError::usage("--sigma2 is required for a Gaussian second PSF"))?;
            make_gaussian(s)?
        }
        Some(PsfKindArg::Grid) => {
            let p = a
                .psf2_file
                .as_ref()
                .ok_or_else(|| CliError::usage("--psf2-file is required for a grid second PSF"))?;
            read_psf_file(p)?
        }
        Some(PsfKindArg::Perturbed) => {
            let theta = a.theta.ok_or_else(|| CliError::usage("--theta is required for a perturbed PSF"))?;
            let mix = PerturbationMix::from_modes(&[(a.mode.unwrap_or(2), 1.0)])?;
            make_perturbed(&p1, theta, mix)?
        }
    };
    let same = p1 == p2;
    Ok((p1, p2, same))
}

fn scene_of(s: &SceneArgs, p1: &Psf, p2: &Psf) -> Res<SourceScene> {
    let d = match s.units {
        Units::Length => s.d,
        Units::SigmaBar => s.d * 0.5 * (p1.width() + p2.width()),
    };
    Ok(SourceScene::from_eps(s.xbar, d, s.eps, s.ntot)?)
}

fn scene_json(s: &SourceScene) -> Value {
    json!({ "xbar": s.centroid(), "d": s.separation(), "eps": s.eps(), "ntot": s.n_tot() })
}

fn precision(a: &PrecisionArgs) -> Res<()> {
    check_writable(a.output.as_deref())?;
    let (p1, p2, same) = psf_pair(&a.psf)?;
    let scene = scene_of(&a.scene, &p1, &p2)?;
    let needs_identical = |name: &str| {
        if same {
            Ok(())
        } else {
            Err(CliError::usage(format!("model {name} needs identical PSFs; drop --psf2")))
        }
    };
    let report = match a.model {
        ModelArg::Direct => hd_direct(&p1, &p2, &scene)?,
        ModelArg::KnownN => {
            needs_identical("known-N")?;
            hd_known(&p1, &scene)?
        }
        ModelArg::UnknownIdentical => {
            needs_identical("unknown-identical")?;
            hd_exact_identical(&p1, &scene)?
        }
        ModelArg::UnknownGeneral => hd_exact_general(&p1, &p2, &scene)?,
    };
    let mut v = serde_json::to_value(report).expect("report serializes");
    let obj = v.as_object_mut().expect("report is an object");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!("precision"));
    obj.insert("scene".into(), scene_json(&scene));
    emit_json(a.output.as_deref(), &v)
}

/// Inclusive, strictly increasing axis.
fn axis(min: f64, max: f64, step: f64, name: &str) -> Res<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite() && step > 0.0 && max > min) {
        return Err(CliError::usage(format!(
            "{name} range must be finite and increasing with a positive step (got {min}..{max} by {step})"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(CliError::usage(format!("{name} range has too many points")));
    }
    // Snap to a 1e-12 lattice so printed coordinates read 0.3, not 0.30000000000000004.
    Ok((0..=n).map(|i| ((min + i as f64 * step) * 1e12).round() / 1e12).collect())
}

fn flag(r: &GaussianRatio) -> &'static str {
    if r.ambiguous {
        "ambiguous"
    } else if r.curse {
        "curse"
    } else {
        ""
    }
}

fn scan(a: &ScanArgs) -> Res<()> {
    check_writable(a.output.as_deref())?;
    let (lo, hi, st) = match a.figure {
        Figure::Fig2 | Figure::Fig3a => (-0.99, 0.99, 0.01),
        Figure::Fig3b => (0.0, 1.0, 0.005),
        Figure::Fig4 => (0.0, 0.5, 0.01),
    };
    let xs = axis(a.min.unwrap_or(lo), a.max.unwrap_or(hi), a.step.unwrap_or(st), "scan")?;
    let default_values: Vec<f64> = match a.figure {
        Figure::Fig2 => vec![0.5, 1.0, 2.0],
        Figure::Fig3a => vec![0.1, 0.3, 0.5, 0.7],
        Figure::Fig3b => vec![0.1, 0.3, 0.5],
        Figure::Fig4 => vec![0.0, 0.5],
    };
    let values = a.values.clone().unwrap_or(default_values);
    let eta_b = a.eta.unwrap_or(0.005);
    let ys = match a.figure {
        Figure::Fig4 => axis(a.min2.unwrap_or(0.0), a.max2.unwrap_or(2.0), a.step2.unwrap_or(0.02), "second")?,
        _ => vec![f64::NAN],
    };
    let header: Vec<&str> = match a.figure {
        Figure::Fig2 => vec!["eps", "d_over_sigma", "ratio", "flag"],
        Figure::Fig3a => vec!["eps", "eta", "ratio", "flag"],
        Figure::Fig3b => vec!["d_tilde", "eps", "eta", "ratio", "flag"],
        Figure::Fig4 => vec!["eps", "eta", "d_tilde", "ratio", "flag"],
    };
    let mut points = Vec::new();
    for &v in &values {
        for &x in &xs {
            for &y in &ys {
                points.push((v, x, y));
            }
        }
    }
    let figure = a.figure;
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|&(v, x, y)| -> Res<Vec<String>> {
            let f = |t: f64| format!("{t}");
            Ok(match figure {
                Figure::Fig2 => {
                    let r = ratio_samewidth(x, v)?;
                    vec![f(x), f(v), f(r.value), flag(&r).into()]
                }
                Figure::Fig3a => {
                    let r = ratio_eta(v, x, 0.0)?;
                    vec![f(x), f(v), f(r.value), flag(&r).into()]
                }
                Figure::Fig3b => {
                    let r = ratio_eta(eta_b, v, x)?;
                    vec![f(x), f(v), f(eta_b), f(r.value), flag(&r).into()]
                }
                Figure::Fig4 => {
                    let r = ratio_eta(x, v, y)?;
                    vec![f(v), f(x), f(y), f(r.value), flag(&r).into()]
                }
            })
        })
        .collect::<Res<_>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
    emit(a.output.as_deref(), &bytes)
}

fn regime_spec(a: &RegimeArgs) -> RegimeSpec {
    let mut spec = match a.table {
        TableArg::General => {
            // h = 0 leaves e = f = 0 as the only admissible exponents.
            let zero = a.h == Some(0);
            let mut s = RegimeSpec::general(0, 0, 0, 0);
            s.h = a.h;
            s.e = a.e.or(if zero { Some(0) } else { None });
            s.f = a.f.or(if zero { Some(0) } else { None });
            s
        }
        TableArg::Gaussian => {
            let mut s = RegimeSpec::gaussian(0, 0);
            s.t = a.t;
            s
        }
    };
    spec.s = a.s;
    spec.a = a.a;
    spec.b = a.b;
    spec.c = a.c;
    spec.y = a.y;
    spec.z = a.z;
    spec
}

fn regime(a: &RegimeArgs) -> Res<()> {
    check_writable(a.output.as_deref())?;
    let spec = regime_spec(a);
    let check = validate_exponents(&spec);
    if !check.valid {
        return Err(CliError::usage(format!("invalid exponents: {}", check.violations.join("; "))));
    }
    let gauss = make_gaussian(1.0)?;
    let moments = moment_set(&gauss, &gauss, 0.0);
    let predicted = regime_ratio(&spec, Some(&moments));
    let mut out = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "regime",
        "spec": spec,
        "predicted": predicted,
        "predicted_ratio": predicted.value(),
    });
    if a.verify {
        let family = match (a.family, spec.table) {
            (Some(FamilyArg::GaussianWidths), _) | (None, RegimeTable::Gaussian) => {
                PsfFamily::GaussianWidths { sigma_bar: 1.0 }
            }
            (Some(FamilyArg::Identical), _) => PsfFamily::Identical { psf: gauss.clone() },
            (None, RegimeTable::General) if spec.h.is_some_and(|h| h >= 5) => {
                PsfFamily::Identical { psf: gauss.clone() }
            }
            (Some(FamilyArg::Perturbed), _) | (None, RegimeTable::General) => PsfFamily::Perturbed { base_sigma: 1.0 },
        };
        let v = regime_verify(&spec, &family, &default_schedule())?;
        let obj = out.as_object_mut().expect("object");
        obj.insert("predicted".into(), json!(v.predicted));
        obj.insert("predicted_ratio".into(), json!(v.predicted.value()));
        obj.insert("verified_limit".into(), json!(v.limit));
        obj.insert("deviation".into(), json!(v.deviation));
        obj.insert("agreement".into(), json!(v.deviation.is_some_and(|d| d <= 1e-3)));
        obj.insert("points".into(), json!(v.points));
    }
    emit_json(a.output.as_deref(), &out)
}

fn oracle_check(a: &OracleArgs) -> Res<()> {
    check_writable(a.output.as_deref())?;
    let custom = a.sigma1.is_some() || a.sigma2.is_some() || a.d.is_some() || a.eps.is_some();
    let scenes: Vec<(String, f64, f64, f64, f64)> = if custom {
        let s1 = a.sigma1.unwrap_or(1.0);
        let s2 = a.sigma2.unwrap_or(s1);
        let d = a.d.ok_or_else(|| CliError::usage("--d is required for a custom oracle scene"))?;
        vec![("custom".into(), s1, s2, d, a.eps.unwrap_or(0.0))]
    } else {
        vec![
            ("unequal-widths".into(), 1.0, 1.2, 0.5, 0.3),
            ("identical".into(), 1.0, 1.0, 1.0, 0.0),
            ("wide-imbalanced".into(), 1.0, 2.0, 2.0, 0.8),
        ]
    };
    let mut rows = Vec::new();
    let mut pass = true;
    for (label, s1, s2, d, eps) in scenes {
        let p1 = make_gaussian(s1)?;
        let p2 = make_gaussian(s2)?;
        let scene = SourceScene::from_eps(0.0, d, eps, 1.0)?;
        let mut grid = GridSpec::default_for(&p1, &p2, &scene);
        if let Some(h) = a.spacing {
            grid = GridSpec::new(grid.center, grid.half_width, h)?;
        }
        let cmp = compare_with_closed_form(&p1, &p2, &scene, &grid)?;
        let refine = refinement_check(&p1, &p2, &scene, default_coarse_spacing(&p1, &p2))?;
        let op = build_rho(&p1, &p2, &scene, &grid)?;
        let commutator = sld_commutator_check(&op)?;
        let identical_error = if s1 == s2 {
            Some(entry_error(&qfi_numeric(&op)?, &qfi_unknown_identical(&p1, &scene)?))
        } else {
            None
        };
        let ok = cmp.max_rel_error <= 1e-4
            && refine.factor >= 4.0
            && commutator <= 1e-10
            && identical_error.is_none_or(|e| e <= 1e-4);
        pass &= ok;
        rows.push(json!({
            "label": label,
            "sigma1": s1, "sigma2": s2, "d": d, "eps": eps,
            "comparison": cmp,
            "refinement": refine,
            "max_imag_trace": commutator,
            "identical_reduction_error": identical_error,
            "pass": ok,
        }));
    }
    emit_json(
        a.output.as_deref(),
        &json!({ "schema_version": SCHEMA_VERSION, "command": "oracle-check", "scenes": rows, "pass": pass }),
    )
}

fn simulate(a: &SimulateArgs) -> Res<()> {
    check_writable(a.output.as_deref())?;
    check_writable(a.summary.as_deref())?;
    let total = a.photons as f64 * a.trials as f64;
    if total > SIMULATION_BUDGET && !a.force {
        return Err(CliError::usage(format!(
            "photons × trials = {total:.3e} exceeds the budget of 1e9; pass --force to run anyway"
        )));
    }
    if a.trials == 0 || a.photons == 0 {
        return Err(CliError::usage("--photons and --trials must be positive"));
    }
    let (p1, p2, _) = psf_pair(&a.psf)?;
    let scene = scene_of(&a.scene, &p1, &p2)?;
    let model = match a.fit {
        FitArg::D => FitModel::SeparationOnly,
        FitArg::XbarD => FitModel::CentroidSeparation,
        FitArg::XbarDEps => FitModel::Full,
    };
    let start = a.start_d.map(|d| [scene.centroid(), d, scene.eps()]);
    let exp = ExperimentScene {
        label: "scene".into(),
        psf1: p1,
        psf2: p2,
        scene,
        model,
        start,
    };
    let report = crb_experiment(std::slice::from_ref(&exp), a.trials, a.photons, a.seed)?
        .pop()
        .expect("one scene");
    let mut csv_bytes = Vec::new();
    report.write_csv(&mut csv_bytes)?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "fit": model.tag(),
        "seed": a.seed,
        "scene": scene_json(&scene),
        "trials": report.trials,
        "photons": report.photons,
        "excluded": report.excluded,
        "mean_d": report.mean_d,
        "bias_d": report.bias_d,
        "var_d": report.var_d,
        "crb_d": report.crb_d,
        "crb_d_known_eps": report.crb_d_known_eps,
        "var_over_crb": report.ratio,
        "inflation_vs_known_eps": report.var_d / report.crb_d_known_eps,
        "slack_floor": report.slack_floor(),
    });
    emit(a.output.as_deref(), &csv_bytes)?;
    if let Some(p) = a.summary.as_deref() {
        emit_json(Some(p), &summary)?;
    }
    if a.output.is_some() {
        emit_json(None, &summary)?;
    } else if a.summary.is_none() {
        eprintln!("{}", serde_json::to_string(&summary).expect("json values serialize"));
    }
    Ok(())
}
