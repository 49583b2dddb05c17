//! Subcommand implementations.

use crate::args::*;
use crate::manifest::{RunManifest, Stages};
use crate::CliError;
use rocarc_core::baselines::{benchmark_imbalanced, BenchmarkSpec};
use rocarc_core::data::{gen_gaussian_pair, load_csv, GaussianSpec, LabelMapping, SampleSet};
use rocarc_core::divergence::{
    default_rescale, divergence_sweep, estimate_divergence_pipeline, PipelineOptions,
};
use rocarc_core::estimator::{
    cross_validate, fit_atan_ratio, BandwidthSpec, FitDiagnostics, LambdaSpec, SolverConfig,
};
use rocarc_core::kernel::{median_heuristic, KernelScoreModel};
use rocarc_core::rocgeom::{empirical_roc, mixture_surface_grid};
use serde::Serialize;
use serde_json::json;
use std::path::Path;

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp-{}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
            std::process::id()
        )),
        None => Path::new(&format!(
            ".{}.tmp-{}",
            path.display(),
            std::process::id()
        ))
        .to_path_buf(),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("json encoding: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_csv_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    write_atomic(path, &buf)
}

fn manifest_sidecar(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let sidecar = path.with_extension(format!(
        "{}manifest.json",
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| format!("{e}."))
            .unwrap_or_default()
    ));
    write_json(&sidecar, manifest)
}

/// Builds the sample set from --input or the generator flags.
pub fn resolve_data(args: &DataArgs, seed: u64) -> Result<SampleSet, CliError> {
    let s = if let Some(path) = &args.input {
        let label = args
            .label
            .as_ref()
            .ok_or_else(|| CliError::Usage("--input requires --label".into()))?;
        let mapping = match &args.pos_label {
            Some(v) => LabelMapping::Positive(v.clone()),
            None => LabelMapping::Auto,
        };
        load_csv(path, label, &mapping).map_err(|e| CliError::Io(e.to_string()))?
    } else {
        let (n_pos, n_neg) = match (args.n, args.npos, args.nneg) {
            (_, Some(p), Some(q)) => (p, q),
            (Some(n), None, None) => (n, n),
            (Some(n), Some(p), None) => (p, n),
            (Some(n), None, Some(q)) => (n, q),
            _ => {
                return Err(CliError::Usage(
                    "generator needs --n or both --npos and --nneg".into(),
                ))
            }
        };
        let (spec_pos, spec_neg) = generator_specs(args)?;
        gen_gaussian_pair(&spec_pos, &spec_neg, n_pos, n_neg, seed)
            .map_err(|e| CliError::Usage(e.to_string()))?
    };
    Ok(if args.standardize {
        s.standardize_pooled()
    } else {
        s
    })
}

fn generator_specs(args: &DataArgs) -> Result<(GaussianSpec, GaussianSpec), CliError> {
    let usage = |e: rocarc_core::data::DataError| CliError::Usage(e.to_string());
    match (&args.mean_pos, &args.mean_neg) {
        (Some(mp), Some(mn)) => {
            let std_of = |std: &Option<Vec<f64>>, d: usize| -> Vec<f64> {
                std.clone().unwrap_or_else(|| vec![1.0; d])
            };
            Ok((
                GaussianSpec::new(mp.clone(), std_of(&args.std_pos, mp.len())).map_err(usage)?,
                GaussianSpec::new(mn.clone(), std_of(&args.std_neg, mn.len())).map_err(usage)?,
            ))
        }
        (None, None) => {
            let d = args.dim.max(1);
            let half = args.delta / 2.0;
            Ok((
                GaussianSpec::isotropic(vec![half; d], 1.0).map_err(usage)?,
                GaussianSpec::isotropic(vec![-half; d], 1.0).map_err(usage)?,
            ))
        }
        _ => Err(CliError::Usage(
            "--mean-pos and --mean-neg must be given together".into(),
        )),
    }
}

fn parse_lambda(text: &str) -> Result<LambdaSpec, CliError> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(LambdaSpec::Auto);
    }
    text.parse::<f64>()
        .map(LambdaSpec::Fixed)
        .map_err(|_| CliError::Usage(format!("--lambda must be a number or 'auto', got '{text}'")))
}

fn parse_bandwidth(text: &str, scale: f64) -> Result<BandwidthSpec, CliError> {
    if text.eq_ignore_ascii_case("median") {
        return Ok(if scale == 1.0 {
            BandwidthSpec::Median
        } else {
            BandwidthSpec::MedianScaled(scale)
        });
    }
    let v = text.parse::<f64>().map_err(|_| {
        CliError::Usage(format!(
            "--bandwidth must be a number or 'median', got '{text}'"
        ))
    })?;
    if scale != 1.0 {
        return Err(CliError::Usage(
            "--bandwidth-scale applies only to the median bandwidth".into(),
        ));
    }
    Ok(BandwidthSpec::Fixed(v))
}

/// Resolves solver arguments, running cross-validation when requested.
pub fn resolve_solver(
    args: &SolverArgs,
    s: &SampleSet,
    seed: u64,
) -> Result<SolverConfig, CliError> {
    let defaults = SolverConfig::default();
    let base = SolverConfig {
        lambda: parse_lambda(&args.lambda)?,
        bandwidth: parse_bandwidth(&args.bandwidth, args.bandwidth_scale)?,
        grad_tol: args.grad_tol.unwrap_or(defaults.grad_tol),
        max_newton_iters: args.max_newton_iters.unwrap_or(defaults.max_newton_iters),
        seed,
        ..defaults
    };
    match args.cv {
        None | Some(0) => Ok(base),
        Some(k) => {
            let med = median_heuristic(s).map_err(|e| CliError::Usage(e.to_string()))?;
            let bandwidths: Vec<f64> =
                args.cv_bandwidth_scales.iter().map(|c| c * med).collect();
            let chosen = cross_validate(s, &args.cv_lambdas, &bandwidths, k, seed)?;
            Ok(SolverConfig {
                lambda: chosen.lambda,
                bandwidth: chosen.bandwidth,
                ..base
            })
        }
    }
}

fn solver_echo(cfg: &SolverConfig, s: &SampleSet) -> serde_json::Value {
    json!({
        "config": cfg,
        "resolved_lambda": cfg.resolved_lambda(s).ok(),
        "resolved_bandwidth": cfg.resolved_bandwidth(s).ok(),
        "sample": s.metadata(),
    })
}

#[derive(Serialize)]
struct DiagnosticsDoc {
    converged: bool,
    diagnostics: FitDiagnostics,
    manifest: RunManifest,
}

pub fn cmd_fit(args: &FitArgs, seed: u64) -> Result<(), CliError> {
    let mut stages = Stages::start();
    let s = resolve_data(&args.data, seed)?;
    stages.mark("data");
    let cfg = resolve_solver(&args.solver, &s, seed)?;
    stages.mark("configure");
    let fit = fit_atan_ratio(&s, &cfg, None);
    stages.mark("fit");
    let diagnostics_path = args
        .diagnostics
        .clone()
        .unwrap_or_else(|| args.out.with_extension("diagnostics.json"));
    let mut manifest = RunManifest::new("fit", solver_echo(&cfg, &s), seed);
    match fit {
        Ok((model, diagnostics)) => {
            write_atomic(
                &args.out,
                model
                    .to_json()
                    .map_err(|e| CliError::Io(e.to_string()))?
                    .as_bytes(),
            )?;
            stages.mark("write");
            manifest.timings_ms = stages.into_timings();
            write_json(
                &diagnostics_path,
                &DiagnosticsDoc {
                    converged: true,
                    diagnostics,
                    manifest,
                },
            )?;
            Ok(())
        }
        Err(rocarc_core::estimator::EstimatorError::NonConvergence { diagnostics }) => {
            manifest.timings_ms = stages.into_timings();
            write_json(
                &diagnostics_path,
                &DiagnosticsDoc {
                    converged: false,
                    diagnostics: *diagnostics,
                    manifest,
                },
            )?;
            Err(CliError::NonConvergence(
                "fit did not converge; diagnostics written".into(),
            ))
        }
        Err(e) => Err(CliError::from(e)),
    }
}

#[derive(Serialize)]
struct ReportDoc {
    #[serde(flatten)]
    report: rocarc_core::DivergenceReport,
    manifest: RunManifest,
}

pub fn cmd_divergence(args: &DivergenceArgs, seed: u64) -> Result<(), CliError> {
    let mut stages = Stages::start();
    let s = resolve_data(&args.data, seed)?;
    stages.mark("data");
    let cfg = resolve_solver(&args.solver, &s, seed)?;
    stages.mark("configure");
    let opts = PipelineOptions {
        holdout: args.holdout,
        auc_bound: args.auc_bound,
    };
    let report = estimate_divergence_pipeline(&s, &cfg, &opts)?;
    stages.mark("pipeline");
    let mut manifest = RunManifest::new(
        "divergence",
        json!({
            "solver": solver_echo(&cfg, &s),
            "holdout": args.holdout,
            "auc_bound": args.auc_bound,
        }),
        seed,
    );
    manifest.timings_ms = stages.into_timings();
    write_json(&args.out, &ReportDoc { report, manifest })
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn cmd_figure_bounds(args: &FigureBoundsArgs, seed: u64) -> Result<(), CliError> {
    let mut stages = Stages::start();
    let rescale = args.rescale.unwrap_or_else(default_rescale);
    let rows = divergence_sweep(args.delta_min, args.delta_max, args.steps, rescale)?;
    stages.mark("sweep");
    let header = [
        "delta",
        "tv",
        "js",
        "w1",
        "roc_div",
        "roc_div_rescaled",
        "prop2_lower",
        "prop2_upper",
        "pinsker_ub",
        "bh_ub",
    ];
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt(r.delta),
                fmt(r.tv),
                fmt(r.js),
                fmt(r.w1),
                fmt(r.roc_div),
                fmt(r.roc_div_rescaled),
                fmt(r.prop2_lower),
                fmt(r.prop2_upper),
                fmt(r.pinsker_ub),
                fmt(r.bh_ub),
            ]
        })
        .collect();
    write_csv_rows(&args.out, &header, &records)?;
    stages.mark("write");
    let mut manifest = RunManifest::new(
        "figure-bounds",
        json!({
            "delta_min": args.delta_min,
            "delta_max": args.delta_max,
            "steps": args.steps,
            "rescale": rescale,
        }),
        seed,
    );
    manifest.timings_ms = stages.into_timings();
    manifest_sidecar(&args.out, &manifest)
}

pub fn cmd_benchmark(args: &BenchmarkArgs, seed: u64) -> Result<(), CliError> {
    let mut stages = Stages::start();
    let d = 5;
    let shift = 1.8 / (d as f64).sqrt();
    let neg = GaussianSpec::isotropic(vec![0.0; d], 1.0).expect("valid spec");
    let pos = match args.scenario {
        Scenario::Homoscedastic => {
            GaussianSpec::isotropic(vec![shift; d], 1.0).expect("valid spec")
        }
        Scenario::Heteroscedastic => {
            GaussianSpec::new(vec![shift; d], vec![2.0, 2.0, 0.5, 0.5, 1.0]).expect("valid spec")
        }
    };
    let mut spec = BenchmarkSpec::new(pos, neg);
    spec.test_per_class = args.test_size;
    if let Some(l) = &args.lambda {
        spec.solver.lambda = parse_lambda(l)?;
    }
    if let Some(b) = &args.bandwidth {
        spec.solver.bandwidth = parse_bandwidth(b, args.bandwidth_scale.unwrap_or(1.0))?;
    } else if let Some(scale) = args.bandwidth_scale {
        spec.solver.bandwidth = BandwidthSpec::MedianScaled(scale);
    }
    let table = benchmark_imbalanced(&spec, &args.npos_grid, args.nneg, args.repeats, seed)?;
    stages.mark("benchmark");

    let records: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.method.to_string(),
                r.n_pos.to_string(),
                r.repeat.to_string(),
                fmt(r.auc),
            ]
        })
        .collect();
    write_csv_rows(&args.out_csv, &["method", "n_pos", "repeat", "auc"], &records)?;
    stages.mark("write");
    let mut manifest = RunManifest::new(
        "benchmark",
        json!({
            "scenario": format!("{:?}", args.scenario),
            "npos_grid": args.npos_grid,
            "nneg": args.nneg,
            "repeats": args.repeats,
            "test_per_class": spec.test_per_class,
            "solver": spec.solver,
        }),
        seed,
    );
    manifest.timings_ms = stages.into_timings();
    manifest_sidecar(&args.out_csv, &manifest)?;
    #[derive(Serialize)]
    struct SummaryDoc<'a> {
        summaries: &'a [rocarc_core::baselines::BenchmarkSummary],
        manifest: RunManifest,
    }
    let mut manifest2 = RunManifest::new("benchmark", json!({"see": "csv manifest"}), seed);
    manifest2.timings_ms = Vec::new();
    write_json(
        &args.out_json,
        &SummaryDoc {
            summaries: &table.summaries,
            manifest: manifest2,
        },
    )
}

pub fn cmd_roc(args: &RocArgs, seed: u64) -> Result<(), CliError> {
    let mut stages = Stages::start();
    let s = resolve_data(&args.data, seed)?;
    stages.mark("data");
    let (scores_pos, scores_neg) = match &args.model {
        Some(path) => {
            let model = KernelScoreModel::load(path).map_err(|e| CliError::Io(e.to_string()))?;
            let sp = model
                .evaluate_batch(s.positives(), true)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let sn = model
                .evaluate_batch(s.negatives(), true)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            (sp.to_vec(), sn.to_vec())
        }
        None => {
            if s.dim() != 1 {
                return Err(CliError::Usage(
                    "without --model the input must be one-dimensional (identity score)".into(),
                ));
            }
            (
                s.positives().column(0).to_vec(),
                s.negatives().column(0).to_vec(),
            )
        }
    };
    stages.mark("score");
    let config_echo = json!({
        "model": args.model.as_ref().map(|p| p.display().to_string()),
        "surface": args.surface,
        "alphas": args.alphas,
        "taus": args.taus,
        "sample": s.metadata(),
    });
    if args.surface {
        let grid = mixture_surface_grid(&scores_pos, &scores_neg, args.alphas, args.taus)?;
        let records: Vec<Vec<String>> = grid
            .iter()
            .map(|p| vec![fmt(p.alpha), fmt(p.tau), fmt(p.fpr), fmt(p.tpr)])
            .collect();
        write_csv_rows(&args.out, &["alpha", "tau", "fpr", "tpr"], &records)?;
    } else {
        let curve = empirical_roc(&scores_pos, &scores_neg)?;
        let records: Vec<Vec<String>> = curve
            .points()
            .iter()
            .map(|p| vec![fmt(p.threshold), fmt(p.fpr), fmt(p.tpr)])
            .collect();
        write_csv_rows(&args.out, &["threshold", "fpr", "tpr"], &records)?;
    }
    stages.mark("write");
    let mut manifest = RunManifest::new("roc", config_echo, seed);
    manifest.timings_ms = stages.into_timings();
    manifest_sidecar(&args.out, &manifest)
}
