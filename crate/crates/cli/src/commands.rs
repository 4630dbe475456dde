use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::{Array1, ArrayView1};
use serde_json::json;
use sha2::{Digest, Sha256};
use sivc::crossval::{cross_validate, PathSettings};
use sivc::io::{read_frame, Frame, RunConfig, SavedModel, ScaleMode, MODEL_FORMAT};
use sivc::simulation::{run_experiment, ExperimentConfig, LIBRARY_VERSION};
use sivc::solver::tabulate_g;
use sivc::{fit_path, Dataset, Error, FitResult, Outcome, Result, SplineBasis};

/// Marker shown instead of a constant coefficient for varying effects.
pub const VARYING_MARKER: &str = "(varying)";

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.output_dir.as_deref().unwrap_or("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

struct Input {
    bytes: Vec<u8>,
    path: String,
}

impl Input {
    fn read(path: &str) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::Data(format!("cannot read '{path}': {e}")))?;
        Ok(Input {
            bytes,
            path: path.into(),
        })
    }

    fn sha256(&self) -> String {
        Sha256::digest(&self.bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "path": self.path, "bytes": self.bytes.len(), "sha256": self.sha256() })
    }
}

fn load(cfg: &RunConfig) -> Result<(Input, Frame, Dataset)> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no input file given".into()))?;
    let input = Input::read(path)?;
    let mode = if cfg.standardize { ScaleMode::Estimate } else { ScaleMode::Identity };
    let frame = read_frame(&input.bytes[..], cfg.delimiter_byte()?, &cfg.columns, cfg.outcome, mode, true)?;
    for w in &frame.warnings {
        warn!("{w}");
    }
    if frame.dropped > 0 {
        info!("dropped {} rows with missing values", frame.dropped);
    }
    let data = frame.dataset(&cfg.columns)?;
    Ok((input, frame, data))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Data(format!("cannot create {}: {e}", path.display())))
}

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let to_err = |e: csv::Error| Error::Data(format!("writing {}: {e}", path.display()));
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(r).map_err(to_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn effect_class(fit: &FitResult, j: usize) -> &'static str {
    if fit.selected_varying.contains(&j) {
        "varying"
    } else if fit.selected_constant.contains(&j) {
        "constant"
    } else {
        "zero"
    }
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// `v_min..v_max` of the fitted index, `points` values.
fn index_grid(data: &Dataset, beta: &Array1<f64>, points: usize) -> Array1<f64> {
    let v = data.u().dot(beta);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Array1::linspace(lo, hi, points)
}

pub fn fit(cfg: &RunConfig) -> Result<()> {
    let (input, frame, data) = load(cfg)?;
    let basis = cfg.knots.basis(&data)?;
    info!("fitting n = {}, p = {}, {} spline functions", data.n(), data.p(), basis.len());
    let path = fit_path(&data, &basis, &cfg.grid, cfg.k_strategy, &cfg.solver, cfg.weighted)?;
    let best = path.best();
    let coef = &best.coef;
    let dir = output_dir(cfg)?;
    let names = &cfg.columns;
    let sx = &frame.scaling.x;

    let header: Vec<String> = ["name", "coefficient", "gamma_hat", "alpha_norm", "effect_class", "gamma_hat_original"]
        .map(String::from)
        .to_vec();
    write_rows(
        &dir.join("coefficients.csv"),
        &header,
        names.x.iter().enumerate().map(|(k, name)| {
            let j = k + 1;
            let class = effect_class(best, j);
            let shown = if class == "varying" { VARYING_MARKER.to_string() } else { coef.gamma[j].to_string() };
            vec![
                name.clone(),
                shown,
                coef.gamma[j].to_string(),
                norm(coef.alpha.row(j)).to_string(),
                class.to_string(),
                (coef.gamma[j] / sx.sd[k]).to_string(),
            ]
        }),
    )?;

    // index direction on the original U scale
    let su = &frame.scaling.u;
    let raw: Vec<f64> = coef.beta.iter().zip(&su.sd).map(|(b, s)| b / s).collect();
    let raw_norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    write_rows(
        &dir.join("beta.csv"),
        &["name", "beta", "beta_original_direction"].map(String::from),
        names.u.iter().enumerate().map(|(k, name)| {
            vec![name.clone(), coef.beta[k].to_string(), (raw[k] / raw_norm).to_string()]
        }),
    )?;
    write_rows(
        &dir.join("psi.csv"),
        &["name", "psi"].map(String::from),
        names.z.iter().enumerate().map(|(k, name)| vec![name.clone(), coef.psi[k].to_string()]),
    )?;

    let grid = index_grid(&data, &coef.beta, cfg.curve_points);
    let g = tabulate_g(coef, &basis, grid.view());
    let mut header = vec!["v".to_string(), "baseline".to_string()];
    header.extend(names.x.iter().cloned());
    write_rows(
        &dir.join("curves.csv"),
        &header,
        grid.iter().enumerate().map(|(i, v)| {
            std::iter::once(v.to_string())
                .chain(g.row(i).iter().map(|x| x.to_string()))
                .collect::<Vec<_>>()
        }),
    )?;

    let eta = sivc::model::linear_predictor(&data, coef, &basis)?;
    write_rows(
        &dir.join("fitted.csv"),
        &["line", "eta"].map(String::from),
        frame.lines.iter().zip(eta.iter()).map(|(l, e)| vec![l.to_string(), e.to_string()]),
    )?;

    fs::write(dir.join("selection_unweighted.tsv"), path.unweighted.to_tsv())?;
    if let Some(w) = &path.weighted {
        fs::write(dir.join("selection_weighted.tsv"), w.to_tsv())?;
    }

    let model = SavedModel {
        format: MODEL_FORMAT,
        outcome: cfg.outcome,
        columns: cfg.columns.clone(),
        scaling: frame.scaling.clone(),
        knots: basis.grid().clone(),
        coef: coef.clone(),
        lambda1: best.lambda1,
        lambda2: best.lambda2,
    };
    fs::write(dir.join("model.json"), model.to_json_string()? + "\n")?;

    let report = path.final_report();
    let n_events = match data.outcome() {
        Outcome::Cox(s) => Some(s.n_events()),
        Outcome::Gaussian(_) => None,
    };
    let name_of = |j: &usize| names.x[j - 1].clone();
    write_json(
        &dir.join("report.json"),
        &json!({
            "n": data.n(),
            "n_events": n_events,
            "rows_dropped": frame.dropped,
            "warnings": frame.warnings,
            "stage": format!("{:?}", report.stage),
            "lambda_max": [report.lambda_max.0, report.lambda_max.1],
            "lambda1": best.lambda1,
            "lambda2": best.lambda2,
            "bic": best.bic,
            "df": best.df,
            "loglik": best.loglik,
            "objective": best.objective,
            "converged": best.converged,
            "outer_iterations": best.outer_iterations,
            "start": best.start,
            "grid_cells_failed": report.cells.iter().filter(|c| c.bic.is_none()).count(),
            "grid_cells_unconverged": report.cells.iter().filter(|c| !c.converged).count(),
            "selected_constant": best.selected_constant.iter().map(name_of).collect::<Vec<_>>(),
            "selected_varying": best.selected_varying.iter().map(name_of).collect::<Vec<_>>(),
            "knots": basis.grid().points(),
        }),
    )?;
    write_manifest(&dir, "fit", cfg, Some(&input))?;
    println!("{}", path.summary().trim_end());
    Ok(())
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, input: Option<&Input>) -> Result<()> {
    let config: toml::Value = toml::Value::try_from(cfg).map_err(|e| Error::Config(e.to_string()))?;
    write_json(
        &dir.join("manifest.json"),
        &json!({
            "command": command,
            "version": sivc::VERSION,
            "cli_version": env!("CARGO_PKG_VERSION"),
            "model_format": MODEL_FORMAT,
            "seed": cfg.seed,
            "threads": rayon_threads(),
            "input": input.map(Input::describe),
            "config": config,
        }),
    )
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn predict(model_path: &Path, input_path: &Path, delimiter: Option<&str>, out: &str) -> Result<()> {
    let text = fs::read_to_string(model_path)
        .map_err(|e| Error::Config(format!("cannot read model '{}': {e}", model_path.display())))?;
    let model = SavedModel::from_json_str(&text)?;
    let input = Input::read(&input_path.to_string_lossy())?;
    let probe = RunConfig {
        input: Some(input.path.clone()),
        delimiter: delimiter.map(String::from),
        ..RunConfig::default()
    };
    let frame = read_frame(
        &input.bytes[..],
        probe.delimiter_byte()?,
        &model.columns,
        model.outcome,
        ScaleMode::Apply(&model.scaling),
        false,
    )?;
    let eta = model.predict(frame.x.view(), frame.u.view(), frame.z.view())?;
    let dir = PathBuf::from(out);
    fs::create_dir_all(&dir)?;
    write_rows(
        &dir.join("predictions.csv"),
        &["line", "eta"].map(String::from),
        frame.lines.iter().zip(eta.iter()).map(|(l, e)| vec![l.to_string(), e.to_string()]),
    )?;
    info!("wrote {} predictions ({} rows dropped)", eta.len(), frame.dropped);
    Ok(())
}

pub fn crossval(cfg: &RunConfig) -> Result<()> {
    let (input, _frame, data) = load(cfg)?;
    let basis: SplineBasis = cfg.knots.basis(&data)?;
    let settings = PathSettings {
        grid: cfg.grid,
        strategy: cfg.k_strategy,
        solver: cfg.solver.clone(),
        weighted: cfg.weighted,
    };
    let report = cross_validate(&data, &basis, &settings, &cfg.crossval)?;
    let dir = output_dir(cfg)?;
    fs::write(dir.join("crossval.tsv"), report.to_tsv())?;
    write_json(
        &dir.join("crossval.json"),
        &serde_json::to_value(&report).map_err(|e| Error::Data(e.to_string()))?,
    )?;
    write_manifest(&dir, "crossval", cfg, Some(&input))?;
    println!("{} over {} splits: mean {:.4}, sd {:.4}", report.metric, report.splits.len(), report.mean, report.sd);
    Ok(())
}

pub fn simulate(cfg: &ExperimentConfig, dir: &str) -> Result<()> {
    let out = run_experiment(cfg)?;
    let dir = PathBuf::from(dir);
    fs::create_dir_all(&dir)?;
    out.write_dir(&dir)?;
    let config: toml::Value = toml::Value::try_from(cfg).map_err(|e| Error::Config(e.to_string()))?;
    write_json(
        &dir.join("manifest.json"),
        &json!({
            "command": "simulate",
            "version": sivc::VERSION,
            "cli_version": env!("CARGO_PKG_VERSION"),
            "library_version": LIBRARY_VERSION,
            "seed": cfg.seed,
            "censoring_mean": out.censoring_mean,
            "config": config,
        }),
    )?;
    print!("{}", out.summary_tsv());
    if !out.failures.is_empty() {
        warn!("{} replicate fits failed; see failures.tsv", out.failures.len());
    }
    Ok(())
}
