use std::path::Path;

use carma_core::alpha::{alpha_by_recursion, eta, xi_roots};
use carma_core::levy::{default_burn_in, generate_subgrid, simulate_path, simulate_path_with_states};
use carma_core::recovery::{
    carma2_error_closed_form, kernel_arma, kernel_on_lattice, recovery_error_mc, sample_autocovariance,
    ArSource, KernelSource, McOptions,
};
use carma_core::riemann::{match_h_numerically, optimal_rules, riemann_arma_coefficients, RuleSet};
use carma_core::spectral::asymptotic_arma;
use carma_core::{CarmaModel, InitialState, SampledArma};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, InitKind, KernelMode, ModelSource, PRESETS};
use crate::error::CliResult;
use crate::output::{metadata, Sink};

pub const DEFAULT_OUT: &str = "carma-out";
pub const KERNEL_POINTS: usize = 8;
const CURVE_POINTS: usize = 201;

/// Runs a validated experiment. Returns the JSON document printed on stdout.
pub fn run(config: &ExperimentConfig) -> CliResult<Value> {
    config.validate()?;
    let writes_files = matches!(config.kind, ExperimentKind::Simulate | ExperimentKind::KernelStudy);
    let sink = match (&config.out, writes_files) {
        (Some(dir), _) => Some(Sink::new(dir, config)?),
        (None, true) => Some(Sink::new(Path::new(DEFAULT_OUT), config)?),
        (None, false) => None,
    };
    let result = match config.kind {
        ExperimentKind::Simulate => simulate(config, sink.as_ref().expect("file sink"))?,
        ExperimentKind::SampleArma => sample_arma(config)?,
        ExperimentKind::Alpha => alpha(config)?,
        ExperimentKind::Riemann => riemann(config)?,
        ExperimentKind::Recover => recover(config, sink.as_ref())?,
        ExperimentKind::KernelStudy => kernel_study(config, sink.as_ref().expect("file sink"))?,
    };
    if let Some(s) = &sink {
        let name = format!("{}.json", kind_name(config.kind));
        s.json(&name, &result)?;
    }
    Ok(json!({ "meta": metadata(config), "result": result }))
}

fn kind_name(kind: ExperimentKind) -> String {
    serde_json::to_string(&kind).unwrap_or_default().trim_matches('"').replace('_', "-")
}

/// `d6` for `delta = 2^-6`, otherwise the decimal value with `p` for the point.
pub fn delta_tag(delta: f64) -> String {
    let k = -delta.log2();
    if (k - k.round()).abs() < 1e-12 && k.round() >= 0.0 {
        format!("d{}", k.round() as i64)
    } else {
        format!("d{}", delta.to_string().replace('.', "p"))
    }
}

fn h_label(h: f64) -> String {
    let s = format!("{h:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.into() }
}

fn init_state(kind: InitKind) -> InitialState {
    match kind {
        InitKind::Zero => InitialState::Zero,
        InitKind::Stationary => InitialState::StationaryGaussian,
        InitKind::BurnIn => InitialState::BurnIn(None),
    }
}

fn simulate(config: &ExperimentConfig, sink: &Sink) -> CliResult<Value> {
    let model = config.model()?;
    let n = config.n.expect("validated");
    let mut runs = Vec::new();
    let mut stream = 0u64;
    for delta in config.deltas()? {
        for driver in config.drivers() {
            let m = config.subgrid.unwrap_or_else(|| driver.default_subgrid());
            let extra = match config.init {
                InitKind::BurnIn => default_burn_in(&model, delta),
                _ => 0,
            };
            let inc = generate_subgrid(driver, config.seed, stream, delta, n + extra, m)?;
            let path = if config.states {
                simulate_path_with_states(&model, inc, init_state(config.init))?
            } else {
                simulate_path(&model, inc, init_state(config.init))?
            };
            let name = format!("path_{}_{}.csv", driver.name(), delta_tag(delta));
            let file = sink.csv(&name, &[format!("# driver {}", serde_json::to_string(&driver).unwrap())], |w| {
                path.write_csv(w)
            })?;
            runs.push(json!({
                "delta": delta,
                "driver": driver,
                "stream": stream,
                "subgrid_factor": m,
                "file": file,
                "len": path.len(),
                "sample_variance": sample_autocovariance(&path.y_values, 1)[0],
                "model_variance": model.autocovariance(0.0),
            }));
            stream += 1;
        }
    }
    Ok(Value::Array(runs))
}

fn arma_summary(arma: &SampledArma) -> CliResult<Value> {
    let mut v = serde_json::to_value(arma).expect("arma serializes");
    v["min_ma_root_modulus"] = json!(arma.min_ma_root_modulus()?);
    Ok(v)
}

fn sample_arma(config: &ExperimentConfig) -> CliResult<Value> {
    let model = config.model()?;
    let mut out = Vec::new();
    for delta in config.deltas()? {
        let exact = SampledArma::exact(&model, delta)?;
        let mut entry = json!({ "delta": delta, "exact": arma_summary(&exact)? });
        if config.asymptotic {
            entry["asymptotic"] = arma_summary(&asymptotic_arma(&model, delta)?)?;
        }
        out.push(entry);
    }
    Ok(Value::Array(out))
}

fn alpha(config: &ExperimentConfig) -> CliResult<Value> {
    let n = config.n.expect("validated");
    let f = alpha_by_recursion(n);
    let roots = xi_roots(n)?;
    let etas = roots.iter().map(|&x| eta(x)).collect::<carma_core::Result<Vec<_>>>()?;
    Ok(json!({
        "n": n,
        "numerator": f.numerator.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "normalization": f.normalization().to_string(),
        "xi_roots": roots,
        "eta": etas,
    }))
}

fn riemann(config: &ExperimentConfig) -> CliResult<Value> {
    if let Some(pq) = config.pq {
        let rules = optimal_rules(pq)?;
        let numeric = if pq >= 2 { Some(match_h_numerically(pq)?) } else { None };
        return Ok(json!({ "rules": rules, "numeric_matching_h": numeric }));
    }
    let model = config.model()?;
    let mut out = Vec::new();
    for delta in config.deltas()? {
        for &h in &config.h {
            out.push(serde_json::to_value(riemann_arma_coefficients(&model, delta, h)?).expect("serializes"));
        }
    }
    Ok(Value::Array(out))
}

fn recover(config: &ExperimentConfig, sink: Option<&Sink>) -> CliResult<Value> {
    let model = config.model()?;
    let t = config.t.expect("validated");
    let paths = config.paths.expect("validated");
    let mut rows = Vec::new();
    for delta in config.deltas()? {
        for driver in config.drivers() {
            let opts = McOptions { seed: config.seed, subgrid_factor: config.subgrid };
            let est = recovery_error_mc(&model, delta, t, paths, driver, opts)?;
            let closed = if model.p() == 2 {
                Some(carma2_error_closed_form(&model, delta, t)?)
            } else {
                None
            };
            rows.push(json!({
                "delta": delta,
                "driver": driver,
                "t": t,
                "paths": paths,
                "mse": est.mean_sq_error,
                "stderr": est.mc_stderr,
                "closed_form": closed,
            }));
        }
    }
    if let Some(s) = sink {
        s.csv("recover.csv", &[], |w| {
            writeln!(w, "delta,driver,t,paths,mse,stderr,closed_form")?;
            for r in &rows {
                let closed = r["closed_form"].as_f64().map_or(String::new(), |v| v.to_string());
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    r["delta"], r["driver"]["kind"].as_str().unwrap_or(""), t, paths, r["mse"], r["stderr"], closed
                )?;
            }
            Ok(())
        })?;
    }
    if rows.len() == 1 {
        Ok(rows.pop().expect("one row"))
    } else {
        Ok(Value::Array(rows))
    }
}

fn study_models(config: &ExperimentConfig) -> CliResult<Vec<(String, CarmaModel)>> {
    match &config.model {
        None => Ok(PRESETS
            .iter()
            .map(|name| (name.to_string(), crate::config::preset(name).expect("preset")))
            .collect()),
        Some(src) => {
            let name = match src {
                ModelSource::Inline(_) => "model".to_string(),
                ModelSource::Named(s) => Path::new(s)
                    .file_stem()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "model".into()),
            };
            Ok(vec![(name, src.load()?)])
        }
    }
}

/// Offsets `h` at which the true kernel is tabulated: the grid points, the midpoint,
/// the matching rules for the model's `p - q`, then any requested extras.
fn study_offsets(model: &CarmaModel, extra: &[f64]) -> Vec<f64> {
    let mut hs = vec![0.0, 0.5, 1.0];
    if let Ok(rules) = optimal_rules(model.p() - model.q()) {
        if let RuleSet::Finite(v) = rules.matching_h {
            hs.extend(v);
        }
    }
    hs.extend_from_slice(extra);
    let mut out: Vec<f64> = Vec::new();
    for h in hs {
        if !out.iter().any(|o| h_label(*o) == h_label(h)) {
            out.push(h);
        }
    }
    out
}

fn kernel_study(config: &ExperimentConfig, sink: &Sink) -> CliResult<Value> {
    let mut entries = Vec::new();
    let mut stream = 0u64;
    for (name, model) in study_models(config)? {
        let offsets = study_offsets(&model, &config.h);
        for delta in config.deltas()? {
            let arma = match config.kernel_mode {
                KernelMode::Theoretical => kernel_arma(KernelSource::Theoretical(&model), delta)?,
                KernelMode::Empirical => {
                    let n = config.n.expect("validated");
                    let inc = generate_subgrid(carma_core::Driver::BrownianMotion, config.seed, stream, delta, n, 1)?;
                    let path = simulate_path(&model, inc, InitialState::StationaryGaussian)?;
                    kernel_arma(KernelSource::Empirical(&path, &ArSource::YuleWalker(model.p())), delta)?
                }
            };
            stream += 1;
            let ghat = kernel_on_lattice(&arma, KERNEL_POINTS);
            let tag = delta_tag(delta);
            let mut header = String::from("j,t,ghat");
            for h in &offsets {
                header.push_str(&format!(",g_h{}", h_label(*h)));
            }
            let offset_line = format!(
                "# offsets {}",
                offsets.iter().map(|h| format!("{h:.17}")).collect::<Vec<_>>().join(" ")
            );
            let mut max_rel = vec![0.0_f64; offsets.len()];
            let mut rows = Vec::with_capacity(KERNEL_POINTS);
            for (j, g) in ghat.iter().enumerate() {
                let t = j as f64 * delta;
                let truth: Vec<f64> = offsets.iter().map(|h| model.kernel(t + h * delta)).collect();
                for (k, v) in truth.iter().enumerate() {
                    max_rel[k] = max_rel[k].max(((g - v) / v).abs());
                }
                rows.push((j, t, *g, truth));
            }
            let file = sink.csv(&format!("kernel_{name}_{tag}.csv"), &[offset_line], |w| {
                writeln!(w, "{header}")?;
                for (j, t, g, truth) in &rows {
                    write!(w, "{j},{t},{g}")?;
                    for v in truth {
                        write!(w, ",{v}")?;
                    }
                    writeln!(w)?;
                }
                Ok(())
            })?;
            let span = KERNEL_POINTS as f64 * delta;
            let curve = sink.csv(&format!("kernel_{name}_{tag}_curve.csv"), &[], |w| {
                writeln!(w, "t,g")?;
                for i in 0..CURVE_POINTS {
                    let t = span * i as f64 / (CURVE_POINTS - 1) as f64;
                    writeln!(w, "{t},{}", model.kernel(t))?;
                }
                Ok(())
            })?;
            let errors: serde_json::Map<String, Value> = offsets
                .iter()
                .zip(&max_rel)
                .map(|(h, e)| (h_label(*h), json!(e)))
                .collect();
            entries.push(json!({
                "model": name,
                "delta": delta,
                "file": file,
                "curve": curve,
                "max_relative_error": errors,
            }));
        }
    }
    Ok(Value::Array(entries))
}
