use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tunemag::actuator::{
    fit_piecewise_linear, force_map, line_fit, quadratic_fit_residual, write_force_map_csv, ActuatorKind, ForceFit,
};
use tunemag::bench::{emit_report, run_comparison, Provenance, ReportFormat};
use tunemag::config::RunConfig;
use tunemag::energy::plan_energy;
use tunemag::hysteresis::{identify_from_forc, parse_field_list, ForcTable};
use tunemag::tuning::{execute_plan, smst_calibrate, Fallback, Method, Planner};
use tunemag::{generator, Error, Result};

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn hash_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn config_hash(cfg: &RunConfig) -> String {
    hash_hex(cfg.to_toml().as_bytes())
}

fn meta_line(hash: &str) -> String {
    format!("# {} config_hash={hash}\n", generator())
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) if p != Path::new("-") => std::fs::write(p, text).map_err(|e| Error::io_at(p, e))?,
        _ => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Reads a field list from a file if `arg` names one, else parses it
/// inline.
fn read_list(arg: &str) -> Result<Vec<f64>> {
    let p = Path::new(arg);
    if !arg.is_empty() && p.is_file() {
        parse_field_list(&std::fs::read_to_string(p).map_err(|e| Error::io_at(p, e))?)
    } else {
        parse_field_list(arg)
    }
}

pub fn simulate(config: Option<&Path>, sequence: &str, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let fields = read_list(sequence)?;
    let model = Arc::new(cfg.model()?);
    let mut state = cfg.initial_state(model)?;
    let step = cfg.magnet.trace_step;

    let mut text = meta_line(&config_hash(&cfg));
    text.push_str("step,h,b\n");
    if !fields.is_empty() {
        writeln!(text, "0,{},{}", state.h_now(), state.b_now()).unwrap();
    }
    for (k, &target) in fields.iter().enumerate() {
        let start = state.h_now();
        let n = ((target - start).abs() / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            let h = if i == n { target } else { start + (target - start) * i as f64 / n as f64 };
            state.apply_field(h)?;
            writeln!(text, "{},{},{}", k + 1, h, state.b_now()).unwrap();
        }
    }
    write_out(out, &text)
}

pub fn identify(forc: &Path, grid: usize, out: Option<&Path>) -> Result<()> {
    let bytes = std::fs::read(forc).map_err(|e| Error::io_at(forc, e))?;
    let table = ForcTable::read_csv(bytes.as_slice())?;
    let id = identify_from_forc(&table, grid)?;
    let mut hashed = bytes;
    hashed.extend_from_slice(format!("\ngrid={grid}").as_bytes());
    let mut text = meta_line(&hash_hex(&hashed));
    writeln!(text, "# clip_fraction = {}", id.clip_fraction).unwrap();
    text.push_str(&id.model.to_toml());
    eprintln!("identified {grid}-node table, clip fraction {:.4}", id.clip_fraction);
    write_out(out, &text)
}

pub fn tune(
    config: Option<&Path>,
    method: Method,
    targets: &str,
    fallback: Option<Fallback>,
    out: Option<&Path>,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(f) = fallback {
        cfg.tuning.fallback = f;
    }
    let targets = parse_field_list(targets)?;
    let model = Arc::new(cfg.model()?);
    let plant_model = Arc::new(cfg.plant_model(&model)?);
    let calibration = Arc::new(smst_calibrate(&model, cfg.tuning.smst_samples)?);
    let initial = cfg.initial_state(model)?;
    let mut plant = initial.with_model(plant_model)?;
    let mut planner = Planner::new(method, initial, calibration, cfg.tuning.tol_b, cfg.tuning.fallback);
    let (coil, wf) = (cfg.coil(), cfg.waveform());

    let mut text = meta_line(&config_hash(&cfg));
    text.push_str("step,target_t,setpoints_a_per_m,predicted_t,achieved_t,error_t,energy_j,fell_back\n");
    for (k, &t) in targets.iter().enumerate() {
        let step = planner.plan(t)?;
        let ex = execute_plan(&step.plan, &mut plant)?;
        let energy = plan_energy(&step.plan, &wf, &coil).total_j;
        let sp: Vec<String> = step.plan.setpoints.iter().map(f64::to_string).collect();
        writeln!(
            text,
            "{k},{t},{},{},{},{},{energy},{}",
            sp.join(";"),
            step.plan.predicted_remanence,
            ex.achieved,
            ex.error,
            step.fell_back
        )
        .unwrap();
    }
    write_out(out, &text)
}

#[derive(Serialize)]
struct PositionFit {
    x_m: f64,
    slope_n_per_wb: f64,
    intercept_n: f64,
    r2: f64,
    quadratic_residual: f64,
}

#[derive(Serialize)]
struct FitDocument {
    generator: String,
    config_hash: String,
    mode: ActuatorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<ForceFit>,
    per_position: Vec<PositionFit>,
}

fn fit_path(out: Option<&Path>, fit_out: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = fit_out {
        return Some(p.to_path_buf());
    }
    match out {
        Some(p) if p != Path::new("-") => {
            let mut s = p.as_os_str().to_os_string();
            s.push(".fit.json");
            Some(PathBuf::from(s))
        }
        _ => None,
    }
}

pub fn actuator(
    config: Option<&Path>,
    mode: ActuatorKind,
    positions: &str,
    out: Option<&Path>,
    fit_out: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let positions = parse_field_list(positions)?;
    let geom = cfg.htma();
    let n = cfg.geometry.br_points;
    let b_max = cfg.magnet.b_r_max;
    let b_grid: Vec<f64> = (0..n).map(|i| -b_max + 2.0 * b_max * i as f64 / (n - 1) as f64).collect();
    let samples = force_map(mode, &geom, &positions, &b_grid)?;

    let mut per_position = Vec::with_capacity(positions.len());
    for chunk in samples.chunks(n) {
        let phi: Vec<f64> = chunk.iter().map(|s| s.phi_tm).collect();
        let f: Vec<f64> = chunk.iter().map(|s| s.force).collect();
        let line = line_fit(&phi, &f)?;
        per_position.push(PositionFit {
            x_m: chunk[0].x,
            slope_n_per_wb: line.slope,
            intercept_n: line.intercept,
            r2: line.r2,
            quadratic_residual: quadratic_fit_residual(&phi, &f)?,
        });
    }
    let distinct = {
        let mut xs = positions.clone();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    let fit = if distinct >= 2 { Some(fit_piecewise_linear(&samples, cfg.geometry.fit_segments)?) } else { None };

    let hash = config_hash(&cfg);
    let mut csv = meta_line(&hash).into_bytes();
    write_force_map_csv(&mut csv, &samples)?;
    let doc = FitDocument { generator: generator(), config_hash: hash, mode, fit, per_position };
    let json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Report(e.to_string()))? + "\n";
    write_out(out, std::str::from_utf8(&csv).expect("csv is utf-8"))?;
    match fit_path(out, fit_out) {
        Some(p) => std::fs::write(&p, json).map_err(|e| Error::io_at(&p, e))?,
        None => eprint!("{json}"),
    }
    Ok(())
}

pub fn bench(
    config: Option<&Path>,
    seed: Option<u64>,
    sequences: Option<usize>,
    length: Option<usize>,
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.bench.rng_seed = s;
    }
    if let Some(n) = sequences {
        cfg.bench.n_sequences = n;
    }
    if let Some(n) = length {
        cfg.bench.seq_length = n;
    }
    cfg.validate()?;
    let hash = config_hash(&cfg);
    let mut report = run_comparison(&cfg.bench_config())?;
    let text = match format {
        ReportFormat::Json => {
            report.provenance = Some(Provenance { generator: generator(), config_hash: hash });
            emit_report(&report, format)?
        }
        _ => meta_line(&hash) + &emit_report(&report, format)?,
    };
    write_out(out, &text)
}
