use std::path::{Path, PathBuf};

use hnn_core::bounds::{bound_report, profile_for, BoundInputs, KamConstants};
use hnn_core::diagnostics::{
    aligned_value_error, energy_drift, field_test_error, gradient_errors, recurrence_error, render_svg,
};
use hnn_core::dynamics::{CoordinateMap, ReferenceSystem};
use hnn_core::integrators::dataset::{read_series_csv, write_series_csv};
use hnn_core::integrators::{
    dopri45, generate_dataset_with_tol, uniform_times, GradientDataset, Sampler, Trajectory, TrajectoryMeta,
};
use hnn_core::linalg::norm2;
use hnn_core::nn::{init_network, init_vector_net, loss_param_gradient};
use hnn_core::training::{
    train as fit_hamiltonian, train_neural_ode, train_transformed, transformed_loss_gradient, LossConfig, LossTarget, ModelKind,
    TrainReport, TrainedModel,
};
use serde_json::{json, Value};

use crate::config::{learning_structure, Config};
use crate::CliError;

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;
/// Offset between the run seed and the coordinate map's init seed.
pub const CMAP_SEED_OFFSET: u64 = 1000;

pub struct Context {
    pub cfg: Config,
    pub out_dir: PathBuf,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn input(&self, given: Option<PathBuf>, default: &str) -> PathBuf {
        given.unwrap_or_else(|| self.path(default))
    }

    fn write_json(&self, name: &str, body: Value) -> Result<PathBuf, CliError> {
        let mut doc = json!({ "schema_version": OUTPUT_SCHEMA_VERSION });
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
            d.insert("config".into(), self.cfg.to_json());
        }
        let path = self.path(name);
        write_text(&path, &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;
        Ok(path)
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<GradientDataset, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("dataset {} not found", path.display())));
    }
    Ok(GradientDataset::load(path)?)
}

fn load_model(path: &Path) -> Result<TrainedModel, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("model {} not found", path.display())));
    }
    Ok(TrainedModel::load(path)?)
}

pub fn generate(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let d = &cfg.data;
    let sys = cfg.reference_system()?;
    let [t0, t1] = d.t_span.expect("resolved");
    let ds = generate_dataset_with_tol(
        &sys,
        d.n_traj.expect("resolved"),
        (t0, t1),
        d.n_points.expect("resolved"),
        d.sampler.as_ref().expect("resolved"),
        cfg.seed,
        d.rtol.expect("resolved"),
        d.atol.expect("resolved"),
    )?;
    let path = ctx.path("dataset.csv");
    ds.save(&path, Some(cfg.to_json()))?;
    println!("wrote {} ({} samples, input_radius {:.6e})", path.display(), ds.len(), ds.input_radius);
    Ok(())
}

fn report_json(report: &TrainReport, status: &str) -> Value {
    json!({ "status": status, "report": report })
}

pub fn train(ctx: &Context, dataset: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let ds = load_dataset(&ctx.input(dataset, "dataset.csv"))?;
    let sys = ds.provenance.system.clone();
    if sys.name() != cfg.reference_system()?.name() {
        return Err(CliError::Config(format!(
            "dataset holds {} data but the configured system is {}; pass --system {}",
            sys.name().as_str(),
            cfg.system.name,
            sys.name().as_str()
        )));
    }
    let dim = ds.dim();
    let s = learning_structure(&sys)?;
    let p = cfg.model.p.expect("resolved");
    let loss = LossConfig::new(p, LossTarget::SymplecticGradient(s.clone()))?;
    let tc = cfg.train_config();
    let kind = cfg.model_kind();

    let result: Result<(TrainedModel, TrainReport), (TrainedModel, TrainReport, CliError)> = match kind {
        ModelKind::NaiveHnn => {
            let h = init_network(&cfg.architecture(dim), cfg.seed)?;
            let wrap = |hamiltonian| TrainedModel::NaiveHnn {
                hamiltonian,
                structure: s.clone(),
            };
            match fit_hamiltonian(&h, &ds, &loss, &tc) {
                Ok((h, r)) => Ok((wrap(h), r)),
                Err(f) => Err((wrap(f.last_good), f.report, f.error.into())),
            }
        }
        ModelKind::Transformed => {
            let h = init_network(&cfg.architecture(dim), cfg.seed)?;
            let cseed = cfg.seed + CMAP_SEED_OFFSET;
            let cmap = CoordinateMap::new(init_vector_net(&cfg.vector_architecture(dim), cseed)?, cseed)?;
            let wrap = |pair| TrainedModel::Transformed {
                pair,
                structure: s.clone(),
            };
            match train_transformed(&h, &cmap, &ds, &loss, &tc) {
                Ok((pair, r)) => Ok((wrap(pair), r)),
                Err(f) => Err((wrap(f.last_good), f.report, f.error.into())),
            }
        }
        ModelKind::NeuralOde => {
            let f = init_vector_net(&cfg.vector_architecture(dim), cfg.seed)?;
            let wrap = |net| TrainedModel::NeuralOde { net, seed: cfg.seed };
            match train_neural_ode(&f, &ds, p, &tc) {
                Ok((net, r)) => Ok((wrap(net), r)),
                Err(f) => Err((wrap(f.last_good), f.report, f.error.into())),
            }
        }
    };
    match result {
        Ok((model, report)) => {
            let path = ctx.path("model.json");
            model.save(&path, Some(cfg.to_json()))?;
            write_history(ctx, &report)?;
            ctx.write_json("train_report.json", report_json(&report, "ok"))?;
            println!(
                "wrote {} ({}, final train loss {:.6e})",
                path.display(),
                kind.as_str(),
                report.final_train_loss
            );
            Ok(())
        }
        Err((last_good, report, err)) => {
            let path = ctx.path("model.last_good.json");
            last_good.save(&path, Some(cfg.to_json()))?;
            write_history(ctx, &report)?;
            ctx.write_json("train_report.json", report_json(&report, "diverged"))?;
            eprintln!("kept last good parameters in {}", path.display());
            Err(err)
        }
    }
}

fn write_history(ctx: &Context, report: &TrainReport) -> Result<(), CliError> {
    let rows: Vec<(f64, Vec<f64>)> = report
        .loss_history
        .iter()
        .enumerate()
        .map(|(i, &l)| (i as f64, vec![l]))
        .collect();
    let header = vec!["iteration".to_string(), "loss".to_string()];
    Ok(write_series_csv(&ctx.path("loss_history.csv"), &header, &rows)?)
}

fn initial_state(cfg: &Config, sys: &ReferenceSystem) -> Result<Vec<f64>, CliError> {
    if let Some(u) = &cfg.simulate.initial {
        return Ok(u.clone());
    }
    let sampler = cfg.data.sampler.clone().unwrap_or_else(|| Sampler::default_for(sys));
    let one = generate_dataset_with_tol(sys, 1, (0.0, 1.0), 1, &sampler, cfg.seed, 1e-8, 1e-10)?;
    Ok(one.samples[0].u.clone())
}

pub fn simulate(ctx: &Context, model: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let sim = &cfg.simulate;
    let sys = cfg.reference_system()?;
    let [t0, t1] = sim.t_span.expect("resolved");
    let dt = sim.dt.expect("resolved");
    if !(dt > 0.0) || !(t1 > t0) {
        return Err(CliError::Config(format!("simulate needs dt > 0 and t_end > t_start (dt = {dt})")));
    }
    let steps = ((t1 - t0) / dt).round() as usize;
    let times = uniform_times(t0, t1, steps + 1);
    let u0 = initial_state(cfg, &sys)?;
    let (rtol, atol) = (sim.rtol.expect("resolved"), sim.atol.expect("resolved"));
    let source = sim.source.as_deref().expect("resolved");
    let mut traj = if source == "system" {
        dopri45(|u| sys.field(u), &u0, (t0, t1), rtol, atol, &times)?
    } else {
        let m = load_model(&ctx.input(model, "model.json"))?;
        if m.dim() != u0.len() {
            return Err(CliError::Config(format!(
                "model dimension {} does not match the initial state ({})",
                m.dim(),
                u0.len()
            )));
        }
        dopri45(|u| m.vector_field(u), &u0, (t0, t1), rtol, atol, &times)?
    };
    traj.meta = TrajectoryMeta {
        system: sys.name().as_str().into(),
        rtol: Some(rtol),
        atol: Some(atol),
        seed: Some(cfg.seed),
    };
    let path = ctx.path("trajectory.csv");
    traj.save_csv(&path)?;
    ctx.write_json(
        "trajectory.json",
        json!({ "source": source, "meta": traj.meta, "n_times": traj.len(), "dim": traj.dim() }),
    )?;
    println!("wrote {} ({} times, source {source})", path.display(), traj.len());
    Ok(())
}

/// Full-dataset training loss of a model with a Hamiltonian.
fn dataset_loss(model: &TrainedModel, ds: &GradientDataset, p: f64) -> Result<f64, CliError> {
    match model {
        TrainedModel::NaiveHnn { hamiltonian, structure } => {
            let loss = LossConfig::new(p, LossTarget::SymplecticGradient(structure.clone()))?;
            Ok(loss_param_gradient(hamiltonian, &ds.samples, &loss)?.0)
        }
        TrainedModel::Transformed { pair, structure } => {
            Ok(transformed_loss_gradient(pair, structure, &ds.samples, p)?.0)
        }
        TrainedModel::NeuralOde { .. } => Err(CliError::Config(
            "the bound chain needs a Hamiltonian model; neural_ode has none".into(),
        )),
    }
}

pub fn bounds(ctx: &Context, model: Option<PathBuf>, dataset: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let b = &cfg.bounds;
    let model = load_model(&ctx.input(model, "model.json"))?;
    let ds = load_dataset(&ctx.input(dataset, "dataset.csv"))?;
    let p = cfg.model.p.expect("resolved");
    let l_train = dataset_loss(&model, &ds, p)?;
    let h = model.hamiltonian().expect("checked by dataset_loss");
    let target_radius = ds.samples.iter().map(|s| norm2(&s.dudt)).fold(0.0, f64::max);
    let profile = profile_for(h, ds.input_radius, target_radius, p, ds.len())?;
    let inputs = BoundInputs {
        profile,
        c_loss: b.c_loss,
        delta: b.delta,
        l_train,
        p,
        m: ds.dim() / 2,
        c_sobolev: b.c_sobolev,
        inf_density: b.inf_density,
        kam: KamConstants {
            eps0: b.eps0,
            c1: b.c1,
            c2: b.c2,
            c3: b.c3,
        },
    };
    let report = bound_report(&inputs)?;
    let table = report.table();
    ctx.write_json("bounds.json", json!({ "report": report }))?;
    write_text(&ctx.path("bounds.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn diagnose(
    ctx: &Context,
    trajectory: Option<PathBuf>,
    model: Option<PathBuf>,
    dataset: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let dg = &cfg.diagnose;
    let sys = cfg.reference_system()?;
    let load_traj = |given: Option<PathBuf>| -> Result<Trajectory, CliError> {
        let path = ctx.input(given, "trajectory.csv");
        if !path.exists() {
            return Err(CliError::Io(format!("trajectory {} not found", path.display())));
        }
        Ok(Trajectory::load_csv(&path)?)
    };
    match dg.kind.as_str() {
        "energy_drift" => {
            let traj = load_traj(trajectory)?;
            let drift = match dg.energy.as_str() {
                "system" => energy_drift(&traj, |u| sys.hamiltonian(u))?,
                "model" => {
                    let m = load_model(&ctx.input(model, "model.json"))?;
                    let h = m.hamiltonian().ok_or_else(|| {
                        CliError::Config("energy = \"model\" needs a Hamiltonian model".into())
                    })?;
                    energy_drift(&traj, |u| h.forward(u))?
                }
                other => return Err(CliError::Config(format!("diagnose.energy '{other}' (system | model)"))),
            };
            let rows: Vec<(f64, Vec<f64>)> = traj.times.iter().zip(&drift.series).map(|(&t, &e)| (t, vec![e])).collect();
            write_series_csv(&ctx.path("energy_drift.csv"), &["t".into(), "drift".into()], &rows)?;
            ctx.write_json(
                "energy_drift.json",
                json!({ "max_abs": drift.max_abs, "mean_abs": drift.mean_abs, "abs_slope": drift.abs_slope }),
            )?;
            println!("energy drift max {:.6e} mean {:.6e}", drift.max_abs, drift.mean_abs);
        }
        "recurrence" => {
            let traj = load_traj(trajectory)?;
            let reference = traj.states.first().cloned().unwrap_or_default();
            let r = recurrence_error(&traj, &reference, dg.t_center, dg.window)?;
            ctx.write_json("recurrence.json", json!({ "t_best": r.t_best, "min_error": r.min_error }))?;
            println!("recurrence t_best {} min_error {:.6e}", r.t_best, r.min_error);
        }
        "gradient_error" => {
            let m = load_model(&ctx.input(model, "model.json"))?;
            let ds = load_dataset(&ctx.input(dataset, "dataset.csv"))?;
            let p = cfg.model.p.expect("resolved");
            let (stats, per_sample) = match &m {
                TrainedModel::NaiveHnn { hamiltonian, structure } => {
                    let loss = LossConfig::new(p, LossTarget::SymplecticGradient(structure.clone()))?;
                    let e = gradient_errors(hamiltonian, &ds, &loss)?;
                    let s = hnn_core::diagnostics::ErrorStats {
                        mean: e.iter().sum::<f64>() / e.len() as f64,
                        max: e.iter().copied().fold(0.0, f64::max),
                    };
                    (s, Some(e))
                }
                _ => (field_test_error(|u| m.vector_field(u), &ds, p)?, None),
            };
            if let Some(e) = per_sample {
                let rows: Vec<(f64, Vec<f64>)> = ds.samples.iter().zip(&e).map(|(s, &v)| (s.t, vec![v])).collect();
                write_series_csv(&ctx.path("gradient_error.csv"), &["t".into(), "error".into()], &rows)?;
            }
            ctx.write_json("gradient_error.json", json!({ "mean": stats.mean, "max": stats.max }))?;
            println!("gradient error mean {:.6e} max {:.6e}", stats.mean, stats.max);
        }
        "value_error" => {
            let traj = load_traj(trajectory)?;
            let m = load_model(&ctx.input(model, "model.json"))?;
            let h = m
                .hamiltonian()
                .ok_or_else(|| CliError::Config("value_error needs a Hamiltonian model".into()))?;
            let (ve, offset) = aligned_value_error(h, &sys, &traj.states)?;
            ctx.write_json(
                "value_error.json",
                json!({ "mean_abs": ve.mean_abs, "max_abs": ve.max_abs, "offset": offset }),
            )?;
            println!("value error mean {:.6e} max {:.6e}", ve.mean_abs, ve.max_abs);
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown diagnostic '{other}' (energy_drift | recurrence | gradient_error | value_error)"
            )))
        }
    }
    Ok(())
}

pub fn plot(ctx: &Context, files: Vec<PathBuf>) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::Config("plot needs at least one CSV file".into()));
    }
    for f in files {
        if !f.exists() {
            return Err(CliError::Io(format!("{} not found", f.display())));
        }
        let (header, rows) = read_series_csv(&f)?;
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or("series").to_string();
        let svg = render_svg(&stem, &header[1..], &rows)?;
        let out = ctx.path(&format!("{stem}.svg"));
        write_text(&out, &svg)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
