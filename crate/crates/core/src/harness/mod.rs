//! Experiment orchestration: builds problems from an [`ExperimentConfig`],
//! runs seeded ensembles and writes CSV artifacts plus a JSON sidecar.
//!
//! Every CSV is a pure function of the configuration. Trajectories are
//! reduced in stream order, so worker count never changes a byte of output.

mod config;

pub use config::{ExperimentConfig, ExperimentKind, GridSpec, Ladder, ProblemKind};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::allen_cahn::{class1d_truth, class2d_truth, load_labels_csv, ClassificationProblem, LinearMode};
use crate::diagnostics::{ensemble_stats, lambda_convergence_study, EnsembleStats, LambdaStudy};
use crate::ensemble::{run_ensemble, with_threads, ExecPolicy};
use crate::error::{Error, Result};
use crate::flow::{simulate_events, SwitchedFlow};
use crate::sparse_flow::SparseProblem;
use crate::switching::SwitchConfig;
use crate::trajectory::{write_grid_csv, TimeGrid, TrajectorySample};

pub const TABLE1_LAMBDAS: [f64; 4] = [0.25, 2.5, 25.0, 250.0];
pub const HIST_BINS: usize = 50;
pub const HIST_RANGE: (f64, f64) = (0.0, 4.0);
/// `|mean_i|` above this counts as a confident classification.
pub const CONFIDENCE: f64 = 0.9;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Collects written files and emits the metadata sidecar.
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    started: Instant,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Outputs {
            dir,
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn finish(mut self, name: &str, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        #[derive(Serialize)]
        struct Meta<'a> {
            experiment: &'a str,
            config_hash: String,
            version: &'a str,
            master_seed: u64,
            wall_time_seconds: f64,
            outputs: Vec<String>,
            config: &'a ExperimentConfig,
        }
        let meta = Meta {
            experiment: name,
            config_hash: cfg.hash(),
            version: env!("CARGO_PKG_VERSION"),
            master_seed: cfg.master_seed,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self
                .files
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect(),
            config: cfg,
        };
        let path = self.dir.join(format!("{name}.meta.json"));
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &meta)?;
        writeln!(w)?;
        w.flush()?;
        self.files.push(path);
        Ok(self.files)
    }
}

fn policy(cfg: &ExperimentConfig) -> ExecPolicy {
    if cfg.parallel == Some(false) {
        ExecPolicy::Sequential
    } else {
        ExecPolicy::Parallel
    }
}

fn check_kind(cfg: &ExperimentConfig, allowed: &[ExperimentKind]) -> Result<()> {
    match cfg.experiment {
        Some(k) if !allowed.contains(&k) => Err(config_err(format!(
            "config declares experiment {:?} but {:?} was requested",
            k.name(),
            allowed[0].name()
        ))),
        _ => Ok(()),
    }
}

fn fmt_tag(x: f64) -> String {
    x.to_string()
}

// ---------------------------------------------------------------- table 1

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub lambda: f64,
    pub seeds: u64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct Table1Report {
    pub rows: Vec<Table1Row>,
    /// Bin counts on [`HIST_RANGE`], one histogram per rate.
    pub histograms: Vec<Vec<u64>>,
    pub files: Vec<PathBuf>,
}

/// Terminal law of `½(θ - 4)² + |θ|` from `θ⁰ = 0` for each rate.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<Table1Report> {
    check_kind(cfg, &[ExperimentKind::Table1])?;
    let lambdas = cfg.lambdas_or(&TABLE1_LAMBDAS);
    let seeds = cfg.seeds_or(10_000).max(2);
    let horizon = cfg.horizon.unwrap_or(20.0);
    let problem = SparseProblem::scalar(1.0, 4.0)?;
    let x0 = DVector::zeros(1);
    let grid = TimeGrid::new(vec![horizon])?;

    let mut rows = Vec::new();
    let mut histograms = Vec::new();
    for &lambda in &lambdas {
        let switch = SwitchConfig::new(lambda, cfg.initial_regime(), cfg.master_seed)?;
        let runs = run_ensemble(&problem, &x0, &switch, seeds, &grid, policy(cfg))?;
        let stats = ensemble_stats(&runs, false)?;
        rows.push(Table1Row {
            lambda,
            seeds,
            mean: stats.mean[0][0],
            variance: stats.variance[0][0],
        });
        histograms.push(histogram(runs.iter().map(|r| r.last_state()[0])));
    }

    let mut out = Outputs::new(cfg.output_dir())?;
    out.write("table1.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["lambda", "seeds", "mean", "variance"])?;
        for r in &rows {
            c.write_record([r.lambda.to_string(), r.seeds.to_string(), r.mean.to_string(), r.variance.to_string()])?;
        }
        c.flush()?;
        Ok(())
    })?;
    out.write("table1_hist.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["lambda", "bin_lo", "bin_hi", "count"])?;
        let width = (HIST_RANGE.1 - HIST_RANGE.0) / HIST_BINS as f64;
        for (lambda, h) in lambdas.iter().zip(&histograms) {
            for (k, count) in h.iter().enumerate() {
                let lo = HIST_RANGE.0 + k as f64 * width;
                c.write_record([lambda.to_string(), lo.to_string(), (lo + width).to_string(), count.to_string()])?;
            }
        }
        c.flush()?;
        Ok(())
    })?;
    let files = out.finish(ExperimentKind::Table1.name(), cfg)?;
    Ok(Table1Report { rows, histograms, files })
}

fn histogram(values: impl Iterator<Item = f64>) -> Vec<u64> {
    let mut bins = vec![0u64; HIST_BINS];
    let width = (HIST_RANGE.1 - HIST_RANGE.0) / HIST_BINS as f64;
    for v in values {
        let k = ((v - HIST_RANGE.0) / width).floor().clamp(0.0, (HIST_BINS - 1) as f64) as usize;
        bins[k] += 1;
    }
    bins
}

// ---------------------------------------------------------- classification

/// Classification quality of the ensemble mean at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub lambda: f64,
    pub epsilon: f64,
    pub time: f64,
    /// Fraction of coordinates with `|mean_i| > 0.9`.
    pub frac_confident: f64,
    /// Fraction of observed coordinates where `sign(mean_i)` equals the data.
    pub mask_agreement: f64,
}

#[derive(Debug, Clone)]
pub struct ClassReport {
    pub rows: Vec<ClassRow>,
    pub files: Vec<PathBuf>,
}

impl ClassReport {
    pub fn find(&self, lambda: f64, epsilon: f64, time: f64) -> Option<&ClassRow> {
        self.rows
            .iter()
            .find(|r| r.lambda == lambda && r.epsilon == epsilon && r.time == time)
    }
}

fn class_row(problem: &ClassificationProblem, lambda: f64, time: f64, mean: &DVector<f64>) -> ClassRow {
    let n = mean.len() as f64;
    let confident = mean.iter().filter(|m| m.abs() > CONFIDENCE).count() as f64 / n;
    let mask = problem.mask().indices();
    let agree = mask
        .iter()
        .zip(problem.data())
        .filter(|(&i, &d)| mean[i] != 0.0 && mean[i].signum() == d.signum())
        .count() as f64
        / mask.len().max(1) as f64;
    ClassRow {
        lambda,
        epsilon: problem.epsilon(),
        time,
        frac_confident: confident,
        mask_agreement: agree,
    }
}

fn class_ensemble(
    problem: &ClassificationProblem,
    mode: LinearMode,
    dt_max: Option<f64>,
    lambda: f64,
    seeds: u64,
    grid: &TimeGrid,
    cfg: &ExperimentConfig,
) -> Result<EnsembleStats> {
    let flow = problem.flow(mode, dt_max)?;
    let switch = SwitchConfig::new(lambda, cfg.initial_regime(), cfg.master_seed)?;
    let runs = run_ensemble(&flow, &DVector::zeros(problem.dim()), &switch, seeds, grid, policy(cfg))?;
    ensemble_stats(&runs, false)
}

fn record_grid(cfg: &ExperimentConfig, default: &[f64]) -> Result<TimeGrid> {
    match &cfg.grid {
        Some(GridSpec::Times(t)) => TimeGrid::new(t.clone()).map_err(|e| config_err(e.to_string())),
        Some(GridSpec::Points(_)) => Err(config_err("classification experiments take explicit record times")),
        None => {
            let mut t = default.to_vec();
            if let Some(h) = cfg.horizon {
                t.retain(|&x| x <= h);
                if t.last() != Some(&h) {
                    t.push(h);
                }
            }
            TimeGrid::new(t)
        }
    }
}

fn truth_1d(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    match &cfg.truth_path {
        Some(p) => load_labels_csv(p).map_err(|e| config_err(format!("fixture {}: {e}", p.display()))),
        None => Ok(class1d_truth()),
    }
}

/// Truth and grid width of the 1D fixture, subsampled in smoke mode.
fn fixture_1d(cfg: &ExperimentConfig, small: bool) -> Result<(Vec<f64>, f64)> {
    let truth = truth_1d(cfg)?;
    if small || cfg.smoke {
        Ok((truth.into_iter().step_by(4).collect(), 0.8))
    } else {
        Ok((truth, 0.2))
    }
}

/// Ensemble means and deviations of the 1D classification flow.
pub fn run_class1d(cfg: &ExperimentConfig) -> Result<ClassReport> {
    check_kind(cfg, &[ExperimentKind::Class1d])?;
    let lambdas = cfg.lambdas_or(&[1.0, 10.0]);
    let epsilons = cfg.epsilons_or(&[1e-2, 1e-4, 1e-6]);
    let seeds = cfg.seeds_or(100).max(2);
    let alpha = cfg.alpha.unwrap_or(1.0);
    let mode = cfg.linear_mode.unwrap_or(LinearMode::Exact);
    let grid = record_grid(cfg, &[4.0, 16.0, 64.0])?;
    let (truth, h) = fixture_1d(cfg, false)?;

    let mut rows = Vec::new();
    let mut stats_all = Vec::new();
    for &eps in &epsilons {
        let problem = ClassificationProblem::from_truth_1d(&truth, h, alpha, eps, 5)?;
        for &lambda in &lambdas {
            let stats = class_ensemble(&problem, mode, cfg.dt_max, lambda, seeds, &grid, cfg)?;
            for (t, m) in stats.times.iter().zip(&stats.mean) {
                rows.push(class_row(&problem, lambda, *t, m));
            }
            stats_all.push((lambda, eps, stats));
        }
    }

    let mut out = Outputs::new(cfg.output_dir())?;
    out.write("class1d_summary.csv", |w| write_class_rows(w, &rows))?;
    out.write("class1d_stats.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["lambda", "epsilon", "time", "index", "mean", "std"])?;
        for (lambda, eps, s) in &stats_all {
            for ((t, m), v) in s.times.iter().zip(&s.mean).zip(&s.variance) {
                for i in 0..m.len() {
                    c.write_record([
                        lambda.to_string(),
                        eps.to_string(),
                        t.to_string(),
                        i.to_string(),
                        m[i].to_string(),
                        v[i].sqrt().to_string(),
                    ])?;
                }
            }
        }
        c.flush()?;
        Ok(())
    })?;
    let files = out.finish(ExperimentKind::Class1d.name(), cfg)?;
    Ok(ClassReport { rows, files })
}

fn write_class_rows(w: &mut impl Write, rows: &[ClassRow]) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["lambda", "epsilon", "time", "frac_confident", "mask_agreement"])?;
    for r in rows {
        c.write_record([r.lambda, r.epsilon, r.time, r.frac_confident, r.mask_agreement].map(|v| v.to_string()))?;
    }
    c.flush()?;
    Ok(())
}

fn fixture_2d(cfg: &ExperimentConfig) -> Result<(Vec<f64>, usize, f64)> {
    let side = if cfg.smoke { 50 } else { cfg.side.unwrap_or(50) };
    let truth = match &cfg.truth_path {
        Some(p) => load_labels_csv(p).map_err(|e| config_err(format!("fixture {}: {e}", p.display())))?,
        None => class2d_truth(side).map_err(|e| config_err(e.to_string()))?,
    };
    if truth.len() != side * side {
        return Err(config_err(format!(
            "2D fixture has {} entries, expected {side}x{side}",
            truth.len()
        )));
    }
    // the physical domain has length 10 whatever the resolution
    Ok((truth, side, 10.0 / side as f64))
}

/// Crank–Nicolson ensembles of the 2D classification flow.
pub fn run_class2d(cfg: &ExperimentConfig) -> Result<ClassReport> {
    check_kind(cfg, &[ExperimentKind::Class2d])?;
    let mode = cfg.linear_mode.unwrap_or(LinearMode::Cn);
    if mode == LinearMode::Exact {
        return Err(config_err("exact linear mode is not available at 2D scale; use \"cn\""));
    }
    let lambdas = cfg.lambdas_or(&[20.0]);
    let epsilons = cfg.epsilons_or(&[0.005]);
    let seeds = cfg.seeds_or(100).max(2);
    let alpha = cfg.alpha.unwrap_or(1.0);
    let grid = record_grid(cfg, &[2.0, 4.0, 8.0, 16.0])?;
    let (truth, side, h) = fixture_2d(cfg)?;

    let mut rows = Vec::new();
    let mut stats_all = Vec::new();
    for &eps in &epsilons {
        let problem = ClassificationProblem::from_truth_2d(&truth, side, h, alpha, eps, 5)?;
        for &lambda in &lambdas {
            let stats = class_ensemble(&problem, mode, cfg.dt_max, lambda, seeds, &grid, cfg)?;
            for (t, m) in stats.times.iter().zip(&stats.mean) {
                rows.push(class_row(&problem, lambda, *t, m));
            }
            stats_all.push((lambda, eps, stats));
        }
    }

    let mut out = Outputs::new(cfg.output_dir())?;
    out.write("class2d_summary.csv", |w| write_class_rows(w, &rows))?;
    for (lambda, eps, s) in &stats_all {
        for ((t, m), v) in s.times.iter().zip(&s.mean).zip(&s.variance) {
            let tag = format!("lambda{}_eps{}_t{}", fmt_tag(*lambda), fmt_tag(*eps), fmt_tag(*t));
            out.write(&format!("class2d_mean_{tag}.csv"), |w| write_grid_csv(m.as_slice(), side, side, w))?;
            let std: Vec<f64> = v.iter().map(|x| x.sqrt()).collect();
            out.write(&format!("class2d_std_{tag}.csv"), |w| write_grid_csv(&std, side, side, w))?;
        }
    }
    let files = out.finish(ExperimentKind::Class2d.name(), cfg)?;
    Ok(ClassReport { rows, files })
}

// ------------------------------------------------------ problem instances

#[allow(clippy::large_enum_variant)]
enum Instance {
    Sparse(SparseProblem),
    Class { problem: ClassificationProblem, side: Option<usize> },
}

fn build_instance(kind: ProblemKind, cfg: &ExperimentConfig) -> Result<Instance> {
    let eps = cfg.epsilons_or(&[1e-2])[0];
    let alpha = cfg.alpha.unwrap_or(1.0);
    Ok(match kind {
        ProblemKind::Sparse1d => Instance::Sparse(SparseProblem::scalar(1.0, 4.0)?),
        ProblemKind::Synthetic => {
            let [m, n] = cfg.synthetic_shape.unwrap_or([10, 6]);
            Instance::Sparse(SparseProblem::synthetic(m, n, cfg.master_seed)?)
        }
        ProblemKind::SparseCsv => {
            let (Some(a), Some(b)) = (&cfg.design_path, &cfg.data_path) else {
                return Err(config_err("sparse_csv needs design_path and data_path"));
            };
            Instance::Sparse(
                SparseProblem::from_csv(a, b).map_err(|e| config_err(format!("loading sparse problem: {e}")))?,
            )
        }
        ProblemKind::Class1d | ProblemKind::Class1dSmall => {
            let (truth, h) = fixture_1d(cfg, kind == ProblemKind::Class1dSmall)?;
            Instance::Class {
                problem: ClassificationProblem::from_truth_1d(&truth, h, alpha, eps, 5)?,
                side: None,
            }
        }
        ProblemKind::Class2d => {
            let (truth, side, h) = fixture_2d(cfg)?;
            let eps = cfg.epsilons_or(&[0.005])[0];
            Instance::Class {
                problem: ClassificationProblem::from_truth_2d(&truth, side, h, alpha, eps, 5)?,
                side: Some(side),
            }
        }
    })
}

// --------------------------------------------------------- lambda study

#[derive(Debug, Clone)]
pub struct LambdaReport {
    pub study: LambdaStudy,
    pub files: Vec<PathBuf>,
}

/// Sup-distance between switched and deterministic paths along a rate
/// ladder.
pub fn run_lambda_study(cfg: &ExperimentConfig) -> Result<LambdaReport> {
    check_kind(cfg, &[ExperimentKind::LambdaStudy])?;
    let kind = cfg.problem.unwrap_or(ProblemKind::Sparse1d);
    if kind == ProblemKind::Class2d {
        return Err(config_err("the rate study supports 1D problems only"));
    }
    let seeds = cfg.seeds_or(200);
    let policy = policy(cfg);
    let instance = build_instance(kind, cfg)?;
    let (study, det) = match &instance {
        Instance::Sparse(p) => {
            let lambdas = cfg.lambdas_or(&[2.5, 25.0, 250.0]);
            let grid = cfg.time_grid(cfg.horizon.unwrap_or(20.0), 401)?;
            let x0 = DVector::zeros(p.dim());
            let det = p.deterministic_flow(&x0, &grid, cfg.det_step.unwrap_or(1e-4))?;
            let s = lambda_convergence_study(p, &x0, &det, &lambdas, cfg.initial_regime(), cfg.master_seed, seeds, policy)?;
            (s, det)
        }
        Instance::Class { problem, .. } => {
            let lambdas = cfg.lambdas_or(&[1.0, 10.0, 100.0]);
            let grid = cfg.time_grid(cfg.horizon.unwrap_or(16.0), 201)?;
            let x0 = DVector::zeros(problem.dim());
            let step = cfg.det_step.unwrap_or(problem.epsilon() / 20.0);
            let det = problem.deterministic_flow(&x0, &grid, step)?;
            let flow = problem.flow(cfg.linear_mode.unwrap_or(LinearMode::Exact), cfg.dt_max)?;
            let s = lambda_convergence_study(&flow, &x0, &det, &lambdas, cfg.initial_regime(), cfg.master_seed, seeds, policy)?;
            (s, det)
        }
    };

    let mut out = Outputs::new(cfg.output_dir())?;
    out.write("lambda_study.csv", |w| study.write_csv(w))?;
    out.write("lambda_study_deterministic.csv", |w| det.write_csv(w))?;
    for (row, path) in study.rows.iter().zip(&study.sample_paths) {
        out.write(&format!("lambda_study_path_lambda{}.csv", fmt_tag(row.lambda)), |w| path.write_csv(w))?;
    }
    let files = out.finish(ExperimentKind::LambdaStudy.name(), cfg)?;
    Ok(LambdaReport { study, files })
}

// ------------------------------------------------------------- simulate

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub path: TrajectorySample,
    pub deterministic: Option<TrajectorySample>,
    pub files: Vec<PathBuf>,
}

fn one_path<F: SwitchedFlow + ?Sized>(flow: &F, x0: &DVector<f64>, cfg: &ExperimentConfig, lambda: f64, grid: &TimeGrid) -> Result<TrajectorySample> {
    let switch = SwitchConfig::new(lambda, cfg.initial_regime(), cfg.master_seed)?;
    simulate_events(flow, x0, switch.events(0), grid)
}

/// One switched trajectory (stream 0) and, for 1D problems, the
/// deterministic flow on the same grid.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulateReport> {
    check_kind(cfg, &[ExperimentKind::Sparse1d, ExperimentKind::Custom])?;
    let kind = cfg.problem.unwrap_or(if cfg.design_path.is_some() {
        ProblemKind::SparseCsv
    } else {
        ProblemKind::Sparse1d
    });
    let instance = build_instance(kind, cfg)?;
    let (path, det, side) = match &instance {
        Instance::Sparse(p) => {
            let lambda = cfg.lambdas_or(&[2.5])[0];
            let grid = cfg.time_grid(cfg.horizon.unwrap_or(20.0), 201)?;
            let x0 = DVector::zeros(p.dim());
            let path = one_path(p, &x0, cfg, lambda, &grid)?;
            let step = cfg.det_step.unwrap_or(1e-3 / p.sigma_max().powi(2).max(1.0));
            (path, Some(p.deterministic_flow(&x0, &grid, step)?), None)
        }
        Instance::Class { problem, side } => {
            let default_mode = if side.is_some() { LinearMode::Cn } else { LinearMode::Exact };
            let flow = problem.flow(cfg.linear_mode.unwrap_or(default_mode), cfg.dt_max)?;
            let lambda = cfg.lambdas_or(&[if side.is_some() { 20.0 } else { 10.0 }])[0];
            let grid = cfg.time_grid(cfg.horizon.unwrap_or(16.0), 201)?;
            let x0 = DVector::zeros(problem.dim());
            let path = one_path(&flow, &x0, cfg, lambda, &grid)?;
            let det = match side {
                None => Some(problem.deterministic_flow(&x0, &grid, cfg.det_step.unwrap_or(problem.epsilon() / 20.0))?),
                Some(_) => None,
            };
            (path, det, *side)
        }
    };

    let mut out = Outputs::new(cfg.output_dir())?;
    out.write("simulate.csv", |w| path.write_csv(w))?;
    if let Some(d) = &det {
        out.write("simulate_deterministic.csv", |w| d.write_csv(w))?;
    }
    if let Some(side) = side {
        out.write("simulate_final_grid.csv", |w| write_grid_csv(path.last_state().as_slice(), side, side, w))?;
    }
    let files = out.finish("simulate", cfg)?;
    Ok(SimulateReport {
        path,
        deterministic: det,
        files,
    })
}

// ------------------------------------------------------------- dispatch

/// Runs `kind` on a pool of `cfg.threads` workers when set. Returns the
/// written files and a short human-readable summary.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<(Vec<PathBuf>, String)> {
    let go = || -> Result<(Vec<PathBuf>, String)> {
        match kind {
            ExperimentKind::Table1 => {
                let r = run_table1(cfg)?;
                let mut s = String::from("lambda\tmean\tvariance\n");
                for row in &r.rows {
                    s += &format!("{}\t{:.4}\t{:.4}\n", row.lambda, row.mean, row.variance);
                }
                Ok((r.files, s))
            }
            ExperimentKind::Class1d | ExperimentKind::Class2d => {
                let r = if kind == ExperimentKind::Class1d {
                    run_class1d(cfg)?
                } else {
                    run_class2d(cfg)?
                };
                let mut s = String::from("lambda\tepsilon\ttime\tconfident\tmask_agreement\n");
                for row in &r.rows {
                    s += &format!(
                        "{}\t{}\t{}\t{:.3}\t{:.3}\n",
                        row.lambda, row.epsilon, row.time, row.frac_confident, row.mask_agreement
                    );
                }
                Ok((r.files, s))
            }
            ExperimentKind::LambdaStudy => {
                let r = run_lambda_study(cfg)?;
                let mut s = String::from("lambda\tmedian\tq25\tq75\n");
                for row in &r.study.rows {
                    s += &format!("{}\t{:.4}\t{:.4}\t{:.4}\n", row.lambda, row.median, row.q25, row.q75);
                }
                s += &format!("median decreasing: {}\n", r.study.is_decreasing());
                Ok((r.files, s))
            }
            ExperimentKind::Sparse1d | ExperimentKind::Custom => {
                let r = run_simulate(cfg)?;
                let end = r.path.last_state();
                Ok((r.files, format!("final state: {}\n", end.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" "))))
            }
        }
    };
    match cfg.threads {
        Some(t) => with_threads(t, go)?,
        None => go(),
    }
}

/// Path of the sidecar written by `kind` into `dir`.
pub fn meta_path(dir: &Path, kind: ExperimentKind) -> PathBuf {
    let name = match kind {
        ExperimentKind::Sparse1d | ExperimentKind::Custom => "simulate",
        k => k.name(),
    };
    dir.join(format!("{name}.meta.json"))
}
