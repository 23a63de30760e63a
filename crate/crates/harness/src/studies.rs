//! The sweep, scaling and spectral-gap studies.

use crate::config::{ExperimentConfig, Series};
use crate::error::{HarnessError, Result};
use crate::output::*;
use crate::runner::{coord_of, pool, prepare_instance, run_task, InstanceCache, PreparedInstance, RunRecord, Task, TaskId};
use crate::seeds::{Ensemble, LedgerRow, SeedTree};
use qeopt::analysis::{
    boltzmann, delta_min, effort, optimal_length, repeats_needed, thermalization_bounds, SuccessEstimate,
    ThermalizationBounds,
};
use qeopt::statevector::MAX_QUBITS;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

const SWEEP_UNITS: &str = "length=steps;proposals=proposals;effort=proposals;effort_lower=proposals;effort_upper=proposals;p_s=probability;repeats_r=runs";
const INSTANCE_UNITS: &str = "length=steps;ground_energy=energy;p_s=probability";
const DETAIL_UNITS: &str = "length=steps;best_energy=energy;final_energy=energy;ground_energy=energy;proposals=proposals";
const OPTIMAL_UNITS: &str = "ell_star=steps;effort_star=proposals;fit=effort~a+b*ln(length)+c*ln(length)^2";
const SCALING_UNITS: &str = "ell_star=steps;length=steps;effort=proposals;effort_lower=proposals;effort_upper=proposals;effort_sigma=proposals;p_s=probability";
const GAP_UNITS: &str = "temperature=energy;delta=1;tau_lower=steps;tau_upper=steps";
const LEDGER_UNITS: &str = "length=steps;stream_key=sha256-hex";

/// Where a study writes, and how it schedules work.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Output directory; `None` keeps everything in memory.
    pub out: Option<PathBuf>,
    /// Ignore any progress log left by an earlier run.
    pub fresh: bool,
    /// Overrides `workers` from the config.
    pub workers: Option<usize>,
    pub command: String,
}

impl RunOptions {
    pub fn in_memory(command: &str) -> Self {
        Self {
            out: None,
            fresh: true,
            workers: None,
            command: command.into(),
        }
    }

    pub fn to_dir(dir: impl Into<PathBuf>, command: &str) -> Self {
        Self {
            out: Some(dir.into()),
            fresh: false,
            workers: None,
            command: command.into(),
        }
    }
}

/// Pooled success statistics for one `(series, n, length)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub series: String,
    pub method: String,
    pub n: usize,
    pub replicas: usize,
    pub quantum_replicas: usize,
    pub ensemble: Ensemble,
    pub length: u64,
    pub instances: usize,
    pub runs: u64,
    pub successes: u64,
    pub p_s: f64,
    pub p_s_lower: f64,
    pub p_s_upper: f64,
    pub p_s_half_width: f64,
    pub repeats_r: f64,
    pub effort: f64,
    pub effort_lower: f64,
    pub effort_upper: f64,
    pub proposals: u64,
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub series: String,
    pub n: usize,
    pub ensemble: Ensemble,
    pub instance: usize,
    pub instance_seed: u64,
    pub ground_energy: f64,
    pub length: u64,
    pub runs: u64,
    pub successes: u64,
    pub p_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub series: String,
    pub n: usize,
    pub ensemble: Ensemble,
    pub instance: usize,
    pub instance_seed: u64,
    pub length: u64,
    pub repeat: usize,
    pub success: bool,
    pub best_energy: f64,
    pub final_energy: f64,
    pub ground_energy: f64,
    pub proposals: u64,
}

/// Fitted optimum of one effort curve. Fit fields are empty when the sweep had
/// too few finite points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalRow {
    pub series: String,
    pub method: String,
    pub n: usize,
    pub replicas: usize,
    pub quantum_replicas: usize,
    pub status: String,
    pub ell_star: Option<f64>,
    pub effort_star: Option<f64>,
    pub fit_a: Option<f64>,
    pub fit_b: Option<f64>,
    pub fit_c: Option<f64>,
    pub fit_points: usize,
    pub fit_length_min: Option<f64>,
    pub fit_length_max: Option<f64>,
    pub grid_min: u64,
    pub grid_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub series: String,
    pub method: String,
    pub n: usize,
    pub replicas: usize,
    pub quantum_replicas: usize,
    pub ell_star: f64,
    pub length: u64,
    pub instances: usize,
    pub runs: u64,
    pub successes: u64,
    pub p_s: f64,
    pub p_s_lower: f64,
    pub p_s_upper: f64,
    pub repeats_r: f64,
    pub effort: f64,
    pub effort_lower: f64,
    pub effort_upper: f64,
    /// Quarter of the 95% effort interval width, a rough one-sigma.
    pub effort_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub instance: usize,
    pub instance_seed: u64,
    pub kernel: String,
    pub temperature: f64,
    pub delta: f64,
    pub tau_lower: Option<f64>,
    pub tau_upper: Option<f64>,
    pub epsilon: f64,
    /// This temperature attains the instance's minimum gap.
    pub is_min: bool,
}

/// Everything a sweep produces.
#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub aggregate: Vec<AggregateRow>,
    pub instances: Vec<InstanceRow>,
    pub details: Vec<DetailRow>,
    pub optimal: Vec<OptimalRow>,
    pub scaling: Vec<ScalingRow>,
    pub gap: Vec<GapRow>,
    pub ledger: Vec<LedgerRow>,
    pub failures: Vec<Failure>,
    pub tasks_total: usize,
    pub tasks_resumed: usize,
}

impl SweepOutput {
    pub fn optimum(&self, series: &str, n: usize) -> Option<&OptimalRow> {
        self.optimal.iter().find(|o| o.series == series && o.n == n)
    }

    pub fn curve(&self, series: &str, n: usize) -> Vec<&AggregateRow> {
        self.aggregate.iter().filter(|r| r.series == series && r.n == n).collect()
    }
}

/// Instances a study runs on.
#[derive(Debug, Clone)]
pub enum InstanceSource {
    /// `count` instances per `n` derived from the master seed.
    Generated,
    /// Explicit instances, e.g. loaded from files.
    Given(Vec<PreparedInstance>),
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    seeds: SeedTree,
    pool: rayon::ThreadPool,
    progress: Progress,
    workers: usize,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig, opts: &RunOptions) -> Result<Self> {
        cfg.validate()?;
        let workers = opts.workers.unwrap_or(cfg.workers);
        let progress = match &opts.out {
            Some(dir) => Progress::open(&ensure_dir(dir)?, &cfg.hash(), opts.fresh)?,
            None => Progress::disabled(),
        };
        Ok(Self {
            cfg,
            seeds: SeedTree::new(cfg.master_seed),
            pool: pool(workers)?,
            progress,
            workers,
        })
    }

    fn prepare(&self, ns: &[usize], ensemble: Ensemble, count: usize, failures: &mut Vec<Failure>) -> InstanceCache {
        let mut wanted = Vec::new();
        for &n in ns {
            match self.cfg.check_caps(n) {
                Ok(()) => wanted.extend((0..count).map(|i| (n, i))),
                Err(e) => failures.push(Failure::from_error(format!("n={n}"), &e)),
            }
        }
        let prepared: Vec<_> = self.pool.install(|| {
            wanted
                .par_iter()
                .map(|&(n, i)| prepare_instance(&self.seeds, n, ensemble, i))
                .collect()
        });
        let mut cache = InstanceCache::new();
        for ((n, i), p) in wanted.into_iter().zip(prepared) {
            match p {
                Ok(p) => {
                    cache.insert((n, ensemble, i), Arc::new(p));
                }
                Err(e) => failures.push(Failure::from_error(format!("n={n} {} instance {i}", ensemble.label()), &e)),
            }
        }
        cache
    }

    /// Runs tasks in parallel; results come back in task order.
    fn execute(&self, tasks: &[Task], out: &mut SweepOutput) -> Vec<Option<Vec<RunRecord>>> {
        out.tasks_total += tasks.len();
        let results: Vec<(bool, Result<Vec<RunRecord>>)> = self.pool.install(|| {
            tasks
                .par_iter()
                .map(|t| {
                    if let Some(done) = self.progress.completed(&t.id) {
                        if done.len() == t.repeats {
                            return (true, Ok(done.clone()));
                        }
                    }
                    let r = run_task(self.cfg, &self.seeds, t).and_then(|recs| {
                        self.progress.record(&t.id, &recs)?;
                        Ok(recs)
                    });
                    (false, r)
                })
                .collect()
        });
        results
            .into_iter()
            .zip(tasks)
            .map(|((resumed, r), t)| {
                out.tasks_resumed += resumed as usize;
                match r {
                    Ok(recs) => Some(recs),
                    Err(e) => {
                        out.failures.push(Failure::from_error(describe(&t.id), &e));
                        None
                    }
                }
            })
            .collect()
    }
}

fn describe(id: &TaskId) -> String {
    format!(
        "series={} n={} {} instance={} length={}",
        id.series,
        id.n,
        id.ensemble.label(),
        id.instance,
        id.length
    )
}

fn build_tasks(series: &[Arc<Series>], cache: &InstanceCache, lengths: &[u64], repeats: usize) -> Vec<Task> {
    let mut tasks = Vec::new();
    for s in series {
        for ((n, ensemble, i), prepared) in cache {
            for &length in lengths {
                tasks.push(Task {
                    id: TaskId {
                        series: s.label.clone(),
                        n: *n,
                        ensemble: *ensemble,
                        instance: *i,
                        length,
                    },
                    series: s.clone(),
                    prepared: prepared.clone(),
                    repeats,
                });
            }
        }
    }
    tasks
}

/// Effort bounds from the Wilson interval and the point estimate.
fn effort_triplet(est: &SuccessEstimate, length: u64, replicas: usize, p: f64) -> Result<(f64, f64, f64, f64)> {
    let m = replicas as f64;
    let l = length as f64;
    let r = repeats_needed(est.p_s, p)?;
    Ok((
        r,
        effort(l, r, m),
        effort(l, repeats_needed(est.upper, p)?, m),
        effort(l, repeats_needed(est.lower, p)?, m),
    ))
}

/// Folds task results into aggregate, per-instance, detail and ledger rows.
fn collect(
    ctx: &Context<'_>,
    tasks: &[Task],
    results: Vec<Option<Vec<RunRecord>>>,
    out: &mut SweepOutput,
) -> Result<BTreeMap<(String, usize, u64), (Arc<Series>, Vec<u64>, usize)>> {
    // (series, n, length) -> (series, [successes, runs, proposals], instances)
    let mut groups: BTreeMap<(String, usize, u64), (Arc<Series>, Vec<u64>, usize)> = BTreeMap::new();
    let mut failed: Vec<(String, usize, u64)> = Vec::new();
    for (t, r) in tasks.iter().zip(results) {
        let key = (t.id.series.clone(), t.id.n, t.id.length);
        let Some(recs) = r else {
            failed.push(key);
            continue;
        };
        let p = &t.prepared;
        let hits = recs.iter().filter(|r| r.success).count() as u64;
        out.instances.push(InstanceRow {
            series: t.id.series.clone(),
            n: t.id.n,
            ensemble: t.id.ensemble,
            instance: t.id.instance,
            instance_seed: p.seed,
            ground_energy: p.ground_energy,
            length: t.id.length,
            runs: recs.len() as u64,
            successes: hits,
            p_s: hits as f64 / recs.len() as f64,
        });
        for rec in &recs {
            let coord = coord_of(&t.id, rec.repeat);
            let mut row = ctx.seeds.ledger_row(&coord);
            row.instance_seed = p.seed;
            out.ledger.push(row);
            if ctx.cfg.detail {
                out.details.push(DetailRow {
                    series: t.id.series.clone(),
                    n: t.id.n,
                    ensemble: t.id.ensemble,
                    instance: t.id.instance,
                    instance_seed: p.seed,
                    length: t.id.length,
                    repeat: rec.repeat,
                    success: rec.success,
                    best_energy: rec.best_energy,
                    final_energy: rec.final_energy,
                    ground_energy: p.ground_energy,
                    proposals: rec.proposals,
                });
            }
        }
        let g = groups
            .entry(key)
            .or_insert_with(|| (t.series.clone(), vec![0, 0, 0], 0));
        g.1[0] += hits;
        g.1[1] += recs.len() as u64;
        g.1[2] += recs.iter().map(|r| r.proposals).sum::<u64>();
        g.2 += 1;
    }
    for k in failed {
        groups.remove(&k);
    }
    Ok(groups)
}

fn aggregate_rows(
    cfg: &ExperimentConfig,
    ensemble: Ensemble,
    groups: &BTreeMap<(String, usize, u64), (Arc<Series>, Vec<u64>, usize)>,
) -> Result<Vec<AggregateRow>> {
    let mut rows = Vec::new();
    for ((label, n, length), (series, counts, instances)) in groups {
        let est = SuccessEstimate::from_counts(counts[0], counts[1])?;
        let (r, e, e_lo, e_hi) = effort_triplet(&est, *length, series.replicas, cfg.target_p)?;
        rows.push(AggregateRow {
            series: label.clone(),
            method: series.method.label().into(),
            n: *n,
            replicas: series.replicas,
            quantum_replicas: series.quantum_replicas,
            ensemble,
            length: *length,
            instances: *instances,
            runs: counts[1],
            successes: counts[0],
            p_s: est.p_s,
            p_s_lower: est.lower,
            p_s_upper: est.upper,
            p_s_half_width: est.half_width,
            repeats_r: r,
            effort: e,
            effort_lower: e_lo,
            effort_upper: e_hi,
            proposals: counts[2],
            optimal: false,
        });
    }
    Ok(rows)
}

/// Fits `ell*` for every `(series, n)` curve and flags the grid point nearest it.
fn fit_optima(cfg: &ExperimentConfig, out: &mut SweepOutput) {
    let mut curves: BTreeMap<(String, usize), Vec<usize>> = BTreeMap::new();
    for (i, r) in out.aggregate.iter().enumerate() {
        curves.entry((r.series.clone(), r.n)).or_default().push(i);
    }
    let series: BTreeMap<String, Series> = cfg.series().into_iter().map(|s| (s.label.clone(), s)).collect();
    for ((label, n), idx) in curves {
        let s = &series[&label];
        let points: Vec<(f64, f64)> = idx
            .iter()
            .map(|&i| (out.aggregate[i].length as f64, out.aggregate[i].effort))
            .collect();
        let grid_min = idx.iter().map(|&i| out.aggregate[i].length).min().unwrap_or(0);
        let grid_max = idx.iter().map(|&i| out.aggregate[i].length).max().unwrap_or(0);
        let mut row = OptimalRow {
            series: label.clone(),
            method: s.method.label().into(),
            n,
            replicas: s.replicas,
            quantum_replicas: s.quantum_replicas,
            status: "ok".into(),
            ell_star: None,
            effort_star: None,
            fit_a: None,
            fit_b: None,
            fit_c: None,
            fit_points: 0,
            fit_length_min: None,
            fit_length_max: None,
            grid_min,
            grid_max,
        };
        match optimal_length(&points) {
            Ok(fit) => {
                row.ell_star = Some(fit.ell_star);
                row.effort_star = Some(fit.effort_star);
                row.fit_a = Some(fit.a);
                row.fit_b = Some(fit.b);
                row.fit_c = Some(fit.c);
                row.fit_points = fit.subset.len();
                row.fit_length_min = fit.subset.first().map(|p| p.0);
                row.fit_length_max = fit.subset.last().map(|p| p.0);
                let target = fit.ell_star.ln();
                if let Some(&best) = idx.iter().min_by(|&&a, &&b| {
                    let da = ((out.aggregate[a].length as f64).ln() - target).abs();
                    let db = ((out.aggregate[b].length as f64).ln() - target).abs();
                    da.total_cmp(&db)
                }) {
                    out.aggregate[best].optimal = true;
                }
            }
            Err(e) => {
                row.status = "insufficient-data".into();
                out.failures
                    .push(Failure::from_error(format!("fit series={label} n={n}"), &HarnessError::from(e)));
            }
        }
        out.optimal.push(row);
    }
}

fn series_of(cfg: &ExperimentConfig) -> Vec<Arc<Series>> {
    cfg.series().into_iter().map(Arc::new).collect()
}

fn sweep_inner(ctx: &Context<'_>, source: &InstanceSource, out: &mut SweepOutput) -> Result<()> {
    let cfg = ctx.cfg;
    let cache = match source {
        InstanceSource::Generated => ctx.prepare(&cfg.n, Ensemble::Tune, cfg.instances, &mut out.failures),
        InstanceSource::Given(list) => {
            let mut c = InstanceCache::new();
            for p in list {
                let n = p.instance.n();
                match cfg.check_caps(n) {
                    Ok(()) => {
                        c.insert((n, Ensemble::Tune, p.index), Arc::new(p.clone()));
                    }
                    Err(e) => out.failures.push(Failure::from_error(format!("n={n} instance {}", p.index), &e)),
                }
            }
            c
        }
    };
    let tasks = build_tasks(&series_of(cfg), &cache, &cfg.lengths.lengths(), cfg.repeats);
    let results = ctx.execute(&tasks, out);
    let groups = collect(ctx, &tasks, results, out)?;
    out.aggregate = aggregate_rows(cfg, Ensemble::Tune, &groups)?;
    Ok(())
}

/// Success probability against length for every series and `n`.
pub fn probability_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    let ctx = Context::new(cfg, opts)?;
    let mut out = SweepOutput::default();
    sweep_inner(&ctx, &InstanceSource::Generated, &mut out)?;
    finish(&ctx, opts, &mut out, false)?;
    Ok(out)
}

/// [`probability_sweep`] plus the fitted optimum of every effort curve.
pub fn effort_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    sweep_on(cfg, opts, &InstanceSource::Generated)
}

/// Effort sweep over an explicit instance list.
pub fn sweep_on(cfg: &ExperimentConfig, opts: &RunOptions, source: &InstanceSource) -> Result<SweepOutput> {
    let ctx = Context::new(cfg, opts)?;
    let mut out = SweepOutput::default();
    sweep_inner(&ctx, source, &mut out)?;
    fit_optima(cfg, &mut out);
    finish(&ctx, opts, &mut out, true)?;
    Ok(out)
}

/// Tunes `ell*` per `n` on one ensemble, then evaluates at the rounded optimum on
/// a fresh ensemble.
pub fn scaling_study(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    let ctx = Context::new(cfg, opts)?;
    let mut out = SweepOutput::default();
    sweep_inner(&ctx, &InstanceSource::Generated, &mut out)?;
    fit_optima(cfg, &mut out);

    let tuned: Vec<(usize, f64)> = out
        .optimal
        .iter()
        .filter_map(|o| o.ell_star.map(|l| (o.n, l)))
        .collect();
    let ns: Vec<usize> = {
        let mut v: Vec<usize> = tuned.iter().map(|t| t.0).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut ignored = Vec::new();
    let cache = ctx.prepare(&ns, Ensemble::Eval, cfg.scaling.instances, &mut ignored);
    out.failures.extend(ignored);
    let series = series_of(cfg);
    let mut tasks = Vec::new();
    let mut stars = BTreeMap::new();
    for o in out.optimal.iter() {
        let Some(ell_star) = o.ell_star else { continue };
        let s = series.iter().find(|s| s.label == o.series).expect("series exists");
        let length = (ell_star.round() as u64).max(1);
        stars.insert((o.series.clone(), o.n), ell_star);
        let sub: InstanceCache = cache
            .iter()
            .filter(|((n, _, _), _)| *n == o.n)
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        tasks.extend(build_tasks(std::slice::from_ref(s), &sub, &[length], cfg.scaling.repeats));
    }
    let results = ctx.execute(&tasks, &mut out);
    let mut eval = SweepOutput::default();
    let groups = collect(&ctx, &tasks, results, &mut eval)?;
    for ((label, n, length), (s, counts, instances)) in &groups {
        let est = SuccessEstimate::from_counts(counts[0], counts[1])?;
        let (r, e, e_lo, e_hi) = effort_triplet(&est, *length, s.replicas, cfg.target_p)?;
        out.scaling.push(ScalingRow {
            series: label.clone(),
            method: s.method.label().into(),
            n: *n,
            replicas: s.replicas,
            quantum_replicas: s.quantum_replicas,
            ell_star: stars[&(label.clone(), *n)],
            length: *length,
            instances: *instances,
            runs: counts[1],
            successes: counts[0],
            p_s: est.p_s,
            p_s_lower: est.lower,
            p_s_upper: est.upper,
            repeats_r: r,
            effort: e,
            effort_lower: e_lo,
            effort_upper: e_hi,
            effort_sigma: (e_hi - e_lo) / 4.0,
        });
    }
    out.instances.extend(eval.instances);
    out.details.extend(eval.details);
    out.ledger.extend(eval.ledger);
    finish(&ctx, opts, &mut out, true)?;
    Ok(out)
}

/// Exact spectral gaps and thermalization bounds per instance, kernel and
/// temperature.
pub fn gap_study(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    let ctx = Context::new(cfg, opts)?;
    let mut out = SweepOutput::default();
    let mut ns = Vec::new();
    for &n in &cfg.n {
        let cap = qeopt::analysis::MAX_DELTA_MIN_SPINS.min(MAX_QUBITS);
        if n > cap {
            out.failures.push(Failure::from_error(
                format!("n={n}"),
                &HarnessError::Cap(format!("gap study needs n <= {cap}, got {n}")),
            ));
        } else {
            ns.push(n);
        }
    }
    let cache = ctx.prepare(&ns, Ensemble::Tune, cfg.instances, &mut out.failures);
    let temps = cfg.gap_temperatures();
    let jobs: Vec<_> = cache.values().cloned().collect();
    out.tasks_total = jobs.len() * cfg.gap.kernels.len();
    let results: Vec<Result<Vec<GapRow>>> = ctx.pool.install(|| {
        jobs.par_iter()
            .map(|p| {
                let mut rows = Vec::new();
                for choice in &cfg.gap.kernels {
                    let kernel = choice.kernel(cfg.quantum);
                    let dm = delta_min(&p.instance, &kernel, &temps, cfg.gap.gamma_nodes)?;
                    for &(t, delta) in &dm.per_temperature {
                        let mu = boltzmann(&p.instance, t)?;
                        let (lo, hi) = match thermalization_bounds(delta, &mu, cfg.gap.epsilon)? {
                            ThermalizationBounds::Bounded { lower, upper } => (Some(lower), Some(upper)),
                            ThermalizationBounds::Unbounded => (None, None),
                        };
                        rows.push(GapRow {
                            n: p.instance.n(),
                            instance: p.index,
                            instance_seed: p.seed,
                            kernel: kernel.label().into(),
                            temperature: t,
                            delta,
                            tau_lower: lo,
                            tau_upper: hi,
                            epsilon: cfg.gap.epsilon,
                            is_min: t == dm.temperature,
                        });
                    }
                }
                Ok(rows)
            })
            .collect()
    });
    for (p, r) in jobs.iter().zip(results) {
        match r {
            Ok(rows) => out.gap.extend(rows),
            Err(e) => out
                .failures
                .push(Failure::from_error(format!("gap n={} instance={}", p.instance.n(), p.index), &e)),
        }
    }
    finish(&ctx, opts, &mut out, false)?;
    Ok(out)
}

/// Writes whatever the study produced plus the manifest.
fn finish(ctx: &Context<'_>, opts: &RunOptions, out: &mut SweepOutput, with_fit: bool) -> Result<()> {
    let Some(dir) = &opts.out else { return Ok(()) };
    let dir = ensure_dir(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str| files.push(name.to_string());
    if !out.aggregate.is_empty() {
        write_table(&dir.join(AGGREGATE_FILE), SWEEP_SCHEMA, SWEEP_UNITS, &out.aggregate)?;
        put(AGGREGATE_FILE);
        write_table(&dir.join(INSTANCE_FILE), INSTANCE_SCHEMA, INSTANCE_UNITS, &out.instances)?;
        put(INSTANCE_FILE);
        write_table(&dir.join(LEDGER_FILE), LEDGER_SCHEMA, LEDGER_UNITS, &out.ledger)?;
        put(LEDGER_FILE);
    }
    if ctx.cfg.detail && !out.details.is_empty() {
        write_table(&dir.join(DETAIL_FILE), DETAIL_SCHEMA, DETAIL_UNITS, &out.details)?;
        put(DETAIL_FILE);
    }
    if with_fit {
        write_table(&dir.join(OPTIMAL_FILE), OPTIMAL_SCHEMA, OPTIMAL_UNITS, &out.optimal)?;
        put(OPTIMAL_FILE);
    }
    if !out.scaling.is_empty() {
        write_table(&dir.join(SCALING_FILE), SCALING_SCHEMA, SCALING_UNITS, &out.scaling)?;
        put(SCALING_FILE);
    }
    if !out.gap.is_empty() {
        write_table(&dir.join(GAP_FILE), GAP_SCHEMA, GAP_UNITS, &out.gap)?;
        put(GAP_FILE);
    }
    Manifest {
        schema: MANIFEST_SCHEMA.into(),
        command: opts.command.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: ctx.cfg.hash(),
        master_seed: ctx.cfg.master_seed,
        workers: ctx.workers,
        tasks_total: out.tasks_total,
        tasks_resumed: out.tasks_resumed,
        files,
        failures: out.failures.clone(),
    }
    .write(&dir)
}

/// The most severe failure, for the process exit status.
pub fn worst_failure(out: &SweepOutput) -> Option<HarnessError> {
    let rank = |k: &str| match k {
        "cap" => 3,
        "insufficient-data" => 2,
        _ => 1,
    };
    out.failures.iter().max_by_key(|f| rank(&f.kind)).map(|f| match f.kind.as_str() {
        "cap" => HarnessError::Cap(f.message.clone()),
        "insufficient-data" => HarnessError::InsufficientData(f.message.clone()),
        _ => HarnessError::Other(f.message.clone()),
    })
}
