//! Plain-text summaries of an output directory.

use crate::error::{HarnessError, Result};
use crate::output::*;
use crate::studies::{AggregateRow, DetailRow, GapRow, OptimalRow, ScalingRow};
use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

/// Re-derives `(successes, runs, proposals)` per aggregate key from detail rows
/// and compares them with the aggregate table.
pub fn check_detail_consistency(aggregate: &[AggregateRow], detail: &[DetailRow]) -> Result<()> {
    let mut sums: BTreeMap<(String, usize, u64), (u64, u64, u64)> = BTreeMap::new();
    for d in detail.iter().filter(|d| d.ensemble == crate::seeds::Ensemble::Tune) {
        let e = sums.entry((d.series.clone(), d.n, d.length)).or_default();
        e.0 += d.success as u64;
        e.1 += 1;
        e.2 += d.proposals;
    }
    for a in aggregate {
        let got = sums.get(&(a.series.clone(), a.n, a.length)).copied().unwrap_or_default();
        if got != (a.successes, a.runs, a.proposals) {
            return Err(HarnessError::Other(format!(
                "aggregate row {} n={} length={} disagrees with detail rows: {:?} vs {:?}",
                a.series,
                a.n,
                a.length,
                (a.successes, a.runs, a.proposals),
                got
            )));
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into())
}

pub fn report(dir: &Path) -> Result<String> {
    let mut s = String::new();
    let manifest = Manifest::read(dir)?;
    writeln!(s, "{} (config {}, seed {})", manifest.command, &manifest.config_hash[..12], manifest.master_seed).unwrap();
    writeln!(s, "tasks: {} ({} resumed)", manifest.tasks_total, manifest.tasks_resumed).unwrap();
    let path = dir.join(AGGREGATE_FILE);
    if path.exists() {
        let agg: Vec<AggregateRow> = read_table(&path, SWEEP_SCHEMA)?;
        let mut curves: BTreeMap<(String, usize), Vec<&AggregateRow>> = BTreeMap::new();
        for r in &agg {
            curves.entry((r.series.clone(), r.n)).or_default().push(r);
        }
        writeln!(s, "\nsuccess probability").unwrap();
        for ((series, n), rows) in &curves {
            let best = rows.iter().min_by(|a, b| a.effort.total_cmp(&b.effort)).expect("non-empty");
            let last = rows.last().expect("non-empty");
            writeln!(
                s,
                "  {series:<10} n={n:<3} lengths {}..{}  p_s at max length {:.3}  min effort {:.1} at length {}",
                rows[0].length, last.length, last.p_s, best.effort, best.length
            )
            .unwrap();
        }
        let detail = dir.join(DETAIL_FILE);
        if detail.exists() {
            let d: Vec<DetailRow> = read_table(&detail, DETAIL_SCHEMA)?;
            check_detail_consistency(&agg, &d)?;
            writeln!(s, "  detail rows: {} (consistent with aggregate)", d.len()).unwrap();
        }
    }
    let path = dir.join(OPTIMAL_FILE);
    if path.exists() {
        let opt: Vec<OptimalRow> = read_table(&path, OPTIMAL_SCHEMA)?;
        writeln!(s, "\noptimal length").unwrap();
        for o in &opt {
            writeln!(
                s,
                "  {:<10} n={:<3} ell* {:>8}  effort* {:>10}  ({}, {} points)",
                o.series,
                o.n,
                fmt_opt(o.ell_star),
                fmt_opt(o.effort_star),
                o.status,
                o.fit_points
            )
            .unwrap();
        }
    }
    let path = dir.join(SCALING_FILE);
    if path.exists() {
        let rows: Vec<ScalingRow> = read_table(&path, SCALING_SCHEMA)?;
        writeln!(s, "\nscaling").unwrap();
        for r in &rows {
            writeln!(
                s,
                "  {:<10} n={:<3} length {:>5}  p_s {:.3}  effort {:.1} [{:.1}, {:.1}]",
                r.series, r.n, r.length, r.p_s, r.effort, r.effort_lower, r.effort_upper
            )
            .unwrap();
        }
    }
    let path = dir.join(GAP_FILE);
    if path.exists() {
        let rows: Vec<GapRow> = read_table(&path, GAP_SCHEMA)?;
        let mut means: BTreeMap<(usize, String, u64), (f64, usize)> = BTreeMap::new();
        for r in &rows {
            let e = means.entry((r.n, r.kernel.clone(), r.temperature.to_bits())).or_default();
            e.0 += r.delta;
            e.1 += 1;
        }
        writeln!(s, "\nmean spectral gap").unwrap();
        for ((n, kernel, t), (sum, count)) in &means {
            writeln!(s, "  n={n:<3} {kernel:<8} T={:<8.4} delta {:.4e}", f64::from_bits(*t), sum / *count as f64).unwrap();
        }
    }
    if !manifest.failures.is_empty() {
        writeln!(s, "\nfailures").unwrap();
        for f in &manifest.failures {
            writeln!(s, "  [{}] {}: {}", f.kind, f.scope, f.message).unwrap();
        }
    }
    Ok(s)
}
