use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::metrics::{error_norms, fit_loglog, ErrorNorms};
use crate::error::HarnessError;
use crate::pde::{exact_values, solve_problem, PhaseTimings, PoissonProblem, RunConfig, SolverStats, Solved, Spacing};
use crate::refinement::{zone_census, RadialZoneSpec};

/// Column order of the records CSV.
pub const RECORDS_HEADER: &str =
    "case,N,Ni,Nd,h,order_spec,seed,e_inf,e_2,e_1,nnz,t_nodes,t_weights,t_assemble,t_solve,t_total";

/// One (N, order spec, seed) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub case: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Ni")]
    pub n_interior: usize,
    #[serde(rename = "Nd")]
    pub n_boundary: usize,
    pub h: f64,
    pub order_spec: String,
    pub seed: u64,
    pub e_inf: f64,
    pub e_2: f64,
    pub e_1: f64,
    pub nnz: usize,
    pub t_nodes: f64,
    pub t_weights: f64,
    pub t_assemble: f64,
    pub t_solve: f64,
    pub t_total: f64,
}

/// Per-cell data that does not fit the CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDetails {
    pub order_spec: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub solver: SolverStats,
    /// Fraction of nodes per augmentation order.
    pub census: BTreeMap<u32, f64>,
}

impl RunRecord {
    fn from_solved(problem: &PoissonProblem, spec: &RadialZoneSpec, seed: u64, solved: &Solved, errors: ErrorNorms, t: PhaseTimings) -> Self {
        RunRecord {
            case: problem.name.clone(),
            n: solved.nodes.len(),
            n_interior: solved.nodes.n_interior(),
            n_boundary: solved.nodes.n_boundary(),
            h: solved.nodes.h(),
            order_spec: spec.name.clone(),
            seed,
            e_inf: errors.inf,
            e_2: errors.l2,
            e_1: errors.l1,
            nnz: solved.system.nnz(),
            t_nodes: t.nodes,
            t_weights: t.weights,
            t_assemble: t.assemble,
            t_solve: t.solve,
            t_total: t.total,
        }
    }

    pub fn timings(&self) -> PhaseTimings {
        PhaseTimings {
            nodes: self.t_nodes,
            weights: self.t_weights,
            assemble: self.t_assemble,
            solve: self.t_solve,
            total: self.t_total,
        }
    }
}

/// Result of one cell: the record plus the solved state of its first run.
pub struct CellOutcome {
    pub record: RunRecord,
    pub details: CellDetails,
    pub solved: Solved,
}

/// Runs one cell `repeats` times, keeping the phase-wise minimum timings.
/// Errors come from the first run; later runs are identical given the seed.
pub fn run_cell(problem: &PoissonProblem, run: &RunConfig, repeats: usize) -> Result<CellOutcome, HarnessError> {
    let first = solve_problem(problem, run)?;
    let exact = exact_values(&first.nodes, problem)
        .ok_or_else(|| HarnessError::Config(format!("problem '{}' has no exact solution", problem.name)))?;
    let errors = error_norms(&first.solution.values, &exact)?;
    let mut best = first.timings;
    for _ in 1..repeats.max(1) {
        let again = solve_problem(problem, run)?;
        best = best.min(again.timings);
    }
    let record = RunRecord::from_solved(problem, &run.orders, run.seed, &first, errors, best);
    let details = CellDetails {
        order_spec: run.orders.name.clone(),
        n: first.nodes.len(),
        seed: run.seed,
        solver: first.solution.stats.clone(),
        census: zone_census(&first.orders),
    };
    Ok(CellOutcome {
        record,
        details,
        solved: first,
    })
}

/// Fitted rate for one order spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub order_spec: String,
    /// Slope of log10 e_inf against log10 N.
    pub k_n: f64,
    /// Equivalent order in h, `d * |k_n|`.
    pub k_h: f64,
    pub intercept: f64,
    pub residual: f64,
    /// N values that entered the fit.
    pub fit_ns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub records: Vec<RunRecord>,
    pub details: Vec<CellDetails>,
    pub rates: Vec<RateEstimate>,
    pub fit_min_n: usize,
    pub failures: Vec<String>,
    pub complete: bool,
}

impl ConvergenceReport {
    pub fn rate(&self, order_spec: &str) -> Option<&RateEstimate> {
        self.rates.iter().find(|r| r.order_spec == order_spec)
    }

    pub fn records_for<'a>(&'a self, order_spec: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.records.iter().filter(move |r| r.order_spec == order_spec)
    }
}

/// Least-squares slope of log10 e_inf vs log10 N over `subset` (indices into `records`).
pub fn estimate_rate(records: &[RunRecord], subset: &[usize]) -> Result<f64, HarnessError> {
    let ns: Vec<f64> = subset.iter().map(|&i| records[i].n as f64).collect();
    let es: Vec<f64> = subset.iter().map(|&i| records[i].e_inf).collect();
    Ok(fit_loglog(&ns, &es)?.slope)
}

/// Fits one rate per order spec over records with `N >= fit_min_n`, in order
/// of first appearance. Specs with too few points are skipped.
pub fn fit_rates(records: &[RunRecord], fit_min_n: usize, dim: usize) -> Vec<RateEstimate> {
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.order_spec.as_str()) {
            names.push(&r.order_spec);
        }
    }
    names
        .into_iter()
        .filter_map(|name| {
            let subset: Vec<usize> = (0..records.len())
                .filter(|&i| records[i].order_spec == name && records[i].n >= fit_min_n)
                .collect();
            let ns: Vec<f64> = subset.iter().map(|&i| records[i].n as f64).collect();
            let es: Vec<f64> = subset.iter().map(|&i| records[i].e_inf).collect();
            let fit = fit_loglog(&ns, &es).ok()?;
            Some(RateEstimate {
                order_spec: name.to_string(),
                k_n: fit.slope,
                k_h: dim as f64 * fit.slope.abs(),
                intercept: fit.intercept,
                residual: fit.residual,
                fit_ns: subset.iter().map(|&i| records[i].n).collect(),
            })
        })
        .collect()
}

/// Sweeps every ladder step, order spec and seed. Failed cells are recorded
/// and skipped. `on_record` sees each finished cell.
pub fn run_convergence(config: &Config, mut on_record: impl FnMut(&RunRecord)) -> Result<ConvergenceReport, HarnessError> {
    let problem = config.problem()?;
    let specs = config.order_specs()?;
    let phs = config.phs()?;
    let mut cells: Vec<(Spacing, RadialZoneSpec, u64)> = Vec::new();
    for spacing in config.ladder() {
        for seed in config.seeds() {
            for spec in &specs {
                cells.push((spacing, spec.clone(), seed));
            }
        }
    }
    let run_for = |(spacing, spec, seed): &(Spacing, RadialZoneSpec, u64)| RunConfig {
        spacing: *spacing,
        orders: spec.clone(),
        phs,
        seed: *seed,
        solver: config.solver_options(),
        fill: config.fill_options(),
    };
    let describe = |(spacing, spec, seed): &(Spacing, RadialZoneSpec, u64)| {
        format!("{spacing:?} {} seed={seed}", spec.name)
    };

    let mut records = Vec::new();
    let mut details = Vec::new();
    let mut failures = Vec::new();
    let mut collect = |cell: &(Spacing, RadialZoneSpec, u64), outcome: Result<CellOutcome, HarnessError>| match outcome {
        Ok(o) => {
            on_record(&o.record);
            records.push(o.record);
            details.push(o.details);
        }
        Err(e) => failures.push(format!("{}: {e}", describe(cell))),
    };
    if config.sweep.parallel_cells {
        let outcomes: Vec<_> = cells
            .par_iter()
            .map(|c| run_cell(&problem, &run_for(c), config.sweep.repeats))
            .collect();
        for (c, o) in cells.iter().zip(outcomes) {
            collect(c, o);
        }
    } else {
        for c in &cells {
            let o = run_cell(&problem, &run_for(c), config.sweep.repeats);
            collect(c, o);
        }
    }

    let rates = fit_rates(&records, config.sweep.fit_min_n, problem.domain.dim());
    Ok(ConvergenceReport {
        complete: failures.is_empty(),
        records,
        details,
        rates,
        fit_min_n: config.sweep.fit_min_n,
        failures,
    })
}

pub fn write_records<W: Write>(out: W, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(RECORDS_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header.join(",") != RECORDS_HEADER {
        return Err(HarnessError::Config(format!("unexpected records header: {}", header.join(","))));
    }
    rdr.deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}

/// Pivoted figure table: one row per N, one column per order spec.
fn figure_table(records: &[RunRecord], specs: &[&str], value: impl Fn(&RunRecord) -> f64) -> String {
    let present: Vec<&str> = specs
        .iter()
        .copied()
        .filter(|s| records.iter().any(|r| r.order_spec == *s))
        .collect();
    let mut by_n: BTreeMap<usize, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in records {
        if let Some(&s) = present.iter().find(|s| **s == r.order_spec) {
            by_n.entry(r.n).or_default().insert(s, value(r));
        }
    }
    let mut out = String::from("N");
    for s in &present {
        out.push(',');
        out.push_str(s);
    }
    out.push('\n');
    for (n, row) in by_n {
        out.push_str(&n.to_string());
        for s in &present {
            out.push(',');
            if let Some(v) = row.get(s) {
                out.push_str(&format!("{v:e}"));
            }
        }
        out.push('\n');
    }
    out
}

const GNUPLOT_SCRIPT: &str = "\
set datafile separator ','
set logscale xy
set key autotitle columnhead
set xlabel 'N'
set terminal pngcairo size 800,600
set output 'convergence.png'
set ylabel 'e_inf'
plot for [i=2:*] 'fig_convergence.csv' using 1:i with linespoints
set output 'convergence_refined.png'
plot for [i=2:*] 'fig_convergence_refined.csv' using 1:i with linespoints
set output 'times.png'
set ylabel 't_total [s]'
plot for [i=2:*] 'fig_times.csv' using 1:i with linespoints
";

/// Writes the figure tables (error vs N for uniform orders and c2, error vs N
/// for the refined specs, total time vs N for all specs) and a gnuplot script.
pub fn write_figures(dir: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut all: Vec<&str> = Vec::new();
    for r in records {
        if !all.contains(&r.order_spec.as_str()) {
            all.push(&r.order_spec);
        }
    }
    let uniform: Vec<&str> = all.iter().copied().filter(|s| s.starts_with("uniform-") || *s == "c2").collect();
    let refined: Vec<&str> = all.iter().copied().filter(|s| !s.starts_with("uniform-")).collect();
    std::fs::write(dir.join("fig_convergence.csv"), figure_table(records, &uniform, |r| r.e_inf))?;
    std::fs::write(dir.join("fig_convergence_refined.csv"), figure_table(records, &refined, |r| r.e_inf))?;
    std::fs::write(dir.join("fig_times.csv"), figure_table(records, &all, |r| r.t_total))?;
    std::fs::write(dir.join("plots.gp"), GNUPLOT_SCRIPT)?;
    Ok(())
}

/// Human-readable slope table.
pub fn format_rates(report: &ConvergenceReport) -> String {
    let mut s = format!("fit over N >= {}\n", report.fit_min_n);
    s.push_str("order_spec      k_N       k_h   points\n");
    for r in &report.rates {
        s.push_str(&format!("{:<12} {:>8.3} {:>8.3}   {:?}\n", r.order_spec, r.k_n, r.k_h, r.fit_ns));
    }
    if !report.complete {
        s.push_str(&format!("INCOMPLETE: {} failed cells\n", report.failures.len()));
    }
    s
}
