use std::error::Error;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use rbffd::geometry::{discretize_boundary, fill_interior_with, spacing_for_count};
use rbffd::harness::{fit_rates, format_rates, read_records, run_cell, run_convergence, write_figures, write_records, Config, ConvergenceReport};
use rbffd::pde::{exact_values, write_solution_dump, RunConfig, Spacing};
use rbffd::refinement::{assign_orders, preset};
use rbffd::weights::write_weight_dump;

#[derive(Parser)]
#[command(name = "rbffd", version, about = "p-refined RBF-FD Poisson solver and convergence harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a node set and write the node dump.
    Nodes {
        #[command(flatten)]
        run: RunArgs,
        /// Output file (node dump format).
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Single solve: writes the solution dump and one record.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Best-of-R timing repeats (defaults to sweep.repeats).
        #[arg(long)]
        repeats: Option<usize>,
        /// Also write stencil weights (weights.txt).
        #[arg(long)]
        dump_weights: bool,
        /// Also write the global matrix in triplet format (matrix.txt).
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Full sweep over ladder x order specs x seeds.
    Converge {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Re-fit convergence slopes from an existing records CSV.
    Report {
        records: PathBuf,
        #[arg(long, default_value_t = 4000)]
        fit_min_n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Write the fitted rates as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Approximate node count (overrides the config ladder).
    #[arg(long, conflicts_with = "h")]
    n: Option<usize>,
    /// Target spacing (overrides the config ladder).
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Order preset name (c1, c2, c3, uniform-<m>).
    #[arg(long)]
    preset: Option<String>,
}

impl RunArgs {
    fn config(&self) -> Result<Config, Box<dyn Error>> {
        Ok(match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        })
    }

    fn run_config(&self, cfg: &Config) -> Result<RunConfig, Box<dyn Error>> {
        let spacing = match (self.n, self.h) {
            (Some(n), _) => Spacing::Count(n),
            (None, Some(h)) => Spacing::H(h),
            (None, None) => cfg.ladder()[0],
        };
        let orders = match &self.preset {
            Some(name) => preset(name)?,
            None => cfg.order_specs()?.remove(0),
        };
        Ok(RunConfig {
            spacing,
            orders,
            phs: cfg.phs()?,
            seed: self.seed.unwrap_or(cfg.seeds()[0]),
            solver: cfg.solver_options(),
            fill: cfg.fill_options(),
        })
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Box<dyn Error>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn main() -> Result<(), Box<dyn Error>> {
    match Cli::parse().command {
        Command::Nodes { run, out } => {
            let cfg = run.config()?;
            let rc = run.run_config(&cfg)?;
            let domain = cfg.domain()?;
            let h = match rc.spacing {
                Spacing::H(h) => h,
                Spacing::Count(n) => spacing_for_count(&domain, n),
            };
            let boundary = discretize_boundary(&domain, h, rc.seed)?;
            let nodes = fill_interior_with(&domain, boundary, h, rc.seed, rc.fill)?;
            let orders = assign_orders(&nodes, &rc.orders)?;
            nodes.write_dump(BufWriter::new(File::create(&out)?), Some(orders.orders()))?;
            eprintln!("N={} Ni={} Nd={} h={h} -> {}", nodes.len(), nodes.n_interior(), nodes.n_boundary(), out.display());
        }
        Command::Solve {
            run,
            out_dir,
            repeats,
            dump_weights,
            dump_matrix,
        } => {
            let cfg = run.config()?;
            let rc = run.run_config(&cfg)?;
            let problem = cfg.problem()?;
            let outcome = run_cell(&problem, &rc, repeats.unwrap_or(cfg.sweep.repeats))?;
            let solved = &outcome.solved;
            let exact = exact_values(&solved.nodes, &problem);
            write_solution_dump(create(&out_dir, "solution.txt")?, &solved.nodes, &solved.solution.values, exact.as_deref())?;
            write_records(create(&out_dir, "records.csv")?, std::slice::from_ref(&outcome.record))?;
            if dump_weights {
                write_weight_dump(create(&out_dir, "weights.txt")?, &solved.weights)?;
            }
            if dump_matrix {
                solved.system.write_triplets(create(&out_dir, "matrix.txt")?)?;
            }
            let r = &outcome.record;
            println!(
                "{} N={} order_spec={} e_inf={:e} e_2={:e} e_1={:e} nnz={} t_total={:.3}s solver={:?} residual={:e}",
                r.case, r.n, r.order_spec, r.e_inf, r.e_2, r.e_1, r.nnz, r.t_total,
                outcome.details.solver.path, outcome.details.solver.residual
            );
        }
        Command::Converge { config, out_dir } => {
            let cfg = match config {
                Some(p) => Config::load(&p)?,
                None => Config::default(),
            };
            let report = run_convergence(&cfg, |r| {
                eprintln!("N={:<7} {:<10} seed={} e_inf={:.3e} t_total={:.3}s", r.n, r.order_spec, r.seed, r.e_inf, r.t_total);
            })?;
            write_records(create(&out_dir, "records.csv")?, &report.records)?;
            serde_json::to_writer_pretty(create(&out_dir, "report.json")?, &report)?;
            fs::write(out_dir.join("report.txt"), format_rates(&report))?;
            write_figures(&out_dir, &report.records)?;
            print!("{}", format_rates(&report));
            if !report.complete {
                for f in &report.failures {
                    eprintln!("failed: {f}");
                }
                std::process::exit(2);
            }
        }
        Command::Report {
            records,
            fit_min_n,
            dim,
            json,
        } => {
            let records = read_records(File::open(&records)?)?;
            let rates = fit_rates(&records, fit_min_n, dim);
            let report = ConvergenceReport {
                records,
                details: Vec::new(),
                rates,
                fit_min_n,
                failures: Vec::new(),
                complete: true,
            };
            print!("{}", format_rates(&report));
            if let Some(path) = json {
                serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &report.rates)?;
            }
        }
    }
    Ok(())
}
