//! Poisson problems with Dirichlet data, global sparse assembly and solve.

mod pipeline;
mod solve;

use std::fmt;
use std::io::Write;
use std::sync::Arc;

pub use self::pipeline::{solve_problem, PhaseTimings, RunConfig, Solved, Spacing};
pub use self::solve::{
    solve_sparse, solve_sparse_with, SolutionField, SolverMethod, SolverOptions, SolverPath,
    SolverStats,
};
use crate::basis::{monomial_apply_slice, monomial_eval_slice, MultiIndex, OperatorTag};
use crate::error::SolveError;
use crate::geometry::{Domain, NodeKind, NodeSet};
use crate::refinement::PEAK_CENTER;
use crate::weights::StencilWeights;

/// Scalar field over space.
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `Laplacian u = rhs` in the domain, `u = dirichlet` on its boundary.
#[derive(Clone)]
pub struct PoissonProblem {
    pub name: String,
    pub domain: Domain,
    pub rhs: ScalarField,
    pub dirichlet: ScalarField,
    pub exact: Option<ScalarField>,
}

impl fmt::Debug for PoissonProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Width parameter of the strong source: `25 * |4x - 2|^2 = 400 |x - x_s|^2`.
const SOURCE_SHARPNESS: f64 = 400.0;

/// `f(x) = 1 / (25 |4x - 2|^2 + 1)`, peaked at `x_s = (1/2, ..., 1/2)`.
pub fn peak(x: &[f64]) -> f64 {
    let q: f64 = x.iter().map(|c| (4.0 * c - 2.0).powi(2)).sum::<f64>() * 25.0;
    1.0 / (q + 1.0)
}

/// Laplacian of [`peak`]. With `a = 400` and `rho = |x - x_s|`,
/// `Lap f = 8 a^2 rho^2 f^3 - 2 a d f^2`.
pub fn peak_laplacian(x: &[f64]) -> f64 {
    let a = SOURCE_SHARPNESS;
    let d = x.len() as f64;
    let rho2: f64 = x.iter().map(|c| (c - 0.5).powi(2)).sum();
    let f = 1.0 / (a * rho2 + 1.0);
    8.0 * a * a * rho2 * f * f * f - 2.0 * a * d * f * f
}

/// The strong-source benchmark on the disk of radius 3/2: the exact solution
/// is the source function itself, which also supplies the boundary data.
pub fn peak_case() -> PoissonProblem {
    debug_assert_eq!(PEAK_CENTER, [0.5, 0.5]);
    let f: ScalarField = Arc::new(peak);
    PoissonProblem {
        name: "peak".into(),
        domain: Domain::ball([0.0, 0.0], 1.5).expect("valid disk"),
        rhs: Arc::new(peak_laplacian),
        dirichlet: f.clone(),
        exact: Some(f),
    }
}

/// Polynomial `sum c_k x^alpha_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(MultiIndex, f64)>,
}

impl Polynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(a, c)| c * monomial_eval_slice(a, x))
            .sum()
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(a, c)| c * monomial_apply_slice(OperatorTag::Laplacian, a, x))
            .sum()
    }
}

/// Manufactured problem with polynomial exact solution `u`.
pub fn polynomial_case(domain: Domain, u: Polynomial) -> PoissonProblem {
    let u = Arc::new(u);
    let (u1, u2, u3) = (u.clone(), u.clone(), u);
    let exact: ScalarField = Arc::new(move |x| u1.eval(x));
    PoissonProblem {
        name: "polynomial".into(),
        domain,
        rhs: Arc::new(move |x| u2.laplacian(x)),
        dirichlet: Arc::new(move |x| u3.eval(x)),
        exact: Some(exact),
    }
}

/// Global `N x N` system in compressed-row storage, columns sorted per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    /// Builds CSR storage from per-row `(col, value)` lists, summing
    /// duplicate columns.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, rhs: Vec<f64>) -> Result<Self, SolveError> {
        let n = rows.len();
        if rhs.len() != n {
            return Err(SolveError::Shape);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, mut row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                return Err(SolveError::EmptyRow(i));
            }
            if row.iter().any(|&(c, _)| c >= n) {
                return Err(SolveError::Shape);
            }
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                if cols.len() > start && cols[cols.len() - 1] == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseSystem {
            n,
            row_ptr,
            cols,
            vals,
            rhs,
        })
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, a)| a * x[j]).sum();
        }
    }

    /// `|A x - b|_2 / |b|_2` (absolute residual when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.matvec(x, &mut ax);
        let r: f64 = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let b = norm2(&self.rhs);
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }

    /// Coordinate-format dump: `# N nnz` header, then `row col value` lines.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# {} {}", self.n, self.nnz())?;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                writeln!(out, "{i} {j} {a:e}")?;
            }
        }
        Ok(())
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Interior rows carry the stencil weights with `rhs = f(x_i)`; boundary rows
/// are identity rows with `rhs = g(x_i)`.
pub fn assemble_global(
    nodes: &NodeSet,
    weights: &[StencilWeights],
    problem: &PoissonProblem,
) -> Result<SparseSystem, SolveError> {
    let n = nodes.len();
    let mut by_node: Vec<Option<&StencilWeights>> = vec![None; n];
    for sw in weights {
        if sw.center < n {
            by_node[sw.center] = Some(sw);
        }
    }
    let mut rows = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let x = nodes.position(i).coords();
        match nodes.kind(i) {
            NodeKind::Boundary => {
                rows.push(vec![(i, 1.0)]);
                rhs.push((problem.dirichlet)(x));
            }
            NodeKind::Interior => {
                let sw = by_node[i].ok_or(SolveError::MissingWeights(i))?;
                rows.push(sw.neighbors.iter().copied().zip(sw.w.iter().copied()).collect());
                rhs.push((problem.rhs)(x));
            }
        }
    }
    SparseSystem::from_rows(rows, rhs)
}

/// Exact solution sampled at the nodes, if the problem has one.
pub fn exact_values(nodes: &NodeSet, problem: &PoissonProblem) -> Option<Vec<f64>> {
    let exact = problem.exact.as_ref()?;
    Some(nodes.positions().iter().map(|p| exact(p.coords())).collect())
}

/// Solution dump: header, then `coords... u_h u_exact abs_err` per node.
pub fn write_solution_dump<W: Write>(
    mut out: W,
    nodes: &NodeSet,
    u_h: &[f64],
    exact: Option<&[f64]>,
) -> std::io::Result<()> {
    let axes = ["x", "y", "z"];
    let mut header: Vec<String> = (0..nodes.dim())
        .map(|k| axes.get(k).map_or(format!("x{k}"), |s| s.to_string()))
        .collect();
    header.extend(["u_h", "u_exact", "abs_err"].map(String::from));
    writeln!(out, "# {}", header.join(" "))?;
    for (i, p) in nodes.positions().iter().enumerate() {
        for c in p.coords() {
            write!(out, "{c} ")?;
        }
        match exact {
            Some(e) => writeln!(out, "{:e} {:e} {:e}", u_h[i], e[i], (u_h[i] - e[i]).abs())?,
            None => writeln!(out, "{:e} nan nan", u_h[i])?,
        }
    }
    Ok(())
}
