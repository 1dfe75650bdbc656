use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{assemble_global, solve_sparse_with, PoissonProblem, SolutionField, SolverOptions, SparseSystem};
use crate::basis::{OperatorTag, PhsBasis};
use crate::error::PipelineError;
use crate::geometry::{discretize_boundary, fill_interior_with, select_stencils, NodeKind, spacing_for_count, FillOptions, NodeSet};
use crate::refinement::{assign_orders, OrderField, RadialZoneSpec};
use crate::weights::{compute_all_weights_with, StencilWeights};

/// How the node density is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    H(f64),
    /// Approximate node count, mapped to `h` by [`spacing_for_count`].
    Count(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spacing: Spacing,
    pub orders: RadialZoneSpec,
    pub phs: PhsBasis,
    pub seed: u64,
    pub solver: SolverOptions,
    pub fill: FillOptions,
}

impl RunConfig {
    pub fn new(spacing: Spacing, orders: RadialZoneSpec) -> Self {
        RunConfig {
            spacing,
            orders,
            phs: PhsBasis::default(),
            seed: 1,
            solver: SolverOptions::default(),
            fill: FillOptions::default(),
        }
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    /// Boundary and interior node generation.
    pub nodes: f64,
    /// Order assignment, stencil selection and local weight solves.
    pub weights: f64,
    pub assemble: f64,
    pub solve: f64,
    pub total: f64,
}

impl PhaseTimings {
    /// Phase-wise minimum over repeated runs.
    pub fn min(self, other: PhaseTimings) -> PhaseTimings {
        PhaseTimings {
            nodes: self.nodes.min(other.nodes),
            weights: self.weights.min(other.weights),
            assemble: self.assemble.min(other.assemble),
            solve: self.solve.min(other.solve),
            total: self.total.min(other.total),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub nodes: NodeSet,
    pub orders: OrderField,
    pub weights: Vec<StencilWeights>,
    pub system: SparseSystem,
    pub solution: SolutionField,
    pub timings: PhaseTimings,
}

/// Discretize, assign orders, select stencils, compute weights, assemble and
/// solve, timing each phase.
pub fn solve_problem(problem: &PoissonProblem, config: &RunConfig) -> Result<Solved, PipelineError> {
    let start = Instant::now();
    let h = match config.spacing {
        Spacing::H(h) => h,
        Spacing::Count(n) => spacing_for_count(&problem.domain, n),
    };
    let boundary = discretize_boundary(&problem.domain, h, config.seed)?;
    let nodes = fill_interior_with(&problem.domain, boundary, h, config.seed, config.fill)?;
    let t_nodes = start.elapsed().as_secs_f64();

    let t = Instant::now();
    let orders = assign_orders(&nodes, &config.orders)?;
    // Boundary rows are Dirichlet and need no stencil beyond the node itself.
    let sizes: Vec<usize> = orders
        .sizes()
        .iter()
        .zip(nodes.kinds())
        .map(|(&n, kind)| if *kind == NodeKind::Boundary { 1 } else { n })
        .collect();
    let stencils = select_stencils(&nodes, &sizes)?;
    let weights = compute_all_weights_with(
        &nodes,
        &stencils,
        &orders,
        config.phs,
        OperatorTag::Laplacian,
        config.solver.threads,
    )?;
    let t_weights = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let system = assemble_global(&nodes, &weights, problem)?;
    let t_assemble = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let solution = solve_sparse_with(&system, &config.solver)?;
    let t_solve = t.elapsed().as_secs_f64();

    let timings = PhaseTimings {
        nodes: t_nodes,
        weights: t_weights,
        assemble: t_assemble,
        solve: t_solve,
        total: start.elapsed().as_secs_f64(),
    };
    Ok(Solved {
        nodes,
        orders,
        weights,
        system,
        solution,
        timings,
    })
}
