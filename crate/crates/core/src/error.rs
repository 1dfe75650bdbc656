use thiserror::Error;

/// Errors raised by the geometry layer (domains, node generation, neighbor search).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0} for this operation")]
    UnsupportedDimension(usize),
    #[error("spacing h = {h} too large: only {count} boundary points fit (need at least 4)")]
    SpacingTooLarge { h: f64, count: usize },
    #[error("invalid spacing h = {0}")]
    InvalidSpacing(f64),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("cannot build a spatial index over an empty point list")]
    EmptyIndex,
    #[error("k = {k} out of range for an index of {len} points")]
    KOutOfRange { k: usize, len: usize },
    #[error("stencil size {size} for node {node} exceeds node count {len}")]
    StencilTooLarge { node: usize, size: usize, len: usize },
    #[error("expected {expected} stencil sizes, got {got}")]
    SizeCountMismatch { expected: usize, got: usize },
}

/// Errors raised by basis-function evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("negative radius r = {0}")]
    NegativeRadius(f64),
    #[error("PHS Laplacian with k = {k} is singular at r = 0")]
    SingularAtOrigin { k: u32 },
    #[error("dimension mismatch: multi-index has {expected} components, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid PHS exponent k = {0}")]
    InvalidExponent(u32),
}

/// Errors raised while building or solving local RBF-FD systems.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightsError {
    #[error("stencil has {n} nodes but {s} monomials are required")]
    StencilTooSmall { n: usize, s: usize },
    #[error("stencil points {a} and {b} coincide")]
    DuplicatePoints { a: usize, b: usize },
    #[error("empty stencil")]
    EmptyStencil,
    #[error("singular local system (pivot {pivot:e} vs matrix norm {norm:e})")]
    Singular { pivot: f64, norm: f64 },
    #[error("local system at node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<WeightsError>,
    },
    #[error("{} local systems failed: {}", .0.len(), summarize(.0))]
    Many(Vec<WeightsError>),
    #[error("node {node}: stencil size {got} inconsistent with order {order} (expected {expected})")]
    SizeMismatch {
        node: usize,
        order: u32,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Basis(#[from] BasisError),
}

fn summarize(errors: &[WeightsError]) -> String {
    let shown: Vec<String> = errors.iter().take(5).map(|e| e.to_string()).collect();
    let mut s = shown.join("; ");
    if errors.len() > 5 {
        s.push_str("; ...");
    }
    s
}

/// Errors raised by refinement presets and zone specs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefinementError {
    #[error("unknown order preset '{0}'")]
    UnknownPreset(String),
    #[error("invalid zone spec: {0}")]
    InvalidSpec(String),
}

/// Errors raised by global assembly and the sparse solve.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no stencil weights for interior node {0}")]
    MissingWeights(usize),
    #[error("row {0} of the global system is empty")]
    EmptyRow(usize),
    #[error("system is not square or rhs has wrong length")]
    Shape,
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("solver did not reach tolerance {tol:e}: achieved relative residual {residual:e}")]
    NotConverged { tol: f64, residual: f64 },
}

/// Errors from the full discretize-to-solve pipeline, attributed by phase.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("node generation: {0}")]
    Nodes(#[from] GeometryError),
    #[error("order assignment: {0}")]
    Orders(#[from] RefinementError),
    #[error("stencil weights: {0}")]
    Weights(#[from] WeightsError),
    #[error("assembly/solve: {0}")]
    Solve(#[from] SolveError),
}

/// Errors from the experiment harness and its file formats.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("u_h has {got} values but exact solution has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("exact solution has zero norm")]
    ZeroNorm,
    #[error("rate fit needs at least 2 distinct N values, got {0}")]
    TooFewPoints(usize),
    #[error("non-positive error {0} cannot enter a log-log fit")]
    NonPositiveError(f64),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
