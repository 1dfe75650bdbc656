//! Computational domains, quasi-uniform node generation and neighbor queries.
//!
//! Nodes are produced boundary-first: [`discretize_boundary`] places
//! equally spaced points on the boundary and [`fill_interior`] grows the
//! interior from them with an advancing-front Poisson-disk fill. The
//! resulting [`NodeSet`] always lists boundary nodes before interior nodes.

mod kdtree;
mod stencil;

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use self::kdtree::SpatialIndex;
pub use self::stencil::{select_stencils, StencilTable};
use crate::error::GeometryError;

/// A point in `d`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist2(&self.0, &other.0).sqrt()
    }

    pub fn translated(&self, offset: &[f64]) -> Point {
        Point(self.0.iter().zip(offset).map(|(a, b)| a + b).collect())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point::new(v)
    }
}

impl<const D: usize> From<[f64; D]> for Point {
    fn from(v: [f64; D]) -> Self {
        Point::new(v.to_vec())
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Computational domain, described by its signed distance function.
///
/// Only balls are provided; further shapes are added as variants that
/// implement the same signed-distance, bounding-box and boundary contracts.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Ball { center: Point, radius: f64 },
}

impl Domain {
    pub fn ball(center: impl Into<Point>, radius: f64) -> Result<Self, GeometryError> {
        let center = center.into();
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidDomain(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if !center.is_finite() {
            return Err(GeometryError::InvalidDomain("non-finite center".into()));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } => center.dim(),
        }
    }

    /// Characteristic length used for boundary tolerances.
    pub fn length_scale(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => *radius,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => ball_volume(self.dim(), *radius),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Ball { center, radius } => (
                center.coords().iter().map(|c| c - radius).collect(),
                center.coords().iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Negative inside, zero on the boundary, positive outside.
    pub fn signed_distance(&self, p: &Point) -> Result<f64, GeometryError> {
        if p.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        Ok(self.signed_distance_unchecked(p.coords()))
    }

    fn signed_distance_unchecked(&self, p: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => dist2(center.coords(), p).sqrt() - radius,
        }
    }
}

/// Signed distance of `p` to the boundary of `domain`.
pub fn signed_distance(domain: &Domain, p: &Point) -> Result<f64, GeometryError> {
    domain.signed_distance(p)
}

fn ball_volume(d: usize, r: f64) -> f64 {
    // V_d = pi^(d/2) / Gamma(d/2 + 1) r^d, via the two-step recurrence.
    let (mut prev2, mut prev1) = (1.0, 2.0 * r);
    if d == 0 {
        return prev2;
    }
    for k in 2..=d {
        let cur = 2.0 * PI * r * r / k as f64 * prev2;
        prev2 = prev1;
        prev1 = cur;
    }
    prev1
}

pub fn build_index(points: &[Point]) -> Result<SpatialIndex, GeometryError> {
    SpatialIndex::build(points)
}

pub fn knn(index: &SpatialIndex, query: &Point, k: usize) -> Result<Vec<usize>, GeometryError> {
    index.knn(query, k)
}

/// Tag of a computational node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Interior,
    Boundary,
}

impl NodeKind {
    pub fn code(self) -> char {
        match self {
            NodeKind::Interior => 'i',
            NodeKind::Boundary => 'b',
        }
    }
}

/// Scattered nodes with interior/boundary tags and target spacing `h`.
///
/// Boundary nodes come first, followed by interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    positions: Vec<Point>,
    kinds: Vec<NodeKind>,
    h: f64,
}

impl NodeSet {
    /// Builds a node set from explicit positions and tags.
    pub fn from_parts(
        positions: Vec<Point>,
        kinds: Vec<NodeKind>,
        h: f64,
    ) -> Result<Self, GeometryError> {
        if positions.len() != kinds.len() {
            return Err(GeometryError::SizeCountMismatch {
                expected: positions.len(),
                got: kinds.len(),
            });
        }
        if !(h > 0.0) {
            return Err(GeometryError::InvalidSpacing(h));
        }
        if let Some(first) = positions.first() {
            let d = first.dim();
            if let Some(bad) = positions.iter().find(|p| p.dim() != d) {
                return Err(GeometryError::DimensionMismatch {
                    expected: d,
                    got: bad.dim(),
                });
            }
        }
        Ok(NodeSet {
            positions,
            kinds,
            h,
        })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &Point {
        &self.positions[i]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.positions.first().map_or(0, Point::dim)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.kinds.iter().filter(|k| **k == NodeKind::Interior).count()
    }

    pub fn n_boundary(&self) -> usize {
        self.len() - self.n_interior()
    }

    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == NodeKind::Interior)
            .map(|(i, _)| i)
    }

    /// Rigidly shifts every node by `offset`.
    pub fn translated(&self, offset: &[f64]) -> NodeSet {
        NodeSet {
            positions: self.positions.iter().map(|p| p.translated(offset)).collect(),
            kinds: self.kinds.clone(),
            h: self.h,
        }
    }

    /// Writes the plain-text node dump: a `# d=.. h=.. N=..` header, then one
    /// `coords... kind m` line per node (`m` is 0 when no orders are given).
    pub fn write_dump<W: Write>(&self, mut out: W, orders: Option<&[u32]>) -> std::io::Result<()> {
        writeln!(out, "# d={} h={} N={}", self.dim(), self.h, self.len())?;
        for (i, (p, kind)) in self.positions.iter().zip(&self.kinds).enumerate() {
            for c in p.coords() {
                write!(out, "{c} ")?;
            }
            let m = orders.map_or(0, |o| o[i]);
            writeln!(out, "{} {}", kind.code(), m)?;
        }
        Ok(())
    }
}

/// Places quasi-uniform nodes on the boundary of `domain` at spacing `h`.
///
/// In 2D the circle gets `round(2 pi r / h)` equally spaced points with a
/// seed-dependent phase. In 3D a Fibonacci lattice with hexagonal-area
/// density is used.
pub fn discretize_boundary(domain: &Domain, h: f64, seed: u64) -> Result<Vec<Point>, GeometryError> {
    if !(h > 0.0 && h.is_finite()) || h >= domain.diameter() {
        return Err(GeometryError::InvalidSpacing(h));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match domain {
        Domain::Ball { center, radius } => match center.dim() {
            2 => {
                let count = (2.0 * PI * radius / h).round() as usize;
                if count < 4 {
                    return Err(GeometryError::SpacingTooLarge { h, count });
                }
                let step = 2.0 * PI / count as f64;
                let phase = rng.random::<f64>() * step;
                let c = center.coords();
                Ok((0..count)
                    .map(|i| {
                        let t = phase + step * i as f64;
                        Point::new(vec![c[0] + radius * t.cos(), c[1] + radius * t.sin()])
                    })
                    .collect())
            }
            3 => {
                let area = 4.0 * PI * radius * radius;
                let count = (area / (0.5 * 3f64.sqrt() * h * h)).round() as usize;
                if count < 4 {
                    return Err(GeometryError::SpacingTooLarge { h, count });
                }
                let golden = PI * (3.0 - 5f64.sqrt());
                let phase = rng.random::<f64>() * 2.0 * PI;
                let c = center.coords();
                Ok((0..count)
                    .map(|i| {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                        let rho = (1.0 - z * z).sqrt();
                        let t = phase + golden * i as f64;
                        Point::new(vec![
                            c[0] + radius * rho * t.cos(),
                            c[1] + radius * rho * t.sin(),
                            c[2] + radius * z,
                        ])
                    })
                    .collect())
            }
            d => Err(GeometryError::UnsupportedDimension(d)),
        },
    }
}

/// Options for the advancing-front interior fill.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillOptions {
    /// Candidates proposed around each popped node.
    pub candidates: usize,
    /// Relative slack on the separation test: a candidate is rejected if any
    /// node lies closer than `h * (1 - separation_eps)`.
    pub separation_eps: f64,
}

impl Default for FillOptions {
    fn default() -> Self {
        FillOptions {
            candidates: 15,
            separation_eps: 1e-10,
        }
    }
}

/// Fills the interior of `domain` starting from `boundary` with default options.
pub fn fill_interior(domain: &Domain, boundary: Vec<Point>, h: f64, seed: u64) -> Result<NodeSet, GeometryError> {
    fill_interior_with(domain, boundary, h, seed, FillOptions::default())
}

/// Advancing-front Poisson-disk fill.
///
/// The queue is seeded with the boundary nodes. Each popped node proposes
/// `candidates` points at distance `h` in uniformly random directions; a
/// candidate is kept if it lies strictly inside the domain and no existing
/// node is within `h (1 - eps)`. Accepted points join the queue.
pub fn fill_interior_with(
    domain: &Domain,
    boundary: Vec<Point>,
    h: f64,
    seed: u64,
    opts: FillOptions,
) -> Result<NodeSet, GeometryError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(GeometryError::InvalidSpacing(h));
    }
    let d = domain.dim();
    if let Some(bad) = boundary.iter().find(|p| p.dim() != d) {
        return Err(GeometryError::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    // Separate stream from the boundary phase so both stay reproducible.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (lo, hi) = domain.bounding_box();
    let mut grid = BackgroundGrid::new(&lo, &hi, h);

    let mut positions: Vec<Point> = Vec::new();
    let mut kinds = Vec::new();
    let mut queue = VecDeque::new();
    for p in boundary {
        grid.insert(p.coords(), positions.len());
        queue.push_back(positions.len());
        positions.push(p);
        kinds.push(NodeKind::Boundary);
    }

    let min_d2 = (h * (1.0 - opts.separation_eps)).powi(2);
    let mut dir = vec![0.0; d];
    let mut cand = vec![0.0; d];
    while let Some(idx) = queue.pop_front() {
        for _ in 0..opts.candidates {
            random_direction(&mut rng, &mut dir);
            let origin = positions[idx].coords();
            for k in 0..d {
                cand[k] = origin[k] + h * dir[k];
            }
            if domain.signed_distance_unchecked(&cand) >= 0.0 {
                continue;
            }
            if grid.any_within(&cand, min_d2, &positions) {
                continue;
            }
            grid.insert(&cand, positions.len());
            queue.push_back(positions.len());
            positions.push(Point::new(cand.clone()));
            kinds.push(NodeKind::Interior);
        }
    }

    NodeSet::from_parts(positions, kinds, h)
}

fn random_direction(rng: &mut ChaCha8Rng, dir: &mut [f64]) {
    if dir.len() == 2 {
        let t = rng.random::<f64>() * 2.0 * PI;
        dir[0] = t.cos();
        dir[1] = t.sin();
        return;
    }
    loop {
        let mut norm2 = 0.0;
        for c in dir.iter_mut() {
            *c = rng.sample(StandardNormal);
            norm2 += *c * *c;
        }
        if norm2 > 1e-24 {
            let inv = norm2.sqrt().recip();
            dir.iter_mut().for_each(|c| *c *= inv);
            return;
        }
    }
}

/// Uniform bucket grid with cell size `h`; a ball of radius <= h around any
/// point only touches the 3^d neighboring cells.
struct BackgroundGrid {
    lo: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    buckets: Vec<Vec<u32>>,
}

impl BackgroundGrid {
    fn new(lo: &[f64], hi: &[f64], h: f64) -> Self {
        let lo: Vec<f64> = lo.iter().map(|x| x - h).collect();
        let shape: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| ((b + h - a) / h).ceil() as usize + 1)
            .collect();
        let total = shape.iter().product();
        BackgroundGrid {
            lo,
            cell: h,
            shape,
            buckets: vec![Vec::new(); total],
        }
    }

    fn cell_of(&self, p: &[f64]) -> Vec<usize> {
        p.iter()
            .zip(&self.lo)
            .zip(&self.shape)
            .map(|((x, l), n)| (((x - l) / self.cell).floor().max(0.0) as usize).min(n - 1))
            .collect()
    }

    fn flat(&self, cell: &[usize]) -> usize {
        cell.iter()
            .zip(&self.shape)
            .fold(0, |acc, (c, n)| acc * n + c)
    }

    fn insert(&mut self, p: &[f64], idx: usize) {
        let c = self.cell_of(p);
        let f = self.flat(&c);
        self.buckets[f].push(idx as u32);
    }

    fn any_within(&self, p: &[f64], r2: f64, positions: &[Point]) -> bool {
        let center = self.cell_of(p);
        let d = center.len();
        let mut offset = vec![-1i64; d];
        let mut cell = vec![0usize; d];
        'outer: loop {
            let mut valid = true;
            for k in 0..d {
                let c = center[k] as i64 + offset[k];
                if c < 0 || c >= self.shape[k] as i64 {
                    valid = false;
                    break;
                }
                cell[k] = c as usize;
            }
            if valid {
                let bucket = &self.buckets[self.flat(&cell)];
                if bucket
                    .iter()
                    .any(|&j| dist2(positions[j as usize].coords(), p) < r2)
                {
                    return true;
                }
            }
            for k in 0..d {
                offset[k] += 1;
                if offset[k] <= 1 {
                    continue 'outer;
                }
                offset[k] = -1;
            }
            return false;
        }
    }
}

/// Empirical ratio between the fill spacing and the ideal `sqrt(area / N)`
/// spacing in 2D. The fill packs about `0.825 * area / h^2` nodes.
pub const SPACING_CALIBRATION_2D: f64 = 0.908;

/// Spacing that yields roughly `target` nodes in a 2D domain:
/// `h = sqrt(area / N) * c`, i.e. `radius * sqrt(pi / N) * c` for a disk.
pub fn spacing_for_count(domain: &Domain, target: usize) -> f64 {
    let d = domain.dim() as f64;
    (domain.volume() / target.max(1) as f64).powf(1.0 / d) * SPACING_CALIBRATION_2D
}

/// Boundary discretization followed by the interior fill.
pub fn discretize(domain: &Domain, h: f64, seed: u64) -> Result<NodeSet, GeometryError> {
    let boundary = discretize_boundary(domain, h, seed)?;
    fill_interior(domain, boundary, h, seed)
}
