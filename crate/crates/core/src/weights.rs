//! RBF-FD stencil weights from the monomial-augmented PHS collocation system.
//!
//! For a stencil `x_1..x_n` around a center `x_c` the local saddle system is
//!
//! ```text
//! [ A   P ] [ w ]   [ l_phi ]
//! [ P^T 0 ] [ l ] = [ l_p   ]
//! ```
//!
//! with `A_ij = phi(|x_i - x_j|)`, `P_ij = p_j(x_i)`, `l_phi_j = (L phi_j)(x_c)`
//! and `l_p_j = (L p_j)(x_c)`. Only `w` is kept.
//!
//! Everything is evaluated in local coordinates `(x - x_c) / s`, where `s` is
//! the stencil radius; the weights are multiplied by `s^(-order)` on the way
//! out so they act on unscaled field values.

use std::io::Write;

use faer::prelude::Solve;
use faer::Mat;
use rayon::prelude::*;

use crate::basis::{monomial_apply_slice, monomial_eval_slice, MonomialBasis, OperatorTag, PhsBasis};
use crate::error::WeightsError;
use crate::geometry::{dist2, NodeSet, Point, StencilTable};
use crate::refinement::{stencil_size, OrderField};

/// Relative pivot threshold below which a local system is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Dense augmented collocation system for one stencil.
#[derive(Debug, Clone)]
pub struct LocalSystem {
    /// Symmetric `(n+s) x (n+s)` block matrix `[[A, P], [P^T, 0]]`.
    pub matrix: Mat<f64>,
    /// `l_phi` followed by `l_p`.
    pub rhs: Vec<f64>,
    pub n: usize,
    pub s: usize,
    /// Length used to scale local coordinates.
    pub scale: f64,
    pub op: OperatorTag,
}

/// Operator weights of one node over its stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilWeights {
    pub center: usize,
    pub neighbors: Vec<usize>,
    pub w: Vec<f64>,
}

impl StencilWeights {
    /// Applies the weights to nodal values `u`.
    pub fn apply(&self, u: &[f64]) -> f64 {
        self.neighbors.iter().zip(&self.w).map(|(&j, w)| w * u[j]).sum()
    }
}

/// Builds the local saddle system for `points` around `center`.
pub fn assemble_local(
    points: &[Point],
    center: &Point,
    phs: PhsBasis,
    mono: &MonomialBasis,
    op: OperatorTag,
) -> Result<LocalSystem, WeightsError> {
    let n = points.len();
    let s = mono.len();
    if n == 0 {
        return Err(WeightsError::EmptyStencil);
    }
    if n < s {
        return Err(WeightsError::StencilTooSmall { n, s });
    }
    let d = center.dim();
    let c = center.coords();
    let scale = points
        .iter()
        .map(|p| dist2(p.coords(), c))
        .fold(0.0, f64::max)
        .sqrt();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut local = vec![0.0; n * d];
    for (i, p) in points.iter().enumerate() {
        for (k, (x, xc)) in p.coords().iter().zip(c).enumerate() {
            local[i * d + k] = (x - xc) / scale;
        }
    }
    let row = |i: usize| &local[i * d..(i + 1) * d];

    let size = n + s;
    let mut matrix = Mat::<f64>::zeros(size, size);
    let mut rhs = vec![0.0; size];
    let diagonal = phs.eval_unchecked(0.0);
    for i in 0..n {
        for j in 0..i {
            let r2 = dist2(row(i), row(j));
            if r2 == 0.0 {
                return Err(WeightsError::DuplicatePoints { a: j, b: i });
            }
            let v = phs.eval_unchecked(r2.sqrt());
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
        matrix[(i, i)] = diagonal;
        for (a, alpha) in mono.indices().iter().enumerate() {
            let v = monomial_eval_slice(alpha, row(i));
            matrix[(i, n + a)] = v;
            matrix[(n + a, i)] = v;
        }
        let r = row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        rhs[i] = phs.apply_unchecked(op, d, r);
    }
    let origin = vec![0.0; d];
    for (a, alpha) in mono.indices().iter().enumerate() {
        rhs[n + a] = monomial_apply_slice(op, alpha, &origin);
    }
    Ok(LocalSystem {
        matrix,
        rhs,
        n,
        s,
        scale,
        op,
    })
}

/// Solves the local system by row-pivoted LU and returns the `n` stencil
/// weights, discarding the Lagrange multipliers.
pub fn solve_local(sys: &LocalSystem) -> Result<Vec<f64>, WeightsError> {
    let size = sys.n + sys.s;
    // The saddle matrix is symmetric, so the max row sum is the max column sum.
    let norm = (0..size)
        .map(|j| sys.matrix.col(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let lu = sys.matrix.partial_piv_lu();
    let u = lu.U();
    let pivot = (0..size).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(pivot > PIVOT_TOLERANCE * norm) {
        return Err(WeightsError::Singular { pivot, norm });
    }
    let b = Mat::<f64>::from_fn(size, 1, |i, _| sys.rhs[i]);
    let x = lu.solve(&b);
    let factor = sys.scale.powi(-sys.op.order());
    let w: Vec<f64> = (0..sys.n).map(|i| x[(i, 0)] * factor).collect();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(WeightsError::Singular { pivot, norm });
    }
    Ok(w)
}

/// Weights of a single node over the given neighbor indices.
pub fn node_weights(
    nodes: &NodeSet,
    center: usize,
    neighbors: &[usize],
    order: u32,
    phs: PhsBasis,
    op: OperatorTag,
) -> Result<StencilWeights, WeightsError> {
    let points: Vec<Point> = neighbors.iter().map(|&j| nodes.position(j).clone()).collect();
    let mono = MonomialBasis::new(order, nodes.dim());
    let sys = assemble_local(&points, nodes.position(center), phs, &mono, op)?;
    let w = solve_local(&sys)?;
    Ok(StencilWeights {
        center,
        neighbors: neighbors.to_vec(),
        w,
    })
}

/// Computes weights for every interior node with a single thread.
pub fn compute_all_weights(
    nodes: &NodeSet,
    stencils: &StencilTable,
    orders: &OrderField,
    phs: PhsBasis,
    op: OperatorTag,
) -> Result<Vec<StencilWeights>, WeightsError> {
    compute_all_weights_with(nodes, stencils, orders, phs, op, 1)
}

/// Computes weights for every interior node, in node order.
///
/// Each node's weights depend only on its own stencil and order, so the
/// output is identical for any `threads`. All failures are collected before
/// returning.
pub fn compute_all_weights_with(
    nodes: &NodeSet,
    stencils: &StencilTable,
    orders: &OrderField,
    phs: PhsBasis,
    op: OperatorTag,
    threads: usize,
) -> Result<Vec<StencilWeights>, WeightsError> {
    let d = nodes.dim();
    let interior: Vec<usize> = nodes.interior_indices().collect();
    let one = |i: usize| -> Result<StencilWeights, WeightsError> {
        let order = orders.order(i);
        let expected = stencil_size(order, d);
        if stencils.size(i) != expected {
            return Err(WeightsError::SizeMismatch {
                node: i,
                order,
                expected,
                got: stencils.size(i),
            });
        }
        node_weights(nodes, i, stencils.stencil(i), order, phs, op).map_err(|e| {
            WeightsError::AtNode {
                node: i,
                source: Box::new(e),
            }
        })
    };
    let results: Vec<Result<StencilWeights, WeightsError>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| interior.par_iter().map(|&i| one(i)).collect())
    } else {
        interior.iter().map(|&i| one(i)).collect()
    };

    let mut out = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(w) => out.push(w),
            Err(e) => failures.push(e),
        }
    }
    match failures.len() {
        0 => Ok(out),
        1 => Err(failures.pop().unwrap()),
        _ => Err(WeightsError::Many(failures)),
    }
}

/// Debug dump, one line per stencil: `center n j_1 .. j_n w_1 .. w_n`.
pub fn write_weight_dump<W: Write>(mut out: W, weights: &[StencilWeights]) -> std::io::Result<()> {
    for sw in weights {
        write!(out, "{} {}", sw.center, sw.neighbors.len())?;
        for j in &sw.neighbors {
            write!(out, " {j}")?;
        }
        for w in &sw.w {
            write!(out, " {w:e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::monomial_count;
    use crate::geometry::{discretize, select_stencils, Domain, NodeKind};
    use crate::refinement::{assign_orders, preset, RadialZoneSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jittered_stencil(rng: &mut ChaCha8Rng, n: usize, spacing: f64) -> (Vec<Point>, Point) {
        // Perturbed lattice points around the origin; nearest n to the center.
        let side = (n as f64).sqrt().ceil() as i32 + 2;
        let mut pts: Vec<Point> = Vec::new();
        for i in -side..=side {
            for j in -side..=side {
                let x = i as f64 * spacing + rng.random_range(-0.3..0.3) * spacing;
                let y = j as f64 * spacing + rng.random_range(-0.3..0.3) * spacing;
                pts.push([x + 0.7, y - 0.2].into());
            }
        }
        let center: Point = [0.7, -0.2].into();
        pts.sort_by(|a, b| a.dist(&center).total_cmp(&b.dist(&center)));
        pts.truncate(n);
        (pts, center)
    }

    #[test]
    fn single_node_identity() {
        let p: Point = [0.3, 0.4].into();
        let mono = MonomialBasis::new(0, 2);
        let sys = assemble_local(&[p.clone()], &p, PhsBasis::default(), &mono, OperatorTag::Identity).unwrap();
        assert_eq!(sys.matrix.nrows(), 2);
        let w = solve_local(&sys).unwrap();
        assert_eq!(w.len(), 1);
        assert!((w[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_diagonal_for_cubic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (pts, c) = jittered_stencil(&mut rng, 12, 0.1);
        let sys = assemble_local(&pts, &c, PhsBasis::default(), &MonomialBasis::new(2, 2), OperatorTag::Laplacian).unwrap();
        for i in 0..12 {
            assert_eq!(sys.matrix[(i, i)], 0.0);
        }
        for i in 0..sys.n + sys.s {
            for j in 0..sys.n + sys.s {
                let (a, b) = (sys.matrix[(i, j)], sys.matrix[(j, i)]);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300));
            }
        }
    }

    #[test]
    fn matches_naive_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Point> = (0..12)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)].into())
            .collect();
        let center = pts[0].clone();
        let sys = assemble_local(&pts, &center, PhsBasis::default(), &MonomialBasis::new(2, 2), OperatorTag::Laplacian).unwrap();

        // Independent double loop over the full block matrix.
        let s = sys.scale;
        let y: Vec<[f64; 2]> = pts
            .iter()
            .map(|p| [(p.coords()[0] - center.coords()[0]) / s, (p.coords()[1] - center.coords()[1]) / s])
            .collect();
        let exps = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
        let mon = |e: (i32, i32), q: [f64; 2]| q[0].powi(e.0) * q[1].powi(e.1);
        let total = 18;
        for row in 0..total {
            for col in 0..total {
                let expected = match (row < 12, col < 12) {
                    (true, true) => {
                        let r = ((y[row][0] - y[col][0]).powi(2) + (y[row][1] - y[col][1]).powi(2)).sqrt();
                        r * r * r
                    }
                    (true, false) => mon(exps[col - 12], y[row]),
                    (false, true) => mon(exps[row - 12], y[col]),
                    (false, false) => 0.0,
                };
                assert!((sys.matrix[(row, col)] - expected).abs() < 1e-14, "({row},{col})");
            }
        }
        for (i, q) in y.iter().enumerate() {
            let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
            assert!((sys.rhs[i] - 9.0 * r).abs() < 1e-14);
        }
        assert_eq!(&sys.rhs[12..], &[0.0, 0.0, 0.0, 2.0, 0.0, 2.0]);
    }

    #[test]
    fn local_errors() {
        let p: Point = [0.0, 0.0].into();
        let q: Point = [1.0, 0.0].into();
        let mono = MonomialBasis::new(2, 2);
        assert!(matches!(
            assemble_local(&[p.clone(), q.clone()], &p, PhsBasis::default(), &mono, OperatorTag::Laplacian),
            Err(WeightsError::StencilTooSmall { n: 2, s: 6 })
        ));
        let dup = vec![p.clone(), q.clone(), q.clone()];
        assert!(matches!(
            assemble_local(&dup, &p, PhsBasis::default(), &MonomialBasis::new(1, 2), OperatorTag::Laplacian),
            Err(WeightsError::DuplicatePoints { a: 1, b: 2 })
        ));
        assert!(matches!(
            assemble_local(&[], &p, PhsBasis::default(), &MonomialBasis::new(0, 2), OperatorTag::Identity),
            Err(WeightsError::EmptyStencil)
        ));
        // Collinear points cannot resolve the y-monomial.
        let line: Vec<Point> = (0..6).map(|i| [i as f64 * 0.1, 0.0].into()).collect();
        let sys = assemble_local(&line, &line[0], PhsBasis::default(), &MonomialBasis::new(1, 2), OperatorTag::Laplacian).unwrap();
        assert!(matches!(solve_local(&sys), Err(WeightsError::Singular { .. })));
    }

    #[test]
    fn exactness_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in [0u32, 1, 2, 4, 6] {
            let n = 2 * monomial_count(m, 2);
            let (pts, c) = jittered_stencil(&mut rng, n, 0.05);
            let mono = MonomialBasis::new(m, 2);
            let id = solve_local(&assemble_local(&pts, &c, PhsBasis::default(), &mono, OperatorTag::Identity).unwrap()).unwrap();
            for alpha in mono.indices() {
                let approx: f64 = pts.iter().zip(&id).map(|(p, w)| w * monomial_eval_slice(alpha, p.coords())).sum();
                let exact = monomial_eval_slice(alpha, c.coords());
                assert!((approx - exact).abs() < 1e-9, "m={m} alpha={alpha:?}");
            }
            let lap = solve_local(&assemble_local(&pts, &c, PhsBasis::default(), &mono, OperatorTag::Laplacian).unwrap()).unwrap();
            let sum: f64 = lap.iter().sum();
            let abs: f64 = lap.iter().map(|w| w.abs()).sum();
            assert!(sum.abs() <= 1e-10 * abs, "m={m} sum={sum}");
            if m >= 2 {
                let q: f64 = pts.iter().zip(&lap).map(|(p, w)| w * dist2(p.coords(), &[0.0, 0.0])).sum();
                assert!((q - 4.0).abs() <= 1e-8 * 4.0, "m={m} q={q}");
            }
        }
    }

    #[test]
    fn cubic_phs_on_grid_is_second_order() {
        // Center plus its 12 nearest lattice neighbors (rings h, sqrt2 h, 2h).
        let u = |x: f64, y: f64| x.sin() * y.sin();
        let lap_u = |x: f64, y: f64| -2.0 * x.sin() * y.sin();
        let (xc, yc) = (0.4, 0.3);
        let mut errors = Vec::new();
        for level in 0..4 {
            let h = 0.1 / 2f64.powi(level);
            let mut pts: Vec<Point> = Vec::new();
            for i in -3..=3 {
                for j in -3..=3 {
                    pts.push([xc + i as f64 * h, yc + j as f64 * h].into());
                }
            }
            let center: Point = [xc, yc].into();
            let mut order: Vec<usize> = (0..pts.len()).collect();
            order.sort_by(|&a, &b| pts[a].dist(&center).total_cmp(&pts[b].dist(&center)).then(a.cmp(&b)));
            let stencil: Vec<Point> = order.iter().take(13).map(|&k| pts[k].clone()).collect();
            let sys = assemble_local(&stencil, &center, PhsBasis::default(), &MonomialBasis::new(2, 2), OperatorTag::Laplacian).unwrap();
            let w = solve_local(&sys).unwrap();
            let approx: f64 = stencil.iter().zip(&w).map(|(p, w)| w * u(p.coords()[0], p.coords()[1])).sum();
            errors.push((approx - lap_u(xc, yc)).abs());
        }
        for pair in errors.windows(2) {
            let rate = (pair[0] / pair[1]).log2();
            assert!(rate >= 1.5, "errors {errors:?}");
        }
    }

    fn disk_nodes(h: f64, seed: u64) -> NodeSet {
        discretize(&Domain::ball([0.0, 0.0], 1.5).unwrap(), h, seed).unwrap()
    }

    #[test]
    fn uniform_order_stencil_sizes() {
        let nodes = disk_nodes(0.08, 1);
        let orders = assign_orders(&nodes, &preset("uniform-2").unwrap()).unwrap();
        let stencils = select_stencils(&nodes, orders.sizes()).unwrap();
        let w = compute_all_weights(&nodes, &stencils, &orders, PhsBasis::default(), OperatorTag::Laplacian).unwrap();
        assert_eq!(w.len(), nodes.n_interior());
        assert!(w.iter().all(|sw| sw.w.len() == 12 && sw.neighbors[0] == sw.center));
        assert!(w.iter().all(|sw| nodes.kind(sw.center) == NodeKind::Interior));
    }

    #[test]
    fn mixed_orders_and_threads_agree() {
        let nodes = disk_nodes(0.05, 2);
        let orders = assign_orders(&nodes, &preset("c2").unwrap()).unwrap();
        let stencils = select_stencils(&nodes, orders.sizes()).unwrap();
        let serial = compute_all_weights(&nodes, &stencils, &orders, PhsBasis::default(), OperatorTag::Laplacian).unwrap();
        let parallel = compute_all_weights_with(&nodes, &stencils, &orders, PhsBasis::default(), OperatorTag::Laplacian, 4).unwrap();
        assert_eq!(serial, parallel);
        let mut seen: Vec<usize> = serial.iter().map(|sw| sw.w.len()).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, vec![12, 30, 56]);
    }

    #[test]
    fn translation_and_rotation_invariance() {
        let nodes = disk_nodes(0.1, 3);
        let spec = RadialZoneSpec::uniform(4, 2);
        let orders = assign_orders(&nodes, &spec).unwrap();
        let stencils = select_stencils(&nodes, orders.sizes()).unwrap();
        let base = compute_all_weights(&nodes, &stencils, &orders, PhsBasis::default(), OperatorTag::Laplacian).unwrap();

        let shifted = nodes.translated(&[3.25, -1.5]);
        let moved = compute_all_weights(&shifted, &stencils, &orders, PhsBasis::default(), OperatorTag::Laplacian).unwrap();

        let (sn, cs) = (0.7f64.sin(), 0.7f64.cos());
        let rotated_pts: Vec<Point> = nodes
            .positions()
            .iter()
            .map(|p| [cs * p.coords()[0] - sn * p.coords()[1], sn * p.coords()[0] + cs * p.coords()[1]].into())
            .collect();
        let rotated = NodeSet::from_parts(rotated_pts, nodes.kinds().to_vec(), nodes.h()).unwrap();
        let turned = compute_all_weights(&rotated, &stencils, &orders, PhsBasis::default(), OperatorTag::Laplacian).unwrap();

        for ((a, b), c) in base.iter().zip(&moved).zip(&turned) {
            let scale = a.w.iter().map(|w| w.abs()).fold(0.0, f64::max);
            for k in 0..a.w.len() {
                assert!((a.w[k] - b.w[k]).abs() <= 1e-10 * scale);
                assert!((a.w[k] - c.w[k]).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn size_mismatch_is_reported() {
        let nodes = disk_nodes(0.2, 1);
        let orders = assign_orders(&nodes, &RadialZoneSpec::uniform(2, 2)).unwrap();
        let stencils = select_stencils(&nodes, &vec![6; nodes.len()]).unwrap();
        let err = compute_all_weights(&nodes, &stencils, &orders, PhsBasis::default(), OperatorTag::Laplacian).unwrap_err();
        assert!(matches!(err, WeightsError::Many(ref v) if v.len() == nodes.n_interior()));
    }

    #[test]
    fn dump_lines() {
        let sw = StencilWeights {
            center: 3,
            neighbors: vec![3, 1],
            w: vec![-2.0, 2.0],
        };
        let mut buf = Vec::new();
        write_weight_dump(&mut buf, &[sw]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3 2 3 1 -2e0 2e0\n");
    }
}
