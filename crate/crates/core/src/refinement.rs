//! Spatially variable augmentation order (p-refinement).
//!
//! Orders are assigned from concentric zones around a source point; each
//! node's order then fixes its stencil size `n = 2 C(m+d, d)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basis::monomial_count;
use crate::error::RefinementError;
use crate::geometry::{dist2, NodeSet};

/// Stencil size for augmentation degree `m` in `d` dimensions: twice the
/// number of monomials.
pub fn stencil_size(m: u32, d: usize) -> usize {
    2 * monomial_count(m, d)
}

/// Concentric order zones around `source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialZoneSpec {
    pub name: String,
    pub source: Vec<f64>,
    /// `(radius, order)` pairs with strictly increasing radii.
    pub zones: Vec<(f64, u32)>,
    pub default_order: u32,
}

/// Location of the strong source in the disk benchmark.
pub const PEAK_CENTER: [f64; 2] = [0.5, 0.5];

impl RadialZoneSpec {
    pub fn new(
        name: impl Into<String>,
        source: Vec<f64>,
        zones: Vec<(f64, u32)>,
        default_order: u32,
    ) -> Result<Self, RefinementError> {
        let spec = RadialZoneSpec {
            name: name.into(),
            source,
            zones,
            default_order,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single order everywhere.
    pub fn uniform(order: u32, d: usize) -> Self {
        RadialZoneSpec {
            name: format!("uniform-{order}"),
            source: vec![0.0; d],
            zones: Vec::new(),
            default_order: order,
        }
    }

    pub fn validate(&self) -> Result<(), RefinementError> {
        if self.source.iter().any(|c| !c.is_finite()) {
            return Err(RefinementError::InvalidSpec("non-finite source".into()));
        }
        if self.default_order == 0 || self.zones.iter().any(|z| z.1 == 0) {
            return Err(RefinementError::InvalidSpec("orders must be positive".into()));
        }
        if self.zones.iter().any(|z| !(z.0 >= 0.0 && z.0.is_finite())) {
            return Err(RefinementError::InvalidSpec("radii must be finite and >= 0".into()));
        }
        if self.zones.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(RefinementError::InvalidSpec(
                "radii must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Order at distance `r` from the source; zone radii are inclusive.
    pub fn order_at_distance(&self, r: f64) -> u32 {
        self.zones
            .iter()
            .find(|(radius, _)| r <= *radius)
            .map_or(self.default_order, |z| z.1)
    }

    /// Every order this spec can produce.
    pub fn orders(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.zones.iter().map(|z| z.1).collect();
        v.push(self.default_order);
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Named order specs: `c1`, `c2`, `c3` around the benchmark source, and
/// `uniform-<m>` for a constant order.
pub fn preset(name: &str) -> Result<RadialZoneSpec, RefinementError> {
    let zoned = |zones: Vec<(f64, u32)>| RadialZoneSpec {
        name: name.to_string(),
        source: PEAK_CENTER.to_vec(),
        zones,
        default_order: 2,
    };
    match name {
        "c1" => Ok(zoned(vec![(0.0, 6), (0.1, 4)])),
        "c2" => Ok(zoned(vec![(0.1, 6), (0.2, 4)])),
        "c3" => Ok(zoned(vec![(0.2, 6), (0.4, 4)])),
        _ => {
            let m = name
                .strip_prefix("uniform-")
                .and_then(|m| m.parse::<u32>().ok())
                .filter(|&m| m > 0)
                .ok_or_else(|| RefinementError::UnknownPreset(name.to_string()))?;
            let mut spec = RadialZoneSpec::uniform(m, 2);
            spec.source = PEAK_CENTER.to_vec();
            Ok(spec)
        }
    }
}

/// Per-node augmentation degree and the stencil size it implies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderField {
    m: Vec<u32>,
    n: Vec<usize>,
}

impl OrderField {
    pub fn from_orders(m: Vec<u32>, d: usize) -> Self {
        let n = m.iter().map(|&o| stencil_size(o, d)).collect();
        OrderField { m, n }
    }

    pub fn order(&self, i: usize) -> u32 {
        self.m[i]
    }

    pub fn orders(&self) -> &[u32] {
        &self.m
    }

    pub fn size(&self, i: usize) -> usize {
        self.n[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.n
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Assigns each node the order of the innermost zone containing it.
pub fn assign_orders(nodes: &NodeSet, spec: &RadialZoneSpec) -> Result<OrderField, RefinementError> {
    spec.validate()?;
    let d = nodes.dim();
    if !spec.zones.is_empty() && spec.source.len() != d {
        return Err(RefinementError::InvalidSpec(format!(
            "source has dimension {} but nodes have dimension {d}",
            spec.source.len()
        )));
    }
    let m = nodes
        .positions()
        .iter()
        .map(|p| {
            if spec.zones.is_empty() {
                spec.default_order
            } else {
                spec.order_at_distance(dist2(p.coords(), &spec.source).sqrt())
            }
        })
        .collect();
    Ok(OrderField::from_orders(m, d))
}

/// Fraction of nodes carrying each order; fractions sum to one.
pub fn zone_census(orders: &OrderField) -> BTreeMap<u32, f64> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &m in orders.orders() {
        *counts.entry(m).or_default() += 1;
    }
    let total = orders.len().max(1) as f64;
    counts
        .into_iter()
        .map(|(m, c)| (m, c as f64 / total))
        .collect()
}
