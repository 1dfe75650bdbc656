use super::{NodeSet, SpatialIndex};
use crate::error::GeometryError;

/// Per-node stencils in flat storage. Row `i` starts with `i` itself and
/// lists its neighbors by nondecreasing distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilTable {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl StencilTable {
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        for row in rows {
            indices.extend(row);
            offsets.push(indices.len());
        }
        StencilTable { offsets, indices }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stencil(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn size(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn total_entries(&self) -> usize {
        self.indices.len()
    }
}

/// Selects the `sizes[i]` nearest nodes of every node `i`, itself first.
pub fn select_stencils(nodes: &NodeSet, sizes: &[usize]) -> Result<StencilTable, GeometryError> {
    if sizes.len() != nodes.len() {
        return Err(GeometryError::SizeCountMismatch {
            expected: nodes.len(),
            got: sizes.len(),
        });
    }
    if let Some((node, &size)) = sizes
        .iter()
        .enumerate()
        .find(|(_, &s)| s == 0 || s > nodes.len())
    {
        return Err(GeometryError::StencilTooLarge {
            node,
            size,
            len: nodes.len(),
        });
    }
    let index = SpatialIndex::build(nodes.positions())?;
    select_with_index(nodes, &index, sizes)
}

pub(crate) fn select_with_index(
    nodes: &NodeSet,
    index: &SpatialIndex,
    sizes: &[usize],
) -> Result<StencilTable, GeometryError> {
    let mut offsets = Vec::with_capacity(nodes.len() + 1);
    offsets.push(0);
    let mut indices = Vec::with_capacity(sizes.iter().sum());
    for (i, &size) in sizes.iter().enumerate() {
        let mut row = index.knn(nodes.position(i), size)?;
        // A coincident lower-index node would tie at distance zero.
        if row[0] != i {
            let pos = row.iter().position(|&j| j == i).unwrap_or(0);
            row.swap(0, pos);
            row[0] = i;
        }
        indices.extend(row);
        offsets.push(indices.len());
    }
    Ok(StencilTable { offsets, indices })
}
