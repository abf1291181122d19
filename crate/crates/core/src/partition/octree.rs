use super::{box_cell, sheet_test, SheetClass};
use crate::field::ScalarField;
use crate::geom::{Point3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OctreeParams {
    pub max_depth: u32,
    /// Nodes shallower than this are split regardless of classification, so
    /// surface leaves come out at a uniform size.
    pub min_depth: u32,
    pub samples_per_axis: usize,
}

impl Default for OctreeParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_depth: 0,
            samples_per_axis: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Empty,
    SingleSheet,
    Subdivided,
    /// Still ambiguous at `max_depth`; reported downstream as rejected.
    DepthLimited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OctreeNode {
    pub min: Point3,
    pub max: Point3,
    pub depth: u32,
    pub status: NodeStatus,
    pub children: Vec<OctreeNode>,
}

impl OctreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Leaves in depth-first child order.
    pub fn leaves(&self) -> Vec<&OctreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                out.push(n);
            } else {
                stack.extend(n.children.iter().rev());
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }
}

/// Child `i` of `[min, max]`, with bit 0/1/2 of `i` selecting the upper half
/// along x/y/z. Children share the exact midpoint coordinates.
pub(crate) fn child_box(min: Point3, max: Point3, i: usize) -> (Point3, Point3) {
    let mid = Vec3::new(
        0.5 * (min.x + max.x),
        0.5 * (min.y + max.y),
        0.5 * (min.z + max.z),
    );
    let pick = |bit: usize, lo: f64, m: f64, hi: f64| if i & bit != 0 { (m, hi) } else { (lo, m) };
    let (x0, x1) = pick(1, min.x, mid.x, max.x);
    let (y0, y1) = pick(2, min.y, mid.y, max.y);
    let (z0, z1) = pick(4, min.z, mid.z, max.z);
    (Vec3::new(x0, y0, z0), Vec3::new(x1, y1, z1))
}

/// Subdivides `root` until every leaf is empty, single-sheet or at
/// `max_depth`. Panics only if the root box is degenerate.
pub fn build_octree(field: &ScalarField, min: Point3, max: Point3, params: &OctreeParams) -> OctreeNode {
    build(field, min, max, 0, params)
}

fn build(field: &ScalarField, min: Point3, max: Point3, depth: u32, params: &OctreeParams) -> OctreeNode {
    let class = match box_cell(min, max) {
        Ok(cell) => sheet_test(field, &cell, params.samples_per_axis),
        Err(_) => SheetClass::MultiSheetOrAmbiguous,
    };
    let forced = depth < params.min_depth && class != SheetClass::NoSurface;
    let leaf_status = match class {
        SheetClass::NoSurface => Some(NodeStatus::Empty),
        SheetClass::SingleSheet if !forced => Some(NodeStatus::SingleSheet),
        _ if depth >= params.max_depth => Some(if class == SheetClass::SingleSheet {
            NodeStatus::SingleSheet
        } else {
            NodeStatus::DepthLimited
        }),
        _ => None,
    };
    if let Some(status) = leaf_status {
        return OctreeNode {
            min,
            max,
            depth,
            status,
            children: Vec::new(),
        };
    }
    use rayon::prelude::*;
    let children = (0..8)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = child_box(min, max, i);
            build(field, lo, hi, depth + 1, params)
        })
        .collect();
    OctreeNode {
        min,
        max,
        depth,
        status: NodeStatus::Subdivided,
        children,
    }
}
