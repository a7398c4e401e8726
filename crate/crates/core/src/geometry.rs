//! Tessellation of a rectangle into uniform leaf boxes, the binary merge tree
//! over them, and the global Gauss node index space.
//!
//! Conventions used throughout the crate:
//!
//! * Boxes are numbered breadth-first starting from the root, which is box 1,
//!   so a parent always has a smaller number than its children. Box numbers
//!   are 1-based everywhere in the public API.
//! * Every leaf edge is a *panel* carrying `q` Gauss–Legendre nodes. Nodes on
//!   an edge shared by two leaves exist exactly once in the global grid.
//! * A leaf's exterior vector lists its panels South, East, North, West, each
//!   in ascending coordinate order.
//! * A parent's exterior vector is `[J1; J2]`: the exterior nodes of the first
//!   child (`alpha`) not on the shared interface, followed by those of the
//!   second child (`beta`). Its interior vector is the shared interface `J3`.
//! * Fluxes use a global frame: `d/dx1` on vertical edges, `d/dx2` on
//!   horizontal edges.

use std::collections::HashMap;

use crate::error::{HpsError, Result};
use crate::spectral::gauss_nodes;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !x0.is_finite() || !x1.is_finite() || x0 >= x1 {
            return Err(HpsError::DegenerateInterval { a: x0, b: x1 });
        }
        if !y0.is_finite() || !y1.is_finite() || y0 >= y1 {
            return Err(HpsError::DegenerateInterval { a: y0, b: y1 });
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn unit() -> Self {
        Self {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Which axis separates the two children of a parent box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SplitAxis {
    /// Children are west/east of each other and share a vertical edge.
    X,
    /// Children are south/north of each other and share a horizontal edge.
    Y,
}

/// Orientation of the edge a Gauss node sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOrientation {
    Horizontal,
    Vertical,
}

/// Derivative stored as the flux at a Gauss node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxDirection {
    /// `d/dx1`, used on vertical edges.
    DX1,
    /// `d/dx2`, used on horizontal edges.
    DX2,
}

/// One leaf edge and the contiguous block of global node indices on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub orientation: EdgeOrientation,
    /// Fixed coordinate: `y` for horizontal panels, `x` for vertical ones.
    pub level: f64,
    /// Range of the varying coordinate.
    pub span: (f64, f64),
    pub start: usize,
    pub len: usize,
}

impl Panel {
    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Global Gauss tabulation nodes on all leaf edges.
#[derive(Debug, Clone)]
pub struct GaussGrid {
    points: Vec<[f64; 2]>,
    orientation: Vec<EdgeOrientation>,
    panels: Vec<Panel>,
}

impl GaussGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        self.points[k]
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn orientation(&self, k: usize) -> EdgeOrientation {
        self.orientation[k]
    }
}

/// Partition of two siblings' exterior nodes (see module docs).
///
/// Local positions index into the respective child's exterior vector;
/// global vectors index into the [`GaussGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SiblingPartition {
    pub j1_local: Vec<usize>,
    pub j2_local: Vec<usize>,
    pub j3_alpha_local: Vec<usize>,
    pub j3_beta_local: Vec<usize>,
    pub j1: Vec<usize>,
    pub j2: Vec<usize>,
    pub j3: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BoxNode {
    /// 1-based box number; the root is 1.
    pub index: usize,
    pub rect: Rect,
    pub level: usize,
    pub parent: Option<usize>,
    /// `(alpha, beta)`; `alpha` is the west or south child.
    pub children: Option<(usize, usize)>,
    pub split_axis: Option<SplitAxis>,
    /// Leaf-cell ranges `[ix0, ix1) x [iy0, iy1)` covered by this box.
    pub cells: ([usize; 2], [usize; 2]),
    pub i_ext: Vec<usize>,
    pub i_int: Vec<usize>,
    pub partition: Option<SiblingPartition>,
}

impl BoxNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct BoxTree {
    domain: Rect,
    leaves_x: usize,
    leaves_y: usize,
    q: usize,
    nodes: Vec<BoxNode>,
    levels: Vec<Vec<usize>>,
    /// Box number of the leaf covering cell `(ix, iy)`, row-major in `iy`.
    leaf_at: Vec<usize>,
}

impl BoxTree {
    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn leaves_x(&self) -> usize {
        self.leaves_x
    }

    pub fn leaves_y(&self) -> usize {
        self.leaves_y
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &BoxNode {
        &self.nodes[0]
    }

    /// Box by 1-based number. Panics on an invalid number.
    pub fn node(&self, index: usize) -> &BoxNode {
        &self.nodes[index - 1]
    }

    pub fn get(&self, index: usize) -> Result<&BoxNode> {
        if index == 0 || index > self.nodes.len() {
            return Err(HpsError::OutOfRange {
                index,
                min: 1,
                max: self.nodes.len(),
            });
        }
        Ok(&self.nodes[index - 1])
    }

    pub fn nodes(&self) -> &[BoxNode] {
        &self.nodes
    }

    /// Box numbers grouped by depth, root level first.
    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn leaves(&self) -> impl Iterator<Item = &BoxNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves_x * self.leaves_y
    }

    /// `log2` of the larger leaf count; equals `L` for a `2^L x 2^L` grid.
    pub fn depth_l(&self) -> usize {
        self.leaves_x.max(self.leaves_y).trailing_zeros() as usize
    }

    /// Leaf box containing `(x, y)`. Points on a shared edge resolve to the
    /// leaf with the larger cell index.
    pub fn locate(&self, x: f64, y: f64) -> Result<usize> {
        let d = self.domain;
        if !d.contains(x, y) || !x.is_finite() || !y.is_finite() {
            return Err(HpsError::PointOutsideDomain { x, y });
        }
        let cell = |t: f64, t0: f64, len: f64, n: usize| {
            let c = ((t - t0) / len * n as f64).floor();
            (c.max(0.0) as usize).min(n - 1)
        };
        let ix = cell(x, d.x0, d.width(), self.leaves_x);
        let iy = cell(y, d.y0, d.height(), self.leaves_y);
        Ok(self.leaf_at[iy * self.leaves_x + ix])
    }

    pub fn leaf_at_cell(&self, ix: usize, iy: usize) -> usize {
        self.leaf_at[iy * self.leaves_x + ix]
    }
}

/// Bottom-up sequence of merge axes: pair horizontally first, then
/// alternate, continuing along whichever axis still has leaves to merge.
fn merge_sequence(leaves_x: usize, leaves_y: usize) -> Vec<SplitAxis> {
    let (mut w, mut h) = (1usize, 1usize);
    let mut seq = Vec::new();
    while w < leaves_x || h < leaves_y {
        if w < leaves_x && (w <= h || h == leaves_y) {
            w *= 2;
            seq.push(SplitAxis::X);
        } else {
            h *= 2;
            seq.push(SplitAxis::Y);
        }
    }
    seq
}

struct PanelIndex {
    /// horizontal panel on line `j`, cell `i`: `h[j * nx + i]`
    h: Vec<usize>,
    /// vertical panel on line `i`, cell `j`: `v[i * ny + j]`
    v: Vec<usize>,
}

/// Builds the merge tree and the global Gauss grid for a uniform
/// `leaves_x x leaves_y` tessellation of `domain` with `q` nodes per panel.
pub fn build_tree(
    domain: Rect,
    leaves_x: usize,
    leaves_y: usize,
    q: usize,
) -> Result<(BoxTree, GaussGrid)> {
    if !leaves_x.is_power_of_two() {
        return Err(HpsError::NonPowerOfTwo {
            axis: 'x',
            value: leaves_x,
        });
    }
    if !leaves_y.is_power_of_two() {
        return Err(HpsError::NonPowerOfTwo {
            axis: 'y',
            value: leaves_y,
        });
    }
    if q < 2 {
        return Err(HpsError::InvalidCount {
            what: "gauss nodes per panel",
            value: q,
            min: 2,
        });
    }
    let domain = Rect::new(domain.x0, domain.x1, domain.y0, domain.y1)?;
    let (nx, ny) = (leaves_x, leaves_y);
    let hx = domain.width() / nx as f64;
    let hy = domain.height() / ny as f64;
    let xline = |i: usize| {
        if i == nx {
            domain.x1
        } else {
            domain.x0 + i as f64 * hx
        }
    };
    let yline = |j: usize| {
        if j == ny {
            domain.y1
        } else {
            domain.y0 + j as f64 * hy
        }
    };

    // global grid: all horizontal panels, then all vertical panels
    let mut grid = GaussGrid {
        points: Vec::new(),
        orientation: Vec::new(),
        panels: Vec::new(),
    };
    let mut pidx = PanelIndex {
        h: vec![0; (ny + 1) * nx],
        v: vec![0; (nx + 1) * ny],
    };
    for j in 0..=ny {
        for i in 0..nx {
            let span = (xline(i), xline(i + 1));
            let g = gauss_nodes(q, span)?;
            pidx.h[j * nx + i] = grid.panels.len();
            grid.panels.push(Panel {
                orientation: EdgeOrientation::Horizontal,
                level: yline(j),
                span,
                start: grid.points.len(),
                len: q,
            });
            for &x in g.points() {
                grid.points.push([x, yline(j)]);
                grid.orientation.push(EdgeOrientation::Horizontal);
            }
        }
    }
    for i in 0..=nx {
        for j in 0..ny {
            let span = (yline(j), yline(j + 1));
            let g = gauss_nodes(q, span)?;
            pidx.v[i * ny + j] = grid.panels.len();
            grid.panels.push(Panel {
                orientation: EdgeOrientation::Vertical,
                level: xline(i),
                span,
                start: grid.points.len(),
                len: q,
            });
            for &y in g.points() {
                grid.points.push([xline(i), y]);
                grid.orientation.push(EdgeOrientation::Vertical);
            }
        }
    }

    // top-down, breadth-first box creation
    let seq = merge_sequence(nx, ny);
    let mut nodes: Vec<BoxNode> = vec![BoxNode {
        index: 1,
        rect: domain,
        level: 0,
        parent: None,
        children: None,
        split_axis: None,
        cells: ([0, nx], [0, ny]),
        i_ext: Vec::new(),
        i_int: Vec::new(),
        partition: None,
    }];
    let mut levels = vec![vec![1usize]];
    for (depth, &axis) in seq.iter().rev().enumerate() {
        let mut next = Vec::new();
        for &parent in &levels[depth] {
            let ([ix0, ix1], [iy0, iy1]) = nodes[parent - 1].cells;
            let halves = match axis {
                SplitAxis::X => {
                    let m = (ix0 + ix1) / 2;
                    [([ix0, m], [iy0, iy1]), ([m, ix1], [iy0, iy1])]
                }
                SplitAxis::Y => {
                    let m = (iy0 + iy1) / 2;
                    [([ix0, ix1], [iy0, m]), ([ix0, ix1], [m, iy1])]
                }
            };
            let mut kids = [0usize; 2];
            for (k, cells) in halves.into_iter().enumerate() {
                let index = nodes.len() + 1;
                let rect = Rect {
                    x0: xline(cells.0[0]),
                    x1: xline(cells.0[1]),
                    y0: yline(cells.1[0]),
                    y1: yline(cells.1[1]),
                };
                nodes.push(BoxNode {
                    index,
                    rect,
                    level: depth + 1,
                    parent: Some(parent),
                    children: None,
                    split_axis: None,
                    cells,
                    i_ext: Vec::new(),
                    i_int: Vec::new(),
                    partition: None,
                });
                kids[k] = index;
                next.push(index);
            }
            let p = &mut nodes[parent - 1];
            p.children = Some((kids[0], kids[1]));
            p.split_axis = Some(axis);
        }
        levels.push(next);
    }

    // leaf exterior vectors: S, E, N, W
    let mut leaf_at = vec![0usize; nx * ny];
    for node in nodes.iter_mut().filter(|n| n.children.is_none()) {
        let ([ix, _], [iy, _]) = node.cells;
        leaf_at[iy * nx + ix] = node.index;
        let sides = [
            pidx.h[iy * nx + ix],
            pidx.v[(ix + 1) * ny + iy],
            pidx.h[(iy + 1) * nx + ix],
            pidx.v[ix * ny + iy],
        ];
        node.i_ext = sides
            .iter()
            .flat_map(|&p| grid.panels[p].indices())
            .collect();
    }

    // bottom-up partitions and parent index vectors
    for depth in (0..levels.len()).rev() {
        for &t in &levels[depth] {
            let Some((a, b)) = nodes[t - 1].children else {
                continue;
            };
            let part = partition_of(&nodes[a - 1].i_ext, &nodes[b - 1].i_ext);
            let node = &mut nodes[t - 1];
            node.i_ext = part.j1.iter().chain(&part.j2).copied().collect();
            node.i_int = part.j3.clone();
            node.partition = Some(part);
        }
    }

    let tree = BoxTree {
        domain,
        leaves_x: nx,
        leaves_y: ny,
        q,
        nodes,
        levels,
        leaf_at,
    };
    Ok((tree, grid))
}

fn partition_of(ext_alpha: &[usize], ext_beta: &[usize]) -> SiblingPartition {
    let beta_pos: HashMap<usize, usize> =
        ext_beta.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut part = SiblingPartition {
        j1_local: Vec::new(),
        j2_local: Vec::new(),
        j3_alpha_local: Vec::new(),
        j3_beta_local: Vec::new(),
        j1: Vec::new(),
        j2: Vec::new(),
        j3: Vec::new(),
    };
    for (i, &g) in ext_alpha.iter().enumerate() {
        match beta_pos.get(&g) {
            Some(&jb) => {
                part.j3_alpha_local.push(i);
                part.j3_beta_local.push(jb);
                part.j3.push(g);
            }
            None => {
                part.j1_local.push(i);
                part.j1.push(g);
            }
        }
    }
    let shared: std::collections::HashSet<usize> = part.j3.iter().copied().collect();
    for (i, &g) in ext_beta.iter().enumerate() {
        if !shared.contains(&g) {
            part.j2_local.push(i);
            part.j2.push(g);
        }
    }
    part
}

/// Sibling partition of a parent box.
pub fn sibling_partition(tree: &BoxTree, parent: usize) -> Result<&SiblingPartition> {
    let node = tree.get(parent)?;
    node.partition
        .as_ref()
        .ok_or(HpsError::LeafNodeArgument { node: parent })
}

/// Derivative stored as the flux at global node `k` (0-based).
pub fn flux_orientation(grid: &GaussGrid, k: usize) -> Result<FluxDirection> {
    if k >= grid.len() {
        return Err(HpsError::OutOfRange {
            index: k,
            min: 0,
            max: grid.len().saturating_sub(1),
        });
    }
    Ok(match grid.orientation(k) {
        EdgeOrientation::Horizontal => FluxDirection::DX2,
        EdgeOrientation::Vertical => FluxDirection::DX1,
    })
}

/// Closed-form node count for a uniform `2^L x 2^L` grid.
pub fn uniform_node_count(l: usize, q: usize) -> usize {
    (1usize << (2 * l + 1)) * q + (1usize << (l + 1)) * q
}
