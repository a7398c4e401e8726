//! Build stage (leaf operators and merges, bottom-up), solve stage (optional
//! upward body-load pass, then downward interface solves) and evaluation of
//! the solution at arbitrary points.
//!
//! Both sweeps run level by level; boxes on one level are independent and
//! are processed in parallel.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use faer::Mat;
use rayon::prelude::*;

use crate::error::{HpsError, Result};
use crate::geometry::{BoxTree, GaussGrid, Rect};
use crate::leaf::{
    assemble_local_operator, build_leaf_body_ops, build_leaf_dtn, build_leaf_dtn_with,
    BoundaryMaps, ChebGrid, LocalOperator,
};
use crate::linalg::{mat_bytes, matvec};
use crate::merge::{merge_siblings, upward_body_update, ParentOperators};
use crate::problem::{EllipticityPolicy, Field, Problem};
use crate::spectral::cheb_nodes;

/// Which operators survive the build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryPolicy {
    /// Keep leaf solution and body-load operators so repeated solves and
    /// evaluations are pure matrix applications.
    #[default]
    Many,
    /// Keep only what the interface solve needs; leaf interiors are rebuilt
    /// on demand.
    Minimal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Chebyshev points per leaf side.
    pub p: usize,
    pub with_body: bool,
    pub memory: MemoryPolicy,
    pub ellipticity: EllipticityPolicy,
}

impl BuildOptions {
    /// Defaults for `q` Gauss nodes per panel: `p = q + 1`, no body load.
    pub fn for_q(q: usize) -> Self {
        Self {
            p: q + 1,
            with_body: false,
            memory: MemoryPolicy::Many,
            ellipticity: EllipticityPolicy::Error,
        }
    }

    pub fn with_body(mut self, on: bool) -> Self {
        self.with_body = on;
        self
    }

    pub fn memory(mut self, memory: MemoryPolicy) -> Self {
        self.memory = memory;
        self
    }

    pub fn p(mut self, p: usize) -> Self {
        self.p = p;
        self
    }
}

/// Operators kept for a leaf after the build.
#[derive(Debug, Default)]
pub struct LeafSlot {
    /// Released once the parent is built (kept for a single-leaf tree).
    pub t: Option<Mat<f64>>,
    pub s_c_ge: Option<Mat<f64>>,
    pub f_c_ci: Option<Mat<f64>>,
    pub h_ge_ci: Option<Mat<f64>>,
}

impl LeafSlot {
    fn bytes(&self) -> usize {
        [&self.t, &self.s_c_ge, &self.f_c_ci, &self.h_ge_ci]
            .iter()
            .map(|m| m.as_ref().map_or(0, mat_bytes))
            .sum()
    }
}

#[derive(Debug)]
pub enum NodeSlot {
    Leaf(LeafSlot),
    Parent(ParentOperators),
}

impl NodeSlot {
    fn bytes(&self) -> usize {
        match self {
            NodeSlot::Leaf(l) => l.bytes(),
            NodeSlot::Parent(p) => p.bytes(),
        }
    }

    fn take_t(&mut self) -> Option<Mat<f64>> {
        match self {
            NodeSlot::Leaf(l) => l.t.take(),
            NodeSlot::Parent(p) => p.t_ge_ge.take(),
        }
    }

    fn t(&self) -> Option<&Mat<f64>> {
        match self {
            NodeSlot::Leaf(l) => l.t.as_ref(),
            NodeSlot::Parent(p) => p.t_ge_ge.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct BuildStats {
    /// Wall time per tree level, root level first.
    pub level_seconds: Vec<f64>,
    pub total_seconds: f64,
    /// Bytes held by the retained operators.
    pub memory_bytes: usize,
}

/// Everything the solve stage needs: the tree, the grid and one operator
/// slot per box.
#[derive(Debug)]
pub struct OperatorCache {
    problem: Problem,
    tree: BoxTree,
    grid: GaussGrid,
    opts: BuildOptions,
    slots: Vec<NodeSlot>,
    stats: BuildStats,
}

impl OperatorCache {
    pub fn tree(&self) -> &BoxTree {
        &self.tree
    }

    pub fn grid(&self) -> &GaussGrid {
        &self.grid
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn options(&self) -> &BuildOptions {
        &self.opts
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    pub fn p(&self) -> usize {
        self.opts.p
    }

    pub fn q(&self) -> usize {
        self.tree.q()
    }

    /// Slot of box `index` (1-based).
    pub fn slot(&self, index: usize) -> &NodeSlot {
        &self.slots[index - 1]
    }

    /// DtN matrix of the whole domain on the root's exterior vector.
    pub fn root_dtn(&self) -> &Mat<f64> {
        self.slots[0].t().expect("root DtN is always retained")
    }
}

fn cheb_points(rect: Rect, p: usize) -> Result<Vec<[f64; 2]>> {
    let xs = cheb_nodes(p, (rect.x0, rect.x1))?;
    let ys = cheb_nodes(p, (rect.y0, rect.y1))?;
    Ok(ys
        .points()
        .iter()
        .flat_map(|&y| xs.points().iter().map(move |&x| [x, y]))
        .collect())
}

/// Body load sampled at a leaf's interior Chebyshev nodes.
fn sample_interior(g: &Field, rect: Rect, p: usize) -> Result<Vec<f64>> {
    let pts = cheb_points(rect, p)?;
    Ok(pts
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let (ix, iy) = (k % p, k / p);
            ix > 0 && iy > 0 && ix < p - 1 && iy < p - 1
        })
        .map(|(_, &[x, y])| g.eval(x, y))
        .collect())
}

/// Leaves with bit-identical extents share boundary maps.
fn size_key(rect: Rect) -> (u64, u64) {
    (rect.width().to_bits(), rect.height().to_bits())
}

fn first_error<T>(results: Vec<(usize, Result<T>)>) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::with_capacity(results.len());
    let mut err: Option<(usize, HpsError)> = None;
    for (t, r) in results {
        match r {
            Ok(v) => out.push((t, v)),
            Err(e) => {
                if err.as_ref().is_none_or(|(te, _)| t < *te) {
                    err = Some((t, e));
                }
            }
        }
    }
    match err {
        Some((_, e)) => Err(e),
        None => Ok(out),
    }
}

/// Build stage: leaf operators at the bottom, merges up to the root.
pub fn build(
    problem: &Problem,
    tree: BoxTree,
    grid: GaussGrid,
    opts: BuildOptions,
) -> Result<OperatorCache> {
    let started = Instant::now();
    let p = opts.p;
    let q = tree.q();
    if p < 4 {
        return Err(HpsError::InvalidCount {
            what: "chebyshev nodes per leaf side",
            value: p,
            min: 4,
        });
    }
    for leaf in tree.leaves() {
        let pts = cheb_points(leaf.rect, p)?;
        problem.check_ellipticity(pts.iter().map(|&[x, y]| (x, y)), opts.ellipticity)?;
    }

    let mut maps: HashMap<(u64, u64), BoundaryMaps> = HashMap::new();
    for leaf in tree.leaves() {
        if let Entry::Vacant(e) = maps.entry(size_key(leaf.rect)) {
            e.insert(BoundaryMaps::new(&ChebGrid::new(leaf.rect, p)?, q)?);
        }
    }

    let mut slots: Vec<Option<NodeSlot>> = (0..tree.len()).map(|_| None).collect();
    let mut level_seconds = vec![0.0; tree.levels().len()];
    for (depth, level) in tree.levels().iter().enumerate().rev() {
        let t0 = Instant::now();
        let results: Vec<(usize, Result<NodeSlot>)> = level
            .par_iter()
            .map(|&t| {
                let node = tree.node(t);
                let slot = match node.children {
                    None => build_leaf_slot(problem, node, p, &maps[&size_key(node.rect)], &opts)
                        .map(NodeSlot::Leaf),
                    Some((a, b)) => {
                        let ta = slots[a - 1]
                            .as_ref()
                            .and_then(NodeSlot::t)
                            .expect("child DtN present");
                        let tb = slots[b - 1]
                            .as_ref()
                            .and_then(NodeSlot::t)
                            .expect("child DtN present");
                        let part = node.partition.as_ref().expect("parents carry a partition");
                        merge_siblings(ta, tb, part, opts.with_body, t).map(NodeSlot::Parent)
                    }
                };
                (t, slot)
            })
            .collect();
        for (t, slot) in first_error(results)? {
            if let Some((a, b)) = tree.node(t).children {
                for c in [a, b] {
                    slots[c - 1].as_mut().and_then(NodeSlot::take_t);
                }
            }
            slots[t - 1] = Some(slot);
        }
        level_seconds[depth] = t0.elapsed().as_secs_f64();
    }

    let slots: Vec<NodeSlot> = slots
        .into_iter()
        .map(|s| s.expect("every box built"))
        .collect();
    let memory_bytes = slots.iter().map(NodeSlot::bytes).sum();
    Ok(OperatorCache {
        problem: problem.clone(),
        tree,
        grid,
        opts,
        slots,
        stats: BuildStats {
            level_seconds,
            total_seconds: started.elapsed().as_secs_f64(),
            memory_bytes,
        },
    })
}

fn build_leaf_slot(
    problem: &Problem,
    node: &crate::geometry::BoxNode,
    p: usize,
    maps: &BoundaryMaps,
    opts: &BuildOptions,
) -> Result<LeafSlot> {
    let local = assemble_local_operator(problem, node, p)?;
    let ops = build_leaf_dtn_with(&local, maps);
    let body = opts.with_body.then(|| build_leaf_body_ops(&local, &ops));
    let many = opts.memory == MemoryPolicy::Many;
    let (f_c_ci, h_ge_ci) = match body {
        Some(b) => (many.then_some(b.f_c_ci), Some(b.h_ge_ci)),
        None => (None, None),
    };
    Ok(LeafSlot {
        t: Some(ops.t),
        s_c_ge: many.then_some(ops.s_c_ge),
        f_c_ci,
        h_ge_ci,
    })
}

/// Per-box particular-solution data from the upward pass.
#[derive(Debug, Clone, Default)]
pub struct BodyLoadState {
    /// Flux of each box's zero-boundary particular solution on its exterior.
    pub h_ge: Vec<Option<Vec<f64>>>,
    /// Particular solution on each parent's interface.
    pub w_gi: Vec<Option<Vec<f64>>>,
    /// Body load at each leaf's interior Chebyshev nodes.
    pub g_ci: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Values at all global Gauss nodes.
    pub u: Vec<f64>,
    /// Values on each leaf's Chebyshev grid, indexed by box number - 1
    /// (`None` for parents, and for leaves under the minimal memory policy).
    pub leaf_values: Vec<Option<Vec<f64>>>,
    pub body: Option<BodyLoadState>,
}

/// Solves with the cached operators for Dirichlet data `f` and body load `g`.
pub fn solve(cache: &OperatorCache, f: &Field, g: &Field) -> Result<Solution> {
    let tree = &cache.tree;
    let grid = &cache.grid;
    if !g.is_zero() && !cache.opts.with_body {
        return Err(HpsError::CacheMissingBodyOperators);
    }
    let body = if g.is_zero() {
        None
    } else {
        Some(upward_pass(cache, g)?)
    };

    let mut u = vec![0.0; grid.len()];
    for &k in &tree.root().i_ext {
        let [x, y] = grid.point(k);
        u[k] = f.eval(x, y);
    }
    for level in tree.levels() {
        let updates: Vec<(usize, Vec<f64>)> = level
            .par_iter()
            .filter_map(|&t| match &cache.slots[t - 1] {
                NodeSlot::Parent(ops) => {
                    let node = tree.node(t);
                    let ue: Vec<f64> = node.i_ext.iter().map(|&k| u[k]).collect();
                    let mut ui = matvec(ops.s_gi_ge.as_ref(), &ue);
                    if let Some(w) = body.as_ref().and_then(|b| b.w_gi[t - 1].as_ref()) {
                        ui.iter_mut().zip(w).for_each(|(a, b)| *a += b);
                    }
                    Some((t, ui))
                }
                NodeSlot::Leaf(_) => None,
            })
            .collect();
        for (t, ui) in updates {
            for (&k, v) in tree.node(t).i_int.iter().zip(ui) {
                u[k] = v;
            }
        }
    }

    let leaf_values: Vec<Option<Vec<f64>>> = tree
        .nodes()
        .par_iter()
        .map(|node| match &cache.slots[node.index - 1] {
            NodeSlot::Leaf(LeafSlot {
                s_c_ge: Some(s),
                f_c_ci,
                ..
            }) => {
                let ue: Vec<f64> = node.i_ext.iter().map(|&k| u[k]).collect();
                let mut uc = matvec(s.as_ref(), &ue);
                if let (Some(fm), Some(b)) = (f_c_ci, body.as_ref()) {
                    let g_ci = b.g_ci[node.index - 1].as_ref().expect("leaf load sampled");
                    let w = matvec(fm.as_ref(), g_ci);
                    uc.iter_mut().zip(w).for_each(|(a, b)| *a += b);
                }
                Some(uc)
            }
            _ => None,
        })
        .collect();

    Ok(Solution {
        u,
        leaf_values,
        body,
    })
}

/// `(g_ci, w_gi, h_ge)` of one box from the upward pass.
type BoxBodyData = (Option<Vec<f64>>, Option<Vec<f64>>, Vec<f64>);

/// Upward pass: leaf particular fluxes, then interface particular solutions
/// and parent fluxes.
fn upward_pass(cache: &OperatorCache, g: &Field) -> Result<BodyLoadState> {
    let tree = &cache.tree;
    let p = cache.opts.p;
    let n = tree.len();
    let mut state = BodyLoadState {
        h_ge: vec![None; n],
        w_gi: vec![None; n],
        g_ci: vec![None; n],
    };
    for level in tree.levels().iter().rev() {
        let results: Vec<(usize, Result<BoxBodyData>)> = level
            .par_iter()
            .map(|&t| {
                let node = tree.node(t);
                let r = match &cache.slots[t - 1] {
                    NodeSlot::Leaf(slot) => (|| {
                        let h = slot
                            .h_ge_ci
                            .as_ref()
                            .ok_or(HpsError::CacheMissingBodyOperators)?;
                        let g_ci = sample_interior(g, node.rect, p)?;
                        let h_ge = matvec(h.as_ref(), &g_ci);
                        Ok((Some(g_ci), None, h_ge))
                    })(),
                    NodeSlot::Parent(ops) => (|| {
                        let (a, b) = node.children.expect("parent has children");
                        let part = node.partition.as_ref().expect("parent partition");
                        let ha = state.h_ge[a - 1].as_ref().expect("child flux computed");
                        let hb = state.h_ge[b - 1].as_ref().expect("child flux computed");
                        let pick = |h: &[f64], idx: &[usize]| {
                            idx.iter().map(|&i| h[i]).collect::<Vec<_>>()
                        };
                        let (w, h_ge) = upward_body_update(
                            ops,
                            &pick(ha, &part.j3_alpha_local),
                            &pick(hb, &part.j3_beta_local),
                            &pick(ha, &part.j1_local),
                            &pick(hb, &part.j2_local),
                        )?;
                        Ok((None, Some(w), h_ge))
                    })(),
                };
                (t, r)
            })
            .collect();
        for (t, (g_ci, w, h)) in first_error(results)? {
            state.g_ci[t - 1] = g_ci;
            state.w_gi[t - 1] = w;
            state.h_ge[t - 1] = Some(h);
        }
    }
    Ok(state)
}

/// Values on a leaf's Chebyshev grid, rebuilt from the Gauss values when not
/// retained in the solution.
pub fn leaf_grid_values(
    cache: &OperatorCache,
    solution: &Solution,
    leaf: usize,
) -> Result<Vec<f64>> {
    if let Some(v) = &solution.leaf_values[leaf - 1] {
        return Ok(v.clone());
    }
    let node = cache.tree.get(leaf)?;
    if !node.is_leaf() {
        return Err(HpsError::InvalidParams(format!("box {leaf} is not a leaf")));
    }
    let local: LocalOperator = assemble_local_operator(&cache.problem, node, cache.opts.p)?;
    let ops = build_leaf_dtn(&local, cache.q())?;
    let ue: Vec<f64> = node.i_ext.iter().map(|&k| solution.u[k]).collect();
    let mut uc = matvec(ops.s_c_ge.as_ref(), &ue);
    if let Some(g_ci) = solution
        .body
        .as_ref()
        .and_then(|b| b.g_ci[leaf - 1].as_ref())
    {
        let w = local.factor_ii.solve_vec(g_ci);
        for (&k, v) in local.j_int.iter().zip(w) {
            uc[k] += v;
        }
    }
    Ok(uc)
}

/// Evaluates the solution at arbitrary points of the domain closure.
pub fn evaluate_at(
    cache: &OperatorCache,
    solution: &Solution,
    points: &[[f64; 2]],
) -> Result<Vec<f64>> {
    let mut by_leaf: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &[x, y]) in points.iter().enumerate() {
        by_leaf.entry(cache.tree.locate(x, y)?).or_default().push(i);
    }
    let groups: Vec<(usize, Vec<usize>)> = by_leaf.into_iter().collect();
    let evaluated: Vec<Result<Vec<(usize, f64)>>> = groups
        .par_iter()
        .map(|(leaf, idx)| {
            let uc = leaf_grid_values(cache, solution, *leaf)?;
            let grid = ChebGrid::new(cache.tree.node(*leaf).rect, cache.opts.p)?;
            Ok(idx
                .iter()
                .map(|&i| {
                    let [x, y] = points[i];
                    (i, grid.interpolate(&uc, x, y))
                })
                .collect())
        })
        .collect();
    let mut out = vec![0.0; points.len()];
    for group in evaluated {
        for (i, v) in group? {
            out[i] = v;
        }
    }
    Ok(out)
}

/// Bytes the retained operators will occupy, computed from shapes alone.
pub fn estimate_memory(tree: &BoxTree, opts: &BuildOptions) -> usize {
    let q = tree.q();
    let p = opts.p;
    let f64s = std::mem::size_of::<f64>();
    let many = opts.memory == MemoryPolicy::Many;
    let interior = (p.saturating_sub(2)).pow(2);
    let mut total = 0usize;
    for node in tree.nodes() {
        let ne = node.i_ext.len();
        let root_t = if node.index == 1 { ne * ne } else { 0 };
        total += f64s
            * match &node.partition {
                None => {
                    let mut n = root_t;
                    if many {
                        n += p * p * 4 * q;
                    }
                    if opts.with_body {
                        n += 4 * q * interior;
                        if many {
                            n += p * p * interior;
                        }
                    }
                    n
                }
                Some(part) => {
                    let n3 = part.j3.len();
                    let mut n = n3 * ne + root_t;
                    if opts.with_body {
                        n += n3 * n3 + ne * n3;
                    }
                    n
                }
            };
    }
    total
}
