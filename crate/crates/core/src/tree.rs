//! Uniform `2^d` tree over the bounding hypercube of a point cloud.
//!
//! Every level `k` is a full `2^k x ... x 2^k` grid addressed by Morton code,
//! so empty cells exist implicitly and neighbour lookup is plain index
//! arithmetic. Points are permuted into leaf Morton order, which makes the
//! index set of every cell at every level a contiguous range of that
//! permutation.

use std::fmt::Write as _;

use crate::cloud::PointCloud;
use crate::error::{NncaError, Result};

/// Relative margin applied to the root cube so boundary points bucket cleanly.
const ROOT_MARGIN: f64 = 1e-12;
/// Relative slack in the admissibility comparison. With `eta = sqrt(2)` in 2D
/// the cells separated by one cell sit exactly on the admissibility boundary.
const ADMISSIBILITY_SLACK: f64 = 1e-10;
/// Upper bound on the number of grid cells stored for a single level.
const MAX_CELLS_PER_LEVEL: usize = 1 << 22;

/// Axis-aligned hypercube given by its centre and half side length.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeBox {
    pub center: Vec<f64>,
    pub half_width: f64,
}

impl CubeBox {
    /// Largest distance between two points of the cube.
    pub fn diam(&self) -> f64 {
        2.0 * self.half_width * (self.center.len() as f64).sqrt()
    }

    /// Smallest distance between a point of `self` and a point of `other`.
    pub fn dist(&self, other: &CubeBox) -> f64 {
        self.center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| {
                let gap = (a - b).abs() - self.half_width - other.half_width;
                if gap > 0.0 {
                    gap * gap
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// `max{diam(X), diam(Y)} <= eta * dist(X, Y)`.
pub fn admissible(x: &CubeBox, y: &CubeBox, eta: f64) -> bool {
    let dist = x.dist(y);
    if dist <= 0.0 {
        return false;
    }
    x.diam().max(y.diam()) <= eta * dist * (1.0 + ADMISSIBILITY_SLACK)
}

/// Identifies a cell by level and Morton code within that level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub level: usize,
    pub code: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct CellRanges {
    t_start: u32,
    t_end: u32,
    s_start: u32,
    s_end: u32,
}

#[derive(Debug, Clone, Default)]
struct Level {
    cells: Vec<CellRanges>,
    /// Codes of cells holding at least one target or source, ascending.
    occupied: Vec<u32>,
    /// Morton code -> position in `occupied`, or `u32::MAX`.
    slot: Vec<u32>,
    neighbors: Vec<Vec<u32>>,
    interaction: Vec<Vec<u32>>,
}

/// The hierarchical tree with per-cell index sets and neighbour/interaction
/// lists.
#[derive(Debug, Clone)]
pub struct HierTree {
    dim: usize,
    depth: usize,
    eta: f64,
    nu: usize,
    root: CubeBox,
    target_order: Vec<usize>,
    source_order: Vec<usize>,
    levels: Vec<Level>,
    overfull: bool,
}

impl HierTree {
    /// Subdivides until every leaf holds at most `nu` targets and at most `nu`
    /// sources, then computes neighbour and interaction lists with
    /// admissibility parameter `eta`.
    pub fn build(cloud: &PointCloud, nu: usize, eta: f64) -> Result<Self> {
        if cloud.num_targets() == 0 || cloud.num_sources() == 0 {
            return Err(NncaError::EmptyPointSet);
        }
        if nu == 0 {
            return Err(NncaError::InvalidLeafCapacity(nu));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(NncaError::InvalidEta(eta));
        }
        let dim = cloud.dim();
        let root = root_cube(cloud);
        let lo: Vec<f64> = root.center.iter().map(|c| c - root.half_width).collect();
        let width = 2.0 * root.half_width;
        let scale = |coords: &[f64]| -> Vec<f64> {
            coords
                .chunks_exact(dim)
                .flat_map(|p| p.iter().zip(&lo).map(|(x, l)| ((x - l) / width).clamp(0.0, 1.0)))
                .collect()
        };
        let t_scaled = scale(cloud.target_coords());
        let s_scaled = if cloud.is_shared() {
            t_scaled.clone()
        } else {
            scale(cloud.source_coords())
        };

        let max_level = max_level(dim);
        let mut depth = 0;
        let mut overfull = false;
        loop {
            let fits = max_occupancy(&t_scaled, dim, depth) <= nu
                && max_occupancy(&s_scaled, dim, depth) <= nu;
            if fits {
                break;
            }
            if depth == max_level {
                overfull = true;
                log::warn!(
                    "tree depth capped at level {depth}; some leaves exceed capacity {nu}"
                );
                break;
            }
            depth += 1;
        }

        let (target_order, t_codes) = sort_by_code(&t_scaled, dim, depth);
        let (source_order, s_codes) = if cloud.is_shared() {
            (target_order.clone(), t_codes.clone())
        } else {
            sort_by_code(&s_scaled, dim, depth)
        };

        let mut levels = Vec::with_capacity(depth + 1);
        for level in 0..=depth {
            let shift = dim * (depth - level);
            let n_cells = 1usize << (dim * level);
            let mut cells = vec![
                CellRanges {
                    t_start: u32::MAX,
                    ..Default::default()
                };
                n_cells
            ];
            for (pos, code) in t_codes.iter().enumerate() {
                let c = &mut cells[(code >> shift) as usize];
                if c.t_start == u32::MAX {
                    c.t_start = pos as u32;
                }
                c.t_end = pos as u32 + 1;
            }
            let mut s_seen = vec![false; n_cells];
            for (pos, code) in s_codes.iter().enumerate() {
                let idx = (code >> shift) as usize;
                let c = &mut cells[idx];
                if !s_seen[idx] {
                    s_seen[idx] = true;
                    c.s_start = pos as u32;
                }
                c.s_end = pos as u32 + 1;
            }
            for c in &mut cells {
                if c.t_start == u32::MAX {
                    c.t_start = 0;
                    c.t_end = 0;
                }
            }
            let occupied: Vec<u32> = cells
                .iter()
                .enumerate()
                .filter(|(_, c)| c.t_end > c.t_start || c.s_end > c.s_start)
                .map(|(code, _)| code as u32)
                .collect();
            let mut slot = vec![u32::MAX; n_cells];
            for (i, &code) in occupied.iter().enumerate() {
                slot[code as usize] = i as u32;
            }
            levels.push(Level {
                cells,
                occupied,
                slot,
                neighbors: Vec::new(),
                interaction: Vec::new(),
            });
        }

        let mut tree = Self {
            dim,
            depth,
            eta,
            nu,
            root,
            target_order,
            source_order,
            levels,
            overfull,
        };
        tree.compute_lists();
        Ok(tree)
    }

    /// Fills `N(B)` and `IL(B)` for every occupied cell: the children of the
    /// parent's neighbours split by the admissibility predicate. Both lists
    /// may name empty cells.
    fn compute_lists(&mut self) {
        self.levels[0].neighbors = vec![vec![0]];
        self.levels[0].interaction = vec![Vec::new()];
        let n_children = 1usize << self.dim;
        for level in 1..=self.depth {
            let parent_level = &self.levels[level - 1];
            let mut neighbors = Vec::with_capacity(self.levels[level].occupied.len());
            let mut interaction = Vec::with_capacity(self.levels[level].occupied.len());
            for &code in &self.levels[level].occupied {
                let me = self.cube(CellId {
                    level,
                    code: code as usize,
                });
                let parent = (code as usize) >> self.dim;
                let pslot = parent_level.slot[parent] as usize;
                let mut near = Vec::new();
                let mut far = Vec::new();
                for &pn in &parent_level.neighbors[pslot] {
                    for c in 0..n_children {
                        let cand = ((pn as usize) << self.dim) | c;
                        let other = self.cube(CellId { level, code: cand });
                        if admissible(&me, &other, self.eta) {
                            far.push(cand as u32);
                        } else {
                            near.push(cand as u32);
                        }
                    }
                }
                near.sort_unstable();
                far.sort_unstable();
                neighbors.push(near);
                interaction.push(far);
            }
            self.levels[level].neighbors = neighbors;
            self.levels[level].interaction = interaction;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Leaf level `kappa`; the root is level 0.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn leaf_capacity(&self) -> usize {
        self.nu
    }

    pub fn root_cube(&self) -> &CubeBox {
        &self.root
    }

    /// True when subdivision stopped at the depth cap with leaves above
    /// capacity (heavily duplicated points).
    pub fn has_overfull_leaves(&self) -> bool {
        self.overfull
    }

    /// Number of grid cells at `level`, empty ones included.
    pub fn cells_at_level(&self, level: usize) -> usize {
        self.levels[level].cells.len()
    }

    /// Codes of the cells at `level` that hold a target or a source.
    pub fn occupied(&self, level: usize) -> &[u32] {
        &self.levels[level].occupied
    }

    /// Position of an occupied cell in [`HierTree::occupied`].
    pub fn slot(&self, id: CellId) -> Option<usize> {
        let s = self.levels[id.level].slot[id.code];
        (s != u32::MAX).then_some(s as usize)
    }

    pub fn cell(&self, id: CellId) -> Cell<'_> {
        assert!(id.level <= self.depth && id.code < self.cells_at_level(id.level));
        Cell { tree: self, id }
    }

    pub fn root(&self) -> Cell<'_> {
        self.cell(CellId { level: 0, code: 0 })
    }

    /// Target indices of a cell.
    pub fn targets(&self, id: CellId) -> &[usize] {
        let c = &self.levels[id.level].cells[id.code];
        &self.target_order[c.t_start as usize..c.t_end as usize]
    }

    /// Source indices of a cell.
    pub fn sources(&self, id: CellId) -> &[usize] {
        let c = &self.levels[id.level].cells[id.code];
        &self.source_order[c.s_start as usize..c.s_end as usize]
    }

    /// Positions of a cell's targets in [`HierTree::target_order`].
    pub fn target_range(&self, id: CellId) -> std::ops::Range<usize> {
        let c = &self.levels[id.level].cells[id.code];
        c.t_start as usize..c.t_end as usize
    }

    /// Positions of a cell's sources in [`HierTree::source_order`].
    pub fn source_range(&self, id: CellId) -> std::ops::Range<usize> {
        let c = &self.levels[id.level].cells[id.code];
        c.s_start as usize..c.s_end as usize
    }

    /// Target indices sorted by leaf; every cell owns a contiguous range.
    pub fn target_order(&self) -> &[usize] {
        &self.target_order
    }

    /// Source indices sorted by leaf; every cell owns a contiguous range.
    pub fn source_order(&self) -> &[usize] {
        &self.source_order
    }

    /// Neighbour codes of an occupied cell (empty slice for empty cells).
    pub fn neighbors(&self, id: CellId) -> &[u32] {
        self.slot(id)
            .map(|s| self.levels[id.level].neighbors[s].as_slice())
            .unwrap_or(&[])
    }

    /// Interaction-list codes of an occupied cell (empty slice for empty cells).
    pub fn interaction_list(&self, id: CellId) -> &[u32] {
        self.slot(id)
            .map(|s| self.levels[id.level].interaction[s].as_slice())
            .unwrap_or(&[])
    }

    pub fn multi_index(&self, id: CellId) -> Vec<usize> {
        decode(id.code, self.dim, id.level)
    }

    pub fn cube(&self, id: CellId) -> CubeBox {
        let half = self.root.half_width / (1u64 << id.level) as f64;
        let idx = self.multi_index(id);
        let center = self
            .root
            .center
            .iter()
            .zip(idx)
            .map(|(c, m)| c - self.root.half_width + (2 * m + 1) as f64 * half)
            .collect();
        CubeBox {
            center,
            half_width: half,
        }
    }

    /// Children codes (at `level + 1`) of a cell.
    pub fn children(&self, id: CellId) -> impl Iterator<Item = CellId> + '_ {
        let n = if id.level < self.depth { 1usize << self.dim } else { 0 };
        (0..n).map(move |c| CellId {
            level: id.level + 1,
            code: (id.code << self.dim) | c,
        })
    }

    /// Plain-text summary: depth, cells per level and leaf occupancy histogram.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dim: {}", self.dim);
        let _ = writeln!(out, "depth: {}", self.depth);
        let _ = writeln!(out, "leaf capacity: {}", self.nu);
        let _ = writeln!(out, "eta: {}", self.eta);
        let _ = writeln!(out, "targets: {}", self.target_order.len());
        let _ = writeln!(out, "sources: {}", self.source_order.len());
        if self.overfull {
            let _ = writeln!(out, "warning: leaves above capacity (depth cap reached)");
        }
        let _ = writeln!(out, "level,cells,occupied");
        for (k, level) in self.levels.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{}", level.cells.len(), level.occupied.len());
        }
        let leaves = &self.levels[self.depth];
        let max_occ = leaves
            .cells
            .iter()
            .map(|c| (c.t_end - c.t_start).max(c.s_end - c.s_start))
            .max()
            .unwrap_or(0) as usize;
        let bins = 8usize;
        let bin_width = max_occ.div_ceil(bins).max(1);
        let mut hist = vec![0usize; bins + 1];
        for c in &leaves.cells {
            let occ = (c.t_end - c.t_start).max(c.s_end - c.s_start) as usize;
            let b = if occ == 0 { 0 } else { 1 + (occ - 1) / bin_width };
            hist[b.min(bins)] += 1;
        }
        let _ = writeln!(out, "leaf occupancy histogram");
        let _ = writeln!(out, "points,leaves");
        let _ = writeln!(out, "0,{}", hist[0]);
        for (b, count) in hist.iter().enumerate().skip(1) {
            let lo = (b - 1) * bin_width + 1;
            let hi = b * bin_width;
            if lo > max_occ {
                break;
            }
            let _ = writeln!(out, "{lo}-{},{count}", hi.min(max_occ));
        }
        out
    }
}

/// Read-only view of one cell.
#[derive(Clone, Copy)]
pub struct Cell<'a> {
    tree: &'a HierTree,
    id: CellId,
}

impl<'a> Cell<'a> {
    pub fn id(&self) -> CellId {
        self.id
    }
    pub fn level(&self) -> usize {
        self.id.level
    }
    pub fn multi_index(&self) -> Vec<usize> {
        self.tree.multi_index(self.id)
    }
    pub fn cube(&self) -> CubeBox {
        self.tree.cube(self.id)
    }
    pub fn center(&self) -> Vec<f64> {
        self.cube().center
    }
    pub fn half_width(&self) -> f64 {
        self.tree.root.half_width / (1u64 << self.id.level) as f64
    }
    pub fn is_leaf(&self) -> bool {
        self.id.level == self.tree.depth
    }
    pub fn is_empty(&self) -> bool {
        self.targets().is_empty() && self.sources().is_empty()
    }
    pub fn parent(&self) -> Option<Cell<'a>> {
        (self.id.level > 0).then(|| {
            self.tree.cell(CellId {
                level: self.id.level - 1,
                code: self.id.code >> self.tree.dim,
            })
        })
    }
    pub fn children(&self) -> Vec<Cell<'a>> {
        self.tree.children(self.id).map(|c| self.tree.cell(c)).collect()
    }
    pub fn targets(&self) -> &'a [usize] {
        self.tree.targets(self.id)
    }
    pub fn sources(&self) -> &'a [usize] {
        self.tree.sources(self.id)
    }
    pub fn neighbors(&self) -> Vec<Cell<'a>> {
        self.same_level(self.tree.neighbors(self.id))
    }
    pub fn interaction_list(&self) -> Vec<Cell<'a>> {
        self.same_level(self.tree.interaction_list(self.id))
    }
    fn same_level(&self, codes: &[u32]) -> Vec<Cell<'a>> {
        codes
            .iter()
            .map(|&code| {
                self.tree.cell(CellId {
                    level: self.id.level,
                    code: code as usize,
                })
            })
            .collect()
    }
}

impl std::fmt::Debug for Cell<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cell")
            .field("level", &self.id.level)
            .field("index", &self.multi_index())
            .field("targets", &self.targets().len())
            .field("sources", &self.sources().len())
            .finish()
    }
}

fn root_cube(cloud: &PointCloud) -> CubeBox {
    let bounds = cloud.bounds();
    let center: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let half = bounds
        .iter()
        .map(|(lo, hi)| 0.5 * (hi - lo))
        .fold(0.0, f64::max);
    let scale = center.iter().fold(half, |m, c| m.max(c.abs()));
    let half_width = if half > 0.0 {
        half * (1.0 + ROOT_MARGIN) + scale * f64::EPSILON
    } else {
        // A single distinct point: any positive cube will do.
        1.0
    };
    CubeBox { center, half_width }
}

fn max_level(dim: usize) -> usize {
    let by_storage = (MAX_CELLS_PER_LEVEL.trailing_zeros() as usize) / dim;
    let by_code = 63 / dim;
    // Level widths below this are not representable relative to the root.
    let by_precision = f64::MANTISSA_DIGITS as usize - 1;
    by_storage.min(by_code).min(by_precision)
}

/// Grid index of a scaled coordinate `s` in `[0, 1]` at `level`. Points on an
/// internal boundary go to the lower cell; `s * 2^level` is exact, so the
/// assignment is consistent across levels.
#[inline]
fn grid_index(s: f64, level: usize) -> u64 {
    let cells = 1u64 << level;
    let y = s * cells as f64;
    let idx = y.ceil() as u64;
    idx.saturating_sub(1).min(cells - 1)
}

fn code_of(scaled: &[f64], level: usize) -> u64 {
    let idx: Vec<u64> = scaled.iter().map(|&s| grid_index(s, level)).collect();
    encode(&idx, level)
}

fn encode(idx: &[u64], level: usize) -> u64 {
    let mut code = 0u64;
    for b in (0..level).rev() {
        for &i in idx {
            code = (code << 1) | ((i >> b) & 1);
        }
    }
    code
}

fn decode(code: usize, dim: usize, level: usize) -> Vec<usize> {
    let mut idx = vec![0usize; dim];
    for b in 0..level {
        for (a, slot) in idx.iter_mut().enumerate() {
            let bit = (code >> (b * dim + (dim - 1 - a))) & 1;
            *slot |= bit << b;
        }
    }
    idx
}

fn max_occupancy(scaled: &[f64], dim: usize, level: usize) -> usize {
    let mut codes: Vec<u64> = scaled
        .chunks_exact(dim)
        .map(|p| code_of(p, level))
        .collect();
    codes.sort_unstable();
    let mut best = 0;
    let mut run = 0;
    for (i, c) in codes.iter().enumerate() {
        run = if i > 0 && codes[i - 1] == *c { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}

fn sort_by_code(scaled: &[f64], dim: usize, depth: usize) -> (Vec<usize>, Vec<u64>) {
    let codes: Vec<u64> = scaled
        .chunks_exact(dim)
        .map(|p| code_of(p, depth))
        .collect();
    let mut order: Vec<usize> = (0..codes.len()).collect();
    order.sort_by_key(|&i| (codes[i], i));
    let sorted = order.iter().map(|&i| codes[i]).collect();
    (order, sorted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{uniform_grid, uniform_random};
    use std::f64::consts::SQRT_2;

    fn unit_square(x0: f64, y0: f64) -> CubeBox {
        CubeBox {
            center: vec![x0 + 0.5, y0 + 0.5],
            half_width: 0.5,
        }
    }

    #[test]
    fn morton_round_trip() {
        for dim in 1..=4 {
            for level in 0..4 {
                let side = 1usize << level;
                for flat in 0..side.pow(dim as u32) {
                    let idx: Vec<u64> = (0..dim)
                        .map(|a| ((flat / side.pow(a as u32)) % side) as u64)
                        .collect();
                    let code = encode(&idx, level) as usize;
                    let back: Vec<u64> =
                        decode(code, dim, level).into_iter().map(|x| x as u64).collect();
                    assert_eq!(back, idx);
                }
            }
        }
    }

    #[test]
    fn admissibility_closed_form() {
        let a = unit_square(0.0, 0.0);
        assert!(!admissible(&a, &a, SQRT_2));
        assert!(!admissible(&a, &unit_square(1.0, 0.0), SQRT_2));
        // One unit-square gap: dist = 1, diam = sqrt(2).
        let gap = unit_square(2.0, 0.0);
        assert!((a.dist(&gap) - 1.0).abs() < 1e-15);
        assert!((a.diam() - SQRT_2).abs() < 1e-15);
        assert!(admissible(&a, &gap, SQRT_2));
        assert!(!admissible(&a, &gap, 1.0));
    }

    #[test]
    fn single_point_is_a_root_leaf() {
        let cloud = PointCloud::shared(2, vec![0.3, -0.2]).unwrap();
        let tree = HierTree::build(&cloud, 10, SQRT_2).unwrap();
        assert_eq!(tree.depth(), 0);
        assert!(tree.root().is_leaf());
        assert_eq!(tree.root().targets(), &[0]);
    }

    #[test]
    fn rejects_zero_capacity_and_bad_eta() {
        let cloud = PointCloud::shared(2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            HierTree::build(&cloud, 0, SQRT_2),
            Err(NncaError::InvalidLeafCapacity(0))
        ));
        assert!(HierTree::build(&cloud, 1, 0.0).is_err());
    }

    #[test]
    fn grid_of_1024_points_gives_16_full_leaves() {
        // 32 x 32 grid spanning [-1, 1]^2 exactly.
        let pts: Vec<f64> = (0..32 * 32)
            .flat_map(|k| {
                let (i, j) = (k / 32, k % 32);
                [-1.0 + 2.0 * i as f64 / 31.0, -1.0 + 2.0 * j as f64 / 31.0]
            })
            .collect();
        let cloud = PointCloud::shared(2, pts).unwrap();
        let tree = HierTree::build(&cloud, 64, SQRT_2).unwrap();
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.cells_at_level(2), 16);
        for &code in tree.occupied(2) {
            let id = CellId {
                level: 2,
                code: code as usize,
            };
            assert_eq!(tree.targets(id).len(), 64);
        }
        assert_eq!(tree.occupied(2).len(), 16);
    }

    #[test]
    fn clustered_corner_points_keep_empty_siblings() {
        let pts = vec![
            -1.0, -1.0, -0.99, -1.0, -1.0, -0.99, -0.99, -0.99, 1.0, 1.0,
        ];
        let cloud = PointCloud::shared(2, pts).unwrap();
        let tree = HierTree::build(&cloud, 1, SQRT_2).unwrap();
        // Cells of width 2 / 2^k separate points 0.01 apart once 2/2^k <= 0.01.
        assert!(tree.depth() >= 8);
        let leaves = tree.occupied(tree.depth());
        assert_eq!(leaves.len(), 5);
        assert_eq!(tree.cells_at_level(tree.depth()), 1 << (2 * tree.depth()));
        for &code in leaves {
            let id = CellId {
                level: tree.depth(),
                code: code as usize,
            };
            assert!(tree.targets(id).len() <= 1);
        }
    }

    #[test]
    fn level_one_cells_are_mutual_neighbours() {
        let cloud = PointCloud::shared(2, uniform_grid(16, 2)).unwrap();
        let tree = HierTree::build(&cloud, 4, SQRT_2).unwrap();
        for &code in tree.occupied(1) {
            let id = CellId {
                level: 1,
                code: code as usize,
            };
            assert_eq!(tree.neighbors(id).len(), 4);
            assert!(tree.interaction_list(id).is_empty());
        }
    }

    #[test]
    fn report_mentions_depth() {
        let cloud = PointCloud::shared(2, uniform_random(500, 2, 1)).unwrap();
        let tree = HierTree::build(&cloud, 32, SQRT_2).unwrap();
        let r = tree.report();
        assert!(r.contains(&format!("depth: {}", tree.depth())));
        assert!(r.contains("leaf occupancy histogram"));
    }
}
