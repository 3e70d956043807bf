//! H2 matrix assembly by nested cross approximation.
//!
//! Pivots are selected in one bottom-up sweep over the levels `depth..=2`.
//! For every occupied cell the incoming side runs ACA on the block between
//! the cell's candidate rows (its targets at a leaf, the children's incoming
//! pivots otherwise) and the sources of its interaction list (at a leaf) or
//! the outgoing pivots of the interaction list's children. The interpolation
//! operator returned by ACA is the leaf basis or the stacked transfer blocks;
//! the outgoing side does the same on the transposed matrix. Couplings and
//! near-field blocks are plain kernel evaluations afterwards.

use std::ops::Range;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::aca::{partial_aca, EntrySource, Transposed};
use crate::cloud::PointCloud;
use crate::error::{NncaError, Result};
use crate::kernel::{KernelMatrix, KernelSpec};
use crate::tree::{CellId, HierTree};

/// Default number of far-field samples taken per ancestor interaction-list
/// cell.
pub const DEFAULT_ANCESTOR_SAMPLES: usize = 2;
/// Ancestor levels, nearest first, that contribute samples.
pub const DEFAULT_ANCESTOR_LEVELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NncaOptions {
    /// Relative ACA tolerance used for every cell.
    pub epsilon: f64,
    /// Optional cap on every ACA rank.
    pub max_rank: Option<usize>,
    /// Reuse the incoming side as the outgoing side when the kernel is
    /// symmetric and targets and sources coincide.
    pub use_symmetry: bool,
    /// Points sampled from every interaction-list cell of every compressed
    /// ancestor and appended to a cell's far candidates (0 disables).
    pub ancestor_samples: usize,
    /// How many ancestors above a cell contribute samples.
    pub ancestor_levels: usize,
}

impl NncaOptions {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_rank: None,
            use_symmetry: true,
            ancestor_samples: DEFAULT_ANCESTOR_SAMPLES,
            ancestor_levels: DEFAULT_ANCESTOR_LEVELS,
        }
    }

    pub fn with_symmetry(mut self, use_symmetry: bool) -> Self {
        self.use_symmetry = use_symmetry;
        self
    }
}

/// Pivots of one cell, as global point indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PivotSet {
    /// Incoming row pivots, a subset of the cell's targets.
    pub t_in: Vec<usize>,
    /// Incoming column pivots, drawn from the far-field sources.
    pub s_in: Vec<usize>,
    /// Outgoing row pivots, drawn from the far-field targets.
    pub t_out: Vec<usize>,
    /// Outgoing column pivots, a subset of the cell's sources.
    pub s_out: Vec<usize>,
}

/// Kernel evaluations broken down by assembly phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvaluationCounts {
    pub pivot_selection: u64,
    /// Evaluations made while forming bases and transfer blocks.
    pub transfer: u64,
    pub coupling: u64,
    pub nearfield: u64,
}

impl EvaluationCounts {
    pub fn total(&self) -> u64 {
        self.pivot_selection + self.transfer + self.coupling + self.nearfield
    }
}

#[derive(Debug, Clone, Default)]
pub struct H2Stats {
    /// Largest pivot count over all cells and both sides.
    pub max_rank: usize,
    /// Bytes held by all stored blocks and pivot lists.
    pub memory_bytes: usize,
    pub assembly_seconds: f64,
    pub evaluations: EvaluationCounts,
    /// Cells processed by the pivot sweep.
    pub cells_visited: usize,
    /// Cells whose far candidate set was too small for ACA and which keep all
    /// of their candidate rows instead (counted per side).
    pub pass_through_cells: usize,
    pub dropped_pivots: usize,
    pub unconverged_blocks: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct CellData {
    pub(crate) pivots: PivotSet,
    /// Rows follow the incoming candidate rows, columns the incoming pivots.
    pub(crate) in_basis: DMatrix<f64>,
    /// `None` when shared with `in_basis`.
    pub(crate) out_basis: Option<DMatrix<f64>>,
    /// Slots of the interaction-list members that have a coupling block.
    pub(crate) partners: Vec<usize>,
    /// `|t_in| x sum |s_out(partner)|`.
    pub(crate) coupling: DMatrix<f64>,
    /// Column offset of each partner's block, plus the total width.
    pub(crate) coupling_offsets: Vec<usize>,
}

impl CellData {
    pub(crate) fn out_basis(&self) -> &DMatrix<f64> {
        self.out_basis.as_ref().unwrap_or(&self.in_basis)
    }

    fn bytes(&self) -> usize {
        let entries = self.in_basis.len()
            + self.out_basis.as_ref().map_or(0, |m| m.len())
            + self.coupling.len();
        let indices = self.pivots.t_in.len()
            + self.pivots.s_in.len()
            + self.pivots.t_out.len()
            + self.pivots.s_out.len()
            + self.partners.len()
            + self.coupling_offsets.len();
        8 * (entries + indices)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NearBlock {
    /// `|t^X| x sum |s^Y|` over the neighbours `Y` of leaf `X`.
    pub(crate) matrix: DMatrix<f64>,
    /// Source positions (in tree order) of each neighbour, in list order.
    pub(crate) ranges: Vec<Range<usize>>,
}

/// An assembled H2 matrix.
#[derive(Debug, Clone)]
pub struct H2Matrix {
    pub(crate) tree: HierTree,
    pub(crate) kernel: KernelSpec,
    pub(crate) shortcut: bool,
    /// Coarsest level with pivots; `depth + 1` when nothing is compressed.
    pub(crate) first: usize,
    /// Per level, per occupied slot. Levels above `first` are empty.
    pub(crate) levels: Vec<Vec<CellData>>,
    /// Per occupied leaf slot.
    pub(crate) near: Vec<NearBlock>,
    pub(crate) num_targets: usize,
    pub(crate) num_sources: usize,
    stats: H2Stats,
}

struct Side {
    self_pivots: Vec<usize>,
    far_pivots: Vec<usize>,
    basis: DMatrix<f64>,
    evaluations: u64,
    pass_through: bool,
    converged: bool,
    dropped: usize,
}

fn compress_side<S: EntrySource + ?Sized>(
    oracle: &S,
    rows: &[usize],
    cols: &[usize],
    needs_far: bool,
    opts: &NncaOptions,
) -> Side {
    let m = rows.len();
    if m == 0 || !needs_far {
        return Side {
            self_pivots: Vec::new(),
            far_pivots: Vec::new(),
            basis: DMatrix::zeros(m, 0),
            evaluations: 0,
            pass_through: false,
            converged: true,
            dropped: 0,
        };
    }
    if cols.len() < m {
        // Too few far points to reveal the rank the ancestors need.
        return Side {
            self_pivots: rows.to_vec(),
            far_pivots: Vec::new(),
            basis: DMatrix::identity(m, m),
            evaluations: 0,
            pass_through: true,
            converged: true,
            dropped: 0,
        };
    }
    let aca = partial_aca(rows, cols, oracle, opts.epsilon, opts.max_rank);
    Side {
        basis: aca.column_interpolant(),
        self_pivots: aca.row_pivots,
        far_pivots: aca.col_pivots,
        evaluations: aca.evaluations,
        pass_through: false,
        converged: aca.converged,
        dropped: aca.dropped_pivots,
    }
}

struct CellOutcome {
    data: CellData,
    aca_evaluations: u64,
    pass_through: usize,
    unconverged: usize,
    dropped: usize,
}

impl H2Matrix {
    /// Builds the tree with leaf capacity `nu` and admissibility `eta`, then
    /// assembles.
    pub fn build(cloud: &PointCloud, kernel: &KernelSpec, nu: usize, eta: f64, opts: &NncaOptions) -> Result<Self> {
        let tree = HierTree::build(cloud, nu, eta)?;
        Self::assemble(cloud, kernel, tree, opts)
    }

    /// Assembles the H2 representation of the kernel matrix on `cloud` over
    /// an already built `tree`.
    pub fn assemble(cloud: &PointCloud, kernel: &KernelSpec, tree: HierTree, opts: &NncaOptions) -> Result<Self> {
        if !(opts.epsilon > 0.0) {
            return Err(NncaError::InvalidParameter(format!("epsilon must be positive, got {}", opts.epsilon)));
        }
        if tree.dim() != cloud.dim()
            || tree.target_order().len() != cloud.num_targets()
            || tree.source_order().len() != cloud.num_sources()
        {
            return Err(NncaError::InvalidParameter("tree was not built for this point cloud".into()));
        }
        let km = KernelMatrix::new(kernel, cloud)?;
        let start = Instant::now();
        let shortcut = opts.use_symmetry && kernel.is_symmetric() && cloud.is_shared();
        let depth = tree.depth();
        let mut stats = H2Stats::default();

        let first = first_compressed_level(&tree);
        let needs_far = far_field_flags(&tree, first);
        let mut levels: Vec<Vec<CellData>> = vec![Vec::new(); depth + 1];
        let mut aca_total = 0u64;
        for level in (first..=depth).rev() {
            let below: &[CellData] = if level < depth { &levels[level + 1] } else { &[] };
            let outcomes: Vec<CellOutcome> = (0..tree.occupied(level).len())
                .into_par_iter()
                .map(|slot| {
                    let ctx = CellContext {
                        tree: &tree,
                        km: &km,
                        below,
                        first,
                        shortcut,
                        opts,
                    };
                    process_cell(&ctx, level, slot, needs_far[level][slot])
                })
                .collect();
            let mut cells = Vec::with_capacity(outcomes.len());
            for o in outcomes {
                aca_total += o.aca_evaluations;
                stats.pass_through_cells += o.pass_through;
                stats.unconverged_blocks += o.unconverged;
                stats.dropped_pivots += o.dropped;
                stats.cells_visited += 1;
                cells.push(o.data);
            }
            levels[level] = cells;
        }
        let after_pivots = km.evaluations();
        stats.evaluations.pivot_selection = aca_total;
        stats.evaluations.transfer = after_pivots - aca_total;

        for level in first..=depth {
            let occupied = tree.occupied(level);
            let blocks: Vec<(Vec<usize>, DMatrix<f64>, Vec<usize>)> = {
                let cells = &levels[level];
                (0..occupied.len())
                    .into_par_iter()
                    .map(|slot| {
                        let id = CellId {
                            level,
                            code: occupied[slot] as usize,
                        };
                        let mut partners = Vec::new();
                        let mut cols = Vec::new();
                        let mut offsets = vec![0];
                        for &code in tree.interaction_list(id) {
                            let Some(y) = tree.slot(CellId { level, code: code as usize }) else {
                                continue;
                            };
                            let s_out = &cells[y].pivots.s_out;
                            if s_out.is_empty() {
                                continue;
                            }
                            partners.push(y);
                            cols.extend_from_slice(s_out);
                            offsets.push(cols.len());
                        }
                        let coupling = km.block(&cells[slot].pivots.t_in, &cols);
                        (partners, coupling, offsets)
                    })
                    .collect()
            };
            for (cell, (partners, coupling, offsets)) in levels[level].iter_mut().zip(blocks) {
                cell.partners = partners;
                cell.coupling = coupling;
                cell.coupling_offsets = offsets;
            }
        }
        let after_couplings = km.evaluations();
        stats.evaluations.coupling = after_couplings - after_pivots;

        let leaves = tree.occupied(depth);
        let near: Vec<NearBlock> = (0..leaves.len())
            .into_par_iter()
            .map(|slot| {
                let id = CellId {
                    level: depth,
                    code: leaves[slot] as usize,
                };
                let mut ranges = Vec::new();
                for &code in tree.neighbors(id) {
                    let r = tree.source_range(CellId {
                        level: depth,
                        code: code as usize,
                    });
                    if !r.is_empty() {
                        ranges.push(r);
                    }
                }
                let cols: Vec<usize> = ranges
                    .iter()
                    .flat_map(|r| tree.source_order()[r.clone()].iter().copied())
                    .collect();
                NearBlock {
                    matrix: km.block(tree.targets(id), &cols),
                    ranges,
                }
            })
            .collect();
        stats.evaluations.nearfield = km.evaluations() - after_couplings;
        stats.assembly_seconds = start.elapsed().as_secs_f64();

        stats.max_rank = levels
            .iter()
            .flatten()
            .map(|c| c.pivots.t_in.len().max(c.pivots.s_out.len()))
            .max()
            .unwrap_or(0);
        stats.memory_bytes = levels.iter().flatten().map(CellData::bytes).sum::<usize>()
            + near
                .iter()
                .map(|b| 8 * b.matrix.len() + 16 * b.ranges.len())
                .sum::<usize>();
        if stats.dropped_pivots > 0 {
            log::warn!("{} near-singular pivots dropped during assembly", stats.dropped_pivots);
        }
        if stats.unconverged_blocks > 0 {
            log::warn!("{} ACA runs stopped at the rank cap", stats.unconverged_blocks);
        }

        Ok(Self {
            tree,
            kernel: kernel.clone(),
            shortcut,
            first,
            levels,
            near,
            num_targets: cloud.num_targets(),
            num_sources: cloud.num_sources(),
            stats,
        })
    }

    pub fn tree(&self) -> &HierTree {
        &self.tree
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn stats(&self) -> &H2Stats {
        &self.stats
    }

    pub fn num_targets(&self) -> usize {
        self.num_targets
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    /// Coarsest level holding pivots and couplings (`depth + 1` when the
    /// matrix is stored densely).
    pub fn first_compressed_level(&self) -> usize {
        self.first
    }

    /// True when the outgoing side was taken from the incoming side.
    pub fn uses_symmetry(&self) -> bool {
        self.shortcut
    }

    fn data(&self, id: CellId) -> Option<&CellData> {
        if id.level < self.first || id.level > self.tree.depth() {
            return None;
        }
        self.tree.slot(id).map(|s| &self.levels[id.level][s])
    }

    pub fn pivots(&self, id: CellId) -> Option<&PivotSet> {
        self.data(id).map(|d| &d.pivots)
    }

    /// `U_B` at a leaf, the stacked child transfer blocks otherwise.
    pub fn incoming_basis(&self, id: CellId) -> Option<&DMatrix<f64>> {
        self.data(id).map(|d| &d.in_basis)
    }

    /// `V_B` at a leaf, the stacked child transfer blocks otherwise.
    pub fn outgoing_basis(&self, id: CellId) -> Option<&DMatrix<f64>> {
        self.data(id).map(|d| d.out_basis())
    }

    /// `S_{X,Y}`, if `y` is an interaction-list member of `x` with outgoing
    /// pivots.
    pub fn coupling(&self, x: CellId, y: CellId) -> Option<DMatrix<f64>> {
        if x.level != y.level {
            return None;
        }
        let d = self.data(x)?;
        let ys = self.tree.slot(y)?;
        let k = d.partners.iter().position(|&p| p == ys)?;
        let (a, b) = (d.coupling_offsets[k], d.coupling_offsets[k + 1]);
        Some(d.coupling.columns(a, b - a).into_owned())
    }

    /// Dense near-field block of an occupied leaf and its global source
    /// indices.
    pub fn near_block(&self, leaf: CellId) -> Option<(&DMatrix<f64>, Vec<usize>)> {
        if leaf.level != self.tree.depth() {
            return None;
        }
        let b = &self.near[self.tree.slot(leaf)?];
        let cols = b
            .ranges
            .iter()
            .flat_map(|r| self.tree.source_order()[r.clone()].iter().copied())
            .collect();
        Some((&b.matrix, cols))
    }

    /// Occupied child slots of an occupied non-leaf cell, in child order.
    pub(crate) fn child_slots(&self, id: CellId) -> impl Iterator<Item = usize> + '_ {
        self.tree.children(id).filter_map(|c| self.tree.slot(c))
    }

    /// Full incoming basis of a cell: rows are `tree.targets(id)`, columns the
    /// incoming pivots.
    pub fn expanded_incoming_basis(&self, id: CellId) -> Option<DMatrix<f64>> {
        let d = self.data(id)?;
        Some(self.expand(id, &d.in_basis, true))
    }

    /// Full outgoing basis of a cell: rows are `tree.sources(id)`, columns the
    /// outgoing pivots.
    pub fn expanded_outgoing_basis(&self, id: CellId) -> Option<DMatrix<f64>> {
        let d = self.data(id)?;
        Some(self.expand(id, d.out_basis(), false))
    }

    fn expand(&self, id: CellId, basis: &DMatrix<f64>, incoming: bool) -> DMatrix<f64> {
        if id.level == self.tree.depth() {
            return basis.clone();
        }
        let count = |c: CellId| {
            if incoming {
                self.tree.targets(c).len()
            } else {
                self.tree.sources(c).len()
            }
        };
        let rows = count(id);
        let mut out = DMatrix::zeros(rows, basis.ncols());
        let mut row = 0;
        let mut seg = 0;
        for child in self.tree.children(id) {
            let n = count(child);
            if n == 0 {
                continue;
            }
            let Some(cd) = self.data(child) else {
                row += n;
                continue;
            };
            let child_basis = if incoming { &cd.in_basis } else { cd.out_basis() };
            let k = child_basis.ncols();
            if k > 0 {
                let e = self.expand(child, child_basis, incoming);
                let block = e * basis.rows(seg, k);
                out.rows_mut(row, n).copy_from(&block);
            }
            seg += k;
            row += n;
        }
        out
    }
}

fn has_far_cells(tree: &HierTree, id: CellId) -> bool {
    tree.interaction_list(id).iter().any(|&c| {
        tree.slot(CellId {
            level: id.level,
            code: c as usize,
        })
        .is_some()
    })
}

/// Coarsest level where some occupied cell has an occupied interaction-list
/// member, or `depth + 1` if there is none.
fn first_compressed_level(tree: &HierTree) -> usize {
    (1..=tree.depth())
        .find(|&level| {
            tree.occupied(level).iter().any(|&code| {
                has_far_cells(
                    tree,
                    CellId {
                        level,
                        code: code as usize,
                    },
                )
            })
        })
        .unwrap_or(tree.depth() + 1)
}

/// A cell must carry a far-field basis if it or one of its compressed
/// ancestors has a non-empty interaction list.
fn far_field_flags(tree: &HierTree, first: usize) -> Vec<Vec<bool>> {
    let depth = tree.depth();
    let mut flags: Vec<Vec<bool>> = vec![Vec::new(); depth + 1];
    for level in first..=depth {
        let occupied = tree.occupied(level);
        let mut f = Vec::with_capacity(occupied.len());
        for &code in occupied {
            let id = CellId {
                level,
                code: code as usize,
            };
            let own = has_far_cells(tree, id);
            let inherited = level > first && {
                let parent = CellId {
                    level: level - 1,
                    code: id.code >> tree.dim(),
                };
                flags[level - 1][tree.slot(parent).expect("parent of an occupied cell is occupied")]
            };
            f.push(own || inherited);
        }
        flags[level] = f;
    }
    flags
}

/// Candidate sets `(t_in, s_in, t_out, s_out)` of a cell. `below` holds the
/// pivot data of level `level + 1` (ignored at the leaf level).
fn candidate_sets(
    tree: &HierTree,
    below: &[CellData],
    id: CellId,
) -> (Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>) {
    let level = id.level;
    let il: Vec<CellId> = tree
        .interaction_list(id)
        .iter()
        .map(|&code| CellId {
            level,
            code: code as usize,
        })
        .filter(|&c| tree.slot(c).is_some())
        .collect();
    if level == tree.depth() {
        let t_in = tree.targets(id).to_vec();
        let s_out = tree.sources(id).to_vec();
        let s_in = il.iter().flat_map(|&c| tree.sources(c).iter().copied()).collect();
        let t_out = il.iter().flat_map(|&c| tree.targets(c).iter().copied()).collect();
        return (t_in, s_in, t_out, s_out);
    }
    let child_data = |c: CellId| tree.children(c).filter_map(|ch| tree.slot(ch)).map(|s| &below[s]);
    let t_in = child_data(id).flat_map(|d| d.pivots.t_in.iter().copied()).collect();
    let s_out = child_data(id).flat_map(|d| d.pivots.s_out.iter().copied()).collect();
    let s_in = il
        .iter()
        .flat_map(|&c| child_data(c))
        .flat_map(|d| d.pivots.s_out.iter().copied())
        .collect();
    let t_out = il
        .iter()
        .flat_map(|&c| child_data(c))
        .flat_map(|d| d.pivots.t_in.iter().copied())
        .collect();
    (t_in, s_in, t_out, s_out)
}

/// Appends up to `m` evenly spaced points of every interaction-list cell of
/// the nearest `levels` compressed ancestors of `id`.
fn add_ancestor_samples(
    tree: &HierTree,
    id: CellId,
    first: usize,
    m: usize,
    levels: usize,
    sources: &mut Vec<usize>,
    targets: &mut Vec<usize>,
) {
    let mut code = id.code;
    for level in (first..id.level).rev().take(levels) {
        code >>= tree.dim();
        for &far in tree.interaction_list(CellId { level, code }) {
            let far = CellId {
                level,
                code: far as usize,
            };
            for (list, out) in [(tree.sources(far), &mut *sources), (tree.targets(far), &mut *targets)] {
                let n = list.len();
                if n <= m {
                    out.extend_from_slice(list);
                } else {
                    out.extend((0..m).map(|j| list[(2 * j + 1) * n / (2 * m)]));
                }
            }
        }
    }
}

struct CellContext<'a> {
    tree: &'a HierTree,
    km: &'a KernelMatrix<'a>,
    /// Pivot data of the next finer level.
    below: &'a [CellData],
    first: usize,
    shortcut: bool,
    opts: &'a NncaOptions,
}

fn process_cell(ctx: &CellContext<'_>, level: usize, slot: usize, needs_far: bool) -> CellOutcome {
    let CellContext {
        tree,
        km,
        below,
        first,
        shortcut,
        opts,
    } = *ctx;
    let id = CellId {
        level,
        code: tree.occupied(level)[slot] as usize,
    };
    let (t_cand, mut s_cand_in, mut t_cand_out, s_cand) = candidate_sets(tree, below, id);
    if opts.ancestor_samples > 0 {
        add_ancestor_samples(tree, id, first, opts.ancestor_samples, opts.ancestor_levels, &mut s_cand_in, &mut t_cand_out);
    }
    let incoming = compress_side(km, &t_cand, &s_cand_in, needs_far, opts);
    let mut aca_evaluations = incoming.evaluations;
    let mut pass_through = incoming.pass_through as usize;
    let mut unconverged = (!incoming.converged) as usize;
    let mut dropped = incoming.dropped;

    let (pivots, out_basis) = if shortcut {
        let pivots = PivotSet {
            t_out: incoming.far_pivots.clone(),
            s_out: incoming.self_pivots.clone(),
            t_in: incoming.self_pivots,
            s_in: incoming.far_pivots,
        };
        (pivots, None)
    } else {
        let outgoing = compress_side(&Transposed(km), &s_cand, &t_cand_out, needs_far, opts);
        aca_evaluations += outgoing.evaluations;
        pass_through += outgoing.pass_through as usize;
        unconverged += (!outgoing.converged) as usize;
        dropped += outgoing.dropped;
        let pivots = PivotSet {
            t_in: incoming.self_pivots,
            s_in: incoming.far_pivots,
            t_out: outgoing.far_pivots,
            s_out: outgoing.self_pivots,
        };
        (pivots, Some(outgoing.basis))
    };
    CellOutcome {
        data: CellData {
            pivots,
            in_basis: incoming.basis,
            out_basis,
            partners: Vec::new(),
            coupling: DMatrix::zeros(0, 0),
            coupling_offsets: vec![0],
        },
        aca_evaluations,
        pass_through,
        unconverged,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::uniform_random;
    use crate::kernel::builtin_kernel;

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn single_leaf_is_one_dense_block() {
        let cloud = PointCloud::shared(2, uniform_random(100, 2, 1)).unwrap();
        let kernel = builtin_kernel("matern", 2).unwrap();
        let h2 = H2Matrix::build(&cloud, &kernel, 100, 2f64.sqrt(), &NncaOptions::new(1e-8)).unwrap();
        assert_eq!(h2.tree().depth(), 0);
        assert_eq!(h2.stats().cells_visited, 0);
        assert_eq!(h2.stats().evaluations.coupling, 0);
        assert_eq!(h2.stats().evaluations.nearfield, 100 * 100);
        let root = h2.tree().root().id();
        let (block, cols) = h2.near_block(root).unwrap();
        assert_eq!(block.shape(), (100, 100));
        assert_eq!(cols.len(), 100);
    }

    #[test]
    fn pivots_live_in_their_cells_and_nest() {
        let cloud = PointCloud::shared(2, uniform_random(2048, 2, 3)).unwrap();
        let kernel = builtin_kernel("reg-log-2d", 2).unwrap();
        let h2 = H2Matrix::build(&cloud, &kernel, 32, 2f64.sqrt(), &NncaOptions::new(1e-8)).unwrap();
        let tree = h2.tree();
        assert!(tree.depth() >= 3);
        let mut visited = 0;
        for level in h2.first_compressed_level()..=tree.depth() {
            for &code in tree.occupied(level) {
                visited += 1;
                let id = CellId {
                    level,
                    code: code as usize,
                };
                let p = h2.pivots(id).unwrap();
                let targets = tree.targets(id);
                assert!(p.t_in.iter().all(|i| targets.contains(i)));
                assert_eq!(p.t_out, p.s_in);
                assert_eq!(p.s_out, p.t_in);
                let basis = h2.incoming_basis(id).unwrap();
                assert_eq!(basis.ncols(), p.t_in.len());
                if level < tree.depth() {
                    let from_children: Vec<usize> = tree
                        .children(id)
                        .filter_map(|c| h2.pivots(c))
                        .flat_map(|c| c.t_in.clone())
                        .collect();
                    assert_eq!(basis.nrows(), from_children.len());
                    assert!(p.t_in.iter().all(|i| from_children.contains(i)));
                } else {
                    assert_eq!(basis.nrows(), targets.len());
                }
            }
        }
        assert_eq!(h2.stats().cells_visited, visited);
        assert_eq!(h2.stats().evaluations.transfer, 0);
    }

    #[test]
    fn leaf_candidate_sets_follow_interaction_list() {
        let cloud = PointCloud::shared(2, uniform_random(1024, 2, 5)).unwrap();
        let tree = HierTree::build(&cloud, 16, 2f64.sqrt()).unwrap();
        let depth = tree.depth();
        let code = tree.occupied(depth)[tree.occupied(depth).len() / 2] as usize;
        let id = CellId { level: depth, code };
        let (t_in, s_in, t_out, s_out) = candidate_sets(&tree, &[], id);
        let expected: usize = tree
            .interaction_list(id)
            .iter()
            .map(|&c| tree.sources(CellId { level: depth, code: c as usize }).len())
            .sum();
        assert_eq!(s_in.len(), expected);
        assert_eq!(t_out.len(), expected);
        assert_eq!(t_in, tree.targets(id));
        assert_eq!(s_out, tree.sources(id));
    }

    #[test]
    fn admissible_blocks_are_accurate() {
        let cloud = PointCloud::shared(2, uniform_random(1500, 2, 9)).unwrap();
        let kernel = builtin_kernel("matern", 2).unwrap();
        let eps = 1e-8;
        let h2 = H2Matrix::build(&cloud, &kernel, 24, 2f64.sqrt(), &NncaOptions::new(eps)).unwrap();
        let km = KernelMatrix::new(&kernel, &cloud).unwrap();
        let tree = h2.tree();
        let mut checked = 0;
        for level in h2.first_compressed_level()..=tree.depth() {
            for &code in tree.occupied(level).iter().step_by(3) {
                let x = CellId {
                    level,
                    code: code as usize,
                };
                for &yc in tree.interaction_list(x).iter().take(2) {
                    let y = CellId {
                        level,
                        code: yc as usize,
                    };
                    let Some(s) = h2.coupling(x, y) else { continue };
                    let u = h2.expanded_incoming_basis(x).unwrap();
                    let v = h2.expanded_outgoing_basis(y).unwrap();
                    let exact = km.block(tree.targets(x), tree.sources(y));
                    let err = rel_frob(&(u * s * v.transpose()), &exact);
                    assert!(err <= 100.0 * eps, "level {level}: {err:e}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn general_path_matches_symmetric_shortcut() {
        let cloud = PointCloud::shared(2, uniform_random(800, 2, 2)).unwrap();
        let kernel = builtin_kernel("gaussian", 2).unwrap();
        let opts = NncaOptions::new(1e-7);
        let sym = H2Matrix::build(&cloud, &kernel, 16, 2f64.sqrt(), &opts).unwrap();
        let gen = H2Matrix::build(&cloud, &kernel, 16, 2f64.sqrt(), &opts.with_symmetry(false)).unwrap();
        assert!(sym.uses_symmetry());
        assert!(!gen.uses_symmetry());
        assert!(sym.stats().evaluations.total() < gen.stats().evaluations.total());
        let tree = sym.tree();
        for level in sym.first_compressed_level()..=tree.depth() {
            for &code in tree.occupied(level) {
                let id = CellId {
                    level,
                    code: code as usize,
                };
                assert_eq!(sym.pivots(id), gen.pivots(id));
                assert_eq!(sym.outgoing_basis(id), gen.outgoing_basis(id));
            }
        }
    }

    #[test]
    fn separate_targets_and_sources() {
        let t = uniform_random(600, 2, 11);
        let s: Vec<f64> = uniform_random(500, 2, 12).iter().map(|x| 0.5 * x + 0.2).collect();
        let cloud = PointCloud::new(2, t, s).unwrap();
        let kernel = builtin_kernel("matern", 2).unwrap();
        let h2 = H2Matrix::build(&cloud, &kernel, 16, 2f64.sqrt(), &NncaOptions::new(1e-8)).unwrap();
        assert!(!h2.uses_symmetry());
        assert_eq!(h2.num_targets(), 600);
        assert_eq!(h2.num_sources(), 500);
        let tree = h2.tree();
        for level in h2.first_compressed_level()..=tree.depth() {
            for &code in tree.occupied(level) {
                let id = CellId {
                    level,
                    code: code as usize,
                };
                let p = h2.pivots(id).unwrap();
                assert!(p.s_out.iter().all(|j| tree.sources(id).contains(j)));
            }
        }
    }

    #[test]
    fn rejects_bad_epsilon_and_foreign_tree() {
        let cloud = PointCloud::shared(2, uniform_random(50, 2, 1)).unwrap();
        let other = PointCloud::shared(2, uniform_random(60, 2, 1)).unwrap();
        let kernel = builtin_kernel("matern", 2).unwrap();
        let tree = HierTree::build(&other, 8, 2f64.sqrt()).unwrap();
        assert!(H2Matrix::assemble(&cloud, &kernel, tree, &NncaOptions::new(1e-6)).is_err());
        let tree = HierTree::build(&cloud, 8, 2f64.sqrt()).unwrap();
        assert!(H2Matrix::assemble(&cloud, &kernel, tree, &NncaOptions::new(0.0)).is_err());
    }
}
