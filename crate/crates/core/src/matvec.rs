//! Fast H2 matrix-vector product and the dense reference it is checked
//! against.

use nalgebra::{DVector, DVectorView};
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{NncaError, Result};
use crate::kernel::KernelSpec;
use crate::nnca::H2Matrix;
use crate::tree::CellId;

/// `u = A w` through the H2 representation.
pub fn h2_matvec(h2: &H2Matrix, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != h2.num_sources {
        return Err(NncaError::LengthMismatch {
            expected: h2.num_sources,
            actual: w.len(),
        });
    }
    let tree = &h2.tree;
    let depth = tree.depth();
    let ws: Vec<f64> = tree.source_order().iter().map(|&j| w[j]).collect();
    let mut us = vec![0.0; h2.num_targets];

    if h2.first <= depth {
        let w_out = upward(h2, &ws);
        let mut u_in = transverse(h2, &w_out);
        downward(h2, &mut u_in, &mut us);
    }
    near_field(h2, &ws, &mut us);

    let mut u = vec![0.0; h2.num_targets];
    for (&i, x) in tree.target_order().iter().zip(us) {
        u[i] = x;
    }
    Ok(u)
}

fn cell_id(h2: &H2Matrix, level: usize, slot: usize) -> CellId {
    CellId {
        level,
        code: h2.tree.occupied(level)[slot] as usize,
    }
}

/// Outgoing coefficients per level and slot.
fn upward(h2: &H2Matrix, ws: &[f64]) -> Vec<Vec<DVector<f64>>> {
    let depth = h2.tree.depth();
    let mut w_out: Vec<Vec<DVector<f64>>> = vec![Vec::new(); depth + 1];
    for level in (h2.first..=depth).rev() {
        let cells = &h2.levels[level];
        let below = w_out.get(level + 1);
        let out: Vec<DVector<f64>> = (0..cells.len())
            .into_par_iter()
            .map(|slot| {
                let basis = cells[slot].out_basis();
                if basis.ncols() == 0 {
                    return DVector::zeros(0);
                }
                let id = cell_id(h2, level, slot);
                if level == depth {
                    let r = h2.tree.source_range(id);
                    basis.tr_mul(&DVectorView::from_slice(&ws[r.clone()], r.len()))
                } else {
                    let below = below.expect("children level computed");
                    let mut gathered = Vec::with_capacity(basis.nrows());
                    for c in h2.child_slots(id) {
                        gathered.extend_from_slice(below[c].as_slice());
                    }
                    basis.tr_mul(&DVector::from_vec(gathered))
                }
            })
            .collect();
        w_out[level] = out;
    }
    w_out
}

/// Incoming coefficients from the coupling blocks at every level.
fn transverse(h2: &H2Matrix, w_out: &[Vec<DVector<f64>>]) -> Vec<Vec<DVector<f64>>> {
    let depth = h2.tree.depth();
    let mut u_in: Vec<Vec<DVector<f64>>> = vec![Vec::new(); depth + 1];
    for level in h2.first..=depth {
        let cells = &h2.levels[level];
        u_in[level] = cells
            .par_iter()
            .map(|cell| {
                let rows = cell.coupling.nrows();
                if cell.partners.is_empty() || rows == 0 {
                    return DVector::zeros(cell.pivots.t_in.len());
                }
                let mut gathered = Vec::with_capacity(cell.coupling.ncols());
                for &p in &cell.partners {
                    gathered.extend_from_slice(w_out[level][p].as_slice());
                }
                &cell.coupling * DVector::from_vec(gathered)
            })
            .collect();
    }
    u_in
}

/// Pushes incoming coefficients down to the leaves and adds the leaf
/// contributions to `us` (tree order).
fn downward(h2: &H2Matrix, u_in: &mut [Vec<DVector<f64>>], us: &mut [f64]) {
    let depth = h2.tree.depth();
    for level in h2.first..depth {
        let (upper, lower) = u_in.split_at_mut(level + 1);
        let parents = &upper[level];
        let children = &mut lower[0];
        let cells = &h2.levels[level];
        let pushed: Vec<DVector<f64>> = (0..cells.len())
            .into_par_iter()
            .map(|slot| {
                if cells[slot].in_basis.ncols() == 0 {
                    return DVector::zeros(cells[slot].in_basis.nrows());
                }
                &cells[slot].in_basis * &parents[slot]
            })
            .collect();
        for (slot, y) in pushed.into_iter().enumerate() {
            let id = cell_id(h2, level, slot);
            let mut offset = 0;
            for c in h2.child_slots(id) {
                let k = children[c].len();
                children[c] += y.rows(offset, k);
                offset += k;
            }
        }
    }
    let cells = &h2.levels[depth];
    let leaf_out: Vec<DVector<f64>> = (0..cells.len())
        .into_par_iter()
        .map(|slot| &cells[slot].in_basis * &u_in[depth][slot])
        .collect();
    for (slot, y) in leaf_out.into_iter().enumerate() {
        let r = h2.tree.target_range(cell_id(h2, depth, slot));
        for (dst, v) in us[r].iter_mut().zip(y.iter()) {
            *dst += v;
        }
    }
}

fn near_field(h2: &H2Matrix, ws: &[f64], us: &mut [f64]) {
    let depth = h2.tree.depth();
    let contributions: Vec<DVector<f64>> = h2
        .near
        .par_iter()
        .map(|b| {
            let mut gathered = Vec::with_capacity(b.matrix.ncols());
            for r in &b.ranges {
                gathered.extend_from_slice(&ws[r.clone()]);
            }
            &b.matrix * DVector::from_vec(gathered)
        })
        .collect();
    for (slot, y) in contributions.into_iter().enumerate() {
        let r = h2.tree.target_range(cell_id(h2, depth, slot));
        for (dst, v) in us[r].iter_mut().zip(y.iter()) {
            *dst += v;
        }
    }
}

/// `u = A w` by direct summation over all kernel entries.
pub fn dense_matvec(kernel: &KernelSpec, cloud: &PointCloud, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != cloud.num_sources() {
        return Err(NncaError::LengthMismatch {
            expected: cloud.num_sources(),
            actual: w.len(),
        });
    }
    if kernel.dim() != cloud.dim() {
        return Err(NncaError::DimensionMismatch {
            expected: kernel.dim(),
            actual: cloud.dim(),
        });
    }
    Ok((0..cloud.num_targets())
        .into_par_iter()
        .map(|i| {
            let x = cloud.target(i);
            w.iter()
                .enumerate()
                .map(|(j, wj)| kernel.evaluate(x, cloud.source(j)) * wj)
                .sum()
        })
        .collect())
}

/// Dense `u = A w` restricted to the target rows `rows`.
pub fn dense_matvec_rows(kernel: &KernelSpec, cloud: &PointCloud, w: &[f64], rows: &[usize]) -> Result<Vec<f64>> {
    if w.len() != cloud.num_sources() {
        return Err(NncaError::LengthMismatch {
            expected: cloud.num_sources(),
            actual: w.len(),
        });
    }
    Ok(rows
        .par_iter()
        .map(|&i| {
            let x = cloud.target(i);
            w.iter()
                .enumerate()
                .map(|(j, wj)| kernel.evaluate(x, cloud.source(j)) * wj)
                .sum()
        })
        .collect())
}

/// `|u - u_ref|_2 / |u_ref|_2`.
pub fn relative_error(u: &[f64], u_ref: &[f64]) -> Result<f64> {
    if u.len() != u_ref.len() {
        return Err(NncaError::LengthMismatch {
            expected: u_ref.len(),
            actual: u.len(),
        });
    }
    let norm = u_ref.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(NncaError::ZeroReference);
    }
    let diff = u.iter().zip(u_ref).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(diff / norm)
}
