use std::collections::BTreeSet;
use std::f64::consts::SQRT_2;

use nnca::cloud::{uniform_grid, uniform_random};
use nnca::{CellId, HierTree, PointCloud};

/// Admissibility of two same-level cells from their grid offsets alone: the
/// gap along each axis is `max(|di| - 1, 0)` cell widths.
fn offset_admissible(a: &[usize], b: &[usize], eta: f64) -> bool {
    let dim = a.len() as f64;
    let gap2: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let g = (x as f64 - y as f64).abs() - 1.0;
            g.max(0.0).powi(2)
        })
        .sum();
    dim.sqrt() <= eta * gap2.sqrt() * (1.0 + 1e-10)
}

/// Neighbour and interaction lists by enumerating every cell of the level.
fn brute_force_lists(tree: &HierTree, id: CellId, eta: f64) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let me = tree.multi_index(id);
    let parent_index: Vec<usize> = me.iter().map(|i| i / 2).collect();
    let mut near = BTreeSet::new();
    let mut far = BTreeSet::new();
    for code in 0..tree.cells_at_level(id.level) {
        let other = tree.multi_index(CellId { level: id.level, code });
        let parent: Vec<usize> = other.iter().map(|i| i / 2).collect();
        let parents_touch = id.level == 1 || !offset_admissible(&parent_index, &parent, eta);
        if !parents_touch {
            continue;
        }
        if offset_admissible(&me, &other, eta) {
            far.insert(code);
        } else {
            near.insert(code);
        }
    }
    (near, far)
}

fn check_tree(tree: &HierTree, eta: f64) {
    for level in 1..=tree.depth() {
        for &code in tree.occupied(level) {
            let code = code as usize;
            let id = CellId { level, code };
            let near: BTreeSet<usize> = tree.neighbors(id).iter().map(|&c| c as usize).collect();
            let far: BTreeSet<usize> = tree.interaction_list(id).iter().map(|&c| c as usize).collect();
            let (near_ref, far_ref) = brute_force_lists(tree, id, eta);
            assert_eq!(near, near_ref, "neighbours of {id:?}");
            assert_eq!(far, far_ref, "interaction list of {id:?}");
            assert!(near.contains(&code));
            for &y in far.iter().filter(|&&y| tree.slot(CellId { level, code: y }).is_some()) {
                let back: Vec<u32> = tree.interaction_list(CellId { level, code: y }).to_vec();
                assert!(back.contains(&(code as u32)));
            }
        }
    }
}

#[test]
fn lists_match_enumeration_in_2d() {
    let cloud = PointCloud::shared(2, uniform_random(3000, 2, 4)).unwrap();
    let tree = HierTree::build(&cloud, 16, SQRT_2).unwrap();
    assert!(tree.depth() >= 3);
    check_tree(&tree, SQRT_2);
}

#[test]
fn lists_match_enumeration_in_3d() {
    let cloud = PointCloud::shared(3, uniform_random(3000, 3, 5)).unwrap();
    let tree = HierTree::build(&cloud, 64, SQRT_2).unwrap();
    assert!(tree.depth() >= 2);
    check_tree(&tree, SQRT_2);
}

#[test]
fn lists_match_enumeration_for_wider_eta() {
    let cloud = PointCloud::shared(2, uniform_random(2000, 2, 6)).unwrap();
    let tree = HierTree::build(&cloud, 8, 3.0).unwrap();
    check_tree(&tree, 3.0);
}

#[test]
fn interior_list_sizes_in_2d() {
    let cloud = PointCloud::shared(2, uniform_grid(64, 2)).unwrap();
    let tree = HierTree::build(&cloud, 16, SQRT_2).unwrap();
    assert_eq!(tree.depth(), 4);
    for level in 2..=tree.depth() {
        let side = 1usize << level;
        for code in 0..tree.cells_at_level(level) {
            let id = CellId { level, code };
            let idx = tree.multi_index(id);
            if idx.iter().all(|&i| i >= 2 && i + 2 < side) {
                assert_eq!(tree.neighbors(id).len(), 9);
                assert_eq!(tree.interaction_list(id).len(), 27);
            }
        }
    }
}

#[test]
fn interior_list_sizes_in_3d() {
    // With the exact cube distance, offsets such as (2, 0, 0) leave a gap of
    // one cell width, which is below diam / eta = sqrt(3 / 2) widths. Such
    // cells stay neighbours, giving 81 neighbours and 567 far cells.
    let cloud = PointCloud::shared(3, uniform_grid(32, 3)).unwrap();
    let tree = HierTree::build(&cloud, 8, SQRT_2).unwrap();
    assert_eq!(tree.depth(), 4);
    let id = (0..tree.cells_at_level(4))
        .map(|code| CellId { level: 4, code })
        .find(|&id| tree.multi_index(id) == vec![8, 8, 8])
        .unwrap();
    assert_eq!(tree.neighbors(id).len(), 81);
    assert_eq!(tree.interaction_list(id).len(), 567);
}

#[test]
fn children_partition_parent_indices() {
    let cloud = PointCloud::new(2, uniform_random(1500, 2, 8), uniform_random(900, 2, 9)).unwrap();
    let tree = HierTree::build(&cloud, 20, SQRT_2).unwrap();
    for level in 0..tree.depth() {
        for &code in tree.occupied(level) {
            let id = CellId { level, code: code as usize };
            let mut t: Vec<usize> = tree.children(id).flat_map(|c| tree.targets(c).to_vec()).collect();
            let mut s: Vec<usize> = tree.children(id).flat_map(|c| tree.sources(c).to_vec()).collect();
            let mut pt = tree.targets(id).to_vec();
            let mut ps = tree.sources(id).to_vec();
            t.sort_unstable();
            s.sort_unstable();
            pt.sort_unstable();
            ps.sort_unstable();
            assert_eq!(t, pt);
            assert_eq!(s, ps);
        }
    }
    for &code in tree.occupied(tree.depth()) {
        let id = CellId { level: tree.depth(), code: code as usize };
        assert!(tree.targets(id).len() <= 20 && tree.sources(id).len() <= 20);
    }
}
