//! Ground-truth-based performance scores: DSC, MSD, HD and HD95, both
//! volumetric and per axial slice, in millimeters.
//!
//! Boundaries are foreground voxel centers with at least one background
//! face-neighbor (6-connectivity in 3D, 4 in 2D); array-border voxels
//! count as boundary. Distances are Euclidean over `index * spacing`.
//!
//! Nearest-neighbor queries sort one point set along its widest axis and
//! expand outward from the insertion point, pruning once the axis gap
//! alone exceeds the best squared distance. The arithmetic is identical
//! to the all-pairs scan, so results match a brute-force oracle exactly.

use crate::error::{Error, Result};
use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMetrics {
    pub dsc: f64,
    pub msd_mm: Option<f64>,
    pub hd_mm: Option<f64>,
    pub hd95_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceMetrics {
    pub slice_index: usize,
    pub n_fg_gt: usize,
    pub dsc: f64,
    pub hd_mm: Option<f64>,
    pub msd_mm: Option<f64>,
    pub hd95_mm: Option<f64>,
}

/// Dice over full volumes. Both empty -> 1.0.
pub fn dice(a: &Volume, b: &Volume) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::DimsMismatch(format!("{:?} vs {:?}", a.dims, b.dims)));
    }
    Ok(dice_slices(&a.data, &b.data))
}

/// Dice over raw binary slices/buffers of equal length.
pub fn dice_slices(a: &[f32], b: &[f32]) -> f64 {
    let mut na = 0usize;
    let mut nb = 0usize;
    let mut inter = 0usize;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let fa = x != 0.0;
        let fb = y != 0.0;
        na += fa as usize;
        nb += fb as usize;
        inter += (fa && fb) as usize;
    }
    if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    }
}

/// Centers of FG voxels with a BG face-neighbor (or on the array border),
/// in mm.
pub fn boundary_points(mask: &Volume, spacing: (f64, f64, f64)) -> Result<Vec<[f64; 3]>> {
    let (nz, ny, nx) = mask.dims;
    let mut pts = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.get(z, y, x) == 0.0 {
                    continue;
                }
                let on_border = z == 0
                    || z == nz - 1
                    || y == 0
                    || y == ny - 1
                    || x == 0
                    || x == nx - 1;
                let is_boundary = on_border
                    || mask.get(z - 1, y, x) == 0.0
                    || mask.get(z + 1, y, x) == 0.0
                    || mask.get(z, y - 1, x) == 0.0
                    || mask.get(z, y + 1, x) == 0.0
                    || mask.get(z, y, x - 1) == 0.0
                    || mask.get(z, y, x + 1) == 0.0;
                if is_boundary {
                    pts.push([z as f64 * spacing.0, y as f64 * spacing.1, x as f64 * spacing.2]);
                }
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(pts)
}

/// 2D variant on one axial slice: 4-connectivity, in-plane spacing (sy, sx).
pub fn boundary_points_2d(
    slice: &[f32],
    dims: (usize, usize),
    spacing: (f64, f64),
) -> Vec<[f64; 3]> {
    let (ny, nx) = dims;
    let at = |y: usize, x: usize| slice[y * nx + x];
    let mut pts = Vec::new();
    for y in 0..ny {
        for x in 0..nx {
            if at(y, x) == 0.0 {
                continue;
            }
            let is_boundary = y == 0
                || y == ny - 1
                || x == 0
                || x == nx - 1
                || at(y - 1, x) == 0.0
                || at(y + 1, x) == 0.0
                || at(y, x - 1) == 0.0
                || at(y, x + 1) == 0.0;
            if is_boundary {
                pts.push([0.0, y as f64 * spacing.0, x as f64 * spacing.1]);
            }
        }
    }
    pts
}

fn widest_axis(pts: &[[f64; 3]]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut best = 0;
    for k in 1..3 {
        if hi[k] - lo[k] > hi[best] - lo[best] {
            best = k;
        }
    }
    best
}

/// Squared nearest distance from each point of `from` to the set `to`.
pub fn nearest_sq_distances(from: &[[f64; 3]], to: &[[f64; 3]]) -> Vec<f64> {
    let axis = widest_axis(to);
    let mut sorted: Vec<[f64; 3]> = to.to_vec();
    sorted.sort_by(|a, b| a[axis].partial_cmp(&b[axis]).unwrap());
    let n = sorted.len();

    from.iter()
        .map(|p| {
            let key = p[axis];
            let start = sorted.partition_point(|q| q[axis] < key);
            let mut best = f64::INFINITY;
            let d2 = |q: &[f64; 3]| {
                let dz = p[0] - q[0];
                let dy = p[1] - q[1];
                let dx = p[2] - q[2];
                dz * dz + dy * dy + dx * dx
            };
            let mut up = start;
            let mut down = start;
            loop {
                let mut advanced = false;
                if up < n {
                    let gap = sorted[up][axis] - key;
                    if gap * gap <= best {
                        best = best.min(d2(&sorted[up]));
                        up += 1;
                        advanced = true;
                    } else {
                        up = n;
                    }
                }
                if down > 0 {
                    let gap = key - sorted[down - 1][axis];
                    if gap * gap <= best {
                        best = best.min(d2(&sorted[down - 1]));
                        down -= 1;
                        advanced = true;
                    } else {
                        down = 0;
                    }
                }
                if !advanced && up >= n && down == 0 {
                    break;
                }
            }
            best
        })
        .collect()
}

/// (HD, MSD, HD95) in mm between two boundary point sets.
pub fn surface_distances_points(a: &[[f64; 3]], b: &[[f64; 3]]) -> (f64, f64, f64) {
    let mut all: Vec<f64> = nearest_sq_distances(a, b)
        .into_iter()
        .chain(nearest_sq_distances(b, a))
        .map(f64::sqrt)
        .collect();
    let hd = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let msd = all.iter().sum::<f64>() / all.len() as f64;
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let rank = ((0.95 * all.len() as f64).ceil() as usize).max(1);
    let hd95 = all[rank - 1];
    (hd, msd, hd95)
}

/// 3D surface distances between two nonempty masks on the same grid.
pub fn surface_distances(a: &Volume, b: &Volume, spacing: (f64, f64, f64)) -> Result<(f64, f64, f64)> {
    if a.dims != b.dims {
        return Err(Error::DimsMismatch(format!("{:?} vs {:?}", a.dims, b.dims)));
    }
    let pa = boundary_points(a, spacing)?;
    let pb = boundary_points(b, spacing)?;
    Ok(surface_distances_points(&pa, &pb))
}

/// Volumetric DSC + surface distances. One-empty: dsc 0, distances
/// undefined. Both-empty: dsc 1, distances 0.
pub fn volume_metrics(gt: &Volume, pred: &Volume, spacing: (f64, f64, f64)) -> Result<VolumeMetrics> {
    let dsc = dice(gt, pred)?;
    let gt_empty = gt.foreground_count() == 0;
    let pred_empty = pred.foreground_count() == 0;
    if gt_empty && pred_empty {
        return Ok(VolumeMetrics { dsc: 1.0, msd_mm: Some(0.0), hd_mm: Some(0.0), hd95_mm: Some(0.0) });
    }
    if gt_empty || pred_empty {
        return Ok(VolumeMetrics { dsc: 0.0, msd_mm: None, hd_mm: None, hd95_mm: None });
    }
    let (hd, msd, hd95) = surface_distances(gt, pred, spacing)?;
    Ok(VolumeMetrics { dsc, msd_mm: Some(msd), hd_mm: Some(hd), hd95_mm: Some(hd95) })
}

/// Per-axial-slice 2D metrics on every slice where GT has foreground.
/// In-plane spacing is (sy, sx).
pub fn slice_metrics(gt: &Volume, pred: &Volume, spacing: (f64, f64, f64)) -> Result<Vec<SliceMetrics>> {
    if gt.dims != pred.dims {
        return Err(Error::DimsMismatch(format!("{:?} vs {:?}", gt.dims, pred.dims)));
    }
    let (nz, ny, nx) = gt.dims;
    let inplane = (spacing.1, spacing.2);
    let mut out = Vec::new();
    for z in 0..nz {
        let gs = gt.slice(z);
        let n_fg_gt = gs.iter().filter(|&&v| v != 0.0).count();
        if n_fg_gt == 0 {
            continue;
        }
        let ps = pred.slice(z);
        let dsc = dice_slices(gs, ps);
        let pred_fg = ps.iter().any(|&v| v != 0.0);
        let (hd, msd, hd95) = if pred_fg {
            let pa = boundary_points_2d(gs, (ny, nx), inplane);
            let pb = boundary_points_2d(ps, (ny, nx), inplane);
            let (hd, msd, hd95) = surface_distances_points(&pa, &pb);
            (Some(hd), Some(msd), Some(hd95))
        } else {
            (None, None, None)
        };
        out.push(SliceMetrics { slice_index: z, n_fg_gt, dsc, hd_mm: hd, msd_mm: msd, hd95_mm: hd95 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::ElementKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mask(dims: (usize, usize, usize), fg: &[(usize, usize, usize)]) -> Volume {
        let mut v = Volume::zeros(dims, (1.0, 1.0, 1.0), ElementKind::Uint8);
        for &(z, y, x) in fg {
            v.set(z, y, x, 1.0);
        }
        v
    }

    /// All-pairs reference for nearest distances; same arithmetic as the
    /// accelerated path (min over squared distances, sqrt once).
    fn brute_force_distances(a: &[[f64; 3]], b: &[[f64; 3]]) -> (f64, f64, f64) {
        let one_way = |from: &[[f64; 3]], to: &[[f64; 3]]| -> Vec<f64> {
            from.iter()
                .map(|p| {
                    to.iter()
                        .map(|q| {
                            let dz = p[0] - q[0];
                            let dy = p[1] - q[1];
                            let dx = p[2] - q[2];
                            dz * dz + dy * dy + dx * dx
                        })
                        .fold(f64::INFINITY, f64::min)
                        .sqrt()
                })
                .collect()
        };
        let mut all = one_way(a, b);
        all.extend(one_way(b, a));
        let hd = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let msd = all.iter().sum::<f64>() / all.len() as f64;
        all.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let rank = ((0.95 * all.len() as f64).ceil() as usize).max(1);
        (hd, msd, all[rank - 1])
    }

    #[test]
    fn dice_basic() {
        let a = mask((2, 2, 2), &[(0, 0, 0), (0, 0, 1)]);
        let b = mask((2, 2, 2), &[(0, 0, 1)]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let disjoint = mask((2, 2, 2), &[(1, 1, 1)]);
        assert_eq!(dice(&a, &disjoint).unwrap(), 0.0);
        assert!((dice(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // both empty
        let e = mask((2, 2, 2), &[]);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn boundary_of_single_voxel_and_solid_block() {
        let single = mask((5, 5, 5), &[(2, 3, 4)]);
        let pts = boundary_points(&single, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(pts, vec![[2.0, 3.0, 4.0]]);

        let mut block = Volume::zeros((5, 5, 5), (1.0, 1.0, 1.0), ElementKind::Uint8);
        for z in 1..4 {
            for y in 1..4 {
                for x in 1..4 {
                    block.set(z, y, x, 1.0);
                }
            }
        }
        let pts = boundary_points(&block, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(pts.len(), 26); // 27 minus fully interior center

        let full = mask((3, 3, 3), &(0..27).map(|i| (i / 9, (i / 3) % 3, i % 3)).collect::<Vec<_>>());
        let pts = boundary_points(&full, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(pts.len(), 26); // all but the center voxel touch the border
    }

    #[test]
    fn empty_mask_is_error() {
        let e = mask((2, 2, 2), &[]);
        assert!(matches!(boundary_points(&e, (1.0, 1.0, 1.0)), Err(Error::EmptyMask)));
    }

    #[test]
    fn identical_masks_have_zero_distances() {
        let a = mask((4, 4, 4), &[(1, 1, 1), (1, 1, 2), (2, 2, 2)]);
        let (hd, msd, hd95) = surface_distances(&a, &a, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!((hd, msd, hd95), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_voxels_four_apart_in_promise_spacing() {
        let a = mask((1, 1, 8), &[(0, 0, 0)]);
        let b = mask((1, 1, 8), &[(0, 0, 4)]);
        let (hd, msd, hd95) = surface_distances(&a, &b, (3.6, 0.625, 0.625)).unwrap();
        assert!((hd - 2.5).abs() < 1e-12);
        assert!((msd - 2.5).abs() < 1e-12);
        assert!((hd95 - 2.5).abs() < 1e-12);
    }

    fn random_mask(rng: &mut ChaCha8Rng, dims: (usize, usize, usize)) -> Volume {
        let mut v = Volume::zeros(dims, (3.6, 0.625, 0.625), ElementKind::Uint8);
        // a random box plus scattered voxels so boundaries are nontrivial
        let (nz, ny, nx) = dims;
        let z0 = rng.gen_range(0..nz);
        let z1 = rng.gen_range(z0..nz);
        let y0 = rng.gen_range(0..ny);
        let y1 = rng.gen_range(y0..ny);
        let x0 = rng.gen_range(0..nx);
        let x1 = rng.gen_range(x0..nx);
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    v.set(z, y, x, 1.0);
                }
            }
        }
        for _ in 0..rng.gen_range(1..10) {
            v.set(rng.gen_range(0..nz), rng.gen_range(0..ny), rng.gen_range(0..nx), 1.0);
        }
        v
    }

    #[test]
    fn accelerated_matches_brute_force_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let dims = (rng.gen_range(2..=12), rng.gen_range(2..=16), rng.gen_range(2..=16));
            let a = random_mask(&mut rng, dims);
            let b = random_mask(&mut rng, dims);
            let sp = (3.6, 0.625, 0.625);
            let pa = boundary_points(&a, sp).unwrap();
            let pb = boundary_points(&b, sp).unwrap();
            let fast = surface_distances_points(&pa, &pb);
            let slow = brute_force_distances(&pa, &pb);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn metrics_are_symmetric_and_scale_with_spacing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_mask(&mut rng, (6, 10, 10));
        let b = random_mask(&mut rng, (6, 10, 10));
        let sp = (3.6, 0.625, 0.625);
        let ab = surface_distances(&a, &b, sp).unwrap();
        let ba = surface_distances(&b, &a, sp).unwrap();
        assert_eq!(ab.0, ba.0);
        assert_eq!(ab.2, ba.2);
        // MSD sums the two directions in opposite order
        assert!((ab.1 - ba.1).abs() < 1e-12);
        assert!(ab.2 <= ab.0); // hd95 <= hd
        assert!(ab.1 <= ab.0); // msd <= hd
        let doubled = surface_distances(&a, &b, (7.2, 1.25, 1.25)).unwrap();
        assert!((doubled.0 - 2.0 * ab.0).abs() < 1e-12);
        assert!((doubled.1 - 2.0 * ab.1).abs() < 1e-12);
        assert!((doubled.2 - 2.0 * ab.2).abs() < 1e-12);
    }

    #[test]
    fn volume_metrics_conventions() {
        let g = mask((3, 3, 3), &[(1, 1, 1)]);
        let m = volume_metrics(&g, &g, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(m.dsc, 1.0);
        assert_eq!(m.hd_mm, Some(0.0));

        let e = mask((3, 3, 3), &[]);
        let m = volume_metrics(&g, &e, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(m.dsc, 0.0);
        assert_eq!(m.hd_mm, None);

        let m = volume_metrics(&e, &e, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(m.dsc, 1.0);
        assert_eq!(m.hd_mm, Some(0.0));
    }

    #[test]
    fn slice_metrics_match_direct_2d_computation() {
        let gt = mask((4, 6, 6), &[(1, 2, 2), (1, 2, 3), (2, 3, 3)]);
        let pred = mask((4, 6, 6), &[(1, 2, 3), (2, 3, 3), (3, 1, 1)]);
        let sp = (3.6, 0.625, 0.625);
        let sm = slice_metrics(&gt, &pred, sp).unwrap();
        // only slices 1 and 2 have GT foreground
        assert_eq!(sm.iter().map(|s| s.slice_index).collect::<Vec<_>>(), vec![1, 2]);
        assert!((sm[0].dsc - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(sm[1].dsc, 1.0);
        assert_eq!(sm[1].hd_mm, Some(0.0));

        let pa = boundary_points_2d(gt.slice(1), (6, 6), (sp.1, sp.2));
        let pb = boundary_points_2d(pred.slice(1), (6, 6), (sp.1, sp.2));
        let (hd, msd, hd95) = surface_distances_points(&pa, &pb);
        assert_eq!(sm[0].hd_mm, Some(hd));
        assert_eq!(sm[0].msd_mm, Some(msd));
        assert_eq!(sm[0].hd95_mm, Some(hd95));
    }

    #[test]
    fn identical_volumes_give_perfect_slices() {
        let gt = mask((3, 4, 4), &[(0, 1, 1), (1, 2, 2), (2, 3, 3)]);
        let sm = slice_metrics(&gt, &gt, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(sm.len(), 3);
        for s in sm {
            assert_eq!(s.dsc, 1.0);
            assert_eq!(s.hd_mm, Some(0.0));
        }
    }

    #[test]
    fn empty_pred_slice_has_undefined_distances() {
        let gt = mask((2, 4, 4), &[(0, 1, 1)]);
        let pred = mask((2, 4, 4), &[]);
        let sm = slice_metrics(&gt, &pred, (1.0, 1.0, 1.0)).unwrap();
        assert_eq!(sm.len(), 1);
        assert_eq!(sm[0].dsc, 0.0);
        assert_eq!(sm[0].hd_mm, None);
    }

    #[test]
    fn translation_invariance() {
        let a = mask((6, 6, 6), &[(1, 1, 1), (1, 2, 1), (2, 1, 1)]);
        let b = mask((6, 6, 6), &[(1, 1, 2), (2, 2, 2)]);
        let at = mask((6, 6, 6), &[(2, 3, 2), (2, 4, 2), (3, 3, 2)]);
        let bt = mask((6, 6, 6), &[(2, 3, 3), (3, 4, 3)]);
        let sp = (2.0, 1.0, 1.0);
        assert_eq!(surface_distances(&a, &b, sp).unwrap(), surface_distances(&at, &bt, sp).unwrap());
        assert_eq!(dice(&a, &b).unwrap(), dice(&at, &bt).unwrap());
    }
}
