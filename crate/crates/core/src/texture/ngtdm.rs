//! Neighborhood gray-tone difference matrix over the 26-neighborhood.

use crate::volume_io::linear_index;

use super::quantize::QuantizedGrid;
use super::NEIGHBORS_26;

pub const NGTDM_FEATURES: usize = 5;
/// Guard added to the coarseness denominator.
pub const COARSENESS_EPS: f64 = 1e-12;
/// Upper bound on coarseness so single-level regions stay finite.
pub const COARSENESS_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Ngtdm {
    /// Σ |level − neighborhood mean| per level (index `level - 1`).
    pub s: Vec<f64>,
    /// Number of counted voxels per level.
    pub n: Vec<u64>,
    /// Voxels with at least one in-mask neighbor.
    pub total: u64,
}

/// A voxel is counted only when at least one of its 26 neighbors is in the
/// mask; its neighborhood mean is taken over those in-mask neighbors.
pub fn compute_ngtdm(q: &QuantizedGrid) -> Ngtdm {
    let g = q.levels();
    let dims = q.dims();
    let vals = q.values();
    let mut s = vec![0.0; g];
    let mut n = vec![0u64; g];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let level = vals[linear_index(dims, x, y, z)];
                if level == 0 {
                    continue;
                }
                let (mut sum, mut count) = (0u64, 0u32);
                for d in &NEIGHBORS_26 {
                    let (nx, ny, nz) = (x as isize + d[0], y as isize + d[1], z as isize + d[2]);
                    if nx < 0
                        || ny < 0
                        || nz < 0
                        || nx as usize >= dims[0]
                        || ny as usize >= dims[1]
                        || nz as usize >= dims[2]
                    {
                        continue;
                    }
                    let v = vals[linear_index(dims, nx as usize, ny as usize, nz as usize)];
                    if v != 0 {
                        sum += v as u64;
                        count += 1;
                    }
                }
                if count == 0 {
                    continue;
                }
                let mean = sum as f64 / count as f64;
                let i = level as usize - 1;
                s[i] += (level as f64 - mean).abs();
                n[i] += 1;
            }
        }
    }
    let total = n.iter().sum();
    Ngtdm { s, n, total }
}

/// Coarseness, contrast, busyness, complexity, strength.
pub fn ngtdm_features(m: &Ngtdm) -> [f64; NGTDM_FEATURES] {
    let total = m.total as f64;
    let present: Vec<(f64, f64, f64)> = m
        .n
        .iter()
        .zip(&m.s)
        .enumerate()
        .filter(|(_, (&n, _))| n > 0)
        .map(|(i, (&n, &s))| ((i + 1) as f64, n as f64 / total, s))
        .collect();

    let weighted_s: f64 = present.iter().map(|&(_, p, s)| p * s).sum();
    let coarseness = (1.0 / (COARSENESS_EPS + weighted_s)).min(COARSENESS_CAP);
    let ng = present.len();
    if ng <= 1 {
        return [coarseness, 0.0, 0.0, 0.0, 0.0];
    }

    let s_total: f64 = m.s.iter().sum();
    let (mut pair_contrast, mut busy_denom, mut complexity, mut strength_num) = (0.0, 0.0, 0.0, 0.0);
    for &(i, pi, si) in &present {
        for &(j, pj, sj) in &present {
            let d = i - j;
            pair_contrast += pi * pj * d * d;
            busy_denom += (i * pi - j * pj).abs();
            complexity += d.abs() * (pi * si + pj * sj) / (pi + pj);
            strength_num += (pi + pj) * d * d;
        }
    }
    let contrast = pair_contrast / (ng * (ng - 1)) as f64 * (s_total / total);
    let busyness = if busy_denom > 0.0 { weighted_s / busy_denom } else { 0.0 };
    let complexity = complexity / total;
    let strength = if s_total > 0.0 { strength_num / s_total } else { 0.0 };
    [coarseness, contrast, busyness, complexity, strength]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::RoiMask;

    #[test]
    fn constant_grid() {
        let mask = RoiMask::full([3, 3, 3]).unwrap();
        let q = QuantizedGrid::from_levels(4, vec![1; 27], mask).unwrap();
        let m = compute_ngtdm(&q);
        assert_eq!(m.total, 27);
        assert_eq!(ngtdm_features(&m), [COARSENESS_CAP, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn checkerboard_tile_is_balanced() {
        let mask = RoiMask::full([2, 2, 2]).unwrap();
        let vals = (0..8u16)
            .map(|i| {
                let (x, y, z) = (i % 2, (i / 2) % 2, i / 4);
                1 + (x + y + z) % 2
            })
            .collect();
        let q = QuantizedGrid::from_levels(2, vals, mask).unwrap();
        let m = compute_ngtdm(&q);
        assert_eq!(m.n, vec![4, 4]);
        assert!((m.s[0] - m.s[1]).abs() < 1e-12);
        // each voxel: 3 face neighbors of the other level, 3 edge of the
        // same, 1 corner of the other → mean differs by 4/7
        assert!((m.s[0] - 4.0 * 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_voxel_not_counted() {
        let mask = RoiMask::new([3, 1, 1], vec![true, false, true]).unwrap();
        let q = QuantizedGrid::from_levels(2, vec![1, 0, 2], mask).unwrap();
        let m = compute_ngtdm(&q);
        assert_eq!(m.total, 0);
        assert!(ngtdm_features(&m).iter().all(|v| v.is_finite()));
    }
}
