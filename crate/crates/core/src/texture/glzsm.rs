//! Gray-level zone size matrix: 26-connected zones of equal level.

use crate::volume_io::{linear_index, voxel_count};

use super::quantize::QuantizedGrid;
use super::NEIGHBORS_26;

pub const GLZSM_FEATURES: usize = 11;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glzsm {
    levels: usize,
    max_size: usize,
    /// `levels × max_size`, entry `(i, s)` at `(i - 1) * max_size + (s - 1)`.
    counts: Vec<u64>,
    voxels: u64,
}

impl Glzsm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    /// Number of zones of gray level `level` with exactly `size` voxels.
    pub fn get(&self, level: usize, size: usize) -> u64 {
        if size == 0 || size > self.max_size {
            return 0;
        }
        self.counts[(level - 1) * self.max_size + (size - 1)]
    }

    pub fn zone_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// In-mask voxels the zones were grown over.
    pub fn voxels(&self) -> u64 {
        self.voxels
    }

    /// Builds the matrix from a list of `(level, size)` zones.
    pub fn from_zones(levels: usize, voxels: u64, zones: &[(usize, usize)]) -> Self {
        let max_size = zones.iter().map(|&(_, s)| s).max().unwrap_or(0);
        let mut counts = vec![0u64; levels * max_size];
        for &(level, size) in zones {
            counts[(level - 1) * max_size + (size - 1)] += 1;
        }
        Glzsm {
            levels,
            max_size,
            counts,
            voxels,
        }
    }
}

pub fn compute_glzsm(q: &QuantizedGrid) -> Glzsm {
    let dims = q.dims();
    let vals = q.values();
    let mut seen = vec![false; voxel_count(dims)];
    let mut zones = Vec::new();
    let mut stack = Vec::new();
    let mut voxels = 0u64;
    for start in 0..vals.len() {
        let level = vals[start];
        if level == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0usize;
        while let Some(idx) = stack.pop() {
            size += 1;
            let x = idx % dims[0];
            let y = (idx / dims[0]) % dims[1];
            let z = idx / (dims[0] * dims[1]);
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
                let j = linear_index(dims, nx as usize, ny as usize, nz as usize);
                if !seen[j] && vals[j] == level {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        voxels += size as u64;
        zones.push((level as usize, size));
    }
    Glzsm::from_zones(q.levels(), voxels, &zones)
}

/// SZE, LZE, LGZE, HGZE, SZLGE, SZHGE, LZLGE, LZHGE, GLNU, ZSNU, zone percentage.
pub fn glzsm_features(z: &Glzsm) -> [f64; GLZSM_FEATURES] {
    let nz = z.zone_count() as f64;
    if nz == 0.0 {
        return [0.0; GLZSM_FEATURES];
    }
    let mut f = [0.0; GLZSM_FEATURES];
    let mut per_size = vec![0.0; z.max_size];
    for level in 1..=z.levels {
        let i2 = (level * level) as f64;
        let mut per_level = 0.0;
        for size in 1..=z.max_size {
            let c = z.get(level, size) as f64;
            if c == 0.0 {
                continue;
            }
            let s2 = (size * size) as f64;
            f[0] += c / s2;
            f[1] += c * s2;
            f[2] += c / i2;
            f[3] += c * i2;
            f[4] += c / (i2 * s2);
            f[5] += c * i2 / s2;
            f[6] += c * s2 / i2;
            f[7] += c * i2 * s2;
            per_level += c;
            per_size[size - 1] += c;
        }
        f[8] += per_level * per_level;
    }
    f[9] = per_size.iter().map(|c| c * c).sum();
    for v in &mut f[..10] {
        *v /= nz;
    }
    f[10] = nz / z.voxels as f64;
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::RoiMask;

    #[test]
    fn single_zone_closed_form() {
        let mask = RoiMask::full([3, 2, 2]).unwrap();
        let q = QuantizedGrid::from_levels(32, vec![1; 12], mask).unwrap();
        let z = compute_glzsm(&q);
        assert_eq!(z.zone_count(), 1);
        assert_eq!(z.get(1, 12), 1);
        let n = 12.0f64;
        let f = glzsm_features(&z);
        let expected = [
            1.0 / (n * n),
            n * n,
            1.0,
            1.0,
            1.0 / (n * n),
            1.0 / (n * n),
            n * n,
            n * n,
            1.0,
            1.0,
            1.0 / n,
        ];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn diagonal_voxels_join_one_zone() {
        // (0,0,0) and (1,1,1) touch by a corner
        let mask = RoiMask::full([2, 2, 2]).unwrap();
        let vals = vec![1, 2, 2, 2, 2, 2, 2, 1];
        let q = QuantizedGrid::from_levels(2, vals, mask).unwrap();
        let z = compute_glzsm(&q);
        assert_eq!(z.get(1, 2), 1);
        assert_eq!(z.get(2, 6), 1);
        assert_eq!(z.zone_count(), 2);
    }

    #[test]
    fn all_distinct_neighbors_are_unit_zones() {
        let mask = RoiMask::full([2, 2, 1]).unwrap();
        let q = QuantizedGrid::from_levels(4, vec![1, 2, 3, 4], mask).unwrap();
        let f = glzsm_features(&compute_glzsm(&q));
        assert_eq!(f[10], 1.0);
        assert_eq!(f[0], 1.0);
    }
}
