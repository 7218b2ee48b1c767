//! 3D gray-level co-occurrence matrices and the 19 Haralick-style statistics
//! averaged over 13 directions × 4 distances.

use crate::error::{Error, Result};
use crate::volume_io::{linear_index, Dims};

use super::quantize::QuantizedGrid;
use super::xlog2x;

/// The 13 unique 3D directions (one of each ± pair).
pub const DIRECTIONS: [[isize; 3]; 13] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [1, 0, 1],
    [1, 0, -1],
    [0, 1, 1],
    [0, 1, -1],
    [1, 1, 1],
    [1, -1, 1],
    [1, 1, -1],
    [1, -1, -1],
];

/// Step multiples applied to each direction vector.
pub const DISTANCES: [usize; 4] = [1, 2, 3, 4];

pub const GLCM_FEATURES: usize = 19;

/// Symmetric `levels × levels` matrix, row-major, level `i` at index `i - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    matrix: Vec<f64>,
    normalized: bool,
}

impl Glcm {
    /// Wraps an explicit matrix. It must be square, non-negative and symmetric.
    pub fn from_matrix(levels: usize, matrix: Vec<f64>) -> Result<Self> {
        if levels == 0 || matrix.len() != levels * levels {
            return Err(Error::Shape(format!(
                "{} entries do not form a {levels}x{levels} matrix",
                matrix.len()
            )));
        }
        if matrix.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Argument("matrix entries must be finite and >= 0".into()));
        }
        for i in 0..levels {
            for j in 0..i {
                if matrix[i * levels + j] != matrix[j * levels + i] {
                    return Err(Error::Argument("matrix is not symmetric".into()));
                }
            }
        }
        let sum: f64 = matrix.iter().sum();
        Ok(Glcm {
            levels,
            normalized: (sum - 1.0).abs() <= 1e-9,
            matrix,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i - 1) * self.levels + (j - 1)]
    }

    pub fn total(&self) -> f64 {
        self.matrix.iter().sum()
    }

    /// Scales to unit mass; `None` when the matrix is empty.
    pub fn normalize(&self) -> Option<Glcm> {
        let total = self.total();
        if total <= 0.0 {
            return None;
        }
        Some(Glcm {
            levels: self.levels,
            matrix: self.matrix.iter().map(|&v| v / total).collect(),
            normalized: true,
        })
    }
}

fn step(dims: Dims, x: usize, y: usize, z: usize, d: [isize; 3]) -> Option<usize> {
    let nx = x as isize + d[0];
    let ny = y as isize + d[1];
    let nz = z as isize + d[2];
    if nx < 0 || ny < 0 || nz < 0 {
        return None;
    }
    let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
    (nx < dims[0] && ny < dims[1] && nz < dims[2]).then(|| linear_index(dims, nx, ny, nz))
}

/// Raw symmetric pair counts for one offset (each unordered pair adds 1 to
/// `(a, b)` and 1 to `(b, a)`).
pub fn glcm_counts(q: &QuantizedGrid, direction: [isize; 3], distance: usize) -> Glcm {
    let g = q.levels();
    let dims = q.dims();
    let vals = q.values();
    let offset = direction.map(|c| c * distance as isize);
    let mut counts = vec![0u64; g * g];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let a = vals[linear_index(dims, x, y, z)];
                if a == 0 {
                    continue;
                }
                let Some(j) = step(dims, x, y, z, offset) else { continue };
                let b = vals[j];
                if b == 0 {
                    continue;
                }
                let (a, b) = (a as usize - 1, b as usize - 1);
                counts[a * g + b] += 1;
                counts[b * g + a] += 1;
            }
        }
    }
    Glcm {
        levels: g,
        matrix: counts.into_iter().map(|c| c as f64).collect(),
        normalized: false,
    }
}

/// Normalized GLCM for one offset, or `None` when no in-mask pair exists.
pub fn compute_glcm(q: &QuantizedGrid, direction: [isize; 3], distance: usize) -> Option<Glcm> {
    glcm_counts(q, direction, distance).normalize()
}

/// The 19 statistics of a normalized GLCM, in output order:
/// ASM, contrast, correlation, sum of squares variance, homogeneity,
/// sum average, sum variance, sum entropy, entropy, difference variance,
/// difference entropy, IMC1, IMC2, autocorrelation, dissimilarity,
/// cluster shade, cluster prominence, maximum probability, inverse difference.
pub fn glcm_features(m: &Glcm) -> [f64; GLCM_FEATURES] {
    let g = m.levels;
    let p = |i: usize, j: usize| m.matrix[i * g + j];
    // level of index i is i + 1
    let lv = |i: usize| (i + 1) as f64;

    let mut px = vec![0.0; g];
    for i in 0..g {
        for j in 0..g {
            px[i] += p(i, j);
        }
    }
    // symmetric: py == px
    let mu: f64 = (0..g).map(|i| lv(i) * px[i]).sum();
    let var: f64 = (0..g).map(|i| (lv(i) - mu).powi(2) * px[i]).sum();

    let mut p_sum = vec![0.0; 2 * g + 1]; // index k = i + j (levels), 2..=2g
    let mut p_diff = vec![0.0; g]; // index k = |i - j|
    let (mut asm, mut contrast, mut homogeneity, mut entropy) = (0.0, 0.0, 0.0, 0.0);
    let (mut autocorr, mut dissim, mut shade, mut prominence) = (0.0, 0.0, 0.0, 0.0);
    let (mut max_p, mut inv_diff, mut hxy1, mut hxy2) = (0.0f64, 0.0, 0.0, 0.0);
    for i in 0..g {
        for j in 0..g {
            let v = p(i, j);
            let (a, b) = (lv(i), lv(j));
            let d = (a - b).abs();
            let pxy = px[i] * px[j];
            if pxy > 0.0 {
                hxy1 -= v * pxy.log2();
                hxy2 -= xlog2x(pxy);
            }
            if v == 0.0 {
                continue;
            }
            p_sum[i + j + 2] += v;
            p_diff[i.abs_diff(j)] += v;
            asm += v * v;
            contrast += d * d * v;
            homogeneity += v / (1.0 + d * d);
            entropy -= xlog2x(v);
            autocorr += a * b * v;
            dissim += d * v;
            let c = a + b - 2.0 * mu;
            shade += c * c * c * v;
            prominence += c * c * c * c * v;
            max_p = max_p.max(v);
            inv_diff += v / (1.0 + d);
        }
    }

    let correlation = if var > 0.0 { (autocorr - mu * mu) / var } else { 0.0 };

    let sum_average: f64 = (2..=2 * g).map(|k| k as f64 * p_sum[k]).sum();
    let sum_variance: f64 = (2..=2 * g)
        .map(|k| (k as f64 - sum_average).powi(2) * p_sum[k])
        .sum();
    let sum_entropy: f64 = -(2..=2 * g).map(|k| xlog2x(p_sum[k])).sum::<f64>();
    let diff_mean: f64 = (0..g).map(|k| k as f64 * p_diff[k]).sum();
    let diff_variance: f64 = (0..g).map(|k| (k as f64 - diff_mean).powi(2) * p_diff[k]).sum();
    let diff_entropy: f64 = -(0..g).map(|k| xlog2x(p_diff[k])).sum::<f64>();

    let hx: f64 = -px.iter().map(|&v| xlog2x(v)).sum::<f64>();
    let imc1 = if hx > 0.0 { (entropy - hxy1) / hx } else { 0.0 };
    // entropies are in bits, so exp(-2 H_nats) = 2^(-2 H_bits)
    let imc2 = (1.0 - (-2.0 * (hxy2 - entropy)).exp2()).clamp(0.0, 1.0).sqrt();

    [
        asm,
        contrast,
        correlation,
        var,
        homogeneity,
        sum_average,
        sum_variance,
        sum_entropy,
        entropy,
        diff_variance,
        diff_entropy,
        imc1,
        imc2,
        autocorr,
        dissim,
        shade,
        prominence,
        max_p,
        inv_diff,
    ]
}

/// Unweighted mean of [`glcm_features`] over every non-empty GLCM of the
/// 13 × 4 offset grid. Also returns how many matrices contributed.
pub fn aggregate_glcm_features_counted(q: &QuantizedGrid) -> Result<([f64; GLCM_FEATURES], usize)> {
    let mut acc = [0.0; GLCM_FEATURES];
    let mut used = 0usize;
    for &dir in &DIRECTIONS {
        for &dist in &DISTANCES {
            if let Some(m) = compute_glcm(q, dir, dist) {
                for (a, f) in acc.iter_mut().zip(glcm_features(&m)) {
                    *a += f;
                }
                used += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::Region("no voxel pair inside the mask for any GLCM offset".into()));
    }
    Ok((acc.map(|a| a / used as f64), used))
}

pub fn aggregate_glcm_features(q: &QuantizedGrid) -> Result<[f64; GLCM_FEATURES]> {
    aggregate_glcm_features_counted(q).map(|(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::RoiMask;

    #[test]
    fn one_symmetric_pair() {
        let q = QuantizedGrid::from_levels(2, vec![1, 2], RoiMask::full([2, 1, 1]).unwrap()).unwrap();
        let m = compute_glcm(&q, [1, 0, 0], 1).unwrap();
        assert_eq!(m.matrix(), &[0.0, 0.5, 0.5, 0.0]);
        assert!(compute_glcm(&q, [0, 1, 0], 1).is_none());
    }

    #[test]
    fn point_mass_features() {
        let m = Glcm::from_matrix(3, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let f = glcm_features(&m);
        assert_eq!(f[0], 1.0); // ASM
        assert_eq!(f[1], 0.0); // contrast
        assert_eq!(f[8], 0.0); // entropy
        assert_eq!(f[14], 0.0); // dissimilarity
        assert_eq!(f[17], 1.0); // max probability
        assert!(f.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn uniform_matrix() {
        let g = 4;
        let m = Glcm::from_matrix(g, vec![1.0 / 16.0; 16]).unwrap();
        let f = glcm_features(&m);
        assert!((f[0] - 1.0 / 16.0).abs() < 1e-15);
        assert!((f[8] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        assert!(Glcm::from_matrix(2, vec![0.5, 0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn tiny_grid_uses_only_reachable_offsets() {
        // 3³: distances >= 3 leave the grid, so only 13 × 2 matrices exist
        let mask = RoiMask::full([3; 3]).unwrap();
        let vals = (0..27).map(|i| (i % 3 + 1) as u16).collect();
        let q = QuantizedGrid::from_levels(3, vals, mask).unwrap();
        let (_, used) = aggregate_glcm_features_counted(&q).unwrap();
        assert_eq!(used, 26);
    }
}
