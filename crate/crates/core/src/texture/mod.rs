//! The 41 texture quantifiers (6 histogram, 19 GLCM, 5 NGTDM, 11 GLZSM) and
//! their assembly into ROI descriptors (SRF) and feature-map descriptors (DRF).

mod glcm;
mod glzsm;
mod histogram;
mod ngtdm;
mod quantize;

use std::fmt;
use std::ops::Index;

use rayon::prelude::*;

use crate::conv3d::FeatureMapStack;
use crate::error::{Error, Result};
use crate::volume_io::RoiMask;

pub use glcm::{
    aggregate_glcm_features, aggregate_glcm_features_counted, compute_glcm, glcm_counts,
    glcm_features, Glcm, DIRECTIONS, DISTANCES, GLCM_FEATURES,
};
pub use glzsm::{compute_glzsm, glzsm_features, Glzsm, GLZSM_FEATURES};
pub use histogram::{histogram_features, HISTOGRAM_BINS};
pub use ngtdm::{compute_ngtdm, ngtdm_features, Ngtdm, COARSENESS_CAP, COARSENESS_EPS, NGTDM_FEATURES};
pub use quantize::{quantize, QuantizedGrid};

pub const FEATURE_COUNT: usize = 41;
pub const DEFAULT_MATRIX_LEVELS: usize = 32;

/// Column names of [`FeatureVector41`], in order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "hist_mean",
    "hist_variance",
    "hist_skewness",
    "hist_kurtosis",
    "hist_energy",
    "hist_entropy",
    "glcm_angular_second_moment",
    "glcm_contrast",
    "glcm_correlation",
    "glcm_sum_of_squares_variance",
    "glcm_homogeneity",
    "glcm_sum_average",
    "glcm_sum_variance",
    "glcm_sum_entropy",
    "glcm_entropy",
    "glcm_difference_variance",
    "glcm_difference_entropy",
    "glcm_information_correlation_1",
    "glcm_information_correlation_2",
    "glcm_autocorrelation",
    "glcm_dissimilarity",
    "glcm_cluster_shade",
    "glcm_cluster_prominence",
    "glcm_maximum_probability",
    "glcm_inverse_difference",
    "ngtdm_coarseness",
    "ngtdm_contrast",
    "ngtdm_busyness",
    "ngtdm_complexity",
    "ngtdm_strength",
    "glzsm_small_zone_emphasis",
    "glzsm_large_zone_emphasis",
    "glzsm_low_gray_level_zone_emphasis",
    "glzsm_high_gray_level_zone_emphasis",
    "glzsm_small_zone_low_gray_emphasis",
    "glzsm_small_zone_high_gray_emphasis",
    "glzsm_large_zone_low_gray_emphasis",
    "glzsm_large_zone_high_gray_emphasis",
    "glzsm_gray_level_non_uniformity",
    "glzsm_zone_size_non_uniformity",
    "glzsm_zone_size_percentage",
];

pub(crate) const NEIGHBORS_26: [[isize; 3]; 26] = {
    let mut out = [[0isize; 3]; 26];
    let mut k = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[k] = [dx, dy, dz];
                    k += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// `x · log2(x)` with `0 · log 0 = 0`.
#[inline]
pub(crate) fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureFamily {
    Histogram,
    Glcm,
    Ngtdm,
    Glzsm,
}

impl FeatureFamily {
    pub fn of(index: usize) -> FeatureFamily {
        match index {
            0..=5 => FeatureFamily::Histogram,
            6..=24 => FeatureFamily::Glcm,
            25..=29 => FeatureFamily::Ngtdm,
            _ => FeatureFamily::Glzsm,
        }
    }

    /// GLCM, NGTDM and GLZSM are matrix-based texture families.
    pub fn is_texture(self) -> bool {
        self != FeatureFamily::Histogram
    }
}

/// The ordered 41-entry descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector41(pub [f64; FEATURE_COUNT]);

impl FeatureVector41 {
    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    fn from_blocks(
        hist: [f64; 6],
        glcm: [f64; GLCM_FEATURES],
        ngtdm: [f64; NGTDM_FEATURES],
        glzsm: [f64; GLZSM_FEATURES],
    ) -> Self {
        let mut out = [0.0; FEATURE_COUNT];
        let blocks: [&[f64]; 4] = [&hist, &glcm, &ngtdm, &glzsm];
        for (dst, &src) in out.iter_mut().zip(blocks.iter().flat_map(|b| b.iter())) {
            *dst = src;
        }
        FeatureVector41(out)
    }

    /// Per-feature unweighted mean.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a FeatureVector41>) -> Option<Self> {
        let mut acc = [0.0; FEATURE_COUNT];
        let mut n = 0usize;
        for v in vectors {
            for (a, x) in acc.iter_mut().zip(v.0) {
                *a += x;
            }
            n += 1;
        }
        (n > 0).then(|| FeatureVector41(acc.map(|a| a / n as f64)))
    }
}

impl Index<usize> for FeatureVector41 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Which descriptor a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DescriptorKind {
    Srf,
    Drf,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 2] = [DescriptorKind::Srf, DescriptorKind::Drf];
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DescriptorKind::Srf => "SRF",
            DescriptorKind::Drf => "DRF",
        })
    }
}

impl std::str::FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SRF" => Ok(DescriptorKind::Srf),
            "DRF" => Ok(DescriptorKind::Drf),
            other => Err(Error::format("kind", format!("unknown descriptor kind `{other}`"))),
        }
    }
}

/// Histogram block on the raw values, matrix blocks on the `levels`-level
/// quantization of the masked region.
pub fn feature_vector(values: &[f32], mask: &RoiMask, levels: usize) -> Result<FeatureVector41> {
    let hist = histogram_features(values, mask)?;
    let q = quantize(values, mask, levels)?;
    let glcm = aggregate_glcm_features(&q)?;
    let ngtdm = ngtdm_features(&compute_ngtdm(&q));
    let glzsm = glzsm_features(&compute_glzsm(&q));
    Ok(FeatureVector41::from_blocks(hist, glcm, ngtdm, glzsm))
}

/// Mean descriptor over every channel of both feature-map stacks, each
/// channel restricted to its layer's mask.
pub fn compute_drf(
    layer1: &FeatureMapStack,
    layer2: &FeatureMapStack,
    mask1: &RoiMask,
    mask2: &RoiMask,
    levels: usize,
) -> Result<FeatureVector41> {
    for (name, stack, mask) in [("layer 1", layer1, mask1), ("layer 2", layer2, mask2)] {
        if stack.dims() != mask.dims() {
            return Err(Error::Shape(format!(
                "{name}: stack dims {:?} differ from mask dims {:?}",
                stack.dims(),
                mask.dims()
            )));
        }
        if mask.is_empty() {
            return Err(Error::Region(format!("{name}: downsampled ROI is empty")));
        }
    }
    let jobs: Vec<(&FeatureMapStack, &RoiMask, usize)> = (0..layer1.channels())
        .map(|c| (layer1, mask1, c))
        .chain((0..layer2.channels()).map(|c| (layer2, mask2, c)))
        .collect();
    let vectors = jobs
        .par_iter()
        .map(|&(stack, mask, c)| feature_vector(stack.channel(c), mask, levels))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureVector41::mean(&vectors).expect("at least one channel"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_families_line_up() {
        assert_eq!(FEATURE_NAMES.len(), 41);
        for (i, name) in FEATURE_NAMES.iter().enumerate() {
            let prefix = match FeatureFamily::of(i) {
                FeatureFamily::Histogram => "hist_",
                FeatureFamily::Glcm => "glcm_",
                FeatureFamily::Ngtdm => "ngtdm_",
                FeatureFamily::Glzsm => "glzsm_",
            };
            assert!(name.starts_with(prefix), "{name}");
        }
    }

    #[test]
    fn neighborhood_has_26_distinct_offsets() {
        let mut v = NEIGHBORS_26.to_vec();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 26);
    }

    #[test]
    fn constant_region_descriptor() {
        let mask = RoiMask::full([3, 3, 3]).unwrap();
        let f = feature_vector(&[5.0; 27], &mask, 32).unwrap();
        assert!(f.is_finite());
        assert_eq!(f[0], 5.0);
        assert_eq!(f[6], 1.0); // ASM
        assert_eq!(f[25], COARSENESS_CAP);
        assert_eq!(f[40], 1.0 / 27.0);
    }

    #[test]
    fn single_voxel_region_has_no_glcm() {
        let mut mask = RoiMask::empty([3, 3, 3]).unwrap();
        mask.set(1, 1, 1, true);
        assert!(matches!(feature_vector(&[2.0; 27], &mask, 32), Err(Error::Region(_))));
    }

    #[test]
    fn drf_empty_layer_mask_names_layer() {
        let s1 = FeatureMapStack::new(1, [2; 3], vec![1.0; 8]).unwrap();
        let s2 = FeatureMapStack::new(1, [1; 3], vec![1.0]).unwrap();
        let m1 = RoiMask::full([2; 3]).unwrap();
        let m2 = RoiMask::empty([1; 3]).unwrap();
        match compute_drf(&s1, &s2, &m1, &m2, 32) {
            Err(Error::Region(msg)) => assert!(msg.contains("layer 2")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
