use crate::error::Result;
use crate::volume_io::RoiMask;

use super::quantize::{check_grid, masked_range};
use super::xlog2x;

pub const HISTOGRAM_BINS: usize = 256;

/// Mean, variance, skewness, kurtosis (population moments on the raw values),
/// then energy and entropy of a 256-bin min-max histogram.
pub fn histogram_features(values: &[f32], mask: &RoiMask) -> Result<[f64; 6]> {
    check_grid(values, mask)?;
    let inside: Vec<f64> = values
        .iter()
        .zip(mask.bits())
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v as f64)
        .collect();
    let n = inside.len() as f64;
    let mean = inside.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in &inside {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };

    let (lo, hi) = masked_range(values, mask);
    let mut hist = [0u64; HISTOGRAM_BINS];
    let top = (HISTOGRAM_BINS - 1) as f64;
    for &v in &inside {
        let bin = if hi > lo {
            ((v - lo) / (hi - lo) * HISTOGRAM_BINS as f64).floor().clamp(0.0, top) as usize
        } else {
            0
        };
        hist[bin] += 1;
    }
    let (mut energy, mut entropy) = (0.0, 0.0);
    for &c in hist.iter().filter(|&&c| c > 0) {
        let p = c as f64 / n;
        energy += p * p;
        entropy -= xlog2x(p);
    }
    Ok([mean, m2, skewness, kurtosis, energy, entropy])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_region() {
        let mask = RoiMask::full([2, 2, 2]).unwrap();
        let f = histogram_features(&[3.25; 8], &mask).unwrap();
        assert_eq!(f, [3.25, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn four_values_hand_moments() {
        let mask = RoiMask::full([4, 1, 1]).unwrap();
        let f = histogram_features(&[1.0, 2.0, 3.0, 4.0], &mask).unwrap();
        assert_eq!(f[0], 2.5);
        assert_eq!(f[1], 1.25);
        assert!(f[2].abs() < 1e-15);
        assert!((f[3] - 1.64).abs() < 1e-12);
    }

    #[test]
    fn uniform_over_all_bins() {
        let mask = RoiMask::full([256, 1, 1]).unwrap();
        let vals: Vec<f32> = (0..256).map(|i| i as f32).collect();
        let f = histogram_features(&vals, &mask).unwrap();
        assert!((f[5] - 8.0).abs() < 1e-12);
        assert!((f[4] - 1.0 / 256.0).abs() < 1e-15);
    }
}
