use crate::error::{Error, Result};
use crate::volume_io::{voxel_count, Dims, RoiMask};

/// Gray levels `1..=levels` at in-mask voxels, 0 elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedGrid {
    dims: Dims,
    levels: usize,
    values: Vec<u16>,
    mask: RoiMask,
}

impl QuantizedGrid {
    /// Builds a grid from levels that are already quantized. Out-of-mask
    /// entries are ignored and stored as 0.
    pub fn from_levels(levels: usize, values: Vec<u16>, mask: RoiMask) -> Result<Self> {
        check_region(&mask)?;
        if levels < 2 || levels > u16::MAX as usize {
            return Err(Error::Argument(format!("levels must be in 2..=65535, got {levels}")));
        }
        if values.len() != voxel_count(mask.dims()) {
            return Err(Error::Shape(format!(
                "{} level values for mask dims {:?}",
                values.len(),
                mask.dims()
            )));
        }
        let mut values = values;
        for (v, &m) in values.iter_mut().zip(mask.bits()) {
            if !m {
                *v = 0;
            } else if *v < 1 || *v as usize > levels {
                return Err(Error::Argument(format!("level {v} outside 1..={levels}")));
            }
        }
        Ok(QuantizedGrid {
            dims: mask.dims(),
            levels,
            values,
            mask,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Level per voxel, 0 outside the mask.
    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn mask(&self) -> &RoiMask {
        &self.mask
    }
}

pub(crate) fn check_region(mask: &RoiMask) -> Result<()> {
    if mask.is_empty() {
        Err(Error::Region("mask selects no voxels".into()))
    } else {
        Ok(())
    }
}

pub(crate) fn check_grid(values: &[f32], mask: &RoiMask) -> Result<()> {
    if values.len() != voxel_count(mask.dims()) {
        return Err(Error::Shape(format!(
            "{} grid values for mask dims {:?}",
            values.len(),
            mask.dims()
        )));
    }
    check_region(mask)
}

pub(crate) fn masked_range(values: &[f32], mask: &RoiMask) -> (f64, f64) {
    values
        .iter()
        .zip(mask.bits())
        .filter(|(_, &m)| m)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
            (lo.min(v as f64), hi.max(v as f64))
        })
}

/// Uniform min-max quantization of the masked values onto `1..=levels`.
pub fn quantize(values: &[f32], mask: &RoiMask, levels: usize) -> Result<QuantizedGrid> {
    check_grid(values, mask)?;
    if levels < 2 || levels > u16::MAX as usize {
        return Err(Error::Argument(format!("levels must be in 2..=65535, got {levels}")));
    }
    let (lo, hi) = masked_range(values, mask);
    let range = hi - lo;
    let g = levels as f64;
    let q = values
        .iter()
        .zip(mask.bits())
        .map(|(&v, &m)| {
            if !m {
                0
            } else if range > 0.0 {
                (1.0 + ((v as f64 - lo) / range * g).floor()).clamp(1.0, g) as u16
            } else {
                1
            }
        })
        .collect();
    Ok(QuantizedGrid {
        dims: mask.dims(),
        levels,
        values: q,
        mask: mask.clone(),
    })
}
