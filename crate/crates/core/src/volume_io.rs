//! Volume and ROI-mask ingestion plus the preprocessing chain that brings a
//! scan onto the network grid: isotropic resampling, gray-level
//! normalization, center crop/pad, and masking.
//!
//! Two on-disk formats are read:
//!
//! * single-file NIfTI-1 (`.nii`), honoring `dim`, `pixdim`, `datatype`,
//!   `scl_slope`/`scl_inter` and `vox_offset`. Orientation (qform/sform) is
//!   ignored: voxels are taken in file order with x fastest.
//! * a raw payload (`<name>.rawvol`, little-endian, x fastest) with a text
//!   sidecar `<name>.rawvol.hdr` holding `dims=`, `spacing=` and `dtype=`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Dims = [usize; 3];

#[inline]
pub(crate) fn voxel_count(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

#[inline]
pub(crate) fn linear_index(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

/// A dense scalar grid with physical voxel spacing in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims,
    spacing: [f64; 3],
    data: Vec<f32>,
}

impl Volume {
    pub fn new(dims: Dims, spacing: [f64; 3], data: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("volume dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Shape(format!(
                "volume spacing must be positive, got {spacing:?}"
            )));
        }
        if data.len() != voxel_count(dims) {
            return Err(Error::Shape(format!(
                "volume data has {} voxels, dims {:?} need {}",
                data.len(),
                dims,
                voxel_count(dims)
            )));
        }
        Ok(Volume {
            dims,
            spacing,
            data,
        })
    }

    pub fn filled(dims: Dims, spacing: [f64; 3], value: f32) -> Result<Self> {
        Volume::new(dims, spacing, vec![value; voxel_count(dims)])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[linear_index(self.dims, x, y, z)]
    }

    fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Binary region-of-interest grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    dims: Dims,
    bits: Vec<bool>,
}

impl RoiMask {
    pub fn new(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("mask dims must be >= 1, got {dims:?}")));
        }
        if bits.len() != voxel_count(dims) {
            return Err(Error::Shape(format!(
                "mask has {} voxels, dims {:?} need {}",
                bits.len(),
                dims,
                voxel_count(dims)
            )));
        }
        Ok(RoiMask { dims, bits })
    }

    pub fn full(dims: Dims) -> Result<Self> {
        RoiMask::new(dims, vec![true; voxel_count(dims)])
    }

    pub fn empty(dims: Dims) -> Result<Self> {
        RoiMask::new(dims, vec![false; voxel_count(dims)])
    }

    /// Builds a mask from any scalar volume: nonzero voxels are set.
    pub fn from_volume(vol: &Volume) -> Self {
        RoiMask {
            dims: vol.dims,
            bits: vol.data.iter().map(|&v| v != 0.0).collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[linear_index(self.dims, x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = linear_index(self.dims, x, y, z);
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Nifti1,
    Raw,
}

impl VolumeFormat {
    /// Picks the format from a file name: `.rawvol` is raw, anything else NIfTI-1.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("rawvol") => VolumeFormat::Raw,
            _ => VolumeFormat::Nifti1,
        }
    }
}

/// Scalar type of a raw payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawDtype {
    F32,
    U8,
    I16,
}

impl RawDtype {
    fn width(self) -> usize {
        match self {
            RawDtype::F32 => 4,
            RawDtype::U8 => 1,
            RawDtype::I16 => 2,
        }
    }
}

impl fmt::Display for RawDtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RawDtype::F32 => "f32",
            RawDtype::U8 => "u8",
            RawDtype::I16 => "i16",
        })
    }
}

impl FromStr for RawDtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "f32" => Ok(RawDtype::F32),
            "u8" => Ok(RawDtype::U8),
            "i16" => Ok(RawDtype::I16),
            other => Err(Error::format("dtype", format!("unknown raw dtype `{other}`"))),
        }
    }
}

pub fn read_volume(path: impl AsRef<Path>, format: VolumeFormat) -> Result<Volume> {
    let path = path.as_ref();
    match format {
        VolumeFormat::Nifti1 => read_nifti1(path),
        VolumeFormat::Raw => read_raw(path),
    }
}

/// Reads a mask file: every nonzero voxel is part of the ROI.
pub fn read_mask(path: impl AsRef<Path>, format: VolumeFormat) -> Result<RoiMask> {
    read_volume(path, format).map(|v| RoiMask::from_volume(&v))
}

/// Path of the text sidecar that accompanies a `.rawvol` payload.
pub fn raw_header_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

fn parse_triple<T: FromStr>(field: &str, value: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::format(field, format!("expected 3 comma-separated values, got `{value}`")));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(
            p.parse::<T>()
                .map_err(|_| Error::format(field, format!("cannot parse `{p}`")))?,
        );
    }
    match <[T; 3]>::try_from(out) {
        Ok(arr) => Ok(arr),
        Err(_) => unreachable!(),
    }
}

fn read_raw(path: &Path) -> Result<Volume> {
    let hdr_path = raw_header_path(path);
    let text = fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let mut dims: Option<[usize; 3]> = None;
    let mut spacing: Option<[f64; 3]> = None;
    let mut dtype: Option<RawDtype> = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(line, "expected key=value"))?;
        match key.trim() {
            "dims" => dims = Some(parse_triple("dims", value)?),
            "spacing" => spacing = Some(parse_triple("spacing", value)?),
            "dtype" => dtype = Some(value.parse()?),
            other => return Err(Error::format(other, "unknown header key")),
        }
    }
    let dims = dims.ok_or_else(|| Error::format("dims", "missing"))?;
    let spacing = spacing.ok_or_else(|| Error::format("spacing", "missing"))?;
    let dtype = dtype.ok_or_else(|| Error::format("dtype", "missing"))?;
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::format("dims", "every dimension must be >= 1"));
    }
    if spacing.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::format("spacing", "every spacing must be > 0"));
    }

    let payload = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = voxel_count(dims) * dtype.width();
    if payload.len() != expected {
        return Err(Error::Size {
            expected,
            found: payload.len(),
        });
    }
    let data = decode_le(&payload, dtype);
    Volume::new(dims, spacing, data)
}

fn decode_le(payload: &[u8], dtype: RawDtype) -> Vec<f32> {
    match dtype {
        RawDtype::U8 => payload.iter().map(|&b| b as f32).collect(),
        RawDtype::I16 => payload
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32)
            .collect(),
        RawDtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    }
}

/// Writes `vol` as a `.rawvol` payload plus its `.hdr` sidecar. Values are
/// cast to `dtype` (rounded and saturated for the integer types).
pub fn write_raw(vol: &Volume, path: impl AsRef<Path>, dtype: RawDtype) -> Result<()> {
    let path = path.as_ref();
    let mut payload = Vec::with_capacity(vol.data.len() * dtype.width());
    for &v in &vol.data {
        match dtype {
            RawDtype::F32 => payload.extend_from_slice(&v.to_le_bytes()),
            RawDtype::U8 => payload.push(v.round().clamp(0.0, 255.0) as u8),
            RawDtype::I16 => payload.extend_from_slice(
                &(v.round().clamp(i16::MIN as f32, i16::MAX as f32) as i16).to_le_bytes(),
            ),
        }
    }
    let [dx, dy, dz] = vol.dims;
    let [sx, sy, sz] = vol.spacing;
    let header = format!("dims={dx},{dy},{dz}\nspacing={sx},{sy},{sz}\ndtype={dtype}\n");
    fs::write(path, payload).map_err(|e| Error::io(path, e))?;
    let hdr_path = raw_header_path(path);
    fs::write(&hdr_path, header).map_err(|e| Error::io(&hdr_path, e))
}

pub fn write_raw_mask(mask: &RoiMask, path: impl AsRef<Path>) -> Result<()> {
    let vol = Volume {
        dims: mask.dims,
        spacing: [1.0; 3],
        data: mask.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    };
    write_raw(&vol, path, RawDtype::U8)
}

const NIFTI1_HEADER_LEN: usize = 348;

struct HeaderReader<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl HeaderReader<'_> {
    fn i16_at(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        if self.big_endian {
            i16::from_be_bytes(b)
        } else {
            i16::from_le_bytes(b)
        }
    }

    fn f32_at(&self, off: usize) -> f32 {
        let b = [
            self.bytes[off],
            self.bytes[off + 1],
            self.bytes[off + 2],
            self.bytes[off + 3],
        ];
        if self.big_endian {
            f32::from_be_bytes(b)
        } else {
            f32::from_le_bytes(b)
        }
    }
}

fn read_nifti1(path: &Path) -> Result<Volume> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < NIFTI1_HEADER_LEN {
        return Err(Error::format(
            "sizeof_hdr",
            format!("file is {} bytes, shorter than a NIfTI-1 header", bytes.len()),
        ));
    }
    let sizeof_le = i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let sizeof_be = i32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let big_endian = match (sizeof_le, sizeof_be) {
        (348, _) => false,
        (_, 348) => true,
        _ => return Err(Error::format("sizeof_hdr", format!("expected 348, got {sizeof_le}"))),
    };
    if &bytes[344..347] != b"n+1" {
        return Err(Error::format("magic", "expected single-file `n+1` magic"));
    }
    let h = HeaderReader {
        bytes: &bytes,
        big_endian,
    };

    let ndim = h.i16_at(40);
    if !(3..=7).contains(&ndim) {
        return Err(Error::format("dim", format!("dim[0] = {ndim}, need a 3D volume")));
    }
    let mut dims = [0usize; 3];
    for (axis, d) in dims.iter_mut().enumerate() {
        let v = h.i16_at(42 + 2 * axis);
        if v < 1 {
            return Err(Error::format("dim", format!("dim[{}] = {v}", axis + 1)));
        }
        *d = v as usize;
    }
    for extra in 4..=ndim as usize {
        let v = h.i16_at(40 + 2 * extra);
        if v > 1 {
            return Err(Error::format("dim", format!("dim[{extra}] = {v}, only 3D volumes are supported")));
        }
    }

    let datatype = h.i16_at(70);
    let width = match datatype {
        2 => 1,
        4 => 2,
        8 => 4,
        16 => 4,
        64 => 8,
        other => {
            return Err(Error::format("datatype", format!("unsupported datatype code {other}")))
        }
    };

    let mut spacing = [0f64; 3];
    for (axis, s) in spacing.iter_mut().enumerate() {
        let v = h.f32_at(80 + 4 * axis).abs() as f64;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::format("pixdim", format!("pixdim[{}] = {v}", axis + 1)));
        }
        *s = v;
    }

    let vox_offset = h.f32_at(108);
    if !(vox_offset >= 0.0) || vox_offset.fract() != 0.0 {
        return Err(Error::format("vox_offset", format!("invalid offset {vox_offset}")));
    }
    let vox_offset = (vox_offset as usize).max(NIFTI1_HEADER_LEN);
    let mut slope = h.f32_at(112);
    let inter = h.f32_at(116);
    if slope == 0.0 || !slope.is_finite() {
        slope = 1.0;
    }
    let inter = if inter.is_finite() { inter } else { 0.0 };

    let n = voxel_count(dims);
    let expected = n * width;
    let available = bytes.len().saturating_sub(vox_offset);
    if available != expected {
        return Err(Error::Size {
            expected,
            found: available,
        });
    }
    let payload = &bytes[vox_offset..];
    let scale = |v: f64| (v * slope as f64 + inter as f64) as f32;
    let data: Vec<f32> = match datatype {
        2 => payload.iter().map(|&b| scale(b as f64)).collect(),
        4 => payload
            .chunks_exact(2)
            .map(|c| {
                let b = [c[0], c[1]];
                let v = if big_endian { i16::from_be_bytes(b) } else { i16::from_le_bytes(b) };
                scale(v as f64)
            })
            .collect(),
        8 => payload
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                let v = if big_endian { i32::from_be_bytes(b) } else { i32::from_le_bytes(b) };
                scale(v as f64)
            })
            .collect(),
        16 => payload
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                let v = if big_endian { f32::from_be_bytes(b) } else { f32::from_le_bytes(b) };
                scale(v as f64)
            })
            .collect(),
        64 => payload
            .chunks_exact(8)
            .map(|c| {
                let b: [u8; 8] = c.try_into().expect("chunk of 8");
                let v = if big_endian { f64::from_be_bytes(b) } else { f64::from_le_bytes(b) };
                scale(v)
            })
            .collect(),
        _ => unreachable!(),
    };
    Volume::new(dims, spacing, data)
}

/// Resamples to isotropic `target` mm spacing. Intensities are trilinearly
/// interpolated, the mask takes its nearest neighbor. Voxel `i` sits at
/// physical position `i * spacing`; samples beyond the last input voxel
/// clamp to the border.
pub fn resample_isotropic(vol: &Volume, mask: &RoiMask, target: f64) -> Result<(Volume, RoiMask)> {
    if !(target > 0.0) {
        return Err(Error::Argument(format!("target spacing must be > 0, got {target}")));
    }
    if vol.dims != mask.dims {
        return Err(Error::Shape(format!(
            "volume dims {:?} differ from mask dims {:?}",
            vol.dims, mask.dims
        )));
    }
    let out_dims: Dims = std::array::from_fn(|a| {
        ((vol.dims[a] as f64 * vol.spacing[a] / target) - 1e-9).ceil().max(1.0) as usize
    });
    if out_dims == vol.dims && vol.spacing.iter().all(|&s| s == target) {
        return Ok((vol.clone(), mask.clone()));
    }

    // per-axis (lower index, upper index, weight of upper)
    let axis_samples: Vec<Vec<(usize, usize, f64)>> = (0..3)
        .map(|a| {
            let last = vol.dims[a] - 1;
            (0..out_dims[a])
                .map(|o| {
                    let pos = (o as f64 * target / vol.spacing[a]).clamp(0.0, last as f64);
                    let lo = pos.floor() as usize;
                    let hi = (lo + 1).min(last);
                    (lo, hi, pos - lo as f64)
                })
                .collect()
        })
        .collect();

    let mut data = Vec::with_capacity(voxel_count(out_dims));
    let mut bits = Vec::with_capacity(voxel_count(out_dims));
    for &(z0, z1, wz) in &axis_samples[2] {
        for &(y0, y1, wy) in &axis_samples[1] {
            for &(x0, x1, wx) in &axis_samples[0] {
                let v = |x, y, z| vol.get(x, y, z) as f64;
                let c00 = v(x0, y0, z0) * (1.0 - wx) + v(x1, y0, z0) * wx;
                let c10 = v(x0, y1, z0) * (1.0 - wx) + v(x1, y1, z0) * wx;
                let c01 = v(x0, y0, z1) * (1.0 - wx) + v(x1, y0, z1) * wx;
                let c11 = v(x0, y1, z1) * (1.0 - wx) + v(x1, y1, z1) * wx;
                let c0 = c00 * (1.0 - wy) + c10 * wy;
                let c1 = c01 * (1.0 - wy) + c11 * wy;
                data.push((c0 * (1.0 - wz) + c1 * wz) as f32);

                let nx = if wx >= 0.5 { x1 } else { x0 };
                let ny = if wy >= 0.5 { y1 } else { y0 };
                let nz = if wz >= 0.5 { z1 } else { z0 };
                bits.push(mask.get(nx, ny, nz));
            }
        }
    }
    Ok((
        Volume::new(out_dims, [target; 3], data)?,
        RoiMask::new(out_dims, bits)?,
    ))
}

/// Min-max maps the whole volume onto integer levels `0..levels`.
pub fn normalize_gray_levels(vol: &Volume, levels: u32) -> Result<Volume> {
    if levels < 2 {
        return Err(Error::Argument(format!("levels must be >= 2, got {levels}")));
    }
    let (lo, hi) = vol.min_max();
    let top = (levels - 1) as f64;
    let data = if hi > lo {
        let range = hi as f64 - lo as f64;
        vol.data
            .iter()
            .map(|&v| ((v as f64 - lo as f64) / range * levels as f64).floor().clamp(0.0, top) as f32)
            .collect()
    } else {
        vec![0.0; vol.data.len()]
    };
    Volume::new(vol.dims, vol.spacing, data)
}

/// Center-crops then zero-pads each axis to `target_dims`; the mask follows
/// the same index map.
pub fn conform(vol: &Volume, mask: &RoiMask, target_dims: Dims) -> Result<(Volume, RoiMask)> {
    if target_dims.iter().any(|&d| d == 0) {
        return Err(Error::Argument(format!("target dims must be >= 1, got {target_dims:?}")));
    }
    if vol.dims != mask.dims {
        return Err(Error::Shape(format!(
            "volume dims {:?} differ from mask dims {:?}",
            vol.dims, mask.dims
        )));
    }
    if vol.dims == target_dims {
        return Ok((vol.clone(), mask.clone()));
    }
    // output index o maps to input index o + shift (signed)
    let shift: [isize; 3] =
        std::array::from_fn(|a| (vol.dims[a] as isize - target_dims[a] as isize).div_euclid(2));
    let source = |a: usize, o: usize| -> Option<usize> {
        let i = o as isize + shift[a];
        (i >= 0 && (i as usize) < vol.dims[a]).then_some(i as usize)
    };
    let n = voxel_count(target_dims);
    let mut data = vec![0f32; n];
    let mut bits = vec![false; n];
    for z in 0..target_dims[2] {
        let Some(iz) = source(2, z) else { continue };
        for y in 0..target_dims[1] {
            let Some(iy) = source(1, y) else { continue };
            for x in 0..target_dims[0] {
                let Some(ix) = source(0, x) else { continue };
                let o = linear_index(target_dims, x, y, z);
                let i = linear_index(vol.dims, ix, iy, iz);
                data[o] = vol.data[i];
                bits[o] = mask.bits[i];
            }
        }
    }
    Ok((
        Volume::new(target_dims, vol.spacing, data)?,
        RoiMask::new(target_dims, bits)?,
    ))
}

/// Zeroes every voxel outside the mask.
pub fn apply_mask(vol: &Volume, mask: &RoiMask) -> Result<Volume> {
    if vol.dims != mask.dims {
        return Err(Error::Shape(format!(
            "volume dims {:?} differ from mask dims {:?}",
            vol.dims, mask.dims
        )));
    }
    let data = vol
        .data
        .iter()
        .zip(&mask.bits)
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    Volume::new(vol.dims, vol.spacing, data)
}
