//! Forward-only 3D convolution stack: the two convolutional blocks whose
//! feature maps are quantified as deep radiomic features.
//!
//! Each block is `pool(relu(conv(x)))`. Dropout is a training-time device and
//! is the identity here. The dense and softmax blocks that follow in the
//! trained network can be carried in a weight file but are never evaluated.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume_io::{linear_index, voxel_count, Dims, RoiMask, Volume};

pub const WEIGHT_MAGIC: &[u8; 4] = b"DRF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub size: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerSpec {
    pub filter_size: [usize; 3],
    pub stride: [usize; 3],
    pub out_channels: usize,
    pub pool: PoolSpec,
    pub dropout_rate: f64,
}

impl ConvLayerSpec {
    fn validate(&self) -> Result<()> {
        if self.filter_size.iter().chain(&self.stride).any(|&v| v == 0)
            || self.pool.size == 0
            || self.pool.stride == 0
            || self.out_channels == 0
        {
            return Err(Error::Argument(format!("degenerate layer spec {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.dropout_rate) {
            return Err(Error::Argument(format!(
                "dropout rate {} outside [0, 1]",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Architecture of the convolutional front end.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub layers: [ConvLayerSpec; 2],
}

impl Default for NetworkSpec {
    /// Two blocks of 2×2×2 stride-2 convolutions with 10 filters each.
    /// Block 1 pools with stride 2 and block 2 with stride 1, so a 256³ input
    /// yields 10×64³ and 10×32³ stacks.
    fn default() -> Self {
        let block = |pool_stride| ConvLayerSpec {
            filter_size: [2, 2, 2],
            stride: [2, 2, 2],
            out_channels: 10,
            pool: PoolSpec {
                size: 2,
                stride: pool_stride,
            },
            dropout_rate: 0.8,
        };
        NetworkSpec {
            layers: [block(2), block(1)],
        }
    }
}

impl NetworkSpec {
    /// Output dims of both blocks for a given input, or a shape error when the
    /// arithmetic does not tile evenly.
    pub fn output_dims(&self, input: Dims) -> Result<(Dims, Dims)> {
        let mut dims = input;
        let mut outs = [[0usize; 3]; 2];
        for (l, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            dims = conv_output_dims(dims, layer.filter_size, layer.stride)?;
            dims = pool_output_dims(dims, layer.pool)?;
            outs[l] = dims;
        }
        Ok((outs[0], outs[1]))
    }
}

fn conv_output_dims(input: Dims, kernel: [usize; 3], stride: [usize; 3]) -> Result<Dims> {
    let mut out = [0; 3];
    for a in 0..3 {
        if input[a] < kernel[a] || (input[a] - kernel[a]) % stride[a] != 0 {
            return Err(Error::Shape(format!(
                "axis {a}: input {} does not tile with kernel {} stride {}",
                input[a], kernel[a], stride[a]
            )));
        }
        out[a] = (input[a] - kernel[a]) / stride[a] + 1;
    }
    Ok(out)
}

fn pool_output_dims(input: Dims, pool: PoolSpec) -> Result<Dims> {
    if pool.stride == 1 {
        return Ok(input);
    }
    conv_output_dims(input, [pool.size; 3], [pool.stride; 3])
}

/// Real-valued multi-channel grid, channel-major, x fastest within a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapStack {
    channels: usize,
    dims: Dims,
    data: Vec<f32>,
}

impl FeatureMapStack {
    pub fn new(channels: usize, dims: Dims, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!(
                "stack needs >= 1 channel and positive dims, got {channels} x {dims:?}"
            )));
        }
        if data.len() != channels * voxel_count(dims) {
            return Err(Error::Shape(format!(
                "stack data has {} values, expected {}",
                data.len(),
                channels * voxel_count(dims)
            )));
        }
        Ok(FeatureMapStack {
            channels,
            dims,
            data,
        })
    }

    pub fn from_volume(vol: &Volume) -> Self {
        FeatureMapStack {
            channels: 1,
            dims: vol.dims(),
            data: vol.data().to_vec(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = voxel_count(self.dims);
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize, z: usize) -> f32 {
        self.channel(c)[linear_index(self.dims, x, y, z)]
    }
}

/// Filter bank and bias of one convolution. Filter layout is
/// `[out][in][z][y][x]` with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: [usize; 3],
    pub filter: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvWeights {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: [usize; 3],
        filter: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        let expected = out_channels * in_channels * voxel_count(kernel);
        if filter.len() != expected || bias.len() != out_channels {
            return Err(Error::Weight(format!(
                "filter has {} values (expected {expected}), bias {} (expected {out_channels})",
                filter.len(),
                bias.len()
            )));
        }
        if filter.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Weight("non-finite weight".into()));
        }
        Ok(ConvWeights {
            out_channels,
            in_channels,
            kernel,
            filter,
            bias,
        })
    }

    #[inline]
    fn taps(&self) -> usize {
        voxel_count(self.kernel)
    }

    fn filter_of(&self, o: usize, i: usize) -> &[f32] {
        let t = self.taps();
        let start = (o * self.in_channels + i) * t;
        &self.filter[start..start + t]
    }
}

/// A record of the weight file that is kept but never evaluated (dense and
/// softmax blocks, identified by layer index > 2).
#[derive(Debug, Clone, PartialEq)]
pub struct StoredBlock {
    pub layer_index: u8,
    pub weights: ConvWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub conv: [ConvWeights; 2],
    pub trailing: Vec<StoredBlock>,
}

impl NetworkWeights {
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        let mut in_ch = 1;
        for (l, (w, layer)) in self.conv.iter().zip(&spec.layers).enumerate() {
            if w.in_channels != in_ch
                || w.out_channels != layer.out_channels
                || w.kernel != layer.filter_size
            {
                return Err(Error::Weight(format!(
                    "layer {} weights are {}x{}x{:?}, spec wants {}x{}x{:?}",
                    l + 1,
                    w.out_channels,
                    w.in_channels,
                    w.kernel,
                    layer.out_channels,
                    in_ch,
                    layer.filter_size
                )));
            }
            in_ch = layer.out_channels;
        }
        Ok(())
    }
}

/// Deterministic Glorot-uniform filters, zero biases.
pub fn init_seeded_weights(seed: u64, spec: &NetworkSpec) -> NetworkWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_ch = 1;
    let conv = spec.layers.clone().map(|layer| {
        let taps = voxel_count(layer.filter_size);
        let fan_in = (in_ch * taps) as f64;
        let fan_out = (layer.out_channels * taps) as f64;
        let a = (6.0 / (fan_in + fan_out)).sqrt() as f32;
        let filter = (0..layer.out_channels * in_ch * taps)
            .map(|_| rng.gen_range(-a..=a))
            .collect();
        let w = ConvWeights {
            out_channels: layer.out_channels,
            in_channels: in_ch,
            kernel: layer.filter_size,
            filter,
            bias: vec![0.0; layer.out_channels],
        };
        in_ch = layer.out_channels;
        w
    });
    NetworkWeights {
        conv,
        trailing: Vec::new(),
    }
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Weight(format!("truncated weight file while reading {what}")))?;
    let out = &bytes[*pos..end];
    *pos = end;
    Ok(out)
}

fn read_u32(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    let b = take(bytes, pos, 4, what)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn read_f32s(bytes: &[u8], pos: &mut usize, n: usize, what: &str) -> Result<Vec<f32>> {
    let len = n
        .checked_mul(4)
        .ok_or_else(|| Error::Weight(format!("{what} size overflows")))?;
    Ok(take(bytes, pos, len, what)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Parses a `DRF1` weight file and checks it against `spec`.
pub fn load_weights(path: impl AsRef<Path>, spec: &NetworkSpec) -> Result<NetworkWeights> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes, spec)
}

pub fn decode_weights(bytes: &[u8], spec: &NetworkSpec) -> Result<NetworkWeights> {
    if bytes.len() < 4 || &bytes[..4] != WEIGHT_MAGIC {
        return Err(Error::Weight("missing DRF1 magic".into()));
    }
    let mut pos = 4;
    let mut conv: [Option<ConvWeights>; 2] = [None, None];
    let mut trailing = Vec::new();
    while pos < bytes.len() {
        let layer_index = take(bytes, &mut pos, 1, "layer index")?[0];
        let out_ch = read_u32(bytes, &mut pos, "out_ch")? as usize;
        let in_ch = read_u32(bytes, &mut pos, "in_ch")? as usize;
        let kernel = [
            read_u32(bytes, &mut pos, "kx")? as usize,
            read_u32(bytes, &mut pos, "ky")? as usize,
            read_u32(bytes, &mut pos, "kz")? as usize,
        ];
        let n_filter = out_ch
            .checked_mul(in_ch)
            .and_then(|v| v.checked_mul(voxel_count(kernel)))
            .ok_or_else(|| Error::Weight("record size overflows".into()))?;
        let filter = read_f32s(bytes, &mut pos, n_filter, "filter payload")?;
        let bias = read_f32s(bytes, &mut pos, out_ch, "bias payload")?;
        match layer_index {
            1 | 2 => {
                let slot = &mut conv[layer_index as usize - 1];
                if slot.is_some() {
                    return Err(Error::Weight(format!("duplicate record for layer {layer_index}")));
                }
                *slot = Some(ConvWeights::new(out_ch, in_ch, kernel, filter, bias)?);
            }
            3 | 4 => trailing.push(StoredBlock {
                layer_index,
                weights: ConvWeights::new(out_ch, in_ch, kernel, filter, bias)?,
            }),
            _ => {} // unknown record, skipped
        }
    }
    let [Some(l1), Some(l2)] = conv else {
        return Err(Error::Weight("weight file lacks a layer 1 or layer 2 record".into()));
    };
    let weights = NetworkWeights {
        conv: [l1, l2],
        trailing,
    };
    weights.validate(spec)?;
    Ok(weights)
}

pub fn encode_weights(weights: &NetworkWeights) -> Vec<u8> {
    let mut out = WEIGHT_MAGIC.to_vec();
    let mut record = |index: u8, w: &ConvWeights| {
        out.push(index);
        for v in [w.out_channels, w.in_channels, w.kernel[0], w.kernel[1], w.kernel[2]] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in w.filter.iter().chain(&w.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    record(1, &weights.conv[0]);
    record(2, &weights.conv[1]);
    for block in &weights.trailing {
        record(block.layer_index, &block.weights);
    }
    out
}

pub fn save_weights(weights: &NetworkWeights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_weights(weights))
        .map_err(|e| Error::io(path, e))
}

/// Valid strided cross-correlation summed over input channels, plus bias.
pub fn conv3d_forward(
    input: &FeatureMapStack,
    weights: &ConvWeights,
    stride: [usize; 3],
) -> Result<FeatureMapStack> {
    if input.channels != weights.in_channels {
        return Err(Error::Shape(format!(
            "input has {} channels, filters expect {}",
            input.channels, weights.in_channels
        )));
    }
    if stride.iter().any(|&s| s == 0) {
        return Err(Error::Argument("stride must be >= 1".into()));
    }
    let out_dims = conv_output_dims(input.dims, weights.kernel, stride)?;
    let in_dims = input.dims;
    let [kx, ky, kz] = weights.kernel;
    let out_n = voxel_count(out_dims);

    let mut data = vec![0f32; weights.out_channels * out_n];
    data.par_chunks_mut(out_n).enumerate().for_each(|(o, out)| {
        out.fill(weights.bias[o]);
        for i in 0..weights.in_channels {
            let src = input.channel(i);
            let filt = weights.filter_of(o, i);
            for z in 0..out_dims[2] {
                for y in 0..out_dims[1] {
                    let row = linear_index(out_dims, 0, y, z);
                    for x in 0..out_dims[0] {
                        let (bx, by, bz) = (x * stride[0], y * stride[1], z * stride[2]);
                        let mut acc = 0f32;
                        let mut t = 0;
                        for dz in 0..kz {
                            for dy in 0..ky {
                                let base = linear_index(in_dims, bx, by + dy, bz + dz);
                                for dx in 0..kx {
                                    acc += src[base + dx] * filt[t];
                                    t += 1;
                                }
                            }
                        }
                        out[row + x] += acc;
                    }
                }
            }
        }
    });
    FeatureMapStack::new(weights.out_channels, out_dims, data)
}

/// Per-channel max pooling over `size³` windows. With stride 1 the upper
/// border is replicate-padded so dims are preserved.
pub fn maxpool3d(input: &FeatureMapStack, size: usize, stride: usize) -> Result<FeatureMapStack> {
    if size == 0 || stride == 0 {
        return Err(Error::Argument("pool size and stride must be >= 1".into()));
    }
    let pool = PoolSpec { size, stride };
    let out_dims = pool_output_dims(input.dims, pool)?;
    let in_dims = input.dims;
    let out_n = voxel_count(out_dims);
    let clamp = |a: usize, i: usize| i.min(in_dims[a] - 1);

    let mut data = vec![0f32; input.channels * out_n];
    data.par_chunks_mut(out_n).enumerate().for_each(|(c, out)| {
        let src = input.channel(c);
        for z in 0..out_dims[2] {
            for y in 0..out_dims[1] {
                for x in 0..out_dims[0] {
                    let mut m = f32::NEG_INFINITY;
                    for dz in 0..size {
                        let iz = clamp(2, z * stride + dz);
                        for dy in 0..size {
                            let iy = clamp(1, y * stride + dy);
                            for dx in 0..size {
                                let ix = clamp(0, x * stride + dx);
                                m = m.max(src[linear_index(in_dims, ix, iy, iz)]);
                            }
                        }
                    }
                    out[linear_index(out_dims, x, y, z)] = m;
                }
            }
        }
    });
    FeatureMapStack::new(input.channels, out_dims, data)
}

pub fn relu(input: &FeatureMapStack) -> FeatureMapStack {
    let mut out = input.clone();
    relu_in_place(&mut out);
    out
}

fn relu_in_place(stack: &mut FeatureMapStack) {
    for v in &mut stack.data {
        *v = v.max(0.0);
    }
}

/// Runs both convolutional blocks and returns their feature-map stacks.
pub fn forward_features(
    vol: &Volume,
    weights: &NetworkWeights,
    spec: &NetworkSpec,
) -> Result<(FeatureMapStack, FeatureMapStack)> {
    spec.output_dims(vol.dims())?;
    weights.validate(spec)?;
    let mut x = FeatureMapStack::from_volume(vol);
    let mut outs = Vec::with_capacity(2);
    for (layer, w) in spec.layers.iter().zip(&weights.conv) {
        let mut y = conv3d_forward(&x, w, layer.stride)?;
        relu_in_place(&mut y);
        x = maxpool3d(&y, layer.pool.size, layer.pool.stride)?;
        outs.push(x.clone());
    }
    let layer2 = outs.pop().expect("two layers");
    let layer1 = outs.pop().expect("two layers");
    Ok((layer1, layer2))
}

/// Any-voxel block reduction of a mask by `factor` along every axis.
pub fn downsample_mask(mask: &RoiMask, factor: usize) -> Result<RoiMask> {
    let dims = mask.dims();
    if factor == 0 || dims.iter().any(|&d| d % factor != 0) {
        return Err(Error::Shape(format!(
            "mask dims {dims:?} not divisible by factor {factor}"
        )));
    }
    let out_dims: Dims = dims.map(|d| d / factor);
    let mut bits = vec![false; voxel_count(out_dims)];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if mask.get(x, y, z) {
                    bits[linear_index(out_dims, x / factor, y / factor, z / factor)] = true;
                }
            }
        }
    }
    RoiMask::new(out_dims, bits)
}
