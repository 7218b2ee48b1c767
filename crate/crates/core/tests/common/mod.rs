//! Reference implementations used by the integration tests. They favor
//! brute force over speed so they share no code paths with the library.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deeprad::conv3d::{NetworkSpec, NetworkWeights};
use deeprad::volume_io::{RoiMask, Volume};

pub type Dims = [usize; 3];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn coord(dims: Dims, idx: usize) -> [i64; 3] {
    [
        (idx % dims[0]) as i64,
        ((idx / dims[0]) % dims[1]) as i64,
        (idx / (dims[0] * dims[1])) as i64,
    ]
}

/// Random real grid with a random non-empty mask of roughly `density`.
pub fn random_grid(r: &mut impl Rng, dims: Dims, density: f64) -> (Vec<f32>, Vec<bool>) {
    let n = dims[0] * dims[1] * dims[2];
    let vals: Vec<f32> = (0..n).map(|_| r.gen_range(-50.0f32..50.0)).collect();
    let mut mask: Vec<bool> = (0..n).map(|_| r.gen_bool(density)).collect();
    if mask.iter().filter(|&&m| m).count() < 2 {
        mask[0] = true;
        mask[n - 1] = true;
    }
    (vals, mask)
}

pub fn roi(dims: Dims, mask: &[bool]) -> RoiMask {
    RoiMask::new(dims, mask.to_vec()).unwrap()
}

/// q = 1 + floor((v − min)/(max − min)·G), clamped to [1, G]; 0 outside.
pub fn quantize(vals: &[f32], mask: &[bool], g: usize) -> Vec<u16> {
    let inside: Vec<f64> = vals.iter().zip(mask).filter(|p| *p.1).map(|p| *p.0 as f64).collect();
    let lo = inside.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = inside.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    vals.iter()
        .zip(mask)
        .map(|(&v, &m)| {
            if !m {
                0
            } else if hi == lo {
                1
            } else {
                let q = 1.0 + ((v as f64 - lo) / (hi - lo) * g as f64).floor();
                q.clamp(1.0, g as f64) as u16
            }
        })
        .collect()
}

pub const DIRECTIONS: [[i64; 3]; 13] = [
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

/// Raw symmetric GLCM counts by enumerating every ordered voxel pair.
pub fn glcm_counts(q: &[u16], dims: Dims, g: usize, dir: [i64; 3], dist: i64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; g]; g];
    for a in 0..q.len() {
        if q[a] == 0 {
            continue;
        }
        let ca = coord(dims, a);
        for b in 0..q.len() {
            if q[b] == 0 {
                continue;
            }
            let cb = coord(dims, b);
            if (0..3).all(|k| cb[k] - ca[k] == dir[k] * dist) {
                let (i, j) = (q[a] as usize - 1, q[b] as usize - 1);
                m[i][j] += 1.0;
                m[j][i] += 1.0;
            }
        }
    }
    m
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// The 19 GLCM statistics written out as direct sums over a normalized matrix.
pub fn glcm_features(p: &[Vec<f64>]) -> [f64; 19] {
    let g = p.len();
    let lvl = |i: usize| (i + 1) as f64;
    let px: Vec<f64> = (0..g).map(|i| (0..g).map(|j| p[i][j]).sum()).collect();
    let py: Vec<f64> = (0..g).map(|j| (0..g).map(|i| p[i][j]).sum()).collect();
    let mux: f64 = (0..g).map(|i| lvl(i) * px[i]).sum();
    let muy: f64 = (0..g).map(|j| lvl(j) * py[j]).sum();
    let sx = (0..g).map(|i| (lvl(i) - mux).powi(2) * px[i]).sum::<f64>().sqrt();
    let sy = (0..g).map(|j| (lvl(j) - muy).powi(2) * py[j]).sum::<f64>().sqrt();

    let mut f = [0.0; 19];
    let mut psum = BTreeMap::<usize, f64>::new();
    let mut pdiff = BTreeMap::<usize, f64>::new();
    let mut cov = 0.0;
    let (mut hxy, mut hxy1, mut hxy2) = (0.0, 0.0, 0.0);
    for i in 0..g {
        for j in 0..g {
            let v = p[i][j];
            let (a, b) = (lvl(i), lvl(j));
            *psum.entry(i + j + 2).or_default() += v;
            *pdiff.entry(i.abs_diff(j)).or_default() += v;
            f[0] += v * v;
            f[1] += (a - b).powi(2) * v;
            cov += (a - mux) * (b - muy) * v;
            f[3] += (a - mux).powi(2) * v;
            f[4] += v / (1.0 + (a - b).powi(2));
            hxy -= plogp(v);
            f[13] += a * b * v;
            f[14] += (a - b).abs() * v;
            f[15] += (a + b - mux - muy).powi(3) * v;
            f[16] += (a + b - mux - muy).powi(4) * v;
            f[17] = f64::max(f[17], v);
            f[18] += v / (1.0 + (a - b).abs());
            let m = px[i] * py[j];
            if m > 0.0 {
                hxy1 -= v * m.log2();
                hxy2 -= m * m.log2();
            }
        }
    }
    f[2] = if sx * sy > 0.0 { cov / (sx * sy) } else { 0.0 };
    f[5] = psum.iter().map(|(&k, &v)| k as f64 * v).sum();
    f[6] = psum.iter().map(|(&k, &v)| (k as f64 - f[5]).powi(2) * v).sum();
    f[7] = -psum.values().map(|&v| plogp(v)).sum::<f64>();
    f[8] = hxy;
    let dmean: f64 = pdiff.iter().map(|(&k, &v)| k as f64 * v).sum();
    f[9] = pdiff.iter().map(|(&k, &v)| (k as f64 - dmean).powi(2) * v).sum();
    f[10] = -pdiff.values().map(|&v| plogp(v)).sum::<f64>();
    let hx = -px.iter().map(|&v| plogp(v)).sum::<f64>();
    let hy = -py.iter().map(|&v| plogp(v)).sum::<f64>();
    let hmax = hx.max(hy);
    f[11] = if hmax > 0.0 { (hxy - hxy1) / hmax } else { 0.0 };
    f[12] = (1.0 - 2f64.powf(-2.0 * (hxy2 - hxy))).clamp(0.0, 1.0).sqrt();
    f
}

pub fn normalized(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let total: f64 = m.iter().flatten().sum();
    (total > 0.0).then(|| m.iter().map(|r| r.iter().map(|v| v / total).collect()).collect())
}

/// Mean of the 19 statistics over every non-empty matrix, plus how many.
pub fn glcm_block(q: &[u16], dims: Dims, g: usize) -> Option<([f64; 19], usize)> {
    let mut acc = [0.0; 19];
    let mut used = 0;
    for dir in DIRECTIONS {
        for dist in 1..=4 {
            if let Some(p) = normalized(&glcm_counts(q, dims, g, dir, dist)) {
                for (a, v) in acc.iter_mut().zip(glcm_features(&p)) {
                    *a += v;
                }
                used += 1;
            }
        }
    }
    (used > 0).then(|| (acc.map(|a| a / used as f64), used))
}

fn touching(a: [i64; 3], b: [i64; 3]) -> bool {
    a != b && (0..3).all(|k| (a[k] - b[k]).abs() <= 1)
}

/// Per level (index level − 1): (s_i, n_i), from a full scan for neighbors.
pub fn ngtdm(q: &[u16], dims: Dims, g: usize) -> (Vec<f64>, Vec<u64>) {
    let mut s = vec![0.0; g];
    let mut n = vec![0u64; g];
    for a in 0..q.len() {
        if q[a] == 0 {
            continue;
        }
        let ca = coord(dims, a);
        let neigh: Vec<f64> = (0..q.len())
            .filter(|&b| q[b] != 0 && touching(ca, coord(dims, b)))
            .map(|b| q[b] as f64)
            .collect();
        if neigh.is_empty() {
            continue;
        }
        let mean = neigh.iter().sum::<f64>() / neigh.len() as f64;
        s[q[a] as usize - 1] += (q[a] as f64 - mean).abs();
        n[q[a] as usize - 1] += 1;
    }
    (s, n)
}

pub fn ngtdm_features(s: &[f64], n: &[u64]) -> [f64; 5] {
    let total: u64 = n.iter().sum();
    let nt = total as f64;
    let lv: Vec<usize> = (0..n.len()).filter(|&i| n[i] > 0).collect();
    let p = |i: usize| n[i] as f64 / nt;
    let ps: f64 = lv.iter().map(|&i| p(i) * s[i]).sum();
    let coarseness = f64::min(1.0 / (1e-12 + ps), 1e12);
    if lv.len() < 2 {
        return [coarseness, 0.0, 0.0, 0.0, 0.0];
    }
    let ng = lv.len() as f64;
    let s_sum: f64 = s.iter().sum();
    let (mut c, mut bd, mut cx, mut st) = (0.0, 0.0, 0.0, 0.0);
    for &i in &lv {
        for &j in &lv {
            let (a, b) = ((i + 1) as f64, (j + 1) as f64);
            c += p(i) * p(j) * (a - b).powi(2);
            bd += (a * p(i) - b * p(j)).abs();
            cx += (a - b).abs() * (p(i) * s[i] + p(j) * s[j]) / (nt * (p(i) + p(j)));
            st += (p(i) + p(j)) * (a - b).powi(2);
        }
    }
    [
        coarseness,
        c / (ng * (ng - 1.0)) * s_sum / nt,
        if bd > 0.0 { ps / bd } else { 0.0 },
        cx,
        if s_sum > 0.0 { st / s_sum } else { 0.0 },
    ]
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Zones as a map (level, size) → count, via union-find over all touching
/// equal-level pairs.
pub fn glzsm(q: &[u16], dims: Dims) -> BTreeMap<(usize, usize), u64> {
    let mut parent: Vec<usize> = (0..q.len()).collect();
    for a in 0..q.len() {
        for b in a + 1..q.len() {
            if q[a] != 0 && q[a] == q[b] && touching(coord(dims, a), coord(dims, b)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut sizes = BTreeMap::<usize, usize>::new();
    for a in 0..q.len() {
        if q[a] != 0 {
            let r = find(&mut parent, a);
            *sizes.entry(r).or_default() += 1;
        }
    }
    let mut z = BTreeMap::new();
    for (root, size) in sizes {
        *z.entry((q[root] as usize, size)).or_default() += 1;
    }
    z
}

pub fn glzsm_features(z: &BTreeMap<(usize, usize), u64>, voxels: usize) -> [f64; 11] {
    let nz: f64 = z.values().map(|&c| c as f64).sum();
    let mut f = [0.0; 11];
    let mut by_level = BTreeMap::<usize, f64>::new();
    let mut by_size = BTreeMap::<usize, f64>::new();
    for (&(i, s), &c) in z {
        let (i2, s2, c) = (((i * i) as f64), ((s * s) as f64), c as f64);
        f[0] += c / s2;
        f[1] += c * s2;
        f[2] += c / i2;
        f[3] += c * i2;
        f[4] += c / (i2 * s2);
        f[5] += c * i2 / s2;
        f[6] += c * s2 / i2;
        f[7] += c * i2 * s2;
        *by_level.entry(i).or_default() += c;
        *by_size.entry(s).or_default() += c;
    }
    f[8] = by_level.values().map(|v| v * v).sum();
    f[9] = by_size.values().map(|v| v * v).sum();
    for v in &mut f[..10] {
        *v /= nz;
    }
    f[10] = nz / voxels as f64;
    f
}

pub fn histogram(vals: &[f32], mask: &[bool]) -> [f64; 6] {
    let x: Vec<f64> = vals.iter().zip(mask).filter(|p| *p.1).map(|p| *p.0 as f64).collect();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let var = m(2);
    let (skew, kurt) = if var > 0.0 {
        (m(3) / var.powf(1.5), m(4) / (var * var))
    } else {
        (0.0, 0.0)
    };
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut bins = vec![0usize; 256];
    for v in &x {
        let b = if hi > lo { (((v - lo) / (hi - lo)) * 256.0).floor() as usize } else { 0 };
        bins[b.min(255)] += 1;
    }
    let energy = bins.iter().map(|&c| (c as f64 / n).powi(2)).sum();
    let entropy = -bins.iter().map(|&c| plogp(c as f64 / n)).sum::<f64>();
    [mean, var, skew, kurt, energy, entropy]
}

/// Full 41-entry descriptor, or `None` when no GLCM pair exists.
pub fn feature_vector(vals: &[f32], mask: &[bool], dims: Dims, g: usize) -> Option<[f64; 41]> {
    let q = quantize(vals, mask, g);
    let (glcm, _) = glcm_block(&q, dims, g)?;
    let (s, n) = ngtdm(&q, dims, g);
    let voxels = mask.iter().filter(|&&m| m).count();
    let mut out = [0.0; 41];
    out[..6].copy_from_slice(&histogram(vals, mask));
    out[6..25].copy_from_slice(&glcm);
    out[25..30].copy_from_slice(&ngtdm_features(&s, &n));
    out[30..41].copy_from_slice(&glzsm_features(&glzsm(&q, dims), voxels));
    Some(out)
}

/// Absolute comparison with a relative fallback for large magnitudes.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * f64::max(1.0, b.abs())
}

// Convolution reference: multichannel grids as Vec<Vec<f64>> per channel.

pub struct Stack {
    pub dims: Dims,
    pub ch: Vec<Vec<f64>>,
}

pub fn at(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

/// Valid cross-correlation; filter layout `[out][in][z][y][x]`.
pub fn conv(input: &Stack, filter: &[f32], bias: &[f32], k: Dims, stride: Dims) -> Stack {
    let out_ch = bias.len();
    let in_ch = input.ch.len();
    let od: Dims = [0, 1, 2].map(|a| (input.dims[a] - k[a]) / stride[a] + 1);
    let mut ch = vec![vec![0.0; od[0] * od[1] * od[2]]; out_ch];
    for (o, out) in ch.iter_mut().enumerate() {
        for z in 0..od[2] {
            for y in 0..od[1] {
                for x in 0..od[0] {
                    let mut acc = bias[o] as f64;
                    for i in 0..in_ch {
                        for dz in 0..k[2] {
                            for dy in 0..k[1] {
                                for dx in 0..k[0] {
                                    let w = filter[(((o * in_ch + i) * k[2] + dz) * k[1] + dy) * k[0] + dx] as f64;
                                    let v = input.ch[i]
                                        [at(input.dims, x * stride[0] + dx, y * stride[1] + dy, z * stride[2] + dz)];
                                    acc += w * v;
                                }
                            }
                        }
                    }
                    out[at(od, x, y, z)] = acc;
                }
            }
        }
    }
    Stack { dims: od, ch }
}

/// Window max; with stride 1 the window is cut at the upper border (same as
/// replicating the last plane).
pub fn maxpool(input: &Stack, size: usize, stride: usize) -> Stack {
    let d = input.dims;
    let od: Dims = if stride == 1 { d } else { [0, 1, 2].map(|a| (d[a] - size) / stride + 1) };
    let ch = input
        .ch
        .iter()
        .map(|c| {
            let mut out = vec![f64::NEG_INFINITY; od[0] * od[1] * od[2]];
            for z in 0..od[2] {
                for y in 0..od[1] {
                    for x in 0..od[0] {
                        let m = &mut out[at(od, x, y, z)];
                        for wz in z * stride..(z * stride + size).min(d[2]) {
                            for wy in y * stride..(y * stride + size).min(d[1]) {
                                for wx in x * stride..(x * stride + size).min(d[0]) {
                                    *m = m.max(c[at(d, wx, wy, wz)]);
                                }
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    Stack { dims: od, ch }
}

pub fn relu(s: Stack) -> Stack {
    Stack {
        dims: s.dims,
        ch: s.ch.into_iter().map(|c| c.into_iter().map(|v| v.max(0.0)).collect()).collect(),
    }
}

/// Runs the network through the reference convolution and pooling.
pub fn forward(vol: &Volume, w: &NetworkWeights, spec: &NetworkSpec) -> (Stack, Stack) {
    let mut x = Stack {
        dims: vol.dims(),
        ch: vec![vol.data().iter().map(|&v| v as f64).collect()],
    };
    let mut outs = Vec::new();
    for (layer, cw) in spec.layers.iter().zip(&w.conv) {
        let y = relu(conv(&x, &cw.filter, &cw.bias, cw.kernel, layer.stride));
        x = maxpool(&y, layer.pool.size, layer.pool.stride);
        outs.push(Stack { dims: x.dims, ch: x.ch.clone() });
    }
    let b = outs.pop().unwrap();
    (outs.pop().unwrap(), b)
}

/// Max |a − b| over max |b|.
pub fn normwise_rel_err(a: &[f32], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y).abs()).fold(0.0, f64::max) / scale
}

// Survival reference.

/// Log-rank chi-square from a risk table built by scanning every distinct
/// event time against the whole cohort.
pub fn logrank_chi2(a: &[(f64, bool)], b: &[(f64, bool)]) -> f64 {
    let mut times: Vec<f64> = a.iter().chain(b).filter(|r| r.1).map(|r| r.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (mut o_minus_e, mut var) = (0.0, 0.0);
    for t in times {
        let na = a.iter().filter(|r| r.0 >= t).count() as f64;
        let nb = b.iter().filter(|r| r.0 >= t).count() as f64;
        let da = a.iter().filter(|r| r.0 == t && r.1).count() as f64;
        let db = b.iter().filter(|r| r.0 == t && r.1).count() as f64;
        let (n, d) = (na + nb, da + db);
        o_minus_e += da - d * na / n;
        if n > 1.0 {
            var += d * (na / n) * (nb / n) * (n - d) / (n - 1.0);
        }
    }
    if var > 0.0 {
        o_minus_e * o_minus_e / var
    } else {
        0.0
    }
}

// Classifier reference data.

/// AUC by comparing every positive with every negative.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

/// Balanced two-feature set: feature 0 separates the classes by a gap,
/// feature 1 is noise.
pub fn separable(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut r = rng(seed);
    let y: Vec<bool> = (0..n).map(|i| i % 2 == 1).collect();
    let x = y
        .iter()
        .map(|&c| {
            let base = if c { 2.0 } else { 0.0 };
            vec![base + r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)]
        })
        .collect();
    (x, y)
}
