//! Synthetic cohort generator: smoothed Gaussian noise volumes whose
//! correlation length depends on a hidden class, ellipsoidal ROIs, and
//! exponential survival times per class.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::learn::derive_seed;
use crate::volume_io::{linear_index, voxel_count, write_raw, write_raw_mask, Dims, RawDtype, RoiMask, Volume};

use super::manifest::{CohortManifest, ManifestRow};

const CENSOR_STREAM: u64 = 0xCE05;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_patients: usize,
    pub dims: Dims,
    /// Gaussian smoothing sigma (voxels) of the short- and long-survival class.
    pub length_scales: [f64; 2],
    /// Exponential median survival (days) of the short- and long-survival class.
    pub medians_days: [f64; 2],
    pub censoring_fraction: f64,
    /// Exponent β of the per-patient length-scale `ℓ_c·(t/m_c)^β`, with `t`
    /// the patient's true survival time and the ratio clamped to
    /// [1/8, 8]. `None` picks the β that puts both classes on one curve;
    /// zero makes texture depend on the class alone.
    pub survival_coupling: Option<f64>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_patients: 100,
            dims: [64; 3],
            length_scales: [2.0, 4.0],
            medians_days: [300.0, 600.0],
            censoring_fraction: 0.06,
            survival_coupling: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.n_patients == 0 {
            return bad("synthetic cohort needs at least one patient".into());
        }
        if self.dims.iter().any(|&d| d < 8) {
            return bad(format!("volume dims {:?} too small", self.dims));
        }
        if self.length_scales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("length scales must be positive".into());
        }
        if self.medians_days.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return bad("median survival must be positive".into());
        }
        if self.medians_days[0] == self.medians_days[1] {
            return bad("class medians must differ".into());
        }
        if !(0.0..1.0).contains(&self.censoring_fraction) {
            return bad(format!("censoring fraction {} outside [0, 1)", self.censoring_fraction));
        }
        if !self.coupling().is_finite() {
            return bad("coupling must be finite".into());
        }
        Ok(())
    }

    /// Resolved β; the default satisfies `ℓ_long/ℓ_short = (m_long/m_short)^β`.
    pub fn coupling(&self) -> f64 {
        self.survival_coupling.unwrap_or_else(|| {
            (self.length_scales[1] / self.length_scales[0]).ln() / (self.medians_days[1] / self.medians_days[0]).ln()
        })
    }
}

/// Ground truth kept alongside the written files.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPatient {
    pub patient_id: String,
    /// `true` for the long-survival class.
    pub long_class: bool,
    pub length_scale: f64,
    pub true_time_days: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub manifest: CohortManifest,
    pub patients: Vec<SynthPatient>,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn blur_axis(data: &[f64], dims: Dims, axis: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let n = dims[axis] as isize;
    let mut out = vec![0.0; data.len()];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let pos = [x, y, z];
                let mut acc = 0.0;
                for (ki, w) in kernel.iter().enumerate() {
                    // mirror at the borders
                    let mut c = pos[axis] as isize + ki as isize - r;
                    if c < 0 {
                        c = -c - 1;
                    }
                    if c >= n {
                        c = 2 * n - c - 1;
                    }
                    let c = c.clamp(0, n - 1) as usize;
                    let mut p = pos;
                    p[axis] = c;
                    acc += w * data[linear_index(dims, p[0], p[1], p[2])];
                }
                out[linear_index(dims, x, y, z)] = acc;
            }
        }
    }
    out
}

/// White noise smoothed by a separable Gaussian of width `sigma`, rescaled
/// to zero mean and unit variance.
pub fn gaussian_random_field(dims: Dims, sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut field: Vec<f64> = (0..voxel_count(dims)).map(|_| StandardNormal.sample(rng)).collect();
    let kernel = gaussian_kernel(sigma);
    for axis in 0..3 {
        field = blur_axis(&field, dims, axis, &kernel);
    }
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let sd = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    field.iter_mut().for_each(|v| *v = (*v - mean) / sd.max(1e-12));
    field
}

fn ellipsoid(dims: Dims, rng: &mut impl Rng) -> RoiMask {
    let c: Vec<f64> = dims
        .iter()
        .map(|&d| d as f64 / 2.0 - 0.5 + rng.gen_range(-0.06..0.06) * d as f64)
        .collect();
    let r: Vec<f64> = dims.iter().map(|&d| rng.gen_range(0.22..0.31) * d as f64).collect();
    let mut mask = RoiMask::empty(dims).expect("validated dims");
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let q = [x, y, z]
                    .iter()
                    .enumerate()
                    .map(|(a, &p)| ((p as f64 - c[a]) / r[a]).powi(2))
                    .sum::<f64>();
                if q <= 1.0 {
                    mask.set(x, y, z, true);
                }
            }
        }
    }
    mask
}

/// Writes `patient_NNN.rawvol` volumes, `patient_NNN_mask.rawvol` masks and
/// `manifest.csv` into `out_dir`.
pub fn generate_synthetic_cohort(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<SynthCohort> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let n = spec.n_patients;
    let n_censored = (spec.censoring_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut crng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, CENSOR_STREAM));
    order.shuffle(&mut crng);
    let mut censored = vec![false; n];
    for &i in &order[..n_censored] {
        censored[i] = true;
    }
    let censor_frac: Vec<f64> = (0..n).map(|_| crng.gen_range(0.2..1.0)).collect();

    let beta = spec.coupling();
    let mut rows = Vec::with_capacity(n);
    let mut patients = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, i as u64));
        let long_class = rng.gen_bool(0.5);
        let class = long_class as usize;
        let u: f64 = rng.gen_range(0.0..1.0);
        let rate = std::f64::consts::LN_2 / spec.medians_days[class];
        let true_time = -(1.0 - u).ln() / rate;
        let ratio = (true_time / spec.medians_days[class]).clamp(0.125, 8.0);
        let length_scale = spec.length_scales[class] * ratio.powf(beta);

        let field = gaussian_random_field(spec.dims, length_scale, &mut rng);
        let mask = ellipsoid(spec.dims, &mut rng);
        let data: Vec<f32> = field.iter().map(|&v| (100.0 + 25.0 * v) as f32).collect();
        let vol = Volume::new(spec.dims, [1.0; 3], data)?;

        let id = format!("patient_{i:03}");
        let vol_name = format!("{id}.rawvol");
        let mask_name = format!("{id}_mask.rawvol");
        write_raw(&vol, out_dir.join(&vol_name), RawDtype::F32)?;
        write_raw_mask(&mask, out_dir.join(&mask_name))?;

        let (observed, event) = if censored[i] {
            (true_time * censor_frac[i], false)
        } else {
            (true_time, true)
        };
        // round to 1e-3 days so the manifest text round-trips exactly
        let observed = (observed * 1000.0).round() / 1000.0;
        rows.push(ManifestRow {
            patient_id: id.clone(),
            volume_path: vol_name,
            mask_path: mask_name,
            survival_days: observed,
            event,
        });
        patients.push(SynthPatient {
            patient_id: id,
            long_class,
            length_scale,
            true_time_days: true_time,
        });
    }
    let manifest = CohortManifest {
        rows,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.write(out_dir.join("manifest.csv"))?;
    Ok(SynthCohort { manifest, patients })
}
