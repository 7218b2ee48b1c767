use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::learn::ForestParams;
use crate::volume_io::Dims;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightsSource {
    File(PathBuf),
    /// Glorot-uniform filters from this seed.
    Seeded(u64),
    /// Glorot-uniform filters from the run's master seed.
    MasterSeed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub weights: WeightsSource,
    pub input_size: Dims,
    pub target_spacing: f64,
    pub gray_levels: u32,
    pub matrix_levels: usize,
    pub forest: ForestParams,
    pub folds: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: PathBuf::from("manifest.csv"),
            weights: WeightsSource::MasterSeed,
            input_size: [256; 3],
            target_spacing: 1.0,
            gray_levels: 256,
            matrix_levels: 32,
            forest: ForestParams::default(),
            folds: 5,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_dims(value: &str) -> Result<Dims> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let parse = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::format("input_size", format!("bad size `{s}`")))
    };
    match parts.as_slice() {
        [n] => Ok([parse(n)?; 3]),
        [x, y, z] => Ok([parse(x)?, parse(y)?, parse(z)?]),
        _ => Err(Error::format("input_size", "expected N or X,Y,Z")),
    }
}

impl RunConfig {
    /// Applies one `key=value` setting. Keys mirror the CLI flags with
    /// underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let num = |field: &str| -> Result<u64> {
            value
                .parse()
                .map_err(|_| Error::format(field, format!("`{value}` is not an integer")))
        };
        match key.trim() {
            "manifest" => self.manifest = PathBuf::from(value),
            "weights" => self.weights = WeightsSource::File(PathBuf::from(value)),
            "weights_seed" => self.weights = WeightsSource::Seeded(num("weights_seed")?),
            "seed" => {
                let seed = num("seed")?;
                self.seed = seed;
                self.forest.seed = seed;
            }
            "out" => self.out_dir = PathBuf::from(value),
            "folds" => self.folds = num("folds")? as usize,
            "trees" => self.forest.n_trees = num("trees")? as usize,
            "mtry" => self.forest.mtry = Some(num("mtry")? as usize),
            "min_leaf" => self.forest.min_leaf = num("min_leaf")? as usize,
            "max_depth" => self.forest.max_depth = Some(num("max_depth")? as usize),
            "input_size" => self.input_size = parse_dims(value)?,
            "gray_levels" => self.gray_levels = num("gray_levels")? as u32,
            "matrix_levels" => self.matrix_levels = num("matrix_levels")? as usize,
            "spacing" => {
                self.target_spacing = value
                    .parse()
                    .ok()
                    .filter(|&s: &f64| s > 0.0)
                    .ok_or_else(|| Error::format("spacing", format!("`{value}`")))?
            }
            other => return Err(Error::format(other, "unknown config key")),
        }
        Ok(())
    }

    /// Reads a `key=value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(line, "expected key=value"))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Ordered key/value pairs for the run manifest.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        let f = &self.forest;
        vec![
            ("manifest", self.manifest.display().to_string()),
            (
                "weights",
                match &self.weights {
                    WeightsSource::File(p) => p.display().to_string(),
                    WeightsSource::Seeded(s) => format!("seeded:{s}"),
                    WeightsSource::MasterSeed => format!("seeded:{}", self.seed),
                },
            ),
            (
                "input_size",
                format!("{},{},{}", self.input_size[0], self.input_size[1], self.input_size[2]),
            ),
            ("spacing", self.target_spacing.to_string()),
            ("gray_levels", self.gray_levels.to_string()),
            ("matrix_levels", self.matrix_levels.to_string()),
            ("trees", f.n_trees.to_string()),
            ("mtry", f.mtry.map_or("auto".into(), |m| m.to_string())),
            ("min_leaf", f.min_leaf.to_string()),
            ("max_depth", f.max_depth.map_or("none".into(), |d| d.to_string())),
            ("folds", self.folds.to_string()),
            ("seed", self.seed.to_string()),
            ("out", self.out_dir.display().to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_settings_apply() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        fs::write(&p, "# study\nseed=7\ntrees = 40\ninput_size=64\nweights_seed=3\n").unwrap();
        let mut c = RunConfig::default();
        c.apply_file(&p).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.forest.seed, 7);
        assert_eq!(c.forest.n_trees, 40);
        assert_eq!(c.input_size, [64; 3]);
        assert_eq!(c.weights, WeightsSource::Seeded(3));
        assert!(c.set("bogus", "1").is_err());
    }
}
