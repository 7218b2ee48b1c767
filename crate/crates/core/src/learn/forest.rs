use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// SplitMix64 finalizer; derives independent stream seeds from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per node; `None` means ⌈√p⌉.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    /// `None` grows until purity or `min_leaf`.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: None,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class-0 and class-1 probabilities.
    Leaf { proba: [f64; 2] },
}

/// Binary CART tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Training rows never drawn into this tree's bootstrap sample.
    pub oob: Vec<usize>,
}

impl Tree {
    pub fn leaf_proba(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { proba } => return proba[1],
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_class(&self, x: &[f64]) -> bool {
        self.leaf_proba(x) >= 0.5
    }

    pub fn uses_feature(&self, f: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n, Node::Split { feature, .. } if *feature == f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub params: ForestParams,
}

pub(crate) fn check_design(x: &[Vec<f64>], y: &[bool]) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Shape(format!("{} rows of X for {} labels", x.len(), y.len())));
    }
    let p = x[0].len();
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::Shape("rows of X must share a non-zero width".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Shape("X contains non-finite values".into()));
    }
    Ok(p)
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    nodes: Vec<Node>,
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let ones = rows.iter().filter(|&&r| self.y[r]).count() as f64;
        let p1 = ones / rows.len() as f64;
        Node::Leaf {
            proba: [1.0 - p1, p1],
        }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let ones = rows.iter().filter(|&&r| self.y[r]).count();
        let pure = ones == 0 || ones == rows.len();
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || rows.len() < 2 * self.min_leaf {
            self.nodes.push(self.leaf(rows));
            return id;
        }
        let Some(best) = self.best_split(rows, rng) else {
            self.nodes.push(self.leaf(rows));
            return id;
        };
        // placeholder, patched once children exist
        self.nodes.push(Node::Leaf { proba: [0.0, 0.0] });
        let (feature, threshold) = (best.feature, best.threshold);
        let mut cut = 0;
        for i in 0..rows.len() {
            if self.x[rows[i]][feature] <= threshold {
                rows.swap(i, cut);
                cut += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(cut);
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let p = self.x[0].len();
        let mut features = sample(rng, p, self.mtry).into_vec();
        features.sort_unstable();

        let n = rows.len();
        let total_ones = rows.iter().filter(|&&r| self.y[r]).count();
        let mut best: Option<BestSplit> = None;
        let mut column: Vec<(f64, bool)> = Vec::with_capacity(n);
        for &f in &features {
            column.clear();
            column.extend(rows.iter().map(|&r| (self.x[r][f], self.y[r])));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_ones = 0usize;
            for i in 0..n - 1 {
                left_ones += column[i].1 as usize;
                let n_left = i + 1;
                if column[i].0 == column[i + 1].0 {
                    continue;
                }
                let n_right = n - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let impurity = weighted_gini(n_left, left_ones, n_right, total_ones - left_ones);
                let threshold = column[i].0 + (column[i + 1].0 - column[i].0) / 2.0;
                // strict improvement only; features are visited in ascending
                // order and thresholds ascending, so ties keep the lowest
                if best.as_ref().map_or(true, |b| impurity < b.impurity) {
                    best = Some(BestSplit {
                        impurity,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

/// Σ_children n_c · gini_c, proportional to the weighted child impurity.
fn weighted_gini(n_left: usize, left_ones: usize, n_right: usize, right_ones: usize) -> f64 {
    let part = |n: usize, ones: usize| {
        let n = n as f64;
        let a = ones as f64;
        let b = n - a;
        n - (a * a + b * b) / n
    };
    part(n_left, left_ones) + part(n_right, right_ones)
}

fn grow_tree(x: &[Vec<f64>], y: &[bool], params: &ForestParams, mtry: usize, index: usize) -> Tree {
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, index as u64));
    let mut rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut drawn = vec![false; n];
    for &r in &rows {
        drawn[r] = true;
    }
    let oob = (0..n).filter(|&i| !drawn[i]).collect();
    let mut grower = Grower {
        x,
        y,
        mtry,
        min_leaf: params.min_leaf.max(1),
        max_depth: params.max_depth,
        nodes: Vec::new(),
    };
    grower.grow(&mut rows, 0, &mut rng);
    Tree {
        nodes: grower.nodes,
        oob,
    }
}

/// Bagged Gini trees with per-node feature subsampling. Each tree draws its
/// bootstrap sample and feature subsets from its own stream derived from
/// `params.seed` and the tree index.
pub fn train_forest(x: &[Vec<f64>], y: &[bool], params: &ForestParams) -> Result<ForestModel> {
    let p = check_design(x, y)?;
    if params.n_trees == 0 {
        return Err(Error::Training("n_trees must be >= 1".into()));
    }
    if let Some(m) = params.mtry {
        if m == 0 || m > p {
            return Err(Error::Training(format!("mtry {m} outside 1..={p}")));
        }
    }
    let ones = y.iter().filter(|&&v| v).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::Training("labels contain a single class".into()));
    }
    let mtry = params.resolved_mtry(p);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(x, y, params, mtry, t))
        .collect();
    Ok(ForestModel {
        trees,
        n_features: p,
        params: params.clone(),
    })
}

/// Mean class-1 leaf probability over the trees.
pub fn predict_proba(model: &ForestModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    if let Some(row) = x.iter().find(|r| r.len() != model.n_features) {
        return Err(Error::Shape(format!(
            "row has {} features, model was trained on {}",
            row.len(),
            model.n_features
        )));
    }
    let k = model.trees.len() as f64;
    Ok(x
        .iter()
        .map(|row| model.trees.iter().map(|t| t.leaf_proba(row)).sum::<f64>() / k)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    /// Mean per-tree OOB accuracy drop divided by its standard deviation.
    pub importance: Vec<f64>,
    pub mean_drop: Vec<f64>,
    pub std_drop: Vec<f64>,
    /// Trees that had a non-empty OOB set.
    pub trees_used: usize,
}

impl ImportanceReport {
    pub fn is_predictive(&self, feature: usize) -> bool {
        self.importance[feature] > 0.0
    }
}

/// Out-of-bag permutation importance, normalized by the spread over trees.
pub fn oob_importance(
    model: &ForestModel,
    x: &[Vec<f64>],
    y: &[bool],
    seed: u64,
) -> Result<ImportanceReport> {
    let p = check_design(x, y)?;
    if p != model.n_features {
        return Err(Error::Shape(format!(
            "X has {p} features, model was trained on {}",
            model.n_features
        )));
    }
    if let Some(&bad) = model.trees.iter().flat_map(|t| &t.oob).find(|&&i| i >= x.len()) {
        return Err(Error::Shape(format!("OOB index {bad} beyond {} rows", x.len())));
    }

    let per_tree: Vec<Vec<f64>> = model
        .trees
        .par_iter()
        .enumerate()
        .filter(|(_, t)| !t.oob.is_empty())
        .map(|(ti, tree)| {
            let accuracy = |rows: &[Vec<f64>]| {
                rows.iter()
                    .zip(&tree.oob)
                    .filter(|(r, &i)| tree.predict_class(r) == y[i])
                    .count() as f64
                    / tree.oob.len() as f64
            };
            let mut oob_rows: Vec<Vec<f64>> = tree.oob.iter().map(|&i| x[i].clone()).collect();
            let base = accuracy(&oob_rows);
            (0..p)
                .map(|f| {
                    if !tree.uses_feature(f) {
                        return 0.0;
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        seed,
                        ((ti as u64) << 20) | f as u64,
                    ));
                    let original: Vec<f64> = oob_rows.iter().map(|r| r[f]).collect();
                    let mut shuffled = original.clone();
                    shuffled.shuffle(&mut rng);
                    for (r, v) in oob_rows.iter_mut().zip(&shuffled) {
                        r[f] = *v;
                    }
                    let drop = base - accuracy(&oob_rows);
                    for (r, v) in oob_rows.iter_mut().zip(&original) {
                        r[f] = *v;
                    }
                    drop
                })
                .collect()
        })
        .collect();

    let used = per_tree.len();
    let mut importance = vec![0.0; p];
    let mut mean_drop = vec![0.0; p];
    let mut std_drop = vec![0.0; p];
    if used > 0 {
        for f in 0..p {
            let mean = per_tree.iter().map(|d| d[f]).sum::<f64>() / used as f64;
            let var = if used > 1 {
                per_tree.iter().map(|d| (d[f] - mean).powi(2)).sum::<f64>() / (used - 1) as f64
            } else {
                0.0
            };
            let sd = var.sqrt();
            mean_drop[f] = mean;
            std_drop[f] = sd;
            importance[f] = if sd > 0.0 { mean / sd } else { 0.0 };
        }
    }
    Ok(ImportanceReport {
        importance,
        mean_drop,
        std_drop,
        trees_used: used,
    })
}

impl ForestModel {
    /// Line-oriented text dump; [`ForestModel::from_text`] reads it back exactly.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::from("forest v1\n");
        let _ = writeln!(
            out,
            "params n_features={} n_trees={} mtry={} min_leaf={} max_depth={} seed={}",
            self.n_features,
            p.n_trees,
            p.mtry.map_or("auto".into(), |m| m.to_string()),
            p.min_leaf,
            p.max_depth.map_or("none".into(), |d| d.to_string()),
            p.seed
        );
        for (i, t) in self.trees.iter().enumerate() {
            let oob: Vec<String> = t.oob.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "tree {i} nodes={} oob={}", t.nodes.len(), oob.join(","));
            for n in &t.nodes {
                match n {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(out, "S {feature} {threshold:?} {left} {right}");
                    }
                    Node::Leaf { proba } => {
                        let _ = writeln!(out, "L {:?} {:?}", proba[0], proba[1]);
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::format("forest", what.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("forest v1") {
            return Err(bad("missing `forest v1` preamble"));
        }
        let params_line = lines.next().ok_or_else(|| bad("missing params line"))?;
        let mut kv = std::collections::HashMap::new();
        for tok in params_line.split_whitespace().skip(1) {
            let (k, v) = tok.split_once('=').ok_or_else(|| bad("malformed params"))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(&format!("missing `{k}`")));
        let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| bad(&format!("bad `{k}`"))) };
        let params = ForestParams {
            n_trees: num("n_trees")? as usize,
            mtry: match get("mtry")? {
                "auto" => None,
                _ => Some(num("mtry")? as usize),
            },
            min_leaf: num("min_leaf")? as usize,
            max_depth: match get("max_depth")? {
                "none" => None,
                _ => Some(num("max_depth")? as usize),
            },
            seed: num("seed")?,
        };
        let n_features = num("n_features")? as usize;

        let mut trees = Vec::new();
        while let Some(header) = lines.next() {
            let mut parts = header.split_whitespace();
            if parts.next() != Some("tree") {
                return Err(bad("expected `tree` record"));
            }
            parts.next();
            let n_nodes: usize = parts
                .next()
                .and_then(|s| s.strip_prefix("nodes="))
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad node count"))?;
            let oob_field = parts
                .next()
                .and_then(|s| s.strip_prefix("oob="))
                .ok_or_else(|| bad("missing oob list"))?;
            let oob = if oob_field.is_empty() {
                Vec::new()
            } else {
                oob_field
                    .split(',')
                    .map(|s| s.parse().map_err(|_| bad("bad oob index")))
                    .collect::<Result<Vec<usize>>>()?
            };
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let line = lines.next().ok_or_else(|| bad("truncated tree"))?;
                let f: Vec<&str> = line.split_whitespace().collect();
                let node = match f.as_slice() {
                    ["S", feat, thr, l, r] => Node::Split {
                        feature: feat.parse().map_err(|_| bad("bad feature"))?,
                        threshold: thr.parse().map_err(|_| bad("bad threshold"))?,
                        left: l.parse().map_err(|_| bad("bad child"))?,
                        right: r.parse().map_err(|_| bad("bad child"))?,
                    },
                    ["L", p0, p1] => Node::Leaf {
                        proba: [
                            p0.parse().map_err(|_| bad("bad probability"))?,
                            p1.parse().map_err(|_| bad("bad probability"))?,
                        ],
                    },
                    _ => return Err(bad("unknown node record")),
                };
                nodes.push(node);
            }
            for n in &nodes {
                if let Node::Split { left, right, feature, .. } = n {
                    if *left >= nodes.len() || *right >= nodes.len() || *feature >= n_features {
                        return Err(bad("node reference out of range"));
                    }
                }
            }
            trees.push(Tree { nodes, oob });
        }
        if trees.len() != params.n_trees {
            return Err(bad("tree count differs from params"));
        }
        Ok(ForestModel {
            trees,
            n_features,
            params,
        })
    }
}
