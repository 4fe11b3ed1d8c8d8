//! Histogram gradient-boosted regression trees for weighted squared error.

use serde::{Deserialize, Serialize};

use super::{check_weighted_inputs, Predict};
use crate::data::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbrtConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bins: usize,
}

impl Default for GbrtConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 20,
            bins: 255,
        }
    }
}

impl GbrtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth < 1 || self.min_leaf < 1 {
            return Err(Error::Config("max_depth and min_leaf must be >= 1".into()));
        }
        if !(2..=256).contains(&self.bins) {
            return Err(Error::Config(format!(
                "bins must lie in [2, 256], got {}",
                self.bins
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

/// One regression tree; node 0 is the root. Leaf values already include the
/// learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf(v) => return *v,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn is_stump_leaf(&self) -> bool {
        self.nodes.len() == 1
    }
}

#[derive(Debug, Clone)]
pub struct GbrtModel {
    pub init: f64,
    pub trees: Vec<Tree>,
    /// Weighted training squared error after initialisation and after each round.
    pub training_loss: Vec<f64>,
}

impl Predict for GbrtModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        self.init + self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>()
    }
}

/// Per-feature split candidates. Bin `b` holds values in
/// `(thresholds[b-1], thresholds[b]]`.
fn feature_thresholds(values: &mut [f64], bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut uniq: Vec<f64> = Vec::new();
    for &v in values.iter() {
        if uniq.last() != Some(&v) {
            uniq.push(v);
        }
    }
    if uniq.len() <= bins {
        return uniq.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let mut out: Vec<f64> = Vec::with_capacity(bins - 1);
    for q in 1..bins {
        let idx = q * n / bins;
        if idx == 0 || idx >= n || values[idx - 1] == values[idx] {
            continue;
        }
        let t = 0.5 * (values[idx - 1] + values[idx]);
        if out.last().is_none_or(|&last| t > last) {
            out.push(t);
        }
    }
    out
}

struct Binned {
    /// Column-major bin indices.
    codes: Vec<u8>,
    n: usize,
    thresholds: Vec<Vec<f64>>,
}

impl Binned {
    fn new(x: &Matrix, bins: usize) -> Self {
        let n = x.nrows();
        let d = x.ncols();
        let mut codes = vec![0u8; n * d];
        let mut thresholds = Vec::with_capacity(d);
        for j in 0..d {
            let col = x.column(j);
            let t = feature_thresholds(&mut col.clone(), bins);
            for (i, v) in col.iter().enumerate() {
                codes[j * n + i] = t.partition_point(|&th| th < *v) as u8;
            }
            thresholds.push(t);
        }
        Self {
            codes,
            n,
            thresholds,
        }
    }

    fn code(&self, feature: usize, row: usize) -> usize {
        self.codes[feature * self.n + row] as usize
    }
}

struct Grower<'a> {
    binned: &'a Binned,
    residual: &'a [f64],
    w: &'a [f64],
    cfg: &'a GbrtConfig,
    nodes: Vec<TreeNode>,
    /// `(rows, leaf value)` per emitted leaf, for the training update.
    leaves: Vec<(Vec<usize>, f64)>,
}

struct BestSplit {
    feature: usize,
    bin: usize,
    gain: f64,
}

impl Grower<'_> {
    fn best_split(&self, rows: &[usize]) -> Option<BestSplit> {
        let (mut g_tot, mut w_tot, mut ss) = (0.0, 0.0, 0.0);
        for &i in rows {
            let wr = self.w[i] * self.residual[i];
            g_tot += wr;
            w_tot += self.w[i];
            ss += wr * self.residual[i];
        }
        if w_tot <= 0.0 || ss <= 0.0 {
            return None;
        }
        let parent = g_tot * g_tot / w_tot;
        let min_leaf = self.cfg.min_leaf;
        let mut best: Option<BestSplit> = None;
        for (f, thr) in self.binned.thresholds.iter().enumerate() {
            let nb = thr.len() + 1;
            if nb < 2 {
                continue;
            }
            let mut hg = vec![0.0; nb];
            let mut hw = vec![0.0; nb];
            let mut hc = vec![0usize; nb];
            for &i in rows {
                let b = self.binned.code(f, i);
                hg[b] += self.w[i] * self.residual[i];
                hw[b] += self.w[i];
                hc[b] += 1;
            }
            let (mut gl, mut wl, mut cl) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                gl += hg[b];
                wl += hw[b];
                cl += hc[b];
                let cr = rows.len() - cl;
                if cl < min_leaf {
                    continue;
                }
                if cr < min_leaf {
                    break;
                }
                let wr = w_tot - wl;
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let gr = g_tot - gl;
                let gain = gl * gl / wl + gr * gr / wr - parent;
                if best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        bin: b,
                        gain,
                    });
                }
            }
        }
        // explained sum of squares below round-off is not a split
        best.filter(|s| s.gain > 1e-10 * ss)
    }

    fn leaf(&mut self, rows: Vec<usize>) -> usize {
        let (mut g, mut wsum) = (0.0, 0.0);
        for &i in &rows {
            g += self.w[i] * self.residual[i];
            wsum += self.w[i];
        }
        let value = if wsum > 0.0 {
            self.cfg.learning_rate * g / wsum
        } else {
            0.0
        };
        self.nodes.push(TreeNode::Leaf(value));
        self.leaves.push((rows, value));
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        if depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_leaf {
            return self.leaf(rows);
        }
        let Some(split) = self.best_split(&rows) else {
            return self.leaf(rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.binned.code(split.feature, i) <= split.bin);
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf(0.0));
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: self.binned.thresholds[split.feature][split.bin],
            left,
            right,
        };
        at
    }
}

fn weighted_sse(y: &[f64], pred: &[f64], w: &[f64]) -> f64 {
    y.iter()
        .zip(pred)
        .zip(w)
        .map(|((y, p), w)| w * (y - p) * (y - p))
        .sum()
}

/// Stagewise least-squares boosting from the weighted mean of `y`.
pub fn fit_gbrt(x: &Matrix, y: &[f64], w: &[f64], cfg: &GbrtConfig) -> Result<GbrtModel> {
    cfg.validate()?;
    let total = check_weighted_inputs(x, y, w)?;
    let init = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / total;
    let binned = Binned::new(x, cfg.bins);
    let mut pred = vec![init; y.len()];
    let mut residual: Vec<f64> = y.iter().map(|v| v - init).collect();
    let mut training_loss = vec![weighted_sse(y, &pred, w)];
    let mut trees = Vec::with_capacity(cfg.rounds);
    let all: Vec<usize> = (0..y.len()).collect();
    for _ in 0..cfg.rounds {
        let mut grower = Grower {
            binned: &binned,
            residual: &residual,
            w,
            cfg,
            nodes: Vec::new(),
            leaves: Vec::new(),
        };
        grower.grow(all.clone(), 0);
        let Grower { nodes, leaves, .. } = grower;
        for (rows, value) in leaves {
            for i in rows {
                pred[i] += value;
            }
        }
        for i in 0..y.len() {
            residual[i] = y[i] - pred[i];
        }
        training_loss.push(weighted_sse(y, &pred, w));
        trees.push(Tree { nodes });
    }
    Ok(GbrtModel {
        init,
        trees,
        training_loss,
    })
}
