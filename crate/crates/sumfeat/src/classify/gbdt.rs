//! Gradient-boosted decision trees with second-order (gradient/hessian)
//! exact greedy splits and native missing-value handling: at every split the
//! absent samples are routed to whichever side yields the higher gain, and
//! that side is stored as the node's default direction.
//!
//! Binary targets use the logistic loss with the prior log-odds as base
//! score; K > 2 targets use a softmax objective with one tree per class per
//! round. There is no subsampling and no histogram approximation, so a fit
//! is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    /// Boosting rounds (trees per class).
    pub n_trees: usize,
    /// Maximum tree depth; the root sits at depth 0.
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum gain required to keep a split.
    pub gamma: f64,
    /// Minimum hessian mass on each side of a split.
    pub min_child_hessian: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_trees: 100,
            max_depth: 5,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_hessian: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Where samples with an absent split feature go.
        default_left: bool,
        left: usize,
        right: usize,
        /// Realized split gain; summed per feature for importance.
        gain: f64,
    },
    Leaf { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Margin contribution of this tree for one sample row. Absent values
    /// follow the stored default direction at each split.
    pub fn predict_margin(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let v = row[*feature];
                    let go_left = if v.is_nan() { *default_left } else { v < *threshold };
                    idx = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn node_depth(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + node_depth(nodes, *left).max(node_depth(nodes, *right))
                }
            }
        }
        node_depth(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    /// Binary: one tree per round. Multi-class: K trees per round, grouped
    /// round by round in class order.
    pub trees: Vec<Tree>,
    pub n_classes: usize,
    pub n_features: usize,
    /// Initial margin per class: prior log-odds for binary (single entry),
    /// zeros for softmax.
    pub base_score: Vec<f64>,
    pub config: GbdtConfig,
    /// Mean training loss after each round, preceded by the base-score loss.
    pub train_loss: Vec<f64>,
}

impl GbdtModel {
    /// Raw margins, one column per class margin (1 for binary, K otherwise).
    pub fn predict_margins(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.cols() != self.n_features {
            return Err(Error::Config(format!(
                "model expects {} features, input has {}",
                self.n_features,
                x.cols()
            )));
        }
        let width = self.base_score.len();
        let mut out = FeatureMatrix::zeros(x.rows(), width);
        for r in 0..x.rows() {
            let row = x.row(r);
            if self.n_classes == 2 {
                let mut m = self.base_score[0];
                for tree in &self.trees {
                    m += tree.predict_margin(row);
                }
                out.set(r, 0, m);
            } else {
                let mut margins = self.base_score.clone();
                for group in self.trees.chunks(self.n_classes) {
                    for (k, tree) in group.iter().enumerate() {
                        margins[k] += tree.predict_margin(row);
                    }
                }
                for (k, m) in margins.iter().enumerate() {
                    out.set(r, k, *m);
                }
            }
        }
        Ok(out)
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let margins = self.predict_margins(x)?;
        let mut out = FeatureMatrix::zeros(x.rows(), self.n_classes);
        for r in 0..x.rows() {
            if self.n_classes == 2 {
                let p = sigmoid(margins.get(r, 0));
                out.set(r, 0, 1.0 - p);
                out.set(r, 1, p);
            } else {
                let probs = softmax(margins.row(r));
                for (k, p) in probs.iter().enumerate() {
                    out.set(r, k, *p);
                }
            }
        }
        Ok(out)
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(margins: &[f64]) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = margins.iter().map(|&m| (m - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Sample order per feature: indices of observed values sorted ascending
/// (ties by sample index), plus the list of samples where the feature is
/// absent. Computed once per fit and shared by every tree.
struct SortedFeatures {
    sorted: Vec<Vec<u32>>,
    missing: Vec<Vec<u32>>,
}

impl SortedFeatures {
    fn build(x: &FeatureMatrix) -> Self {
        let mut sorted = Vec::with_capacity(x.cols());
        let mut missing = Vec::with_capacity(x.cols());
        for f in 0..x.cols() {
            let mut observed: Vec<u32> = Vec::new();
            let mut absent: Vec<u32> = Vec::new();
            for s in 0..x.rows() {
                if x.get(s, f).is_nan() {
                    absent.push(s as u32);
                } else {
                    observed.push(s as u32);
                }
            }
            observed.sort_by(|&a, &b| {
                x.get(a as usize, f)
                    .partial_cmp(&x.get(b as usize, f))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            sorted.push(observed);
            missing.push(absent);
        }
        SortedFeatures { sorted, missing }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
}

struct FrontierNode {
    id: usize,
    g: f64,
    h: f64,
}

struct TreeGrower<'a> {
    x: &'a FeatureMatrix,
    g: &'a [f64],
    h: &'a [f64],
    cfg: &'a GbdtConfig,
    feats: &'a SortedFeatures,
}

impl<'a> TreeGrower<'a> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.cfg.lambda;
        if denom > 0.0 {
            self.cfg.learning_rate * (-g / denom)
        } else {
            0.0
        }
    }

    fn side_score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    fn grow(&self) -> Tree {
        let n = self.g.len();
        let mut positions: Vec<u32> = vec![0; n];
        let (mut g0, mut h0) = (0.0, 0.0);
        for i in 0..n {
            g0 += self.g[i];
            h0 += self.h[i];
        }
        let mut nodes = vec![TreeNode::Leaf {
            weight: self.leaf_weight(g0, h0),
        }];
        let mut frontier = vec![FrontierNode { id: 0, g: g0, h: h0 }];

        for _ in 0..self.cfg.max_depth {
            if frontier.is_empty() {
                break;
            }
            let best = self.best_splits(&frontier, &positions);

            struct Apply {
                feature: usize,
                threshold: f64,
                default_left: bool,
                left: usize,
                right: usize,
                gl: f64,
                hl: f64,
                gr: f64,
                hr: f64,
            }
            let mut applies: Vec<Apply> = Vec::new();
            let mut apply_of_node: Vec<i32> = Vec::new();
            for (slot, fnode) in frontier.iter().enumerate() {
                let Some(c) = best[slot] else { continue };
                if !(c.gain > self.cfg.gamma + 1e-12) {
                    continue;
                }
                let left = nodes.len();
                nodes.push(TreeNode::Leaf { weight: 0.0 });
                let right = nodes.len();
                nodes.push(TreeNode::Leaf { weight: 0.0 });
                nodes[fnode.id] = TreeNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    default_left: c.default_left,
                    left,
                    right,
                    gain: c.gain,
                };
                if apply_of_node.len() <= fnode.id {
                    apply_of_node.resize(fnode.id + 1, -1);
                }
                apply_of_node[fnode.id] = applies.len() as i32;
                applies.push(Apply {
                    feature: c.feature,
                    threshold: c.threshold,
                    default_left: c.default_left,
                    left,
                    right,
                    gl: 0.0,
                    hl: 0.0,
                    gr: 0.0,
                    hr: 0.0,
                });
            }
            if applies.is_empty() {
                break;
            }

            // Route samples and accumulate child sums in sample order, so
            // leaf statistics do not depend on the scan that found the split.
            for s in 0..n {
                let nid = positions[s] as usize;
                let Some(&ai) = apply_of_node.get(nid) else { continue };
                if ai < 0 {
                    continue;
                }
                let apply = &mut applies[ai as usize];
                let v = self.x.get(s, apply.feature);
                let go_left = if v.is_nan() { apply.default_left } else { v < apply.threshold };
                if go_left {
                    positions[s] = apply.left as u32;
                    apply.gl += self.g[s];
                    apply.hl += self.h[s];
                } else {
                    positions[s] = apply.right as u32;
                    apply.gr += self.g[s];
                    apply.hr += self.h[s];
                }
            }

            let mut next = Vec::with_capacity(applies.len() * 2);
            for apply in &applies {
                nodes[apply.left] = TreeNode::Leaf {
                    weight: self.leaf_weight(apply.gl, apply.hl),
                };
                nodes[apply.right] = TreeNode::Leaf {
                    weight: self.leaf_weight(apply.gr, apply.hr),
                };
                next.push(FrontierNode {
                    id: apply.left,
                    g: apply.gl,
                    h: apply.hl,
                });
                next.push(FrontierNode {
                    id: apply.right,
                    g: apply.gr,
                    h: apply.hr,
                });
            }
            frontier = next;
        }
        Tree { nodes }
    }

    /// Best candidate split per frontier node. Features are scanned in
    /// ascending index order and thresholds in ascending value order with
    /// strictly-greater updates, so ties resolve to the lowest feature and
    /// then the lowest threshold, with missing-left preferred.
    fn best_splits(&self, frontier: &[FrontierNode], positions: &[u32]) -> Vec<Option<Candidate>> {
        let nf = frontier.len();
        let max_id = frontier.iter().map(|f| f.id).max().unwrap_or(0);
        let mut slot_of: Vec<i32> = vec![-1; max_id + 1];
        for (slot, fnode) in frontier.iter().enumerate() {
            slot_of[fnode.id] = slot as i32;
        }
        let slot_for = |sample: usize| -> Option<usize> {
            let nid = positions[sample] as usize;
            slot_of
                .get(nid)
                .copied()
                .filter(|&s| s >= 0)
                .map(|s| s as usize)
        };

        #[derive(Clone, Copy, Default)]
        struct Cursor {
            cuml_g: f64,
            cuml_h: f64,
            prev: f64,
            count: usize,
        }

        let mut best: Vec<Option<Candidate>> = vec![None; nf];
        let min_h = self.cfg.min_child_hessian;
        let consider = |best: &mut Option<Candidate>,
                            parent_score: f64,
                            feature: usize,
                            threshold: f64,
                            default_left: bool,
                            gl: f64,
                            hl: f64,
                            gr: f64,
                            hr: f64| {
            if hl < min_h || hr < min_h {
                return;
            }
            let gain = self.side_score(gl, hl) + self.side_score(gr, hr) - parent_score;
            if !gain.is_finite() {
                return;
            }
            if best.map_or(true, |b| gain > b.gain) {
                *best = Some(Candidate {
                    gain,
                    feature,
                    threshold,
                    default_left,
                });
            }
        };

        let parent_scores: Vec<f64> = frontier
            .iter()
            .map(|f| self.side_score(f.g, f.h))
            .collect();
        let mut mg = vec![0.0; nf];
        let mut mh = vec![0.0; nf];
        let mut cursors = vec![Cursor::default(); nf];

        for feature in 0..self.x.cols() {
            mg.iter_mut().for_each(|v| *v = 0.0);
            mh.iter_mut().for_each(|v| *v = 0.0);
            for &s in &self.feats.missing[feature] {
                if let Some(slot) = slot_for(s as usize) {
                    mg[slot] += self.g[s as usize];
                    mh[slot] += self.h[s as usize];
                }
            }
            cursors.iter_mut().for_each(|c| *c = Cursor::default());

            for &s in &self.feats.sorted[feature] {
                let Some(slot) = slot_for(s as usize) else { continue };
                let v = self.x.get(s as usize, feature);
                let node = &frontier[slot];
                let cur = &mut cursors[slot];
                if cur.count == 0 {
                    // threshold below every observed value: left side is the
                    // missing set alone (forced default-left)
                    consider(
                        &mut best[slot],
                        parent_scores[slot],
                        feature,
                        v,
                        true,
                        mg[slot],
                        mh[slot],
                        node.g - mg[slot],
                        node.h - mh[slot],
                    );
                } else if v != cur.prev {
                    let threshold = 0.5 * (cur.prev + v);
                    if threshold > cur.prev && threshold <= v {
                        let obs_g = node.g - mg[slot];
                        let obs_h = node.h - mh[slot];
                        let (lg, lh) = (cur.cuml_g, cur.cuml_h);
                        let (rg, rh) = (obs_g - lg, obs_h - lh);
                        // missing left, then missing right; ties keep left
                        consider(
                            &mut best[slot],
                            parent_scores[slot],
                            feature,
                            threshold,
                            true,
                            lg + mg[slot],
                            lh + mh[slot],
                            rg,
                            rh,
                        );
                        consider(
                            &mut best[slot],
                            parent_scores[slot],
                            feature,
                            threshold,
                            false,
                            lg,
                            lh,
                            rg + mg[slot],
                            rh + mh[slot],
                        );
                    }
                }
                cur.cuml_g += self.g[s as usize];
                cur.cuml_h += self.h[s as usize];
                cur.prev = v;
                cur.count += 1;
            }

            // threshold above every observed value: right side is the
            // missing set alone (forced default-right)
            for slot in 0..nf {
                let cur = &cursors[slot];
                if cur.count == 0 || cur.prev >= f64::MAX {
                    continue;
                }
                let node = &frontier[slot];
                consider(
                    &mut best[slot],
                    parent_scores[slot],
                    feature,
                    f64::MAX,
                    false,
                    node.g - mg[slot],
                    node.h - mh[slot],
                    mg[slot],
                    mh[slot],
                );
            }
        }
        best
    }
}

fn validate_inputs(x: &FeatureMatrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Config(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::Data("need at least two training samples".into()));
    }
    if n_classes < 2 {
        return Err(Error::Config("need at least two classes".into()));
    }
    let mut seen = vec![false; n_classes];
    for &label in y {
        if label >= n_classes {
            return Err(Error::Data(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        seen[label] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::Data(
            "training labels contain a single class; nothing to separate".into(),
        ));
    }
    Ok(())
}

/// Fit a boosted ensemble. Absent entries in `x` are legal and handled by
/// the default-direction mechanism; all-absent columns are never chosen.
pub fn fit_gbdt(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    config: &GbdtConfig,
) -> Result<GbdtModel> {
    validate_inputs(x, y, n_classes)?;
    if config.learning_rate <= 0.0 {
        return Err(Error::Config("learning rate must be > 0".into()));
    }
    if config.lambda < 0.0 || config.gamma < 0.0 {
        return Err(Error::Config("lambda and gamma must be >= 0".into()));
    }
    let feats = SortedFeatures::build(x);
    let n = x.rows();

    if n_classes == 2 {
        let pos = y.iter().filter(|&&l| l == 1).count() as f64;
        let prior = (pos / n as f64).clamp(1e-12, 1.0 - 1e-12);
        let base = (prior / (1.0 - prior)).ln();
        let mut margins = vec![base; n];
        let mut trees = Vec::with_capacity(config.n_trees);
        let mut train_loss = Vec::with_capacity(config.n_trees + 1);
        let mean_loss = |margins: &[f64]| -> f64 {
            let total: f64 = margins
                .iter()
                .zip(y)
                .map(|(&m, &yi)| m.max(0.0) - yi as f64 * m + (-m.abs()).exp().ln_1p())
                .sum();
            total / n as f64
        };
        train_loss.push(mean_loss(&margins));
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for _ in 0..config.n_trees {
            for i in 0..n {
                let p = sigmoid(margins[i]);
                g[i] = p - y[i] as f64;
                h[i] = p * (1.0 - p);
            }
            let tree = TreeGrower {
                x,
                g: &g,
                h: &h,
                cfg: config,
                feats: &feats,
            }
            .grow();
            for i in 0..n {
                margins[i] += tree.predict_margin(x.row(i));
            }
            trees.push(tree);
            train_loss.push(mean_loss(&margins));
        }
        Ok(GbdtModel {
            trees,
            n_classes,
            n_features: x.cols(),
            base_score: vec![base],
            config: config.clone(),
            train_loss,
        })
    } else {
        let k = n_classes;
        let mut margins = vec![0.0; n * k];
        let mut trees = Vec::with_capacity(config.n_trees * k);
        let mut train_loss = Vec::with_capacity(config.n_trees + 1);
        let mean_loss = |margins: &[f64]| -> f64 {
            let mut total = 0.0;
            for i in 0..n {
                let row = &margins[i * k..(i + 1) * k];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|&m| (m - max).exp()).sum::<f64>().ln();
                total += lse - row[y[i]];
            }
            total / n as f64
        };
        train_loss.push(mean_loss(&margins));
        let mut probs = vec![0.0; n * k];
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for _ in 0..config.n_trees {
            // gradient snapshot for the whole round
            for i in 0..n {
                let p = softmax(&margins[i * k..(i + 1) * k]);
                probs[i * k..(i + 1) * k].copy_from_slice(&p);
            }
            for class in 0..k {
                for i in 0..n {
                    let p = probs[i * k + class];
                    g[i] = p - if y[i] == class { 1.0 } else { 0.0 };
                    h[i] = p * (1.0 - p);
                }
                let tree = TreeGrower {
                    x,
                    g: &g,
                    h: &h,
                    cfg: config,
                    feats: &feats,
                }
                .grow();
                for i in 0..n {
                    margins[i * k + class] += tree.predict_margin(x.row(i));
                }
                trees.push(tree);
            }
            train_loss.push(mean_loss(&margins));
        }
        Ok(GbdtModel {
            trees,
            n_classes,
            n_features: x.cols(),
            base_score: vec![0.0; k],
            config: config.clone(),
            train_loss,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn single_split_config() -> GbdtConfig {
        GbdtConfig {
            n_trees: 1,
            max_depth: 1,
            learning_rate: 1.0,
            lambda: 0.0,
            gamma: 0.0,
            min_child_hessian: 1e-6,
        }
    }

    #[test]
    fn hand_derived_single_split() {
        // x = [1,2,3,4], y = [0,0,1,1], base margin 0 so p = 0.5 everywhere:
        // g = {0.5, 0.5, -0.5, -0.5}, h = 0.25 each. Best split at 2.5 with
        // left leaf -G/H = -2 and right leaf +2.
        let x = matrix(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let y = vec![0, 0, 1, 1];
        let model = fit_gbdt(&x, &y, 2, &single_split_config()).unwrap();
        assert_eq!(model.base_score, vec![0.0]);
        assert_eq!(model.trees.len(), 1);
        let tree = &model.trees[0];
        match &tree.nodes[0] {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 2.5);
                assert!(matches!(tree.nodes[*left], TreeNode::Leaf { weight } if weight == -2.0));
                assert!(matches!(tree.nodes[*right], TreeNode::Leaf { weight } if weight == 2.0));
            }
            other => panic!("expected root split, got {other:?}"),
        }
        let margins = model.predict_margins(&x).unwrap();
        assert!(margins.get(0, 0) < 0.0);
        assert!(margins.get(3, 0) > 0.0);
    }

    #[test]
    fn constant_features_predict_the_prior() {
        let x = matrix(&[&[3.0], &[3.0], &[3.0], &[3.0]]);
        let y = vec![0, 0, 0, 1];
        let model = fit_gbdt(&x, &y, 2, &GbdtConfig::default()).unwrap();
        assert!(model.trees.iter().all(|t| t.nodes.len() == 1));
        let p = model.predict_proba(&x).unwrap();
        for r in 0..4 {
            assert!((p.get(r, 1) - 0.25).abs() < 1e-9, "{}", p.get(r, 1));
        }
    }

    #[test]
    fn zero_trees_return_the_base_prior() {
        let x = matrix(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let y = vec![0, 1, 1, 1];
        let cfg = GbdtConfig {
            n_trees: 0,
            ..GbdtConfig::default()
        };
        let model = fit_gbdt(&x, &y, 2, &cfg).unwrap();
        let p = model.predict_proba(&x).unwrap();
        for r in 0..4 {
            assert!((p.get(r, 1) - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn missingness_aligned_with_labels_is_learned_by_routing() {
        // feature 0 absent exactly when y = 1; one depth-1 tree separates
        // the classes through the default direction alone
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            rows.push(vec![i as f64]);
            y.push(0);
        }
        for _ in 0..10 {
            rows.push(vec![f64::NAN]);
            y.push(1);
        }
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = fit_gbdt(&x, &y, 2, &single_split_config()).unwrap();
        let p = model.predict_proba(&x).unwrap();
        let scores: Vec<f64> = (0..20).map(|r| p.get(r, 1)).collect();
        let auc = crate::eval::metrics::auroc(&scores, &y).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn default_direction_is_followed_for_absent_values() {
        let x = matrix(&[&[1.0], &[2.0], &[f64::NAN], &[f64::NAN]]);
        let y = vec![0, 0, 1, 1];
        let model = fit_gbdt(&x, &y, 2, &single_split_config()).unwrap();
        let tree = &model.trees[0];
        let TreeNode::Split {
            default_left,
            left,
            right,
            ..
        } = &tree.nodes[0]
        else {
            panic!("expected split");
        };
        let default_leaf = if *default_left { *left } else { *right };
        let TreeNode::Leaf { weight } = tree.nodes[default_leaf] else {
            panic!("expected leaf");
        };
        assert_eq!(tree.predict_margin(&[f64::NAN]), weight);
    }

    #[test]
    fn all_absent_columns_are_never_split() {
        let x = matrix(&[
            &[f64::NAN, 1.0],
            &[f64::NAN, 2.0],
            &[f64::NAN, 3.0],
            &[f64::NAN, 4.0],
        ]);
        let y = vec![0, 0, 1, 1];
        let model = fit_gbdt(&x, &y, 2, &GbdtConfig::default()).unwrap();
        for tree in &model.trees {
            for node in &tree.nodes {
                if let TreeNode::Split { feature, .. } = node {
                    assert_eq!(*feature, 1);
                }
            }
        }
    }

    #[test]
    fn depth_respects_the_limit() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<usize> = (0..80).map(|_| rng.gen_range(0..2)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        for depth in [1usize, 2, 3, 5] {
            let cfg = GbdtConfig {
                n_trees: 5,
                max_depth: depth,
                ..GbdtConfig::default()
            };
            let model = fit_gbdt(&x, &y, 2, &cfg).unwrap();
            for tree in &model.trees {
                assert!(tree.depth() <= depth);
            }
        }
    }

    #[test]
    fn training_loss_is_non_increasing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(101);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<usize> = rows
            .iter()
            .map(|r| usize::from(r[0] + 0.3 * r[1] > 0.0))
            .collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let cfg = GbdtConfig {
            n_trees: 30,
            ..GbdtConfig::default()
        };
        let model = fit_gbdt(&x, &y, 2, &cfg).unwrap();
        for w in model.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn multiclass_probabilities_sum_to_one() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        let rows: Vec<Vec<f64>> = (0..90)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<usize> = (0..90).map(|i| i % 3).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let cfg = GbdtConfig {
            n_trees: 10,
            ..GbdtConfig::default()
        };
        let model = fit_gbdt(&x, &y, 3, &cfg).unwrap();
        assert_eq!(model.trees.len(), 30);
        let p = model.predict_proba(&x).unwrap();
        for r in 0..p.rows() {
            let sum: f64 = p.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn positive_column_rescaling_preserves_argmax() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let rows: Vec<Vec<f64>> = (0..70)
            .map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let y: Vec<usize> = rows
            .iter()
            .map(|r| usize::from(r[0] * 0.5 - r[2] > 0.0))
            .collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let scaled_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, v)| v * (j as f64 + 1.0) * 2.0 + 1.5)
                    .collect()
            })
            .collect();
        let xs = FeatureMatrix::from_rows(&scaled_rows).unwrap();
        let cfg = GbdtConfig {
            n_trees: 20,
            ..GbdtConfig::default()
        };
        let a = fit_gbdt(&x, &y, 2, &cfg).unwrap();
        let b = fit_gbdt(&xs, &y, 2, &cfg).unwrap();
        let pa = a.predict_proba(&x).unwrap();
        let pb = b.predict_proba(&xs).unwrap();
        for r in 0..x.rows() {
            assert_eq!(pa.get(r, 1) > 0.5, pb.get(r, 1) > 0.5, "row {r}");
        }
    }

    #[test]
    fn refitting_is_bit_identical() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        if rng.gen_bool(0.2) {
                            f64::NAN
                        } else {
                            rng.gen_range(-1.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let y: Vec<usize> = (0..50).map(|i| usize::from(i % 3 == 0)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let cfg = GbdtConfig {
            n_trees: 15,
            ..GbdtConfig::default()
        };
        let a = fit_gbdt(&x, &y, 2, &cfg).unwrap();
        let b = fit_gbdt(&x, &y, 2, &cfg).unwrap();
        assert_eq!(a, b);
        let pa = a.predict_proba(&x).unwrap();
        let pb = b.predict_proba(&x).unwrap();
        for r in 0..x.rows() {
            assert_eq!(pa.get(r, 1).to_bits(), pb.get(r, 1).to_bits());
        }
    }

    #[test]
    fn serialization_round_trips_exactly() {
        let x = matrix(&[&[1.0], &[2.0], &[f64::NAN], &[4.0]]);
        let y = vec![0, 0, 1, 1];
        let cfg = GbdtConfig {
            n_trees: 5,
            ..GbdtConfig::default()
        };
        let model = fit_gbdt(&x, &y, 2, &cfg).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: GbdtModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
    }
}
