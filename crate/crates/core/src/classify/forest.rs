use std::cmp::Ordering;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KeywordSet, Label, LabeledExample, N_FEATURES};
use crate::error::{Error, Result};

/// floor(sqrt(72))
pub const DEFAULT_MAX_FEATURES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub seed: u64,
    pub max_features: usize,
    pub threshold: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            seed: 0,
            max_features: DEFAULT_MAX_FEATURES,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        rps: u32,
        non_rps: u32,
    },
}

/// Flat node vector; node 0 is the root. Samples with `x <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// True when the reached leaf votes RPS (ties vote RPS).
    pub fn votes_rps(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { rps, non_rps } => return rps >= non_rps,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub keyword_set_id: String,
    pub keywords: Vec<String>,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ForestModel = serde_json::from_str(text)?;
        for t in &m.trees {
            for n in &t.nodes {
                if let Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } = n
                {
                    if *feature >= N_FEATURES || *left >= t.nodes.len() || *right >= t.nodes.len() {
                        return Err(Error::Config("model contains an invalid split node".into()));
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Score = fraction of trees voting RPS; label RPS iff score >= the model threshold.
pub fn predict(model: &ForestModel, features: &[f64]) -> Result<(Label, f64)> {
    if features.len() != N_FEATURES {
        return Err(Error::DimensionMismatch {
            expected: N_FEATURES,
            got: features.len(),
        });
    }
    let votes = model.trees.iter().filter(|t| t.votes_rps(features)).count();
    let score = if model.trees.is_empty() {
        0.0
    } else {
        votes as f64 / model.trees.len() as f64
    };
    let label = if score >= model.params.threshold {
        Label::Rps
    } else {
        Label::NonRps
    };
    Ok((label, score))
}

pub fn train_forest(
    examples: &[LabeledExample],
    keywords: &KeywordSet,
    params: &ForestParams,
) -> Result<ForestModel> {
    let n_rps = examples.iter().filter(|e| e.label.is_rps()).count();
    let n_non = examples.len() - n_rps;
    if n_rps == 0 || n_non == 0 {
        return Err(Error::SingleClassCorpus);
    }
    if n_rps < 2 || n_non < 2 {
        return Err(Error::NotEnoughExamples {
            needed: 2,
            rps: n_rps,
            non_rps: n_non,
        });
    }
    let x: Vec<&[f64]> = examples.iter().map(|e| e.features.values()).collect();
    let y: Vec<bool> = examples.iter().map(|e| e.label.is_rps()).collect();
    let max_features = params.max_features.clamp(1, N_FEATURES);
    let trees: Vec<DecisionTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let n = x.len();
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow_tree(&x, &y, sample, max_features, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        params: ForestParams {
            max_features,
            ..params.clone()
        },
        keyword_set_id: keywords.id(),
        keywords: keywords.keywords().map(String::from).collect(),
        trees,
    })
}

fn grow_tree(
    x: &[&[f64]],
    y: &[bool],
    sample: Vec<usize>,
    max_features: usize,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let mut nodes = vec![Node::Leaf { rps: 0, non_rps: 0 }];
    let mut stack = vec![(0usize, sample)];
    while let Some((slot, idx)) = stack.pop() {
        let rps = idx.iter().filter(|&&i| y[i]).count() as u32;
        let non_rps = idx.len() as u32 - rps;
        if idx.len() < 2 || rps == 0 || non_rps == 0 {
            nodes[slot] = Node::Leaf { rps, non_rps };
            continue;
        }
        let mut subset: Vec<usize> = index::sample(rng, N_FEATURES, max_features).into_vec();
        subset.sort_unstable();
        let mut split = best_split(x, y, &idx, &subset);
        if split.is_none() && max_features < N_FEATURES {
            let rest: Vec<usize> = (0..N_FEATURES).filter(|f| !subset.contains(f)).collect();
            split = best_split(x, y, &idx, &rest);
        }
        let Some((feature, threshold)) = split else {
            nodes[slot] = Node::Leaf { rps, non_rps };
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { rps: 0, non_rps: 0 });
        nodes.push(Node::Leaf { rps: 0, non_rps: 0 });
        nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        stack.push((right, r));
        stack.push((left, l));
    }
    DecisionTree { nodes }
}

/// Split quality as the fraction `(P*nR + Q*nL) / (nL*nR)` with P, Q the sums of
/// squared class counts per side; larger means lower weighted Gini impurity.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        let (nl, nr) = ((a + b) as u128, (c + d) as u128);
        let p = (a as u128).pow(2) + (b as u128).pow(2);
        let q = (c as u128).pow(2) + (d as u128).pow(2);
        Score {
            num: p * nr + q * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, o: &Score) -> Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

/// Best Gini split of the samples `idx` over `features`: lowest weighted impurity,
/// ties to the lowest feature index, then the lowest threshold.
pub fn best_split(x: &[&[f64]], y: &[bool], idx: &[usize], features: &[usize]) -> Option<(usize, f64)> {
    if idx.len() < 2 {
        return None;
    }
    let total_rps = idx.iter().filter(|&&i| y[i]).count() as u64;
    let total = idx.len() as u64;
    let mut best: Option<(Score, usize, f64)> = None;
    let mut col: Vec<(f64, bool)> = Vec::with_capacity(idx.len());
    let mut feats = features.to_vec();
    feats.sort_unstable();
    for &f in &feats {
        col.clear();
        col.extend(idx.iter().map(|&i| (x[i][f], y[i])));
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut a, mut b) = (0u64, 0u64);
        for w in 0..col.len() - 1 {
            if col[w].1 {
                a += 1;
            } else {
                b += 1;
            }
            let (lo, hi) = (col[w].0, col[w + 1].0);
            if lo == hi {
                continue;
            }
            let s = Score::new(a, b, total_rps - a, total - total_rps - b);
            let better = match &best {
                None => true,
                Some((bs, _, _)) => s.cmp(bs) == Ordering::Greater,
            };
            if better {
                best = Some((s, f, midpoint(lo, hi)));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{FeatureVector, Provenance};
    use crate::psl::to_apex;
    use proptest::prelude::*;

    fn example(i: usize, values: Vec<f64>, rps: bool) -> LabeledExample {
        LabeledExample {
            apex: to_apex(&format!("site{i}.com")).unwrap(),
            features: FeatureVector::new(values).unwrap(),
            label: if rps { Label::Rps } else { Label::NonRps },
            provenance: Provenance::PriorWork,
        }
    }

    /// Exhaustive reference: every feature, every midpoint, impurity in f64.
    fn oracle_split(rows: &[Vec<f64>], y: &[bool]) -> Option<(usize, f64)> {
        let gini = |ys: &[bool]| {
            if ys.is_empty() {
                return 0.0;
            }
            let p = ys.iter().filter(|v| **v).count() as f64 / ys.len() as f64;
            1.0 - p * p - (1.0 - p) * (1.0 - p)
        };
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..rows[0].len() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (l, r): (Vec<bool>, Vec<bool>) = {
                    let mut l = vec![];
                    let mut r = vec![];
                    for (row, yy) in rows.iter().zip(y) {
                        if row[f] <= t { l.push(*yy) } else { r.push(*yy) }
                    }
                    (l, r)
                };
                let imp = l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r);
                if best.is_none_or(|(b, _, _)| imp < b - 1e-9) {
                    best = Some((imp, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    proptest! {
        #[test]
        fn gini_split_matches_exhaustive_search(
            rows in prop::collection::vec(prop::collection::vec(0u8..4, 5), 2..=20),
            labels in prop::collection::vec(any::<bool>(), 20),
        ) {
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
            let y = &labels[..rows.len()];
            let x: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let idx: Vec<usize> = (0..rows.len()).collect();
            let feats: Vec<usize> = (0..5).collect();
            prop_assert_eq!(best_split(&x, y, &idx, &feats), oracle_split(&rows, y));
        }
    }

    #[test]
    fn single_tree_finds_separating_threshold() {
        let mut ex = vec![];
        for (i, v) in [1.0, 2.0, 3.0, 7.0, 8.0, 9.0].into_iter().enumerate() {
            let mut f = vec![0.0; N_FEATURES];
            f[5] = v;
            ex.push(example(i, f, v > 5.0));
        }
        let params = ForestParams {
            n_trees: 1,
            seed: 3,
            max_features: N_FEATURES,
            ..Default::default()
        };
        let model = train_forest(&ex, &KeywordSet::bundled(), &params).unwrap();
        let root = &model.trees[0].nodes[0];
        match root {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 5);
                assert!(*threshold > 3.0 && *threshold < 7.0);
            }
            Node::Leaf { .. } => panic!("expected a split"),
        }
    }

    fn toy_set() -> Vec<LabeledExample> {
        (0..40)
            .map(|i| {
                let mut f = vec![0.0; N_FEATURES];
                let rps = i % 3 == 0;
                f[i % N_FEATURES] = (i % 7) as f64;
                if rps {
                    f[0] = 3.0 + (i % 4) as f64;
                    f[24] = 1.0;
                }
                example(i, f, rps)
            })
            .collect()
    }

    #[test]
    fn deterministic_and_round_trips() {
        let params = ForestParams {
            n_trees: 25,
            seed: 11,
            ..Default::default()
        };
        let a = train_forest(&toy_set(), &KeywordSet::bundled(), &params).unwrap();
        let b = train_forest(&toy_set(), &KeywordSet::bundled(), &params).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let back = ForestModel::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_json(), a.to_json());
    }

    #[test]
    fn prediction_is_tree_order_free() {
        let params = ForestParams {
            n_trees: 15,
            seed: 5,
            ..Default::default()
        };
        let model = train_forest(&toy_set(), &KeywordSet::bundled(), &params).unwrap();
        let mut rev = model.clone();
        rev.trees.reverse();
        rev.trees.rotate_left(4);
        for e in toy_set() {
            assert_eq!(predict(&model, e.features.values()).unwrap(), predict(&rev, e.features.values()).unwrap());
        }
        let zero = vec![0.0; N_FEATURES];
        assert_eq!(predict(&model, &zero).unwrap().0, Label::NonRps);
    }

    #[test]
    fn half_score_is_rps() {
        let leaf = |rps| DecisionTree {
            nodes: vec![Node::Leaf { rps, non_rps: 1 }],
        };
        let model = ForestModel {
            params: ForestParams::default(),
            keyword_set_id: String::new(),
            keywords: vec![],
            trees: vec![leaf(2), leaf(0)],
        };
        assert_eq!(predict(&model, &[0.0; N_FEATURES]).unwrap(), (Label::Rps, 0.5));
        assert!(matches!(
            predict(&model, &[0.0; 3]),
            Err(Error::DimensionMismatch { expected: 72, got: 3 })
        ));
    }

    #[test]
    fn single_class_input_rejected() {
        let ex: Vec<_> = (0..4).map(|i| example(i, vec![0.0; N_FEATURES], true)).collect();
        assert!(matches!(
            train_forest(&ex, &KeywordSet::bundled(), &ForestParams::default()),
            Err(Error::SingleClassCorpus)
        ));
    }
}
