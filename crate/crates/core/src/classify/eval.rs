use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{predict, train_forest, ForestParams, KeywordSet, Label, LabeledExample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    fn add(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Rps, Label::Rps) => self.tp += 1,
            (Label::NonRps, Label::Rps) => self.fp += 1,
            (Label::Rps, Label::NonRps) => self.fn_ += 1,
            (Label::NonRps, Label::NonRps) => self.tn += 1,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

/// Pooled precision/recall/F1 for the RPS class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub folds: usize,
    pub n_trees: usize,
    pub seed: u64,
    pub per_fold: Vec<FoldScore>,
    pub confusion_totals: Confusion,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let c = &self.confusion_totals;
        let mut s = format!(
            "folds\t{}\ntrees\t{}\nseed\t{}\nprecision\t{:.2}%\nrecall\t{:.2}%\nf1\t{:.2}%\ntp\t{}\nfp\t{}\nfn\t{}\ntn\t{}\n",
            self.folds,
            self.n_trees,
            self.seed,
            self.precision * 100.0,
            self.recall * 100.0,
            self.f1 * 100.0,
            c.tp,
            c.fp,
            c.fn_,
            c.tn
        );
        s.push_str("# fold\tprecision\trecall\tf1\n");
        for f in &self.per_fold {
            s.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\n",
                f.fold, f.precision, f.recall, f.f1
            ));
        }
        s
    }
}

/// Stratified k-fold cross validation. Folds come from a seeded shuffle of each
/// class; fold `i` trains with seed `params.seed + i`.
pub fn kfold_eval(
    examples: &[LabeledExample],
    keywords: &KeywordSet,
    k: usize,
    params: &ForestParams,
) -> Result<EvalReport> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut rps: Vec<usize> = (0..examples.len()).filter(|&i| examples[i].label.is_rps()).collect();
    let mut non: Vec<usize> = (0..examples.len()).filter(|&i| !examples[i].label.is_rps()).collect();
    if rps.len() < k || non.len() < k {
        return Err(Error::NotEnoughExamples {
            needed: k,
            rps: rps.len(),
            non_rps: non.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rps.shuffle(&mut rng);
    non.shuffle(&mut rng);
    let mut fold_of = vec![0usize; examples.len()];
    for (j, &i) in rps.iter().enumerate() {
        fold_of[i] = j % k;
    }
    for (j, &i) in non.iter().enumerate() {
        fold_of[i] = j % k;
    }

    let mut totals = Confusion::default();
    let mut per_fold = Vec::with_capacity(k);
    for fold in 0..k {
        let train: Vec<LabeledExample> = examples
            .iter()
            .zip(&fold_of)
            .filter(|(_, f)| **f != fold)
            .map(|(e, _)| e.clone())
            .collect();
        let fold_params = ForestParams {
            seed: params.seed.wrapping_add(fold as u64),
            ..params.clone()
        };
        let model = train_forest(&train, keywords, &fold_params)?;
        let mut c = Confusion::default();
        for (e, _) in examples.iter().zip(&fold_of).filter(|(_, f)| **f == fold) {
            let (label, _) = predict(&model, e.features.values())?;
            c.add(e.label, label);
        }
        totals.tp += c.tp;
        totals.fp += c.fp;
        totals.fn_ += c.fn_;
        totals.tn += c.tn;
        per_fold.push(FoldScore {
            fold,
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            confusion: c,
        });
    }
    Ok(EvalReport {
        precision: totals.precision(),
        recall: totals.recall(),
        f1: totals.f1(),
        folds: k,
        n_trees: params.n_trees,
        seed: params.seed,
        per_fold,
        confusion_totals: totals,
    })
}
