use std::collections::BTreeMap;

use super::{KeywordSpec, Label};
use crate::crawl::TokenizedBundle;
use crate::error::{Error, Result};

/// Ranks every body-text word by the gap between its mean tf-idf over RPS documents
/// and over non-RPS documents, largest gap first (ties by word).
pub fn compute_tfidf_gaps(corpus: &[(TokenizedBundle, Label)]) -> Result<Vec<KeywordSpec>> {
    let n_rps = corpus.iter().filter(|(_, l)| l.is_rps()).count();
    let n_non = corpus.len() - n_rps;
    if n_rps == 0 || n_non == 0 {
        return Err(Error::SingleClassCorpus);
    }

    let mut counts: Vec<BTreeMap<&str, usize>> = Vec::with_capacity(corpus.len());
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for (bundle, _) in corpus {
        let mut c: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &bundle.body.tokens {
            *c.entry(t.as_str()).or_default() += 1;
        }
        for w in c.keys() {
            *df.entry(w).or_default() += 1;
        }
        counts.push(c);
    }

    let n = corpus.len() as f64;
    let mut sums: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for ((bundle, label), c) in corpus.iter().zip(&counts) {
        let len = bundle.body.tokens.len() as f64;
        for (w, &k) in c {
            let tfidf = (k as f64 / len) * (n / df[w] as f64).ln();
            let e = sums.entry(w).or_default();
            if label.is_rps() {
                e.0 += tfidf;
            } else {
                e.1 += tfidf;
            }
        }
    }

    let mut out: Vec<KeywordSpec> = sums
        .into_iter()
        .map(|(w, (r, nr))| KeywordSpec::new(w, r / n_rps as f64, nr / n_non as f64))
        .collect();
    out.sort_by(|a, b| b.gap.total_cmp(&a.gap).then_with(|| a.keyword.cmp(&b.keyword)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &[&str]) -> TokenizedBundle {
        TokenizedBundle::from_tokens(
            vec![],
            vec![],
            vec![],
            vec![],
            words.iter().map(|s| s.to_string()).collect(),
        )
    }

    #[test]
    fn four_document_hand_table() {
        let corpus = vec![
            (doc(&["proxy", "buy", "proxy"]), Label::Rps),
            (doc(&["proxy", "ip"]), Label::Rps),
            (doc(&["news", "buy"]), Label::NonRps),
            (doc(&["news"]), Label::NonRps),
        ];
        let l2 = 2f64.ln();
        let expected = [
            ("proxy", 7.0 / 12.0 * l2, 0.0),
            ("ip", 0.5 * l2, 0.0),
            ("buy", l2 / 6.0, l2 / 4.0),
            ("news", 0.0, 0.75 * l2),
        ];
        let got = compute_tfidf_gaps(&corpus).unwrap();
        assert_eq!(got.len(), 4);
        for (spec, (w, r, n)) in got.iter().zip(expected) {
            assert_eq!(spec.keyword, w);
            assert!((spec.avg_tfidf_rps - r).abs() < 1e-9);
            assert!((spec.avg_tfidf_nonrps - n).abs() < 1e-9);
            assert!((spec.gap - (r - n)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_rejected() {
        let corpus = vec![(doc(&["proxy"]), Label::Rps)];
        assert!(matches!(compute_tfidf_gaps(&corpus), Err(Error::SingleClassCorpus)));
    }

    #[test]
    fn absent_words_excluded() {
        let corpus = vec![(doc(&["a"]), Label::Rps), (doc(&[]), Label::NonRps)];
        let got = compute_tfidf_gaps(&corpus).unwrap();
        assert_eq!(got.len(), 1);
        assert!(got.iter().all(|s| s.keyword != "proxy"));
    }
}
