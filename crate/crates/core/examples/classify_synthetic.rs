//! Generate a synthetic homepage corpus, featurize it, and run 10-fold CV.

use std::time::Instant;

use resipscope::classify::synth::{generate_corpus, SyntheticSpec};
use resipscope::classify::{
    featurize_html, kfold_eval, ForestParams, KeywordSet, LabeledExample, Provenance,
};
use resipscope::crawl::Stopwords;

fn main() -> resipscope::Result<()> {
    let start = Instant::now();
    let spec = SyntheticSpec {
        n_rps: 120,
        n_non_rps: 1100,
        seed: 7,
        ..Default::default()
    };
    let keywords = KeywordSet::bundled();
    let examples: Vec<LabeledExample> = generate_corpus(&spec)
        .into_iter()
        .map(|p| LabeledExample {
            features: featurize_html(p.html.as_bytes(), &keywords, Stopwords::bundled(), None),
            apex: p.apex,
            label: p.label,
            provenance: Provenance::PriorWork,
        })
        .collect();
    let params = ForestParams {
        n_trees: 200,
        seed: 7,
        ..Default::default()
    };
    let report = kfold_eval(&examples, &keywords, 10, &params)?;
    print!("{}", report.to_text());
    println!("elapsed\t{:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
