use std::path::{Path, PathBuf};

use clap::Subcommand;

use super::{Ctx, Status};
use crate::classify::synth::{generate_corpus, read_corpus, write_corpus, SyntheticSpec};
use crate::classify::{
    bootstrap_round, compute_tfidf_gaps, featurize_html, kfold_eval, predict, read_feature_table, read_verdicts,
    render_feature_table, train_forest, BootstrapOptions, FeatureRow, ForestModel, ForestParams, Groundtruth,
    KeywordSet, LabeledExample,
};
use crate::crawl::{
    detect_and_translate, extract_text_bundle, ingest_snapshot_bundle, preprocess, Stopwords, StubTranslator,
    Translator,
};
use crate::error::{Error, Result};
use crate::flatfile::{read_body, Provenance};

#[derive(Debug, Subcommand)]
pub enum ClassifyCmd {
    /// Rank body terms by class-average TF-IDF gap and keep the top twelve.
    SelectKeywords {
        /// Corpus directory with `groundtruth.tsv` and `bundles/<apex>/`.
        #[arg(long)]
        corpus: PathBuf,
        /// Skip translating Chinese pages with the bundled phrase table.
        #[arg(long)]
        no_translate: bool,
    },
    /// Extract the 72 features for a labeled corpus or for unlabeled snapshots.
    Featurize {
        #[arg(long, conflicts_with = "snapshots", required_unless_present = "snapshots")]
        corpus: Option<PathBuf>,
        /// Directory of snapshot bundles, one per apex.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        no_translate: bool,
    },
    /// Fit the forest on labeled features.
    Train {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score feature rows with a trained model.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Defaults to the candidate features.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Stratified k-fold cross validation.
    Eval {
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// One groundtruth expansion round: sample positives, apply verdicts.
    Bootstrap {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Candidate features; defaults to the featurized snapshots.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        groundtruth: PathBuf,
        #[arg(long, default_value_t = 1)]
        round: u32,
        /// `apex<TAB>rps|non_rps` verdicts for the sampled sites.
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a synthetic labeled homepage corpus.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 110)]
        rps: usize,
        #[arg(long, default_value_t = 1073)]
        non_rps: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn translator(on: bool) -> Option<StubTranslator> {
    on.then(StubTranslator::bilingual_keywords)
}

fn keywords_path(ctx: &Ctx, flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| Some(ctx.out("classify", "keywords.json")).filter(|p| p.exists()))
}

fn load_keywords(path: Option<&Path>) -> Result<KeywordSet> {
    match path {
        Some(p) => {
            let ks: KeywordSet = serde_json::from_str(&read_body(p)?)?;
            KeywordSet::new(ks.specs().to_vec())
        }
        None => Ok(KeywordSet::bundled()),
    }
}

fn with_opt_input(prov: Provenance, path: Option<&Path>) -> Result<Provenance> {
    match path {
        Some(p) => prov.with_input(p),
        None => Ok(prov),
    }
}

fn labeled(rows: &[FeatureRow]) -> Vec<LabeledExample> {
    rows.iter().filter_map(FeatureRow::labeled).collect()
}

fn params(ctx: &Ctx, trees: Option<usize>, seed: u64) -> ForestParams {
    ForestParams {
        n_trees: trees.unwrap_or(ctx.cfg.classify.n_trees),
        seed,
        max_features: ctx.cfg.classify.max_features,
        threshold: ctx.cfg.classify.threshold,
    }
}

fn load_model(ctx: &Ctx, flag: Option<PathBuf>) -> Result<(PathBuf, ForestModel)> {
    let path = flag.unwrap_or_else(|| ctx.out("classify", "model.json"));
    let model = ForestModel::from_json(&read_body(&path)?)?;
    Ok((path, model))
}

pub fn run(ctx: &Ctx, cmd: ClassifyCmd) -> Result<Status> {
    match cmd {
        ClassifyCmd::SelectKeywords { corpus, no_translate } => {
            let pages = read_corpus(&corpus)?;
            let t = translator(!no_translate);
            let docs: Vec<_> = pages
                .iter()
                .map(|p| {
                    let b = detect_and_translate(
                        &extract_text_bundle(p.html.as_bytes()),
                        t.as_ref().map(|t| t as &dyn Translator),
                    );
                    (preprocess(&b, Stopwords::bundled()), p.label)
                })
                .collect();
            let ranked = compute_tfidf_gaps(&docs)?;
            let set = KeywordSet::from_ranked(&ranked)?;
            let prov = ctx.prov("classify.select-keywords").with_input(&corpus.join("groundtruth.tsv"))?;
            let mut table = String::from("# keyword\tavg_tfidf_rps\tavg_tfidf_nonrps\tgap\n");
            for s in ranked.iter().take(100) {
                table.push_str(&format!(
                    "{}\t{:.6}\t{:.6}\t{:.6}\n",
                    s.keyword, s.avg_tfidf_rps, s.avg_tfidf_nonrps, s.gap
                ));
            }
            ctx.write(&ctx.out("classify", "keywords_ranked.tsv"), &prov, &table)?;
            ctx.write(
                &ctx.out("classify", "keywords.json"),
                &prov,
                &(serde_json::to_string_pretty(&set)? + "\n"),
            )?;
            for k in set.keywords() {
                println!("{k}");
            }
            Ok(Status::Ok)
        }
        ClassifyCmd::Featurize {
            corpus,
            snapshots,
            keywords,
            no_translate,
        } => {
            let kw_path = keywords_path(ctx, keywords);
            let keywords = load_keywords(kw_path.as_deref())?;
            let t = translator(!no_translate);
            let tr = t.as_ref().map(|t| t as &dyn Translator);
            let feat = |html: &[u8]| featurize_html(html, &keywords, Stopwords::bundled(), tr);
            let prov = with_opt_input(ctx.prov("classify.featurize"), kw_path.as_deref())?;
            let mut problems = 0;
            let (rows, name, prov) = match (corpus, snapshots) {
                (Some(dir), _) => {
                    let gt = Groundtruth::read(&dir.join("groundtruth.tsv"))?;
                    let pages = read_corpus(&dir)?;
                    let rows: Vec<FeatureRow> = pages
                        .iter()
                        .zip(&gt.records)
                        .map(|(p, r)| FeatureRow {
                            apex: p.apex.clone(),
                            label: Some((r.label, r.provenance)),
                            features: feat(p.html.as_bytes()),
                        })
                        .collect();
                    (rows, "features.tsv", prov.with_input(&dir.join("groundtruth.tsv"))?)
                }
                (None, Some(dir)) => {
                    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(&dir)
                        .map_err(|e| Error::path_io(&dir, e))?
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|p| p.is_dir())
                        .collect();
                    subdirs.sort();
                    let mut rows = Vec::new();
                    for d in subdirs {
                        match ingest_snapshot_bundle(&d, None) {
                            Ok(snap) => {
                                let html = snap.homepage().map(|p| p.html.clone()).unwrap_or_default();
                                rows.push(FeatureRow {
                                    apex: snap.apex.clone(),
                                    label: None,
                                    features: feat(&html),
                                });
                            }
                            Err(e) => {
                                log::warn!("{}: {e}", d.display());
                                problems += 1;
                            }
                        }
                    }
                    (rows, "candidate_features.tsv", prov)
                }
                (None, None) => return Err(Error::Config("give --corpus or --snapshots".into())),
            };
            ctx.write(&ctx.out("classify", name), &prov, &render_feature_table(&rows))?;
            println!("rows\t{}", rows.len());
            Ok(Status::from_problems(problems))
        }
        ClassifyCmd::Train {
            features,
            keywords,
            trees,
            seed,
        } => {
            let path = features.unwrap_or_else(|| ctx.out("classify", "features.tsv"));
            let kw_path = keywords_path(ctx, keywords);
            let keywords = load_keywords(kw_path.as_deref())?;
            let seed = ctx.seed("classify", seed);
            let examples = labeled(&read_feature_table(&path)?);
            let model = train_forest(&examples, &keywords, &params(ctx, trees, seed))?;
            let prov = with_opt_input(ctx.prov("classify.train").with_seed("classify", seed).with_input(&path)?, kw_path.as_deref())?;
            ctx.write(&ctx.out("classify", "model.json"), &prov, &model.to_json())?;
            Ok(Status::Ok)
        }
        ClassifyCmd::Predict { model, features } => {
            let (model_path, model) = load_model(ctx, model)?;
            let path = features.unwrap_or_else(|| ctx.out("classify", "candidate_features.tsv"));
            let rows = read_feature_table(&path)?;
            let mut body = String::from("# apex\tlabel\tscore\n");
            let mut positives = 0;
            for r in &rows {
                let (label, score) = predict(&model, r.features.values())?;
                positives += usize::from(label.is_rps());
                body.push_str(&format!("{}\t{label}\t{score:.4}\n", r.apex));
            }
            let prov = ctx.prov("classify.predict").with_input(&model_path)?.with_input(&path)?;
            ctx.write(&ctx.out("classify", "predictions.tsv"), &prov, &body)?;
            println!("rows\t{}\npredicted_rps\t{positives}", rows.len());
            Ok(Status::Ok)
        }
        ClassifyCmd::Eval {
            features,
            keywords,
            k,
            trees,
            seed,
        } => {
            let path = features.unwrap_or_else(|| ctx.out("classify", "features.tsv"));
            let kw_path = keywords_path(ctx, keywords);
            let keywords = load_keywords(kw_path.as_deref())?;
            let seed = ctx.seed("classify", seed);
            let k = k.unwrap_or(ctx.cfg.classify.k);
            let examples = labeled(&read_feature_table(&path)?);
            let report = kfold_eval(&examples, &keywords, k, &params(ctx, trees, seed))?;
            let prov = with_opt_input(ctx.prov("classify.eval").with_seed("classify", seed).with_input(&path)?, kw_path.as_deref())?;
            ctx.write(&ctx.out("classify", "eval.json"), &prov, &report.to_json())?;
            ctx.write(&ctx.out("classify", "eval.txt"), &prov, &report.to_text())?;
            print!("{}", report.to_text());
            Ok(Status::Ok)
        }
        ClassifyCmd::Bootstrap {
            model,
            candidates,
            groundtruth,
            round,
            verdicts,
            sample,
            seed,
        } => {
            let (model_path, model) = load_model(ctx, model)?;
            let cand_path = candidates.unwrap_or_else(|| ctx.out("classify", "candidate_features.tsv"));
            let mut gt = Groundtruth::read(&groundtruth)?;
            let cands: Vec<_> = read_feature_table(&cand_path)?
                .into_iter()
                .filter(|r| !gt.contains(&r.apex))
                .map(|r| (r.apex, r.features))
                .collect();
            let verdict_map = verdicts.as_deref().map(read_verdicts).transpose()?;
            let seed = ctx.seed("bootstrap", seed);
            let opts = BootstrapOptions {
                sample_n: sample.unwrap_or(ctx.cfg.classify.bootstrap_sample),
                seed,
                round,
            };
            let out = bootstrap_round(&model, &cands, &opts, verdict_map.as_ref(), &mut gt)?;
            let mut prov = ctx
                .prov("classify.bootstrap")
                .with_seed("bootstrap", seed)
                .with_input(&model_path)?
                .with_input(&cand_path)?
                .with_input(&groundtruth)?;
            if let Some(v) = &verdicts {
                prov = prov.with_input(v)?;
            }
            let mut pending = String::from("# apex\tscore\n");
            for (apex, score) in &out.pending {
                pending.push_str(&format!("{apex}\t{score:.4}\n"));
            }
            ctx.write(&ctx.out("classify", &format!("pending_round_{round}.tsv")), &prov, &pending)?;
            ctx.write(&ctx.out("classify", &format!("round_{round}.txt")), &prov, &out.report.to_text())?;
            if verdicts.is_some() {
                ctx.write(&ctx.out("classify", "groundtruth.tsv"), &prov, &gt.render())?;
            }
            print!("{}", out.report.to_text());
            Ok(Status::Ok)
        }
        ClassifyCmd::GenSynthetic { out, rps, non_rps, seed } => {
            let seed = ctx.seed("corpus", seed);
            let pages = generate_corpus(&SyntheticSpec {
                n_rps: rps,
                n_non_rps: non_rps,
                seed,
                ..Default::default()
            });
            write_corpus(&pages, &out)?;
            let gt_path = out.join("groundtruth.tsv");
            let gt = Groundtruth::read(&gt_path)?;
            ctx.write(
                &gt_path,
                &ctx.prov("classify.gen-synthetic").with_seed("corpus", seed),
                &gt.render(),
            )?;
            println!("sites\t{}", pages.len());
            Ok(Status::Ok)
        }
    }
}
