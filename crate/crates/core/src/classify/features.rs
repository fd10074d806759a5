use super::{FeatureVector, KeywordSet};
use crate::crawl::{
    detect_and_translate, extract_text_bundle, preprocess, Stopwords, TokenizedBundle, Translator,
};

/// Chinese surface forms matched for a keyword when a bundle is untranslated Chinese.
pub fn zh_surface_forms(keyword: &str) -> &'static [&'static str] {
    match keyword {
        "proxy" | "proxies" => &["代理"],
        "residential" => &["住宅"],
        "free" => &["免费"],
        "buy" => &["购买"],
        "price" => &["价格"],
        "rotating" => &["旋转"],
        "pricing" => &["定价"],
        "provider" => &["供应商"],
        _ => &[],
    }
}

fn count_matches(tokens: &[String], keyword: &str, zh: bool) -> usize {
    let mut n = tokens.iter().filter(|t| t.as_str() == keyword).count();
    if zh {
        for form in zh_surface_forms(keyword) {
            let chars: Vec<String> = form.chars().map(String::from).collect();
            n += tokens.windows(chars.len()).filter(|w| *w == chars.as_slice()).count();
        }
    }
    n
}

pub fn extract_features(bundle: &TokenizedBundle, keywords: &KeywordSet) -> FeatureVector {
    let zh = bundle.is_untranslated_chinese();
    let mut fv = FeatureVector::zeros();
    let components = [
        &bundle.title.tokens,
        &bundle.keywords_meta.tokens,
        &bundle.description_meta.tokens,
        &bundle.tags_meta.tokens,
    ];
    for (k, kw) in keywords.keywords().enumerate() {
        let num = count_matches(&bundle.body.tokens, kw, zh);
        fv.set(FeatureVector::num_index(k), num as f64);
        if bundle.body_token_count > 0 {
            fv.set(
                FeatureVector::ratio_index(k),
                num as f64 / bundle.body_token_count as f64,
            );
        }
        for (c, tokens) in components.iter().enumerate() {
            if count_matches(tokens, kw, zh) > 0 {
                fv.set(FeatureVector::pos_index(c, k), 1.0);
            }
        }
    }
    fv
}

/// Raw homepage HTML to features: extraction, optional translation, preprocessing.
pub fn featurize_html(
    html: &[u8],
    keywords: &KeywordSet,
    stopwords: &Stopwords,
    translator: Option<&dyn Translator>,
) -> FeatureVector {
    let bundle = detect_and_translate(&extract_text_bundle(html), translator);
    extract_features(&preprocess(&bundle, stopwords), keywords)
}
