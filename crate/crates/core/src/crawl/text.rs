//! Homepage text components, language detection, pluggable translation, and
//! tokenization/stopword/lemmatization preprocessing.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

pub const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// The five text components of a homepage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBundle {
    pub title: String,
    pub description_meta: String,
    pub keywords_meta: String,
    pub tags_meta: String,
    pub body_text: String,
    /// Detected language code (`en`, `zh`, ...). Empty until detection runs.
    pub language: String,
    pub translated: bool,
    /// Set when extraction fell back to plain tag stripping.
    pub fallback_extraction: bool,
    /// Set when a configured translator failed and the bundle passed through.
    pub translation_failed: bool,
}

impl TextBundle {
    fn components_mut(&mut self) -> [&mut String; 5] {
        [
            &mut self.title,
            &mut self.description_meta,
            &mut self.keywords_meta,
            &mut self.tags_meta,
            &mut self.body_text,
        ]
    }

    fn all_text(&self) -> impl Iterator<Item = &str> {
        [
            self.title.as_str(),
            self.description_meta.as_str(),
            self.keywords_meta.as_str(),
            self.tags_meta.as_str(),
            self.body_text.as_str(),
        ]
        .into_iter()
    }
}

fn is_han(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2A6DF)
}

/// Script-count language guess. Han text counts as Chinese once Han characters are at
/// least a quarter as many as Latin letters (one Han character carries roughly a word).
pub fn detect_language(bundle: &TextBundle) -> String {
    let (mut han, mut latin, mut cyrillic, mut kana, mut hangul) = (0usize, 0usize, 0, 0, 0);
    for text in bundle.all_text() {
        for c in text.chars() {
            match c as u32 {
                _ if is_han(c) => han += 1,
                0x3040..=0x30FF => kana += 1,
                0xAC00..=0xD7AF => hangul += 1,
                0x0400..=0x04FF => cyrillic += 1,
                _ if c.is_ascii_alphabetic() => latin += 1,
                _ => {}
            }
        }
    }
    let lang = if kana > 0 && kana * 4 >= latin {
        "ja"
    } else if hangul > 0 && hangul * 4 >= latin {
        "ko"
    } else if han > 0 && han * 4 >= latin {
        "zh"
    } else if cyrillic > latin {
        "ru"
    } else {
        "en"
    };
    lang.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslateError(pub String);

/// A machine-translation backend. Implementations must be side-effect free with
/// respect to the bundle; failures are reported, never panicked.
pub trait Translator: Send + Sync {
    fn translate(&self, text: &str, source_lang: &str) -> Result<String, TranslateError>;
}

/// Offline phrase-table translator. Longest phrases are substituted first.
#[derive(Debug, Clone, Default)]
pub struct StubTranslator {
    phrases: Vec<(String, String)>,
}

impl StubTranslator {
    pub fn new(phrases: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut phrases: Vec<(String, String)> = phrases.into_iter().collect();
        phrases.sort_by(|a, b| b.0.chars().count().cmp(&a.0.chars().count()).then(a.0.cmp(&b.0)));
        StubTranslator { phrases }
    }

    /// Phrase table built from the bilingual search keyword terminology.
    pub fn bilingual_keywords() -> Self {
        let pairs = [
            ("住宅代理", "residential proxy"),
            ("住宅", "residential"),
            ("代理池", "proxy pool"),
            ("代理", "proxy"),
            ("供应商", "provider"),
            ("服务", "service"),
            ("定价", "pricing"),
            ("价格", "price"),
            ("静态", "static"),
            ("动态", "dynamic"),
            ("旋转", "rotating"),
            ("购买", "buy"),
            ("无限", "unlimited"),
            ("免费", "free"),
        ];
        StubTranslator::new(pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())))
    }
}

impl Translator for StubTranslator {
    fn translate(&self, text: &str, _source_lang: &str) -> Result<String, TranslateError> {
        let mut out = text.to_string();
        for (from, to) in &self.phrases {
            if out.contains(from.as_str()) {
                out = out.replace(from.as_str(), &format!(" {to} "));
            }
        }
        Ok(normalize_whitespace(&out))
    }
}

pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Detects the language and, for non-English text with a translator configured,
/// translates all five components. Never fails: translator errors pass the
/// original bundle through with `translation_failed` set.
pub fn detect_and_translate(bundle: &TextBundle, translator: Option<&dyn Translator>) -> TextBundle {
    let mut out = bundle.clone();
    out.language = detect_language(bundle);
    if out.language == "en" {
        return out;
    }
    let Some(tr) = translator else {
        return out;
    };
    let source = out.language.clone();
    let mut translated = out.clone();
    for field in translated.components_mut() {
        if field.is_empty() {
            continue;
        }
        match tr.translate(field, &source) {
            Ok(t) => *field = t,
            Err(e) => {
                log::warn!("translation from {source} failed: {}", e.0);
                out.translation_failed = true;
                return out;
            }
        }
    }
    translated.translated = true;
    translated.language = "en".to_string();
    translated
}

pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Stopwords(words.into_iter().map(str::to_lowercase).collect())
    }

    pub fn bundled() -> &'static Stopwords {
        static SW: OnceLock<Stopwords> = OnceLock::new();
        SW.get_or_init(|| Stopwords::parse(BUNDLED_STOPWORDS))
    }

    pub fn contains(&self, w: &str) -> bool {
        self.0.contains(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Token lists of one component: the lowercase pre-lemmatization view (used for
/// keyword matching) and the lemmatized view (used for corpus statistics).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentTokens {
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedBundle {
    pub title: ComponentTokens,
    pub description_meta: ComponentTokens,
    pub keywords_meta: ComponentTokens,
    pub tags_meta: ComponentTokens,
    pub body: ComponentTokens,
    /// Body tokens after stopword removal, before lemmatization.
    pub body_token_count: usize,
    pub language: String,
    pub translated: bool,
}

impl TokenizedBundle {
    /// Builds a bundle straight from pre-lemmatization token lists.
    pub fn from_tokens(
        title: Vec<String>,
        keywords_meta: Vec<String>,
        description_meta: Vec<String>,
        tags_meta: Vec<String>,
        body: Vec<String>,
    ) -> Self {
        let wrap = |tokens: Vec<String>| ComponentTokens {
            lemmas: tokens.iter().map(|t| lemmatize(t)).collect(),
            tokens,
        };
        let body_token_count = body.len();
        TokenizedBundle {
            title: wrap(title),
            description_meta: wrap(description_meta),
            keywords_meta: wrap(keywords_meta),
            tags_meta: wrap(tags_meta),
            body: wrap(body),
            body_token_count,
            language: "en".into(),
            translated: false,
        }
    }

    pub fn is_untranslated_chinese(&self) -> bool {
        self.language == "zh" && !self.translated
    }
}

/// Unicode word segmentation, lowercased, stopwords dropped. Han ideographs come out
/// one per token.
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    text.unicode_words()
        .map(str::to_lowercase)
        .filter(|w| !stopwords.contains(w))
        .collect()
}

/// Rule-based suffix stripper: `-ies`→`y`, `-es`/`-s` dropped, `-ing`/`-ed` dropped,
/// each only when at least three characters of stem remain.
pub fn lemmatize(word: &str) -> String {
    if !word.chars().all(|c| c.is_ascii_lowercase()) {
        return word.to_string();
    }
    let stem_ok = |suffix: &str| word.len() >= suffix.len() + 3;
    if word.ends_with("ies") && stem_ok("ies") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if word.ends_with("es") && stem_ok("es") {
        let stem = &word[..word.len() - 2];
        if ["s", "x", "z", "ch", "sh"].iter().any(|s| stem.ends_with(s)) {
            return stem.to_string();
        }
    }
    if word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") && !word.ends_with("is") && stem_ok("s") {
        return word[..word.len() - 1].to_string();
    }
    if word.ends_with("ing") && stem_ok("ing") {
        return word[..word.len() - 3].to_string();
    }
    if word.ends_with("ed") && stem_ok("ed") {
        return word[..word.len() - 2].to_string();
    }
    word.to_string()
}

fn component(text: &str, stopwords: &Stopwords) -> ComponentTokens {
    let tokens = tokenize(text, stopwords);
    let lemmas = tokens.iter().map(|t| lemmatize(t)).collect();
    ComponentTokens { tokens, lemmas }
}

pub fn preprocess(bundle: &TextBundle, stopwords: &Stopwords) -> TokenizedBundle {
    let body = component(&bundle.body_text, stopwords);
    TokenizedBundle {
        title: component(&bundle.title, stopwords),
        description_meta: component(&bundle.description_meta, stopwords),
        keywords_meta: component(&bundle.keywords_meta, stopwords),
        tags_meta: component(&bundle.tags_meta, stopwords),
        body_token_count: body.tokens.len(),
        body,
        language: if bundle.language.is_empty() {
            detect_language(bundle)
        } else {
            bundle.language.clone()
        },
        translated: bundle.translated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn buy_proxies_now() {
        let sw = Stopwords::from_words(["now"]);
        let b = TextBundle {
            body_text: "Buy Proxies Now!".into(),
            ..Default::default()
        };
        let t = preprocess(&b, &sw);
        assert_eq!(t.body.tokens, strs(&["buy", "proxies"]));
        assert_eq!(t.body.lemmas, strs(&["buy", "proxy"]));
        assert_eq!(t.body_token_count, 2);
    }

    #[test]
    fn ip_and_ips_stay_distinct() {
        let t = preprocess(
            &TextBundle {
                body_text: "IPs IP ips".into(),
                ..Default::default()
            },
            Stopwords::bundled(),
        );
        assert_eq!(t.body.tokens, strs(&["ips", "ip", "ips"]));
    }

    #[test]
    fn empty_body() {
        let t = preprocess(&TextBundle::default(), Stopwords::bundled());
        assert!(t.body.tokens.is_empty());
        assert_eq!(t.body_token_count, 0);
    }

    #[test]
    fn bundled_stopwords_exclude_keywords() {
        let sw = Stopwords::bundled();
        assert!(sw.len() >= 150);
        for kw in [
            "proxy", "proxies", "ip", "residential", "ips", "free", "http", "buy", "price",
            "rotating", "pricing", "provider",
        ] {
            assert!(!sw.contains(kw), "{kw}");
        }
        assert!(sw.contains("now"));
    }

    #[test]
    fn lemmatizer_rules() {
        assert_eq!(lemmatize("proxies"), "proxy");
        assert_eq!(lemmatize("boxes"), "box");
        assert_eq!(lemmatize("prices"), "price");
        assert_eq!(lemmatize("classes"), "class");
        assert_eq!(lemmatize("rotating"), "rotat");
        assert_eq!(lemmatize("used"), "used");
        assert_eq!(lemmatize("ips"), "ips");
        assert_eq!(lemmatize("bus"), "bus");
        assert_eq!(lemmatize("代理"), "代理");
    }

    #[test]
    fn han_tokens_are_single_ideographs() {
        let t = tokenize("购买住宅代理 HTTP", Stopwords::bundled());
        assert_eq!(t, strs(&["购", "买", "住", "宅", "代", "理", "http"]));
    }

    #[test]
    fn english_is_untouched() {
        let b = TextBundle {
            title: "Buy residential proxies".into(),
            ..Default::default()
        };
        let tr = StubTranslator::bilingual_keywords();
        let out = detect_and_translate(&b, Some(&tr));
        assert_eq!(out.language, "en");
        assert!(!out.translated);
        assert_eq!(out.title, b.title);
    }

    #[test]
    fn chinese_with_stub_translator() {
        let b = TextBundle {
            title: "住宅代理".into(),
            body_text: "购买住宅代理".into(),
            ..Default::default()
        };
        let tr = StubTranslator::bilingual_keywords();
        let out = detect_and_translate(&b, Some(&tr));
        assert!(out.translated);
        assert_eq!(out.language, "en");
        assert_eq!(out.title, "residential proxy");
        assert_eq!(out.body_text, "buy residential proxy");
    }

    #[test]
    fn chinese_without_translator_passes_through() {
        let b = TextBundle {
            body_text: "静态住宅代理".into(),
            ..Default::default()
        };
        let out = detect_and_translate(&b, None);
        assert_eq!(out.language, "zh");
        assert!(!out.translated);
        assert_eq!(out.body_text, b.body_text);
    }

    struct Failing;
    impl Translator for Failing {
        fn translate(&self, _: &str, _: &str) -> Result<String, TranslateError> {
            Err(TranslateError("quota exceeded".into()))
        }
    }

    #[test]
    fn translator_failure_flags_and_passes_through() {
        let b = TextBundle {
            body_text: "住宅代理".into(),
            ..Default::default()
        };
        let out = detect_and_translate(&b, Some(&Failing));
        assert!(out.translation_failed);
        assert!(!out.translated);
        assert_eq!(out.body_text, "住宅代理");
        assert_eq!(out.language, "zh");
    }

    proptest! {
        #[test]
        fn preprocess_idempotent_on_own_output(text in "[A-Za-z ,.!'-]{0,80}") {
            let sw = Stopwords::bundled();
            let b = TextBundle { body_text: text.clone(), title: text, ..Default::default() };
            let once = preprocess(&b, sw);
            let again = preprocess(&TextBundle {
                body_text: once.body.tokens.join(" "),
                title: once.title.tokens.join(" "),
                ..Default::default()
            }, sw);
            prop_assert_eq!(&again.body.tokens, &once.body.tokens);
            prop_assert_eq!(&again.title.tokens, &once.title.tokens);
            prop_assert_eq!(preprocess(&b, sw), once);
        }
    }
}
