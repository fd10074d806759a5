//! Pulls the title, description/keywords/tags metadata and visible body text out of
//! a homepage.

use scraper::{ElementRef, Html, Node, Selector};

use super::text::{normalize_whitespace, TextBundle};

const SKIPPED: &[&str] = &["script", "style", "noscript", "template", "head", "iframe", "svg"];

const BLOCK: &[&str] = &[
    "address", "article", "aside", "blockquote", "br", "dd", "div", "dl", "dt", "fieldset",
    "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header",
    "hr", "li", "main", "nav", "ol", "p", "pre", "section", "table", "tbody", "td", "tfoot",
    "th", "thead", "tr", "ul", "option", "button", "label",
];

pub fn extract_text_bundle(html: &[u8]) -> TextBundle {
    match std::str::from_utf8(html) {
        Ok(text) => extract_from_str(text),
        Err(_) => {
            let lossy = String::from_utf8_lossy(html);
            TextBundle {
                body_text: strip_tags(&lossy),
                fallback_extraction: true,
                ..Default::default()
            }
        }
    }
}

pub fn extract_from_str(text: &str) -> TextBundle {
    if text.trim().is_empty() {
        return TextBundle::default();
    }
    let doc = Html::parse_document(text);
    let title_sel = Selector::parse("title").expect("static selector");
    let meta_sel = Selector::parse("meta").expect("static selector");
    let body_sel = Selector::parse("body").expect("static selector");

    let title = doc
        .select(&title_sel)
        .next()
        .map(|t| normalize_whitespace(&t.text().collect::<String>()))
        .unwrap_or_default();

    let mut bundle = TextBundle {
        title,
        ..Default::default()
    };
    for meta in doc.select(&meta_sel) {
        let el = meta.value();
        let Some(name) = el.attr("name") else { continue };
        let content = normalize_whitespace(el.attr("content").unwrap_or(""));
        let slot = match name.trim().to_ascii_lowercase().as_str() {
            "description" => &mut bundle.description_meta,
            "keywords" => &mut bundle.keywords_meta,
            "tags" => &mut bundle.tags_meta,
            _ => continue,
        };
        if slot.is_empty() {
            *slot = content;
        } else if !content.is_empty() {
            slot.push(' ');
            slot.push_str(&content);
        }
    }

    let mut body = String::new();
    if let Some(b) = doc.select(&body_sel).next() {
        collect_visible(b, &mut body);
    }
    bundle.body_text = normalize_whitespace(&body);
    bundle
}

fn collect_visible(el: ElementRef<'_>, out: &mut String) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => out.push_str(t),
            Node::Element(e) => {
                let name = e.name();
                if SKIPPED.contains(&name) {
                    continue;
                }
                let block = BLOCK.contains(&name);
                if block {
                    out.push(' ');
                }
                if let Some(child_el) = ElementRef::wrap(child) {
                    collect_visible(child_el, out);
                }
                if block {
                    out.push(' ');
                }
            }
            _ => {}
        }
    }
}

/// Last-resort text recovery: drop `<...>` spans plus script/style bodies.
pub fn strip_tags(html: &str) -> String {
    let lower = html.to_ascii_lowercase();
    let mut out = String::with_capacity(html.len());
    let mut i = 0;
    let bytes = html.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'<' {
            let rest = &lower[i..];
            let skip_block = ["<script", "<style"]
                .iter()
                .find(|p| rest.starts_with(*p))
                .map(|p| format!("</{}", &p[1..]));
            if let Some(close) = skip_block {
                match rest.find(&close) {
                    Some(end) => {
                        let after = i + end + close.len();
                        i = match html[after..].find('>') {
                            Some(gt) => after + gt + 1,
                            None => html.len(),
                        };
                        out.push(' ');
                        continue;
                    }
                    None => break,
                }
            }
            match html[i..].find('>') {
                Some(end) => {
                    i += end + 1;
                    out.push(' ');
                }
                None => break,
            }
        } else {
            let ch = html[i..].chars().next().expect("in bounds");
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    normalize_whitespace(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn title_and_empty_metas() {
        let html = b"<html><head><title>Buy Residential Proxies</title>\
            <meta name=\"description\" content=\"\"></head><body><p>Hi</p></body></html>";
        let b = extract_text_bundle(html);
        assert_eq!(b.title, "Buy Residential Proxies");
        assert_eq!(b.description_meta, "");
        assert_eq!(b.keywords_meta, "");
        assert_eq!(b.tags_meta, "");
        assert_eq!(b.body_text, "Hi");
        assert!(!b.fallback_extraction);
    }

    #[test]
    fn empty_html() {
        assert_eq!(extract_text_bundle(b""), TextBundle::default());
    }

    #[test]
    fn metas_are_case_insensitive() {
        let html = br#"<html><head>
            <meta name="Description" content="Fast   rotating proxies">
            <meta name="KEYWORDS" content="proxy, socks5">
            <meta name="tags" content="residential">
            <meta property="og:title" content="ignored">
            </head><body></body></html>"#;
        let b = extract_text_bundle(html);
        assert_eq!(b.description_meta, "Fast rotating proxies");
        assert_eq!(b.keywords_meta, "proxy, socks5");
        assert_eq!(b.tags_meta, "residential");
        assert_eq!(b.body_text, "");
    }

    #[test]
    fn script_only_body_is_empty() {
        let html = b"<html><body><script>var proxy = 'residential';</script>\
            <style>.a{color:red}</style><noscript>enable js</noscript></body></html>";
        assert_eq!(extract_text_bundle(html).body_text, "");
    }

    #[test]
    fn block_elements_separate_words() {
        let html = b"<body><div>Residential</div><div>Proxies</div><p>Pro<b>xy</b> IP</p></body>";
        assert_eq!(extract_text_bundle(html).body_text, "Residential Proxies Proxy IP");
    }

    #[test]
    fn invalid_utf8_falls_back() {
        let mut html = b"<html><body><p>residential proxy</p><script>x()</script>".to_vec();
        html.push(0xff);
        let b = extract_text_bundle(&html);
        assert!(b.fallback_extraction);
        assert_eq!(b.body_text, "residential proxy \u{fffd}");
    }
}
