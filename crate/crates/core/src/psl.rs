//! Registrable ("apex") domain derivation against the bundled public-suffix snapshot.
//!
//! The snapshot lives in `data/public_suffix_list.dat` and uses the community list's
//! text format. It is compiled into the binary; nothing is fetched at runtime.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use publicsuffix::{List, Psl};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BUNDLED_SNAPSHOT: &str = include_str!("../data/public_suffix_list.dat");

/// Lowercase registrable domain, e.g. `kgvps.com` for `ju1.kgvps.com`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ApexDomain(String);

impl ApexDomain {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ApexDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ApexDomain {
    type Err = Error;
    /// Parses any hostname and reduces it to its apex.
    fn from_str(s: &str) -> Result<Self> {
        to_apex(s)
    }
}

impl TryFrom<String> for ApexDomain {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        to_apex(&s)
    }
}

impl From<ApexDomain> for String {
    fn from(a: ApexDomain) -> String {
        a.0
    }
}

/// A parsed suffix list. Most callers want [`to_apex`], which uses the bundled one.
pub struct SuffixList {
    list: List,
}

impl SuffixList {
    pub fn parse(text: &str) -> Result<Self> {
        let list: List = text
            .parse()
            .map_err(|e| Error::Config(format!("public suffix list: {e}")))?;
        Ok(SuffixList { list })
    }

    pub fn bundled() -> &'static SuffixList {
        static LIST: OnceLock<SuffixList> = OnceLock::new();
        LIST.get_or_init(|| SuffixList::parse(BUNDLED_SNAPSHOT).expect("bundled snapshot parses"))
    }

    pub fn apex(&self, host: &str) -> Result<ApexDomain> {
        let host = normalize_host(host)?;
        match self.list.domain(host.as_bytes()) {
            Some(domain) => {
                let apex = std::str::from_utf8(domain.as_bytes())
                    .expect("slice of a str on label boundaries");
                Ok(ApexDomain(apex.to_string()))
            }
            None => Err(Error::SuffixOnly(host)),
        }
    }
}

/// Registrable domain of `host` under the bundled snapshot.
pub fn to_apex(host: &str) -> Result<ApexDomain> {
    SuffixList::bundled().apex(host)
}

/// Lowercases, drops one trailing dot, and checks hostname syntax.
fn normalize_host(host: &str) -> Result<String> {
    let invalid = || Error::InvalidHostname(host.to_string());
    let h = host.trim().strip_suffix('.').unwrap_or(host.trim());
    if h.is_empty() || h.len() > 253 {
        return Err(invalid());
    }
    let h = h.to_lowercase();
    let labels: Vec<&str> = h.split('.').collect();
    for label in &labels {
        let ok_len = !label.is_empty() && label.len() <= 63;
        let ok_chars = label
            .chars()
            .all(|c| c.is_alphanumeric() || c == '-' || c == '_');
        if !ok_len || !ok_chars || label.starts_with('-') || label.ends_with('-') {
            return Err(invalid());
        }
    }
    // an all-numeric top label means an address literal, not a hostname
    if labels
        .last()
        .is_some_and(|tld| tld.chars().all(|c| c.is_ascii_digit()))
    {
        return Err(invalid());
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table13_website_domain() {
        assert_eq!(to_apex("ju1.kgvps.com").unwrap().as_str(), "kgvps.com");
        assert_eq!(to_apex("example.com").unwrap().as_str(), "example.com");
    }

    /// Each case resolved by hand against `data/public_suffix_list.dat`.
    #[test]
    fn mixed_hostnames_against_snapshot() {
        let cases = [
            ("www.bbc.co.uk", "bbc.co.uk"),
            ("bbc.co.uk", "bbc.co.uk"),
            ("a.b.c.example.com.cn", "example.com.cn"),
            ("bj01.shenlongip.com", "shenlongip.com"),
            ("foo.bar.zj.cn", "bar.zj.cn"),
            ("WWW.Example.ORG.", "example.org"),
            ("user.github.io", "user.github.io"),
            ("x.user.github.io", "user.github.io"),
            ("shop.example.com.au", "example.com.au"),
            ("a.b.example.ck", "b.example.ck"),
            ("www.ck", "www.ck"),
            ("sub.www.ck", "www.ck"),
            ("x.y.kawasaki.jp", "x.y.kawasaki.jp"),
            ("a.city.kawasaki.jp", "city.kawasaki.jp"),
            ("mail.school.foo.sch.uk", "school.foo.sch.uk"),
            ("api.ipduoduo.xyz", "ipduoduo.xyz"),
            ("hk01.91ip.vip", "91ip.vip"),
            ("deep.node.unknowntld", "node.unknowntld"),
            ("myhome.ddns.net", "myhome.ddns.net"),
            ("vps.hydc.top", "hydc.top"),
        ];
        for (host, apex) in cases {
            assert_eq!(to_apex(host).unwrap().as_str(), apex, "host {host}");
        }
    }

    #[test]
    fn rejects_suffix_only() {
        for host in ["com", "co.uk", "com.cn", "github.io", "foo.ck"] {
            assert!(matches!(to_apex(host), Err(Error::SuffixOnly(_))), "{host}");
        }
    }

    #[test]
    fn rejects_malformed() {
        for host in [
            "",
            "http://example.com",
            "example.com/path",
            "example.com:8080",
            "exa mple.com",
            "-bad.com",
            "a..b.com",
            "1.2.3.4",
        ] {
            assert!(matches!(to_apex(host), Err(Error::InvalidHostname(_))), "{host:?}");
        }
    }

    proptest! {
        #[test]
        fn apex_is_idempotent(labels in prop::collection::vec("[a-z0-9]{1,8}", 1..5),
                              suffix in prop::sample::select(vec!["com", "co.uk", "com.cn", "github.io", "vip", "sch.uk", "ck"])) {
            let host = format!("{}.{}", labels.join("."), suffix);
            if let Ok(apex) = to_apex(&host) {
                let again = to_apex(apex.as_str()).unwrap();
                prop_assert_eq!(again, apex);
            }
        }
    }
}
