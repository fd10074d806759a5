//! Per-service DNS naming patterns, shared by live resolution and passive-DNS matching.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infiltrate::ProxyProtocol;
use crate::psl::{to_apex, ApexDomain};
use crate::types::ServiceId;

pub const BUNDLED_SERVICES: &str = include_str!("../data/dns_services.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceDomainPattern {
    pub id: ServiceId,
    pub apexes: Vec<ApexDomain>,
    /// Subdomain globs; `*` stands for exactly one label. Absent means any subdomain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_globs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub website: Option<String>,
    /// Size as published, kept as display text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp_resips: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProxyProtocol>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct PatternFile {
    service: Vec<ServiceDomainPattern>,
}

/// Glob match over dot-separated labels, case-insensitive.
pub fn glob_match(glob: &str, sub: &str) -> bool {
    let g: Vec<&str> = glob.split('.').collect();
    let s: Vec<&str> = sub.split('.').collect();
    g.len() == s.len()
        && g.iter()
            .zip(&s)
            .all(|(g, s)| !s.is_empty() && (*g == "*" || g.eq_ignore_ascii_case(s)))
}

fn normalize(fqdn: &str) -> String {
    fqdn.trim().trim_end_matches('.').to_ascii_lowercase()
}

impl ServiceDomainPattern {
    /// Whether `fqdn` belongs to this service, given its precomputed apex.
    pub fn matches_with_apex(&self, fqdn: &str, apex: &ApexDomain) -> bool {
        if !self.apexes.contains(apex) {
            return false;
        }
        let Some(globs) = &self.label_globs else { return true };
        let fqdn = normalize(fqdn);
        let Some(sub) = fqdn
            .strip_suffix(apex.as_str())
            .and_then(|s| s.strip_suffix('.'))
        else {
            return false;
        };
        globs.iter().any(|g| glob_match(g, sub))
    }

    pub fn matches(&self, fqdn: &str) -> bool {
        to_apex(fqdn).is_ok_and(|a| self.matches_with_apex(fqdn, &a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    pub services: Vec<ServiceDomainPattern>,
}

impl PatternSet {
    pub fn parse(text: &str) -> Result<Self> {
        let file: PatternFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for s in &file.service {
            if s.apexes.is_empty() {
                return Err(Error::Config(format!("service {} has no apex domains", s.id)));
            }
            if let Some(bad) = s.names.iter().find(|n| !s.matches(n)) {
                return Err(Error::Config(format!(
                    "service {}: name `{bad}` does not match its own pattern",
                    s.id
                )));
            }
        }
        Ok(PatternSet { services: file.service })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::path_io(path, e))?;
        PatternSet::parse(&text)
    }

    pub fn bundled() -> Self {
        PatternSet::parse(BUNDLED_SERVICES).expect("bundled service list parses")
    }

    pub fn get(&self, id: &ServiceId) -> Option<&ServiceDomainPattern> {
        self.services.iter().find(|s| &s.id == id)
    }

    /// Every service `fqdn` belongs to.
    pub fn services_for(&self, fqdn: &str) -> Vec<&ServiceId> {
        let Ok(apex) = to_apex(fqdn) else { return Vec::new() };
        self.services
            .iter()
            .filter(|s| s.matches_with_apex(fqdn, &apex))
            .map(|s| &s.id)
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&PatternFile {
            service: self.services.clone(),
        })
        .expect("pattern set serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_has_all_dns_services() {
        let p = PatternSet::bundled();
        assert_eq!(p.services.len(), 42);
        assert_eq!(p.services[0].id.as_str(), "yunip168.com");
        assert_eq!(p.services[0].dp_resips.as_deref(), Some("200K"));
        assert_eq!(p.services.last().unwrap().website.as_deref(), Some("jkip.com"));
    }

    #[test]
    fn shenlong_subdomain_matches() {
        let p = PatternSet::bundled();
        assert_eq!(p.services_for("bj01.shenlongip.com").len(), 1);
        assert_eq!(p.services_for("BJ01.ShenlongIP.com.")[0].as_str(), "shenlongip.com");
        assert!(p.services_for("a.b.shenlongip.com").is_empty());
        assert!(p.services_for("shenlongip.com").is_empty());
        assert!(p.services_for("example.com").is_empty());
        assert_eq!(p.services_for("x.y.yunip168.com")[0].as_str(), "yunip168.com");
    }

    #[test]
    fn glob_labels() {
        assert!(glob_match("*", "zj0571"));
        assert!(glob_match("*.dx", "a.DX"));
        assert!(!glob_match("*.dx", "a.lt"));
        assert!(!glob_match("*", ""));
    }

    #[test]
    fn names_must_match_pattern() {
        let bad = r#"
[[service]]
id = "s"
apexes = ["shenlongip.com"]
label_globs = ["*"]
names = ["a.b.shenlongip.com"]
"#;
        assert!(PatternSet::parse(bad).is_err());
        let empty = "[[service]]\nid = \"s\"\napexes = []\n";
        assert!(PatternSet::parse(empty).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let p = PatternSet::bundled();
        assert_eq!(PatternSet::parse(&p.to_toml()).unwrap(), p);
    }
}
