//! On-disk snapshot bundles: `manifest.tsv` plus one raw HTML file per page,
//! homepage first. Shared with the external headless renderer.

use std::fs;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use super::{Page, RenderMode, WebsiteSnapshot};
use crate::error::{Error, Result};
use crate::flatfile::{self, sha256_hex};
use crate::psl::{to_apex, ApexDomain};

pub const MANIFEST: &str = "manifest.tsv";

/// Loads a bundle, verifying every page's checksum. The apex is taken from the
/// homepage url, or from `apex` when the bundle is empty.
pub fn ingest_snapshot_bundle(dir: &Path, apex: Option<&ApexDomain>) -> Result<WebsiteSnapshot> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::path_io(&manifest_path, e))?;
    let label = manifest_path.display().to_string();
    let mut pages = Vec::new();
    for rec in flatfile::parse_tsv(&text) {
        if rec.fields.len() < 5 {
            return Err(Error::parse(&label, rec.line, "expected 5 manifest fields"));
        }
        let file = rec.fields[0].trim();
        if file.contains("..") || file.starts_with('/') {
            return Err(Error::parse(&label, rec.line, "page path escapes the bundle"));
        }
        let url = url::Url::parse(rec.fields[1].trim())
            .map_err(|e| Error::parse(&label, rec.line, format!("bad url: {e}")))?;
        let fetch_time: DateTime<Utc> = DateTime::parse_from_rfc3339(rec.fields[2].trim())
            .map_err(|e| Error::parse(&label, rec.line, format!("bad fetch_time: {e}")))?
            .with_timezone(&Utc);
        let render_mode: RenderMode = rec.fields[3].parse()?;
        let expected = rec.fields[4].trim().to_ascii_lowercase();
        let page_path = dir.join(file);
        let html = match fs::read(&page_path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingBundleFile(file.to_string()))
            }
            Err(e) => return Err(Error::path_io(&page_path, e)),
        };
        if sha256_hex(&html) != expected {
            return Err(Error::ChecksumMismatch {
                page: file.to_string(),
            });
        }
        pages.push(Page {
            url,
            fetch_time,
            html,
            render_mode,
        });
    }
    let apex = match (pages.first(), apex) {
        (_, Some(a)) => a.clone(),
        (Some(home), None) => {
            let host = home
                .url
                .host_str()
                .ok_or_else(|| Error::Config("homepage url has no host".into()))?;
            to_apex(host)?
        }
        (None, None) => {
            return Err(Error::Config(
                "empty bundle: apex must be supplied explicitly".into(),
            ))
        }
    };
    Ok(WebsiteSnapshot {
        apex,
        pages,
        fetch_failed: false,
        failures: Vec::new(),
    })
}

/// Writes `snapshot` as a bundle into `dir` (created if absent).
pub fn write_snapshot_bundle(snapshot: &WebsiteSnapshot, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::path_io(dir, e))?;
    let mut manifest = String::from("# relative_filename\turl\tfetch_time\trender_mode\tsha256\n");
    for (i, page) in snapshot.pages.iter().enumerate() {
        let name = format!("page-{i:04}.html");
        let path = dir.join(&name);
        fs::write(&path, &page.html).map_err(|e| Error::path_io(&path, e))?;
        manifest.push_str(&format!(
            "{name}\t{}\t{}\t{}\t{}\n",
            page.url,
            page.fetch_time.to_rfc3339_opts(SecondsFormat::Secs, true),
            page.render_mode,
            sha256_hex(&page.html)
        ));
    }
    for f in &snapshot.failures {
        manifest.push_str(&format!(
            "# failed\t{}\t{}\n",
            f.url,
            flatfile::clean_field(&f.reason)
        ));
    }
    let mpath = dir.join(MANIFEST);
    fs::write(&mpath, manifest).map_err(|e| Error::path_io(&mpath, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn page(url: &str, html: &str) -> Page {
        Page {
            url: url.parse().unwrap(),
            fetch_time: Utc.with_ymd_and_hms(2021, 11, 3, 10, 0, 0).unwrap(),
            html: html.as_bytes().to_vec(),
            render_mode: RenderMode::Dynamic,
        }
    }

    #[test]
    fn round_trip_two_pages() {
        let dir = tempfile::tempdir().unwrap();
        let snap = WebsiteSnapshot {
            apex: to_apex("rps-fixture.com").unwrap(),
            pages: vec![
                page("https://www.rps-fixture.com/", "<title>Home</title>"),
                page("https://www.rps-fixture.com/pricing", "<p>pricing</p>"),
            ],
            fetch_failed: false,
            failures: vec![],
        };
        write_snapshot_bundle(&snap, dir.path()).unwrap();
        let back = ingest_snapshot_bundle(dir.path(), None).unwrap();
        assert_eq!(back.page_count(), 2);
        assert!(back.pages.iter().all(|p| p.render_mode == RenderMode::Dynamic));
        assert_eq!(back.apex.as_str(), "rps-fixture.com");
        assert_eq!(back.pages, snap.pages);
    }

    #[test]
    fn manifest_only_bundle() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST), "# nothing rendered\n").unwrap();
        let apex = to_apex("empty.com").unwrap();
        let snap = ingest_snapshot_bundle(dir.path(), Some(&apex)).unwrap();
        assert_eq!(snap.page_count(), 0);
    }

    #[test]
    fn missing_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(MANIFEST),
            "page-0000.html\thttps://a.com/\t2021-11-03T10:00:00Z\tdynamic\t00\n",
        )
        .unwrap();
        let err = ingest_snapshot_bundle(dir.path(), None).unwrap_err();
        assert!(matches!(err, Error::MissingBundleFile(f) if f == "page-0000.html"));
    }

    #[test]
    fn checksum_mismatch_names_page() {
        let dir = tempfile::tempdir().unwrap();
        let snap = WebsiteSnapshot {
            apex: to_apex("a.com").unwrap(),
            pages: vec![page("https://a.com/", "one"), page("https://a.com/b", "two")],
            fetch_failed: false,
            failures: vec![],
        };
        write_snapshot_bundle(&snap, dir.path()).unwrap();
        fs::write(dir.path().join("page-0001.html"), "tampered").unwrap();
        let err = ingest_snapshot_bundle(dir.path(), None).unwrap_err();
        assert!(matches!(err, Error::ChecksumMismatch { page } if page == "page-0001.html"));
    }
}
