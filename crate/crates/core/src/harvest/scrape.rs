//! Platform-specific deposit date extraction from repository record pages.
//! Each scraper targets one named marker rather than full-page layout, so it
//! tolerates arbitrary surrounding markup.

use chrono::NaiveDate;
use regex::Regex;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{CalendarDate, Platform};

/// A scraped deposit date. When a page carries several candidate dates, the
/// earliest wins and the result is flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScrapedDate {
    pub date: CalendarDate,
    pub multiple_candidates: bool,
}

fn human_date_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\d{1,2})\s+([A-Za-z]{3,9})\s+(\d{4})").unwrap())
}

fn iso_date_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d{4}-\d{2}-\d{2}").unwrap())
}

/// Parses "15 Mar 2016" or "15 March 2016".
fn parse_human_date(s: &str) -> Result<CalendarDate> {
    for format in ["%d %b %Y", "%d %B %Y"] {
        if let Ok(date) = NaiveDate::parse_from_str(s.trim(), format) {
            return CalendarDate::new(
                chrono::Datelike::year(&date),
                chrono::Datelike::month(&date),
                chrono::Datelike::day(&date),
            );
        }
    }
    Err(Error::UnparseableDate(s.to_string()))
}

/// Slice a fixed-size lookahead window after a marker without splitting a
/// multi-byte character.
fn window(html: &str, idx: usize, len: usize) -> &str {
    let mut end = html.len().min(idx + len);
    while !html.is_char_boundary(end) {
        end -= 1;
    }
    &html[idx..end]
}

fn pick_earliest(mut candidates: Vec<CalendarDate>, platform: Platform, marker: &str) -> Result<ScrapedDate> {
    candidates.sort();
    candidates.dedup();
    match candidates.split_first() {
        None => Err(Error::MarkerNotFound {
            platform: platform.to_string(),
            marker: marker.to_string(),
        }),
        Some((first, rest)) => Ok(ScrapedDate {
            date: *first,
            multiple_candidates: !rest.is_empty(),
        }),
    }
}

/// EPrints summary pages carry a "Deposited:" metadata row with a human
/// readable date ("Deposited: 15 Mar 2016").
fn scrape_eprints(html: &str) -> Result<ScrapedDate> {
    let mut candidates = Vec::new();
    for (idx, _) in html.match_indices("Deposited:") {
        let window = window(html, idx, 200);
        if let Some(m) = human_date_re().find(window) {
            candidates.push(parse_human_date(m.as_str())?);
        }
    }
    pick_earliest(candidates, Platform::Eprints, "Deposited:")
}

/// DSpace item pages expose the accession timestamp in a full-metadata table
/// cell labelled dc.date.accessioned; the time component is discarded.
fn scrape_dspace(html: &str) -> Result<ScrapedDate> {
    let mut candidates = Vec::new();
    for (idx, _) in html.match_indices("dc.date.accessioned") {
        let window = window(html, idx, 300);
        if let Some(m) = iso_date_re().find(window) {
            candidates.push(CalendarDate::parse_iso(m.as_str())?);
        }
    }
    pick_earliest(candidates, Platform::Dspace, "dc.date.accessioned")
}

/// Invenio and Zenodo record pages embed a JSON-LD block whose dateCreated
/// field carries the deposit timestamp.
fn scrape_json_ld(html: &str, platform: Platform) -> Result<ScrapedDate> {
    static BLOCK_RE: OnceLock<Regex> = OnceLock::new();
    let block_re = BLOCK_RE.get_or_init(|| {
        Regex::new(r#"(?s)<script[^>]*type\s*=\s*["']application/ld\+json["'][^>]*>(.*?)</script>"#)
            .unwrap()
    });
    let mut candidates = Vec::new();
    for capture in block_re.captures_iter(html) {
        let Ok(value) = serde_json::from_str::<serde_json::Value>(&capture[1]) else {
            continue;
        };
        for key in ["dateCreated", "created"] {
            if let Some(raw) = value.get(key).and_then(|v| v.as_str()) {
                candidates.push(CalendarDate::parse_iso(raw)?);
            }
        }
    }
    pick_earliest(candidates, platform, "application/ld+json dateCreated")
}

/// ArXiv abstract pages list the submission history; the `[v1]` line carries
/// the original submission date ("[v1] Tue, 2 Jan 2018 12:00:00 UTC").
fn scrape_arxiv(html: &str) -> Result<ScrapedDate> {
    static V1_RE: OnceLock<Regex> = OnceLock::new();
    let re = V1_RE.get_or_init(|| {
        Regex::new(r"\[v\d+\]\s*[A-Za-z]{3},\s*(\d{1,2}\s+[A-Za-z]{3,9}\s+\d{4})").unwrap()
    });
    let mut candidates = Vec::new();
    for capture in re.captures_iter(html) {
        candidates.push(parse_human_date(&capture[1])?);
    }
    pick_earliest(candidates, Platform::Arxiv, "[v1] submission history")
}

/// Extracts the deposit/accession date from a record page of the given
/// platform. The expected marker missing yields an extraction error naming
/// it; multiple candidate dates yield the earliest, flagged.
pub fn scrape_deposit_date(html: &str, platform: Platform) -> Result<ScrapedDate> {
    match platform {
        Platform::Eprints => scrape_eprints(html),
        Platform::Dspace => scrape_dspace(html),
        Platform::Invenio | Platform::Zenodo => scrape_json_ld(html, platform),
        Platform::Arxiv => scrape_arxiv(html),
        Platform::Other => Err(Error::MarkerNotFound {
            platform: platform.to_string(),
            marker: "no scraper for this platform".to_string(),
        }),
    }
}
