//! Shared domain types: calendar dates, registry and repository records, and
//! linked publications.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pseudo-country used for deposits in repositories without a country code
/// (subject repositories such as ArXiv).
pub const NO_COUNTRY: &str = "n/a";

/// A timezone-free Gregorian calendar date. All source timestamps are
/// truncated to their date component before they reach this type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CalendarDate(NaiveDate);

impl CalendarDate {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self> {
        if year < 1 {
            return Err(Error::InvalidDate { year, month, day });
        }
        NaiveDate::from_ymd_opt(year, month, day)
            .map(CalendarDate)
            .ok_or(Error::InvalidDate { year, month, day })
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }

    pub fn month(&self) -> u32 {
        self.0.month()
    }

    pub fn day(&self) -> u32 {
        self.0.day()
    }

    /// The next calendar day.
    pub fn succ(&self) -> Self {
        CalendarDate(self.0.checked_add_days(Days::new(1)).expect("date overflow"))
    }

    /// Parses "YYYY-MM-DD", optionally followed by a time component which is
    /// discarded ("2017-09-01T10:22:03Z" truncates to 2017-09-01).
    pub fn parse_iso(s: &str) -> Result<Self> {
        let date_part = s.trim().split(['T', ' ']).next().unwrap_or("");
        let parsed = NaiveDate::parse_from_str(date_part, "%Y-%m-%d")
            .map_err(|_| Error::UnparseableDate(s.to_string()))?;
        if parsed.year() < 1 {
            return Err(Error::UnparseableDate(s.to_string()));
        }
        Ok(CalendarDate(parsed))
    }
}

impl fmt::Display for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

/// Difference `b - a` in whole calendar days (exclusive count: a deposit on
/// the publication day is lag 0). Antisymmetric by construction.
pub fn date_diff_days(a: CalendarDate, b: CalendarDate) -> i64 {
    (b.0 - a.0).num_days()
}

/// A possibly incomplete date as it appears in raw registry metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialDate {
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub month: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<u32>,
}

/// One author as listed in source metadata. At least one of `family` and
/// `raw` must be present for the record to survive filtering.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorName {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

/// Repository software platform, used to pick the right page scraper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Platform {
    Dspace,
    Eprints,
    Invenio,
    Arxiv,
    Zenodo,
    Other,
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Platform::Dspace => "DSPACE",
            Platform::Eprints => "EPRINTS",
            Platform::Invenio => "INVENIO",
            Platform::Arxiv => "ARXIV",
            Platform::Zenodo => "ZENODO",
            Platform::Other => "OTHER",
        };
        f.write_str(s)
    }
}

/// A repository's identity as listed in the repository registry file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryInfo {
    pub repo_id: String,
    pub name: String,
    /// ISO country code; absent for subject repositories.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    pub platform: Platform,
}

/// Publisher-side metadata record as ingested, before filtering. Optional
/// fields reflect what real registry dumps actually omit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRegistryRecord {
    pub doi: String,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub authors: Vec<AuthorName>,
    pub published: PartialDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issn: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<PartialDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affiliation_countries: Option<Vec<String>>,
}

/// Publisher-side metadata record after filtering: title and authors present,
/// publication date fully imputed, DOI normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryRecord {
    pub doi: String,
    pub title: String,
    pub authors: Vec<AuthorName>,
    pub published: CalendarDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issn: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<CalendarDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affiliation_countries: Option<Vec<String>>,
}

impl RegistryRecord {
    pub fn has_issn(&self) -> bool {
        self.issn.as_ref().is_some_and(|v| !v.is_empty())
    }
}

/// Repository-side metadata record as ingested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRepositoryRecord {
    pub record_id: String,
    pub repo_id: String,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub authors: Vec<AuthorName>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    /// The record's own deposit date field; may be missing entirely, in
    /// which case only the harvest ledger or a scraped date can supply one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deposit_date: Option<CalendarDate>,
}

/// Repository-side metadata record after filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositoryRecord {
    pub record_id: String,
    pub repo_id: String,
    pub title: String,
    pub authors: Vec<AuthorName>,
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    pub deposit_date: CalendarDate,
}

/// One deposit of a publication in one repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deposit {
    pub repo_id: String,
    pub deposit_date: CalendarDate,
    pub record_id: String,
}

/// One registry record joined with all its repository deposits, grouped by
/// normalized DOI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedPublication {
    pub doi: String,
    pub registry: RegistryRecord,
    pub deposits: Vec<Deposit>,
    /// Countries of the deposit repositories, with [`NO_COUNTRY`] standing in
    /// for repositories that have none.
    pub countries: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subjects: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panels: Option<BTreeSet<String>>,
}

impl LinkedPublication {
    /// Earliest deposit date across all repositories.
    pub fn earliest_deposit(&self) -> CalendarDate {
        self.deposits
            .iter()
            .map(|d| d.deposit_date)
            .min()
            .expect("deposits list is non-empty")
    }
}
