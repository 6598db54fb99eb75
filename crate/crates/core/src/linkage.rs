//! Filtering, exact-match joining, DOI grouping, and DOI-based accuracy
//! estimation for the registry/repository record linkage.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{
    Deposit, LinkedPublication, RawRegistryRecord, RawRepositoryRecord, RegistryRecord,
    RepositoryInfo, RepositoryRecord, NO_COUNTRY,
};
use crate::normalize::{build_match_key, impute_publication_date, normalize_doi, MatchKey};

/// Earliest publication year retained by both filters.
pub const MIN_YEAR: i32 = 2013;

/// Why a record was dropped during filtering. Rejections are data, not
/// failures; they are written to a CSV alongside the kept records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    MissingTitle,
    MissingAuthors,
    MissingYear,
    MissingMonth,
    MissingDepositDate,
    Pre2013,
    InvalidDate,
    BadDoi,
    EmptyTitleKey,
    EmptyFamilyKey,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::MissingTitle => "MISSING_TITLE",
            RejectReason::MissingAuthors => "MISSING_AUTHORS",
            RejectReason::MissingYear => "MISSING_YEAR",
            RejectReason::MissingMonth => "MISSING_MONTH",
            RejectReason::MissingDepositDate => "MISSING_DEPOSIT_DATE",
            RejectReason::Pre2013 => "PRE_2013",
            RejectReason::InvalidDate => "INVALID_DATE",
            RejectReason::BadDoi => "BAD_DOI",
            RejectReason::EmptyTitleKey => "EMPTY_TITLE_KEY",
            RejectReason::EmptyFamilyKey => "EMPTY_FAMILY_KEY",
        };
        f.write_str(s)
    }
}

/// One dropped record with its reason code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// DOI for registry records, record_id for repository records.
    pub id: String,
    pub reason: RejectReason,
}

/// One matched (registry, repository-record) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkPair {
    pub registry_doi: String,
    pub repository_record_id: String,
    pub key: MatchKey,
    /// The repository record's own raw DOI, when it has one; used for the
    /// accuracy estimate, never for linking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repository_doi: Option<String>,
}

/// A match key shared by more than one registry record. Such keys are
/// excluded from linking rather than linked arbitrarily.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguousKey {
    pub key: MatchKey,
    pub registry_dois: Vec<String>,
}

/// Summary of one linking run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkReport {
    pub registry_records: usize,
    pub repository_records: usize,
    pub pairs: usize,
    /// Repository records whose key matched no registry record.
    pub unmatched_repository_records: usize,
    pub ambiguous_keys: Vec<AmbiguousKey>,
}

fn reject_registry(record: &RawRegistryRecord) -> Option<RejectReason> {
    match &record.title {
        None => return Some(RejectReason::MissingTitle),
        Some(t) if t.trim().is_empty() => return Some(RejectReason::MissingTitle),
        _ => {}
    }
    if record.authors.is_empty() {
        return Some(RejectReason::MissingAuthors);
    }
    None
}

/// Filters raw registry records: title, authors, and a month-resolved
/// publication date are required, the publication year must be 2013 or
/// later, and the match key must be buildable.
pub fn filter_registry(records: &[RawRegistryRecord]) -> (Vec<RegistryRecord>, Vec<Rejection>) {
    let mut kept = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();
    for record in records {
        let mut push_reject = |reason| {
            rejected.push(Rejection {
                id: record.doi.clone(),
                reason,
            })
        };
        if let Some(reason) = reject_registry(record) {
            push_reject(reason);
            continue;
        }
        let doi = match normalize_doi(&record.doi) {
            Ok(doi) => doi,
            Err(_) => {
                push_reject(RejectReason::BadDoi);
                continue;
            }
        };
        let published = match impute_publication_date(
            record.published.year,
            record.published.month,
            record.published.day,
        ) {
            Ok(d) => d,
            Err(Error::MissingMonth(_)) => {
                push_reject(RejectReason::MissingMonth);
                continue;
            }
            Err(_) => {
                push_reject(RejectReason::InvalidDate);
                continue;
            }
        };
        if published.year() < MIN_YEAR {
            push_reject(RejectReason::Pre2013);
            continue;
        }
        let title = record.title.clone().unwrap();
        match build_match_key(&title, published.year(), &record.authors) {
            Ok(_) => {}
            Err(Error::EmptyTitleKey(_)) => {
                push_reject(RejectReason::EmptyTitleKey);
                continue;
            }
            Err(_) => {
                push_reject(RejectReason::EmptyFamilyKey);
                continue;
            }
        }
        let accepted = record.accepted.as_ref().and_then(|a| {
            impute_publication_date(a.year, a.month, a.day).ok()
        });
        kept.push(RegistryRecord {
            doi,
            title,
            authors: record.authors.clone(),
            published,
            issn: record.issn.clone(),
            accepted,
            affiliation_countries: record.affiliation_countries.clone(),
        });
    }
    (kept, rejected)
}

/// Filters raw repository records: title, authors, and year are required,
/// year 2013 or later, match key buildable. The repository side carries only
/// year granularity, so there is no month requirement.
pub fn filter_repository(records: &[RawRepositoryRecord]) -> (Vec<RepositoryRecord>, Vec<Rejection>) {
    let mut kept = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();
    for record in records {
        let mut push_reject = |reason| {
            rejected.push(Rejection {
                id: record.record_id.clone(),
                reason,
            })
        };
        let title = match &record.title {
            Some(t) if !t.trim().is_empty() => t.clone(),
            _ => {
                push_reject(RejectReason::MissingTitle);
                continue;
            }
        };
        if record.authors.is_empty() {
            push_reject(RejectReason::MissingAuthors);
            continue;
        }
        let year = match record.year {
            Some(y) => y,
            None => {
                push_reject(RejectReason::MissingYear);
                continue;
            }
        };
        if year < MIN_YEAR {
            push_reject(RejectReason::Pre2013);
            continue;
        }
        let deposit_date = match record.deposit_date {
            Some(d) => d,
            None => {
                push_reject(RejectReason::MissingDepositDate);
                continue;
            }
        };
        match build_match_key(&title, year, &record.authors) {
            Ok(_) => {}
            Err(Error::EmptyTitleKey(_)) => {
                push_reject(RejectReason::EmptyTitleKey);
                continue;
            }
            Err(_) => {
                push_reject(RejectReason::EmptyFamilyKey);
                continue;
            }
        }
        kept.push(RepositoryRecord {
            record_id: record.record_id.clone(),
            repo_id: record.repo_id.clone(),
            title,
            authors: record.authors.clone(),
            year,
            doi: record.doi.clone(),
            deposit_date,
        });
    }
    (kept, rejected)
}

/// Joins the two filtered datasets by exact match key. Registry keys shared
/// by more than one registry record produce no links and are reported as
/// ambiguous. Output order is canonical (sorted), so the result is
/// independent of input order.
pub fn link(registry: &[RegistryRecord], repository: &[RepositoryRecord]) -> (Vec<LinkPair>, LinkReport) {
    let mut by_key: HashMap<MatchKey, Vec<&RegistryRecord>> = HashMap::new();
    for record in registry {
        // filter_registry guarantees the key builds
        let key = build_match_key(&record.title, record.published.year(), &record.authors)
            .expect("filtered registry record has a valid match key");
        by_key.entry(key).or_default().push(record);
    }

    let mut ambiguous: Vec<AmbiguousKey> = by_key
        .iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|(key, v)| {
            let mut dois: Vec<String> = v.iter().map(|r| r.doi.clone()).collect();
            dois.sort();
            AmbiguousKey {
                key: key.clone(),
                registry_dois: dois,
            }
        })
        .collect();
    ambiguous.sort_by(|a, b| a.key.cmp(&b.key));

    let mut pairs = Vec::new();
    let mut unmatched = 0usize;
    for record in repository {
        let key = build_match_key(&record.title, record.year, &record.authors)
            .expect("filtered repository record has a valid match key");
        match by_key.get(&key) {
            Some(matches) if matches.len() == 1 => {
                pairs.push(LinkPair {
                    registry_doi: matches[0].doi.clone(),
                    repository_record_id: record.record_id.clone(),
                    key,
                    repository_doi: record.doi.clone(),
                });
            }
            _ => unmatched += 1,
        }
    }
    pairs.sort_by(|a, b| {
        (&a.registry_doi, &a.repository_record_id).cmp(&(&b.registry_doi, &b.repository_record_id))
    });
    pairs.dedup_by(|a, b| {
        a.registry_doi == b.registry_doi && a.repository_record_id == b.repository_record_id
    });

    let report = LinkReport {
        registry_records: registry.len(),
        repository_records: repository.len(),
        pairs: pairs.len(),
        unmatched_repository_records: unmatched,
        ambiguous_keys: ambiguous,
    };
    (pairs, report)
}

/// Groups all link pairs sharing a registry DOI into one publication with the
/// union of their deposits. Deposits are deduplicated per
/// (repo_id, record_id) and the output is sorted by DOI.
pub fn group_by_doi(
    pairs: &[LinkPair],
    registry: &[RegistryRecord],
    repository: &[RepositoryRecord],
    repositories: &BTreeMap<String, RepositoryInfo>,
) -> Vec<LinkedPublication> {
    let registry_by_doi: HashMap<&str, &RegistryRecord> =
        registry.iter().map(|r| (r.doi.as_str(), r)).collect();
    let repo_records: HashMap<&str, &RepositoryRecord> =
        repository.iter().map(|r| (r.record_id.as_str(), r)).collect();

    let mut grouped: BTreeMap<&str, Vec<Deposit>> = BTreeMap::new();
    for pair in pairs {
        let Some(record) = repo_records.get(pair.repository_record_id.as_str()) else {
            continue;
        };
        grouped.entry(pair.registry_doi.as_str()).or_default().push(Deposit {
            repo_id: record.repo_id.clone(),
            deposit_date: record.deposit_date,
            record_id: record.record_id.clone(),
        });
    }

    let mut publications = Vec::with_capacity(grouped.len());
    for (doi, mut deposits) in grouped {
        let Some(registry_record) = registry_by_doi.get(doi) else {
            continue;
        };
        deposits.sort_by(|a, b| (&a.repo_id, &a.record_id).cmp(&(&b.repo_id, &b.record_id)));
        deposits.dedup_by(|a, b| a.repo_id == b.repo_id && a.record_id == b.record_id);
        let countries: BTreeSet<String> = deposits
            .iter()
            .map(|d| {
                repositories
                    .get(&d.repo_id)
                    .and_then(|info| info.country.clone())
                    .unwrap_or_else(|| NO_COUNTRY.to_string())
            })
            .collect();
        publications.push(LinkedPublication {
            doi: doi.to_string(),
            registry: (*registry_record).clone(),
            deposits,
            countries,
            subjects: None,
            panels: None,
        });
    }
    publications
}

/// How one matched pair's DOIs compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoiMatchClass {
    /// The repository record carries no DOI; nothing to compare.
    NoRepoDoi,
    Exact,
    /// The registry DOI is a proper contiguous substring of the repository
    /// DOI. One-directional: a truncated repository DOI is a mismatch.
    Substring,
    Mismatch,
}

/// Outcome of comparing DOIs across all matched pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingAccuracyReport {
    pub total_pairs: u64,
    pub no_repo_doi: u64,
    pub both_doi: u64,
    pub exact_match: u64,
    pub substring_match: u64,
    pub mismatch: u64,
    /// (exact + substring) / both_doi; `None` when no pair has both DOIs.
    pub accuracy: Option<f64>,
}

impl MatchingAccuracyReport {
    pub fn from_counts(no_repo_doi: u64, exact: u64, substring: u64, mismatch: u64) -> Self {
        let both_doi = exact + substring + mismatch;
        let accuracy = if both_doi > 0 {
            Some((exact + substring) as f64 / both_doi as f64)
        } else {
            None
        };
        MatchingAccuracyReport {
            total_pairs: no_repo_doi + both_doi,
            no_repo_doi,
            both_doi,
            exact_match: exact,
            substring_match: substring,
            mismatch,
            accuracy,
        }
    }

    /// Fraction of all pairs with no repository-side DOI.
    pub fn no_doi_share(&self) -> f64 {
        self.no_repo_doi as f64 / self.total_pairs as f64
    }

    /// Fraction of both-DOI pairs that match exactly.
    pub fn exact_share(&self) -> f64 {
        self.exact_match as f64 / self.both_doi as f64
    }

    /// Fraction of both-DOI pairs that do not match exactly.
    pub fn non_match_share(&self) -> f64 {
        (self.substring_match + self.mismatch) as f64 / self.both_doi as f64
    }

    /// Among non-exact pairs, the fraction where the registry DOI is a
    /// substring of the repository DOI.
    pub fn substring_of_non_match_share(&self) -> f64 {
        self.substring_match as f64 / (self.substring_match + self.mismatch) as f64
    }
}

/// Classifies one pair of DOIs. The registry DOI is assumed normalized; the
/// repository DOI is normalized here. Repository DOIs that normalize to
/// nothing count as absent.
pub fn classify_doi_pair(registry_doi: &str, repository_doi: Option<&str>) -> DoiMatchClass {
    let Some(raw) = repository_doi else {
        return DoiMatchClass::NoRepoDoi;
    };
    let Ok(repo_doi) = normalize_doi(raw) else {
        return DoiMatchClass::NoRepoDoi;
    };
    if repo_doi == registry_doi {
        DoiMatchClass::Exact
    } else if repo_doi.contains(registry_doi) {
        DoiMatchClass::Substring
    } else {
        DoiMatchClass::Mismatch
    }
}

/// Estimates matching accuracy by comparing DOIs across all matched pairs.
pub fn validate_links_by_doi(pairs: &[LinkPair]) -> MatchingAccuracyReport {
    let mut no_repo_doi = 0u64;
    let mut exact = 0u64;
    let mut substring = 0u64;
    let mut mismatch = 0u64;
    for pair in pairs {
        match classify_doi_pair(&pair.registry_doi, pair.repository_doi.as_deref()) {
            DoiMatchClass::NoRepoDoi => no_repo_doi += 1,
            DoiMatchClass::Exact => exact += 1,
            DoiMatchClass::Substring => substring += 1,
            DoiMatchClass::Mismatch => mismatch += 1,
        }
    }
    MatchingAccuracyReport::from_counts(no_repo_doi, exact, substring, mismatch)
}
