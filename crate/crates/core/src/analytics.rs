//! Deposit time lag, compliance classification, and every aggregate report:
//! per country/year with and without lag caps, per repository single/any,
//! per subject and panel, histograms, and dispersion statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{date_diff_days, LinkedPublication, RegistryRecord, NO_COUNTRY};

/// Deposit deadline in days. Lag of this many days or fewer is "likely
/// compliant"; anything later is "definitely non-compliant".
pub const COMPLIANCE_CUTOFF_DAYS: i64 = 90;

/// Which deposit date the lag is measured against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    /// Earliest deposit in any repository.
    Any,
    /// The deposit in one given repository.
    Single(String),
}

/// Lag in whole days between publication and deposit. Negative values mean
/// the article was deposited before being published.
pub fn deposit_lag(publication: &LinkedPublication, scope: &Scope) -> Result<i64> {
    let deposit_date = match scope {
        Scope::Any => publication.earliest_deposit(),
        Scope::Single(repo_id) => publication
            .deposits
            .iter()
            .filter(|d| &d.repo_id == repo_id)
            .map(|d| d.deposit_date)
            .min()
            .ok_or_else(|| Error::NoDepositInRepository(repo_id.clone()))?,
    };
    Ok(date_diff_days(publication.registry.published, deposit_date))
}

/// Two-way compliance partition around the deposit deadline, plus a
/// not-applicable state for records without an ISSN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComplianceCategory {
    LikelyCompliant,
    DefinitelyNonCompliant,
    NotApplicableNoIssn,
}

pub fn classify_compliance(lag: i64, has_issn: bool) -> ComplianceCategory {
    classify_compliance_with_cutoff(lag, has_issn, COMPLIANCE_CUTOFF_DAYS)
}

pub fn classify_compliance_with_cutoff(lag: i64, has_issn: bool, cutoff_days: i64) -> ComplianceCategory {
    if !has_issn {
        ComplianceCategory::NotApplicableNoIssn
    } else if lag <= cutoff_days {
        ComplianceCategory::LikelyCompliant
    } else {
        ComplianceCategory::DefinitelyNonCompliant
    }
}

/// Grouping dimension for aggregate reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupBy {
    Country,
    Repository,
    Subject,
    Panel,
}

/// One (publication, group) observation. Multi-country publications count
/// fully in every country; multi-subject publications count 1/k per subject.
#[derive(Debug, Clone)]
struct Observation {
    group_key: String,
    year: i32,
    lag: i64,
    weight: f64,
    has_issn: bool,
}

fn observations(
    publications: &[LinkedPublication],
    group_by: GroupBy,
    scope: &Scope,
) -> Vec<Observation> {
    let mut out = Vec::new();
    for publication in publications {
        let year = publication.registry.published.year();
        let has_issn = publication.registry.has_issn();
        let any_lag = match deposit_lag(publication, &Scope::Any) {
            Ok(lag) => lag,
            Err(_) => continue,
        };
        let mut push = |group_key: String, lag: i64, weight: f64| {
            out.push(Observation {
                group_key,
                year,
                lag,
                weight,
                has_issn,
            })
        };
        match group_by {
            GroupBy::Country => {
                let countries = if publication.countries.is_empty() {
                    [NO_COUNTRY.to_string()].into_iter().collect()
                } else {
                    publication.countries.clone()
                };
                for country in countries {
                    push(country, any_lag, 1.0);
                }
            }
            GroupBy::Repository => {
                let mut repos: Vec<&str> =
                    publication.deposits.iter().map(|d| d.repo_id.as_str()).collect();
                repos.sort_unstable();
                repos.dedup();
                for repo_id in repos {
                    let lag = match scope {
                        Scope::Any => any_lag,
                        Scope::Single(_) => {
                            deposit_lag(publication, &Scope::Single(repo_id.to_string()))
                                .expect("repo taken from this publication's deposits")
                        }
                    };
                    push(repo_id.to_string(), lag, 1.0);
                }
            }
            GroupBy::Subject => {
                let Some(subjects) = publication.subjects.as_ref().filter(|s| !s.is_empty()) else {
                    continue;
                };
                let weight = 1.0 / subjects.len() as f64;
                for subject in subjects {
                    push(subject.clone(), any_lag, weight);
                }
            }
            GroupBy::Panel => {
                let Some(panels) = publication.panels.as_ref().filter(|p| !p.is_empty()) else {
                    continue;
                };
                for panel in panels {
                    push(panel.clone(), any_lag, 1.0);
                }
            }
        }
    }
    out
}

/// Aggregate lag statistics for one group (and year, when per-year).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagAggregate {
    pub group_key: String,
    /// `None` when aggregating over all years.
    pub year: Option<i32>,
    /// Number of contributing observations (unweighted).
    pub count: u64,
    /// Weighted mean; weights differ from 1 only for subject grouping.
    pub mean_lag_days: f64,
    pub stddev_days: f64,
    pub min_days: i64,
    pub max_days: i64,
}

/// Computes per-group lag statistics. When `cap_days` is set, observations
/// with lag above the cap are excluded before aggregation; groups left empty
/// are omitted.
pub fn aggregate_lag(
    publications: &[LinkedPublication],
    group_by: GroupBy,
    per_year: bool,
    cap_days: Option<i64>,
    scope: &Scope,
) -> Vec<LagAggregate> {
    let mut groups: BTreeMap<(String, Option<i32>), Vec<(i64, f64)>> = BTreeMap::new();
    for obs in observations(publications, group_by, scope) {
        if let Some(cap) = cap_days {
            if obs.lag > cap {
                continue;
            }
        }
        let year = per_year.then_some(obs.year);
        groups
            .entry((obs.group_key, year))
            .or_default()
            .push((obs.lag, obs.weight));
    }
    groups
        .into_iter()
        .map(|((group_key, year), lags)| {
            let total_weight: f64 = lags.iter().map(|(_, w)| w).sum();
            let mean = lags.iter().map(|(l, w)| *l as f64 * w).sum::<f64>() / total_weight;
            let variance = lags
                .iter()
                .map(|(l, w)| w * (*l as f64 - mean).powi(2))
                .sum::<f64>()
                / total_weight;
            LagAggregate {
                group_key,
                year,
                count: lags.len() as u64,
                mean_lag_days: mean,
                stddev_days: variance.sqrt(),
                min_days: lags.iter().map(|(l, _)| *l).min().unwrap(),
                max_days: lags.iter().map(|(l, _)| *l).max().unwrap(),
            }
        })
        .collect()
}

/// Per-group compliance proportions over ISSN-bearing publications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceRow {
    pub group_key: String,
    pub year: Option<i32>,
    pub likely_fraction: f64,
    pub non_compliant_fraction: f64,
    /// Observations excluded because the record has no ISSN.
    pub excluded_no_issn: u64,
}

/// Proportions of likely-compliant and non-compliant publications per group.
/// Groups with no ISSN-bearing publication at all are omitted (their
/// exclusion counts are still reported when some ISSN-bearing ones exist).
pub fn compliance_proportions(
    publications: &[LinkedPublication],
    group_by: GroupBy,
    per_year: bool,
    cutoff_days: i64,
) -> Vec<ComplianceRow> {
    struct Tally {
        likely_weight: f64,
        total_weight: f64,
        excluded: u64,
    }
    let mut groups: BTreeMap<(String, Option<i32>), Tally> = BTreeMap::new();
    for obs in observations(publications, group_by, &Scope::Any) {
        let year = per_year.then_some(obs.year);
        let tally = groups.entry((obs.group_key, year)).or_insert(Tally {
            likely_weight: 0.0,
            total_weight: 0.0,
            excluded: 0,
        });
        match classify_compliance_with_cutoff(obs.lag, obs.has_issn, cutoff_days) {
            ComplianceCategory::LikelyCompliant => {
                tally.likely_weight += obs.weight;
                tally.total_weight += obs.weight;
            }
            ComplianceCategory::DefinitelyNonCompliant => tally.total_weight += obs.weight,
            ComplianceCategory::NotApplicableNoIssn => tally.excluded += 1,
        }
    }
    groups
        .into_iter()
        .filter(|(_, t)| t.total_weight > 0.0)
        .map(|((group_key, year), t)| {
            let likely = t.likely_weight / t.total_weight;
            ComplianceRow {
                group_key,
                year,
                likely_fraction: likely,
                non_compliant_fraction: 1.0 - likely,
                excluded_no_issn: t.excluded,
            }
        })
        .collect()
}

/// Metric computed per repository in [`repo_profiles`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepoMetric {
    /// Mean deposit time lag in days.
    Lag,
    /// Proportion of likely-compliant publications (ISSN-bearing only).
    Compliance,
}

/// One repository's single-scope and any-scope metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoProfile {
    pub repo_id: String,
    pub publications: u64,
    /// Metric over deposits in this repository only.
    pub single_value: f64,
    /// Metric over the same publications' earliest deposit anywhere.
    pub any_value: f64,
}

/// Per-repository single/any profiles for one publication year. Only
/// repositories with strictly more than `min_count` publications in that
/// year qualify. Sorted ascending for lag, descending for compliance.
pub fn repo_profiles(
    publications: &[LinkedPublication],
    year: i32,
    min_count: u64,
    metric: RepoMetric,
) -> Vec<RepoProfile> {
    // (single lag, any lag, has_issn) per publication, per repository
    let mut by_repo: BTreeMap<&str, Vec<(i64, i64, bool)>> = BTreeMap::new();
    for publication in publications {
        if publication.registry.published.year() != year {
            continue;
        }
        let any_lag = match deposit_lag(publication, &Scope::Any) {
            Ok(lag) => lag,
            Err(_) => continue,
        };
        let mut repos: Vec<&str> = publication.deposits.iter().map(|d| d.repo_id.as_str()).collect();
        repos.sort_unstable();
        repos.dedup();
        for repo_id in repos {
            let single_lag = deposit_lag(publication, &Scope::Single(repo_id.to_string()))
                .expect("repo taken from this publication's deposits");
            by_repo
                .entry(repo_id)
                .or_default()
                .push((single_lag, any_lag, publication.registry.has_issn()));
        }
    }

    let mut profiles: Vec<RepoProfile> = by_repo
        .into_iter()
        .filter(|(_, pubs)| pubs.len() as u64 > min_count)
        .filter_map(|(repo_id, pubs)| {
            let (single_value, any_value) = match metric {
                RepoMetric::Lag => {
                    let n = pubs.len() as f64;
                    (
                        pubs.iter().map(|(s, _, _)| *s as f64).sum::<f64>() / n,
                        pubs.iter().map(|(_, a, _)| *a as f64).sum::<f64>() / n,
                    )
                }
                RepoMetric::Compliance => {
                    let with_issn: Vec<_> = pubs.iter().filter(|(_, _, issn)| *issn).collect();
                    if with_issn.is_empty() {
                        return None;
                    }
                    let n = with_issn.len() as f64;
                    let likely = |lag: i64| (lag <= COMPLIANCE_CUTOFF_DAYS) as u64 as f64;
                    (
                        with_issn.iter().map(|(s, _, _)| likely(*s)).sum::<f64>() / n,
                        with_issn.iter().map(|(_, a, _)| likely(*a)).sum::<f64>() / n,
                    )
                }
            };
            Some(RepoProfile {
                repo_id: repo_id.to_string(),
                publications: pubs.len() as u64,
                single_value,
                any_value,
            })
        })
        .collect();

    match metric {
        RepoMetric::Lag => profiles.sort_by(|a, b| {
            a.single_value
                .total_cmp(&b.single_value)
                .then_with(|| a.repo_id.cmp(&b.repo_id))
        }),
        RepoMetric::Compliance => profiles.sort_by(|a, b| {
            b.single_value
                .total_cmp(&a.single_value)
                .then_with(|| a.repo_id.cmp(&b.repo_id))
        }),
    }
    profiles
}

/// Spread of a per-repository (or per-subject) metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub range_days: f64,
    /// Population standard deviation.
    pub stddev_days: f64,
}

pub fn dispersion(values: &[f64]) -> Result<Dispersion> {
    if values.len() < 2 {
        return Err(Error::TooFewValues(values.len()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    Ok(Dispersion {
        range_days: max - min,
        stddev_days: variance.sqrt(),
    })
}

/// One histogram bin: `lower_inclusive <= lag < upper_exclusive`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower_inclusive: i64,
    pub upper_exclusive: i64,
    pub count: u64,
}

/// Lag histogram with bins aligned so that lag 0 starts a bin. Negative lags
/// fall in bins below zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_days: i64,
    pub bins: Vec<HistogramBin>,
}

pub fn lag_histogram(lags: &[i64], bin_width_days: i64) -> Result<Histogram> {
    if bin_width_days <= 0 {
        return Err(Error::InvalidConfig(format!(
            "histogram bin width must be positive, got {bin_width_days}"
        )));
    }
    if lags.is_empty() {
        return Ok(Histogram {
            bin_width_days,
            bins: Vec::new(),
        });
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for &lag in lags {
        *counts.entry(lag.div_euclid(bin_width_days)).or_default() += 1;
    }
    let first = *counts.keys().next().unwrap();
    let last = *counts.keys().next_back().unwrap();
    // contiguous run including empty interior bins
    let bins = (first..=last)
        .map(|index| HistogramBin {
            lower_inclusive: index * bin_width_days,
            upper_exclusive: (index + 1) * bin_width_days,
            count: counts.get(&index).copied().unwrap_or(0),
        })
        .collect();
    Ok(Histogram {
        bin_width_days,
        bins,
    })
}

/// Counts over registry records with an acceptance date present, compared to
/// their publication date. The four buckets are reported separately; the
/// source data leaves some records in none of the equal/later buckets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceAudit {
    pub populated: u64,
    pub equal_to_published: u64,
    pub later_than_published: u64,
    pub earlier_than_published: u64,
}

pub fn audit_acceptance_dates(records: &[RegistryRecord]) -> AcceptanceAudit {
    let mut audit = AcceptanceAudit::default();
    for record in records {
        let Some(accepted) = record.accepted else {
            continue;
        };
        audit.populated += 1;
        match accepted.cmp(&record.published) {
            std::cmp::Ordering::Equal => audit.equal_to_published += 1,
            std::cmp::Ordering::Greater => audit.later_than_published += 1,
            std::cmp::Ordering::Less => audit.earlier_than_published += 1,
        }
    }
    audit
}
