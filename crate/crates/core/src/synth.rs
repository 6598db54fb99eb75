//! Synthetic registry/repository corpora with ground-truth links. The noise
//! model perturbs titles, author names, and DOIs in exactly the ways the
//! normalization layer is supposed to undo, so linkage quality can be
//! measured against a known answer.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Days;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkage::LinkPair;
use crate::model::{
    AuthorName, CalendarDate, PartialDate, Platform, RawRegistryRecord, RawRepositoryRecord,
    RepositoryInfo,
};

/// Lag model: a point mass at/near publication, a short-lag mode, and a long
/// retrospective tail. Parameters are illustrative defaults, fully
/// configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagDistribution {
    /// Probability of a deposit at or just before publication (lag in
    /// [-30, 5]).
    pub p_at_publication: f64,
    /// Probability of a short lag (exponential, mean `short_mean_days`).
    pub p_short: f64,
    pub short_mean_days: f64,
    /// Remaining mass: long retrospective tail (exponential, mean
    /// `long_mean_days`).
    pub long_mean_days: f64,
}

impl Default for LagDistribution {
    fn default() -> Self {
        LagDistribution {
            p_at_publication: 0.3,
            p_short: 0.45,
            short_mean_days: 35.0,
            long_mean_days: 420.0,
        }
    }
}

/// Generator configuration. All probabilities are in [0, 1]; the
/// multi-deposit distribution must sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_publications: usize,
    pub seed: u64,
    /// Repository records generated without a DOI (default calibrated to the
    /// observed 36% no-DOI rate).
    pub p_missing_repo_doi: f64,
    /// Repository DOIs with junk appended ("/abstract" style).
    pub p_doi_suffix_noise: f64,
    /// Titles/author names perturbed with accents, case, and punctuation.
    pub p_accent_noise: f64,
    /// Deposits per publication: (count, probability) pairs.
    pub multi_deposit_distribution: Vec<(usize, f64)>,
    pub lag_distribution: LagDistribution,
    pub p_no_issn: f64,
    /// Publication years, inclusive.
    pub year_range: (i32, i32),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_publications: 1000,
            seed: 42,
            p_missing_repo_doi: 0.36,
            p_doi_suffix_noise: 0.05,
            p_accent_noise: 0.25,
            multi_deposit_distribution: vec![(1, 0.85), (2, 0.12), (3, 0.03)],
            lag_distribution: LagDistribution::default(),
            p_no_issn: 0.06,
            year_range: (2013, 2018),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_publications == 0 {
            return Err(Error::InvalidConfig("n_publications must be positive".into()));
        }
        for (name, p) in [
            ("p_missing_repo_doi", self.p_missing_repo_doi),
            ("p_doi_suffix_noise", self.p_doi_suffix_noise),
            ("p_accent_noise", self.p_accent_noise),
            ("p_no_issn", self.p_no_issn),
            ("p_at_publication", self.lag_distribution.p_at_publication),
            ("p_short", self.lag_distribution.p_short),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if self.lag_distribution.p_at_publication + self.lag_distribution.p_short > 1.0 {
            return Err(Error::InvalidConfig("lag mixture probabilities exceed 1".into()));
        }
        let total: f64 = self.multi_deposit_distribution.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "multi_deposit_distribution sums to {total}, expected 1"
            )));
        }
        if self.multi_deposit_distribution.iter().any(|(k, _)| *k == 0) {
            return Err(Error::InvalidConfig("deposit count 0 is not allowed".into()));
        }
        if self.year_range.0 > self.year_range.1 {
            return Err(Error::InvalidConfig("empty year range".into()));
        }
        Ok(())
    }
}

/// The links the generator actually created, against which predictions are
/// scored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    /// (registry DOI, repository record id) pairs.
    pub true_links: BTreeSet<(String, String)>,
    pub true_lags: BTreeMap<(String, String), i64>,
}

/// One generated corpus in exactly the shapes the linkage module ingests.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub registry: Vec<RawRegistryRecord>,
    pub repository: Vec<RawRepositoryRecord>,
    pub repositories: BTreeMap<String, RepositoryInfo>,
    pub truth: GroundTruth,
}

const TITLE_WORDS: [&str; 48] = [
    "analysis", "deep", "neural", "open", "access", "repository", "metadata", "linkage",
    "compliance", "policy", "deposit", "scholarly", "citation", "network", "graph", "model",
    "learning", "systems", "survey", "methods", "evaluation", "framework", "distributed",
    "semantic", "temporal", "spatial", "robust", "efficient", "scalable", "adaptive",
    "measurement", "tracking", "harvesting", "aggregation", "classification", "clustering",
    "retrieval", "extraction", "annotation", "curation", "archives", "journals", "publications",
    "research", "science", "data", "mining", "discovery",
];

const FAMILY_NAMES: [&str; 20] = [
    "Smith", "Muller", "Francois", "Novak", "Rossi", "Garcia", "Johansson", "Kowalski",
    "Tanaka", "Dubois", "Schneider", "Larsen", "Petrov", "Costa", "Nagy", "Fischer",
    "Moreau", "Svoboda", "Jensen", "Horak",
];

const GIVEN_NAMES: [&str; 12] = [
    "Ada", "Tomas", "Nancy", "Nora", "Marie", "Jan", "Sofia", "Luis", "Emma", "Hugo",
    "Ines", "Karl",
];

const DOI_SUFFIXES: [&str; 3] = ["/abstract", "/pdf", "/fulltext"];

fn repository_registry() -> BTreeMap<String, RepositoryInfo> {
    let defs: [(&str, &str, Option<&str>, Platform); 10] = [
        ("repo-gb-1", "White Horse Research Online", Some("GB"), Platform::Eprints),
        ("repo-gb-2", "Brightside Institutional Archive", Some("GB"), Platform::Dspace),
        ("repo-gb-3", "Northlake Research Portal", Some("GB"), Platform::Eprints),
        ("repo-us-1", "Lakeshore University Repository", Some("US"), Platform::Dspace),
        ("repo-us-2", "Bayview Scholars Archive", Some("US"), Platform::Dspace),
        ("repo-it-1", "Archivio di Ricerca Collina", Some("IT"), Platform::Dspace),
        ("repo-nl-1", "Polder University Repository", Some("NL"), Platform::Dspace),
        ("repo-ch-1", "Alpenforschung Repositorium", Some("CH"), Platform::Invenio),
        ("arxiv", "ArXiv e-Print Archive", None, Platform::Arxiv),
        ("zenodo", "ZENODO", None, Platform::Zenodo),
    ];
    defs.into_iter()
        .map(|(repo_id, name, country, platform)| {
            (
                repo_id.to_string(),
                RepositoryInfo {
                    repo_id: repo_id.to_string(),
                    name: name.to_string(),
                    country: country.map(str::to_string),
                    platform,
                },
            )
        })
        .collect()
}

/// Adds accents, case flips, and punctuation that [`normalize_text`]
/// (crate::normalize::normalize_text) removes again.
fn perturb_text(s: &str, rng: &mut ChaCha8Rng) -> String {
    let accented = |c: char| match c {
        'a' => 'á',
        'e' => 'é',
        'i' => 'í',
        'o' => 'ö',
        'u' => 'ü',
        'c' => 'ç',
        'n' => 'ñ',
        _ => c,
    };
    let mut out = String::with_capacity(s.len() + 4);
    for c in s.chars() {
        let roll: f64 = rng.gen();
        if roll < 0.15 {
            out.push(accented(c));
        } else if roll < 0.25 {
            out.extend(c.to_uppercase());
        } else if roll < 0.28 && c == ' ' {
            out.push('-');
        } else {
            out.push(c);
        }
    }
    if rng.gen::<f64>() < 0.3 {
        out.push('.');
    }
    out
}

fn sample_lag(dist: &LagDistribution, rng: &mut ChaCha8Rng) -> i64 {
    let roll: f64 = rng.gen();
    if roll < dist.p_at_publication {
        rng.gen_range(-30..=5)
    } else if roll < dist.p_at_publication + dist.p_short {
        sample_exponential(dist.short_mean_days, rng)
    } else {
        sample_exponential(dist.long_mean_days, rng)
    }
}

fn sample_exponential(mean: f64, rng: &mut ChaCha8Rng) -> i64 {
    let u: f64 = rng.gen_range(1e-12..1.0);
    (-mean * u.ln()).round() as i64
}

fn add_days(date: CalendarDate, days: i64) -> CalendarDate {
    let base = chrono::NaiveDate::from_ymd_opt(date.year(), date.month(), date.day()).unwrap();
    let shifted = if days >= 0 {
        base.checked_add_days(Days::new(days as u64)).unwrap()
    } else {
        base.checked_sub_days(Days::new((-days) as u64)).unwrap()
    };
    CalendarDate::new(
        chrono::Datelike::year(&shifted),
        chrono::Datelike::month(&shifted),
        chrono::Datelike::day(&shifted),
    )
    .unwrap()
}

/// Generates a corpus. Deterministic for a fixed config (including seed):
/// two runs produce identical outputs byte for byte.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let repositories = repository_registry();
    let repo_ids: Vec<&String> = repositories.keys().collect();

    let mut registry = Vec::with_capacity(config.n_publications);
    let mut repository_records = Vec::new();
    let mut truth = GroundTruth::default();

    for i in 0..config.n_publications {
        let year = rng.gen_range(config.year_range.0..=config.year_range.1);
        let month = rng.gen_range(1..=12u32);
        let day = rng.gen_range(1..=28u32);
        let published = CalendarDate::new(year, month, day).unwrap();
        let doi = format!("10.5555/synth.{year}.{i:06}");

        let n_words = rng.gen_range(4..=8);
        let mut title_words: Vec<&str> = (0..n_words)
            .map(|_| TITLE_WORDS[rng.gen_range(0..TITLE_WORDS.len())])
            .collect();
        title_words.push("volume");
        // unique token keeps match keys collision-free across the corpus
        let title = format!("{} {}", title_words.join(" "), i);

        let family = FAMILY_NAMES[rng.gen_range(0..FAMILY_NAMES.len())];
        let given = GIVEN_NAMES[rng.gen_range(0..GIVEN_NAMES.len())];

        let issn = (rng.gen::<f64>() >= config.p_no_issn)
            .then(|| vec![format!("{:04}-{:04}", rng.gen_range(1000..9999), rng.gen_range(1000..9999))]);

        registry.push(RawRegistryRecord {
            doi: doi.clone(),
            title: Some(title.clone()),
            authors: vec![AuthorName {
                given: Some(given.to_string()),
                family: Some(family.to_string()),
                raw: None,
            }],
            published: PartialDate {
                year,
                month: Some(month),
                day: Some(day),
            },
            issn,
            accepted: None,
            affiliation_countries: None,
        });

        let deposit_roll: f64 = rng.gen();
        let mut cumulative = 0.0;
        let mut n_deposits = 1;
        for (count, p) in &config.multi_deposit_distribution {
            cumulative += p;
            if deposit_roll < cumulative {
                n_deposits = *count;
                break;
            }
        }
        let mut chosen = repo_ids.clone();
        chosen.shuffle(&mut rng);
        chosen.truncate(n_deposits.min(repo_ids.len()));

        for (j, repo_id) in chosen.iter().enumerate() {
            let record_id = format!("core:{i}:{j}");
            let lag = sample_lag(&config.lag_distribution, &mut rng);
            let deposit_date = add_days(published, lag);

            let noisy = rng.gen::<f64>() < config.p_accent_noise;
            let (record_title, record_author) = if noisy {
                (
                    perturb_text(&title, &mut rng),
                    AuthorName {
                        raw: Some(format!("{given} {}", perturb_text(family, &mut rng))),
                        ..Default::default()
                    },
                )
            } else {
                (
                    title.clone(),
                    AuthorName {
                        raw: Some(format!("{given} {family}")),
                        ..Default::default()
                    },
                )
            };

            let record_doi = if rng.gen::<f64>() < config.p_missing_repo_doi {
                None
            } else if rng.gen::<f64>() < config.p_doi_suffix_noise {
                Some(format!("{doi}{}", DOI_SUFFIXES[rng.gen_range(0..DOI_SUFFIXES.len())]))
            } else {
                Some(doi.clone())
            };

            repository_records.push(RawRepositoryRecord {
                record_id: record_id.clone(),
                repo_id: (*repo_id).clone(),
                title: Some(record_title),
                authors: vec![record_author],
                year: Some(year),
                doi: record_doi,
                deposit_date: Some(deposit_date),
            });
            truth.true_links.insert((doi.clone(), record_id.clone()));
            truth.true_lags.insert((doi.clone(), record_id), lag);
        }
    }

    Ok(SynthCorpus {
        registry,
        repository: repository_records,
        repositories,
        truth,
    })
}

/// Set-overlap quality of predicted links against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn evaluate_linkage(predicted: &[LinkPair], truth: &GroundTruth) -> Result<LinkageMetrics> {
    if truth.true_links.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let predicted_set: BTreeSet<(String, String)> = predicted
        .iter()
        .map(|p| (p.registry_doi.clone(), p.repository_record_id.clone()))
        .collect();
    let true_positive = predicted_set.intersection(&truth.true_links).count() as f64;
    let precision = if predicted_set.is_empty() {
        0.0
    } else {
        true_positive / predicted_set.len() as f64
    };
    let recall = true_positive / truth.true_links.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(LinkageMetrics {
        precision,
        recall,
        f1,
    })
}
