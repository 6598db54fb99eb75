//! Subject tagging from reader-count profiles, fractional counting, and the
//! mapping of subjects onto REF 2021 main assessment panels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LinkedPublication;

/// The bundled subject-to-panel table. Alternative mappings can be loaded
/// with [`PanelMapping::from_csv`].
pub const DEFAULT_PANEL_MAPPING_CSV: &str = include_str!("../data/ref_panel_mapping.csv");

/// Reader counts per subject for one publication, keyed by its DOI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub doi: String,
    pub counts: BTreeMap<String, u64>,
}

/// Tags a publication with the subjects holding the maximum reader count.
/// Ties produce multiple tags. Returns `None` when there is nothing to tag
/// (empty profile or all counts zero); such publications are excluded from
/// subject analyses.
pub fn tag_subjects(profile: &SubjectProfile) -> Option<BTreeSet<String>> {
    let max = *profile.counts.values().max()?;
    if max == 0 {
        return None;
    }
    Some(
        profile
            .counts
            .iter()
            .filter(|(_, &count)| count == max)
            .map(|(subject, _)| subject.clone())
            .collect(),
    )
}

/// Fractional subject totals: each publication contributes 1/k to each of
/// its k subject tags, so totals are conserved.
pub fn fractional_counts<'a, I>(tag_sets: I) -> BTreeMap<String, f64>
where
    I: IntoIterator<Item = &'a BTreeSet<String>>,
{
    let mut totals = BTreeMap::new();
    for tags in tag_sets {
        if tags.is_empty() {
            continue;
        }
        let share = 1.0 / tags.len() as f64;
        for tag in tags {
            *totals.entry(tag.clone()).or_insert(0.0) += share;
        }
    }
    totals
}

/// Subject-label to REF main panel table. Panels are "A" through "D" plus
/// "n/a" for the Unspecified label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelMapping {
    table: BTreeMap<String, String>,
}

impl PanelMapping {
    /// Loads a mapping from CSV with a `subject,panel` header.
    pub fn from_csv(data: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(data.as_bytes());
        let mut table = BTreeMap::new();
        for row in reader.deserialize() {
            let (subject, panel): (String, String) = row?;
            table.insert(subject, panel);
        }
        if table.is_empty() {
            return Err(Error::EmptyInput("panel mapping".into()));
        }
        Ok(PanelMapping { table })
    }

    pub fn bundled() -> Self {
        Self::from_csv(DEFAULT_PANEL_MAPPING_CSV).expect("bundled panel mapping parses")
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Panel for one subject label; unknown labels are an error.
    pub fn map_to_panel(&self, subject: &str) -> Result<&str> {
        self.table
            .get(subject)
            .map(String::as_str)
            .ok_or_else(|| Error::UnknownSubject(subject.to_string()))
    }

    /// Union of panels over a publication's subject tags.
    pub fn panels_for(&self, subjects: &BTreeSet<String>) -> Result<BTreeSet<String>> {
        subjects
            .iter()
            .map(|s| self.map_to_panel(s).map(str::to_string))
            .collect()
    }
}

/// Attaches subject tags and panel labels to linked publications from a set
/// of reader profiles. Returns the number of publications without a usable
/// profile (excluded from subject analyses).
pub fn annotate_publications(
    publications: &mut [LinkedPublication],
    profiles: &[SubjectProfile],
    mapping: &PanelMapping,
) -> Result<usize> {
    let by_doi: BTreeMap<&str, &SubjectProfile> =
        profiles.iter().map(|p| (p.doi.as_str(), p)).collect();
    let mut untagged = 0usize;
    for publication in publications.iter_mut() {
        let tags = by_doi.get(publication.doi.as_str()).and_then(|p| tag_subjects(p));
        match tags {
            Some(tags) => {
                publication.panels = Some(mapping.panels_for(&tags)?);
                publication.subjects = Some(tags);
            }
            None => untagged += 1,
        }
    }
    Ok(untagged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(counts: &[(&str, u64)]) -> SubjectProfile {
        SubjectProfile {
            doi: "10.1/x".into(),
            counts: counts.iter().map(|(s, c)| (s.to_string(), *c)).collect(),
        }
    }

    #[test]
    fn argmax_single_winner() {
        let tags = tag_subjects(&profile(&[("Medicine and Dentistry", 20), ("Immunology", 5)])).unwrap();
        assert_eq!(tags.iter().collect::<Vec<_>>(), vec!["Medicine and Dentistry"]);
    }

    #[test]
    fn ties_yield_all_winners() {
        let tags = tag_subjects(&profile(&[("A", 7), ("B", 7), ("C", 2)])).unwrap();
        assert_eq!(tags.len(), 2);
        assert!(tags.contains("A") && tags.contains("B"));

        let tags = tag_subjects(&profile(&[("A", 1)])).unwrap();
        assert_eq!(tags.len(), 1);
    }

    #[test]
    fn zero_counts_untagged() {
        assert_eq!(tag_subjects(&profile(&[("A", 0), ("B", 0)])), None);
        assert_eq!(tag_subjects(&profile(&[])), None);
    }

    #[test]
    fn fractional_split() {
        let two: BTreeSet<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let counts = fractional_counts([&two]);
        assert_eq!(counts["A"], 0.5);
        assert_eq!(counts["B"], 0.5);

        let one: BTreeSet<String> = ["A".to_string()].into();
        let counts = fractional_counts([&one]);
        assert_eq!(counts["A"], 1.0);

        let three: BTreeSet<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let counts = fractional_counts([&one, &three]);
        assert!((counts["A"] - 4.0 / 3.0).abs() < 1e-12);
        assert!((counts["B"] - 1.0 / 3.0).abs() < 1e-12);
        assert!((counts["C"] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bundled_mapping_rows() {
        let mapping = PanelMapping::bundled();
        assert_eq!(mapping.len(), 29);
        assert_eq!(mapping.map_to_panel("Computer Science").unwrap(), "B");
        assert_eq!(mapping.map_to_panel("Psychology").unwrap(), "A");
        assert_eq!(mapping.map_to_panel("Unspecified").unwrap(), "n/a");
        assert_eq!(mapping.map_to_panel("Linguistics").unwrap(), "D");
        assert_eq!(mapping.map_to_panel("Decision Sciences").unwrap(), "C");
        assert!(matches!(
            mapping.map_to_panel("Alchemy"),
            Err(Error::UnknownSubject(_))
        ));
    }

    #[test]
    fn panel_union() {
        let mapping = PanelMapping::bundled();
        let tags: BTreeSet<String> = ["Computer Science", "Mathematics", "Psychology"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let panels = mapping.panels_for(&tags).unwrap();
        assert_eq!(panels.iter().collect::<Vec<_>>(), vec!["A", "B"]);
    }

    proptest! {
        #[test]
        fn fractional_counts_conserve_total(
            tag_sets in proptest::collection::vec(
                proptest::collection::btree_set("[a-f]", 1..5),
                0..50,
            )
        ) {
            let refs: Vec<&BTreeSet<String>> = tag_sets.iter().collect();
            let counts = fractional_counts(refs);
            let total: f64 = counts.values().sum();
            prop_assert!((total - tag_sets.len() as f64).abs() < 1e-9);
        }

        #[test]
        fn argmax_scale_invariant(
            counts in proptest::collection::btree_map("[a-f]", 0..50u64, 1..6),
            scale in 1..10u64,
        ) {
            let base = SubjectProfile { doi: "d".into(), counts: counts.clone() };
            let scaled = SubjectProfile {
                doi: "d".into(),
                counts: counts.iter().map(|(k, v)| (k.clone(), v * scale)).collect(),
            };
            prop_assert_eq!(tag_subjects(&base), tag_subjects(&scaled));
        }
    }
}
