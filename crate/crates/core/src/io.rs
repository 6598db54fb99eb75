//! File formats: line-delimited JSON for record streams, single JSON
//! documents for registries and reports, CSV for the tabular report outputs.
//! All writers produce byte-stable output for identical input.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::analytics::{ComplianceRow, Histogram, LagAggregate, RepoProfile};
use crate::error::{Error, Result};
use crate::linkage::{AmbiguousKey, MatchingAccuracyReport, Rejection};
use crate::model::{LinkedPublication, RawRegistryRecord, RawRepositoryRecord, RepositoryInfo};
use crate::subjects::SubjectProfile;
use crate::synth::GroundTruth;

/// Reads one JSON object per line. Blank lines are skipped; a line that does
/// not parse fails with its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: index + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Writes one compact JSON object per line.
pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(File::open(path)?))
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_jsonl(&mut writer, items)?;
    writer.flush()?;
    Ok(())
}

pub fn read_registry(path: &Path) -> Result<Vec<RawRegistryRecord>> {
    read_jsonl_file(path)
}

pub fn read_repository(path: &Path) -> Result<Vec<RawRepositoryRecord>> {
    read_jsonl_file(path)
}

pub fn read_linked_publications(path: &Path) -> Result<Vec<LinkedPublication>> {
    read_jsonl_file(path)
}

/// Reader profiles: one `{doi, counts:{label:int}}` object per line.
pub fn read_reader_profiles(path: &Path) -> Result<Vec<SubjectProfile>> {
    read_jsonl_file(path)
}

/// The repository registry is a single JSON document mapping repo_id to
/// repository info.
pub fn read_repository_registry(path: &Path) -> Result<BTreeMap<String, RepositoryInfo>> {
    let mut contents = String::new();
    File::open(path)?.read_to_string(&mut contents)?;
    Ok(serde_json::from_str(&contents)?)
}

pub fn write_repository_registry(
    path: &Path,
    repositories: &BTreeMap<String, RepositoryInfo>,
) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut writer, repositories)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

pub fn write_accuracy_report(path: &Path, report: &MatchingAccuracyReport) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut writer, report)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

pub fn write_rejections_csv<W: Write>(writer: W, rejections: &[Rejection]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["id", "reason"])?;
    for rejection in rejections {
        csv.write_record([rejection.id.as_str(), &rejection.reason.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// Ambiguous registry keys, one row per key; colliding DOIs joined with ';'.
pub fn write_ambiguous_keys_csv<W: Write>(writer: W, keys: &[AmbiguousKey]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["norm_title", "year", "norm_family", "registry_dois"])?;
    for entry in keys {
        csv.write_record([
            entry.key.norm_title.as_str(),
            &entry.key.year.to_string(),
            entry.key.norm_family.as_str(),
            &entry.registry_dois.join(";"),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn year_field(year: Option<i32>) -> String {
    year.map(|y| y.to_string()).unwrap_or_default()
}

/// Lag aggregates with the stable column order; means and deviations with two
/// decimal places.
pub fn write_lag_aggregates_csv<W: Write>(writer: W, rows: &[LagAggregate]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "group_key",
        "year",
        "count",
        "mean_lag_days",
        "stddev_days",
        "min_days",
        "max_days",
    ])?;
    for row in rows {
        csv.write_record([
            row.group_key.as_str(),
            &year_field(row.year),
            &row.count.to_string(),
            &format!("{:.2}", row.mean_lag_days),
            &format!("{:.2}", row.stddev_days),
            &row.min_days.to_string(),
            &row.max_days.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Compliance proportions; fractions with four decimal places.
pub fn write_compliance_csv<W: Write>(writer: W, rows: &[ComplianceRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "group_key",
        "year",
        "likely_fraction",
        "non_compliant_fraction",
        "excluded_no_issn",
    ])?;
    for row in rows {
        csv.write_record([
            row.group_key.as_str(),
            &year_field(row.year),
            &format!("{:.4}", row.likely_fraction),
            &format!("{:.4}", row.non_compliant_fraction),
            &row.excluded_no_issn.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(writer: W, histogram: &Histogram) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["bin_lower", "bin_upper", "count"])?;
    for bin in &histogram.bins {
        csv.write_record([
            bin.lower_inclusive.to_string(),
            bin.upper_exclusive.to_string(),
            bin.count.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_repo_profiles_csv<W: Write>(writer: W, rows: &[RepoProfile]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["repo_id", "publications", "single_value", "any_value"])?;
    for row in rows {
        csv.write_record([
            row.repo_id.as_str(),
            &row.publications.to_string(),
            &format!("{:.2}", row.single_value),
            &format!("{:.2}", row.any_value),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_ground_truth_csv<W: Write>(writer: W, truth: &GroundTruth) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["registry_doi", "record_id", "lag_days"])?;
    for (doi, record_id) in &truth.true_links {
        let lag = truth.true_lags[&(doi.clone(), record_id.clone())];
        csv.write_record([doi.as_str(), record_id.as_str(), &lag.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkage::RejectReason;
    use crate::model::{AuthorName, PartialDate};
    use crate::normalize::MatchKey;

    fn registry_record(doi: &str) -> RawRegistryRecord {
        RawRegistryRecord {
            doi: doi.into(),
            title: Some("A Title".into()),
            authors: vec![AuthorName {
                family: Some("Fischer".into()),
                ..Default::default()
            }],
            published: PartialDate {
                year: 2016,
                month: Some(3),
                day: None,
            },
            issn: Some(vec!["1234-5678".into()]),
            accepted: None,
            affiliation_countries: None,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let records = vec![registry_record("10.1/a"), registry_record("10.1/b")];
        let mut buffer = Vec::new();
        write_jsonl(&mut buffer, &records).unwrap();
        assert_eq!(buffer.iter().filter(|&&b| b == b'\n').count(), 2);
        let back: Vec<RawRegistryRecord> = read_jsonl(buffer.as_slice()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn blank_lines_skipped_bad_line_numbered() {
        let good = serde_json::to_string(&registry_record("10.1/a")).unwrap();
        let text = format!("{good}\n\n{{not json\n");
        match read_jsonl::<RawRegistryRecord, _>(text.as_bytes()) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn rejections_csv_uses_reason_codes() {
        let rejections = vec![Rejection {
            id: "10.1/x".into(),
            reason: RejectReason::MissingMonth,
        }];
        let mut buffer = Vec::new();
        write_rejections_csv(&mut buffer, &rejections).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text, "id,reason\n10.1/x,MISSING_MONTH\n");
    }

    #[test]
    fn ambiguous_keys_csv_joins_dois() {
        let keys = vec![AmbiguousKey {
            key: MatchKey {
                norm_title: "title".into(),
                year: 2015,
                norm_family: "smith".into(),
            },
            registry_dois: vec!["10.1/a".into(), "10.1/b".into()],
        }];
        let mut buffer = Vec::new();
        write_ambiguous_keys_csv(&mut buffer, &keys).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.contains("title,2015,smith,10.1/a;10.1/b"));
    }

    #[test]
    fn lag_csv_two_decimal_means() {
        let rows = vec![LagAggregate {
            group_key: "GB".into(),
            year: Some(2016),
            count: 3,
            mean_lag_days: 143.333333,
            stddev_days: 1.0 / 3.0,
            min_days: -2,
            max_days: 400,
        }];
        let mut buffer = Vec::new();
        write_lag_aggregates_csv(&mut buffer, &rows).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(
            text,
            "group_key,year,count,mean_lag_days,stddev_days,min_days,max_days\nGB,2016,3,143.33,0.33,-2,400\n"
        );
    }

    #[test]
    fn compliance_csv_four_decimal_fractions() {
        let rows = vec![ComplianceRow {
            group_key: "GB".into(),
            year: None,
            likely_fraction: 2.0 / 3.0,
            non_compliant_fraction: 1.0 / 3.0,
            excluded_no_issn: 5,
        }];
        let mut buffer = Vec::new();
        write_compliance_csv(&mut buffer, &rows).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(
            text,
            "group_key,year,likely_fraction,non_compliant_fraction,excluded_no_issn\nGB,,0.6667,0.3333,5\n"
        );
    }

    #[test]
    fn histogram_csv_shape() {
        let histogram = crate::analytics::lag_histogram(&[0, 6, 7], 7).unwrap();
        let mut buffer = Vec::new();
        write_histogram_csv(&mut buffer, &histogram).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text, "bin_lower,bin_upper,count\n0,7,2\n7,14,1\n");
    }

    #[test]
    fn repository_registry_round_trip() {
        use crate::model::Platform;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("repos.json");
        let mut repositories = BTreeMap::new();
        repositories.insert(
            "r1".to_string(),
            RepositoryInfo {
                repo_id: "r1".into(),
                name: "Test Repo".into(),
                country: Some("GB".into()),
                platform: Platform::Eprints,
            },
        );
        write_repository_registry(&path, &repositories).unwrap();
        assert_eq!(read_repository_registry(&path).unwrap(), repositories);
    }

    #[test]
    fn ground_truth_csv_rows() {
        let mut truth = GroundTruth::default();
        truth.true_links.insert(("10.1/a".into(), "core:0".into()));
        truth.true_lags.insert(("10.1/a".into(), "core:0".into()), -3);
        let mut buffer = Vec::new();
        write_ground_truth_csv(&mut buffer, &truth).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text, "registry_doi,record_id,lag_days\n10.1/a,core:0,-3\n");
    }
}
