//! End-to-end batch pipeline: ingest, filter, link, group, annotate, analyze,
//! and report, with a manifest listing every artifact and a run digest that
//! is identical for identical inputs and configuration.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{
    aggregate_lag, compliance_proportions, lag_histogram, repo_profiles, GroupBy, RepoMetric,
    Scope,
};
use crate::error::{Error, Result};
use crate::harvest::{resolve_deposit_dates, HarvestLedger};
use crate::io;
use crate::linkage::{filter_registry, filter_repository, group_by_doi, link, validate_links_by_doi};
use crate::subjects::{annotate_publications, PanelMapping};

/// Everything a pipeline run needs. Paths are resolved relative to the
/// current directory; the CLI populates this from a config file plus flag
/// overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub registry_path: PathBuf,
    pub repository_path: PathBuf,
    pub repo_registry_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reader_profiles_path: Option<PathBuf>,
    /// Subject-to-panel mapping CSV; the bundled mapping when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_mapping_path: Option<PathBuf>,
    /// Harvest ledger (line-delimited JSON) whose first-seen dates override
    /// the records' own deposit date fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_cutoff")]
    pub compliance_cutoff_days: i64,
    #[serde(default = "default_caps")]
    pub cap_days: Vec<i64>,
    #[serde(default = "default_min_repo_count")]
    pub min_repo_count: u64,
    /// Years dropped from capped per-year reports (incomplete data years).
    #[serde(default)]
    pub excluded_years: Vec<i32>,
    #[serde(default = "default_bin_widths")]
    pub histogram_bin_widths: Vec<i64>,
    /// Permit overwriting existing output files.
    #[serde(default)]
    pub force: bool,
}

fn default_cutoff() -> i64 {
    90
}

fn default_caps() -> Vec<i64> {
    vec![365, 730]
}

fn default_min_repo_count() -> u64 {
    100
}

fn default_bin_widths() -> Vec<i64> {
    vec![7, 30]
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.compliance_cutoff_days <= 0 {
            return Err(Error::InvalidConfig("compliance cutoff must be positive".into()));
        }
        if self.cap_days.iter().any(|&c| c <= 0) {
            return Err(Error::InvalidConfig("lag caps must be positive".into()));
        }
        if self.histogram_bin_widths.iter().any(|&w| w <= 0) {
            return Err(Error::InvalidConfig("histogram bin widths must be positive".into()));
        }
        Ok(())
    }
}

/// One output file: name within the output directory, data row count, and a
/// content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub rows: u64,
    pub sha256: String,
}

/// Record of a pipeline run. `run_digest` hashes every output file's name and
/// content hash, so identical inputs and config reproduce it exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
    pub run_digest: String,
    /// Set when the run aborted; output files carry a .partial suffix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing_stage: Option<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

struct OutputSink<'a> {
    dir: &'a Path,
    force: bool,
    entries: Vec<ManifestEntry>,
}

impl<'a> OutputSink<'a> {
    fn new(dir: &'a Path, force: bool) -> Self {
        OutputSink {
            dir,
            force,
            entries: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, rows: u64, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if path.exists() && !self.force {
            return Err(Error::InvalidConfig(format!(
                "output file {} exists; pass --force to overwrite",
                path.display()
            )));
        }
        fs::write(&path, bytes)?;
        self.entries.push(ManifestEntry {
            name: name.to_string(),
            rows,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Renames every file written so far to `<name>.partial`.
    fn mark_partial(&self) {
        for entry in &self.entries {
            let from = self.dir.join(&entry.name);
            let to = self.dir.join(format!("{}.partial", entry.name));
            let _ = fs::rename(from, to);
        }
    }

    fn into_manifest(self, failing_stage: Option<String>) -> Manifest {
        let mut files = self.entries;
        files.sort_by(|a, b| a.name.cmp(&b.name));
        let mut hasher = Sha256::new();
        for entry in &files {
            hasher.update(entry.name.as_bytes());
            hasher.update(b"\0");
            hasher.update(entry.sha256.as_bytes());
            hasher.update(b"\0");
        }
        Manifest {
            run_digest: format!("{:x}", hasher.finalize()),
            files,
            failing_stage,
        }
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    fs::write(dir.join("manifest.json"), bytes)?;
    Ok(())
}

/// Runs the full pipeline. On success the manifest (also written to
/// `manifest.json` in the output directory) lists every artifact. On failure
/// the already-written outputs are renamed with a `.partial` suffix, the
/// manifest records the failing stage, and the stage error is returned.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Manifest> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    let manifest_path = config.output_dir.join("manifest.json");
    if manifest_path.exists() && !config.force {
        return Err(Error::InvalidConfig(format!(
            "{} exists; pass --force to overwrite",
            manifest_path.display()
        )));
    }
    let mut sink = OutputSink::new(&config.output_dir, config.force);
    match run_stages(config, &mut sink) {
        Ok(()) => {
            let manifest = sink.into_manifest(None);
            write_manifest(&config.output_dir, &manifest)?;
            Ok(manifest)
        }
        Err((stage, error)) => {
            sink.mark_partial();
            let manifest = sink.into_manifest(Some(stage));
            write_manifest(&config.output_dir, &manifest)?;
            Err(error)
        }
    }
}

type StageResult = std::result::Result<(), (String, Error)>;

fn stage<T>(name: &str, result: Result<T>) -> std::result::Result<T, (String, Error)> {
    result.map_err(|e| (name.to_string(), e))
}

fn run_stages(config: &PipelineConfig, sink: &mut OutputSink<'_>) -> StageResult {
    // ingest
    let raw_registry = stage("ingest", io::read_registry(&config.registry_path))?;
    let mut raw_repository = stage("ingest", io::read_repository(&config.repository_path))?;
    let repositories = stage(
        "ingest",
        io::read_repository_registry(&config.repo_registry_path),
    )?;

    // resolve-dates
    if let Some(ledger_path) = &config.ledger_path {
        let ledger = stage("resolve-dates", read_ledger(ledger_path))?;
        let (resolved, _dropped) =
            resolve_deposit_dates(&raw_repository, &ledger, &std::collections::BTreeMap::new());
        raw_repository = resolved.into_iter().map(|(record, _)| record).collect();
    }

    // filter
    if raw_registry.is_empty() {
        return Err((
            "filter".to_string(),
            Error::EmptyInput("registry input has no records".into()),
        ));
    }
    if raw_repository.is_empty() {
        return Err((
            "filter".to_string(),
            Error::EmptyInput("repository input has no records".into()),
        ));
    }
    let (registry, registry_rejections) = filter_registry(&raw_registry);
    let (repository, repository_rejections) = filter_repository(&raw_repository);
    stage("filter", write_csv(sink, "rejections_registry.csv", registry_rejections.len(), |w| {
        io::write_rejections_csv(w, &registry_rejections)
    }))?;
    stage("filter", write_csv(sink, "rejections_repository.csv", repository_rejections.len(), |w| {
        io::write_rejections_csv(w, &repository_rejections)
    }))?;

    // link
    let (pairs, link_report) = link(&registry, &repository);
    stage("link", write_csv(sink, "ambiguous_keys.csv", link_report.ambiguous_keys.len(), |w| {
        io::write_ambiguous_keys_csv(w, &link_report.ambiguous_keys)
    }))?;

    // validate-doi
    let accuracy = validate_links_by_doi(&pairs);
    let mut accuracy_bytes = stage("validate-doi", serde_json::to_vec_pretty(&accuracy).map_err(Error::from))?;
    accuracy_bytes.push(b'\n');
    stage("validate-doi", sink.write("accuracy_report.json", 1, &accuracy_bytes))?;

    // group
    let mut publications = group_by_doi(&pairs, &registry, &repository, &repositories);

    // tag-subjects
    if let Some(profiles_path) = &config.reader_profiles_path {
        let profiles = stage("tag-subjects", io::read_reader_profiles(profiles_path))?;
        let mapping = match &config.panel_mapping_path {
            Some(path) => {
                let data = stage("tag-subjects", fs::read_to_string(path).map_err(Error::from))?;
                stage("tag-subjects", PanelMapping::from_csv(&data))?
            }
            None => PanelMapping::bundled(),
        };
        stage(
            "tag-subjects",
            annotate_publications(&mut publications, &profiles, &mapping),
        )?;
    }

    let mut linked_bytes = Vec::new();
    stage("group", io::write_jsonl(&mut linked_bytes, &publications))?;
    stage("group", sink.write("linked_publications.jsonl", publications.len() as u64, &linked_bytes))?;

    // analyze + report
    let by_country = aggregate_lag(&publications, GroupBy::Country, true, None, &Scope::Any);
    stage("report", write_csv(sink, "lag_by_country_year.csv", by_country.len(), |w| {
        io::write_lag_aggregates_csv(w, &by_country)
    }))?;
    for &cap in &config.cap_days {
        let mut rows = aggregate_lag(&publications, GroupBy::Country, true, Some(cap), &Scope::Any);
        rows.retain(|r| r.year.is_none_or(|y| !config.excluded_years.contains(&y)));
        let name = format!("lag_by_country_year_cap{cap}.csv");
        stage("report", write_csv(sink, &name, rows.len(), |w| {
            io::write_lag_aggregates_csv(w, &rows)
        }))?;
    }

    let compliance = compliance_proportions(
        &publications,
        GroupBy::Country,
        true,
        config.compliance_cutoff_days,
    );
    stage("report", write_csv(sink, "compliance_by_country_year.csv", compliance.len(), |w| {
        io::write_compliance_csv(w, &compliance)
    }))?;

    if config.reader_profiles_path.is_some() {
        let by_subject = aggregate_lag(&publications, GroupBy::Subject, false, None, &Scope::Any);
        stage("report", write_csv(sink, "lag_by_subject.csv", by_subject.len(), |w| {
            io::write_lag_aggregates_csv(w, &by_subject)
        }))?;
        let by_panel = compliance_proportions(
            &publications,
            GroupBy::Panel,
            false,
            config.compliance_cutoff_days,
        );
        stage("report", write_csv(sink, "compliance_by_panel.csv", by_panel.len(), |w| {
            io::write_compliance_csv(w, &by_panel)
        }))?;
    }

    let lags: Vec<i64> = publications
        .iter()
        .filter_map(|p| crate::analytics::deposit_lag(p, &Scope::Any).ok())
        .collect();
    for &width in &config.histogram_bin_widths {
        let histogram = stage("report", lag_histogram(&lags, width))?;
        let name = format!("lag_histogram_w{width}.csv");
        stage("report", write_csv(sink, &name, histogram.bins.len(), |w| {
            io::write_histogram_csv(w, &histogram)
        }))?;
    }

    let years: BTreeSet<i32> = publications.iter().map(|p| p.registry.published.year()).collect();
    for year in years {
        let rows = repo_profiles(&publications, year, config.min_repo_count, RepoMetric::Lag);
        if rows.is_empty() {
            continue;
        }
        let name = format!("repo_profiles_lag_{year}.csv");
        stage("report", write_csv(sink, &name, rows.len(), |w| {
            io::write_repo_profiles_csv(w, &rows)
        }))?;
    }

    Ok(())
}

fn read_ledger(path: &Path) -> Result<HarvestLedger> {
    let file = fs::File::open(path)?;
    HarvestLedger::read_jsonl(std::io::BufReader::new(file))
}

fn write_csv<F>(sink: &mut OutputSink<'_>, name: &str, rows: usize, emit: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut bytes = Vec::new();
    emit(&mut bytes)?;
    sink.write(name, rows as u64, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn corpus_on_disk(dir: &Path, seed: u64) -> PipelineConfig {
        let corpus = generate(&SynthConfig {
            n_publications: 200,
            seed,
            ..Default::default()
        })
        .unwrap();
        let registry_path = dir.join("registry.jsonl");
        let repository_path = dir.join("repository.jsonl");
        let repo_registry_path = dir.join("repositories.json");
        io::write_jsonl_file(&registry_path, &corpus.registry).unwrap();
        io::write_jsonl_file(&repository_path, &corpus.repository).unwrap();
        io::write_repository_registry(&repo_registry_path, &corpus.repositories).unwrap();
        PipelineConfig {
            registry_path,
            repository_path,
            repo_registry_path,
            reader_profiles_path: None,
            panel_mapping_path: None,
            ledger_path: None,
            output_dir: dir.join("out"),
            compliance_cutoff_days: 90,
            cap_days: vec![365, 730],
            min_repo_count: 100,
            excluded_years: vec![2018],
            histogram_bin_widths: vec![7, 30],
            force: false,
        }
    }

    #[test]
    fn full_run_writes_manifest_with_nonzero_counts() {
        let dir = tempfile::tempdir().unwrap();
        let config = corpus_on_disk(dir.path(), 42);
        let manifest = run_pipeline(&config).unwrap();
        assert!(manifest.failing_stage.is_none());
        let linked = manifest
            .files
            .iter()
            .find(|f| f.name == "linked_publications.jsonl")
            .unwrap();
        assert!(linked.rows > 0);
        assert!(manifest.files.iter().any(|f| f.name == "lag_by_country_year.csv"));
        assert!(manifest.files.iter().any(|f| f.name == "lag_by_country_year_cap365.csv"));
        assert!(manifest.files.iter().any(|f| f.name == "lag_histogram_w7.csv"));
        assert!(config.output_dir.join("manifest.json").exists());
    }

    #[test]
    fn rerun_same_inputs_same_digest() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = corpus_on_disk(dir.path(), 7);
        let first = run_pipeline(&config).unwrap();
        config.force = true;
        let second = run_pipeline(&config).unwrap();
        assert_eq!(first.run_digest, second.run_digest);
        assert_eq!(first.files, second.files);
    }

    #[test]
    fn refuses_overwrite_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let config = corpus_on_disk(dir.path(), 7);
        run_pipeline(&config).unwrap();
        match run_pipeline(&config) {
            Err(Error::InvalidConfig(message)) => assert!(message.contains("--force")),
            other => panic!("expected overwrite refusal, got {other:?}"),
        }
    }

    #[test]
    fn empty_registry_fails_at_filter_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = corpus_on_disk(dir.path(), 7);
        std::fs::write(&config.registry_path, "").unwrap();
        config.output_dir = dir.path().join("out2");
        match run_pipeline(&config) {
            Err(Error::EmptyInput(_)) => {}
            other => panic!("expected empty-input failure, got {other:?}"),
        }
        let manifest: Manifest = serde_json::from_slice(
            &std::fs::read(config.output_dir.join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest.failing_stage.as_deref(), Some("filter"));
    }

    #[test]
    fn missing_input_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = corpus_on_disk(dir.path(), 7);
        config.registry_path = dir.path().join("absent.jsonl");
        config.output_dir = dir.path().join("out3");
        match run_pipeline(&config) {
            Err(Error::Io(_)) => {}
            other => panic!("expected I/O failure, got {other:?}"),
        }
    }

    #[test]
    fn partial_suffix_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = corpus_on_disk(dir.path(), 7);
        // valid registry lines followed by repository file truncated to junk
        std::fs::write(&config.repository_path, "{broken\n").unwrap();
        config.output_dir = dir.path().join("out4");
        assert!(run_pipeline(&config).is_err());
        // failure hit before any output was written; now fail later instead
        let mut config = corpus_on_disk(dir.path(), 8);
        config.output_dir = dir.path().join("out5");
        config.reader_profiles_path = Some(dir.path().join("missing_profiles.jsonl"));
        assert!(run_pipeline(&config).is_err());
        assert!(config.output_dir.join("rejections_registry.csv.partial").exists());
        assert!(!config.output_dir.join("rejections_registry.csv").exists());
        let manifest: Manifest = serde_json::from_slice(
            &std::fs::read(config.output_dir.join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest.failing_stage.as_deref(), Some("tag-subjects"));
    }

    #[test]
    fn invalid_config_rejected_before_any_io() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = corpus_on_disk(dir.path(), 7);
        config.compliance_cutoff_days = 0;
        assert!(matches!(run_pipeline(&config), Err(Error::InvalidConfig(_))));
    }
}
