//! `depositlag`: batch pipeline for publication-to-deposit lag analytics.
//!
//! Data goes to files only; standard output stays empty unless --stdout is
//! given for a single report. Logs are line-delimited JSON on standard
//! error. Exit codes: 0 success, 1 data validation failure, 2 I/O failure,
//! 3 network failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use depositlag::analytics::audit_acceptance_dates;
use depositlag::error::Error;
use depositlag::harvest::{harvest_endpoint, HarvestLedger, HarvestOptions, HttpTransport};
use depositlag::io;
use depositlag::linkage::{filter_registry, filter_repository, group_by_doi, link, validate_links_by_doi};
use depositlag::pipeline::{run_pipeline, PipelineConfig};
use depositlag::synth::{generate, SynthConfig};

#[derive(Parser)]
#[command(name = "depositlag", version, about = "Deposit time lag linkage and compliance analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the config file; every config key has one.
#[derive(Args, Default)]
struct Overrides {
    /// Config file (TOML)
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Compliance cutoff in days
    #[arg(long)]
    cutoff_days: Option<i64>,
    /// Lag cap in days; repeatable
    #[arg(long)]
    cap_days: Vec<i64>,
    /// Minimum per-year publication count for repository profiles
    #[arg(long)]
    min_repo_count: Option<u64>,
    /// Year to drop from capped per-year reports; repeatable
    #[arg(long)]
    exclude_years: Vec<i32>,
    /// Histogram bin width in days; repeatable
    #[arg(long)]
    bin_width: Vec<i64>,
    /// Worker bound for parallel stages (outputs are identical for any value)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overwrite existing output files
    #[arg(long)]
    force: bool,
    /// Output directory
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate the input files, logging record counts
    Ingest(Overrides),
    /// Harvest OAI-PMH endpoints into the first-seen ledger
    Harvest {
        #[command(flatten)]
        overrides: Overrides,
        /// Endpoint base URL; repeatable (defaults to the config file list)
        #[arg(long)]
        endpoint: Vec<String>,
        /// Ledger file to update
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// OAI set to restrict the harvest to
        #[arg(long)]
        set: Option<String>,
        /// Harvest records updated on or after this ISO date
        #[arg(long)]
        from: Option<String>,
        /// Pause between page requests
        #[arg(long)]
        polite_delay_ms: Option<u64>,
    },
    /// Filter, link, and group; write linked publications and link reports
    Link(Overrides),
    /// Estimate matching accuracy by comparing DOIs across linked pairs
    ValidateDoi {
        #[command(flatten)]
        overrides: Overrides,
        /// Print the report to standard output instead of a file
        #[arg(long)]
        stdout: bool,
    },
    /// Compute report CSVs from an existing linked_publications.jsonl
    Analyze(Overrides),
    /// Run the full pipeline end to end and write the manifest
    Report(Overrides),
    /// Generate a synthetic corpus with ground truth
    Synth {
        #[command(flatten)]
        overrides: Overrides,
        /// Number of publications
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// RNG seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Audit acceptance dates against publication dates
    AuditAcceptance {
        #[command(flatten)]
        overrides: Overrides,
        /// Print the audit to standard output instead of a file
        #[arg(long)]
        stdout: bool,
    },
}

/// Config file shape. Paths are resolved relative to the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    registry: Option<PathBuf>,
    repository: Option<PathBuf>,
    repo_registry: Option<PathBuf>,
    reader_profiles: Option<PathBuf>,
    panel_mapping: Option<PathBuf>,
    ledger: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    cutoff_days: Option<i64>,
    cap_days: Option<Vec<i64>>,
    min_repo_count: Option<u64>,
    excluded_years: Option<Vec<i32>>,
    histogram_bin_widths: Option<Vec<i64>>,
    #[serde(default)]
    harvest: HarvestFileConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HarvestFileConfig {
    endpoints: Option<Vec<String>>,
    ledger: Option<PathBuf>,
    polite_delay_ms: Option<u64>,
}

fn log(event: &str, fields: serde_json::Value) {
    let mut record = serde_json::json!({ "event": event });
    if let (Some(obj), Some(extra)) = (record.as_object_mut(), fields.as_object()) {
        for (k, v) in extra {
            obj.insert(k.clone(), v.clone());
        }
    }
    eprintln!("{record}");
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Io(_) => 2,
        Error::Network(_) | Error::HarvestAborted { .. } => 3,
        _ => 1,
    }
}

fn resolve(base: &Path, path: PathBuf) -> PathBuf {
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}

struct LoadedConfig {
    pipeline: PipelineConfig,
    harvest_endpoints: Vec<String>,
    harvest_ledger: Option<PathBuf>,
    polite_delay_ms: u64,
}

fn load_config(overrides: &Overrides) -> Result<LoadedConfig, Error> {
    let (file, base) = match &overrides.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let file: FileConfig = toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            (file, base)
        }
        None => (FileConfig::default(), PathBuf::from(".")),
    };
    let require = |name: &str, value: Option<PathBuf>| {
        value.ok_or_else(|| Error::InvalidConfig(format!("missing required config key: {name}")))
    };
    let pipeline = PipelineConfig {
        registry_path: resolve(&base, require("registry", file.registry)?),
        repository_path: resolve(&base, require("repository", file.repository)?),
        repo_registry_path: resolve(&base, require("repo_registry", file.repo_registry)?),
        reader_profiles_path: file.reader_profiles.map(|p| resolve(&base, p)),
        panel_mapping_path: file.panel_mapping.map(|p| resolve(&base, p)),
        ledger_path: file.ledger.map(|p| resolve(&base, p)),
        output_dir: overrides
            .output_dir
            .clone()
            .or(file.output_dir.map(|p| resolve(&base, p)))
            .ok_or_else(|| Error::InvalidConfig("missing output_dir".into()))?,
        compliance_cutoff_days: overrides.cutoff_days.or(file.cutoff_days).unwrap_or(90),
        cap_days: if overrides.cap_days.is_empty() {
            file.cap_days.unwrap_or_else(|| vec![365, 730])
        } else {
            overrides.cap_days.clone()
        },
        min_repo_count: overrides.min_repo_count.or(file.min_repo_count).unwrap_or(100),
        excluded_years: if overrides.exclude_years.is_empty() {
            file.excluded_years.unwrap_or_default()
        } else {
            overrides.exclude_years.clone()
        },
        histogram_bin_widths: if overrides.bin_width.is_empty() {
            file.histogram_bin_widths.unwrap_or_else(|| vec![7, 30])
        } else {
            overrides.bin_width.clone()
        },
        force: overrides.force,
    };
    Ok(LoadedConfig {
        pipeline,
        harvest_endpoints: file.harvest.endpoints.unwrap_or_default(),
        harvest_ledger: file.harvest.ledger.map(|p| resolve(&base, p)),
        polite_delay_ms: file.harvest.polite_delay_ms.unwrap_or(0),
    })
}

fn cmd_ingest(overrides: &Overrides) -> Result<(), Error> {
    let config = load_config(overrides)?.pipeline;
    let registry = io::read_registry(&config.registry_path)?;
    let repository = io::read_repository(&config.repository_path)?;
    let repositories = io::read_repository_registry(&config.repo_registry_path)?;
    log(
        "ingest",
        serde_json::json!({
            "registry_records": registry.len(),
            "repository_records": repository.len(),
            "repositories": repositories.len(),
        }),
    );
    if registry.is_empty() {
        return Err(Error::EmptyInput("registry input has no records".into()));
    }
    if repository.is_empty() {
        return Err(Error::EmptyInput("repository input has no records".into()));
    }
    Ok(())
}

fn prepare_links(
    config: &PipelineConfig,
) -> Result<
    (
        Vec<depositlag::linkage::LinkPair>,
        depositlag::linkage::LinkReport,
        Vec<depositlag::model::RegistryRecord>,
        Vec<depositlag::model::RepositoryRecord>,
        BTreeMap<String, depositlag::model::RepositoryInfo>,
    ),
    Error,
> {
    let raw_registry = io::read_registry(&config.registry_path)?;
    let raw_repository = io::read_repository(&config.repository_path)?;
    let repositories = io::read_repository_registry(&config.repo_registry_path)?;
    if raw_registry.is_empty() {
        return Err(Error::EmptyInput("registry input has no records".into()));
    }
    let (registry, registry_rejections) = filter_registry(&raw_registry);
    let (repository, repository_rejections) = filter_repository(&raw_repository);
    log(
        "filter",
        serde_json::json!({
            "registry_kept": registry.len(),
            "registry_rejected": registry_rejections.len(),
            "repository_kept": repository.len(),
            "repository_rejected": repository_rejections.len(),
        }),
    );
    let (pairs, report) = link(&registry, &repository);
    log(
        "link",
        serde_json::json!({
            "pairs": report.pairs,
            "unmatched_repository_records": report.unmatched_repository_records,
            "ambiguous_keys": report.ambiguous_keys.len(),
        }),
    );
    Ok((pairs, report, registry, repository, repositories))
}

fn write_file_checked(path: &Path, force: bool, bytes: &[u8]) -> Result<(), Error> {
    if path.exists() && !force {
        return Err(Error::InvalidConfig(format!(
            "output file {} exists; pass --force to overwrite",
            path.display()
        )));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn cmd_link(overrides: &Overrides) -> Result<(), Error> {
    let config = load_config(overrides)?.pipeline;
    let (pairs, report, registry, repository, repositories) = prepare_links(&config)?;
    let publications = group_by_doi(&pairs, &registry, &repository, &repositories);
    fs::create_dir_all(&config.output_dir)?;
    let mut linked = Vec::new();
    io::write_jsonl(&mut linked, &publications)?;
    write_file_checked(
        &config.output_dir.join("linked_publications.jsonl"),
        config.force,
        &linked,
    )?;
    let mut ambiguous = Vec::new();
    io::write_ambiguous_keys_csv(&mut ambiguous, &report.ambiguous_keys)?;
    write_file_checked(
        &config.output_dir.join("ambiguous_keys.csv"),
        config.force,
        &ambiguous,
    )?;
    log(
        "group",
        serde_json::json!({ "linked_publications": publications.len() }),
    );
    Ok(())
}

fn cmd_validate_doi(overrides: &Overrides, stdout: bool) -> Result<(), Error> {
    let config = load_config(overrides)?.pipeline;
    let (pairs, ..) = prepare_links(&config)?;
    let report = validate_links_by_doi(&pairs);
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    if stdout {
        use std::io::Write;
        std::io::stdout().write_all(&bytes)?;
    } else {
        fs::create_dir_all(&config.output_dir)?;
        write_file_checked(
            &config.output_dir.join("accuracy_report.json"),
            config.force,
            &bytes,
        )?;
    }
    log(
        "validate-doi",
        serde_json::json!({
            "total_pairs": report.total_pairs,
            "accuracy": report.accuracy,
        }),
    );
    Ok(())
}

fn cmd_analyze(overrides: &Overrides) -> Result<(), Error> {
    use depositlag::analytics::{
        aggregate_lag, compliance_proportions, lag_histogram, GroupBy, Scope,
    };
    let config = load_config(overrides)?.pipeline;
    let linked_path = config.output_dir.join("linked_publications.jsonl");
    let publications = io::read_linked_publications(&linked_path)?;
    if publications.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no publications",
            linked_path.display()
        )));
    }
    let by_country = aggregate_lag(&publications, GroupBy::Country, true, None, &Scope::Any);
    let mut bytes = Vec::new();
    io::write_lag_aggregates_csv(&mut bytes, &by_country)?;
    write_file_checked(
        &config.output_dir.join("lag_by_country_year.csv"),
        config.force,
        &bytes,
    )?;
    let compliance = compliance_proportions(
        &publications,
        GroupBy::Country,
        true,
        config.compliance_cutoff_days,
    );
    let mut bytes = Vec::new();
    io::write_compliance_csv(&mut bytes, &compliance)?;
    write_file_checked(
        &config.output_dir.join("compliance_by_country_year.csv"),
        config.force,
        &bytes,
    )?;
    let lags: Vec<i64> = publications
        .iter()
        .filter_map(|p| depositlag::analytics::deposit_lag(p, &Scope::Any).ok())
        .collect();
    for &width in &config.histogram_bin_widths {
        let histogram = lag_histogram(&lags, width)?;
        let mut bytes = Vec::new();
        io::write_histogram_csv(&mut bytes, &histogram)?;
        write_file_checked(
            &config.output_dir.join(format!("lag_histogram_w{width}.csv")),
            config.force,
            &bytes,
        )?;
    }
    log(
        "analyze",
        serde_json::json!({
            "publications": publications.len(),
            "country_rows": by_country.len(),
            "compliance_rows": compliance.len(),
        }),
    );
    Ok(())
}

fn cmd_report(overrides: &Overrides) -> Result<(), Error> {
    let config = load_config(overrides)?.pipeline;
    let manifest = run_pipeline(&config)?;
    log(
        "report",
        serde_json::json!({
            "files": manifest.files.len(),
            "run_digest": manifest.run_digest,
        }),
    );
    Ok(())
}

fn cmd_synth(overrides: &Overrides, n: usize, seed: u64) -> Result<(), Error> {
    let output_dir = overrides
        .output_dir
        .clone()
        .ok_or_else(|| Error::InvalidConfig("synth requires --output-dir".into()))?;
    let corpus = generate(&SynthConfig {
        n_publications: n,
        seed,
        ..Default::default()
    })?;
    fs::create_dir_all(&output_dir)?;
    let force = overrides.force;
    let mut bytes = Vec::new();
    io::write_jsonl(&mut bytes, &corpus.registry)?;
    write_file_checked(&output_dir.join("registry.jsonl"), force, &bytes)?;
    let mut bytes = Vec::new();
    io::write_jsonl(&mut bytes, &corpus.repository)?;
    write_file_checked(&output_dir.join("repository.jsonl"), force, &bytes)?;
    let mut bytes = serde_json::to_vec_pretty(&corpus.repositories)?;
    bytes.push(b'\n');
    write_file_checked(&output_dir.join("repositories.json"), force, &bytes)?;
    let mut bytes = Vec::new();
    io::write_ground_truth_csv(&mut bytes, &corpus.truth)?;
    write_file_checked(&output_dir.join("ground_truth.csv"), force, &bytes)?;
    log(
        "synth",
        serde_json::json!({
            "publications": corpus.registry.len(),
            "repository_records": corpus.repository.len(),
            "seed": seed,
        }),
    );
    Ok(())
}

fn cmd_audit_acceptance(overrides: &Overrides, stdout: bool) -> Result<(), Error> {
    let config = load_config(overrides)?.pipeline;
    let raw_registry = io::read_registry(&config.registry_path)?;
    let (registry, _) = filter_registry(&raw_registry);
    let audit = audit_acceptance_dates(&registry);
    let mut bytes = serde_json::to_vec_pretty(&audit)?;
    bytes.push(b'\n');
    if stdout {
        use std::io::Write;
        std::io::stdout().write_all(&bytes)?;
    } else {
        fs::create_dir_all(&config.output_dir)?;
        write_file_checked(
            &config.output_dir.join("acceptance_audit.json"),
            config.force,
            &bytes,
        )?;
    }
    log(
        "audit-acceptance",
        serde_json::json!({
            "populated": audit.populated,
            "equal_to_published": audit.equal_to_published,
        }),
    );
    Ok(())
}

fn cmd_harvest(
    overrides: &Overrides,
    endpoints: Vec<String>,
    ledger_path: Option<PathBuf>,
    set: Option<String>,
    from: Option<String>,
    polite_delay_ms: Option<u64>,
) -> Result<(), Error> {
    let loaded = load_config(overrides).ok();
    let endpoints = if endpoints.is_empty() {
        loaded
            .as_ref()
            .map(|l| l.harvest_endpoints.clone())
            .unwrap_or_default()
    } else {
        endpoints
    };
    if endpoints.is_empty() {
        return Err(Error::InvalidConfig(
            "no harvest endpoints given (--endpoint or [harvest] endpoints)".into(),
        ));
    }
    let ledger_path = ledger_path
        .or_else(|| loaded.as_ref().and_then(|l| l.harvest_ledger.clone()))
        .ok_or_else(|| Error::InvalidConfig("no ledger path given".into()))?;
    let mut ledger = if ledger_path.exists() {
        let file = fs::File::open(&ledger_path)?;
        HarvestLedger::read_jsonl(std::io::BufReader::new(file))?
    } else {
        HarvestLedger::new()
    };
    let options = HarvestOptions {
        set,
        from,
        polite_delay_ms: polite_delay_ms
            .or(loaded.as_ref().map(|l| l.polite_delay_ms))
            .unwrap_or(0),
        ..Default::default()
    };
    let transport = HttpTransport::new();
    let mut failure = None;
    for endpoint in &endpoints {
        let report = harvest_endpoint(&transport, endpoint, &options, &mut ledger)?;
        log(
            "harvest",
            serde_json::json!({
                "endpoint": endpoint,
                "pages": report.pages,
                "records": report.records,
                "retries": report.retries,
                "completed": report.completed,
                "failure": report.failure,
            }),
        );
        if let Some(message) = report.failure {
            failure = Some(format!("{endpoint}: {message}"));
        }
    }
    // keep partial progress even when a chain aborted
    let mut bytes = Vec::new();
    ledger.write_jsonl(&mut bytes)?;
    if let Some(parent) = ledger_path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&ledger_path, bytes)?;
    match failure {
        Some(message) => Err(Error::Network(message)),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Ingest(overrides) => cmd_ingest(&overrides),
        Command::Harvest {
            overrides,
            endpoint,
            ledger,
            set,
            from,
            polite_delay_ms,
        } => cmd_harvest(&overrides, endpoint, ledger, set, from, polite_delay_ms),
        Command::Link(overrides) => cmd_link(&overrides),
        Command::ValidateDoi { overrides, stdout } => cmd_validate_doi(&overrides, stdout),
        Command::Analyze(overrides) => cmd_analyze(&overrides),
        Command::Report(overrides) => cmd_report(&overrides),
        Command::Synth { overrides, n, seed } => cmd_synth(&overrides, n, seed),
        Command::AuditAcceptance { overrides, stdout } => cmd_audit_acceptance(&overrides, stdout),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            let code = exit_code(&error);
            log(
                "error",
                serde_json::json!({ "message": error.to_string(), "exit_code": code }),
            );
            ExitCode::from(code)
        }
    }
}
