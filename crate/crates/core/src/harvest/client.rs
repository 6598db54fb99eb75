//! OAI-PMH harvesting loop: follows the resumption-token chain, retries
//! transient failures with bounded exponential backoff, and feeds every
//! record through the first-seen ledger.

use std::thread;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::harvest::ledger::HarvestLedger;
use crate::harvest::oai::parse_oai_response;

/// One HTTP fetch. Abstracted so tests can serve fixture pages and inject
/// faults without a network.
pub trait Transport {
    fn fetch(&self, url: &str) -> std::result::Result<Vec<u8>, TransportError>;
}

/// A failed fetch; retried when transient.
#[derive(Debug, Clone)]
pub struct TransportError {
    pub status: Option<u16>,
    pub message: String,
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.status {
            Some(status) => write!(f, "HTTP {status}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        HttpTransport {
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("default TLS backend available"),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn fetch(&self, url: &str) -> std::result::Result<Vec<u8>, TransportError> {
        let response = self.client.get(url).send().map_err(|e| TransportError {
            status: None,
            message: e.to_string(),
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError {
                status: Some(status.as_u16()),
                message: format!("GET {url}"),
            });
        }
        response.bytes().map(|b| b.to_vec()).map_err(|e| TransportError {
            status: None,
            message: e.to_string(),
        })
    }
}

/// Harvest parameters for one endpoint.
#[derive(Debug, Clone)]
pub struct HarvestOptions {
    /// Optional OAI set to restrict the harvest to.
    pub set: Option<String>,
    /// Optional `from` datestamp (ISO date).
    pub from: Option<String>,
    /// Pause between successive page requests.
    pub polite_delay_ms: u64,
    /// Base delay of the exponential retry backoff.
    pub retry_base_ms: u64,
}

impl Default for HarvestOptions {
    fn default() -> Self {
        HarvestOptions {
            set: None,
            from: None,
            polite_delay_ms: 0,
            retry_base_ms: 500,
        }
    }
}

const MAX_ATTEMPTS: u32 = 3;

/// Outcome of harvesting one endpoint. `completed` is false when the chain
/// was aborted; the ledger keeps whatever progress was made.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestReport {
    pub pages: u32,
    pub records: u64,
    pub record_errors: u64,
    pub retries: u32,
    pub chain_restarted: bool,
    pub completed: bool,
    pub failure: Option<String>,
}

fn list_records_url(base_url: &str, options: &HarvestOptions) -> String {
    let mut url = format!("{base_url}?verb=ListRecords&metadataPrefix=oai_dc");
    if let Some(set) = &options.set {
        url.push_str(&format!("&set={set}"));
    }
    if let Some(from) = &options.from {
        url.push_str(&format!("&from={from}"));
    }
    url
}

fn fetch_with_retry<T: Transport>(
    transport: &T,
    url: &str,
    options: &HarvestOptions,
    report: &mut HarvestReport,
) -> std::result::Result<Vec<u8>, TransportError> {
    let mut last_error = None;
    for attempt in 0..MAX_ATTEMPTS {
        if attempt > 0 {
            report.retries += 1;
            let backoff = options.retry_base_ms.saturating_mul(1 << (attempt - 1));
            thread::sleep(Duration::from_millis(backoff));
        }
        match transport.fetch(url) {
            Ok(bytes) => return Ok(bytes),
            Err(e) => last_error = Some(e),
        }
    }
    Err(last_error.expect("at least one attempt made"))
}

/// Follows the ListRecords resumption-token chain to exhaustion, recording
/// every (identifier, datestamp) observation in the ledger.
///
/// Transient fetch failures are retried up to three times per page; a page
/// that still fails aborts the chain with a partial-progress report. A
/// badResumptionToken protocol error restarts the chain once from the start
/// (safe because the ledger ignores repeated observations).
pub fn harvest_endpoint<T: Transport>(
    transport: &T,
    base_url: &str,
    options: &HarvestOptions,
    ledger: &mut HarvestLedger,
) -> Result<HarvestReport> {
    let mut report = HarvestReport::default();
    let mut restarted = false;
    let mut url = list_records_url(base_url, options);

    loop {
        let bytes = match fetch_with_retry(transport, &url, options, &mut report) {
            Ok(bytes) => bytes,
            Err(e) => {
                report.failure = Some(format!("fetch {url}: {e}"));
                return Ok(report);
            }
        };
        let page = match parse_oai_response(&bytes) {
            Ok(page) => page,
            Err(Error::OaiProtocol { code, message }) if code == "badResumptionToken" => {
                if restarted {
                    report.failure =
                        Some(format!("badResumptionToken after restart: {message}"));
                    return Ok(report);
                }
                restarted = true;
                report.chain_restarted = true;
                url = list_records_url(base_url, options);
                continue;
            }
            Err(e) => {
                report.failure = Some(e.to_string());
                return Ok(report);
            }
        };
        report.pages += 1;
        report.records += page.records.len() as u64;
        report.record_errors += page.record_errors.len() as u64;
        for record in &page.records {
            ledger.observe(&record.identifier, record.datestamp);
        }
        match page.resumption_token {
            Some(token) => {
                url = format!("{base_url}?verb=ListRecords&resumptionToken={token}");
                if options.polite_delay_ms > 0 {
                    thread::sleep(Duration::from_millis(options.polite_delay_ms));
                }
            }
            None => {
                report.completed = true;
                return Ok(report);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;
    use std::collections::HashMap;

    /// Serves canned pages keyed by resumption token and can inject a fixed
    /// number of failures per URL.
    struct FixtureTransport {
        pages: HashMap<String, String>,
        failures: RefCell<HashMap<String, u32>>,
    }

    impl FixtureTransport {
        fn new() -> Self {
            FixtureTransport {
                pages: HashMap::new(),
                failures: RefCell::new(HashMap::new()),
            }
        }

        fn record_xml(id: &str, stamp: &str) -> String {
            format!(
                "<record><header><identifier>{id}</identifier><datestamp>{stamp}</datestamp></header></record>"
            )
        }

        /// Three pages of five records each, chained t1 -> t2 -> end.
        fn three_pages() -> Self {
            let mut fixture = Self::new();
            let mut page = |token_in: &str, first: usize, token_out: &str| {
                let records: String = (first..first + 5)
                    .map(|i| Self::record_xml(&format!("oai:fix:{i}"), &format!("2016-01-{:02}", i + 1)))
                    .collect();
                let xml = format!(
                    "<OAI-PMH><ListRecords>{records}<resumptionToken>{token_out}</resumptionToken></ListRecords></OAI-PMH>"
                );
                fixture.pages.insert(token_in.to_string(), xml);
            };
            page("", 0, "t1");
            page("t1", 5, "t2");
            page("t2", 10, "");
            fixture
        }

        fn fail_next(&mut self, url_contains: &str, times: u32) {
            self.failures.borrow_mut().insert(url_contains.to_string(), times);
        }
    }

    impl Transport for FixtureTransport {
        fn fetch(&self, url: &str) -> std::result::Result<Vec<u8>, TransportError> {
            let mut failures = self.failures.borrow_mut();
            for (fragment, remaining) in failures.iter_mut() {
                if url.contains(fragment.as_str()) && *remaining > 0 {
                    *remaining -= 1;
                    return Err(TransportError {
                        status: Some(500),
                        message: "injected failure".into(),
                    });
                }
            }
            let token = url
                .split("resumptionToken=")
                .nth(1)
                .unwrap_or("")
                .to_string();
            match self.pages.get(&token) {
                Some(xml) => Ok(xml.clone().into_bytes()),
                None => Err(TransportError {
                    status: Some(404),
                    message: format!("no fixture for {url}"),
                }),
            }
        }
    }

    fn options() -> HarvestOptions {
        HarvestOptions {
            retry_base_ms: 1,
            ..Default::default()
        }
    }

    #[test]
    fn harvests_three_pages() {
        let transport = FixtureTransport::three_pages();
        let mut ledger = HarvestLedger::new();
        let report = harvest_endpoint(&transport, "http://fixture", &options(), &mut ledger).unwrap();
        assert!(report.completed);
        assert_eq!(report.pages, 3);
        assert_eq!(report.records, 15);
        assert_eq!(ledger.len(), 15);
    }

    #[test]
    fn reharvest_is_idempotent() {
        let transport = FixtureTransport::three_pages();
        let mut ledger = HarvestLedger::new();
        harvest_endpoint(&transport, "http://fixture", &options(), &mut ledger).unwrap();
        let mut first = Vec::new();
        ledger.write_jsonl(&mut first).unwrap();

        harvest_endpoint(&transport, "http://fixture", &options(), &mut ledger).unwrap();
        let mut second = Vec::new();
        ledger.write_jsonl(&mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn transient_failures_are_retried() {
        let mut transport = FixtureTransport::three_pages();
        transport.fail_next("resumptionToken=t1", 2);
        let mut ledger = HarvestLedger::new();
        let report = harvest_endpoint(&transport, "http://fixture", &options(), &mut ledger).unwrap();
        assert!(report.completed);
        assert_eq!(report.retries, 2);
        assert_eq!(ledger.len(), 15);
    }

    #[test]
    fn persistent_failure_aborts_with_partial_progress() {
        let mut transport = FixtureTransport::three_pages();
        transport.fail_next("resumptionToken=t1", 10);
        let mut ledger = HarvestLedger::new();
        let report = harvest_endpoint(&transport, "http://fixture", &options(), &mut ledger).unwrap();
        assert!(!report.completed);
        assert!(report.failure.is_some());
        assert_eq!(report.pages, 1);
        assert_eq!(ledger.len(), 5);
    }

    #[test]
    fn bad_resumption_token_restarts_chain_once() {
        let mut transport = FixtureTransport::three_pages();
        transport.pages.insert(
            "t1".into(),
            "<OAI-PMH><error code=\"badResumptionToken\">expired</error></OAI-PMH>".into(),
        );
        let mut ledger = HarvestLedger::new();
        let report = harvest_endpoint(&transport, "http://fixture", &options(), &mut ledger).unwrap();
        // restart hits the same broken token again and aborts
        assert!(report.chain_restarted);
        assert!(!report.completed);
        assert!(report.failure.unwrap().contains("badResumptionToken"));
    }
}
