//! Deposit date acquisition: OAI-PMH harvesting into a first-seen ledger,
//! platform page scrapers, and the precedence rule that combines them with
//! records' own deposit date fields.

pub mod client;
pub mod ledger;
pub mod oai;
pub mod scrape;

pub use client::{harvest_endpoint, HarvestOptions, HarvestReport, HttpTransport, Transport, TransportError};
pub use ledger::{HarvestLedger, LedgerEntry};
pub use oai::{parse_oai_response, OaiPage, OaiRecord};
pub use scrape::{scrape_deposit_date, ScrapedDate};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CalendarDate, RawRepositoryRecord};

/// Where a record's authoritative deposit date came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DateProvenance {
    /// Extracted from the repository's record page; outranks the ledger
    /// because the OAI-PMH last-update field may have been overwritten.
    Scraped,
    /// First-seen datestamp from the harvest ledger.
    Ledger,
    /// The record's own deposit date field.
    SelfReported,
}

impl std::fmt::Display for DateProvenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DateProvenance::Scraped => "SCRAPED",
            DateProvenance::Ledger => "LEDGER",
            DateProvenance::SelfReported => "SELF",
        };
        f.write_str(s)
    }
}

/// A record dropped because no source offered a deposit date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub record_id: String,
    pub reason: String,
}

/// Applies the deposit date precedence scraped > ledger first-seen > the
/// record's own field, recording provenance per record. Records with no
/// candidate date at all are dropped with a reason.
pub fn resolve_deposit_dates(
    records: &[RawRepositoryRecord],
    ledger: &HarvestLedger,
    scraped: &BTreeMap<String, CalendarDate>,
) -> (Vec<(RawRepositoryRecord, DateProvenance)>, Vec<DroppedRecord>) {
    let mut resolved = Vec::with_capacity(records.len());
    let mut dropped = Vec::new();
    for record in records {
        let candidate = scraped
            .get(&record.record_id)
            .map(|date| (*date, DateProvenance::Scraped))
            .or_else(|| {
                ledger
                    .first_seen(&record.record_id)
                    .map(|date| (date, DateProvenance::Ledger))
            })
            .or_else(|| record.deposit_date.map(|date| (date, DateProvenance::SelfReported)));
        match candidate {
            Some((date, provenance)) => {
                let mut record = record.clone();
                record.deposit_date = Some(date);
                resolved.push((record, provenance));
            }
            None => dropped.push(DroppedRecord {
                record_id: record.record_id.clone(),
                reason: "NO_DEPOSIT_DATE_CANDIDATE".to_string(),
            }),
        }
    }
    (resolved, dropped)
}
