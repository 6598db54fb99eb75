//! First-seen datestamp ledger. OAI-PMH only exposes a last-update field, so
//! the earliest datestamp ever observed for a record stands in for its
//! deposit date; later datestamps are kept as update dates.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CalendarDate;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub first_seen: CalendarDate,
    /// Datestamps observed after (or displaced by) the first-seen one,
    /// deduplicated and ordered.
    pub updates: BTreeSet<CalendarDate>,
}

/// Per-record first-seen ledger. Observation order does not matter:
/// first_seen always ends up as the minimum datestamp ever observed, and
/// re-applying an observation sequence is a no-op.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestLedger {
    entries: BTreeMap<String, LedgerEntry>,
}

#[derive(Serialize, Deserialize)]
struct LedgerLine {
    record_id: String,
    first_seen: CalendarDate,
    updates: Vec<CalendarDate>,
}

impl HarvestLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, record_id: &str) -> Option<&LedgerEntry> {
        self.entries.get(record_id)
    }

    pub fn first_seen(&self, record_id: &str) -> Option<CalendarDate> {
        self.entries.get(record_id).map(|e| e.first_seen)
    }

    /// Records one (record, datestamp) observation. A strictly earlier
    /// datestamp displaces first_seen and moves the previous first_seen into
    /// the updates; a later one joins the updates; a known one is ignored.
    pub fn observe(&mut self, record_id: &str, datestamp: CalendarDate) {
        match self.entries.get_mut(record_id) {
            None => {
                self.entries.insert(
                    record_id.to_string(),
                    LedgerEntry {
                        first_seen: datestamp,
                        updates: BTreeSet::new(),
                    },
                );
            }
            Some(entry) => {
                if datestamp < entry.first_seen {
                    let displaced = entry.first_seen;
                    entry.first_seen = datestamp;
                    entry.updates.insert(displaced);
                } else if datestamp > entry.first_seen {
                    entry.updates.insert(datestamp);
                }
            }
        }
    }

    /// Writes the ledger as line-delimited JSON, sorted by record id, so two
    /// equal ledgers serialize byte-identically.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for (record_id, entry) in &self.entries {
            let line = LedgerLine {
                record_id: record_id.clone(),
                first_seen: entry.first_seen,
                updates: entry.updates.iter().copied().collect(),
            };
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut ledger = HarvestLedger::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LedgerLine =
                serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            ledger.entries.insert(
                parsed.record_id,
                LedgerEntry {
                    first_seen: parsed.first_seen,
                    updates: parsed.updates.into_iter().collect(),
                },
            );
        }
        Ok(ledger)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LedgerEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> CalendarDate {
        CalendarDate::new(y, m, d).unwrap()
    }

    #[test]
    fn first_seen_observation_sequence() {
        let mut ledger = HarvestLedger::new();
        ledger.observe("r", date(2018, 3, 1));
        assert_eq!(ledger.first_seen("r"), Some(date(2018, 3, 1)));

        ledger.observe("r", date(2018, 6, 1));
        let entry = ledger.get("r").unwrap();
        assert_eq!(entry.first_seen, date(2018, 3, 1));
        assert_eq!(entry.updates.iter().copied().collect::<Vec<_>>(), vec![date(2018, 6, 1)]);

        ledger.observe("r", date(2017, 12, 1));
        let entry = ledger.get("r").unwrap();
        assert_eq!(entry.first_seen, date(2017, 12, 1));
        assert_eq!(
            entry.updates.iter().copied().collect::<Vec<_>>(),
            vec![date(2018, 3, 1), date(2018, 6, 1)]
        );
    }

    #[test]
    fn reobserving_known_datestamp_is_noop() {
        let mut ledger = HarvestLedger::new();
        ledger.observe("r", date(2018, 3, 1));
        ledger.observe("r", date(2018, 6, 1));
        let snapshot = ledger.clone();
        ledger.observe("r", date(2018, 3, 1));
        ledger.observe("r", date(2018, 6, 1));
        assert_eq!(ledger, snapshot);
    }

    #[test]
    fn jsonl_round_trip_is_byte_stable() {
        let mut ledger = HarvestLedger::new();
        ledger.observe("b", date(2018, 3, 1));
        ledger.observe("a", date(2017, 1, 5));
        ledger.observe("a", date(2018, 2, 2));

        let mut bytes = Vec::new();
        ledger.write_jsonl(&mut bytes).unwrap();
        let reread = HarvestLedger::read_jsonl(&bytes[..]).unwrap();
        assert_eq!(reread, ledger);

        let mut bytes2 = Vec::new();
        reread.write_jsonl(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }

    proptest! {
        #[test]
        fn idempotent_under_replay(
            observations in proptest::collection::vec(
                ("[a-c]", 2013..2020i32, 1..13u32, 1..29u32),
                1..40,
            )
        ) {
            let mut once = HarvestLedger::new();
            for (id, y, m, d) in &observations {
                once.observe(id, date(*y, *m, *d));
            }
            let mut twice = once.clone();
            for (id, y, m, d) in &observations {
                twice.observe(id, date(*y, *m, *d));
            }
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn first_seen_is_minimum_regardless_of_order(
            mut dates in proptest::collection::vec((2013..2020i32, 1..13u32, 1..29u32), 1..20),
            seed in 0..1000u64,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;

            let minimum = dates.iter().map(|(y, m, d)| date(*y, *m, *d)).min().unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            dates.shuffle(&mut rng);
            let mut ledger = HarvestLedger::new();
            for (y, m, d) in &dates {
                ledger.observe("r", date(*y, *m, *d));
            }
            prop_assert_eq!(ledger.first_seen("r"), Some(minimum));
        }
    }
}
