//! Record linkage and analytics for open-access deposit compliance.
//!
//! The library joins publisher-registry metadata with repository deposit
//! metadata by exact match on normalized title, publication year, and first
//! author family name, groups the matches by DOI, and measures the lag
//! between publication and repository deposit against a 90-day policy
//! cutoff. Supporting pieces: an OAI-PMH harvester with a first-seen
//! datestamp ledger, platform page scrapers for authoritative deposit dates,
//! subject tagging with REF 2021 panel mapping, a synthetic corpus generator
//! with ground truth, and a batch pipeline that emits CSV/JSON reports with
//! a deterministic manifest.

pub mod analytics;
pub mod error;
pub mod harvest;
pub mod io;
pub mod linkage;
pub mod model;
pub mod normalize;
pub mod pipeline;
pub mod subjects;
pub mod synth;

pub use error::{Error, Result};
pub use model::{date_diff_days, CalendarDate, LinkedPublication, NO_COUNTRY};
