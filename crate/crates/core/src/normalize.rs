//! Deterministic normalization of titles, author names, DOIs, and incomplete
//! publication dates, applied to both datasets before matching.

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::model::{AuthorName, CalendarDate};

/// Exact-match join key: normalized title, publication year, and normalized
/// family name of the first author.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchKey {
    pub norm_title: String,
    pub year: i32,
    pub norm_family: String,
}

/// Letters that do not decompose into base + combining mark but still have a
/// conventional ASCII spelling.
fn fold_special(c: char) -> Option<&'static str> {
    match c {
        'ß' | 'ẞ' => Some("ss"),
        'ø' | 'Ø' => Some("o"),
        'æ' | 'Æ' => Some("ae"),
        'œ' | 'Œ' => Some("oe"),
        'đ' | 'Đ' | 'ð' | 'Ð' => Some("d"),
        'ł' | 'Ł' => Some("l"),
        'þ' | 'Þ' => Some("th"),
        'ħ' | 'Ħ' => Some("h"),
        'ı' => Some("i"),
        'ŋ' | 'Ŋ' => Some("ng"),
        _ => None,
    }
}

/// Normalizes text for matching: transliterate accented and special letters
/// to ASCII, lowercase, then drop every character outside `[a-z0-9_]`.
/// Characters with no ASCII equivalent (e.g. CJK) are dropped by the final
/// step. Idempotent.
pub fn normalize_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    // NFD pulls combining marks off their base letters so the strip step can
    // discard them.
    for c in s.nfd() {
        if is_combining_mark(c) {
            continue;
        }
        if let Some(folded) = fold_special(c) {
            out.push_str(folded);
            continue;
        }
        for lc in c.to_lowercase() {
            if lc.is_ascii_lowercase() || lc.is_ascii_digit() || lc == '_' {
                out.push(lc);
            }
        }
    }
    out
}

/// Strips resolver prefixes and surrounding whitespace from a DOI and
/// lowercases it. The DOI body is preserved verbatim otherwise.
pub fn normalize_doi(s: &str) -> Result<String> {
    let mut doi = s.trim();
    const PREFIXES: [&str; 5] = [
        "https://doi.org/",
        "http://doi.org/",
        "https://dx.doi.org/",
        "http://dx.doi.org/",
        "doi:",
    ];
    loop {
        let before = doi;
        for p in PREFIXES {
            if doi.len() >= p.len() && doi[..p.len()].eq_ignore_ascii_case(p) {
                doi = doi[p.len()..].trim();
            }
        }
        if doi == before {
            break;
        }
    }
    if doi.is_empty() {
        return Err(Error::EmptyDoi(s.to_string()));
    }
    Ok(doi.to_lowercase())
}

/// Completes a partial publication date. A missing day becomes the first of
/// the month; a missing month rejects the record.
pub fn impute_publication_date(year: i32, month: Option<u32>, day: Option<u32>) -> Result<CalendarDate> {
    let month = month.ok_or(Error::MissingMonth(year))?;
    CalendarDate::new(year, month, day.unwrap_or(1))
}

/// Family name of the first author: the explicit family field when present,
/// otherwise the last whitespace-separated token of the raw name.
pub fn first_author_family(authors: &[AuthorName]) -> Result<&str> {
    let first = authors.first().ok_or(Error::NoAuthors)?;
    if let Some(family) = first.family.as_deref() {
        if !family.trim().is_empty() {
            return Ok(family.trim());
        }
    }
    first
        .raw
        .as_deref()
        .and_then(|raw| raw.split_whitespace().last())
        .ok_or(Error::EmptyFamilyKey)
}

/// Builds the exact-match key for a record. Rejects records whose title or
/// family name normalizes to the empty string.
pub fn build_match_key(title: &str, year: i32, authors: &[AuthorName]) -> Result<MatchKey> {
    let norm_title = normalize_text(title);
    if norm_title.is_empty() {
        return Err(Error::EmptyTitleKey(title.to_string()));
    }
    let family = first_author_family(authors)?;
    let norm_family = normalize_text(family);
    if norm_family.is_empty() {
        return Err(Error::EmptyFamilyKey);
    }
    Ok(MatchKey {
        norm_title,
        year,
        norm_family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accents_fold_to_ascii() {
        assert_eq!(normalize_text("François"), "francois");
        assert_eq!(normalize_text("Müller"), "muller");
        assert_eq!(normalize_text("Großmann"), "grossmann");
        assert_eq!(normalize_text("Ølberg"), "olberg");
        assert_eq!(normalize_text("Dvořáková"), "dvorakova");
    }

    #[test]
    fn punctuation_and_spaces_stripped() {
        assert_eq!(normalize_text("Deep-Learning: A Survey!"), "deeplearningasurvey");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("under_score 42"), "under_score42");
    }

    #[test]
    fn unmappable_scripts_dropped() {
        assert_eq!(normalize_text("機械学習"), "");
        assert_eq!(normalize_text("ml 機械"), "ml");
    }

    #[test]
    fn doi_prefixes_stripped() {
        assert_eq!(
            normalize_doi("https://doi.org/10.1002/2016JD026252").unwrap(),
            "10.1002/2016jd026252"
        );
        assert_eq!(
            normalize_doi("10.1002/2016jd026252/abstract").unwrap(),
            "10.1002/2016jd026252/abstract"
        );
        assert_eq!(normalize_doi("   doi:10.1088/0031-8949 ").unwrap(), "10.1088/0031-8949");
        assert_eq!(
            normalize_doi("http://dx.doi.org/10.1000/ABC").unwrap(),
            "10.1000/abc"
        );
    }

    #[test]
    fn empty_doi_rejected() {
        assert!(matches!(normalize_doi("  doi:  "), Err(Error::EmptyDoi(_))));
        assert!(matches!(normalize_doi(""), Err(Error::EmptyDoi(_))));
    }

    #[test]
    fn missing_day_becomes_first_of_month() {
        let d = impute_publication_date(2017, Some(9), None).unwrap();
        assert_eq!(d, CalendarDate::new(2017, 9, 1).unwrap());
    }

    #[test]
    fn missing_month_rejected() {
        assert!(matches!(
            impute_publication_date(2017, None, None),
            Err(Error::MissingMonth(2017))
        ));
    }

    #[test]
    fn complete_date_passes_through() {
        let d = impute_publication_date(2017, Some(9), Some(14)).unwrap();
        assert_eq!(d, CalendarDate::new(2017, 9, 14).unwrap());
    }

    #[test]
    fn invalid_day_rejected() {
        assert!(impute_publication_date(2017, Some(2), Some(29)).is_err());
    }

    #[test]
    fn family_from_explicit_field() {
        let authors = vec![AuthorName {
            given: Some("Petr".into()),
            family: Some("Fischer".into()),
            raw: None,
        }];
        assert_eq!(first_author_family(&authors).unwrap(), "Fischer");
    }

    #[test]
    fn family_from_raw_last_token() {
        let authors = vec![AuthorName {
            raw: Some("Marie Dvorakova".into()),
            ..Default::default()
        }];
        assert_eq!(first_author_family(&authors).unwrap(), "Dvorakova");

        let authors = vec![AuthorName {
            raw: Some("  Ada   Lovelace  ".into()),
            ..Default::default()
        }];
        assert_eq!(first_author_family(&authors).unwrap(), "Lovelace");
    }

    #[test]
    fn family_missing_rejected() {
        assert!(matches!(first_author_family(&[]), Err(Error::NoAuthors)));
        let authors = vec![AuthorName {
            given: Some("Ada".into()),
            ..Default::default()
        }];
        assert!(first_author_family(&authors).is_err());
    }

    #[test]
    fn match_key_built_from_normalized_parts() {
        let authors = vec![AuthorName {
            family: Some("Müller".into()),
            ..Default::default()
        }];
        let key = build_match_key("François & Co.", 2017, &authors).unwrap();
        assert_eq!(key.norm_title, "francoisco");
        assert_eq!(key.year, 2017);
        assert_eq!(key.norm_family, "muller");

        let authors = vec![AuthorName {
            family: Some("B".into()),
            ..Default::default()
        }];
        let key = build_match_key("A", 2013, &authors).unwrap();
        assert_eq!((key.norm_title.as_str(), key.year, key.norm_family.as_str()), ("a", 2013, "b"));
    }

    #[test]
    fn match_key_empty_title_rejected() {
        let authors = vec![AuthorName {
            family: Some("Ng".into()),
            ..Default::default()
        }];
        assert!(matches!(
            build_match_key("!!!", 2015, &authors),
            Err(Error::EmptyTitleKey(_))
        ));
    }

    proptest! {
        #[test]
        fn normalize_text_idempotent(s in "\\PC*") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn normalize_text_alphabet(s in "\\PC*") {
            for c in normalize_text(&s).chars() {
                prop_assert!(c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
            }
        }

        #[test]
        fn normalize_doi_idempotent(s in "[ -~]{1,40}") {
            if let Ok(once) = normalize_doi(&s) {
                prop_assert_eq!(normalize_doi(&once).unwrap(), once);
            }
        }

        #[test]
        fn impute_never_invents_month(year in 2013..2019i32, month in 1..13u32, day in proptest::option::of(1..29u32)) {
            let d = impute_publication_date(year, Some(month), day).unwrap();
            prop_assert_eq!(d.month(), month);
        }
    }
}
