//! OAI-PMH ListRecords response parsing: record headers, a small Dublin Core
//! field subset, and the resumption token.

use std::collections::BTreeMap;

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::error::{Error, Result};
use crate::model::CalendarDate;

/// One harvested record: its OAI identifier, header datestamp (truncated to
/// the date), and the Dublin Core fields we keep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OaiRecord {
    pub identifier: String,
    pub datestamp: CalendarDate,
    /// Dublin Core field name (title, creator, date, identifier) to values.
    pub metadata: BTreeMap<String, Vec<String>>,
}

/// One page of a ListRecords response.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OaiPage {
    pub records: Vec<OaiRecord>,
    /// `None` on the final page (absent or empty resumptionToken element).
    pub resumption_token: Option<String>,
    /// Records skipped with a reason; the rest of the page still parses.
    pub record_errors: Vec<String>,
}

const DC_FIELDS: [&str; 4] = ["title", "creator", "date", "identifier"];

/// Parses a ListRecords response. A protocol `noRecordsMatch` error yields an
/// empty page; any other protocol error is surfaced as
/// [`Error::OaiProtocol`]. Malformed XML fails with the byte offset.
pub fn parse_oai_response(xml: &[u8]) -> Result<OaiPage> {
    let mut reader = Reader::from_reader(xml);
    reader.config_mut().trim_text(true);

    let mut page = OaiPage::default();
    let mut buf = Vec::new();

    let mut in_header = false;
    let mut in_metadata = false;
    let mut text_target: Option<String> = None;
    let mut error_code: Option<String> = None;

    // per-record accumulators
    let mut identifier: Option<String> = None;
    let mut datestamp: Option<String> = None;
    let mut metadata: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut token: Option<String> = None;
    let mut saw_token_element = false;

    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| Error::Xml {
            offset: reader.buffer_position() as u64,
            message: e.to_string(),
        })?;
        match event {
            Event::Start(ref e) => {
                let name = e.local_name();
                let local = std::str::from_utf8(name.as_ref()).unwrap_or("");
                match local {
                    "record" => {
                        identifier = None;
                        datestamp = None;
                        metadata = BTreeMap::new();
                    }
                    "header" => in_header = true,
                    "metadata" => in_metadata = true,
                    "identifier" if in_header => text_target = Some("header/identifier".into()),
                    "datestamp" if in_header => text_target = Some("header/datestamp".into()),
                    "resumptionToken" => {
                        saw_token_element = true;
                        text_target = Some("resumptionToken".into());
                    }
                    "error" => {
                        error_code = Some(attr(e, "code").unwrap_or_default());
                        text_target = Some("error".into());
                    }
                    field if in_metadata && DC_FIELDS.contains(&field) => {
                        text_target = Some(format!("dc/{field}"));
                    }
                    _ => {}
                }
            }
            Event::Empty(ref e) => {
                let name = e.local_name();
                if name.as_ref() == b"error" {
                    let code = attr(e, "code").unwrap_or_default();
                    if code != "noRecordsMatch" {
                        return Err(Error::OaiProtocol {
                            code,
                            message: String::new(),
                        });
                    }
                }
            }
            Event::Text(ref t) => {
                if let Some(target) = &text_target {
                    let text = t.unescape().map_err(|e| Error::Xml {
                        offset: reader.buffer_position() as u64,
                        message: e.to_string(),
                    })?;
                    let text = text.trim().to_string();
                    match target.as_str() {
                        "header/identifier" => identifier = Some(text),
                        "header/datestamp" => datestamp = Some(text),
                        "resumptionToken" => {
                            if !text.is_empty() {
                                token = Some(text);
                            }
                        }
                        "error" => {
                            let code = error_code.clone().unwrap_or_default();
                            if code != "noRecordsMatch" {
                                return Err(Error::OaiProtocol {
                                    code,
                                    message: text,
                                });
                            }
                        }
                        dc => {
                            let field = dc.trim_start_matches("dc/").to_string();
                            metadata.entry(field).or_default().push(text);
                        }
                    }
                }
            }
            Event::End(ref e) => {
                let name = e.local_name();
                let local = std::str::from_utf8(name.as_ref()).unwrap_or("");
                match local {
                    "header" => in_header = false,
                    "metadata" => in_metadata = false,
                    "error" => {
                        // empty-bodied error element with a real code
                        if let Some(code) = error_code.take() {
                            if code != "noRecordsMatch" {
                                return Err(Error::OaiProtocol {
                                    code,
                                    message: String::new(),
                                });
                            }
                        }
                    }
                    "record" => {
                        match (identifier.take(), datestamp.take()) {
                            (Some(id), Some(stamp)) => match CalendarDate::parse_iso(&stamp) {
                                Ok(date) => page.records.push(OaiRecord {
                                    identifier: id,
                                    datestamp: date,
                                    metadata: std::mem::take(&mut metadata),
                                }),
                                Err(_) => page
                                    .record_errors
                                    .push(format!("record {id}: unparseable datestamp {stamp:?}")),
                            },
                            (Some(id), None) => page
                                .record_errors
                                .push(format!("record {id}: missing header datestamp")),
                            (None, _) => page
                                .record_errors
                                .push("record without header identifier".to_string()),
                        }
                        metadata = BTreeMap::new();
                    }
                    _ => {}
                }
                text_target = None;
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    page.resumption_token = if saw_token_element { token } else { None };
    Ok(page)
}

fn attr(e: &quick_xml::events::BytesStart<'_>, name: &str) -> Option<String> {
    e.attributes().flatten().find_map(|a| {
        (a.key.local_name().as_ref() == name.as_bytes())
            .then(|| String::from_utf8_lossy(&a.value).into_owned())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page_xml(records: &[(&str, &str)], token: Option<&str>) -> String {
        let mut xml = String::from(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<OAI-PMH xmlns="http://www.openarchives.org/OAI/2.0/">
  <responseDate>2019-03-18T00:00:00Z</responseDate>
  <ListRecords>"#,
        );
        for (id, stamp) in records {
            xml.push_str(&format!(
                r#"
    <record>
      <header>
        <identifier>{id}</identifier>
        <datestamp>{stamp}</datestamp>
      </header>
      <metadata>
        <oai_dc:dc xmlns:oai_dc="http://www.openarchives.org/OAI/2.0/oai_dc/"
                   xmlns:dc="http://purl.org/dc/elements/1.1/">
          <dc:title>Title of {id}</dc:title>
          <dc:creator>Fischer, Karl</dc:creator>
          <dc:date>{stamp}</dc:date>
          <dc:identifier>https://example.org/{id}</dc:identifier>
        </oai_dc:dc>
      </metadata>
    </record>"#
            ));
        }
        match token {
            Some(t) => xml.push_str(&format!("\n    <resumptionToken>{t}</resumptionToken>")),
            None => xml.push_str("\n    <resumptionToken></resumptionToken>"),
        }
        xml.push_str("\n  </ListRecords>\n</OAI-PMH>\n");
        xml
    }

    #[test]
    fn two_records_with_token() {
        let xml = page_xml(
            &[("oai:repo:1", "2016-03-15T10:00:00Z"), ("oai:repo:2", "2017-01-02")],
            Some("t1"),
        );
        let page = parse_oai_response(xml.as_bytes()).unwrap();
        assert_eq!(page.records.len(), 2);
        assert_eq!(page.resumption_token.as_deref(), Some("t1"));
        assert!(page.record_errors.is_empty());

        let first = &page.records[0];
        assert_eq!(first.identifier, "oai:repo:1");
        assert_eq!(first.datestamp, CalendarDate::new(2016, 3, 15).unwrap());
        assert_eq!(first.metadata["title"], vec!["Title of oai:repo:1"]);
        assert_eq!(first.metadata["creator"], vec!["Fischer, Karl"]);
    }

    #[test]
    fn final_page_empty_token_element() {
        let xml = page_xml(&[("oai:repo:1", "2016-03-15")], None);
        let page = parse_oai_response(xml.as_bytes()).unwrap();
        assert_eq!(page.resumption_token, None);
    }

    #[test]
    fn no_records_match_is_empty_page() {
        let xml = r#"<?xml version="1.0"?>
<OAI-PMH xmlns="http://www.openarchives.org/OAI/2.0/">
  <error code="noRecordsMatch"/>
</OAI-PMH>"#;
        let page = parse_oai_response(xml.as_bytes()).unwrap();
        assert!(page.records.is_empty());
        assert_eq!(page.resumption_token, None);
    }

    #[test]
    fn bad_resumption_token_is_protocol_error() {
        let xml = r#"<?xml version="1.0"?>
<OAI-PMH xmlns="http://www.openarchives.org/OAI/2.0/">
  <error code="badResumptionToken">token expired</error>
</OAI-PMH>"#;
        match parse_oai_response(xml.as_bytes()) {
            Err(Error::OaiProtocol { code, .. }) => assert_eq!(code, "badResumptionToken"),
            other => panic!("expected protocol error, got {other:?}"),
        }
    }

    #[test]
    fn missing_datestamp_is_record_level_error() {
        let xml = r#"<?xml version="1.0"?>
<OAI-PMH xmlns="http://www.openarchives.org/OAI/2.0/">
  <ListRecords>
    <record>
      <header><identifier>oai:repo:broken</identifier></header>
    </record>
    <record>
      <header>
        <identifier>oai:repo:good</identifier>
        <datestamp>2018-01-01</datestamp>
      </header>
    </record>
  </ListRecords>
</OAI-PMH>"#;
        let page = parse_oai_response(xml.as_bytes()).unwrap();
        assert_eq!(page.records.len(), 1);
        assert_eq!(page.records[0].identifier, "oai:repo:good");
        assert_eq!(page.record_errors.len(), 1);
        assert!(page.record_errors[0].contains("oai:repo:broken"));
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let xml = b"<OAI-PMH><ListRecords><record></ListRecords>";
        match parse_oai_response(xml) {
            Err(Error::Xml { offset, .. }) => assert!(offset > 0),
            other => panic!("expected XML error, got {other:?}"),
        }
    }
}
