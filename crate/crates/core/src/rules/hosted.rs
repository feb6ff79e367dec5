//! Hosted apps whose manifest is fetched over plaintext HTTP.

use serde::Serialize;
use url::Url;

use super::{Finding, RuleId};
use crate::package::{HostedRecord, HOSTED_RECORDS_NAME};
use crate::span::SourceSpan;

/// A hosted record whose manifest URL does not parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MalformedUrl {
    pub url: String,
    pub line: u32,
    pub message: String,
}

fn record_span(record: &HostedRecord) -> SourceSpan {
    SourceSpan {
        file: HOSTED_RECORDS_NAME.to_string(),
        start_line: record.line,
        start_col: 1,
        end_line: record.line,
        end_col: record.manifest_url.chars().count() as u32 + 1,
        byte_start: 0,
        byte_end: record.manifest_url.len() as u32,
    }
}

pub fn check_hosted_manifest_scheme(record: &HostedRecord, app_id: &str) -> Result<Vec<Finding>, MalformedUrl> {
    let url = Url::parse(&record.manifest_url).map_err(|e| MalformedUrl {
        url: record.manifest_url.clone(),
        line: record.line,
        message: e.to_string(),
    })?;
    if url.scheme() != "http" {
        return Ok(Vec::new());
    }
    let span = record_span(record);
    Ok(vec![Finding {
        rule_id: RuleId::HostedManifestHttp,
        severity: RuleId::HostedManifestHttp.default_severity(),
        app_id: app_id.to_string(),
        span,
        evidence: Vec::new(),
        message: format!("hosted manifest fetched over plaintext HTTP: {}", record.manifest_url),
    }])
}
