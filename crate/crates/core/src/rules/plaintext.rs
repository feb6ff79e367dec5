//! XHR requests opened over plaintext HTTP.

use super::{Finding, RuleId};
use crate::dataflow::DefUseGraph;
use crate::package::AppPackage;

const NOT_XHR: [&str; 3] = ["window", "document", "self"];

pub fn check_plaintext_http(g: &DefUseGraph, pkg: &AppPackage) -> Vec<Finding> {
    let mut out = Vec::new();
    for call in &g.calls {
        if call.bare || call.is_new || call.name.as_deref() != Some("open") || call.args.len() < 2 {
            continue;
        }
        if call.receiver_chain.as_deref().is_some_and(|c| NOT_XHR.contains(&c)) {
            continue;
        }
        if let Some(recv) = call.receiver {
            let host = g.types_of(recv).iter().any(|t| g.types.is_host(*t, "Window") || g.types.is_host(*t, "Document"));
            if host {
                continue;
            }
        }
        let Some(url) = g.const_str(call.args[1]) else { continue };
        if !url.starts_with("http://") {
            continue;
        }
        out.push(
            Finding::at(RuleId::PlaintextHttp, pkg, call.site, format!("request opened over plaintext HTTP: {url}"))
                .with(pkg, "url", call.arg_sites[1]),
        );
    }
    out
}
