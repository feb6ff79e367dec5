//! Constructs a privileged app's content security policy refuses to run.

use super::{Finding, RuleId};
use crate::catalog::Severity;
use crate::dataflow::{DefUseGraph, Site};
use crate::package::{enumerate_scripts, AppPackage, Category};

fn describe(id: &str) -> &str {
    match id {
        "eval" => "eval() interprets a string as code",
        "function_ctor" | "function_call" => "the Function constructor interprets a string as code",
        "string_timer_timeout" => "setTimeout with a string argument interprets it as code",
        "string_timer_interval" => "setInterval with a string argument interprets it as code",
        "inline_script" => "inline <script> blocks do not run under the CSP",
        _ => "construct violates the CSP",
    }
}

pub fn check_csp_violations(g: &DefUseGraph, pkg: &AppPackage) -> Vec<Finding> {
    let severity = match pkg.manifest.category {
        Category::Privileged | Category::Certified => Severity::Error,
        Category::Web => Severity::Info,
    };
    let mut sites: Vec<(&str, Site)> = g.labels.csp.iter().map(|c| (c.id.as_str(), c.site)).collect();
    for s in enumerate_scripts(pkg).into_iter().filter(|s| s.inline) {
        sites.push(("inline_script", Site { file: s.file, span: s.range }));
    }
    sites
        .into_iter()
        .map(|(id, site)| {
            let mut f = Finding::at(RuleId::CspViolation, pkg, site, format!("{id}: {}", describe(id)));
            f.severity = severity;
            f
        })
        .collect()
}
