//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod support {
    pub mod corpus;
    #[path = "../../../core/tests/support/oracle.rs"]
    pub mod oracle;
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use appsentry_core::catalog::Severity;
use appsentry_core::package::{parse_manifest, AppPackage, SourceFile};
use appsentry_core::report::{permission_rows, CorpusDocument, FindingsDocument};
use appsentry_core::rules::{Finding, RuleConfig, RuleId};
use appsentry_core::scan::{ScanSettings, Scanner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::corpus;

type Check = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/apps").join(name)
}

fn appsentry(args: &[&str]) -> (Output, Duration) {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_appsentry")).args(args).output().expect("run appsentry");
    (out, t.elapsed())
}

fn scan_json(name: &str, extra: &[&str]) -> Result<(Vec<Finding>, Duration), String> {
    let path = fixture(name);
    let mut args = vec!["scan", path.to_str().unwrap(), "--format", "json"];
    args.extend_from_slice(extra);
    let (out, took) = appsentry(&args);
    if out.status.code() == Some(2) {
        return Err(format!("{name}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let doc: FindingsDocument = serde_json::from_slice(&out.stdout).map_err(|e| format!("{name}: {e}"))?;
    Ok((doc.findings, took))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn count(findings: &[Finding], rule: RuleId) -> usize {
    findings.iter().filter(|f| f.rule_id == rule).count()
}

fn criterion_1() -> Check {
    let (unchecked, t2) = scan_json("unchecked", &["--paper-strict"])?;
    let (checked, t3) = scan_json("checked", &["--paper-strict"])?;
    ensure(count(&unchecked, RuleId::OriginValidation) == 1 && unchecked.len() == 1, || format!("unchecked: {unchecked:?}"))?;
    ensure(checked.is_empty(), || format!("checked: {checked:?}"))?;
    let slowest = t2.max(t3);
    ensure(slowest < Duration::from_secs(1), || format!("took {slowest:?}"))?;
    Ok(format!("unchecked 1 finding, checked none, slowest {} ms", slowest.as_millis()))
}

fn criterion_2() -> Check {
    let (f, took) = scan_json("mixed", &[])?;
    ensure(f.len() == 1 && f[0].rule_id == RuleId::HtmlInjection, || format!("mixed: {f:?}"))?;
    let src = std::fs::read_to_string(fixture("mixed").join("app.js")).unwrap();
    let f = &f[0];
    let text = &src[f.span.byte_start as usize..f.span.byte_end as usize];
    let unfiltered = src.find("function unfiltered").unwrap();
    let filtered = src.find("function filtered").unwrap();
    let inside = (unfiltered..filtered).contains(&(f.span.byte_start as usize));
    ensure(text.starts_with("element.innerHTML") && inside, || format!("primary span {text:?}"))?;
    let cited = f.evidence.iter().find(|e| e.role == "filtered_sink").map(|e| e.span.byte_start as usize);
    ensure(cited.is_some_and(|b| b >= filtered), || format!("evidence {:?}", f.evidence))?;
    ensure(f.evidence.iter().any(|e| e.role == "filter"), || "no filter evidence".into())?;
    let (none, t1) = scan_json("mixed-nofilter", &[])?;
    let (both, t2) = scan_json("mixed-allfiltered", &[])?;
    ensure(none.is_empty() && both.is_empty(), || format!("variants: {none:?} {both:?}"))?;
    let slowest = took.max(t1).max(t2);
    ensure(slowest < Duration::from_secs(1), || format!("took {slowest:?}"))?;
    Ok(format!("line {} flagged, variants clean, slowest {} ms", f.span.start_line, slowest.as_millis()))
}

fn scan_files(files: &[(&str, &str)]) -> Vec<Finding> {
    let manifest = parse_manifest(br#"{"name":"m","type":"privileged"}"#).unwrap();
    let files = files.iter().map(|(p, s)| SourceFile::new(*p, s.as_bytes())).collect();
    let pkg = AppPackage::from_files("m", manifest, files);
    let s = Scanner::new(
        appsentry_core::catalog::default_catalog(),
        appsentry_core::catalog::default_permission_map(),
        ScanSettings { rules: RuleConfig::default(), ..ScanSettings::default() },
    )
    .unwrap();
    s.scan_package(&pkg).summary.findings
}

fn criterion_3() -> Check {
    let hex = std::fs::read_to_string(fixture("hex").join("app.js")).unwrap();
    let escaped = r#"["\x69\x6e\x6e\x65\x72\x48\x54\x4d\x4c"]"#;
    ensure(hex.contains(escaped), || "fixture lacks the escaped name".into())?;
    let plain = hex.replace(escaped, ".innerHTML");
    let key = |f: &Finding| (f.rule_id, f.severity, f.span.start_line, f.span.start_col, f.evidence.len());
    let a: Vec<_> = scan_files(&[("app.js", &hex)]).iter().map(key).collect();
    let b: Vec<_> = scan_files(&[("app.js", &plain)]).iter().map(key).collect();
    let (dir, _) = scan_json("hex", &[])?;
    ensure(!a.is_empty() && a == b, || format!("escaped {a:?} plain {b:?}"))?;
    ensure(dir.iter().map(key).collect::<Vec<_>>() == a, || "directory scan differs".into())?;
    Ok(format!("{} finding(s), identical to plain innerHTML", a.len()))
}

fn criterion_4() -> Check {
    let path = fixture("plaintext");
    let (out, _) = appsentry(&["scan", path.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    ensure(lines.len() == 2, || format!("output: {text}"))?;
    for (line, file) in lines.iter().zip(["concat.js:4", "literal.js:2"]) {
        ensure(line.contains("plaintext_http warning") && line.contains(file), || format!("line {line:?}"))?;
    }
    let (f, _) = scan_json("plaintext", &[])?;
    ensure(f.iter().all(|f| f.severity == Severity::Warning), || "severity".into())?;
    ensure(!f.iter().any(|f| f.span.file == "secure.js"), || "https flagged".into())?;
    Ok("two http warnings, https clean".into())
}

fn criterion_5() -> Check {
    let (plain, _) = scan_json("sysxhr-plain", &[])?;
    let (moz, _) = scan_json("sysxhr-mozsystem", &[])?;
    let (dead, _) = scan_json("sysxhr-deadcode", &[])?;
    ensure(count(&plain, RuleId::Overpermission) == 1, || format!("plain: {plain:?}"))?;
    ensure(count(&moz, RuleId::Overpermission) == 0, || format!("mozSystem: {moz:?}"))?;
    ensure(count(&dead, RuleId::Overpermission) == 0, || format!("dead code: {dead:?}"))?;
    Ok("flagged without mozSystem only; dead code suppresses".into())
}

const PRINTED_SHARES: &[(&str, f64)] = &[
    ("systemXHR", 24.9),
    ("geolocation", 18.6),
    ("storage", 9.5),
    ("desktop-notification", 9.3),
    ("device-storage:sdcard", 8.9),
    ("browser", 5.4),
    ("audio-channel-content", 4.9),
    ("device-storage:pictures", 4.7),
    ("alarms", 3.7),
    ("contacts", 2.8),
    ("tcp-socket", 1.8),
    ("mobilenetwork", 1.2),
    ("device-storage:videos", 1.1),
    ("8 other permissions", 3.3),
];

fn corpus_doc(dir: &Path, mode: &str, extra: &[&str]) -> Result<CorpusDocument, String> {
    let mut args = vec![mode, dir.to_str().unwrap(), "--format", "json"];
    args.extend_from_slice(extra);
    let (out, _) = appsentry(&args);
    ensure(out.status.code() != Some(2), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn criterion_6() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let apps = corpus::write_permission_corpus(tmp.path());
    let stats = corpus_doc(tmp.path(), "stats", &[])?.stats;
    ensure(stats.total_permission_requests == 570, || format!("{} requests", stats.total_permission_requests))?;
    let rows = permission_rows(&stats, Some(13));
    ensure(rows.len() == PRINTED_SHARES.len(), || format!("{} rows", rows.len()))?;
    for (row, (label, want)) in rows.iter().zip(PRINTED_SHARES) {
        ensure(row.label == *label && (row.share - want).abs() <= 0.05 + 1e-9, || {
            format!("{} {} vs {label} {want}", row.label, row.share)
        })?;
    }
    let sx = stats.permission_request_shares["systemXHR"];
    let (text, _) = appsentry(&["stats", tmp.path().to_str().unwrap()]);
    let text = String::from_utf8_lossy(&text.stdout);
    ensure(text.contains("24.9%"), || text.to_string())?;
    Ok(format!("{apps} apps, 570 requests, all 14 rows within 0.05 (systemXHR {sx:.1}%)"))
}

fn criterion_7() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    corpus::write_handler_corpus(tmp.path(), 83, 56, 40);
    let mut seen = Vec::new();
    for extra in [&[][..], &["--paper-strict"][..]] {
        let s = corpus_doc(tmp.path(), "stats", extra)?.stats;
        ensure(s.handler_apps == 83 && s.nonvalidating_handler_apps == 56, || {
            format!("{}/{} {extra:?}", s.nonvalidating_handler_apps, s.handler_apps)
        })?;
        seen.push(s.total_apps);
    }
    Ok(format!("56/83 of {} apps, with and without --paper-strict", seen[0]))
}

fn criterion_8() -> Check {
    use support::oracle::{analyze_text, generate, interpret, observed, render};
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let (mut pairs, mut consts) = (0, 0);
    let n = 1000;
    for i in 0..n {
        let prog = generate(&mut rng);
        ensure(prog.len() <= 30, || "program too long".into())?;
        let src = render(&prog);
        let want = interpret(&prog);
        let got = observed(&analyze_text(&src));
        ensure(got == want, || format!("program {i} differs:\n{src}"))?;
        pairs += want.reaching.values().flatten().count();
        consts += want.constants.len();
    }
    Ok(format!("{n} programs, {pairs} uses and {consts} constants match"))
}

/// Criteria 9 and 10 share the generated corpus.
fn criteria_9_10() -> (Check, Check) {
    let tmp = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let info = corpus::write_perf_corpus(tmp.path(), 570);
    let generated = t.elapsed();
    let dir = tmp.path().to_str().unwrap();

    // a single library-bundling app
    let lib_app = tmp.path().join(&info.library_apps[1]);
    let (single, single_t) = appsentry(&["scan", lib_app.to_str().unwrap(), "--format", "json"]);

    let mut docs = Vec::new();
    let mut times = Vec::new();
    let mut failure = None;
    for _ in 0..3 {
        for p in ["1", "8"] {
            let (out, took) = appsentry(&["corpus", dir, "--format", "json", "--parallelism", p]);
            if out.status.code() == Some(2) {
                failure = Some(String::from_utf8_lossy(&out.stderr).into_owned());
            }
            times.push((p, took));
            docs.push(out.stdout);
        }
    }
    let (text1, _) = appsentry(&["stats", dir, "--parallelism", "1"]);
    let (text8, _) = appsentry(&["stats", dir, "--parallelism", "8"]);

    let c9 = (|| {
        ensure(failure.is_none(), || failure.clone().unwrap())?;
        ensure(single.status.code() != Some(2), || "single app scan failed".into())?;
        let doc: CorpusDocument = serde_json::from_slice(&docs[0]).map_err(|e| e.to_string())?;
        let s = &doc.stats;
        ensure(s.total_apps == 570 && s.load_failures == 0, || format!("{} apps, {} failures", s.total_apps, s.load_failures))?;
        ensure(info.library_apps.len() * 10 >= 570 && info.library_bytes >= 250 * 1024, || "library mix".into())?;
        let corpus_t = times.iter().map(|(_, t)| *t).max().unwrap();
        ensure(corpus_t < Duration::from_secs(300), || format!("corpus took {corpus_t:?}"))?;
        ensure(single_t < Duration::from_secs(5), || format!("single app took {single_t:?}"))?;
        Ok(format!(
            "570 apps ({} MB of scripts, {} with a {} KB library) in {:.1} s worst of 6 runs; library app {} ms; generation {:.1} s",
            info.script_bytes / (1 << 20),
            info.library_apps.len(),
            info.library_bytes / 1024,
            corpus_t.as_secs_f64(),
            single_t.as_millis(),
            generated.as_secs_f64(),
        ))
    })();
    let c10 = (|| {
        ensure(failure.is_none(), || failure.clone().unwrap())?;
        ensure(docs.iter().all(|d| *d == docs[0]), || "corpus documents differ between runs".into())?;
        ensure(text1.stdout == text8.stdout, || "stats tables differ".into())?;
        let doc: CorpusDocument = serde_json::from_slice(&docs[0]).map_err(|e| e.to_string())?;
        Ok(format!(
            "6 runs byte-identical ({} bytes, {} findings)",
            docs[0].len(),
            doc.findings.map_or(0, |f| f.len())
        ))
    })();
    (c9, c10)
}

fn main() {
    let quick: [(u32, fn() -> Check); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut results: Vec<(u32, Check)> = quick.iter().map(|(n, f)| (*n, f())).collect();
    let (c9, c10) = criteria_9_10();
    results.push((9, c9));
    results.push((10, c10));
    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(msg) => println!("criterion {n:>2}: PASS  {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
