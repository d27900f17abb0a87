use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use misuse_core::bench::experiment::ExperimentKind;
use misuse_core::config::PartialConfig;
use misuse_core::par::Execution;
use misuse_core::pipeline::Pipeline;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo")
}

fn pipeline(ws: &Path) -> Pipeline {
    let cfg = PartialConfig {
        dataset: Some(fixture()),
        workspace: Some(ws.to_owned()),
        ..Default::default()
    }
    .resolve()
    .unwrap();
    Pipeline::new(cfg, Execution::Parallel).unwrap()
}

fn pairs(hits: impl IntoIterator<Item = (String, String)>) -> BTreeSet<(String, String)> {
    hits.into_iter().collect()
}

fn expected(rows: &[(&str, &[&str])]) -> BTreeSet<(String, String)> {
    rows.iter()
        .flat_map(|(d, ms)| ms.iter().map(move |m| (d.to_string(), m.to_string())))
        .collect()
}

#[test]
fn rub_hits_per_detector() {
    let ws = tempfile::tempdir().unwrap();
    let rub = pipeline(ws.path()).run_rub(None).unwrap().result;
    assert_eq!(rub.failed_runs(), 0);
    assert_eq!(rub.runs.len(), 13 * 4);
    let got = pairs(rub.hits.iter().map(|h| (h.detector_id.clone(), h.misuse_id.clone())));
    let want = expected(&[
        ("call-pair", &["demo-001", "demo-002", "demo-003", "demo-011", "demo-012"]),
        ("call-set", &["demo-001", "demo-002", "demo-011", "demo-012"]),
        ("temporal", &["demo-001", "demo-003", "demo-004", "demo-011", "demo-012"]),
        ("type-usage", &["demo-001", "demo-002", "demo-011", "demo-012"]),
    ]);
    assert_eq!(got, want);
    // Only potential hits are exported, each tied to its misuse.
    assert!(rub.findings.iter().all(|f| f.misuse.is_some()));
    assert!(rub.findings.iter().all(|f| rub.hits.iter().any(|h| h.finding_id == f.id)));
}

#[test]
fn p_findings_point_at_planted_misuses() {
    let ws = tempfile::tempdir().unwrap();
    let p = pipeline(ws.path()).run_p().unwrap().result;
    assert_eq!(p.failed_runs(), 0);
    let classes = |det: &str| -> BTreeSet<String> {
        p.findings
            .iter()
            .filter(|f| f.detector_id == det)
            .map(|f| Path::new(&f.location.file_path).file_stem().unwrap().to_string_lossy().into_owned())
            .collect()
    };
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(classes("call-pair"), set(&["SummaryExport"]));
    assert_eq!(classes("call-set"), set(&["AuditExport", "BackupExport"]));
    assert_eq!(classes("type-usage"), set(&["AuditExport", "BackupExport"]));
    assert_eq!(
        classes("temporal"),
        set(&["ArchiveExport", "AuditExport", "BackupExport", "LedgerExport", "MetricsExport", "SummaryExport"])
    );
    // Findings are ranked from 1 within each run.
    for f in &p.findings {
        assert!(f.rank >= 1);
    }
}

#[test]
fn r_hits_known_misuses() {
    let ws = tempfile::tempdir().unwrap();
    let r = pipeline(ws.path()).run_r().unwrap().result;
    let got = pairs(r.hits.iter().map(|h| (h.detector_id.clone(), h.misuse_id.clone())));
    let want = expected(&[
        ("call-pair", &["inv-002"]),
        ("call-set", &["inv-001", "inv-003"]),
        ("temporal", &["inv-001", "inv-002", "inv-003"]),
        ("type-usage", &["inv-001", "inv-003"]),
    ]);
    assert_eq!(got, want);
}

#[test]
fn single_misuse_rub_merges_into_existing_results() {
    let ws = tempfile::tempdir().unwrap();
    let p = pipeline(ws.path());
    p.run_rub(Some("demo-001")).unwrap();
    p.run_rub(Some("demo-012")).unwrap();
    let stored = p.load_result(ExperimentKind::Rub).unwrap();
    let misuses: BTreeSet<String> = stored.runs.iter().filter_map(|r| r.misuse.clone()).collect();
    assert_eq!(misuses, ["demo-001", "demo-012"].map(String::from).into());
    assert!(p.run_rub(Some("no-such-misuse")).is_err());
}
