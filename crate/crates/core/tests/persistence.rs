//! Branch and sheet files on disk.

use whitham_core::continuation::{continue_branch, outward_tangent, switch_at_simple, ContinuationConfig, Origin};
use whitham_core::io::{
    branch_to_string, convergence_map_csv, file_kind, read_branch, read_sheet, sheet_to_string, sidecar_path,
    write_branch, write_sheet, write_sidecar,
};
use whitham_core::symbol::{critical_T, find_double_point, simple_bifurcation_points};
use whitham_core::twodim::{sample_sheet, SheetOptions};
use whitham_core::{Error, SymbolParams};

fn branch() -> (whitham_core::continuation::Branch, ContinuationConfig) {
    let p = SymbolParams::new(0.5, 1.0).unwrap();
    let bp = simple_bifurcation_points(&p, 1)[0];
    let start = switch_at_simple(&bp, 0.01, 1.0, 16, 1e-13, 30).unwrap().state;
    let dir = outward_tangent(&start, 1).unwrap();
    let cfg = ContinuationConfig { ds: 0.005, ds_max: 0.01, max_steps: 6, ..Default::default() };
    (continue_branch(&start, &dir, Origin::Bifurcation { point: bp }, &cfg).unwrap(), cfg)
}

#[test]
fn branch_file_round_trips_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.jsonl");
    let (b, cfg) = branch();
    write_branch(&path, &b, &cfg).unwrap();
    let (b2, cfg2) = read_branch(&path).unwrap();
    assert_eq!(b2, b);
    assert_eq!(cfg2, cfg);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(branch_to_string(&b2, &cfg2), text);
    assert_eq!(file_kind(&text).unwrap(), "branch");
}

#[test]
fn sheet_file_round_trips_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let base = find_double_point(critical_T(1.0, 2.0).unwrap(), 1, 2).unwrap();
    let opts = SheetOptions::default();
    let sheet = sample_sheet(&base, &[0.005, 0.01], &[0.1, 1.6, 3.0], &opts).unwrap();
    write_sheet(&path, &sheet, &opts).unwrap();
    let (s2, o2) = read_sheet(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(sheet_to_string(&s2, &o2), text);
    assert_eq!(file_kind(&text).unwrap(), "sheet");
    let csv = convergence_map_csv(&s2);
    assert_eq!(csv.lines().next().unwrap(), "rho,theta,converged");
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn corrupted_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.jsonl");
    let (b, cfg) = branch();
    write_branch(&path, &b, &cfg).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].replacen("\"c\":", "\"c\":\"oops\",\"x\":", 1);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    match read_branch(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a parse error, got {other:?}"),
    }
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(read_branch(&path), Err(Error::Parse { .. })));
}

#[test]
fn sidecar_holds_metadata_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.jsonl");
    let (b, cfg) = branch();
    write_branch(&path, &b, &cfg).unwrap();
    write_sidecar(&path, &serde_json::json!({"elapsed_s": 1.5})).unwrap();
    assert!(sidecar_path(&path).exists());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), branch_to_string(&b, &cfg));
}
