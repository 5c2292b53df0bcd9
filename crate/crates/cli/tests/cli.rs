use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use enclosure_atlas_core::fixtures;
use enclosure_atlas_core::identifiability::Witness;
use enclosure_atlas_core::io::ReportFile;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_enclosure-atlas"));
    c.env_remove("ENCLOSURE_ATLAS_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn example(dir: &TempDir, name: &str) -> PathBuf {
    let p = dir.path().join(format!("{name}.json"));
    let o = run(&["examples", name, "-o", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    p
}

fn report(args: &[&str], path: &Path) -> (i32, ReportFile) {
    let mut all = args.to_vec();
    all.push(path.to_str().unwrap());
    let o = run(&all);
    let r = ReportFile::parse(&stdout(&o)).unwrap_or_else(|e| panic!("{e}\n{}", stderr(&o)));
    (code(&o), r)
}

#[test]
fn examples_emit_the_exact_fixtures() {
    for name in fixtures::NAMES {
        let o = run(&["examples", name]);
        assert_eq!(code(&o), 0);
        assert_eq!(stdout(&o), fixtures::fixture(name).unwrap().to_json());
    }
}

#[test]
fn examples_without_name_lists_them() {
    let o = run(&["examples"]);
    assert_eq!(code(&o), 0);
    for name in fixtures::NAMES {
        assert!(stdout(&o).contains(name));
    }
}

#[test]
fn unknown_example_lists_fixtures() {
    let o = run(&["examples", "unknown"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("unknown"));
    for name in fixtures::NAMES {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn analyze_unfaithful_example() {
    let dir = TempDir::new().unwrap();
    let (c, r) = report(&["analyze"], &example(&dir, "unfaithful-2d"));
    assert_eq!(c, 0);
    let d = r.decomposition.unwrap();
    assert_eq!(d.transient.rank, 1);
    assert_eq!(d.unique_enclosures.len(), 1);
    assert!(d.families.is_empty());
    // P_D = |e2><e2|.
    let p = &d.transient.matrix.0;
    assert!((p[1][1].re - 1.0).abs() < 1e-9 && p[0][0].norm() < 1e-9);
    assert!(r.verification.unwrap().passed);
    assert!(r.vectorization.contains("column-stacking"));
}

#[test]
fn analyze_zero_generator_finds_one_family() {
    let dir = TempDir::new().unwrap();
    let (c, r) = report(&["analyze"], &example(&dir, "zero-generator-2d"));
    assert_eq!(c, 0);
    let d = r.decomposition.unwrap();
    assert!(!d.is_unique);
    assert_eq!(d.families.len(), 1);
    assert_eq!(d.families[0].members.len(), 2);
    assert!(d.unique_enclosures.is_empty());
}

#[test]
fn analyze_text_renders_shape() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "two-enclosures-2d");
    let o = run(&["analyze", "--format", "text", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("shape: D(0) + V_a(1) + V_a(1)"), "{}", stdout(&o));
}

#[test]
fn malformed_pair_is_a_parse_error_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.json", r#"{"mode": "lindblad", "dim": 1, "hamiltonian": [[[1]]]}"#);
    let o = run(&["analyze", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("hamiltonian[0][0]"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn missing_file_is_an_input_error() {
    let o = run(&["analyze", "/nonexistent/model.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn mode_mismatch_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let o = run(&["analyze", example(&dir, "two-state-chain").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["oqrw", example(&dir, "faithful-2d").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let p = example(&dir, "rotation-channel");
    let o = run(&["identifiability", "--mode", "continuous", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn invalid_model_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "kraus.json",
        r#"{"mode": "kraus", "dim": 1, "kraus": [[[[0.5, 0]]]]}"#,
    );
    assert_eq!(code(&run(&["analyze", p.to_str().unwrap()])), 2);
    let p = example(&dir, "faithful-2d");
    assert_eq!(code(&run(&["analyze", "--tol-rank", "-1", p.to_str().unwrap()])), 2);
}

#[test]
fn oqrw_two_state_chain() {
    let dir = TempDir::new().unwrap();
    let (c, r) = report(&["oqrw"], &example(&dir, "two-state-chain"));
    assert_eq!(c, 0);
    let o = r.oqrw.unwrap();
    assert!(o.passed);
    // Two-state chain with rates a = q01, b = q10: pi = (b, a) / (a + b).
    let (a, b) = (1.0, 2.0);
    assert_eq!(o.measures.len(), 1);
    assert!((o.measures[0][0] - b / (a + b)).abs() < 1e-12);
    assert!((o.measures[0][1] - a / (a + b)).abs() < 1e-12);
}

#[test]
fn oqrw_row_sum_violation_names_the_row() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "q.json", r#"{"mode": "rates", "dim": 2, "rates": [[-1, 1], [2, -1]]}"#);
    let o = run(&["oqrw", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("row 1"), "{}", stderr(&o));
}

#[test]
fn oqrw_two_block_chain() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "q.json",
        r#"{"mode": "rates", "dim": 4, "rates": [[-1, 1, 0, 0], [3, -3, 0, 0], [0, 0, -2, 2], [0, 0, 0.5, -0.5]]}"#,
    );
    let (c, r) = report(&["oqrw"], &p);
    assert_eq!(c, 0);
    let o = r.oqrw.unwrap();
    assert_eq!(o.classes, vec![vec![0, 1], vec![2, 3]]);
    assert_eq!(r.decomposition.unwrap().unique_enclosures.len(), 2);
    // Per-block two-state solve.
    let solve = |a: f64, b: f64| (b / (a + b), a / (a + b));
    let (x0, x1) = solve(1.0, 3.0);
    let (y2, y3) = solve(2.0, 0.5);
    assert!((o.measures[0][0] - x0).abs() < 1e-10 && (o.measures[0][1] - x1).abs() < 1e-10);
    assert!((o.measures[1][2] - y2).abs() < 1e-10 && (o.measures[1][3] - y3).abs() < 1e-10);
}

#[test]
fn identifiability_two_enclosures_continuous() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "two-enclosures-2d");
    let (c, r) = report(&["identifiability", "--mode", "continuous"], &p);
    assert_eq!(c, 0);
    let i = r.identifiability.unwrap();
    assert!(i.overall);
    assert_eq!(i.pairs.len(), 1);
    assert_eq!(i.pairs[0].witness, Some(Witness::Channel { channel: 0 }));
    // tr((L + L†) |e1><e1|) = 2, tr((L + L†) |e2><e2|) = 0.
    assert!((i.pairs[0].magnitude - 2.0).abs() < 1e-9);
}

#[test]
fn identifiability_rotation_channel_fails() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "rotation-channel");
    let args = ["identifiability", "--mode", "discrete", "--max-len", "6", "--format", "text"];
    let o = run(&[&args[..], &[p.to_str().unwrap()]].concat());
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("none up to 6"), "{}", stdout(&o));
    let (c, r) = report(&["identifiability", "--max-len", "6"], &p);
    assert_eq!(c, 3);
    let i = r.identifiability.unwrap();
    assert!(!i.overall && i.pairs.iter().all(|p| p.magnitude <= 1e-12));
    assert!(r.cross_check.unwrap().is_unique);
}

#[test]
fn qnd_coincident_imaginary_amplitudes_fail_nondegeneracy() {
    let dir = TempDir::new().unwrap();
    // One diffusive channel, c = (i, -i, 1): r = 2 Re c = (0, 0, 2).
    let p = write(
        &dir,
        "qnd.json",
        r#"{"mode": "qnd", "dim": 3, "qnd": {"energies": [0, 1, 2], "amplitudes": [[[0, 1], [0, -1], [1, 0]]], "p": 1}}"#,
    );
    let (c, r) = report(&["identifiability"], &p);
    assert_eq!(c, 3);
    let i = r.identifiability.unwrap();
    let failed: Vec<(usize, usize)> = i.pairs.iter().filter(|p| !p.separated).map(|p| (p.a, p.b)).collect();
    assert_eq!(failed, vec![(0, 1)]);
    let o = run(&["identifiability", "--format", "text", p.to_str().unwrap()]);
    assert!(stdout(&o).contains("pair (0, 1): not separated"), "{}", stdout(&o));
}

#[test]
fn structured_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "faithful-2d");
    let a = run(&["analyze", "--seed", "9", p.to_str().unwrap()]);
    let b = run(&["analyze", "--seed", "9", p.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
    let r = ReportFile::parse(&stdout(&a)).unwrap();
    assert_eq!(r.to_json(), stdout(&a));
}

#[test]
fn seed_precedence() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "faithful-2d");
    let with_env = |args: &[&str]| {
        let o = bin().args(args).arg(&p).env("ENCLOSURE_ATLAS_SEED", "5").output().unwrap();
        ReportFile::parse(&stdout(&o)).unwrap().seed
    };
    assert_eq!(with_env(&["analyze"]), 5);
    assert_eq!(with_env(&["analyze", "--seed", "7"]), 7);
    assert_eq!(report(&["analyze"], &p).1.seed, 0);
}

#[test]
fn tolerance_flags_reach_the_report() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "faithful-2d");
    let (_, r) = report(&["analyze", "--tol-rank", "1e-8", "--tol-residual", "1e-7"], &p);
    assert_eq!(r.tolerances.rank_tol, 1e-8);
    assert_eq!(r.tolerances.residual_tol, 1e-7);
}

#[test]
fn batch_runs_every_file() {
    let dir = TempDir::new().unwrap();
    let a = example(&dir, "faithful-2d");
    let b = example(&dir, "rotation-channel");
    let bad = write(&dir, "bad.json", "{");
    let o = run(&[
        "analyze",
        "--batch",
        "--seed",
        "3",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        bad.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let entries: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let entries = entries.as_array().unwrap();
    assert_eq!(entries.len(), 3);
    assert_eq!(entries[0]["report"]["seed"], 3);
    assert_eq!(entries[1]["report"]["seed"], 4);
    assert_eq!(entries[1]["exit_code"], 0);
    assert!(entries[2]["error"].is_string());

    let out = dir.path().join("reports");
    let o = run(&[
        "analyze",
        "--batch",
        "-o",
        out.to_str().unwrap(),
        a.to_str().unwrap(),
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let r = ReportFile::parse(&std::fs::read_to_string(out.join("rotation-channel.report.json")).unwrap()).unwrap();
    assert_eq!(r.seed, 1);
}

#[test]
fn several_files_need_batch() {
    let dir = TempDir::new().unwrap();
    let a = example(&dir, "faithful-2d");
    let o = run(&["analyze", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn every_fixture_reproduces_its_golden_result() {
    let dir = TempDir::new().unwrap();
    let expect = [
        ("faithful-2d", "analyze", "D(0) + V_a(2)"),
        ("unfaithful-2d", "analyze", "D(1) + V_a(1)"),
        ("two-enclosures-2d", "analyze", "D(0) + V_a(1) + V_a(1)"),
        ("zero-generator-2d", "analyze", "D(0) + [V_b,g(1) + V_b,g(1)]"),
        ("rotation-channel", "analyze", "D(0) + V_a(1) + V_a(1)"),
        ("two-state-chain", "oqrw", "D(0) + V_a(2)"),
    ];
    for (name, cmd, shape) in expect {
        let (c, r) = report(&[cmd], &example(&dir, name));
        assert_eq!(c, 0, "{name}");
        assert_eq!(r.decomposition.unwrap().shape, shape, "{name}");
    }
}
