//! Command execution, independent of argument parsing and output.

use std::path::{Path, PathBuf};

use enclosure_atlas_core::decomposition::{decompose, verify_decomposition};
use enclosure_atlas_core::fixtures;
use enclosure_atlas_core::identifiability::{
    nondegeneracy_check, qnd_diagonalize, qnd_uniqueness, uniqueness_cross_check, QndModel, QndVerdict,
};
use enclosure_atlas_core::io::{Model, ModelFile, ReportFile};
use enclosure_atlas_core::oqrw::verify_oqrw_theorem;
use enclosure_atlas_core::semigroup::{validate, Dynamics};
use enclosure_atlas_core::{Error, ErrorKind, Result, Tolerances};
use serde_json::json;

use crate::render;
use crate::{Format, IdMode};

#[derive(Clone, Copy, Debug)]
pub enum Command {
    Analyze,
    Oqrw,
    Identifiability { max_len: usize, mode: IdMode, diffusive: usize },
}

#[derive(Debug)]
pub struct Settings {
    pub command: Command,
    pub tol_rank: Option<f64>,
    pub tol_residual: Option<f64>,
    pub seed: Option<u64>,
    pub env_seed: Option<u64>,
    pub format: Format,
}

/// Result of one command on one file.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: u8,
    pub body: String,
    pub report: Option<ReportFile>,
    pub error: Option<String>,
}

impl Outcome {
    fn failed(e: &Error) -> Self {
        Self {
            code: exit_code(e),
            error: Some(e.to_string()),
            ..Self::default()
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Input => 1,
        ErrorKind::Validation => 2,
        ErrorKind::Analysis => 3,
    }
}

fn tolerances(file: &ModelFile, settings: &Settings) -> Result<Tolerances> {
    let mut tol = file.tolerances.unwrap_or_default();
    if let Some(t) = settings.tol_rank {
        tol.rank_tol = t;
    }
    if let Some(t) = settings.tol_residual {
        tol.residual_tol = t;
    }
    tol.validate()?;
    Ok(tol)
}

/// Runs the configured command on `path`; batch entry `index` offsets the seed.
pub fn run_file(path: &Path, settings: &Settings, index: u64) -> Outcome {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Outcome::failed(&Error::Io(format!("{}: {e}", path.display()))),
    };
    let result = ModelFile::parse(&text).and_then(|file| {
        let tol = tolerances(&file, settings)?;
        let seed = settings
            .seed
            .or(file.seed)
            .or(settings.env_seed)
            .unwrap_or(0)
            .wrapping_add(index);
        run_model(&file, settings.command, &tol, seed)
    });
    match result {
        Ok(report) => Outcome {
            code: if report.passed { 0 } else { 3 },
            body: match settings.format {
                Format::Text => render::text(&report),
                Format::Structured => report.to_json(),
            },
            report: Some(report),
            error: None,
        },
        Err(e) => Outcome::failed(&e),
    }
}

pub fn run_model(file: &ModelFile, command: Command, tol: &Tolerances, seed: u64) -> Result<ReportFile> {
    match command {
        Command::Analyze => analyze(file, tol, seed),
        Command::Oqrw => oqrw(file, tol, seed),
        Command::Identifiability { max_len, mode, diffusive } => {
            identifiability(file, mode, max_len, diffusive, tol, seed)
        }
    }
}

fn mismatch(command: &str, file: &ModelFile, hint: &str) -> Error {
    Error::ModeMismatch(format!("`{command}` cannot read a {:?} file; {hint}", file.mode).to_lowercase())
}

fn analyze(file: &ModelFile, tol: &Tolerances, seed: u64) -> Result<ReportFile> {
    let dynamics = match file.to_model(tol)? {
        Model::Lindblad(m) => Dynamics::Continuous(m),
        Model::Kraus(c) => Dynamics::Discrete(c),
        _ => return Err(mismatch("analyze", file, "expected mode lindblad or kraus")),
    };
    let mut out = ReportFile::new("analyze", tol, seed);
    out.diagnostics = Some(validate(&dynamics, tol));
    let report = decompose(&dynamics, seed, tol)?;
    let verification = verify_decomposition(&report, &dynamics, tol)?;
    if !report.is_unique {
        out.notes.push(format!(
            "decomposition is not unique: {} degenerate famil{}",
            report.families.len(),
            if report.families.len() == 1 { "y" } else { "ies" }
        ));
    }
    out.passed = verification.passed;
    out.decomposition = Some((&report).into());
    out.verification = Some(verification);
    Ok(out)
}

fn oqrw(file: &ModelFile, tol: &Tolerances, seed: u64) -> Result<ReportFile> {
    let Model::Rates(q) = file.to_model(tol)? else {
        return Err(mismatch("oqrw", file, "expected mode rates"));
    };
    let (cmp, report) = verify_oqrw_theorem(&q, seed, tol)?;
    let mut out = ReportFile::new("oqrw", tol, seed);
    out.passed = cmp.passed;
    out.decomposition = Some((&report).into());
    out.oqrw = Some(cmp);
    Ok(out)
}

fn identifiability(
    file: &ModelFile,
    mode: IdMode,
    max_len: usize,
    diffusive: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<ReportFile> {
    let model = file.to_model(tol)?;
    let mode = match (mode, &model) {
        (IdMode::Auto, Model::Lindblad(_)) => IdMode::Continuous,
        (IdMode::Auto, Model::Kraus(_)) => IdMode::Discrete,
        (IdMode::Auto, Model::Qnd(_)) => IdMode::Qnd,
        (m, _) => m,
    };
    let mut out = ReportFile::new("identifiability", tol, seed);
    let dynamics = match (mode, model) {
        (IdMode::Qnd, Model::Qnd(qnd)) => return qnd_report(out, &qnd, tol, seed),
        (IdMode::Qnd, Model::Lindblad(m)) => match qnd_diagonalize(&m, diffusive, seed, tol)? {
            QndVerdict::Qnd(qnd) => return qnd_report(out, &qnd, tol, seed),
            QndVerdict::NotQnd { residual } => {
                out.passed = false;
                out.notes.push(format!(
                    "model is not QND: H and the jump operators are not simultaneously diagonalizable (residual {residual:.3e})"
                ));
                return Ok(out);
            }
        },
        (IdMode::Continuous, Model::Lindblad(m)) => Dynamics::Continuous(m),
        (IdMode::Continuous, Model::Qnd(q)) => Dynamics::Continuous(q.to_lindblad()),
        (IdMode::Discrete, Model::Kraus(c)) => Dynamics::Discrete(c),
        (m, _) => {
            let hint = match m {
                IdMode::Continuous => "continuous mode needs a lindblad or qnd file",
                IdMode::Discrete => "discrete mode needs a kraus file",
                _ => "qnd mode needs a qnd or lindblad file",
            };
            return Err(mismatch("identifiability", file, hint));
        }
    };
    let (record, report) = uniqueness_cross_check(&dynamics, seed, max_len, tol)?;
    out.passed = record.identifiability.overall;
    if record.identifiability.hypothesis_violated {
        out.notes
            .push("transient part present: identifiability does not imply uniqueness here".into());
    }
    out.identifiability = Some(record.identifiability.clone());
    out.cross_check = Some(record);
    out.decomposition = Some((&report).into());
    Ok(out)
}

fn qnd_report(mut out: ReportFile, qnd: &QndModel, tol: &Tolerances, seed: u64) -> Result<ReportFile> {
    let nondegeneracy = nondegeneracy_check(qnd, tol);
    let record = qnd_uniqueness(qnd, seed, tol)?;
    out.passed = nondegeneracy.overall && record.passed;
    out.identifiability = Some(nondegeneracy);
    out.qnd = Some(record);
    Ok(out)
}

pub fn examples(name: Option<&str>) -> Outcome {
    let list = || {
        fixtures::NAMES
            .iter()
            .map(|n| {
                let f = fixtures::fixture(n).expect("listed fixture");
                let mode = format!("{:?}", f.mode).to_lowercase();
                format!("{n:<20} {mode}: {}\n", f.description.unwrap_or_default())
            })
            .collect::<String>()
    };
    match name {
        None => Outcome {
            body: list(),
            ..Outcome::default()
        },
        Some(n) => match fixtures::fixture(n) {
            Some(f) => Outcome {
                body: f.to_json(),
                ..Outcome::default()
            },
            None => Outcome {
                code: 2,
                error: Some(format!("unknown example `{n}`; available examples:\n{}", list())),
                ..Outcome::default()
            },
        },
    }
}

/// Combined output of a batch written to one stream.
pub fn batch_body(paths: &[PathBuf], outcomes: &[Outcome], format: Format) -> String {
    match format {
        Format::Structured => {
            let entries: Vec<_> = paths
                .iter()
                .zip(outcomes)
                .map(|(p, o)| {
                    json!({
                        "path": p.display().to_string(),
                        "exit_code": o.code,
                        "report": o.report,
                        "error": o.error,
                    })
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&entries).expect("serializable");
            s.push('\n');
            s
        }
        Format::Text => paths
            .iter()
            .zip(outcomes)
            .map(|(p, o)| {
                let body = o.error.as_ref().map_or(o.body.clone(), |e| format!("error: {e}\n"));
                format!("== {} (exit {}) ==\n{body}\n", p.display(), o.code)
            })
            .collect(),
    }
}
