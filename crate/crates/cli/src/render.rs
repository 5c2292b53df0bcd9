//! Plain-text rendering of reports.

use std::fmt::Write;

use enclosure_atlas_core::decomposition::RecurrentPath;
use enclosure_atlas_core::identifiability::{IdentifiabilityMode, IdentifiabilityReport, Witness};
use enclosure_atlas_core::io::{DecompositionData, MatrixData, ReportFile};
use enclosure_atlas_core::linalg::C64;

fn number(x: f64) -> String {
    let x = if x.abs() < 5e-13 { 0.0 } else { x };
    format!("{x:.6}")
}

fn complex(z: C64) -> String {
    if z.im.abs() < 5e-13 {
        return number(z.re);
    }
    let sign = if z.im < 0.0 { '-' } else { '+' };
    format!("{}{sign}{}i", number(z.re), number(z.im.abs()))
}

fn matrix(out: &mut String, indent: &str, m: &MatrixData) {
    let cells: Vec<Vec<String>> = m.0.iter().map(|r| r.iter().map(|&z| complex(z)).collect()).collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(0);
    for row in cells {
        let row: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        let _ = writeln!(out, "{indent}[ {} ]", row.join("  "));
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn text(r: &ReportFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} (seed {})", r.tool, r.command, r.seed);
    let _ = writeln!(out, "verdict: {}", verdict(r.passed));
    if let Some(d) = &r.diagnostics {
        let _ = writeln!(
            out,
            "model: trace preservation residual {:.3e}, hermiticity residual {:.3e}",
            d.trace_preservation_residual, d.hermiticity_residual
        );
        if let Some(c) = d.choi_min_eigenvalue {
            let _ = writeln!(out, "model: smallest Choi eigenvalue {c:.3e}");
        }
    }
    if let Some(o) = &r.oqrw {
        let _ = writeln!(out, "convention: {}", o.convention);
        for (c, pi) in o.classes.iter().zip(&o.measures) {
            let support: Vec<String> = c.iter().map(|&s| format!("{s}: {}", number(pi[s]))).collect();
            let _ = writeln!(out, "closed class {c:?}: invariant measure {{{}}}", support.join(", "));
        }
        if !o.absorbing.is_empty() {
            let _ = writeln!(out, "absorbing states: {:?}", o.absorbing);
        }
        for c in &o.clauses {
            let _ = writeln!(out, "clause {}: {} (residual {:.3e})", c.name, verdict(c.passed), c.residual);
        }
        for n in &o.notes {
            let _ = writeln!(out, "note: {n}");
        }
    }
    if let Some(i) = &r.identifiability {
        identifiability(&mut out, i);
    }
    if let Some(q) = &r.qnd {
        for e in &q.omegas {
            let _ = writeln!(out, "omega({}, {}) = {}", e.a, e.b, complex(e.omega.value));
        }
        let _ = writeln!(out, "all coherences decay: {}", q.all_decaying);
        let plural = if q.families == 1 { "family" } else { "families" };
        let _ = writeln!(out, "unique decomposition: {} ({} {plural})", q.is_unique, q.families);
        let _ = writeln!(out, "largest off-diagonal fixed-point entry: {:.3e}", q.fixed_point_off_diagonal);
    }
    if let Some(c) = &r.cross_check {
        let _ = writeln!(
            out,
            "cross-check: unique = {}, transient free = {}, converse counterexample = {}",
            c.is_unique, c.transient_free, c.converse_counterexample
        );
        for k in &c.commutation {
            let _ = writeln!(out, "  {}: {} (residual {:.3e})", k.name, verdict(k.passed), k.residual);
        }
        for n in &c.notes {
            let _ = writeln!(out, "note: {n}");
        }
    }
    if let Some(d) = &r.decomposition {
        decomposition(&mut out, d);
    }
    if let Some(v) = &r.verification {
        let _ = writeln!(
            out,
            "verification: {} ({} checks on {} invariant states)",
            verdict(v.passed),
            v.checks.len(),
            v.states_tested
        );
        for c in v.checks.iter().filter(|c| !c.passed) {
            let _ = writeln!(out, "  failed {} (residual {:.3e})", c.name, c.residual);
        }
    }
    for n in &r.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

fn identifiability(out: &mut String, i: &IdentifiabilityReport) {
    let mode = match i.mode {
        IdentifiabilityMode::QndNondegeneracy => "qnd non-degeneracy",
        IdentifiabilityMode::Continuous => "continuous",
        IdentifiabilityMode::Discrete => "discrete",
    };
    let _ = writeln!(out, "identifiability ({mode}): {}", verdict(i.overall));
    for p in &i.pairs {
        let how = match &p.witness {
            Some(Witness::Diffusive { channel }) => format!("separated by diffusive channel {channel}"),
            Some(Witness::Jump { channel }) => format!("separated by counting channel {channel}"),
            Some(Witness::Channel { channel }) => format!("separated by channel {channel}"),
            Some(Witness::Word { word }) => format!("separated by word {word:?}"),
            None => match (i.mode, i.max_len) {
                (IdentifiabilityMode::Discrete, Some(l)) => format!("not separated: no witness word, none up to {l}"),
                (IdentifiabilityMode::QndNondegeneracy, _) => {
                    "not separated: r and theta coincide on every channel".to_string()
                }
                _ => "not separated: no channel distinguishes the states".to_string(),
            },
        };
        let _ = writeln!(out, "  pair ({}, {}): {how} (largest difference {:.3e})", p.a, p.b, p.magnitude);
    }
    if i.hypothesis_violated {
        let _ = writeln!(out, "  transient part present");
    }
}

fn decomposition(out: &mut String, d: &DecompositionData) {
    let path = match d.recurrent_path {
        RecurrentPath::SpectralProjection => "spectral projection",
        RecurrentPath::CesaroAverage => "Cesaro average",
    };
    let _ = writeln!(out, "shape: {}", d.shape);
    let _ = writeln!(
        out,
        "dimension {}: transient rank {}, recurrent rank {} (via {path})",
        d.dim, d.transient.rank, d.recurrent.rank
    );
    let _ = writeln!(out, "unique: {}", d.is_unique);
    let enclosure = |out: &mut String, label: String, e: &enclosure_atlas_core::io::EnclosureData| {
        let _ = writeln!(out, "{label}: dimension {}", e.dimension);
        let _ = writeln!(out, "  projector:");
        matrix(out, "    ", &e.projector);
        let _ = writeln!(out, "  extremal state:");
        matrix(out, "    ", &e.extremal_state);
    };
    for (k, e) in d.unique_enclosures.iter().enumerate() {
        enclosure(out, format!("enclosure V_a[{k}]"), e);
    }
    for (b, f) in d.families.iter().enumerate() {
        let _ = writeln!(out, "family {b}: {} equivalent enclosures", f.members.len());
        for (g, e) in f.members.iter().enumerate() {
            enclosure(out, format!("enclosure V_b,g[{b},{g}]"), e);
        }
        for iso in &f.isometries {
            let _ = writeln!(out, "  isometry {} -> {}:", iso.from, iso.to);
            matrix(out, "    ", &iso.q);
        }
    }
    let _ = writeln!(out, "residuals:");
    for (k, v) in &d.residuals {
        let _ = writeln!(out, "  {k}: {v:.3e}");
    }
}
