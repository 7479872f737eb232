use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::attacks::{cia_impact, AttackClass, AttackReport, CiaImpact};
use crate::modes::Mode;

use super::exec::{ScenarioRun, TrafficOutcome};
use super::matrix::VulnerabilityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ReportFormat {
    /// Tab-separated tables laid out like the published ones.
    #[default]
    Text,
    Csv,
    /// JSON document with the matrix, reports and CIA flags.
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "text-table" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" | "structured" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?} (text, csv, json)")),
        }
    }
}

pub const CSV_HEADER: &str =
    "attack,mode,cell,verdict,evidence,defense_alerts,availability,integrity,confidentiality";

fn cia_label(class: AttackClass) -> &'static str {
    match class {
        AttackClass::Spoofing => "Spoofing/ Poisoning",
        other => other.label(),
    }
}

fn title(modes: &[Mode]) -> &'static str {
    if modes.contains(&Mode::Secured) {
        "Comparison between the proposed mode and the existing virtual network modes"
    } else {
        "Vulnerabilities in virtual network"
    }
}

/// The security-attribute table: one column per attack class, X where the
/// attack compromises the attribute.
pub fn render_cia_table(classes: &[AttackClass]) -> String {
    let mut out = String::new();
    for c in classes {
        out.push('\t');
        out.push_str(cia_label(*c));
    }
    out.push('\n');
    type Attr = (&'static str, fn(&CiaImpact) -> bool);
    let attrs: [Attr; 3] = [
        ("Availability", |i| i.availability),
        ("Integrity", |i| i.integrity),
        ("Confidentiality", |i| i.confidentiality),
    ];
    for (name, get) in attrs {
        out.push_str(name);
        for c in classes {
            out.push('\t');
            if get(&cia_impact(*c)) {
                out.push('X');
            }
        }
        out.push('\n');
    }
    out
}

/// The glyph grid alone, header included.
pub fn render_matrix_table(matrix: &VulnerabilityMatrix) -> String {
    let mut out = String::from("Attack \\ Network Mode");
    for m in &matrix.modes {
        out.push('\t');
        out.push_str(m.label());
    }
    out.push('\n');
    for row in &matrix.rows {
        out.push_str(row.attack.label());
        for c in &row.cells {
            out.push('\t');
            out.push(c.glyph());
        }
        out.push('\n');
    }
    out
}

fn render_text(matrix: &VulnerabilityMatrix, reports: &[AttackReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}\n", title(&matrix.modes));
    out.push_str(&render_matrix_table(matrix));
    out.push_str("\n(-) the attack can be launched in that mode, (+) it cannot\n");
    let classes: Vec<AttackClass> = matrix.rows.iter().map(|r| r.attack).collect();
    if !classes.is_empty() {
        out.push_str("\nSecurity attributes affected by network attacks\n\n");
        out.push_str(&render_cia_table(&classes));
    }
    if !reports.is_empty() {
        out.push_str("\nReports\n\n");
        for (i, r) in reports.iter().enumerate() {
            let _ = writeln!(
                out,
                "[{i}] {} / {}: {} (evidence {:?}, alerts {}, trace {}..{})",
                r.spec.kind.class(),
                r.spec.mode_under_test,
                if r.succeeded() { "success" } else { "failure" },
                r.evidence,
                r.defense_alerts,
                r.trace_range.0,
                r.trace_range.1,
            );
            for n in &r.notes {
                let _ = writeln!(out, "    note: {n}");
            }
        }
    }
    out
}

fn render_csv(matrix: &VulnerabilityMatrix, reports: &[AttackReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &matrix.rows {
        for (col, mode) in matrix.modes.iter().enumerate() {
            for &i in &row.reports[col] {
                let r = &reports[i];
                let cia = r.cia;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    row.attack.label(),
                    mode,
                    row.cells[col].glyph(),
                    if r.succeeded() { "success" } else { "failure" },
                    r.evidence.len(),
                    r.defense_alerts,
                    cia.availability,
                    cia.integrity,
                    cia.confidentiality,
                );
            }
        }
    }
    out
}

#[derive(Serialize)]
struct CiaEntry {
    attack: AttackClass,
    #[serde(flatten)]
    impact: CiaImpact,
}

#[derive(Serialize)]
struct Structured<'a> {
    matrix: &'a VulnerabilityMatrix,
    reports: &'a [AttackReport],
    cia: Vec<CiaEntry>,
}

fn structured<'a>(matrix: &'a VulnerabilityMatrix, reports: &'a [AttackReport]) -> Structured<'a> {
    Structured {
        matrix,
        reports,
        cia: matrix
            .rows
            .iter()
            .map(|r| CiaEntry {
                attack: r.attack,
                impact: cia_impact(r.attack),
            })
            .collect(),
    }
}

fn render_json(matrix: &VulnerabilityMatrix, reports: &[AttackReport]) -> String {
    let mut s = serde_json::to_string_pretty(&structured(matrix, reports)).expect("report serializes");
    s.push('\n');
    s
}

/// Render a matrix and the reports it was built from.
pub fn render_report(
    matrix: &VulnerabilityMatrix,
    reports: &[AttackReport],
    format: ReportFormat,
) -> Vec<u8> {
    match format {
        ReportFormat::Text => render_text(matrix, reports),
        ReportFormat::Csv => render_csv(matrix, reports),
        ReportFormat::Json => render_json(matrix, reports),
    }
    .into_bytes()
}

/// The matrix a run reports against: its own, or one column per cell mode.
pub fn run_matrix(run: &ScenarioRun) -> VulnerabilityMatrix {
    if let Some(m) = &run.matrix {
        return m.clone();
    }
    let mut modes: Vec<Mode> = Vec::new();
    for c in &run.cells {
        if !modes.contains(&c.mode) {
            modes.push(c.mode);
        }
    }
    let reports: Vec<AttackReport> = run.reports().cloned().collect();
    VulnerabilityMatrix::from_reports(&modes, &reports)
}

#[derive(Serialize)]
struct RunDoc<'a> {
    scenario: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: Structured<'a>,
    traffic: Vec<&'a TrafficOutcome>,
}

/// Render a whole scenario run: the matrix, its reports and, for text and
/// JSON, the outcome of any scripted traffic.
pub fn render_run(run: &ScenarioRun, format: ReportFormat) -> Vec<u8> {
    let matrix = run_matrix(run);
    let reports: Vec<AttackReport> = run.reports().cloned().collect();
    let traffic: Vec<&TrafficOutcome> = run.cells.iter().flat_map(|c| &c.traffic).collect();
    match format {
        ReportFormat::Csv => render_csv(&matrix, &reports).into_bytes(),
        ReportFormat::Text => {
            let mut out = format!("scenario {} (seed {})\n", run.name, run.seed);
            if !matrix.rows.is_empty() {
                out.push('\n');
                out.push_str(&render_text(&matrix, &reports));
            }
            if !traffic.is_empty() {
                out.push_str("\nTraffic\n\n");
                for t in &traffic {
                    let _ = write!(
                        out,
                        "{} -> {}: {}",
                        t.from,
                        t.to,
                        if t.delivered { "delivered" } else { "not delivered" }
                    );
                    if !t.drops.is_empty() {
                        let _ = write!(out, " (dropped: {})", t.drops.join(", "));
                    }
                    if let Some(n) = &t.note {
                        let _ = write!(out, " [{n}]");
                    }
                    out.push('\n');
                }
            }
            out.into_bytes()
        }
        ReportFormat::Json => {
            let doc = RunDoc {
                scenario: &run.name,
                seed: run.seed,
                body: structured(&matrix, &reports),
                traffic,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s.into_bytes()
        }
    }
}
