//! Scenario files, matrix orchestration and report rendering.
//!
//! A scenario is a JSON document naming endpoints, a device configuration
//! and the attacks to run. With a `matrix` section every (mode, attack) pair
//! runs on its own fabric and the verdicts fill a [`VulnerabilityMatrix`].

mod artifacts;
mod exec;
mod matrix;
mod report;
mod scenario;

pub use artifacts::{trace_paths, write_traces, TRACE_DIR_ENV};
pub use exec::{
    build_fabric, build_matrix, drop_totals, run_scenario, CellRun, MatrixRun, RunError,
    RunOptions, ScenarioRun, TrafficOutcome,
};
pub use matrix::{Cell, MatrixRow, VulnerabilityMatrix};
pub use report::{
    render_cia_table, render_matrix_table, render_report, render_run, run_matrix, ReportFormat,
    CSV_HEADER,
};
pub use scenario::{
    load_scenario, load_scenario_file, validate, DeviceSpec, EndpointSpec, IssueKind, MatrixSpec,
    Scenario, ScenarioError, SchemaIssue, TrafficSpec, SCHEMA,
};

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 5] = [
    ("fig5_spoof_routed", include_str!("../../scenarios/fig5_spoof_routed.json")),
    ("fig6_sniff_bridged", include_str!("../../scenarios/fig6_sniff_bridged.json")),
    ("vlan_example_sec4", include_str!("../../scenarios/vlan_example_sec4.json")),
    ("table2_matrix", include_str!("../../scenarios/table2_matrix.json")),
    ("table3_matrix", include_str!("../../scenarios/table3_matrix.json")),
];

/// Load a bundled scenario. Short forms such as `fig6_sniff` resolve to the
/// unique bundled name they prefix.
pub fn bundled(name: &str) -> Result<Scenario, ScenarioError> {
    let exact = BUNDLED.iter().find(|(n, _)| *n == name);
    let mut prefixed = BUNDLED.iter().filter(|(n, _)| n.starts_with(name));
    let hit = match (exact, prefixed.next(), prefixed.next()) {
        (Some(e), _, _) => e,
        (None, Some(p), None) => p,
        _ => return Err(ScenarioError::UnknownBundled(name.to_string())),
    };
    load_scenario(hit.1)
}

/// Load `arg` as a file path, falling back to a bundled scenario name.
pub fn resolve_scenario(arg: &str) -> Result<Scenario, ScenarioError> {
    let path = std::path::Path::new(arg);
    if path.exists() {
        return load_scenario_file(path);
    }
    bundled(arg).map_err(|e| match e {
        ScenarioError::UnknownBundled(_) => ScenarioError::Io {
            path: arg.to_string(),
            message: "no such file or bundled scenario".into(),
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::Mode;

    #[test]
    fn every_bundled_scenario_loads() {
        for (name, _) in BUNDLED {
            let s = bundled(name).unwrap();
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn short_name_resolves() {
        let s = bundled("fig6_sniff").unwrap();
        assert_eq!(s.device.mode, Some(Mode::Bridged));
        let names: Vec<_> = s.endpoints.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["A", "B", "C"]);
        assert!(bundled("fig").is_err());
    }
}
