//! Rebuild both vulnerability tables from scratch: every (mode, attack) cell
//! runs on a fresh fabric and the glyphs come from the oracle verdicts.

use vnetsim::runner::{bundled, render_report, run_scenario, ReportFormat, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in ["table2_matrix", "table3_matrix"] {
        let scenario = bundled(name)?;
        let run = run_scenario(&scenario, RunOptions::default())?;
        let matrix = run.matrix.as_ref().expect("matrix scenario");
        let reports: Vec<_> = run.reports().cloned().collect();
        print!("{}", String::from_utf8(render_report(matrix, &reports, ReportFormat::Text))?);
        println!();
    }
    Ok(())
}
