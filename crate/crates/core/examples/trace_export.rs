//! Traces are JSON lines. Export one, parse it back and check that two runs
//! of the same scenario and seed are byte-identical.

use vnetsim::fabric::trace_from_jsonl;
use vnetsim::runner::{bundled, run_scenario, write_traces, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = bundled("fig6_sniff_bridged")?;
    let first = run_scenario(&scenario, RunOptions::default())?;
    let second = run_scenario(&scenario, RunOptions::default())?;
    let a = first.cells[0].trace_jsonl();
    assert_eq!(a, second.cells[0].trace_jsonl());

    let dir = std::env::temp_dir().join("vnetsim-trace-export");
    let written = write_traces(&first, Some(&dir.join("sniff.jsonl")), None)?;
    println!("wrote {}", written[0].display());

    let parsed = trace_from_jsonl(&std::fs::read_to_string(&written[0])?)?;
    assert_eq!(parsed, first.cells[0].trace);
    for line in a.lines().take(5) {
        println!("{line}");
    }
    println!("... {} events total", parsed.len());
    Ok(())
}
