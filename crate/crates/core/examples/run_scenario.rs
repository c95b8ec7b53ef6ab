//! Run a bundled scenario through the library runner and write its artifacts.
//!
//! cargo run --release --example run_scenario -- examples/scenarios/phase_z2.json /tmp/phase_z2

use cgo_lab::cache::Cache;
use cgo_lab::report::emit_report;
use cgo_lab::runner::{run_scenario, RunOptions};
use cgo_lab::scenario::Scenario;

fn main() -> cgo_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenarios/phase_z2.json").into());
    let out = args.next().unwrap_or_else(|| "out/example".into());
    let scenario = Scenario::load(config.as_ref())?;
    let report = run_scenario(&scenario, &RunOptions { cache: Cache::disabled() })?;
    for path in emit_report(&report, out.as_ref())? {
        println!("wrote {}", path.display());
    }
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
