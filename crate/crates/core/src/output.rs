//! Run directories: plot-ready CSV series plus JSON logs.
//!
//! CSV rows run from tick 1 to the horizon; row `k` holds the state after
//! `k` ticks, at time `k·dt`. Amounts are six-decimal fixed-point text.
//!
//! | file | columns |
//! |------|---------|
//! | `cycle_<id>.csv` | `tick,time,va,ve,vl,vg` (flows during the tick) |
//! | `ledger_<id>.csv` | `tick,time,va,ve,vl,vg` (running totals) |
//! | `agent_<id>.csv` | `tick,time,stock` |
//! | `pools.csv` | `tick,time,pool,level,cumulative_outflow` |
//! | `policies.json` | applied-policy log |
//! | `warnings.json` | run warnings |
//! | `events.json` | detector events |

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::calculus::Event;
use crate::dsl::Capacity;
use crate::engine::SimulationResult;
use crate::ledger::{Coefficient, TickFlows};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn time_text(dt: Coefficient, tick: usize) -> String {
    Coefficient::from_micro(dt.micro().saturating_mul(tick as i64)).to_string()
}

fn to_io(e: impl std::error::Error + Send + Sync + 'static) -> io::Error {
    io::Error::other(e)
}

fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(to_io)?;
    text.push('\n');
    fs::write(path, text)
}

fn flows_csv(path: &Path, dt: Coefficient, rows: &[TickFlows]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record(["tick", "time", "va", "ve", "vl", "vg"])
        .map_err(to_io)?;
    for (i, f) in rows.iter().enumerate() {
        let tick = i + 1;
        w.write_record([
            tick.to_string(),
            time_text(dt, tick),
            f.va.to_string(),
            f.ve.to_string(),
            f.vl.to_string(),
            f.vg.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()
}

#[derive(Serialize)]
struct JsonRun<'a> {
    result: &'a SimulationResult,
    events: &'a [Event],
}

/// Writes a run directory. Creates `dir` if needed. Files are written in a
/// fixed order with fixed formatting, so equal inputs give identical bytes.
pub fn write_run(dir: &Path, result: &SimulationResult, events: &[Event], format: Format) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    if format == Format::Json {
        write_json(&dir.join("result.json"), &JsonRun { result, events })?;
        return write_json(&dir.join("events.json"), &events);
    }
    let dt = result.dt;
    for (i, id) in result.cycle_ids.iter().enumerate() {
        flows_csv(&dir.join(format!("cycle_{id}.csv")), dt, &result.flows[i])?;
        flows_csv(&dir.join(format!("ledger_{id}.csv")), dt, &result.cumulative[i])?;
    }
    for (i, id) in result.agent_ids.iter().enumerate() {
        let mut w = csv::Writer::from_path(dir.join(format!("agent_{id}.csv"))).map_err(to_io)?;
        w.write_record(["tick", "time", "stock"]).map_err(to_io)?;
        for (k, stock) in result.stocks[i].iter().enumerate() {
            w.write_record([(k + 1).to_string(), time_text(dt, k + 1), stock.to_string()])
                .map_err(to_io)?;
        }
        w.flush()?;
    }
    let mut w = csv::Writer::from_path(dir.join("pools.csv")).map_err(to_io)?;
    w.write_record(["tick", "time", "pool", "level", "cumulative_outflow"])
        .map_err(to_io)?;
    for k in 0..result.horizon as usize {
        for series in &result.pools {
            let p = &series[k];
            let level = match p.level {
                Capacity::Finite(v) => v.to_string(),
                Capacity::Abundant => "abundant".to_string(),
            };
            w.write_record([
                (k + 1).to_string(),
                time_text(dt, k + 1),
                p.id.clone(),
                level,
                p.cumulative_outflow.to_string(),
            ])
            .map_err(to_io)?;
        }
    }
    w.flush()?;
    write_json(&dir.join("policies.json"), &result.policy_log)?;
    write_json(&dir.join("warnings.json"), &result.warnings)?;
    write_json(&dir.join("events.json"), &events)
}

/// Two-column CSV, for curves such as a savings path.
pub fn two_column_csv(header: [&str; 2], rows: impl IntoIterator<Item = (String, String)>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for (a, b) in rows {
        w.write_record([a, b]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_scenario;
    use crate::engine::run;

    #[test]
    fn csv_layout() {
        let ast = parse_scenario(
            r#"scenario "t" { dt = 0.5 horizon = 2
  pool nature { initial = abundant }
  agent a { initial = 10 }
  cycle c { actor = a va = 2 ve = 1 from nature vl = 1 }
}"#,
        )
        .unwrap();
        let r = run(&ast).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &r, &[], Format::Csv).unwrap();
        let cycle = fs::read_to_string(dir.path().join("cycle_c.csv")).unwrap();
        assert_eq!(
            cycle,
            "tick,time,va,ve,vl,vg\n1,0.500000,1.000000,0.500000,0.500000,1.000000\n2,1.000000,1.000000,0.500000,0.500000,1.000000\n"
        );
        let ledger = fs::read_to_string(dir.path().join("ledger_c.csv")).unwrap();
        assert!(ledger.ends_with("2,1.000000,2.000000,1.000000,1.000000,2.000000\n"));
        let agent = fs::read_to_string(dir.path().join("agent_a.csv")).unwrap();
        assert_eq!(agent, "tick,time,stock\n1,0.500000,10.000000\n2,1.000000,10.000000\n");
        let pools = fs::read_to_string(dir.path().join("pools.csv")).unwrap();
        assert!(pools.contains("2,1.000000,nature,abundant,1.000000"));
        assert_eq!(fs::read_to_string(dir.path().join("events.json")).unwrap(), "[]\n");
    }
}
