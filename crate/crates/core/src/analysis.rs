//! Runs detectors over engine results and over series tables read back
//! from CSV.

use serde::Serialize;
use thiserror::Error;

use crate::calculus::{
    derivative, detect_gov_optimum, detect_max_vg, detect_stable_market, detect_subsidy_cross, CalculusError, Event,
    Series,
};
use crate::dsl::{DetectorDecl, DetectorKind, Flow, ScenarioAst, Tag};
use crate::engine::SimulationResult;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Selection(String),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;

/// Default MaxVG / StableMarket tolerance: `10·dt²·scale`. The central
/// first difference errs by about `dt²/6·|V‴|`, so `scale` is the median
/// third-derivative magnitude over the series involved (a median, so one
/// policy jolt does not widen the band everywhere), plus a floor of
/// `1e-9·max|V′|` for float rounding.
pub fn default_tolerance(dt: f64, series: &[&Series]) -> Result<f64> {
    let mut third = Vec::new();
    let mut rate = 0.0f64;
    for s in series {
        rate = rate.max(derivative(s, 1)?.max_abs());
        if s.len() >= 5 {
            third.extend(derivative(s, 3)?.values.iter().map(|v| v.abs()));
        }
    }
    third.sort_by(f64::total_cmp);
    let scale = third.get(third.len() / 2).copied().unwrap_or(0.0);
    Ok(10.0 * dt * dt * scale + 1e-9 * rate)
}

fn tagged(ast: &ScenarioAst, tag: Tag) -> Result<&str> {
    let mut it = ast.cycles.iter().filter(|c| c.tag == tag);
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(&c.id.name),
        _ => Err(AnalysisError::Selection(format!(
            "expected exactly one cycle tagged '{}'",
            tag.as_str().unwrap_or("")
        ))),
    }
}

/// Cycles a detector reads, after applying its defaults.
pub fn detector_cycles(ast: &ScenarioAst, d: &DetectorDecl) -> Result<Vec<String>> {
    if !d.args.is_empty() {
        return Ok(d.args.iter().map(|a| a.name.clone()).collect());
    }
    Ok(match d.kind {
        DetectorKind::MaxVg | DetectorKind::StableMarket => ast.cycles.iter().map(|c| c.id.name.clone()).collect(),
        DetectorKind::SubsidyCross => vec![tagged(ast, Tag::G)?.into(), tagged(ast, Tag::N)?.into()],
        DetectorKind::GovOptimum => vec![tagged(ast, Tag::G)?.into(), tagged(ast, Tag::C)?.into()],
    })
}

/// Cumulative value series of one cycle flow, from time 0.
pub fn value_series(result: &SimulationResult, cycle: &str, flow: Flow) -> Result<Series> {
    let i = result
        .cycle_index(cycle)
        .ok_or_else(|| AnalysisError::Selection(format!("unknown cycle '{cycle}'")))?;
    Ok(Series::from_amounts(
        0.0,
        result.dt.to_f64(),
        &result.cumulative_series(i, flow),
    )?)
}

fn sum_series(parts: Vec<Series>) -> Result<Series> {
    let mut it = parts.into_iter();
    let first = it
        .next()
        .ok_or_else(|| AnalysisError::Selection("no cycles selected".into()))?;
    it.try_fold(first, |acc, s| acc.add(&s).map_err(AnalysisError::from))
}

fn tag_events(mut events: Vec<Event>, cycles: &[String]) -> Vec<Event> {
    for e in &mut events {
        e.cycles = cycles.to_vec();
    }
    events
}

/// Runs one scenario detector over a finished run.
pub fn run_detector(ast: &ScenarioAst, result: &SimulationResult, d: &DetectorDecl) -> Result<Vec<Event>> {
    let cycles = detector_cycles(ast, d)?;
    let dt = result.dt.to_f64();
    let series = |c: &str, f: Flow| value_series(result, c, f);
    Ok(match d.kind {
        DetectorKind::MaxVg => {
            let mut out = Vec::new();
            for c in &cycles {
                let (vg, va, vl) = (series(c, Flow::Vg)?, series(c, Flow::Va)?, series(c, Flow::Vl)?);
                let tol = default_tolerance(dt, &[&va, &vl])?;
                out.extend(tag_events(detect_max_vg(&vg, &va, &vl, tol)?, std::slice::from_ref(c)));
            }
            out
        }
        DetectorKind::StableMarket => {
            let va = sum_series(cycles.iter().map(|c| series(c, Flow::Va)).collect::<Result<_>>()?)?;
            let vl = sum_series(cycles.iter().map(|c| series(c, Flow::Vl)).collect::<Result<_>>()?)?;
            let tol = default_tolerance(dt, &[&va, &vl])?;
            tag_events(detect_stable_market(&va, &vl, tol)?, &cycles)
        }
        DetectorKind::SubsidyCross => {
            let veg = series(&cycles[0], Flow::Ve)?;
            let vgn = series(&cycles[1], Flow::Vg)?;
            tag_events(detect_subsidy_cross(&veg, &vgn)?.into_iter().collect(), &cycles)
        }
        DetectorKind::GovOptimum => {
            let vgg = series(&cycles[0], Flow::Vg)?;
            let vgc = series(&cycles[1], Flow::Vg)?;
            tag_events(detect_gov_optimum(&vgg, &vgc)?, &cycles)
        }
    })
}

/// Runs every `detect` item of the scenario, in declaration order.
pub fn run_scenario_detectors(ast: &ScenarioAst, result: &SimulationResult) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for d in &ast.detectors {
        events.extend(run_detector(ast, result, d)?);
    }
    Ok(events)
}

/// A CSV in the engine's series schema: `tick,time,<columns...>`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesTable {
    pub columns: Vec<String>,
    pub ticks: Vec<u64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn parse(text: &str) -> Result<SeriesTable> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| AnalysisError::Schema(format!("unreadable CSV header: {e}")))?
            .clone();
        if header.len() < 3 || &header[0] != "tick" || &header[1] != "time" {
            return Err(AnalysisError::Schema(
                "expected columns tick,time,… in the header".into(),
            ));
        }
        let columns: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut table = SeriesTable {
            values: vec![Vec::new(); columns.len()],
            columns,
            ticks: Vec::new(),
            times: Vec::new(),
        };
        for (row, record) in reader.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| AnalysisError::Schema(format!("line {line}: {e}")))?;
            if record.len() != header.len() {
                return Err(AnalysisError::Schema(format!(
                    "line {line}: expected {} fields, found {}",
                    header.len(),
                    record.len()
                )));
            }
            let number = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| AnalysisError::Schema(format!("line {line}: '{}' is not a number", &record[i])))
            };
            table.ticks.push(
                record[0].trim().parse().map_err(|_| {
                    AnalysisError::Schema(format!("line {line}: tick '{}' is not an integer", &record[0]))
                })?,
            );
            table.times.push(number(1)?);
            for c in 0..table.columns.len() {
                let v = number(c + 2)?;
                table.values[c].push(v);
            }
        }
        if table.ticks.len() < 2 {
            return Err(AnalysisError::Schema("need at least two rows".into()));
        }
        Ok(table)
    }

    /// Uniform time step implied by the `time` column.
    pub fn dt(&self) -> Result<f64> {
        let dt = self.times[1] - self.times[0];
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt.abs().max(1e-12));
        if dt.is_nan() || dt <= 0.0 || !uniform {
            return Err(AnalysisError::Schema("time column is not uniformly increasing".into()));
        }
        Ok(dt)
    }

    pub fn series(&self, column: &str) -> Result<Series> {
        let c = self
            .columns
            .iter()
            .position(|name| name == column)
            .ok_or_else(|| AnalysisError::Schema(format!("missing column '{column}'")))?;
        Ok(Series::new(self.times[0], self.dt()?, self.values[c].clone())?)
    }
}

/// Where a detector role is read from: `column` of table `file`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnRef {
    pub file: usize,
    pub column: String,
}

/// Parses `role=col` or `role=k:col`.
pub fn parse_col_map(spec: &str) -> Result<(String, ColumnRef)> {
    let bad = || {
        AnalysisError::Selection(format!(
            "invalid column mapping '{spec}' (expected role=col or role=k:col)"
        ))
    };
    let (role, target) = spec.split_once('=').ok_or_else(bad)?;
    let (file, column) = match target.split_once(':') {
        Some((k, col)) => (k.parse().map_err(|_| bad())?, col),
        None => (0, target),
    };
    if role.is_empty() || column.is_empty() {
        return Err(bad());
    }
    Ok((
        role.to_string(),
        ColumnRef {
            file,
            column: column.to_string(),
        },
    ))
}

/// Roles each detector reads, with their default `(file, column)`.
pub fn detector_roles(kind: DetectorKind) -> &'static [(&'static str, usize, &'static str)] {
    match kind {
        DetectorKind::MaxVg => &[("vg", 0, "vg"), ("va", 0, "va"), ("vl", 0, "vl")],
        DetectorKind::StableMarket => &[("va", 0, "va"), ("vl", 0, "vl")],
        DetectorKind::SubsidyCross => &[("veg", 0, "ve"), ("vgn", 1, "vg")],
        DetectorKind::GovOptimum => &[("vgg", 0, "vg"), ("vgc", 1, "vg")],
    }
}

/// Runs a detector over CSV tables. For `max_vg`, missing `va`/`vl`
/// columns are allowed: the event is then reported without the witness.
pub fn detect_tables(
    kind: DetectorKind,
    tables: &[SeriesTable],
    mapping: &[(String, ColumnRef)],
    tol: Option<f64>,
) -> Result<Vec<Event>> {
    let roles = detector_roles(kind);
    for (role, _) in mapping {
        if !roles.iter().any(|(r, _, _)| r == role) {
            let names: Vec<&str> = roles.iter().map(|(r, _, _)| *r).collect();
            return Err(AnalysisError::Selection(format!(
                "detector {} has no role '{role}' (roles: {})",
                kind.as_str(),
                names.join(", ")
            )));
        }
    }
    let lookup = |role: &str| -> Option<Result<Series>> {
        let (_, file, column) = roles.iter().find(|(r, _, _)| *r == role)?;
        let target = mapping
            .iter()
            .find(|(r, _)| r == role)
            .map(|(_, c)| c.clone())
            .unwrap_or(ColumnRef {
                file: (*file).min(tables.len().saturating_sub(1)),
                column: column.to_string(),
            });
        let Some(table) = tables.get(target.file) else {
            return Some(Err(AnalysisError::Selection(format!("no input file #{}", target.file))));
        };
        if !table.columns.contains(&target.column) {
            return None;
        }
        Some(table.series(&target.column))
    };
    let required = |role: &str| -> Result<Series> {
        lookup(role).unwrap_or_else(|| Err(AnalysisError::Schema(format!("no column for role '{role}'"))))
    };

    Ok(match kind {
        DetectorKind::MaxVg => {
            let vg = required("vg")?;
            let va = lookup("va").transpose()?;
            let vl = lookup("vl").transpose()?;
            match (va, vl) {
                (Some(va), Some(vl)) => {
                    let tol = match tol {
                        Some(t) => t,
                        None => default_tolerance(vg.dt, &[&va, &vl])?,
                    };
                    detect_max_vg(&vg, &va, &vl, tol)?
                }
                _ => {
                    let zero = Series::new(vg.t0, vg.dt, vec![0.0; vg.len()])?;
                    let mut events = detect_max_vg(&vg, &zero, &zero, 0.0)?;
                    for e in &mut events {
                        e.flags.clear();
                        for key in ["va_rate", "vl_rate", "abs_diff"] {
                            e.witness.remove(key);
                        }
                    }
                    events
                }
            }
        }
        DetectorKind::StableMarket => {
            let (va, vl) = (required("va")?, required("vl")?);
            let tol = match tol {
                Some(t) => t,
                None => default_tolerance(va.dt, &[&va, &vl])?,
            };
            detect_stable_market(&va, &vl, tol)?
        }
        DetectorKind::SubsidyCross => detect_subsidy_cross(&required("veg")?, &required("vgn")?)?
            .into_iter()
            .collect(),
        DetectorKind::GovOptimum => detect_gov_optimum(&required("vgg")?, &required("vgc")?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parabola_csv() -> String {
        let mut s = String::from("tick,time,vg\n");
        for k in 0..=100 {
            let t = k as f64 * 0.1;
            s.push_str(&format!("{k},{t:.6},{:.6}\n", 25.0 - (t - 5.0).powi(2)));
        }
        s
    }

    #[test]
    fn header_must_start_with_tick_time() {
        let err = SeriesTable::parse("t,time,vg\n0,0,1\n1,1,2\n").unwrap_err();
        assert!(err.to_string().contains("expected columns tick,time,"));
        assert!(SeriesTable::parse("tick,time,vg\n0,0,x\n1,1,2\n").is_err());
    }

    #[test]
    fn parabola_table_max_vg() {
        let table = SeriesTable::parse(&parabola_csv()).unwrap();
        let events = detect_tables(DetectorKind::MaxVg, &[table], &[], None).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].tick, 50);
        assert!(!events[0].witness.contains_key("abs_diff"));
    }

    #[test]
    fn col_map_forms() {
        assert_eq!(
            parse_col_map("vgn=1:vg").unwrap(),
            (
                "vgn".to_string(),
                ColumnRef {
                    file: 1,
                    column: "vg".into()
                }
            )
        );
        assert_eq!(parse_col_map("vg=value").unwrap().1.file, 0);
        assert!(parse_col_map("novalue").is_err());
        let table = SeriesTable::parse(&parabola_csv()).unwrap();
        let mapping = vec![parse_col_map("bogus=vg").unwrap()];
        assert!(detect_tables(DetectorKind::MaxVg, &[table], &mapping, None).is_err());
    }
}
