//! Built-in demo scenarios, each checked against its closed form or
//! condition.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisError};
use crate::calculus::{Event, EventKind};
use crate::dsl::{parse_scenario, Diagnostic, ScenarioAst};
use crate::engine::{self, EngineError, SimulationResult};
use crate::ledger::{conservation_residual, Coefficient, TickFlows, ValueAmount};
use crate::market::{
    self, cov_equilibrium_residual, savings_closed_form, solve_equilibrium, Compounding, ErrorFamily, ErrorModel,
    MarketError, SavingsParams, SupplyDemandParams,
};
use crate::output::{self, Format};

pub const DEMOS: [(&str, &str); 6] = [
    ("savings", include_str!("../../../demos/savings.scn")),
    ("supply_demand", include_str!("../../../demos/supply_demand.scn")),
    ("lln", include_str!("../../../demos/lln.scn")),
    ("shale", include_str!("../../../demos/shale.scn")),
    ("government", include_str!("../../../demos/government.scn")),
    ("bankchain", include_str!("../../../demos/bankchain.scn")),
];

/// Tolerance rule per demo.
pub const TOLERANCES: [(&str, &str); 6] = [
    ("savings", "exact: 0 micro-units (monthly principal: 1 micro-unit)"),
    ("supply_demand", "1e-12 relative"),
    ("lln", "3 sigma of the mean residual per member"),
    ("shale", "event time within one dt; refined run within the coarse dt"),
    ("government", "event time within one dt; |VGg' + VGc'| <= 10*dt^2"),
    ("bankchain", "exact: total system value constant to the micro-unit"),
];

pub fn demo_names() -> impl Iterator<Item = &'static str> {
    DEMOS.iter().map(|(n, _)| *n)
}

pub fn demo_source(name: &str) -> Option<&'static str> {
    DEMOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("unknown demo '{0}'")]
    Unknown(String),
    #[error("demo scenario does not parse: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Parse(Vec<Diagnostic>),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn demo_ast(name: &str) -> Result<ScenarioAst, DemoError> {
    let text = demo_source(name).ok_or_else(|| DemoError::Unknown(name.to_string()))?;
    parse_scenario(text).map_err(DemoError::Parse)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub quantity: String,
    pub expected: f64,
    pub actual: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Comparison {
    /// Passes when `|actual - expected| <= tolerance`.
    pub fn new(quantity: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        let abs_diff = (actual - expected).abs();
        let rel_diff = if expected == 0.0 {
            abs_diff
        } else {
            abs_diff / expected.abs()
        };
        Comparison {
            quantity: quantity.into(),
            expected,
            actual,
            abs_diff,
            rel_diff,
            tolerance,
            pass: abs_diff <= tolerance,
        }
    }

    /// Passes when `actual <= bound`; `expected` records the bound.
    pub fn at_most(quantity: impl Into<String>, bound: f64, actual: f64) -> Self {
        Comparison {
            quantity: quantity.into(),
            expected: bound,
            actual,
            abs_diff: actual,
            rel_diff: if bound == 0.0 { actual } else { actual / bound },
            tolerance: bound,
            pass: actual <= bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoReport {
    pub name: String,
    pub tolerance_rule: String,
    pub comparisons: Vec<Comparison>,
    pub pass: bool,
}

impl DemoReport {
    fn new(name: &str, comparisons: Vec<Comparison>) -> Self {
        let rule = TOLERANCES.iter().find(|(n, _)| *n == name).map_or("", |(_, r)| *r);
        DemoReport {
            name: name.to_string(),
            tolerance_rule: rule.to_string(),
            pass: !comparisons.is_empty() && comparisons.iter().all(|c| c.pass),
            comparisons,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "demo {}: {}\ntolerance: {}\n",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.tolerance_rule
        );
        for c in &self.comparisons {
            out.push_str(&format!(
                "  [{}] {}: expected {} actual {} (abs diff {:.3e}, tolerance {:.3e})\n",
                if c.pass { "pass" } else { "FAIL" },
                c.quantity,
                c.expected,
                c.actual,
                c.abs_diff,
                c.tolerance
            ));
        }
        out
    }
}

/// A demo's report together with the run it was computed from.
#[derive(Clone, Debug)]
pub struct DemoOutcome {
    pub report: DemoReport,
    pub ast: ScenarioAst,
    pub result: SimulationResult,
    pub events: Vec<Event>,
    /// Extra plot-ready files: `(file name, contents)`.
    pub extras: Vec<(String, String)>,
}

impl DemoOutcome {
    pub fn write(&self, dir: &Path) -> Result<(), DemoError> {
        output::write_run(dir, &self.result, &self.events, Format::Csv)?;
        for (name, text) in &self.extras {
            fs::write(dir.join(name), text)?;
        }
        let mut report = serde_json::to_string_pretty(&self.report).map_err(io::Error::other)?;
        report.push('\n');
        fs::write(dir.join("report.json"), report)?;
        Ok(())
    }
}

/// The same scenario at half the time step: dt halves, the horizon and
/// every policy trigger double, so the same span of time is covered. Jolts
/// are lump sums and keep their size.
pub fn refine(ast: &ScenarioAst) -> ScenarioAst {
    let mut fine = ast.clone();
    fine.dt = Coefficient::from_micro(ast.dt.micro() / 2);
    fine.horizon = ast.horizon * 2;
    for p in &mut fine.policies {
        p.trigger *= 2;
    }
    fine
}

pub fn run_demo(name: &str) -> Result<DemoOutcome, DemoError> {
    let ast = demo_ast(name)?;
    let result = engine::run(&ast)?;
    let events = analysis::run_scenario_detectors(&ast, &result)?;
    let mut extras = Vec::new();
    let comparisons = match name {
        "savings" => savings(&result, &mut extras)?,
        "supply_demand" => supply_demand(&result, &mut extras)?,
        "lln" => lln(&ast, &result)?,
        "shale" => shale(&ast, &events)?,
        "government" => government(&ast, &events),
        "bankchain" => closure(&result),
        other => return Err(DemoError::Unknown(other.to_string())),
    };
    Ok(DemoOutcome {
        report: DemoReport::new(name, comparisons),
        ast,
        result,
        events,
        extras,
    })
}

/// Per-tick residuals and total system value, both exact.
pub fn closure(result: &SimulationResult) -> Vec<Comparison> {
    let worst_residual = result
        .flows
        .iter()
        .flatten()
        .map(|f| conservation_residual(f).micro().unsigned_abs())
        .max()
        .unwrap_or(0);
    let worst_drift = result
        .total_value
        .iter()
        .map(|v| v.micro().abs_diff(result.initial_total.micro()))
        .max()
        .unwrap_or(0);
    vec![
        Comparison::new("max |va + ve - vl - vg| (micro-units)", 0.0, worst_residual as f64, 0.0),
        Comparison::new("max |total value drift| (micro-units)", 0.0, worst_drift as f64, 0.0),
    ]
}

fn savings(result: &SimulationResult, extras: &mut Vec<(String, String)>) -> Result<Vec<Comparison>, DemoError> {
    let base = SavingsParams {
        principal: ValueAmount::from_units(1000).expect("small"),
        rate: Coefficient::from_micro(50_000),
        fee: ValueAmount::from_units(5).expect("small"),
        years: 2,
    };
    let mut out = Vec::new();
    for year in 1..=2u32 {
        let report = savings_closed_form(&SavingsParams { years: year, ..base }, Compounding::Annual)?;
        let simulated = result.stock_at("saver", year as u64).unwrap_or_default();
        let closed = report.closed_form_exact.unwrap_or_default();
        out.push(Comparison::new(
            format!("year {year} VG: closed form vs recurrence"),
            report.oracle_vg.to_f64(),
            closed.to_f64(),
            0.0,
        ));
        out.push(Comparison::new(
            format!("year {year} VG: engine vs recurrence"),
            report.oracle_vg.to_f64(),
            simulated.to_f64(),
            0.0,
        ));
    }
    let monthly = savings_closed_form(
        &SavingsParams {
            principal: ValueAmount::from_units(1200).expect("small"),
            rate: Coefficient::from_micro(120_000),
            fee: ValueAmount::ZERO,
            years: 1,
        },
        Compounding::Monthly,
    )?;
    out.push(Comparison::new(
        "monthly principal X(1+r/12)^12t vs month loop (X=1200, r=0.12)",
        monthly.oracle_principal.unwrap_or_default().to_f64(),
        monthly.closed_form_vg,
        1e-6,
    ));
    let path = market::savings_path(&base)?;
    extras.push((
        "savings_path.csv".into(),
        output::two_column_csv(
            ["year", "vg"],
            path.iter().enumerate().map(|(y, v)| (y.to_string(), v.to_string())),
        ),
    ));
    Ok(out)
}

fn supply_demand(result: &SimulationResult, extras: &mut Vec<(String, String)>) -> Result<Vec<Comparison>, DemoError> {
    let p = SupplyDemandParams {
        kd: -2.0,
        cd: 100.0,
        ks: 3.0,
        cs: 25.0,
    };
    let eq = solve_equilibrium(&p)?;
    let cov = cov_equilibrium_residual(&p)?;
    let f: &TickFlows = result.flows[0].last().expect("non-empty horizon");
    let rel = |x: f64| 1e-12 * x.abs();
    for (file, k, c) in [("demand.csv", p.kd, p.cd), ("supply.csv", p.ks, p.cs)] {
        extras.push((
            file.into(),
            output::two_column_csv(
                ["quantity", "price"],
                (0..=30).map(|q| (q.to_string(), format!("{:.6}", k * q as f64 + c))),
            ),
        ));
    }
    Ok(vec![
        Comparison::new("qe", 15.0, eq.qe, rel(15.0)),
        Comparison::new("pe", 70.0, eq.pe, rel(70.0)),
        Comparison::new(
            "kd*qe + cd - (ks*qe + cs)",
            0.0,
            (p.kd * eq.qe + p.cd) - (p.ks * eq.qe + p.cs),
            rel(70.0),
        ),
        Comparison::new("cov residual (ks - kd)*qe", 75.0, cov.residual, rel(75.0)),
        Comparison::new(
            "engine VA - VL per tick",
            cov.residual,
            f.va.to_f64() - f.vl.to_f64(),
            rel(75.0),
        ),
        Comparison::new(
            "engine VG - VE per tick",
            cov.residual,
            f.vg.to_f64() - f.ve.to_f64(),
            rel(75.0),
        ),
    ])
}

fn lln(ast: &ScenarioAst, result: &SimulationResult) -> Result<Vec<Comparison>, DemoError> {
    let members: Vec<TickFlows> = result.flows.iter().flatten().copied().collect();
    let n = members.len();
    let model = ErrorModel::new(ErrorFamily::Uniform, 1.0, ast.seed)?;
    let agg = market::aggregate_with_errors(&members, &model)?;
    let sigma = model.member_sigma() / (n as f64).sqrt();
    let stats = market::lln_experiment(n, &model, 1)?;
    Ok(vec![
        Comparison::new("members", 10_000.0, n as f64, 0.0),
        Comparison::new(
            "true residual of engine ledgers",
            0.0,
            conservation_residual(&agg.true_totals).to_f64(),
            0.0,
        ),
        Comparison::at_most(
            "|reported residual| / n over engine ledgers (3 sigma)",
            3.0 * sigma,
            (agg.residual / n as f64).abs(),
        ),
        Comparison::at_most(
            "|mean residual per member|, lln experiment (3 sigma)",
            3.0 * stats.expected_sigma,
            stats.abs_mean,
        ),
    ])
}

fn find(events: &[Event], kind: EventKind) -> Option<&Event> {
    events.iter().find(|e| e.kind == kind)
}

/// Time of the subsidy-withdrawal event of a shale-like scenario.
pub fn subsidy_time(ast: &ScenarioAst) -> Result<Option<f64>, DemoError> {
    let result = engine::run(ast)?;
    let events = analysis::run_scenario_detectors(ast, &result)?;
    Ok(find(&events, EventKind::SubsidyCross).map(|e| e.time))
}

fn shale(ast: &ScenarioAst, events: &[Event]) -> Result<Vec<Comparison>, DemoError> {
    let dt = ast.dt.to_f64();
    let exact = 10.0 / 3.0;
    let mut out = vec![Comparison::new("SubsidyCross events", 1.0, events.len() as f64, 0.0)];
    let Some(e) = find(events, EventKind::SubsidyCross) else {
        return Ok(out);
    };
    out.push(Comparison::new("t* vs 10/3", exact, e.time, dt));
    out.push(Comparison::new("bracket start tick", 333.0, e.witness["tick_lo"], 0.0));
    let fine = refine(ast);
    if let Some(t) = subsidy_time(&fine)? {
        out.push(Comparison::new("t* at dt/2 vs t* at dt", e.time, t, dt));
    } else {
        out.push(Comparison::new("t* at dt/2 found", 1.0, 0.0, 0.0));
    }
    Ok(out)
}

fn government(ast: &ScenarioAst, events: &[Event]) -> Vec<Comparison> {
    let dt = ast.dt.to_f64();
    let found: Vec<&Event> = events.iter().filter(|e| e.kind == EventKind::GovOptimum).collect();
    let mut out = vec![Comparison::new("GovOptimum events", 1.0, found.len() as f64, 0.0)];
    if let Some(e) = found.first() {
        out.push(Comparison::new("t* vs 3.5", 3.5, e.time, dt));
        out.push(Comparison::at_most(
            "|VGg' + VGc'| at event",
            10.0 * dt * dt,
            e.witness["sum_rate"].abs(),
        ));
        out.push(Comparison::new(
            "VGg' vs -VGc' at event",
            e.witness["neg_vgc_rate"],
            e.witness["vgg_rate"],
            10.0 * dt * dt,
        ));
    }
    out
}
