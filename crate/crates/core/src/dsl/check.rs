use super::ast::*;
use super::Diagnostic;
use crate::engine::rates;
use crate::ledger::ValueAmount;

/// Static closure analysis. Pure: the same AST always yields the same
/// diagnostics, in the same order.
///
/// Reports:
/// - an info note for every abundant pool (a declared opening of the system);
/// - a warning for every cycle whose VL leaves for the environment sink;
/// - a warning when constant and ramp VE draws (plus jolts) can exhaust a
///   finite pool before the horizon, ignoring any inflows;
/// - a warning when constant VA draws alone can push an agent's stock below
///   zero before the horizon, ignoring any inflows;
/// - an info note when several cycles contend for one finite pool.
pub fn check_scenario(ast: &ScenarioAst) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    for pool in &ast.pools {
        if pool.capacity == Capacity::Abundant {
            diags.push(Diagnostic::info(
                pool.span,
                format!("system open via pool '{}'", pool.id.name),
            ));
        }
    }

    for c in &ast.cycles {
        let silent = matches!(c.vl, RateExpr::Const(v) if v == ValueAmount::ZERO);
        if c.vl_target.is_none() && !silent {
            diags.push(Diagnostic::warning(
                c.span,
                format!(
                    "cycle '{}' routes VL to the environment sink; value leaves circulation",
                    c.id.name
                ),
            ));
        }
    }

    for pool in &ast.pools {
        let Capacity::Finite(level) = pool.capacity else {
            continue;
        };
        let drawers: Vec<&CycleDecl> = ast.cycles.iter().filter(|c| c.ve_source.name == pool.id.name).collect();
        if drawers.len() > 1 {
            let names: Vec<String> = drawers.iter().map(|c| format!("'{}'", c.id.name)).collect();
            diags.push(Diagnostic::info(
                pool.span,
                format!(
                    "cycles {} draw from finite pool '{}'; contention resolves in declaration order",
                    names.join(", "),
                    pool.id.name
                ),
            ));
        }
        if let Some(tick) = depletion_tick(ast, pool, level, &drawers) {
            diags.push(Diagnostic::warning(
                pool.span,
                format!("pool '{}' may be depleted at tick {tick}", pool.id.name),
            ));
        }
    }

    for agent in &ast.agents {
        let mut debit: i128 = 0;
        for c in &ast.cycles {
            if c.actor.name == agent.id.name {
                if let RateExpr::Const(rate) = c.va {
                    debit += i128::from(rates::const_amount(rate, ast.dt).map_or(0, |v| v.micro()));
                }
            }
            if c.ve_source.name == agent.id.name {
                if let RateExpr::Const(rate) = c.ve {
                    debit += i128::from(rates::const_amount(rate, ast.dt).map_or(0, |v| v.micro()));
                }
            }
        }
        if debit <= 0 {
            continue;
        }
        let initial = i128::from(agent.initial.micro());
        // First k with initial - (k + 1)·debit < 0.
        let tick = if initial < 0 { 0 } else { initial / debit };
        if tick < i128::from(ast.horizon) {
            diags.push(Diagnostic::warning(
                agent.span,
                format!("agent '{}': stock may go negative at tick {tick}", agent.id.name),
            ));
        }
    }

    diags
}

/// Worst-case first tick at which cumulative draws exceed the pool's level.
fn depletion_tick(ast: &ScenarioAst, pool: &PoolDecl, level: ValueAmount, drawers: &[&CycleDecl]) -> Option<u64> {
    let jolts: Vec<(u64, i128)> = ast
        .policies
        .iter()
        .filter_map(|p| match &p.action {
            PolicyAction::Jolt { amount, source, .. } if source.name == pool.id.name => {
                Some((p.trigger, i128::from(amount.micro().max(0))))
            }
            _ => None,
        })
        .collect();
    let bounded: Vec<&RateExpr> = drawers
        .iter()
        .map(|c| &c.ve)
        .filter(|e| !matches!(e, RateExpr::Prop { .. }))
        .collect();
    if bounded.is_empty() && jolts.is_empty() {
        return None;
    }
    let mut drawn: i128 = 0;
    for tick in 0..ast.horizon {
        for e in &bounded {
            let amount = match e {
                RateExpr::Const(rate) => rates::const_amount(*rate, ast.dt),
                RateExpr::Ramp { a, b } => rates::ramp_amount(*a, *b, tick, ast.dt),
                RateExpr::Prop { .. } => continue,
            };
            drawn += i128::from(amount.map_or(i64::MAX, |v| v.micro()).max(0));
        }
        drawn += jolts.iter().filter(|(t, _)| *t == tick).map(|(_, a)| a).sum::<i128>();
        if drawn > i128::from(level.micro()) {
            return Some(tick);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_scenario, Severity};

    #[test]
    fn closed_system_has_no_warnings() {
        let ast = parse_scenario(
            r#"scenario "closed" {
  horizon = 100
  pool ore { initial = 1000 }
  agent miner { initial = 10 }
  agent smelter { initial = 10 }
  cycle dig { actor = miner va = prop(miner, 0.1) ve = prop(ore, 0.01) from ore vl = 1 to smelter }
}"#,
        )
        .unwrap();
        assert!(check_scenario(&ast).is_empty());
    }

    #[test]
    fn constant_va_projection() {
        let ast = parse_scenario(
            r#"scenario "drain" {
  horizon = 10
  pool p { initial = 0 }
  agent a { initial = 50 }
  agent other { initial = 0 }
  cycle c { actor = a va = 10 ve = 0 from p vl = 0 to other vg to other }
}"#,
        )
        .unwrap();
        let diags = check_scenario(&ast);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
        assert!(diags[0].message.ends_with("stock may go negative at tick 5"));
        assert_eq!(diags[0].line, 4);
    }

    #[test]
    fn abundant_pool_note_and_sink_warning() {
        let ast = parse_scenario(
            r#"scenario "open" {
  horizon = 3
  pool future { initial = abundant }
  agent a { initial = 5 }
  cycle c { actor = a va = 0 ve = 1 from future vl = 1 }
}"#,
        )
        .unwrap();
        let diags = check_scenario(&ast);
        assert_eq!(diags[0].severity, Severity::Info);
        assert_eq!(diags[0].message, "system open via pool 'future'");
        assert_eq!(diags[1].severity, Severity::Warning);
        assert!(diags[1].message.contains("environment sink"));
        assert_eq!(diags.len(), 2);
    }

    #[test]
    fn depletion_and_contention() {
        let ast = parse_scenario(
            r#"scenario "deplete" {
  horizon = 10
  pool well { initial = 20 }
  agent a { initial = 0 }
  cycle one { actor = a va = 0 ve = 2 from well vl = 0 }
  cycle two { actor = a va = 0 ve = ramp(0, 2) from well vl = 0 }
  at 1 jolt one va 5 from well
}"#,
        )
        .unwrap();
        let diags = check_scenario(&ast);
        assert!(diags[0].message.contains("contention"));
        // Cumulative draws: t0 2+1=3, t1 3+2+3+5=13, t2 13+2+5=20, t3 20+2+7=29.
        assert_eq!(diags[1].message, "pool 'well' may be depleted at tick 3");
        assert_eq!(check_scenario(&ast), diags);
    }
}
