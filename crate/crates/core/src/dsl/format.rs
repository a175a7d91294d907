use std::fmt::Write;

use super::ast::*;

/// Shortest decimal text for a micro-unit count: `2`, `0.05`, `-1.5`.
fn number(micro: i64) -> String {
    let sign = if micro < 0 { "-" } else { "" };
    let abs = micro.unsigned_abs();
    let int = abs / 1_000_000;
    let frac = abs % 1_000_000;
    if frac == 0 {
        format!("{sign}{int}")
    } else {
        let digits = format!("{frac:06}");
        format!("{sign}{int}.{}", digits.trim_end_matches('0'))
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn expr(e: &RateExpr) -> String {
    match e {
        RateExpr::Const(v) => number(v.micro()),
        RateExpr::Prop { target, k } => format!("prop({target}, {})", number(k.micro())),
        RateExpr::Ramp { a, b } => format!("ramp({}, {})", number(a.micro()), number(b.micro())),
    }
}

/// Canonical text: header settings, then pools, agents, cycles, policies
/// and detectors, each group in declaration order. Comments are not kept.
pub fn format_scenario(ast: &ScenarioAst) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {} {{", quote(&ast.name));
    let _ = writeln!(out, "  dt = {}", number(ast.dt.micro()));
    let _ = writeln!(out, "  horizon = {}", ast.horizon);
    let _ = writeln!(out, "  seed = {}", ast.seed);

    if !ast.pools.is_empty() {
        out.push('\n');
    }
    for p in &ast.pools {
        let initial = match p.capacity {
            Capacity::Finite(v) => number(v.micro()),
            Capacity::Abundant => "abundant".to_string(),
        };
        let _ = writeln!(out, "  pool {} {{ initial = {initial} }}", p.id);
    }

    if !ast.agents.is_empty() {
        out.push('\n');
    }
    for a in &ast.agents {
        let _ = writeln!(
            out,
            "  agent {} {{ initial = {} role = {} }}",
            a.id,
            number(a.initial.micro()),
            a.role.as_str()
        );
    }

    for c in &ast.cycles {
        out.push('\n');
        match c.tag.as_str() {
            Some(tag) => {
                let _ = writeln!(out, "  cycle {} tag = {tag} {{", c.id);
            }
            None => {
                let _ = writeln!(out, "  cycle {} {{", c.id);
            }
        }
        let _ = writeln!(out, "    actor = {}", c.actor);
        let _ = writeln!(out, "    va = {}", expr(&c.va));
        let _ = writeln!(out, "    ve = {} from {}", expr(&c.ve), c.ve_source);
        match &c.vl_target {
            Some(t) => {
                let _ = writeln!(out, "    vl = {} to {t}", expr(&c.vl));
            }
            None => {
                let _ = writeln!(out, "    vl = {}", expr(&c.vl));
            }
        }
        if let Some(t) = &c.vg_target {
            let _ = writeln!(out, "    vg to {t}");
        }
        out.push_str("  }\n");
    }

    if !ast.policies.is_empty() {
        out.push('\n');
    }
    for p in &ast.policies {
        match &p.action {
            PolicyAction::Jolt {
                cycle,
                flow,
                amount,
                source,
            } => {
                let _ = writeln!(
                    out,
                    "  at {} jolt {cycle} {} {} from {source}",
                    p.trigger,
                    flow.as_str(),
                    number(amount.micro())
                );
            }
            PolicyAction::SetParam { target, value } => {
                let _ = writeln!(out, "  at {} set {target} = {}", p.trigger, number(value.micro()));
            }
        }
    }

    if !ast.detectors.is_empty() {
        out.push('\n');
    }
    for d in &ast.detectors {
        if d.args.is_empty() {
            let _ = writeln!(out, "  detect {}", d.kind.as_str());
        } else {
            let args: Vec<&str> = d.args.iter().map(|a| a.name.as_str()).collect();
            let _ = writeln!(out, "  detect {}({})", d.kind.as_str(), args.join(", "));
        }
    }
    out.push_str("}\n");
    out
}
