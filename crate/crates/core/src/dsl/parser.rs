use std::collections::HashMap;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::Diagnostic;
use crate::ledger::{Coefficient, LedgerError, Rounding, ValueAmount};

const ITEM_KEYWORDS: [&str; 8] = ["dt", "horizon", "seed", "pool", "agent", "cycle", "at", "detect"];

type PResult<T> = Result<T, Diagnostic>;

/// Parses and resolves a scenario. On failure every collected error is
/// returned, each with a line and column.
pub fn parse_scenario(text: &str) -> Result<ScenarioAst, Vec<Diagnostic>> {
    let (tokens, mut diags) = tokenize(text);
    let mut parser = Parser {
        tokens,
        pos: 0,
        depth: 0,
        diags: Vec::new(),
    };
    let ast = parser.scenario();
    diags.append(&mut parser.diags);
    match ast {
        Some(ast) if diags.is_empty() => {
            let resolve = resolve(&ast);
            if resolve.is_empty() {
                Ok(ast)
            } else {
                Err(resolve)
            }
        }
        _ => {
            if diags.is_empty() {
                diags.push(Diagnostic::error(Span::new(1, 1), "invalid scenario"));
            }
            diags.sort_by_key(|d| (d.line, d.column));
            Err(diags)
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    diags: Vec<Diagnostic>,
}

#[derive(Default)]
struct Items {
    dt: Option<Coefficient>,
    horizon: Option<u64>,
    horizon_attempted: bool,
    seed: Option<u64>,
    pools: Vec<PoolDecl>,
    agents: Vec<AgentDecl>,
    cycles: Vec<CycleDecl>,
    policies: Vec<PolicyDecl>,
    detectors: Vec<DetectorDecl>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        match tok.kind {
            TokenKind::LBrace => self.depth += 1,
            TokenKind::RBrace => self.depth = self.depth.saturating_sub(1),
            _ => {}
        }
        tok
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let tok = self.peek();
        Diagnostic::error(tok.span, format!("expected {expected}, found {}", tok.kind.describe()))
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> PResult<Span> {
        if self.peek().kind == kind {
            Ok(self.next().span)
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == word)
    }

    fn keyword(&mut self, word: &str) -> PResult<Span> {
        if self.at_keyword(word) {
            Ok(self.next().span)
        } else {
            Err(self.unexpected(&format!("'{word}'")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Ident> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let name = name.clone();
                let span = self.next().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn number_text(&mut self) -> PResult<(String, Span)> {
        match &self.peek().kind {
            TokenKind::Number(raw) => {
                let raw = raw.clone();
                let span = self.next().span;
                Ok((raw, span))
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn micro(raw: &str, span: Span) -> PResult<i64> {
        // Over-precise literals were already reported by the lexer.
        match crate::ledger::parse_micro(raw, Rounding::Exact) {
            Ok(v) => Ok(v),
            Err(LedgerError::TooPrecise(_)) => {
                crate::ledger::parse_micro(raw, Rounding::HalfEven).map_err(|e| Diagnostic::error(span, e.to_string()))
            }
            Err(e) => Err(Diagnostic::error(span, e.to_string())),
        }
    }

    fn amount(&mut self) -> PResult<ValueAmount> {
        let (raw, span) = self.number_text()?;
        Self::micro(&raw, span).map(ValueAmount::from_micro)
    }

    fn coefficient(&mut self) -> PResult<Coefficient> {
        let (raw, span) = self.number_text()?;
        Self::micro(&raw, span).map(Coefficient::from_micro)
    }

    fn whole(&mut self, what: &str) -> PResult<(u64, Span)> {
        let (raw, span) = self.number_text()?;
        raw.parse::<u64>()
            .map(|v| (v, span))
            .map_err(|_| Diagnostic::error(span, format!("{what} must be a non-negative whole number, found {raw}")))
    }

    /// Skips to the next item keyword at scenario level.
    fn recover(&mut self) {
        loop {
            let tok = self.peek();
            match &tok.kind {
                TokenKind::Eof => return,
                TokenKind::RBrace if self.depth <= 1 => return,
                TokenKind::Ident(word) if self.depth <= 1 && ITEM_KEYWORDS.contains(&word.as_str()) => return,
                _ => {
                    self.next();
                }
            }
        }
    }

    fn scenario(&mut self) -> Option<ScenarioAst> {
        let header = (|| -> PResult<(String, Span)> {
            let span = self.keyword("scenario")?;
            let name = match &self.peek().kind {
                TokenKind::Str(s) => {
                    let s = s.clone();
                    self.next();
                    s
                }
                _ => return Err(self.unexpected("a quoted scenario name")),
            };
            self.expect(TokenKind::LBrace, "'{'")?;
            Ok((name, span))
        })();
        let (name, span) = match header {
            Ok(h) => h,
            Err(d) => {
                self.diags.push(d);
                return None;
            }
        };

        let mut items = Items::default();
        loop {
            match &self.peek().kind {
                TokenKind::RBrace => {
                    self.next();
                    break;
                }
                TokenKind::Eof => {
                    self.diags.push(Diagnostic::error(
                        self.peek().span,
                        "unexpected end of file: scenario block is not closed",
                    ));
                    return None;
                }
                _ => {
                    if let Err(d) = self.item(&mut items) {
                        self.diags.push(d);
                        self.recover();
                    }
                }
            }
        }
        if self.peek().kind != TokenKind::Eof {
            self.diags.push(self.unexpected("end of file"));
        }

        let horizon = match items.horizon {
            Some(h) => h,
            None => {
                if !items.horizon_attempted {
                    self.diags
                        .push(Diagnostic::error(span, "scenario is missing 'horizon'"));
                }
                0
            }
        };
        Some(ScenarioAst {
            name,
            dt: items.dt.unwrap_or(Coefficient::ONE),
            horizon,
            seed: items.seed.unwrap_or(0),
            pools: items.pools,
            agents: items.agents,
            cycles: items.cycles,
            policies: items.policies,
            detectors: items.detectors,
            span,
        })
    }

    fn item(&mut self, items: &mut Items) -> PResult<()> {
        let word = match &self.peek().kind {
            TokenKind::Ident(w) if ITEM_KEYWORDS.contains(&w.as_str()) => w.clone(),
            _ => return Err(self.unexpected("an item (dt, horizon, seed, pool, agent, cycle, at, detect)")),
        };
        let kw_span = self.next().span;
        let duplicate = |what: &str| Diagnostic::error(kw_span, format!("'{what}' is set more than once"));
        match word.as_str() {
            "dt" => {
                self.expect(TokenKind::Eq, "'='")?;
                let (raw, span) = self.number_text()?;
                let dt = Coefficient::from_micro(Self::micro(&raw, span)?);
                if dt.micro() <= 0 {
                    return Err(Diagnostic::error(span, "dt must be positive"));
                }
                if items.dt.replace(dt).is_some() {
                    return Err(duplicate("dt"));
                }
            }
            "horizon" => {
                items.horizon_attempted = true;
                self.expect(TokenKind::Eq, "'='")?;
                let (h, span) = self.whole("horizon")?;
                if h == 0 {
                    return Err(Diagnostic::error(span, "horizon must be at least 1"));
                }
                if items.horizon.replace(h).is_some() {
                    return Err(duplicate("horizon"));
                }
            }
            "seed" => {
                self.expect(TokenKind::Eq, "'='")?;
                let (s, _) = self.whole("seed")?;
                if items.seed.replace(s).is_some() {
                    return Err(duplicate("seed"));
                }
            }
            "pool" => {
                let id = self.ident("a pool name")?;
                self.expect(TokenKind::LBrace, "'{'")?;
                self.keyword("initial")?;
                self.expect(TokenKind::Eq, "'='")?;
                let capacity = if self.at_keyword("abundant") {
                    self.next();
                    Capacity::Abundant
                } else {
                    let span = self.peek().span;
                    let level = self.amount()?;
                    if level.is_negative() {
                        return Err(Diagnostic::error(span, "finite pool capacity must be non-negative"));
                    }
                    Capacity::Finite(level)
                };
                self.expect(TokenKind::RBrace, "'}'")?;
                items.pools.push(PoolDecl {
                    id,
                    capacity,
                    span: kw_span,
                });
            }
            "agent" => {
                let id = self.ident("an agent name")?;
                self.expect(TokenKind::LBrace, "'{'")?;
                self.keyword("initial")?;
                self.expect(TokenKind::Eq, "'='")?;
                let initial = self.amount()?;
                let mut role = Role::Other;
                if self.at_keyword("role") {
                    self.next();
                    self.expect(TokenKind::Eq, "'='")?;
                    let r = self.ident("a role name")?;
                    role = Role::from_name(&r.name).ok_or_else(|| {
                        let names: Vec<_> = Role::ALL.iter().map(|r| r.as_str()).collect();
                        Diagnostic::error(
                            r.span,
                            format!("unknown role '{}' (expected one of {})", r.name, names.join(", ")),
                        )
                    })?;
                }
                self.expect(TokenKind::RBrace, "'}'")?;
                items.agents.push(AgentDecl {
                    id,
                    initial,
                    role,
                    span: kw_span,
                });
            }
            "cycle" => {
                let cycle = self.cycle(kw_span)?;
                items.cycles.push(cycle);
            }
            "at" => {
                let (trigger, _) = self.whole("policy trigger tick")?;
                let action = if self.at_keyword("jolt") {
                    self.next();
                    let cycle = self.ident("a cycle name")?;
                    let flow_ident = self.ident("'va', 've' or 'vl'")?;
                    let flow = match Flow::from_name(&flow_ident.name) {
                        Some(f @ (Flow::Va | Flow::Ve | Flow::Vl)) => f,
                        _ => {
                            return Err(Diagnostic::error(
                                flow_ident.span,
                                format!("expected 'va', 've' or 'vl', found '{}'", flow_ident.name),
                            ))
                        }
                    };
                    let amount = self.amount()?;
                    self.keyword("from")?;
                    let source = self.ident("a pool name")?;
                    PolicyAction::Jolt {
                        cycle,
                        flow,
                        amount,
                        source,
                    }
                } else if self.at_keyword("set") {
                    self.next();
                    let target = self.reference()?;
                    self.expect(TokenKind::Eq, "'='")?;
                    let value = self.coefficient()?;
                    PolicyAction::SetParam { target, value }
                } else {
                    return Err(self.unexpected("'jolt' or 'set'"));
                };
                items.policies.push(PolicyDecl {
                    trigger,
                    action,
                    span: kw_span,
                });
            }
            "detect" => {
                let name = self.ident("a detector name")?;
                let kind = DetectorKind::from_name(&name.name).ok_or_else(|| {
                    let names: Vec<_> = DetectorKind::ALL.iter().map(|d| d.as_str()).collect();
                    Diagnostic::error(
                        name.span,
                        format!(
                            "unknown detector '{}' (expected one of {})",
                            name.name,
                            names.join(", ")
                        ),
                    )
                })?;
                let mut args = Vec::new();
                if self.peek().kind == TokenKind::LParen {
                    self.next();
                    args.push(self.ident("a cycle name")?);
                    while self.peek().kind == TokenKind::Comma {
                        self.next();
                        args.push(self.ident("a cycle name")?);
                    }
                    self.expect(TokenKind::RParen, "')' or ','")?;
                }
                items.detectors.push(DetectorDecl {
                    kind,
                    args,
                    span: kw_span,
                });
            }
            _ => unreachable!("filtered by ITEM_KEYWORDS"),
        }
        Ok(())
    }

    fn cycle(&mut self, kw_span: Span) -> PResult<CycleDecl> {
        const ORDER: [&str; 5] = ["actor", "va", "ve", "vl", "vg"];

        let id = self.ident("a cycle name")?;
        let mut tag = Tag::None;
        if self.at_keyword("tag") {
            self.next();
            self.expect(TokenKind::Eq, "'='")?;
            let t = self.ident("'n', 'g' or 'c'")?;
            tag = match t.name.as_str() {
                "n" => Tag::N,
                "g" => Tag::G,
                "c" => Tag::C,
                other => {
                    return Err(Diagnostic::error(
                        t.span,
                        format!("expected tag 'n', 'g' or 'c', found '{other}'"),
                    ))
                }
            };
        }
        self.expect(TokenKind::LBrace, "'{'")?;

        let mut actor = None;
        let mut va = None;
        let mut ve = None;
        let mut vl = None;
        let mut vg_target = None;
        let mut last = None::<usize>;
        loop {
            let tok = self.peek().clone();
            let word = match &tok.kind {
                TokenKind::RBrace => {
                    self.next();
                    break;
                }
                TokenKind::Ident(w) if ORDER.contains(&w.as_str()) => w.clone(),
                _ => return Err(self.unexpected("a cycle clause (actor, va, ve, vl, vg) or '}'")),
            };
            let idx = ORDER.iter().position(|w| *w == word).unwrap();
            let seen = match idx {
                0 => actor.is_some(),
                1 => va.is_some(),
                2 => ve.is_some(),
                3 => vl.is_some(),
                _ => vg_target.is_some(),
            };
            if seen {
                return Err(Diagnostic::error(tok.span, format!("duplicate '{word}' clause")));
            }
            if last.is_some_and(|l| idx < l) {
                return Err(Diagnostic::error(
                    tok.span,
                    format!("'{word}' clause out of order (expected actor, va, ve, vl, vg)"),
                ));
            }
            last = Some(idx);
            self.next();
            match idx {
                0 => {
                    self.expect(TokenKind::Eq, "'='")?;
                    actor = Some(self.ident("an agent name")?);
                }
                1 => {
                    self.expect(TokenKind::Eq, "'='")?;
                    va = Some(self.expr()?);
                }
                2 => {
                    self.expect(TokenKind::Eq, "'='")?;
                    let e = self.expr()?;
                    self.keyword("from")?;
                    ve = Some((e, self.ident("a pool or agent name")?));
                }
                3 => {
                    self.expect(TokenKind::Eq, "'='")?;
                    let e = self.expr()?;
                    let target = if self.at_keyword("to") {
                        self.next();
                        Some(self.ident("a pool or agent name")?)
                    } else {
                        None
                    };
                    vl = Some((e, target));
                }
                _ => {
                    self.keyword("to")?;
                    vg_target = Some(self.ident("a pool or agent name")?);
                }
            }
        }

        let missing =
            |clause: &str| Diagnostic::error(kw_span, format!("cycle '{}' is missing the '{clause}' clause", id.name));
        let mut errors = Vec::new();
        if actor.is_none() {
            errors.push(missing("actor"));
        }
        if va.is_none() {
            errors.push(missing("va"));
        }
        if ve.is_none() {
            errors.push(missing("ve"));
        }
        if vl.is_none() {
            errors.push(missing("vl"));
        }
        if !errors.is_empty() {
            let first = errors.remove(0);
            self.diags.extend(errors);
            return Err(first);
        }
        let (ve, ve_source) = ve.unwrap();
        let (vl, vl_target) = vl.unwrap();
        Ok(CycleDecl {
            id,
            tag,
            actor: actor.unwrap(),
            va: va.unwrap(),
            ve,
            ve_source,
            vl,
            vl_target,
            vg_target,
            span: kw_span,
        })
    }

    fn reference(&mut self) -> PResult<Ref> {
        let head = self.ident("a name")?;
        let field = if self.peek().kind == TokenKind::Dot {
            self.next();
            Some(self.ident("a field name")?.name)
        } else {
            None
        };
        Ok(Ref {
            name: head.name,
            field,
            span: head.span,
        })
    }

    fn expr(&mut self) -> PResult<RateExpr> {
        match &self.peek().kind {
            TokenKind::Number(_) => Ok(RateExpr::Const(self.amount()?)),
            TokenKind::Ident(w) if w == "prop" => {
                self.next();
                self.expect(TokenKind::LParen, "'('")?;
                let target = self.reference()?;
                self.expect(TokenKind::Comma, "','")?;
                let k = self.coefficient()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(RateExpr::Prop { target, k })
            }
            TokenKind::Ident(w) if w == "ramp" => {
                self.next();
                self.expect(TokenKind::LParen, "'('")?;
                let a = self.amount()?;
                self.expect(TokenKind::Comma, "','")?;
                let b = self.amount()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(RateExpr::Ramp { a, b })
            }
            _ => Err(self.unexpected("a rate expression (number, prop(...) or ramp(...))")),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Holder {
    Pool,
    Agent,
}

/// Name resolution and cross-item checks on a syntactically valid AST.
pub(crate) fn resolve(ast: &ScenarioAst) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut holders: HashMap<&str, (Holder, Span)> = HashMap::new();
    let declared = ast
        .pools
        .iter()
        .map(|p| (&p.id, Holder::Pool))
        .chain(ast.agents.iter().map(|a| (&a.id, Holder::Agent)));
    for (id, kind) in declared {
        if let Some((_, first)) = holders.get(id.name.as_str()) {
            diags.push(Diagnostic::error(
                id.span,
                format!(
                    "duplicate identifier '{}' (first declared at line {})",
                    id.name, first.line
                ),
            ));
        } else {
            holders.insert(&id.name, (kind, id.span));
        }
    }
    let mut cycles: HashMap<&str, &CycleDecl> = HashMap::new();
    for c in &ast.cycles {
        if let Some(first) = cycles.get(c.id.name.as_str()) {
            diags.push(Diagnostic::error(
                c.id.span,
                format!(
                    "duplicate identifier '{}' (first declared at line {})",
                    c.id.name, first.id.span.line
                ),
            ));
        } else {
            cycles.insert(&c.id.name, c);
        }
    }

    let unresolved = |name: &str, span: Span| Diagnostic::error(span, format!("unresolved reference '{name}'"));
    let holder = |id: &Ident, diags: &mut Vec<Diagnostic>| {
        if !holders.contains_key(id.name.as_str()) {
            diags.push(unresolved(&id.name, id.span));
        }
    };
    let cycle_flow = |r: &Ref, allowed: &[Flow], diags: &mut Vec<Diagnostic>| {
        if !cycles.contains_key(r.name.as_str()) {
            diags.push(unresolved(&r.name, r.span));
            return;
        }
        let field = r.field.as_deref().unwrap_or("");
        if !Flow::from_name(field).is_some_and(|f| allowed.contains(&f)) {
            let names: Vec<_> = allowed.iter().map(|f| f.as_str()).collect();
            diags.push(Diagnostic::error(
                r.span,
                format!("'{r}' must name a cycle flow ({})", names.join(", ")),
            ));
        }
    };
    let expr = |e: &RateExpr, diags: &mut Vec<Diagnostic>| {
        if let RateExpr::Prop { target, .. } = e {
            match &target.field {
                None => {
                    if !holders.contains_key(target.name.as_str()) {
                        diags.push(unresolved(&target.name, target.span));
                    } else if ast.pool(&target.name).is_some_and(|p| p.capacity == Capacity::Abundant) {
                        diags.push(Diagnostic::error(
                            target.span,
                            format!("prop cannot read abundant pool '{}'; it has no level", target.name),
                        ));
                    }
                }
                Some(_) => cycle_flow(target, &[Flow::Va, Flow::Ve, Flow::Vl, Flow::Vg], diags),
            }
        }
    };

    for c in &ast.cycles {
        match holders.get(c.actor.name.as_str()) {
            Some((Holder::Agent, _)) => {}
            Some((Holder::Pool, _)) => diags.push(Diagnostic::error(
                c.actor.span,
                format!("actor '{}' is a pool; an actor must be an agent", c.actor.name),
            )),
            None => diags.push(unresolved(&c.actor.name, c.actor.span)),
        }
        holder(&c.ve_source, &mut diags);
        if let Some(t) = &c.vl_target {
            holder(t, &mut diags);
        }
        if let Some(t) = &c.vg_target {
            holder(t, &mut diags);
        }
        expr(&c.va, &mut diags);
        expr(&c.ve, &mut diags);
        expr(&c.vl, &mut diags);
    }

    for p in &ast.policies {
        if p.trigger >= ast.horizon {
            diags.push(Diagnostic::error(
                p.span,
                format!(
                    "policy trigger tick {} is outside the horizon of {} ticks",
                    p.trigger, ast.horizon
                ),
            ));
        }
        match &p.action {
            PolicyAction::Jolt { cycle, source, .. } => {
                if !cycles.contains_key(cycle.name.as_str()) {
                    diags.push(unresolved(&cycle.name, cycle.span));
                }
                match holders.get(source.name.as_str()) {
                    Some((Holder::Pool, _)) => {}
                    Some((Holder::Agent, _)) => diags.push(Diagnostic::error(
                        source.span,
                        format!("jolt source '{}' must be a pool", source.name),
                    )),
                    None => diags.push(unresolved(&source.name, source.span)),
                }
            }
            PolicyAction::SetParam { target, .. } => {
                cycle_flow(target, &[Flow::Va, Flow::Ve, Flow::Vl], &mut diags);
            }
        }
    }

    for d in &ast.detectors {
        for arg in &d.args {
            if !cycles.contains_key(arg.name.as_str()) {
                diags.push(unresolved(&arg.name, arg.span));
            }
        }
        let pair = match d.kind {
            DetectorKind::SubsidyCross => Some((Tag::G, Tag::N)),
            DetectorKind::GovOptimum => Some((Tag::G, Tag::C)),
            _ => None,
        };
        if let Some((first, second)) = pair {
            if d.args.is_empty() {
                for tag in [first, second] {
                    let count = ast.cycles.iter().filter(|c| c.tag == tag).count();
                    if count != 1 {
                        diags.push(Diagnostic::error(
                            d.span,
                            format!(
                                "detector {} without arguments needs exactly one cycle tagged '{}', found {count}",
                                d.kind.as_str(),
                                tag.as_str().unwrap_or("")
                            ),
                        ));
                    }
                }
            } else if d.args.len() != 2 {
                diags.push(Diagnostic::error(
                    d.span,
                    format!(
                        "detector {} takes exactly two cycles, found {}",
                        d.kind.as_str(),
                        d.args.len()
                    ),
                ));
            }
        }
    }

    diags.sort_by_key(|d| (d.line, d.column));
    diags
}
