use std::fmt;

use serde::Serialize;

use crate::ledger::{Coefficient, ValueAmount};

/// A 1-based source position.
///
/// Spans never take part in structural equality: two ASTs that differ only
/// in where things were written compare equal.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl Span {
    pub fn new(line: u32, column: u32) -> Self {
        Span { line, column }
    }
}

/// A bare identifier with its position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Ident {
            name: name.into(),
            span: Span::default(),
        }
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// `name` or `name.field`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ref {
    pub name: String,
    pub field: Option<String>,
    pub span: Span,
}

impl fmt::Display for Ref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{}.{}", self.name, field),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScenarioAst {
    pub name: String,
    /// Length of one tick in scenario time units.
    pub dt: Coefficient,
    pub horizon: u64,
    pub seed: u64,
    pub pools: Vec<PoolDecl>,
    pub agents: Vec<AgentDecl>,
    pub cycles: Vec<CycleDecl>,
    pub policies: Vec<PolicyDecl>,
    pub detectors: Vec<DetectorDecl>,
    pub span: Span,
}

impl ScenarioAst {
    pub fn pool(&self, name: &str) -> Option<&PoolDecl> {
        self.pools.iter().find(|p| p.id.name == name)
    }

    pub fn agent(&self, name: &str) -> Option<&AgentDecl> {
        self.agents.iter().find(|a| a.id.name == name)
    }

    pub fn cycle(&self, name: &str) -> Option<&CycleDecl> {
        self.cycles.iter().find(|c| c.id.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Capacity {
    Finite(ValueAmount),
    /// Never depletes; the only permitted breach of closure.
    Abundant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PoolDecl {
    pub id: Ident,
    pub capacity: Capacity,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Producer,
    Consumer,
    Bank,
    CentralBank,
    Government,
    Citizens,
    Other,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Producer,
        Role::Consumer,
        Role::Bank,
        Role::CentralBank,
        Role::Government,
        Role::Citizens,
        Role::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Producer => "producer",
            Role::Consumer => "consumer",
            Role::Bank => "bank",
            Role::CentralBank => "central_bank",
            Role::Government => "government",
            Role::Citizens => "citizens",
            Role::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentDecl {
    pub id: Ident,
    pub initial: ValueAmount,
    pub role: Role,
    pub span: Span,
}

/// Cycle index labels: natural, government-supported, citizens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    N,
    G,
    C,
    None,
}

impl Tag {
    pub fn as_str(self) -> Option<&'static str> {
        match self {
            Tag::N => Some("n"),
            Tag::G => Some("g"),
            Tag::C => Some("c"),
            Tag::None => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flow {
    Va,
    Ve,
    Vl,
    Vg,
}

impl Flow {
    pub fn as_str(self) -> &'static str {
        match self {
            Flow::Va => "va",
            Flow::Ve => "ve",
            Flow::Vl => "vl",
            Flow::Vg => "vg",
        }
    }

    pub fn from_name(name: &str) -> Option<Flow> {
        match name {
            "va" => Some(Flow::Va),
            "ve" => Some(Flow::Ve),
            "vl" => Some(Flow::Vl),
            "vg" => Some(Flow::Vg),
            _ => None,
        }
    }
}

/// A flow rate in value per unit of scenario time. The amount moved in one
/// tick is the rate integrated over the tick.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum RateExpr {
    Const(ValueAmount),
    /// `k` times the referenced stock or pool level at tick start; for a
    /// `cycle.flow` reference, `k` times that flow's previous-tick amount.
    Prop {
        target: Ref,
        k: Coefficient,
    },
    /// `a + b·t`.
    Ramp {
        a: ValueAmount,
        b: ValueAmount,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleDecl {
    pub id: Ident,
    pub tag: Tag,
    pub actor: Ident,
    pub va: RateExpr,
    pub ve: RateExpr,
    pub ve_source: Ident,
    pub vl: RateExpr,
    /// `None` routes VL to the environment sink.
    pub vl_target: Option<Ident>,
    /// `None` credits VG to the actor.
    pub vg_target: Option<Ident>,
    pub span: Span,
}

impl CycleDecl {
    pub fn expr(&self, flow: Flow) -> Option<&RateExpr> {
        match flow {
            Flow::Va => Some(&self.va),
            Flow::Ve => Some(&self.ve),
            Flow::Vl => Some(&self.vl),
            Flow::Vg => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PolicyAction {
    /// Adds `amount` to one flow of `cycle` for the trigger tick, drawn from
    /// `source`.
    Jolt {
        cycle: Ident,
        flow: Flow,
        amount: ValueAmount,
        source: Ident,
    },
    /// Rewrites the leading parameter of `cycle.flow`'s rate expression:
    /// the constant of `Const`, `k` of `Prop`, the slope `b` of `Ramp`.
    SetParam { target: Ref, value: Coefficient },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PolicyDecl {
    /// Tick index at whose start the policy applies.
    pub trigger: u64,
    pub action: PolicyAction,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    MaxVg,
    StableMarket,
    SubsidyCross,
    GovOptimum,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::MaxVg,
        DetectorKind::StableMarket,
        DetectorKind::SubsidyCross,
        DetectorKind::GovOptimum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::MaxVg => "max_vg",
            DetectorKind::StableMarket => "stable_market",
            DetectorKind::SubsidyCross => "subsidy_cross",
            DetectorKind::GovOptimum => "gov_optimum",
        }
    }

    pub fn from_name(name: &str) -> Option<DetectorKind> {
        DetectorKind::ALL.into_iter().find(|d| d.as_str() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DetectorDecl {
    pub kind: DetectorKind,
    /// Cycle arguments; empty means "use the defaults for this detector".
    pub args: Vec<Ident>,
    pub span: Span,
}
