//! Deterministic tick loop.
//!
//! Each tick, policies triggered at that tick apply first, in declaration
//! order. Cycles then run in declaration order. Every rate expression reads
//! the tick-start snapshot of stocks and pool levels, while debits and
//! credits are applied as each cycle runs, so contention on a finite pool
//! always resolves the same way.

pub mod rates;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{Capacity, CycleDecl, Flow, PolicyAction, PolicyDecl, RateExpr, ScenarioAst};
use crate::ledger::{Coefficient, CycleLedger, LedgerError, TickFlows, ValueAmount};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("value overflow at tick {tick}")]
    Overflow { tick: u64 },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("tick {tick} is past the horizon of {horizon}")]
    PastHorizon { tick: u64, horizon: u64 },
    #[error("policy for tick {trigger} applied at tick {tick}")]
    WrongTick { trigger: u64, tick: u64 },
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentStock {
    pub id: String,
    pub amount: ValueAmount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PoolState {
    pub id: String,
    /// Current level of a finite pool; `Abundant` pools have none.
    pub level: Capacity,
    /// Net value drawn from an abundant pool so far (zero for finite pools).
    pub cumulative_outflow: ValueAmount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
struct PendingJolt {
    cycle: usize,
    flow: Flow,
    amount: ValueAmount,
    source: usize,
    log_index: usize,
}

/// Everything the engine carries from one tick to the next.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WorldState {
    /// Number of ticks executed so far.
    pub tick: u64,
    pub stocks: Vec<AgentStock>,
    pub pools: Vec<PoolState>,
    /// Value lost to the environment.
    pub sink: ValueAmount,
    pub ledgers: Vec<CycleLedger>,
    /// Live rate expressions (va, ve, vl) per cycle, as rewritten by policies.
    rates: Vec<[RateExpr; 3]>,
    last_flows: Vec<TickFlows>,
    pending: Vec<PendingJolt>,
    below_zero: Vec<bool>,
}

impl WorldState {
    pub fn stock(&self, agent: &str) -> Option<ValueAmount> {
        self.stocks.iter().find(|s| s.id == agent).map(|s| s.amount)
    }

    pub fn pool(&self, id: &str) -> Option<&PoolState> {
        self.pools.iter().find(|p| p.id == id)
    }

    pub fn ledger(&self, cycle: &str) -> Option<&CycleLedger> {
        self.ledgers.iter().find(|l| l.cycle_id == cycle)
    }
}

/// `Σ stocks + Σ finite pool levels + sink − Σ abundant outflows`.
pub fn total_system_value(state: &WorldState) -> Result<ValueAmount, LedgerError> {
    let mut total = state.sink;
    for s in &state.stocks {
        total = total.checked_add(s.amount)?;
    }
    for p in &state.pools {
        total = match p.level {
            Capacity::Finite(level) => total.checked_add(level)?,
            Capacity::Abundant => total.checked_sub(p.cumulative_outflow)?,
        };
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunWarning {
    pub tick: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyRecord {
    Jolt {
        cycle: String,
        flow: Flow,
        requested: ValueAmount,
        /// Amount actually moved after clamping; filled in when the tick runs.
        moved: Option<ValueAmount>,
        source: String,
    },
    Set {
        target: String,
        previous: String,
        value: Coefficient,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AppliedPolicy {
    pub tick: u64,
    #[serde(flatten)]
    pub record: PolicyRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Node {
    Agent(usize),
    Pool(usize),
    Sink,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PropSource {
    Agent(usize),
    Pool(usize),
    Flow(usize, Flow),
}

#[derive(Clone, Debug)]
struct CompiledCycle {
    actor: usize,
    ve_source: Node,
    vl_target: Node,
    vg_target: Node,
    props: [Option<PropSource>; 3],
}

/// A scenario with every name resolved to an index.
#[derive(Clone, Debug)]
pub struct Engine {
    ast: ScenarioAst,
    cycles: Vec<CompiledCycle>,
    log: Vec<AppliedPolicy>,
}

const FLOWS: [Flow; 3] = [Flow::Va, Flow::Ve, Flow::Vl];

fn flow_slot(flow: Flow) -> Option<usize> {
    FLOWS.iter().position(|f| *f == flow)
}

impl Engine {
    pub fn new(ast: &ScenarioAst) -> Result<Engine> {
        let holder = |name: &str| -> Result<Node> {
            if let Some(i) = ast.agents.iter().position(|a| a.id.name == name) {
                Ok(Node::Agent(i))
            } else if let Some(i) = ast.pools.iter().position(|p| p.id.name == name) {
                Ok(Node::Pool(i))
            } else {
                Err(EngineError::Invalid(format!("unresolved reference '{name}'")))
            }
        };
        let cycle_index = |name: &str| {
            ast.cycles
                .iter()
                .position(|c| c.id.name == name)
                .ok_or_else(|| EngineError::Invalid(format!("unresolved reference '{name}'")))
        };
        if ast.dt.micro() <= 0 {
            return Err(EngineError::Invalid("dt must be positive".into()));
        }
        let mut cycles = Vec::with_capacity(ast.cycles.len());
        for c in &ast.cycles {
            let actor = match holder(&c.actor.name)? {
                Node::Agent(i) => i,
                _ => {
                    return Err(EngineError::Invalid(format!(
                        "actor '{}' is not an agent",
                        c.actor.name
                    )))
                }
            };
            let mut props = [None; 3];
            for (slot, flow) in FLOWS.iter().enumerate() {
                if let Some(RateExpr::Prop { target, .. }) = c.expr(*flow) {
                    props[slot] = Some(match &target.field {
                        None => match holder(&target.name)? {
                            Node::Agent(i) => PropSource::Agent(i),
                            Node::Pool(i) if ast.pools[i].capacity == Capacity::Abundant => {
                                return Err(EngineError::Invalid(format!(
                                    "prop cannot read abundant pool '{}'",
                                    target.name
                                )))
                            }
                            Node::Pool(i) => PropSource::Pool(i),
                            Node::Sink => unreachable!(),
                        },
                        Some(field) => {
                            let f = Flow::from_name(field)
                                .ok_or_else(|| EngineError::Invalid(format!("'{target}' is not a cycle flow")))?;
                            PropSource::Flow(cycle_index(&target.name)?, f)
                        }
                    });
                }
            }
            cycles.push(CompiledCycle {
                actor,
                ve_source: holder(&c.ve_source.name)?,
                vl_target: c.vl_target.as_ref().map_or(Ok(Node::Sink), |t| holder(&t.name))?,
                vg_target: c
                    .vg_target
                    .as_ref()
                    .map_or(Ok(Node::Agent(actor)), |t| holder(&t.name))?,
                props,
            });
        }
        for p in &ast.policies {
            match &p.action {
                PolicyAction::Jolt {
                    cycle, flow, source, ..
                } => {
                    cycle_index(&cycle.name)?;
                    if flow_slot(*flow).is_none() {
                        return Err(EngineError::Invalid("jolts apply to va, ve or vl".into()));
                    }
                    if !matches!(holder(&source.name)?, Node::Pool(_)) {
                        return Err(EngineError::Invalid(format!(
                            "jolt source '{}' must be a pool",
                            source.name
                        )));
                    }
                }
                PolicyAction::SetParam { target, .. } => {
                    cycle_index(&target.name)?;
                    if target
                        .field
                        .as_deref()
                        .and_then(Flow::from_name)
                        .and_then(flow_slot)
                        .is_none()
                    {
                        return Err(EngineError::Invalid(format!(
                            "'{target}' must name va, ve or vl of a cycle"
                        )));
                    }
                }
            }
        }
        Ok(Engine {
            ast: ast.clone(),
            cycles,
            log: Vec::new(),
        })
    }

    pub fn ast(&self) -> &ScenarioAst {
        &self.ast
    }

    pub fn policy_log(&self) -> &[AppliedPolicy] {
        &self.log
    }

    pub fn initial_state(&self) -> WorldState {
        let ast = &self.ast;
        WorldState {
            tick: 0,
            stocks: ast
                .agents
                .iter()
                .map(|a| AgentStock {
                    id: a.id.name.clone(),
                    amount: a.initial,
                })
                .collect(),
            pools: ast
                .pools
                .iter()
                .map(|p| PoolState {
                    id: p.id.name.clone(),
                    level: p.capacity,
                    cumulative_outflow: ValueAmount::ZERO,
                })
                .collect(),
            sink: ValueAmount::ZERO,
            ledgers: ast.cycles.iter().map(|c| CycleLedger::new(c.id.name.clone())).collect(),
            rates: ast
                .cycles
                .iter()
                .map(|c: &CycleDecl| [c.va.clone(), c.ve.clone(), c.vl.clone()])
                .collect(),
            last_flows: vec![TickFlows::default(); ast.cycles.len()],
            pending: Vec::new(),
            below_zero: ast.agents.iter().map(|a| a.initial.is_negative()).collect(),
        }
    }

    /// Applies a policy at the start of the current tick. Jolts are queued
    /// and move value when the tick runs; parameter changes take effect
    /// immediately.
    pub fn apply_policy(&mut self, state: &mut WorldState, policy: &PolicyDecl) -> Result<()> {
        if policy.trigger != state.tick {
            return Err(EngineError::WrongTick {
                trigger: policy.trigger,
                tick: state.tick,
            });
        }
        let ast = &self.ast;
        let cycle_index = |name: &str| ast.cycles.iter().position(|c| c.id.name == name);
        let record = match &policy.action {
            PolicyAction::Jolt {
                cycle,
                flow,
                amount,
                source,
            } => {
                let c = cycle_index(&cycle.name).ok_or_else(|| EngineError::Invalid(cycle.name.clone()))?;
                let s = ast
                    .pools
                    .iter()
                    .position(|p| p.id.name == source.name)
                    .ok_or_else(|| EngineError::Invalid(source.name.clone()))?;
                state.pending.push(PendingJolt {
                    cycle: c,
                    flow: *flow,
                    amount: *amount,
                    source: s,
                    log_index: self.log.len(),
                });
                PolicyRecord::Jolt {
                    cycle: cycle.name.clone(),
                    flow: *flow,
                    requested: *amount,
                    moved: None,
                    source: source.name.clone(),
                }
            }
            PolicyAction::SetParam { target, value } => {
                let c = cycle_index(&target.name).ok_or_else(|| EngineError::Invalid(target.to_string()))?;
                let slot = target
                    .field
                    .as_deref()
                    .and_then(Flow::from_name)
                    .and_then(flow_slot)
                    .ok_or_else(|| EngineError::Invalid(target.to_string()))?;
                let expr = &mut state.rates[c][slot];
                let previous = match expr {
                    RateExpr::Const(v) => std::mem::replace(v, ValueAmount::from_micro(value.micro())).to_string(),
                    RateExpr::Prop { k, .. } => std::mem::replace(k, *value).to_string(),
                    RateExpr::Ramp { b, .. } => {
                        std::mem::replace(b, ValueAmount::from_micro(value.micro())).to_string()
                    }
                };
                PolicyRecord::Set {
                    target: target.to_string(),
                    previous,
                    value: *value,
                }
            }
        };
        self.log.push(AppliedPolicy {
            tick: state.tick,
            record,
        });
        Ok(())
    }

    fn eval(
        &self,
        state: &WorldState,
        snapshot: &Snapshot,
        cycle: usize,
        slot: usize,
    ) -> Result<ValueAmount, LedgerError> {
        let dt = self.ast.dt;
        match &state.rates[cycle][slot] {
            RateExpr::Const(rate) => rates::const_amount(*rate, dt),
            RateExpr::Ramp { a, b } => rates::ramp_amount(*a, *b, state.tick, dt),
            RateExpr::Prop { k, .. } => match self.cycles[cycle].props[slot].expect("compiled prop") {
                PropSource::Agent(i) => rates::prop_amount(*k, snapshot.stocks[i], dt),
                PropSource::Pool(i) => rates::prop_amount(*k, snapshot.pools[i], dt),
                PropSource::Flow(c, flow) => {
                    let f = &state.last_flows[c];
                    let prev = match flow {
                        Flow::Va => f.va,
                        Flow::Ve => f.ve,
                        Flow::Vl => f.vl,
                        Flow::Vg => f.vg,
                    };
                    prev.scale(*k)
                }
            },
        }
    }

    /// Runs one tick and returns each cycle's flows, in declaration order.
    pub fn step(&mut self, state: &mut WorldState, warnings: &mut Vec<RunWarning>) -> Result<Vec<TickFlows>> {
        if state.tick >= self.ast.horizon {
            return Err(EngineError::PastHorizon {
                tick: state.tick,
                horizon: self.ast.horizon,
            });
        }
        let tick = state.tick;
        let overflow = |_| EngineError::Overflow { tick };
        let snapshot = Snapshot {
            stocks: state.stocks.iter().map(|s| s.amount).collect(),
            pools: state
                .pools
                .iter()
                .map(|p| match p.level {
                    Capacity::Finite(v) => v,
                    Capacity::Abundant => ValueAmount::ZERO,
                })
                .collect(),
        };
        let pending = std::mem::take(&mut state.pending);
        let mut flows = Vec::with_capacity(self.cycles.len());

        for ci in 0..self.cycles.len() {
            let mut amounts = [ValueAmount::ZERO; 3];
            for (slot, amount) in amounts.iter_mut().enumerate() {
                *amount = self.eval(state, &snapshot, ci, slot).map_err(overflow)?;
            }
            let cycle = self.cycles[ci].clone();
            let name = &self.ast.cycles[ci].id.name;

            debit(state, Node::Agent(cycle.actor), amounts[0]).map_err(overflow)?;
            let want = amounts[1];
            amounts[1] = draw(state, cycle.ve_source, want).map_err(overflow)?;
            if amounts[1] != want {
                warnings.push(RunWarning {
                    tick,
                    message: format!(
                        "cycle '{name}': ve clamped from {want} to {} by depleted pool '{}'",
                        amounts[1],
                        state.pools[pool_index(cycle.ve_source)].id
                    ),
                });
            }

            // Jolted VL goes to the jolt's pool, not to the cycle's own target.
            let vl_base = amounts[2];
            for j in pending.iter().filter(|j| j.cycle == ci) {
                let slot = flow_slot(j.flow).expect("validated jolt flow");
                let moved = if j.flow == Flow::Vl {
                    // Extra loss: the value removed from the cycle goes to the named pool.
                    credit(state, Node::Pool(j.source), j.amount).map_err(overflow)?;
                    j.amount
                } else {
                    let moved = draw(state, Node::Pool(j.source), j.amount).map_err(overflow)?;
                    if moved != j.amount {
                        warnings.push(RunWarning {
                            tick,
                            message: format!(
                                "jolt into '{name}.{}': clamped from {} to {moved} by depleted pool '{}'",
                                j.flow.as_str(),
                                j.amount,
                                state.pools[j.source].id
                            ),
                        });
                    }
                    moved
                };
                amounts[slot] = amounts[slot].checked_add(moved).map_err(overflow)?;
                if let PolicyRecord::Jolt { moved: m, .. } = &mut self.log[j.log_index].record {
                    *m = Some(moved);
                }
            }

            credit(state, cycle.vl_target, vl_base).map_err(overflow)?;

            let recorded = state.ledgers[ci]
                .record_tick(amounts[0], amounts[1], amounts[2])
                .map_err(overflow)?;
            credit(state, cycle.vg_target, recorded.vg).map_err(overflow)?;
            flows.push(recorded);
        }

        for (i, s) in state.stocks.iter().enumerate() {
            let negative = s.amount.is_negative();
            if negative && !state.below_zero[i] {
                warnings.push(RunWarning {
                    tick,
                    message: format!("agent '{}' stock went negative ({})", s.id, s.amount),
                });
            }
            state.below_zero[i] = negative;
        }
        state.last_flows.clone_from(&flows);
        state.tick += 1;
        Ok(flows)
    }
}

struct Snapshot {
    stocks: Vec<ValueAmount>,
    pools: Vec<ValueAmount>,
}

fn pool_index(node: Node) -> usize {
    match node {
        Node::Pool(i) => i,
        _ => usize::MAX,
    }
}

fn credit(state: &mut WorldState, node: Node, amount: ValueAmount) -> Result<(), LedgerError> {
    match node {
        Node::Agent(i) => state.stocks[i].amount = state.stocks[i].amount.checked_add(amount)?,
        Node::Pool(i) => {
            let p = &mut state.pools[i];
            match &mut p.level {
                Capacity::Finite(level) => *level = level.checked_add(amount)?,
                Capacity::Abundant => p.cumulative_outflow = p.cumulative_outflow.checked_sub(amount)?,
            }
        }
        Node::Sink => state.sink = state.sink.checked_add(amount)?,
    }
    Ok(())
}

fn debit(state: &mut WorldState, node: Node, amount: ValueAmount) -> Result<(), LedgerError> {
    credit(state, node, amount.checked_neg()?)
}

/// Debits `want` from `node`, clamped to the live level of a finite pool.
/// Returns the amount actually drawn.
fn draw(state: &mut WorldState, node: Node, want: ValueAmount) -> Result<ValueAmount, LedgerError> {
    let amount = match node {
        Node::Pool(i) => match state.pools[i].level {
            Capacity::Finite(level) if want > level => level.max(ValueAmount::ZERO).min(want),
            _ => want,
        },
        _ => want,
    };
    debit(state, node, amount)?;
    Ok(amount)
}

/// Everything recorded over a run. Series are indexed by tick: entry `k`
/// holds the value after tick `k` has run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimulationResult {
    pub scenario: String,
    pub dt: Coefficient,
    pub horizon: u64,
    pub seed: u64,
    pub cycle_ids: Vec<String>,
    /// Per-tick flows, `flows[cycle][tick]`.
    pub flows: Vec<Vec<TickFlows>>,
    /// Running ledger totals, `cumulative[cycle][tick]`.
    pub cumulative: Vec<Vec<TickFlows>>,
    pub agent_ids: Vec<String>,
    pub initial_stocks: Vec<ValueAmount>,
    /// `stocks[agent][tick]`.
    pub stocks: Vec<Vec<ValueAmount>>,
    pub pool_ids: Vec<String>,
    /// `pools[pool][tick]`.
    pub pools: Vec<Vec<PoolState>>,
    pub sink: Vec<ValueAmount>,
    pub initial_total: ValueAmount,
    /// `total_system_value` after each tick.
    pub total_value: Vec<ValueAmount>,
    pub policy_log: Vec<AppliedPolicy>,
    pub warnings: Vec<RunWarning>,
    pub final_state: WorldState,
}

impl SimulationResult {
    pub fn cycle_index(&self, id: &str) -> Option<usize> {
        self.cycle_ids.iter().position(|c| c == id)
    }

    pub fn agent_index(&self, id: &str) -> Option<usize> {
        self.agent_ids.iter().position(|a| a == id)
    }

    /// Stock of `agent` after `ticks` ticks (0 gives the initial stock).
    pub fn stock_at(&self, agent: &str, ticks: u64) -> Option<ValueAmount> {
        let i = self.agent_index(agent)?;
        if ticks == 0 {
            Some(self.initial_stocks[i])
        } else {
            self.stocks[i].get(ticks as usize - 1).copied()
        }
    }

    /// Cumulative series of one flow of one cycle, starting with the zero
    /// total at time 0: sample `k` is the total after `k` ticks.
    pub fn cumulative_series(&self, cycle: usize, flow: Flow) -> Vec<ValueAmount> {
        std::iter::once(ValueAmount::ZERO)
            .chain(self.cumulative[cycle].iter().map(|f| pick(f, flow)))
            .collect()
    }

    pub fn flow_series(&self, cycle: usize, flow: Flow) -> Vec<ValueAmount> {
        self.flows[cycle].iter().map(|f| pick(f, flow)).collect()
    }
}

pub fn pick(f: &TickFlows, flow: Flow) -> ValueAmount {
    match flow {
        Flow::Va => f.va,
        Flow::Ve => f.ve,
        Flow::Vl => f.vl,
        Flow::Vg => f.vg,
    }
}

/// Runs a checked scenario for its full horizon.
pub fn run(ast: &ScenarioAst) -> Result<SimulationResult> {
    let mut engine = Engine::new(ast)?;
    let mut state = engine.initial_state();
    let initial_total = total_system_value(&state).map_err(|_| EngineError::Overflow { tick: 0 })?;
    let h = ast.horizon as usize;
    let n_cycles = ast.cycles.len();
    let mut result = SimulationResult {
        scenario: ast.name.clone(),
        dt: ast.dt,
        horizon: ast.horizon,
        seed: ast.seed,
        cycle_ids: ast.cycles.iter().map(|c| c.id.name.clone()).collect(),
        flows: vec![Vec::with_capacity(h); n_cycles],
        cumulative: vec![Vec::with_capacity(h); n_cycles],
        agent_ids: ast.agents.iter().map(|a| a.id.name.clone()).collect(),
        initial_stocks: ast.agents.iter().map(|a| a.initial).collect(),
        stocks: vec![Vec::with_capacity(h); ast.agents.len()],
        pool_ids: ast.pools.iter().map(|p| p.id.name.clone()).collect(),
        pools: vec![Vec::with_capacity(h); ast.pools.len()],
        sink: Vec::with_capacity(h),
        initial_total,
        total_value: Vec::with_capacity(h),
        policy_log: Vec::new(),
        warnings: Vec::new(),
        final_state: state.clone(),
    };

    for tick in 0..ast.horizon {
        for p in ast.policies.iter().filter(|p| p.trigger == tick) {
            engine.apply_policy(&mut state, p)?;
        }
        let flows = engine.step(&mut state, &mut result.warnings)?;
        for (ci, f) in flows.into_iter().enumerate() {
            result.flows[ci].push(f);
            result.cumulative[ci].push(*state.ledgers[ci].cumulative());
        }
        for (i, s) in state.stocks.iter().enumerate() {
            result.stocks[i].push(s.amount);
        }
        for (i, p) in state.pools.iter().enumerate() {
            result.pools[i].push(p.clone());
        }
        result.sink.push(state.sink);
        result
            .total_value
            .push(total_system_value(&state).map_err(|_| EngineError::Overflow { tick })?);
    }
    result.policy_log = engine.log;
    result.final_state = state;
    Ok(result)
}
