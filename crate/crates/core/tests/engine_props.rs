mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use valuecycle::dsl::{Capacity, PolicyAction};
use valuecycle::engine::run;
use valuecycle::{format_scenario, parse_scenario, ScenarioAst, SimulationResult};

/// True when some finite pool is touched by more than one cycle, counting
/// ve sources, vl/vg targets and jolt sources. Only then can declaration
/// order change a clamp.
fn shares_finite_pool(ast: &ScenarioAst) -> bool {
    let finite = |name: &str| {
        ast.pool(name)
            .is_some_and(|p| matches!(p.capacity, Capacity::Finite(_)))
    };
    let mut users: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for c in &ast.cycles {
        pairs.push((&c.ve_source.name, &c.id.name));
        if let Some(t) = &c.vl_target {
            pairs.push((&t.name, &c.id.name));
        }
        if let Some(t) = &c.vg_target {
            pairs.push((&t.name, &c.id.name));
        }
    }
    for p in &ast.policies {
        if let PolicyAction::Jolt { cycle, source, .. } = &p.action {
            pairs.push((&source.name, &cycle.name));
        }
    }
    for (pool, cycle) in pairs {
        if finite(pool) {
            let v = users.entry(pool).or_default();
            if !v.contains(&cycle) {
                v.push(cycle);
            }
        }
    }
    users.values().any(|v| v.len() > 1)
}

fn by_cycle<T: Clone>(r: &SimulationResult, series: &[T]) -> HashMap<String, T> {
    r.cycle_ids.iter().cloned().zip(series.iter().cloned()).collect()
}

fn scenario(index: u64) -> ScenarioAst {
    let text = common::random_scenario(7, index);
    parse_scenario(&text).unwrap_or_else(|d| panic!("{:?}\n{text}", d[0]))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn cycle_order_is_irrelevant_without_shared_finite_pools(index in 0u64..100_000, rotate in 1usize..4) {
        let ast = scenario(index);
        prop_assume!(ast.cycles.len() > 1 && !shares_finite_pool(&ast));
        let mut permuted = ast.clone();
        let k = rotate % permuted.cycles.len();
        permuted.cycles.rotate_left(k);
        let last = permuted.cycles.len() - 1;
        permuted.cycles.swap(0, last);
        let a = run(&ast).unwrap();
        let b = run(&permuted).unwrap();
        prop_assert_eq!(by_cycle(&a, &a.flows), by_cycle(&b, &b.flows));
        prop_assert_eq!(by_cycle(&a, &a.cumulative), by_cycle(&b, &b.cumulative));
        prop_assert_eq!(&a.stocks, &b.stocks);
        prop_assert_eq!(&a.pools, &b.pools);
        prop_assert_eq!(&a.sink, &b.sink);
        prop_assert_eq!(&a.total_value, &b.total_value);
    }

    #[test]
    fn runs_are_deterministic(index in 0u64..100_000) {
        let ast = scenario(index);
        prop_assert_eq!(run(&ast).unwrap(), run(&ast).unwrap());
    }

    #[test]
    fn formatting_round_trips(index in 0u64..100_000) {
        let ast = scenario(index);
        let text = format_scenario(&ast);
        let again = parse_scenario(&text).unwrap();
        prop_assert_eq!(&ast, &again);
        prop_assert_eq!(format_scenario(&again), text);
    }

    #[test]
    fn series_cover_the_horizon(index in 0u64..100_000) {
        let ast = scenario(index);
        let r = run(&ast).unwrap();
        let h = ast.horizon as usize;
        prop_assert!(r.flows.iter().chain(&r.cumulative).all(|s| s.len() == h));
        prop_assert!(r.stocks.iter().all(|s| s.len() == h));
        prop_assert!(r.pools.iter().all(|s| s.len() == h));
        prop_assert_eq!(r.sink.len(), h);
        prop_assert_eq!(r.total_value.len(), h);
    }
}
