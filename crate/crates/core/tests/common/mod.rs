//! Random scenario text for property checks.
//!
//! Coefficients stay small (prop k <= 0.05, horizon <= 40) so feedback
//! between stocks cannot overflow the micro-unit range.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn decimal(rng: &mut ChaCha8Rng, lo: i64, hi: i64, places: u32) -> String {
    let scale = 10i64.pow(places);
    let v = rng.gen_range(lo * scale..=hi * scale);
    let sign = if v < 0 { "-" } else { "" };
    let v = v.abs();
    if places == 0 {
        format!("{sign}{v}")
    } else {
        format!("{sign}{}.{:0width$}", v / scale, v % scale, width = places as usize)
    }
}

struct Names {
    pools: Vec<(String, bool)>,
    agents: Vec<String>,
    cycles: Vec<String>,
}

impl Names {
    fn holder(&self, rng: &mut ChaCha8Rng) -> String {
        let n = self.pools.len() + self.agents.len();
        let i = rng.gen_range(0..n);
        if i < self.pools.len() {
            self.pools[i].0.clone()
        } else {
            self.agents[i - self.pools.len()].clone()
        }
    }

    /// A holder with a level: an agent or a finite pool.
    fn levelled(&self, rng: &mut ChaCha8Rng) -> String {
        let finite: Vec<&String> = self.pools.iter().filter(|p| !p.1).map(|p| &p.0).collect();
        let n = finite.len() + self.agents.len();
        let i = rng.gen_range(0..n);
        if i < finite.len() {
            finite[i].clone()
        } else {
            self.agents[i - finite.len()].clone()
        }
    }

    fn pool(&self, rng: &mut ChaCha8Rng) -> String {
        self.pools[rng.gen_range(0..self.pools.len())].0.clone()
    }
}

fn expr(rng: &mut ChaCha8Rng, names: &Names) -> String {
    match rng.gen_range(0..4) {
        0 => decimal(rng, -5, 20, 3),
        1 => format!("ramp({}, {})", decimal(rng, -5, 10, 2), decimal(rng, -2, 2, 3)),
        2 => format!("prop({}, 0.0{})", names.levelled(rng), rng.gen_range(0..=5)),
        _ => {
            let c = &names.cycles[rng.gen_range(0..names.cycles.len())];
            let f = ["va", "ve", "vl", "vg"][rng.gen_range(0..4)];
            format!("prop({c}.{f}, 0.0{})", rng.gen_range(0..=5))
        }
    }
}

/// Scenario text number `index` of the family seeded by `seed`.
pub fn random_scenario(seed: u64, index: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let dt = ["1", "0.5", "0.25", "0.1"][rng.gen_range(0..4)];
    let horizon = rng.gen_range(1..=40u64);
    let names = Names {
        pools: (0..rng.gen_range(1..=3))
            .map(|i| (format!("p{i}"), rng.gen_bool(0.5)))
            .collect(),
        agents: (0..rng.gen_range(1..=4)).map(|i| format!("a{i}")).collect(),
        cycles: (0..rng.gen_range(1..=4)).map(|i| format!("c{i}")).collect(),
    };
    let mut s = format!("scenario \"random{index}\" {{\n  dt = {dt}\n  horizon = {horizon}\n  seed = {index}\n");
    for (p, abundant) in &names.pools {
        let initial = if *abundant {
            "abundant".to_string()
        } else {
            decimal(&mut rng, 0, 1000, 3)
        };
        s += &format!("  pool {p} {{ initial = {initial} }}\n");
    }
    for a in &names.agents {
        s += &format!("  agent {a} {{ initial = {} }}\n", decimal(&mut rng, 0, 500, 2));
    }
    for c in &names.cycles {
        let actor = &names.agents[rng.gen_range(0..names.agents.len())];
        s += &format!("  cycle {c} {{\n    actor = {actor}\n");
        s += &format!("    va = {}\n", expr(&mut rng, &names));
        s += &format!("    ve = {} from {}\n", expr(&mut rng, &names), names.holder(&mut rng));
        let vl = expr(&mut rng, &names);
        if rng.gen_bool(0.5) {
            s += &format!("    vl = {vl} to {}\n", names.holder(&mut rng));
        } else {
            s += &format!("    vl = {vl}\n");
        }
        if rng.gen_bool(0.5) {
            s += &format!("    vg to {}\n", names.holder(&mut rng));
        }
        s += "  }\n";
    }
    for _ in 0..rng.gen_range(0..=2) {
        let at = rng.gen_range(0..horizon);
        let c = &names.cycles[rng.gen_range(0..names.cycles.len())];
        let f = ["va", "ve", "vl"][rng.gen_range(0..3)];
        if rng.gen_bool(0.5) {
            s += &format!(
                "  at {at} jolt {c} {f} {} from {}\n",
                decimal(&mut rng, 0, 50, 2),
                names.pool(&mut rng)
            );
        } else {
            s += &format!("  at {at} set {c}.{f} = 0.{:02}\n", rng.gen_range(0..50));
        }
    }
    s += "}\n";
    s
}
