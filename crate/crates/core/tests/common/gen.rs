//! Random programs for differential testing.
//!
//! Predicates are `pI(N, R)`: they may call lower-numbered predicates and
//! themselves (guarded by `N > 0` with `N` decreasing), raise operations
//! `eK/1`, print, and install up to two nested handlers.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub max_effects: usize,
    pub max_preds: usize,
    pub max_nesting: usize,
    /// Largest number of `continue` calls in one operation clause.
    pub max_continues: usize,
    pub depth: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_effects: 3,
            max_preds: 4,
            max_nesting: 2,
            max_continues: 1,
            depth: 3,
        }
    }
}

pub struct Generated {
    pub source: String,
    pub preds: Vec<String>,
    pub effects: Vec<String>,
    /// Query wrapping `main` in catch-all handlers for every operation.
    pub query: String,
}

const ATOMS: [&str; 4] = ["a", "b", "c", "d"];

struct Gen {
    rng: StdRng,
    cfg: GenConfig,
    effects: usize,
    vars: usize,
}

impl Gen {
    fn fresh(&mut self, prefix: &str) -> String {
        self.vars += 1;
        format!("{prefix}{}", self.vars)
    }

    fn atom(&mut self) -> &'static str {
        ATOMS[self.rng.gen_range(0..ATOMS.len())]
    }

    fn value(&mut self, scope: &[String]) -> String {
        if !scope.is_empty() && self.rng.gen_bool(0.4) {
            scope[self.rng.gen_range(0..scope.len())].clone()
        } else {
            self.atom().to_string()
        }
    }

    /// A goal inside predicate `me` (callable: `0..me` plus `me` recursively).
    fn goal(&mut self, me: usize, depth: usize, nesting: usize, scope: &mut Vec<String>) -> String {
        let leaf = depth == 0;
        let choice = if leaf { self.rng.gen_range(0..5) } else { self.rng.gen_range(0..10) };
        match choice {
            0 => {
                let e = self.rng.gen_range(0..self.effects);
                let v = self.value(scope);
                format!("e{e}({v})")
            }
            1 => format!("writeln({})", self.value(scope)),
            2 => {
                let v = &scope[self.rng.gen_range(0..scope.len())].clone();
                let a = self.atom();
                format!("{v} = {a}")
            }
            3 if me > 0 => {
                let callee = self.rng.gen_range(0..me);
                let v = self.value(scope);
                format!("p{callee}(N, {v})")
            }
            3 | 4 => {
                if self.rng.gen_bool(0.2) {
                    "fail".into()
                } else {
                    "true".into()
                }
            }
            5 | 6 => {
                let a = self.goal(me, depth - 1, nesting, scope);
                let b = self.goal(me, depth - 1, nesting, scope);
                format!("({a}, {b})")
            }
            7 => {
                let a = self.goal(me, depth - 1, nesting, scope);
                let b = self.goal(me, depth - 1, nesting, scope);
                format!("({a} ; {b})")
            }
            8 => {
                let c = self.goal(me, depth - 1, nesting, scope);
                let t = self.goal(me, depth - 1, nesting, scope);
                let e = self.goal(me, depth - 1, nesting, scope);
                format!("({c} -> {t} ; {e})")
            }
            _ if nesting < self.cfg.max_nesting => self.handler(me, depth - 1, nesting + 1, scope),
            _ => {
                let e = self.rng.gen_range(0..self.effects);
                let v = self.value(scope);
                format!("e{e}({v})")
            }
        }
    }

    fn handler(&mut self, me: usize, depth: usize, nesting: usize, scope: &mut Vec<String>) -> String {
        let body = if nesting < self.cfg.max_nesting && self.rng.gen_bool(0.5) {
            self.handler(me, depth, nesting + 1, scope)
        } else {
            self.goal(me, depth, nesting, scope)
        };
        let with_state = self.rng.gen_bool(0.5);
        let s = self.fresh("S");
        let mut ops: Vec<usize> = (0..self.effects).filter(|_| self.rng.gen_bool(0.6)).collect();
        if ops.is_empty() {
            ops.push(self.rng.gen_range(0..self.effects));
        }
        let mut clauses = Vec::new();
        for e in ops {
            let x = self.fresh("X");
            let mut local = vec![x.clone()];
            if with_state {
                local.push(s.clone());
            }
            local.extend(scope.iter().take(1).cloned());
            let k = self.rng.gen_range(0..=self.cfg.max_continues);
            let cont = if with_state {
                let next = self.value(&local);
                format!("continue({next})")
            } else {
                "continue".to_string()
            };
            let mut parts = Vec::new();
            if self.rng.gen_bool(0.5) {
                let v = self.value(&local);
                parts.push(format!("writeln({v})"));
            }
            if self.rng.gen_bool(0.3) {
                let a = self.atom();
                parts.push(format!("{x} = {a}"));
            }
            if self.rng.gen_bool(0.25) {
                let e = self.rng.gen_range(0..self.effects);
                let v = self.value(&local);
                parts.push(format!("e{e}({v})"));
            }
            for i in 0..k {
                parts.push(cont.clone());
                if i + 1 < k {
                    let v = self.value(&local);
                    parts.push(format!("writeln({v})"));
                }
            }
            if parts.is_empty() {
                parts.push("true".into());
            }
            clauses.push(format!("e{e}({x}) -> {}", parts.join(", ")));
        }
        let mut text = format!("handle {body} with ({})", clauses.join(" ; "));
        if self.rng.gen_bool(0.5) {
            let f = if with_state { format!("writeln(fin({s}))") } else { "writeln(fin)".into() };
            text.push_str(&format!(" finally {f}"));
        }
        if with_state {
            let init = self.atom();
            text.push_str(&format!(" for ({s} = {init})"));
        }
        format!("({text})")
    }

    fn predicate(&mut self, me: usize) -> String {
        let mut out = String::new();
        let n = self.rng.gen_range(1..=2);
        for _ in 0..n {
            let mut scope = vec!["R".to_string()];
            let depth = self.cfg.depth;
            let body = self.goal(me, depth, 0, &mut scope);
            let recursive = self.rng.gen_bool(0.3);
            if recursive {
                let v = self.value(&scope);
                out.push_str(&format!(
                    "p{me}(N, R) :- N > 0, N1 is N - 1, {body}, p{me}(N1, {v}).\n"
                ));
            } else {
                out.push_str(&format!("p{me}(N, R) :- {body}.\n"));
            }
        }
        out
    }
}

/// Deterministic program number `seed`.
pub fn generate(seed: u64, cfg: GenConfig) -> Generated {
    let mut rng = StdRng::seed_from_u64(seed);
    let effects = rng.gen_range(1..=cfg.max_effects);
    let npreds = rng.gen_range(1..=cfg.max_preds);
    let mut g = Gen { rng, cfg, effects, vars: 0 };
    let mut source = String::new();
    for e in 0..effects {
        source.push_str(&format!(":- effect e{e}/1.\n"));
    }
    for p in 0..npreds {
        source.push_str(&g.predicate(p));
    }
    source.push_str(&format!("main(R) :- p{}(2, R).\n", npreds - 1));
    let clauses: Vec<String> = (0..effects).map(|e| format!("e{e}(X) -> writeln(top(X)), continue")).collect();
    let query = format!("handle main(R) with ({})", clauses.join(" ; "));
    Generated {
        source,
        preds: (0..npreds).map(|p| format!("p{p}")).collect(),
        effects: (0..effects).map(|e| format!("e{e}")).collect(),
        query,
    }
}
