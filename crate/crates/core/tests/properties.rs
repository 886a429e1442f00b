mod common;

use std::collections::BTreeSet;

use common::*;
use hybrid_inline::corpus::{generate, GenParams};
use hybrid_inline::heapstate::{AccessPath, AllocSite, Constraint, Off, Rhs, Root, SeedPolicy, Solution, Value};
use hybrid_inline::inline::{dispatch, Config, Mode};
use hybrid_inline::ir::{parse, Const, Name, ProcId, Program};
use hybrid_inline::oracle::facts::FactTable;
use hybrid_inline::summarize::HybridSummary;
use proptest::prelude::*;
use proptest::sample::subsequence;

fn root_strategy() -> impl Strategy<Value = Root> {
    prop_oneof![
        prop::sample::select(vec!["a", "b", "c"]).prop_map(|v| Root::local(&ProcId::new("p"), v)),
        (1u32..3).prop_map(Root::Param),
        Just(Root::Ret),
    ]
}

fn off_strategy() -> impl Strategy<Value = Off> {
    prop_oneof![
        Just(Off::Field("f".into())),
        Just(Off::Field("g".into())),
        Just(Off::Index(Const::Int(1))),
        Just(Off::Pi),
    ]
}

fn path_strategy() -> impl Strategy<Value = AccessPath> {
    (root_strategy(), prop::collection::vec(off_strategy(), 0..3)).prop_map(|(r, o)| AccessPath::new(r, o))
}

fn alloc(label: &str) -> AllocSite {
    AllocSite { label: label.into(), class: "Obj".into(), ctx: vec![] }
}

fn constraint_strategy() -> impl Strategy<Value = Option<Constraint>> {
    let rhs = prop_oneof![
        path_strategy().prop_map(Rhs::Path),
        prop::sample::select(vec!["1", "2", "3"]).prop_map(|l| Rhs::Alloc(alloc(l))),
        Just(Rhs::Const(Const::Str("k".into()))),
    ];
    (path_strategy(), rhs).prop_map(|(l, r)| Constraint::new(l, r))
}

fn constraints() -> impl Strategy<Value = Vec<Constraint>> {
    prop::collection::vec(constraint_strategy(), 0..12).prop_map(|v| v.into_iter().flatten().collect())
}

fn probes() -> Vec<AccessPath> {
    let roots = ["a", "b", "c"].map(|v| Root::local(&ProcId::new("p"), v));
    let offs = [Off::Field("f".into()), Off::Field("g".into()), Off::Index(Const::Int(1)), Off::Pi];
    let mut out = Vec::new();
    for r in roots.iter().cloned().chain([Root::Ret, Root::Param(1), Root::Param(2)]) {
        out.push(r.clone().path());
        for o in &offs {
            out.push(r.clone().path().child(o.clone()));
        }
    }
    out
}

fn observe(s: &Solution) -> Vec<BTreeSet<Value>> {
    probes().iter().map(|p| s.eval(p)).collect()
}

fn policies() -> [SeedPolicy; 2] {
    [SeedPolicy::root(4), SeedPolicy::summary(4)]
}

fn summary(cs: &[Constraint]) -> HybridSummary {
    let mut s = HybridSummary::empty(ProcId::new("p"));
    s.constraints.extend(cs.iter().cloned());
    s
}

fn without_temps(t: &FactTable) -> FactTable {
    t.iter().filter(|(k, _)| !k.starts_with("$t")).map(|(k, v)| (k.clone(), v.clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_programs_round_trip(seed in any::<u64>()) {
        let p = generate(seed, GenParams::default());
        let text = p.to_source();
        let again = parse(&text).expect("generated programs parse");
        prop_assert_eq!(&again, &p);
        prop_assert_eq!(again.to_source(), text);
    }

    #[test]
    fn solving_ignores_constraint_order(cs in constraints()) {
        for policy in policies() {
            let rev: Vec<Constraint> = cs.iter().rev().cloned().collect();
            let a = Solution::solve(&cs, policy.clone());
            let b = Solution::solve(&rev, policy);
            prop_assert_eq!(observe(&a), observe(&b));
        }
    }

    #[test]
    fn solving_is_monotone(cs in constraints(), more in constraints()) {
        for policy in policies() {
            let small = observe(&Solution::solve(&cs, policy.clone()));
            let all: Vec<Constraint> = cs.iter().chain(&more).cloned().collect();
            let big = observe(&Solution::solve(&all, policy));
            for (s, b) in small.iter().zip(&big) {
                prop_assert!(s.is_subset(b));
            }
        }
    }

    #[test]
    fn adding_solved_facts_changes_nothing(cs in constraints()) {
        let sol = Solution::solve(&cs, SeedPolicy::root(4));
        let mut more = cs.clone();
        for p in probes().into_iter().filter(|p| p.offsets.is_empty()) {
            for v in sol.eval(&p) {
                more.extend(Constraint::new(p.clone(), Rhs::from(v)));
            }
        }
        prop_assert_eq!(observe(&sol), observe(&Solution::solve(&more, SeedPolicy::root(4))));
    }

    #[test]
    fn summary_join_is_a_semilattice(a in constraints(), b in constraints(), c in constraints()) {
        let (a, b, c) = (summary(&a), summary(&b), summary(&c));
        prop_assert_eq!(a.join(&b), b.join(&a));
        prop_assert_eq!(a.join(&a), a.clone());
        prop_assert_eq!(a.join(&b).join(&c), a.join(&b.join(&c)));
        prop_assert_eq!(a.join(&HybridSummary::empty(ProcId::new("p"))), a);
    }

    #[test]
    fn dispatch_is_monotone(seed in any::<u64>(), picks in subsequence((0..8usize).collect::<Vec<_>>(), 0..8)) {
        let p = generate(seed, GenParams::default());
        let classes: Vec<&Name> = p.classes.iter().map(|c| &c.name).collect();
        let vals = |idx: &[usize]| -> BTreeSet<Value> {
            idx.iter()
                .filter_map(|i| classes.get(*i))
                .map(|c| Value::Alloc(AllocSite { label: "0".into(), class: (*c).clone(), ctx: vec![] }))
                .collect()
        };
        let half = picks.len() / 2;
        let (small, big) = (vals(&picks[..half]), vals(&picks));
        for c in &p.classes {
            for m in c.methods.keys() {
                let s = dispatch(&p, m, &small);
                prop_assert!(s.is_subset(&dispatch(&p, m, &big)));
                let mut top = big.clone();
                top.insert(Value::Top);
                prop_assert!(dispatch(&p, m, &big).is_subset(&dispatch(&p, m, &top)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pending_statements_respect_the_step_limit(seed in any::<u64>(), k in 0usize..4) {
        let p = generate(seed, GenParams::default());
        let a = hybrid(&p, Config::exact(Mode::HiK(k)));
        for s in &a.summaries {
            for st in &s.pending {
                prop_assert!(st.steps() < k, "{} pending at {} steps", st, st.steps());
            }
        }
        prop_assert!(a.metrics.k_max <= k);
    }

    #[test]
    fn precision_follows_the_step_limit(seed in any::<u64>()) {
        let p = generate(seed, GenParams::default());
        let t = |m: Mode| hybrid_tables(&p, &hybrid(&p, Config::exact(m)));
        let chain = [t(Mode::ComCi), t(Mode::HiK(1)), t(Mode::HiK(2)), t(Mode::HiK(3)), t(Mode::Hia)];
        for w in chain.windows(2) {
            prop_assert!(uncovered(&w[0], &w[1]).is_empty());
        }
        let inf = oracle_tables(&p, &oracle(&p, None));
        prop_assert!(uncovered(&chain[0], &inf).is_empty());
    }

    #[test]
    fn statement_order_does_not_matter(seed in any::<u64>(), rot in 1usize..5) {
        let p = generate(seed, GenParams::default());
        let mut procs = p.procs.clone();
        for proc in &mut procs {
            let n = proc.body.len();
            if n > 0 {
                proc.body.rotate_left(rot % n);
            }
        }
        let q = Program::new(p.classes.clone(), procs, p.roots.clone(), p.assertions.clone()).unwrap();
        for mode in [Mode::ComCi, Mode::Hia] {
            let a = hybrid_tables(&p, &hybrid(&p, Config::exact(mode)));
            let b = hybrid_tables(&q, &hybrid(&q, Config::exact(mode)));
            for (r, t) in &a {
                prop_assert_eq!(without_temps(t), without_temps(&b[r]), "{} [{}]", r, mode);
            }
        }
    }
}
