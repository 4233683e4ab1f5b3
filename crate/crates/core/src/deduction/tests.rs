use super::*;
use crate::quantale::QuantaleSpec;
use crate::syntax::parse_context;
use crate::theory::{load_theory, parse_goal};

const WAITS: &str = "\
quantale metric
ground X
let N = 8
op wait_n : X -> X for n in 0..N
equation [x:X] wait_0(x) = x
axiom [x:X] wait_n(wait_m(x)) ={0} wait_{n+m}(x) for n,m in 0..N
axiom [x:X] wait_n(x) ={|n-m|} wait_m(x) for n,m in 0..N
symmetric true
";

const ORDERED: &str = "\
quantale bool
ground X
let N = 4
op wait_n : X -> X for n in 0..N
equation [x:X] wait_0(x) = x
equation [x:X] wait_n(wait_m(x)) = wait_{n+m}(x) for n,m in 0..N
axiom [x:X] wait_n(x) <= wait_m(x) for n,m in 0..N if n <= m
";

const WALK: &str = "\
quantale metric
ground Real RealPos unit
op zero : I -> Real
op one : I -> RealPos
op prob_n : I -> unit for n in 0..10
op plus : Real, Real -> Real
op normal : Real, RealPos -> Real
op bernoulli : Real, Real, unit -> Real
axiom [x1:Real, x2:Real] bernoulli(x1, x2, prob_n(*)) ={|n-m|/10} bernoulli(x1, x2, prob_m(*)) for n,m in 0..10
symmetric true
define walk1 = \\x:Real. bernoulli(zero(*), plus(x, normal(zero(*), one(*))), prob_3(*))
define walk2 = \\x:Real. bernoulli(zero(*), plus(x, normal(zero(*), one(*))), prob_5(*))
";

fn goal(t: &Theory, s: &str) -> VEquation {
    parse_goal(t, s).unwrap().equation().unwrap()
}

fn bound(t: &Theory, ctx: &str, v: &str, w: &str, depth: usize) -> QValue {
    let ctx = parse_context(ctx).unwrap();
    let v = t.parse_term_in(&ctx, v).unwrap();
    let w = t.parse_term_in(&ctx, w).unwrap();
    best_bound(t, &ctx, &v, &w, SearchBudget::with_depth(depth)).unwrap()
}

fn proved(t: &Theory, s: &str, depth: usize) -> ProofTrace {
    match check_eq(t, &goal(t, s), SearchBudget::with_depth(depth)).unwrap() {
        Outcome::Proved(p) => {
            assert_eq!(replay(t, &p).unwrap(), p.conclusion);
            p
        }
        Outcome::Unknown => panic!("no proof of {s}"),
    }
}

#[test]
fn reflexivity_at_depth_one() {
    let t = load_theory(WAITS).unwrap();
    let p = proved(&t, "x:X |- wait_3(x) ={0} wait_3(x)", 1);
    assert_eq!(p.rule, ProofRule::Refl);
}

#[test]
fn bottom_always_provable() {
    let t = load_theory(WAITS).unwrap();
    let p = proved(&t, "x:X |- wait_3(x) ={inf} x", 1);
    assert_eq!(p.rule, ProofRule::Join);
    assert!(p.premises.is_empty());
}

#[test]
fn epsilon_axiom_bound() {
    let t = load_theory(WAITS).unwrap();
    let m = QuantaleSpec::Lawvere;
    assert_eq!(bound(&t, "x:X", "wait_2(x)", "wait_5(x)", 3), m.int(3).unwrap());
    assert_eq!(bound(&t, "x:X", "wait_1(wait_1(x))", "wait_3(x)", 3), m.int(1).unwrap());
    assert_eq!(bound(&t, "x:X", "wait_1(wait_1(x))", "wait_2(x)", 2), m.int(0).unwrap());
    proved(&t, "x:X |- wait_2(x) ={3} wait_5(x)", 3);
    proved(&t, "x:X |- wait_2(x) ={7/2} wait_5(x)", 3);
    let g = goal(&t, "x:X |- wait_2(x) ={1} wait_5(x)");
    assert_eq!(check_eq(&t, &g, SearchBudget::with_depth(3)).unwrap(), Outcome::Unknown);
}

#[test]
fn bound_is_monotone_in_depth() {
    let t = load_theory(WAITS).unwrap();
    let mut prev = QuantaleSpec::Lawvere.bottom();
    for d in 0..4 {
        let b = bound(&t, "x:X", "wait_1(wait_1(x))", "wait_3(x)", d);
        assert!(prev.leq(&b).unwrap());
        prev = b;
    }
}

#[test]
fn random_walk() {
    let t = load_theory(WALK).unwrap();
    let p = proved(&t, "- |- walk1 ={1/5} walk2", 10);
    let mut rules = Vec::new();
    p.rules(&mut rules);
    assert!(rules.contains(&ProofRule::CongLam));
    assert!(rules.contains(&ProofRule::Subst));
    assert_eq!(bound(&t, "-", "walk1", "walk2", 10), QuantaleSpec::Lawvere.ratio(1, 5).unwrap());
}

#[test]
fn ordered_higher_order() {
    let t = load_theory(ORDERED).unwrap();
    let v = "(\\f:X -o X. \\g:X -o X. g (f x))";
    let s = format!("x:X |- {v} (\\y:X. wait_1(y)) <= {v} (\\y:X. wait_1(wait_1(y)))");
    proved(&t, &s, 12);
    let rev = format!("x:X |- {v} (\\y:X. wait_1(wait_1(y))) <= {v} (\\y:X. wait_1(y))");
    let g = goal(&t, &rev);
    assert_eq!(check_eq(&t, &g, SearchBudget::with_depth(4)).unwrap(), Outcome::Unknown);
}

#[test]
fn normalisation_equations_provable_both_ways() {
    let t = load_theory(WAITS).unwrap();
    proved(&t, "y:X |- (\\x:X. wait_1(x)) y ={0} wait_1(y)", 1);
    proved(&t, "y:X |- wait_1(y) ={0} (\\x:X. wait_1(x)) y", 1);
}

#[test]
fn replay_rejects_tampering() {
    let t = load_theory(WAITS).unwrap();
    let mut p = proved(&t, "x:X |- wait_2(x) ={3} wait_5(x)", 3);
    p.conclusion.label = QuantaleSpec::Lawvere.int(1).unwrap();
    assert!(matches!(replay(&t, &p), Err(ReplayError::LabelMismatch { .. }) | Err(ReplayError::Misapplied { .. })));
}

#[test]
fn replay_label_arithmetic() {
    let t = load_theory(WAITS).unwrap();
    let m = QuantaleSpec::Lawvere;
    let ax = |i: usize| node(t.axioms[i].clone(), ProofRule::Axiom(i), vec![]);
    let find = |l: &str, r: &str| {
        t.axioms
            .iter()
            .position(|a| a.lhs.to_string() == l && a.rhs.to_string() == r)
            .unwrap()
    };
    let p = ax(find("wait_1(x)", "wait_2(x)"));
    let q = ax(find("wait_2(x)", "wait_4(x)"));
    let tr = trans(p.clone(), q);
    assert_eq!(replay(&t, &tr).unwrap().label, m.int(3).unwrap());
    // weakening 1 to 2 is fine, 1 to 1/2 is not
    let w = weaken(p.clone(), &m.int(2).unwrap());
    assert!(replay(&t, &w).is_ok());
    let mut bad = p.clone();
    bad.conclusion.label = m.ratio(1, 2).unwrap();
    let bad = node(bad.conclusion.clone(), ProofRule::Weak, vec![p]);
    assert!(replay(&t, &bad).is_err());
}

#[test]
fn replay_weak_example() {
    let t = load_theory(WALK).unwrap();
    let p = proved(&t, "- |- walk1 ={1/5} walk2", 10);
    let w = weaken(p, &QuantaleSpec::Lawvere.ratio(1, 2).unwrap());
    assert_eq!(replay(&t, &w).unwrap().label, QuantaleSpec::Lawvere.ratio(1, 2).unwrap());
}

#[test]
fn symmetry_needs_flag() {
    let mut t = load_theory(WAITS).unwrap();
    let p = proved(&t, "x:X |- wait_2(x) ={0} wait_1(wait_1(x))", 3);
    let mut rules = Vec::new();
    p.rules(&mut rules);
    assert!(rules.contains(&ProofRule::Symmetry));
    t.symmetric = false;
    assert!(replay(&t, &p).is_err());
}

#[test]
fn arch_surrogate() {
    let t = load_theory(WAITS).unwrap();
    let ctx = parse_context("x:X").unwrap();
    let v = t.parse_term_in(&ctx, "wait_2(x)").unwrap();
    let w = t.parse_term_in(&ctx, "wait_4(x)").unwrap();
    let m = QuantaleSpec::Lawvere;
    let b = SearchBudget::with_depth(2);
    assert!(arch_closure_check(&t, &ctx, &v, &w, &m.int(2).unwrap(), b).unwrap());
    assert!(!arch_closure_check(&t, &ctx, &v, &w, &m.int(1).unwrap(), b).unwrap());
    let o = load_theory(ORDERED).unwrap();
    let v = o.parse_term_in(&ctx, "wait_1(x)").unwrap();
    let w = o.parse_term_in(&ctx, "wait_3(x)").unwrap();
    let k = QuantaleSpec::Boolean.top();
    assert!(arch_closure_check(&o, &ctx, &v, &w, &k, b).unwrap());
    assert!(!arch_closure_check(&o, &ctx, &w, &v, &k, b).unwrap());
}

#[test]
fn join_modes_agree_on_labels() {
    let t = load_theory(WAITS).unwrap();
    let ctx = parse_context("x:X").unwrap();
    let v = t.parse_term_in(&ctx, "wait_1(wait_2(x))").unwrap();
    let w = t.parse_term_in(&ctx, "wait_5(x)").unwrap();
    let b = SearchBudget::with_depth(3);
    let full = Prover::new(&t, b).best(&ctx, &v, &w).unwrap();
    let bot = Prover::new(&t, b).with_join_mode(JoinMode::BottomOnly).best(&ctx, &v, &w).unwrap();
    assert_eq!(full.label(), bot.label());
    replay(&t, &full).unwrap();
    replay(&t, &bot).unwrap();
}

#[test]
fn shared_prover_agrees_with_fresh_ones() {
    let t = load_theory(WAITS).unwrap();
    let mut shared = Prover::new(&t, SearchBudget::with_depth(3));
    for (n, m, q) in [(1, 3, 2), (2, 5, 3), (2, 5, 1), (0, 8, 7), (4, 4, 0)] {
        let g = goal(&t, &format!("x:X |- wait_{n}(wait_1(x)) ={{{q}}} wait_{m}(x)"));
        let fresh = check_eq(&t, &g, SearchBudget::with_depth(3)).unwrap();
        let reused = shared.check(&g).unwrap();
        assert_eq!(fresh.is_proved(), reused.is_proved(), "{g}");
        if let Some(p) = reused.trace() {
            assert_eq!(replay(&t, p).unwrap(), g);
        }
    }
}

#[test]
fn distinct_waits_need_no_extra_depth() {
    let t = load_theory(WAITS).unwrap();
    // every position differs; congruence and axiom premises stay at depth 1
    let q = bound(&t, "x:X", "wait_1(wait_4(wait_6(x)))", "wait_2(wait_5(wait_8(x)))", 1);
    assert_eq!(q, QuantaleSpec::Lawvere.ratio(4, 1).unwrap());
}
