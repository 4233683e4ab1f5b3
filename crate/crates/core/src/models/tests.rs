use num_traits::Signed;
use num_rational::BigRational;

use super::*;
use crate::deduction::{check_eq, Outcome, ProofRule, ProofTrace, SearchBudget};
use crate::syntax::parse_context;
use crate::theory::{load_theory, parse_goal};
use crate::vcat::FinVCat;

const WAITS: &str = include_str!("../../../../theories/waits.thy");
const WAITS_MODEL: &str = include_str!("../../../../theories/waits.model");
const WALK: &str = include_str!("../../../../theories/probwalk.thy");
const WALK_MODEL: &str = include_str!("../../../../theories/probwalk.model");

fn waits() -> (Theory, Model) {
    let t = load_theory(WAITS).unwrap();
    let m = load_model(WAITS_MODEL, &t.signature).unwrap();
    (t, m)
}

fn judgement(t: &Theory, m: &Model, ctx: &str, v: &str) -> Morphism {
    let ctx = parse_context(ctx).unwrap();
    let v = t.parse_term_in(&ctx, v).unwrap();
    m.denote_judgement(&ctx, &v).unwrap()
}

fn met(m: &Morphism) -> &MetMor {
    match m {
        Morphism::FinMet(f) => f,
        _ => panic!("expected a FinMet morphism"),
    }
}

fn q(n: i64, d: i64) -> QValue {
    QuantaleSpec::Lawvere.ratio(n, d).unwrap()
}

#[test]
fn hyp_and_star_denote_identities() {
    let (t, m) = waits();
    let f = judgement(&t, &m, "x:X", "x");
    assert_eq!(met(&f).table().unwrap(), (0..=32).collect::<Vec<_>>());
    let s = judgement(&t, &m, "-", "*");
    assert_eq!(met(&s).table().unwrap(), vec![0]);
}

#[test]
fn wait_tables_saturate() {
    let (t, m) = waits();
    let f = judgement(&t, &m, "x:X", "wait_2(x)");
    let oracle: Vec<usize> = (0..=32).map(|i: usize| (i + 2).min(32)).collect();
    assert_eq!(met(&f).table().unwrap(), oracle);
}

#[test]
fn wait_distance_by_brute_force() {
    let (t, m) = waits();
    let f = judgement(&t, &m, "x:X", "wait_2(x)");
    let g = judgement(&t, &m, "x:X", "wait_5(x)");
    let oracle = (0..=32i64).map(|i| ((i + 2).min(32) - (i + 5).min(32)).abs()).max().unwrap();
    assert_eq!(oracle, 3);
    assert_eq!(m.semantic_distance(&f, &g).unwrap(), q(oracle, 1));
    assert!(m.semantic_distance(&f, &f).unwrap().is_top());
}

#[test]
fn bernoulli_distance_conventions() {
    let t = load_theory(WALK).unwrap();
    let text = WALK_MODEL.replace("dim 4", "dim 2");
    let Model::FinMeas(mut b) = load_model(&text, &t.signature).unwrap() else {
        panic!("expected finmeas")
    };
    let ctx = parse_context("x1:Real, x2:Real").unwrap();
    let d = |s: &str| typecheck::infer(&t.signature, &ctx, &t.parse_term_in(&ctx, s).unwrap()).unwrap();
    let f = denote_with(&b, &d("bernoulli(x1, x2, prob_3(*))")).unwrap();
    let g = denote_with(&b, &d("bernoulli(x1, x2, prob_5(*))")).unwrap();
    // column (u, v) = (0, 1): (3/10, 7/10) against (1/2, 1/2)
    let l1 = (BigRational::new(3.into(), 10.into()) - BigRational::new(1.into(), 2.into())).abs()
        + (BigRational::new(7.into(), 10.into()) - BigRational::new(1.into(), 2.into())).abs();
    assert_eq!(l1, BigRational::new(2.into(), 5.into()));
    assert_eq!(b.distance_with(&f, &g, TvNorm::L1).unwrap(), q(2, 5));
    assert_eq!(b.distance_with(&f, &g, TvNorm::EventSup).unwrap(), q(1, 5));
    b.norm = TvNorm::L1;
    assert_eq!(b.distance(&f, &g).unwrap(), q(2, 5));
}

#[test]
fn wait_model_satisfies_its_axioms() {
    let (t, m) = waits();
    let r = check_model(&m, &t).unwrap();
    assert!(r.skipped.is_empty());
    assert_eq!(r.checked.len(), t.axioms.len());
    assert!(r.satisfied(), "{:?}", r.failures().next());
}

#[test]
fn broken_model_is_reported() {
    let t = load_theory(WAITS).unwrap();
    let text = format!("{WAITS_MODEL}op wait_1 = shift 2\n");
    let m = load_model(&text, &t.signature).unwrap();
    let r = check_model(&m, &t).unwrap();
    let bad: Vec<&AxiomCheck> = r.failures().collect();
    assert!(bad.iter().any(|c| c.axiom == "x:X |- wait_0(x) ={1} wait_1(x) : X" && c.distance == q(2, 1)));
}

#[test]
fn measure_model_satisfies_bernoulli_axiom() {
    let t = load_theory(WALK).unwrap();
    let m = load_model(WALK_MODEL, &t.signature).unwrap();
    let r = check_model(&m, &t).unwrap();
    assert_eq!(r.checked.len(), 121);
    assert!(r.satisfied());
    // the bound is attained: |n - m|/10 exactly
    assert!(r.checked.iter().all(|c| c.distance == c.label));
}

#[test]
fn soundness_of_a_derived_bound() {
    let (t, m) = waits();
    let g = parse_goal(&t, "x:X |- wait_2(x) ={3} wait_5(x)").unwrap().equation().unwrap();
    let Outcome::Proved(p) = check_eq(&t, &g, SearchBudget::with_depth(3)).unwrap() else {
        panic!("not proved")
    };
    assert!(check_soundness(&m, &t, &p).unwrap());
    let mut bad = p.clone();
    bad.conclusion.label = q(1, 1);
    assert!(matches!(check_soundness(&m, &t, &bad), Err(ModelError::Replay(_))));
    let refl = ProofTrace {
        conclusion: crate::theory::VEquation::new(&t.signature, g.ctx.clone(), g.lhs.clone(), g.lhs.clone(), q(0, 1))
            .unwrap(),
        rule: ProofRule::Refl,
        premises: vec![],
    };
    assert!(check_soundness(&m, &t, &refl).unwrap());
}

#[test]
fn substitution_composes_tables() {
    let (t, m) = waits();
    let c1 = parse_context("x:X").unwrap();
    let c2 = parse_context("y:X").unwrap();
    let d1 = typecheck::infer(&t.signature, &c1, &t.parse_term_in(&c1, "wait_1(x)").unwrap()).unwrap();
    let d2 = typecheck::infer(&t.signature, &c2, &t.parse_term_in(&c2, "wait_2(y)").unwrap()).unwrap();
    assert!(semantic_substitution_check(&m, &d1, &d2).unwrap());
    let s = typecheck::subst_derivation(&d1, &d2).unwrap();
    let oracle: Vec<usize> = (0..=32).map(|i: usize| (i + 3).min(32)).collect();
    assert_eq!(met(&m.denote(&s).unwrap()).table().unwrap(), oracle);
    // hyp on the left collapses to ⟦w⟧
    let h = typecheck::infer(&t.signature, &c1, &Term::var("x")).unwrap();
    assert!(semantic_substitution_check(&m, &h, &d2).unwrap());
}

#[test]
fn exchange_on_two_variables() {
    let t = load_theory(&WAITS.replace("let N = 32", "let N = 4")).unwrap();
    let m = load_model(&WAITS_MODEL.replace("let N = 32", "let N = 4"), &t.signature).unwrap();
    let ctx = parse_context("x:X, y:X").unwrap();
    let v = t.parse_term_in(&ctx, "wait_1(x) * wait_2(y)").unwrap();
    let d = typecheck::infer(&t.signature, &ctx, &v).unwrap();
    assert!(semantic_exchange_check(&m, &d, 0).unwrap());
    // the exchanged denotation differs from the original read naively
    let e = typecheck::exchange(&d, 0).unwrap();
    let (f, g) = (met(&m.denote(&d).unwrap()).clone(), met(&m.denote(&e).unwrap()).clone());
    let swap = |v: &Val| match v {
        Val::Pair(a, b) => Val::pair((**b).clone(), (**a).clone()),
        _ => unreachable!(),
    };
    for x in f.src.points().unwrap() {
        assert!(f.tgt.eq_val(&f.apply(&x), &g.apply(&swap(&x))).unwrap());
    }
}

#[test]
fn split_and_join_are_inverse() {
    let (_, m) = waits();
    let a = parse_context("x:X, y:X").unwrap();
    let b = parse_context("z:X").unwrap();
    let (s, j) = m.split_join(&[a.clone(), Context::empty(), b.clone()]).unwrap();
    let whole = parse_context("x:X, y:X, z:X").unwrap();
    assert!(m.equal(&m.then(&s, &j).unwrap(), &m.identity(&whole).unwrap()).unwrap());
    let e = parse_context("y:X, z:X, x:X").unwrap();
    let sh = m.permutation(&e, &whole).unwrap();
    let back = m.permutation(&whole, &e).unwrap();
    assert!(m.equal(&m.then(&sh, &back).unwrap(), &m.identity(&e).unwrap()).unwrap());
}

fn two_point(d: i64) -> FinVCat {
    let l = QuantaleSpec::Lawvere;
    FinVCat::from_fn(l, vec!["a".into(), "b".into()], |i, j| l.int(if i == j { 0 } else { d }).unwrap()).unwrap()
}

#[test]
fn hom_objects() {
    let l = QuantaleSpec::Lawvere;
    let b = two_point(1);
    let (h, fs) = enumerate_hom_object(&FinVCat::unit(l), &b, DEFAULT_HOM_LIMIT).unwrap();
    assert_eq!(h.len(), 2);
    assert_eq!(fs.len(), 2);
    let (h, _) = enumerate_hom_object(&b, &b, DEFAULT_HOM_LIMIT).unwrap();
    assert_eq!(h.len(), 4);
    // the constant maps are at distance 1 from each other
    let ia = h.index_of("[a,a]").unwrap();
    let ib = h.index_of("[b,b]").unwrap();
    assert_eq!(*h.dist(ia, ib), l.int(1).unwrap());
    // from a space at distance 0 only maps identifying a and b survive
    let z = two_point(0);
    let (h, _) = enumerate_hom_object(&z, &b, DEFAULT_HOM_LIMIT).unwrap();
    assert_eq!(h.carrier(), ["[a,a]", "[b,b]"]);
    let (zq, _) = z.separated_quotient();
    let (hq, _) = enumerate_hom_object(&zq, &b, DEFAULT_HOM_LIMIT).unwrap();
    assert_eq!(hq.len(), h.len());
    assert!(matches!(
        enumerate_hom_object(&two_point(1).tensor(&two_point(1)).unwrap().tensor(&two_point(1)).unwrap(), &two_point(1).tensor(&two_point(1)).unwrap(), 100),
        Err(ModelError::HomTooLarge { .. })
    ));
}

#[test]
fn beta_is_sound_in_both_backends() {
    let t = load_theory(&WAITS.replace("let N = 32", "let N = 3")).unwrap();
    let m = load_model(&WAITS_MODEL.replace("let N = 32", "let N = 3"), &t.signature).unwrap();
    let f = judgement(&t, &m, "y:X", "(\\x:X. wait_1(x)) y");
    let g = judgement(&t, &m, "y:X", "wait_1(y)");
    assert!(m.equal(&f, &g).unwrap());
    let k = judgement(&t, &m, "-", "\\x:X. wait_1(wait_2(x))");
    let k2 = judgement(&t, &m, "-", "\\x:X. wait_3(x)");
    assert!(m.semantic_distance(&k, &k2).unwrap().is_top());

    let w = load_theory(WALK).unwrap();
    let mm = load_model(WALK_MODEL, &w.signature).unwrap();
    let ctx = "x1:Real, x2:Real";
    let f = judgement(&w, &mm, ctx, "(\\p:unit. bernoulli(x1, x2, p)) prob_4(*)");
    let g = judgement(&w, &mm, ctx, "bernoulli(x1, x2, prob_4(*))");
    assert!(mm.equal(&f, &g).unwrap());
    let f = judgement(&w, &mm, "-", "\\p:unit. \\x:Real. bernoulli(x, zero(*), p)");
    let g = judgement(&w, &mm, "-", "\\p:unit. \\x:Real. bernoulli(zero(*), x, p)");
    // operator norm of the difference: at p = 0 and x = 1 the measures are
    // e_0 against e_1
    assert_eq!(mm.semantic_distance(&f, &g).unwrap(), q(1, 1));
}

#[test]
fn pattern_match_denotation() {
    let t = load_theory(&WAITS.replace("let N = 32", "let N = 3")).unwrap();
    let m = load_model(&WAITS_MODEL.replace("let N = 32", "let N = 3"), &t.signature).unwrap();
    let f = judgement(&t, &m, "p:X * X", "pm p to x*y. wait_1(y) * x");
    let Morphism::FinMet(f) = f else { unreachable!() };
    for v in f.src.points().unwrap() {
        let Val::Pair(a, b) = &v else { unreachable!() };
        let (Val::Atom(i), Val::Atom(j)) = (&**a, &**b) else { unreachable!() };
        let out = f.apply(&v);
        let Val::Pair(c, d) = &out else { unreachable!() };
        assert!(matches!((&**c, &**d), (Val::Atom(x), Val::Atom(y)) if *x == (j + 1).min(3) && y == i));
    }
}

#[test]
fn ordered_model_and_hom_distance() {
    let t = load_theory(&std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../theories/waits_ordered.thy")).unwrap().replace("let N = 8", "let N = 2")).unwrap();
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../theories/waits_ordered.model")).unwrap();
    let m = load_model(&text.replace("let N = 8", "let N = 2"), &t.signature).unwrap();
    assert!(check_model(&m, &t).unwrap().satisfied());
    let v = "(\\f:X -o X. \\g:X -o X. g (f x))";
    let a = judgement(&t, &m, "x:X", &format!("{v} (\\y:X. wait_1(y))"));
    let b = judgement(&t, &m, "x:X", &format!("{v} (\\y:X. wait_1(wait_1(y)))"));
    let k = QuantaleSpec::Boolean;
    assert_eq!(m.semantic_distance(&a, &b).unwrap(), k.top());
    assert_eq!(m.semantic_distance(&b, &a).unwrap(), k.bottom());
}

#[test]
fn model_file_errors() {
    let t = load_theory(WAITS).unwrap();
    for (text, line) in [
        ("backend finmet\nground X = line 3\nop wait_n = bogus n for n in 0..3\n", 3),
        ("backend finmet\nground X = cloud\n", 2),
        ("backend finmet\nground Y = line 3\n", 2),
        ("backend finmeas\nground X = dim 2\nop wait_1 = matrix 2 0 ; 0 1\n", 3),
    ] {
        match load_model(text, &t.signature) {
            Err(ModelError::File { line: l, .. }) => assert_eq!(l, line, "{text}"),
            Err(e) => panic!("{text}: {e}"),
            Ok(_) => panic!("{text}: accepted"),
        }
    }
    assert!(load_model("ground X = line 3\n", &t.signature).is_err());
    // uninterpreted ops show up as skipped axioms
    let m = load_model("backend finmet\nground X = line 3\nop wait_0 = shift 0\n", &t.signature).unwrap();
    let r = check_model(&m, &t).unwrap();
    // wait_0(x) = x both ways, and the n = m = 0 instances
    assert_eq!(r.checked.len(), 4);
    assert!(!r.skipped.is_empty());
}
