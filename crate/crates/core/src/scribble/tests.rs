use super::*;
use crate::corpus::fixture;

fn parse(src: &str) -> GlobalProtocol {
    parse_global(src).unwrap()
}

fn kinds(src: &str) -> Vec<DiagnosticKind> {
    check_wellformed(&parse(src))
        .into_iter()
        .map(|d| d.kind)
        .collect()
}

fn bind(pairs: &[(&str, i64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[test]
fn purchase_parses_with_three_way_choice() {
    let p = parse(fixture("warehouse/Purchase.scr").unwrap());
    assert_eq!(p.name, "Purchase");
    assert_eq!(p.role_names(), ["B", "S", "A"]);
    assert_eq!(p.body[0], Stmt::msg("login", vec![Sort::Str], "B", &["S"]));
    assert_eq!(
        p.body[2],
        Stmt::msg("auth", vec![Sort::Str], "A", &["B", "S"])
    );
    match &p.body[3] {
        Stmt::Choice { at, branches } => {
            assert_eq!(at.base, "B");
            assert_eq!(branches.len(), 3);
            assert_eq!(
                branches[0].body[1],
                Stmt::msg("", vec![Sort::Int], "S", &["B"])
            );
        }
        s => panic!("expected a choice, got {s:?}"),
    }
}

#[test]
fn empty_body_is_end() {
    let p = parse("global protocol Empty(role A, role B) { }");
    assert_eq!(p.roles.len(), 2);
    assert!(p.body.is_empty());
    assert_eq!(
        dump_global(&p),
        "GlobalProtocol Empty\n  Role A\n  Role B\n  End\n"
    );
}

#[test]
fn dining_philosopher_nests_recursion_and_choice() {
    let p = parse(fixture("dining_philosophers/DiningPhilosophers.scr").unwrap());
    let sub = &p.subprotocols["DiningPhilosopher"];
    let Stmt::Rec { name, body } = &sub.body[0] else {
        panic!("expected rec L");
    };
    assert_eq!(name, "L");
    let Stmt::Choice { at, branches } = &body[0] else {
        panic!("expected choice at Ph");
    };
    assert_eq!(at.base, "Ph");
    let Stmt::Rec { name, body } = &branches[0].body[0] else {
        panic!("expected rec M");
    };
    assert_eq!(name, "M");
    assert!(matches!(&body[1], Stmt::Choice { at, .. } if at.base == "A"));
}

#[test]
fn comments_are_skipped() {
    let p =
        parse("// header\nglobal protocol P(role A, role B) {\n  m() from A to B; // trailing\n}");
    assert_eq!(p.body.len(), 1);
}

#[test]
fn syntax_errors_carry_position_and_expectations() {
    match parse_global("global protocol P(role A, role B) {\n  m() from A B;\n}") {
        Err(ParseError::Syntax {
            line,
            column,
            expected,
            ..
        }) => {
            assert_eq!(line, 2);
            assert!(column > 1);
            assert!(expected.iter().any(|e| e.contains("to")), "{expected:?}");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_global("global protocol P(role A, role A) { }"),
        Err(ParseError::DuplicateRole { .. })
    ));
    assert!(matches!(
        parse_global("global protocol P(role A, role B) { m() from A to Z; }"),
        Err(ParseError::UnknownRole { .. })
    ));
    assert!(parse_global("global protocol P(role A, role B) { m(float) from A to B; }").is_err());
}

#[test]
fn store_load_is_well_formed() {
    assert_eq!(kinds(fixture("warehouse/StoreLoad.scr").unwrap()), vec![]);
}

#[test]
fn unbound_continue_is_rejected() {
    let k = kinds("global protocol P(role A, role B) { m() from A to B; continue X; }");
    assert_eq!(k, [DiagnosticKind::UnboundContinue]);
}

#[test]
fn identical_branches_are_indistinguishable() {
    let k = kinds(
        "global protocol P(role A, role B) {
           choice at A { m(int) from A to B; } or { m(int) from A to B; }
         }",
    );
    assert!(
        k.contains(&DiagnosticKind::IndistinguishableBranches),
        "{k:?}"
    );
}

#[test]
fn structural_rules() {
    let unguarded = kinds("global protocol P(role A, role B) { rec X { continue X; } }");
    assert!(
        unguarded.contains(&DiagnosticKind::UnguardedRecursion),
        "{unguarded:?}"
    );
    let self_msg = kinds("global protocol P(role A, role B) { m() from A to A; }");
    assert!(
        self_msg.contains(&DiagnosticKind::SelfInteraction),
        "{self_msg:?}"
    );
    let chooser = kinds(
        "global protocol P(role A, role B) { choice at A { x() from B to A; } or { y() from B to A; } }",
    );
    assert!(
        chooser.contains(&DiagnosticKind::ChooserNotSender),
        "{chooser:?}"
    );
    let after = kinds(
        "global protocol P(role A, role B) { rec X { m() from A to B; continue X; n() from A to B; } }",
    );
    assert!(
        after.contains(&DiagnosticKind::UnreachableAfterContinue),
        "{after:?}"
    );
    let missing = kinds("global protocol P(role A, role B) { Q(A, B); }");
    assert!(
        missing.contains(&DiagnosticKind::UnknownSubprotocol),
        "{missing:?}"
    );
}

#[test]
fn kfork_expands_into_k_loops() {
    let p = parse(fixture("kfork/KFork.scr").unwrap());
    let e = expand(&p, &bind(&[("K", 2)])).unwrap();
    assert_eq!(e.role_names(), ["M", "Worker1", "Worker2"]);
    let [Stmt::Par { branches }] = e.body.as_slice() else {
        panic!("{:?}", e.body);
    };
    assert_eq!(branches.len(), 2);
    for (i, b) in branches.iter().enumerate() {
        let w = format!("Worker{}", i + 1);
        let Stmt::Rec { body, .. } = &b.body[0] else {
            panic!("expected rec");
        };
        let Stmt::Choice { branches: arms, .. } = &body[0] else {
            panic!("expected choice");
        };
        assert_eq!(
            arms[0].body[0],
            Stmt::msg("data", vec![Sort::Int], "M", &[&w])
        );
        assert_eq!(arms[1].body[0], Stmt::msg("end", vec![], "M", &[&w]));
    }
}

#[test]
fn ring_unrolls_the_indexed_sender() {
    let p = parse(fixture("ring/Ring.scr").unwrap());
    let e = expand(&p, &bind(&[("N", 3)])).unwrap();
    let Stmt::Rec { name, body } = &e.body[0] else {
        panic!("expected rec");
    };
    assert_eq!(name, "Loop");
    assert_eq!(
        body,
        &vec![
            Stmt::msg("data", vec![Sort::Int], "Worker1", &["Worker2"]),
            Stmt::msg("data", vec![Sort::Int], "Worker2", &["Worker3"]),
            Stmt::msg("data", vec![Sort::Int], "Worker3", &["Worker1"]),
            Stmt::Continue {
                name: "Loop".into()
            },
        ]
    );
}

#[test]
fn expansion_needs_every_symbol() {
    let p = parse(fixture("ring/Ring.scr").unwrap());
    assert!(matches!(
        expand(&p, &Bindings::new()),
        Err(ExpandError::UnboundSymbol { .. })
    ));
}

#[test]
fn core_protocols_expand_to_themselves() {
    let p = parse(fixture("warehouse/Purchase.scr").unwrap());
    assert_eq!(expand(&p, &Bindings::new()).unwrap(), p);
}

#[test]
fn recursive_calls_unfold_to_the_given_depth() {
    let p = parse(fixture("fibonacci/Fib.scr").unwrap());
    let shallow = expand_traced(&p, &bind(&[(DEPTH_SYMBOL, 1)])).unwrap();
    let deep = expand_traced(&p, &bind(&[(DEPTH_SYMBOL, 3)])).unwrap();
    assert!(!deep.truncated_calls.is_empty());
    assert!(deep.protocol.roles.len() > shallow.protocol.roles.len());
    assert!(deep.protocol.roles.iter().any(|r| r.name.contains('#')));
}
