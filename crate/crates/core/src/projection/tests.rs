use super::*;
use crate::corpus::fixture;
use crate::scribble::{expand, parse_global, Bindings, Sort};

fn send(to: &[&str], label: &str, payload: Vec<Sort>) -> LocalStmt {
    LocalStmt::Send {
        to: to.iter().map(|s| s.to_string()).collect(),
        sig: MessageSignature::new(label, payload),
    }
}

fn recv(from: &str, label: &str, payload: Vec<Sort>) -> LocalStmt {
    LocalStmt::Receive {
        from: from.to_string(),
        sig: MessageSignature::new(label, payload),
    }
}

fn load(path: &str) -> crate::scribble::GlobalProtocol {
    parse_global(fixture(path).unwrap()).unwrap()
}

#[test]
fn purchase_at_authenticator() {
    let lp = project(&load("warehouse/Purchase.scr"), "A").unwrap();
    assert_eq!(lp.protocol_name, "Purchase");
    assert_eq!(lp.peers, ["B", "S"]);
    assert_eq!(
        lp.body,
        vec![
            recv("S", "login", vec![Sort::Str]),
            send(&["B", "S"], "auth", vec![Sort::Str]),
        ]
    );
}

#[test]
fn flat_pingpong_at_client() {
    let lp = project(&load("flat_pingpong/FlatPingPong.scr"), "C").unwrap();
    assert_eq!(
        lp.body,
        vec![
            send(&["S"], "ping", vec![Sort::Str]),
            recv("S", "pong", vec![Sort::Str])
        ]
    );
}

#[test]
fn empty_protocol_projects_to_end() {
    let p = parse_global("global protocol Empty2Role(role A, role B) { }").unwrap();
    let lp = project(&p, "A").unwrap();
    assert!(lp.body.is_empty());
    assert_eq!(
        print_local(&lp),
        "local protocol Empty2Role@A(role B) {\n}\n"
    );
}

#[test]
fn unknown_role_is_absent() {
    let p = load("warehouse/Purchase.scr");
    assert!(matches!(
        project(&p, "Z"),
        Err(ProjectionError::RoleAbsent { .. })
    ));
}

#[test]
fn chooser_gets_internal_choice_and_receiver_external() {
    let p = load("warehouse/Purchase.scr");
    let b = project(&p, "B").unwrap();
    assert!(
        matches!(b.body.last(), Some(LocalStmt::InternalChoice { branches }) if branches.len() == 3)
    );
    let s = project(&p, "S").unwrap();
    let Some(LocalStmt::ExternalChoice { branches }) = s.body.last() else {
        panic!("{:?}", s.body);
    };
    let heads: Vec<&LocalStmt> = branches.iter().map(|b| &b[0]).collect();
    assert_eq!(
        heads,
        [
            &recv("B", "req", vec![Sort::Str]),
            &recv("B", "buy", vec![Sort::Str]),
            &recv("B", "quit", vec![]),
        ]
    );
}

#[test]
fn uninvolved_role_skips_the_choice() {
    let lp = project(&load("warehouse/Purchase.scr"), "A").unwrap();
    assert!(!lp.body.iter().any(|s| matches!(
        s,
        LocalStmt::InternalChoice { .. } | LocalStmt::ExternalChoice { .. }
    )));
}

#[test]
fn merge_rules() {
    assert_eq!(merge(&vec![], &vec![]).unwrap(), Vec::<LocalStmt>::new());
    let yes = vec![recv("A", "yes", vec![])];
    let no = vec![recv("A", "no", vec![])];
    assert_eq!(
        merge(&yes, &no).unwrap(),
        vec![LocalStmt::ExternalChoice {
            branches: vec![yes.clone(), no.clone()]
        }]
    );
    assert_eq!(merge(&yes, &yes).unwrap(), yes);
    let x = vec![send(&["B"], "x", vec![])];
    let y = vec![recv("B", "y", vec![])];
    assert!(matches!(
        merge(&x, &y),
        Err(ProjectionError::UnmergeableChoice { .. })
    ));
}

#[test]
fn clashing_third_party_is_unmergeable() {
    let p = parse_global(
        "global protocol P(role A, role B, role C) {
           choice at A { l() from A to B; x() from A to C; }
           or { r() from A to B; y() from C to B; }
         }",
    )
    .unwrap();
    assert!(matches!(
        project(&p, "C"),
        Err(ProjectionError::UnmergeableChoice { .. })
    ));
    assert!(project(&p, "B").is_ok());
}

#[test]
fn loop_without_local_actions_collapses() {
    let p = parse_global(
        "global protocol P(role A, role B, role C) {
           rec X { m() from A to B; continue X; }
         }",
    )
    .unwrap();
    assert!(project(&p, "C").unwrap().body.is_empty());
    assert!(matches!(
        project(&p, "A").unwrap().body[0],
        LocalStmt::Rec { .. }
    ));
}

#[test]
fn philosopher_sees_yes_or_no() {
    let p = expand(
        &load("dining_philosophers/DiningPhilosophers.scr"),
        &[("N".to_string(), 2)].into(),
    )
    .unwrap();
    let lp = project(&p, "Ph1").unwrap();
    assert!(lp
        .receivable()
        .contains(&("A".to_string(), "yes".to_string())));
    assert!(lp
        .receivable()
        .contains(&("A".to_string(), "no".to_string())));
    assert_eq!(lp.used_peers().into_iter().collect::<Vec<_>>(), ["A"]);
}

#[test]
fn local_text_round_trips_on_the_corpus_sample() {
    for path in [
        "warehouse/Purchase.scr",
        "warehouse/StoreLoad.scr",
        "big/Big.scr",
    ] {
        let p = expand(&load(path), &Bindings::new()).unwrap();
        for lp in project_all(&p).unwrap() {
            let text = print_local(&lp);
            assert_eq!(parse_local(&text).unwrap(), lp, "{text}");
            assert!(dump_local(&lp).starts_with("LocalProtocol"));
        }
    }
}
