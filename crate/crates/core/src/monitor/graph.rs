//! Text and DOT renderings of monitors.
//!
//! ```text
//! fsm Big@Sink
//! initial 0
//! state 0 fork 1
//!   region
//!     initial 0
//!     state 0
//!       edge -> 1 recv A done()
//!     state 1 accept
//!   end
//! state 1
//!   edge -> 2 send A done()
//! ```

use std::fmt::Write;
use std::sync::Arc;

use thiserror::Error;

use super::{ActionKey, Direction, Edge, Fork, FsmState, MonitorFsm};
use crate::scribble::Sort;

pub fn write_graph(fsm: &MonitorFsm) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fsm {}@{}", fsm.protocol, fsm.role);
    body(fsm, 0, &mut out);
    out
}

fn pad(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn body(fsm: &MonitorFsm, level: usize, out: &mut String) {
    pad(level, out);
    let _ = writeln!(out, "initial {}", fsm.initial);
    for (i, st) in fsm.states.iter().enumerate() {
        pad(level, out);
        let _ = write!(out, "state {i}");
        if st.accepting {
            out.push_str(" accept");
        }
        if let Some(f) = &st.fork {
            let _ = write!(out, " fork {}", f.join);
        }
        out.push('\n');
        if let Some(f) = &st.fork {
            for r in &f.regions {
                pad(level + 1, out);
                out.push_str("region\n");
                body(r, level + 2, out);
                pad(level + 1, out);
                out.push_str("end\n");
            }
        }
        for e in &st.edges {
            pad(level + 1, out);
            let _ = writeln!(
                out,
                "edge -> {} {} {} {}",
                e.target,
                e.key.direction.keyword(),
                e.key.peer,
                e.key.signature()
            );
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct GraphError {
    pub line: usize,
    pub message: String,
}

/// Parses the output of [`write_graph`].
pub fn parse_graph(text: &str) -> Result<MonitorFsm, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();
    let (n, head) = lines.next().ok_or(GraphError {
        line: 1,
        message: "empty input".into(),
    })?;
    let name = head
        .strip_prefix("fsm ")
        .ok_or_else(|| err(n, "expected `fsm P@R`"))?;
    let (protocol, role) = name
        .split_once('@')
        .ok_or_else(|| err(n, "expected `P@R`"))?;
    let fsm = parse_body(&mut lines, protocol, role)?;
    if let Some((n, _)) = lines.next() {
        return Err(err(n, "trailing input"));
    }
    Ok(fsm)
}

fn err(line: usize, message: &str) -> GraphError {
    GraphError {
        line,
        message: message.to_string(),
    }
}

type Lines<'a, I> = std::iter::Peekable<I>;

fn parse_body<'a, I>(
    lines: &mut Lines<'a, I>,
    protocol: &str,
    role: &str,
) -> Result<MonitorFsm, GraphError>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let (n, l) = lines.next().ok_or_else(|| err(0, "missing `initial`"))?;
    let initial = l
        .strip_prefix("initial ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(n, "expected `initial <n>`"))?;
    let mut states: Vec<FsmState> = Vec::new();
    while let Some(&(n, l)) = lines.peek() {
        if l == "end" {
            break;
        }
        if let Some(rest) = l.strip_prefix("state ") {
            lines.next();
            let mut words = rest.split_whitespace();
            let id: usize = words
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| err(n, "expected state number"))?;
            if id != states.len() {
                return Err(err(n, "states must be numbered consecutively from 0"));
            }
            let mut st = FsmState::default();
            while let Some(w) = words.next() {
                match w {
                    "accept" => st.accepting = true,
                    "fork" => {
                        let join = words
                            .next()
                            .and_then(|w| w.parse().ok())
                            .ok_or_else(|| err(n, "expected join state"))?;
                        st.fork = Some(Fork {
                            regions: Vec::new(),
                            join,
                        });
                    }
                    _ => return Err(err(n, &format!("unexpected `{w}`"))),
                }
            }
            states.push(st);
        } else if l == "region" {
            lines.next();
            let fork = states
                .last_mut()
                .and_then(|s| s.fork.as_mut())
                .ok_or_else(|| err(n, "`region` outside a fork state"))?;
            let r = parse_body(lines, protocol, role)?;
            fork.regions.push(Arc::new(r));
            match lines.next() {
                Some((_, "end")) => {}
                Some((n, _)) => return Err(err(n, "expected `end`")),
                None => return Err(err(n, "unterminated region")),
            }
        } else if let Some(rest) = l.strip_prefix("edge -> ") {
            lines.next();
            let st = states
                .last_mut()
                .ok_or_else(|| err(n, "`edge` before any state"))?;
            st.edges.push(parse_edge(n, rest)?);
        } else {
            return Err(err(n, &format!("unexpected line `{l}`")));
        }
    }
    let count = states.len();
    let in_range = |s: usize| s < count;
    if !in_range(initial)
        || states.iter().any(|s| {
            s.edges.iter().any(|e| !in_range(e.target))
                || s.fork.as_ref().is_some_and(|f| !in_range(f.join))
        })
    {
        return Err(err(0, "state reference out of range"));
    }
    Ok(MonitorFsm {
        protocol: protocol.to_string(),
        role: role.to_string(),
        initial,
        states,
    })
}

fn parse_edge(n: usize, rest: &str) -> Result<Edge, GraphError> {
    let mut parts = rest.splitn(4, ' ');
    let target = parts
        .next()
        .and_then(|w| w.parse().ok())
        .ok_or_else(|| err(n, "expected edge target"))?;
    let direction = match parts.next() {
        Some("send") => Direction::Send,
        Some("recv") => Direction::Receive,
        _ => return Err(err(n, "expected `send` or `recv`")),
    };
    let peer = parts.next().ok_or_else(|| err(n, "expected peer"))?;
    let sig = parts.next().ok_or_else(|| err(n, "expected signature"))?;
    let (label, sorts) = sig
        .strip_suffix(')')
        .and_then(|s| s.split_once('('))
        .ok_or_else(|| err(n, "expected `label(sorts)`"))?;
    let payload = sorts
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Sort::from_keyword(s).ok_or_else(|| err(n, &format!("unknown sort `{s}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Edge {
        key: ActionKey {
            direction,
            peer: peer.to_string(),
            label: label.to_string(),
            payload,
        },
        target,
    })
}

/// Graphviz rendering; fork regions become clusters.
pub fn to_dot(fsm: &MonitorFsm) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}@{}\" {{", fsm.protocol, fsm.role);
    out.push_str("  rankdir=LR;\n");
    let mut counter = 0;
    dot_body(fsm, "s", &mut counter, &mut out);
    out.push_str("}\n");
    out
}

fn dot_body(fsm: &MonitorFsm, prefix: &str, counter: &mut usize, out: &mut String) {
    let _ = writeln!(out, "  {prefix}start [shape=point];");
    let _ = writeln!(out, "  {prefix}start -> {prefix}{};", fsm.initial);
    for (i, st) in fsm.states.iter().enumerate() {
        let shape = if st.accepting {
            "doublecircle"
        } else if st.fork.is_some() {
            "box"
        } else {
            "circle"
        };
        let _ = writeln!(out, "  {prefix}{i} [label=\"{i}\", shape={shape}];");
        for e in &st.edges {
            let mark = match e.key.direction {
                Direction::Send => '!',
                Direction::Receive => '?',
            };
            let _ = writeln!(
                out,
                "  {prefix}{i} -> {prefix}{} [label=\"{}{mark}{}\"];",
                e.target,
                e.key.peer,
                e.key.signature()
            );
        }
        if let Some(f) = &st.fork {
            for r in &f.regions {
                *counter += 1;
                let inner = format!("r{counter}_");
                let _ = writeln!(out, "  subgraph cluster_{counter} {{");
                dot_body(r, &inner, counter, out);
                out.push_str("  }\n");
                let _ = writeln!(out, "  {prefix}{i} -> {inner}start [style=dashed];");
            }
            let _ = writeln!(
                out,
                "  {prefix}{i} -> {prefix}{} [style=dotted, label=\"join\"];",
                f.join
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::build_fsm;
    use crate::projection::project;
    use crate::scribble::parse_global;

    const BIG: &str = "global protocol Big(role A, role B, role Sink as S) {
        par { ping() from A to B; pong() from B to A; done() from A to S; }
        and { ping() from B to A; pong() from A to B; done() from B to S; }
        done() from S to A; done() from S to B; }";

    #[test]
    fn graph_round_trip_with_fork() {
        let fsm = build_fsm(&project(&parse_global(BIG).unwrap(), "S").unwrap()).unwrap();
        let text = write_graph(&fsm);
        assert!(text.starts_with("fsm Big@S\ninitial 0\nstate 0 fork 1\n  region\n"));
        assert_eq!(parse_graph(&text).unwrap(), fsm);
    }

    #[test]
    fn empty_label_edges_round_trip() {
        let src = "global protocol P(role A, role B) { (int) from A to B; }";
        let fsm = build_fsm(&project(&parse_global(src).unwrap(), "B").unwrap()).unwrap();
        let text = write_graph(&fsm);
        assert!(text.contains("edge -> 1 recv A (int)"));
        assert_eq!(parse_graph(&text).unwrap(), fsm);
    }

    #[test]
    fn dot_mentions_every_state() {
        let fsm = build_fsm(&project(&parse_global(BIG).unwrap(), "A").unwrap()).unwrap();
        let dot = to_dot(&fsm);
        assert!(dot.starts_with("digraph \"Big@A\""));
        assert!(dot.contains("cluster_1"));
    }

    #[test]
    fn bad_graphs_are_rejected() {
        assert!(parse_graph("").is_err());
        assert!(parse_graph("fsm P@A\ninitial 3\nstate 0 accept\n").is_err());
        assert!(parse_graph("fsm P@A\ninitial 0\nstate 0\n  edge -> 0 jump A x()\n").is_err());
    }
}
