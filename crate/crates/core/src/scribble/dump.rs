use std::fmt::Write;

use super::ast::*;

/// Tree dump: one node per line, children indented by two spaces.
pub fn dump_global(p: &GlobalProtocol) -> String {
    let mut out = String::new();
    dump_one(p, 0, &mut out);
    for sub in p.subprotocols.values() {
        dump_one(sub, 0, &mut out);
    }
    out
}

fn line(level: usize, text: &str, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
    out.push_str(text);
    out.push('\n');
}

fn dump_one(p: &GlobalProtocol, level: usize, out: &mut String) {
    line(level, &format!("GlobalProtocol {}", p.name), out);
    for r in &p.roles {
        let mut s = format!("Role {}", r.name);
        if let Some((lo, hi)) = &r.bounds {
            let _ = write!(s, " [{lo}..{hi}]");
        }
        if let Some(a) = &r.alias {
            let _ = write!(s, " as {a}");
        }
        line(level + 1, &s, out);
    }
    dump_block(&p.body, level + 1, out);
}

fn dump_block(b: &Block, level: usize, out: &mut String) {
    if b.is_empty() {
        line(level, "End", out);
        return;
    }
    for s in b {
        match s {
            Stmt::Interaction { sig, from, to } => {
                let to: Vec<String> = to.iter().map(|r| r.to_string()).collect();
                line(
                    level,
                    &format!("Interaction {sig} {from} -> {}", to.join(", ")),
                    out,
                );
            }
            Stmt::Choice { at, branches } => {
                line(level, &format!("Choice at {at}"), out);
                dump_branches(branches, level + 1, out);
            }
            Stmt::Par { branches } => {
                line(level, "Par", out);
                dump_branches(branches, level + 1, out);
            }
            Stmt::Rec { name, body } => {
                line(level, &format!("Rec {name}"), out);
                dump_block(body, level + 1, out);
            }
            Stmt::Continue { name } => line(level, &format!("Continue {name}"), out),
            Stmt::Do { protocol, args } => {
                line(level, &format!("Do {protocol}"), out);
                for a in args {
                    let text = match a {
                        RoleArg::Existing { role, as_name } => match as_name {
                            Some(n) => format!("Arg {role} as {n}"),
                            None => format!("Arg {role}"),
                        },
                        RoleArg::New { role_type } => format!("Arg new {role_type}"),
                    };
                    line(level + 1, &text, out);
                }
            }
        }
    }
}

fn dump_branches(bs: &[Branch], level: usize, out: &mut String) {
    for b in bs {
        match &b.binder {
            Some(binder) => line(level, &format!("Branch [{binder}]"), out),
            None => line(level, "Branch", out),
        }
        dump_block(&b.body, level + 1, out);
    }
}
