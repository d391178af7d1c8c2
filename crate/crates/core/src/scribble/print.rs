use std::fmt::Write;

use super::ast::*;

/// Renders a protocol (and its subprotocols) as canonical `.scr` text that
/// [`parse_global`](super::parse_global) accepts.
pub fn pretty_print(p: &GlobalProtocol) -> String {
    let mut out = String::new();
    print_one(p, &mut out);
    for sub in p.subprotocols.values() {
        out.push('\n');
        print_one(sub, &mut out);
    }
    out
}

fn print_one(p: &GlobalProtocol, out: &mut String) {
    let roles: Vec<String> = p.roles.iter().map(role_decl).collect();
    let _ = writeln!(out, "global protocol {}({}) {{", p.name, roles.join(", "));
    block(&p.body, 1, out);
    out.push_str("}\n");
}

fn role_decl(d: &RoleDecl) -> String {
    let mut s = format!("role {}", d.name);
    if let Some((lo, hi)) = &d.bounds {
        let _ = write!(s, "[{lo}..{hi}]");
    }
    if let Some(a) = &d.alias {
        let _ = write!(s, " as {a}");
    }
    s
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn branch_head(b: &Branch) -> String {
    match &b.binder {
        Some(binder) => format!("[{binder}] {{"),
        None => "{".to_string(),
    }
}

fn branches(kw: &str, bs: &[Branch], level: usize, out: &mut String) {
    for (i, b) in bs.iter().enumerate() {
        if i > 0 {
            indent(level, out);
            let _ = writeln!(out, "}} {kw} {}", branch_head(b));
        }
        block(&b.body, level + 1, out);
    }
    indent(level, out);
    out.push_str("}\n");
}

fn block(stmts: &Block, level: usize, out: &mut String) {
    for s in stmts {
        indent(level, out);
        match s {
            Stmt::Interaction { sig, from, to } => {
                let to: Vec<String> = to.iter().map(|r| r.to_string()).collect();
                let _ = writeln!(out, "{sig} from {from} to {};", to.join(", "));
            }
            Stmt::Choice { at, branches: bs } => {
                let _ = writeln!(out, "choice at {at} {}", branch_head(&bs[0]));
                branches("or", bs, level, out);
            }
            Stmt::Par { branches: bs } => {
                let head = if bs[0].binder.is_some() {
                    format!("par{}", branch_head(&bs[0]))
                } else {
                    format!("par {}", branch_head(&bs[0]))
                };
                let _ = writeln!(out, "{head}");
                branches("and", bs, level, out);
            }
            Stmt::Rec { name, body } => {
                let _ = writeln!(out, "rec {name} {{");
                block(body, level + 1, out);
                indent(level, out);
                out.push_str("}\n");
            }
            Stmt::Continue { name } => {
                let _ = writeln!(out, "continue {name};");
            }
            Stmt::Do { protocol, args } => {
                let args: Vec<String> = args
                    .iter()
                    .map(|a| match a {
                        RoleArg::Existing {
                            role,
                            as_name: Some(n),
                        } => format!("{role} as {n}"),
                        RoleArg::Existing {
                            role,
                            as_name: None,
                        } => role.to_string(),
                        RoleArg::New { role_type } => format!("new {role_type}"),
                    })
                    .collect();
                let _ = writeln!(out, "{protocol}({});", args.join(", "));
            }
        }
    }
}
