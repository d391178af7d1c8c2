//! Local protocol text: `.scr`-style printing, parsing and tree dumps.
//!
//! ```text
//! local protocol Purchase@A(role B, role S) {
//!   login(str) from S;
//!   auth(str) to B, S;
//! }
//! ```
//!
//! `choice at <self>` is an internal choice; any other role list names the
//! senders an external choice waits on.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::project::heads;
use super::{LocalBlock, LocalProtocol, LocalStmt};
use crate::scribble::{parse_sorts, tokenize, Cursor, MessageSignature, ParseError, Tok};

pub fn print_local(lp: &LocalProtocol) -> String {
    let mut out = String::new();
    let peers: Vec<String> = lp.peers.iter().map(|p| format!("role {p}")).collect();
    let _ = writeln!(
        out,
        "local protocol {}@{}({}) {{",
        lp.protocol_name,
        lp.role,
        peers.join(", ")
    );
    block(&lp.body, &lp.role, 1, &mut out);
    out.push_str("}\n");
    out
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn senders(branches: &[LocalBlock]) -> Vec<String> {
    let mut acc = BTreeSet::new();
    for b in branches {
        if let Some(h) = heads(b) {
            acc.extend(h.into_iter().map(|(from, _)| from));
        }
    }
    acc.into_iter().collect()
}

fn branches(kw: &str, bs: &[LocalBlock], me: &str, level: usize, out: &mut String) {
    for (i, b) in bs.iter().enumerate() {
        if i > 0 {
            indent(level, out);
            let _ = writeln!(out, "}} {kw} {{");
        }
        block(b, me, level + 1, out);
    }
    indent(level, out);
    out.push_str("}\n");
}

fn block(b: &[LocalStmt], me: &str, level: usize, out: &mut String) {
    for s in b {
        indent(level, out);
        match s {
            LocalStmt::Send { to, sig } => {
                let _ = writeln!(out, "{sig} to {};", to.join(", "));
            }
            LocalStmt::Receive { from, sig } => {
                let _ = writeln!(out, "{sig} from {from};");
            }
            LocalStmt::InternalChoice { branches: bs } => {
                let _ = writeln!(out, "choice at {me} {{");
                branches("or", bs, me, level, out);
            }
            LocalStmt::ExternalChoice { branches: bs } => {
                let _ = writeln!(out, "choice at {} {{", senders(bs).join(", "));
                branches("or", bs, me, level, out);
            }
            LocalStmt::Par { branches: bs } => {
                out.push_str("par {\n");
                branches("and", bs, me, level, out);
            }
            LocalStmt::Rec { name, body } => {
                let _ = writeln!(out, "rec {name} {{");
                block(body, me, level + 1, out);
                indent(level, out);
                out.push_str("}\n");
            }
            LocalStmt::Continue { name } => {
                let _ = writeln!(out, "continue {name};");
            }
        }
    }
}

/// Parses the output of [`print_local`].
pub fn parse_local(source: &str) -> Result<LocalProtocol, ParseError> {
    let mut cur = Cursor::new(tokenize(source)?);
    cur.expect_kw("local")?;
    cur.expect_kw("protocol")?;
    let protocol_name = cur.expect_ident("protocol name")?;
    cur.expect_punct("@")?;
    let role = cur.expect_ident("role")?;
    cur.expect_punct("(")?;
    let mut peers = Vec::new();
    if !cur.is_punct(")") {
        loop {
            cur.expect_kw("role")?;
            let name = cur.expect_ident("role name")?;
            if peers.contains(&name) || name == role {
                return Err(ParseError::DuplicateRole { name });
            }
            peers.push(name);
            if !cur.eat_punct(",") {
                break;
            }
        }
    }
    cur.expect_punct(")")?;
    let mut p = LocalParser {
        cur: &mut cur,
        me: role.clone(),
    };
    let body = p.block()?;
    if !cur.at_eof() {
        return Err(cur.error(&["end of input"]));
    }
    Ok(LocalProtocol {
        protocol_name,
        role,
        peers,
        body,
    })
}

struct LocalParser<'c> {
    cur: &'c mut Cursor,
    me: String,
}

impl LocalParser<'_> {
    fn block(&mut self) -> Result<LocalBlock, ParseError> {
        self.cur.expect_punct("{")?;
        let mut out = Vec::new();
        while !self.cur.eat_punct("}") {
            if self.cur.at_eof() {
                return Err(self.cur.error(&["`}`", "statement"]));
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn branches(&mut self, kw: &str) -> Result<Vec<LocalBlock>, ParseError> {
        let mut out = vec![self.block()?];
        while self.cur.eat_kw(kw) {
            out.push(self.block()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> Result<LocalStmt, ParseError> {
        if self.cur.eat_kw("choice") {
            self.cur.expect_kw("at")?;
            let mut at = vec![self.cur.expect_ident("role")?];
            while self.cur.eat_punct(",") {
                at.push(self.cur.expect_ident("role")?);
            }
            let branches = self.branches("or")?;
            return Ok(if at == [self.me.clone()] {
                LocalStmt::InternalChoice { branches }
            } else {
                LocalStmt::ExternalChoice { branches }
            });
        }
        if self.cur.eat_kw("par") {
            return Ok(LocalStmt::Par {
                branches: self.branches("and")?,
            });
        }
        if self.cur.eat_kw("rec") {
            let name = self.cur.expect_ident("recursion label")?;
            return Ok(LocalStmt::Rec {
                name,
                body: self.block()?,
            });
        }
        if self.cur.eat_kw("continue") {
            let name = self.cur.expect_ident("recursion label")?;
            self.cur.expect_punct(";")?;
            return Ok(LocalStmt::Continue { name });
        }
        let label = match self.cur.peek().clone() {
            Tok::Ident(s) if !crate::scribble::is_keyword(&s) => {
                self.cur.bump();
                s
            }
            Tok::Punct("(") => String::new(),
            _ => {
                return Err(self.cur.error(&[
                    "message signature",
                    "`choice`",
                    "`par`",
                    "`rec`",
                    "`continue`",
                    "`}`",
                ]))
            }
        };
        let payload = if self.cur.eat_punct("(") {
            parse_sorts(self.cur)?
        } else {
            Vec::new()
        };
        let sig = MessageSignature { label, payload };
        if self.cur.eat_kw("from") {
            let from = self.cur.expect_ident("role")?;
            self.cur.expect_punct(";")?;
            return Ok(LocalStmt::Receive { from, sig });
        }
        self.cur.expect_kw("to")?;
        let mut to = vec![self.cur.expect_ident("role")?];
        while self.cur.eat_punct(",") {
            to.push(self.cur.expect_ident("role")?);
        }
        self.cur.expect_punct(";")?;
        Ok(LocalStmt::Send { to, sig })
    }
}

/// Tree dump in the same layout as the global dump.
pub fn dump_local(lp: &LocalProtocol) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "LocalProtocol {}@{}", lp.protocol_name, lp.role);
    for p in &lp.peers {
        let _ = writeln!(out, "  Peer {p}");
    }
    dump_block(&lp.body, 1, &mut out);
    out
}

fn line(level: usize, text: &str, out: &mut String) {
    indent(level, out);
    out.push_str(text);
    out.push('\n');
}

fn dump_block(b: &[LocalStmt], level: usize, out: &mut String) {
    if b.is_empty() {
        line(level, "End", out);
    }
    for s in b {
        match s {
            LocalStmt::Send { to, sig } => {
                line(level, &format!("Send {sig} -> {}", to.join(", ")), out)
            }
            LocalStmt::Receive { from, sig } => {
                line(level, &format!("Receive {sig} <- {from}"), out)
            }
            LocalStmt::InternalChoice { branches }
            | LocalStmt::ExternalChoice { branches }
            | LocalStmt::Par { branches } => {
                let head = match s {
                    LocalStmt::InternalChoice { .. } => "InternalChoice",
                    LocalStmt::ExternalChoice { .. } => "ExternalChoice",
                    _ => "Par",
                };
                line(level, head, out);
                for br in branches {
                    line(level + 1, "Branch", out);
                    dump_block(br, level + 2, out);
                }
            }
            LocalStmt::Rec { name, body } => {
                line(level, &format!("Rec {name}"), out);
                dump_block(body, level + 1, out);
            }
            LocalStmt::Continue { name } => line(level, &format!("Continue {name}"), out),
        }
    }
}
