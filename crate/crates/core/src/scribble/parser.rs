//! Recursive-descent parser for global protocols.
//!
//! ```text
//! file      = protocol+
//! protocol  = "global" "protocol" ID "(" [role_decl ("," role_decl)*] ")" block
//! role_decl = "role" ID ["[" expr ".." expr "]"] ["as" ID]
//! block     = "{" stmt* "}"
//! stmt      = sig "from" role_ref "to" role_ref ("," role_ref)* ";"
//!           | "choice" "at" role_ref branch ("or" branch)*
//!           | "par" branch ("and" branch)*
//!           | "rec" ID block
//!           | "continue" ID ";"
//!           | ID "(" [role_arg ("," role_arg)*] ")" ";"
//! sig       = ID | [ID] "(" [sort ("," sort)*] ")"
//! branch    = ["[" ID ":" expr ".." expr "]"] block
//! role_ref  = ID ["[" (expr | expr ".." expr | ID ":" expr ".." expr) "]"]
//! role_arg  = "new" ID | role_ref ["as" ID]
//! expr      = atom (("+" | "-") atom)*
//! ```

use std::collections::BTreeMap;

use super::ast::*;
use super::lexer::{tokenize, Cursor, Tok};
use super::ParseError;

const KEYWORDS: [&str; 15] = [
    "global", "local", "protocol", "role", "as", "from", "to", "choice", "at", "or", "par", "and",
    "rec", "continue", "new",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Parses a source file. The first protocol is returned; any further protocols
/// in the same file become its callable subprotocols.
pub fn parse_global(source: &str) -> Result<GlobalProtocol, ParseError> {
    let mut all = parse_all(source)?;
    let mut main = all.remove(0);
    for p in all {
        if p.name == main.name || main.subprotocols.contains_key(&p.name) {
            return Err(ParseError::DuplicateProtocol { name: p.name });
        }
        main.subprotocols.insert(p.name.clone(), p);
    }
    Ok(main)
}

/// Parses every protocol in the file, in source order.
pub fn parse_all(source: &str) -> Result<Vec<GlobalProtocol>, ParseError> {
    let mut cur = Cursor::new(tokenize(source)?);
    let mut out = Vec::new();
    loop {
        out.push(GlobalParser::new(&mut cur).protocol()?);
        if cur.at_eof() {
            break;
        }
    }
    Ok(out)
}

struct GlobalParser<'c> {
    cur: &'c mut Cursor,
    names: Vec<String>,
}

impl<'c> GlobalParser<'c> {
    fn new(cur: &'c mut Cursor) -> Self {
        GlobalParser {
            cur,
            names: Vec::new(),
        }
    }

    fn protocol(&mut self) -> Result<GlobalProtocol, ParseError> {
        self.cur.expect_kw("global")?;
        self.cur.expect_kw("protocol")?;
        let name = self.cur.expect_ident("protocol name")?;
        self.cur.expect_punct("(")?;
        let mut roles: Vec<RoleDecl> = Vec::new();
        if !self.cur.is_punct(")") {
            loop {
                let decl = self.role_decl()?;
                for n in std::iter::once(&decl.name).chain(decl.alias.iter()) {
                    if self.names.contains(n) {
                        return Err(ParseError::DuplicateRole { name: n.clone() });
                    }
                    self.names.push(n.clone());
                }
                roles.push(decl);
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
        }
        self.cur.expect_punct(")")?;
        let body = self.block()?;
        Ok(GlobalProtocol {
            name,
            roles,
            body,
            subprotocols: BTreeMap::new(),
        })
    }

    fn role_decl(&mut self) -> Result<RoleDecl, ParseError> {
        self.cur.expect_kw("role")?;
        let mut decl = RoleDecl::new(self.cur.expect_ident("role name")?);
        if self.cur.eat_punct("[") {
            let lo = self.expr()?;
            self.cur.expect_punct("..")?;
            let hi = self.expr()?;
            self.cur.expect_punct("]")?;
            decl.bounds = Some((lo, hi));
        }
        if self.cur.eat_kw("as") {
            decl.alias = Some(self.cur.expect_ident("role alias")?);
        }
        Ok(decl)
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.cur.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.cur.eat_punct("}") {
            if self.cur.at_eof() {
                return Err(self.cur.error(&["`}`", "statement"]));
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn branch(&mut self) -> Result<Branch, ParseError> {
        let binder = if self.cur.is_punct("[") {
            self.cur.bump();
            let b = self.binder()?;
            self.cur.expect_punct("]")?;
            Some(b)
        } else {
            None
        };
        Ok(Branch {
            binder,
            body: self.block()?,
        })
    }

    fn binder(&mut self) -> Result<IndexBinder, ParseError> {
        let var = self.cur.expect_ident("index variable")?;
        self.cur.expect_punct(":")?;
        let lo = self.expr()?;
        self.cur.expect_punct("..")?;
        let hi = self.expr()?;
        Ok(IndexBinder { var, lo, hi })
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.cur.eat_kw("choice") {
            self.cur.expect_kw("at")?;
            let at = self.role_ref(false)?;
            let mut branches = vec![self.branch()?];
            while self.cur.eat_kw("or") {
                branches.push(self.branch()?);
            }
            return Ok(Stmt::Choice { at, branches });
        }
        if self.cur.eat_kw("par") {
            let mut branches = vec![self.branch()?];
            while self.cur.eat_kw("and") {
                branches.push(self.branch()?);
            }
            return Ok(Stmt::Par { branches });
        }
        if self.cur.eat_kw("rec") {
            let name = self.cur.expect_ident("recursion label")?;
            let body = self.block()?;
            return Ok(Stmt::Rec { name, body });
        }
        if self.cur.eat_kw("continue") {
            let name = self.cur.expect_ident("recursion label")?;
            self.cur.expect_punct(";")?;
            return Ok(Stmt::Continue { name });
        }
        if self.cur.is_punct("(") {
            return self.interaction(String::new());
        }
        match self.cur.peek().clone() {
            Tok::Ident(id) if !is_keyword(&id) => {
                if matches!(self.cur.peek_at(1), Tok::Punct("(")) && self.paren_group_is_call() {
                    return self.call();
                }
                self.cur.bump();
                self.interaction(id)
            }
            _ => Err(self.cur.error(&[
                "message signature",
                "`choice`",
                "`par`",
                "`rec`",
                "`continue`",
                "subprotocol call",
                "`}`",
            ])),
        }
    }

    /// Looks past `ID ( ... )` to decide between a message signature and a call.
    fn paren_group_is_call(&mut self) -> bool {
        let mut n = 2;
        let mut depth = 1;
        loop {
            match self.cur.peek_at(n) {
                Tok::Punct("(") => depth += 1,
                Tok::Punct(")") => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                Tok::Eof => return false,
                _ => {}
            }
            n += 1;
        }
        !matches!(self.cur.peek_at(n + 1), Tok::Ident(s) if s == "from")
    }

    fn call(&mut self) -> Result<Stmt, ParseError> {
        let protocol = self.cur.expect_ident("protocol name")?;
        self.cur.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.cur.is_punct(")") {
            loop {
                if self.cur.eat_kw("new") {
                    args.push(RoleArg::New {
                        role_type: self.cur.expect_ident("role type")?,
                    });
                } else {
                    let role = self.role_ref(false)?;
                    let as_name = if self.cur.eat_kw("as") {
                        Some(self.cur.expect_ident("parameter role")?)
                    } else {
                        None
                    };
                    args.push(RoleArg::Existing { role, as_name });
                }
                if !self.cur.eat_punct(",") {
                    break;
                }
            }
        }
        self.cur.expect_punct(")")?;
        self.cur.expect_punct(";")?;
        Ok(Stmt::Do { protocol, args })
    }

    fn interaction(&mut self, label: String) -> Result<Stmt, ParseError> {
        let payload = if self.cur.eat_punct("(") {
            sorts(self.cur)?
        } else {
            Vec::new()
        };
        self.cur.expect_kw("from")?;
        let from = self.role_ref(true)?;
        self.cur.expect_kw("to")?;
        let mut to = vec![self.role_ref(false)?];
        while self.cur.eat_punct(",") {
            to.push(self.role_ref(false)?);
        }
        self.cur.expect_punct(";")?;
        Ok(Stmt::Interaction {
            sig: MessageSignature { label, payload },
            from,
            to,
        })
    }

    fn role_ref(&mut self, allow_binder: bool) -> Result<RoleRef, ParseError> {
        let (line, column) = self.cur.here();
        let base = self.cur.expect_ident("role")?;
        if !self.names.contains(&base) {
            return Err(ParseError::UnknownRole {
                name: base,
                line,
                column,
            });
        }
        let binder_ahead = matches!(self.cur.peek_at(1), Tok::Ident(_))
            && matches!(self.cur.peek_at(2), Tok::Punct(":"));
        if !self.cur.is_punct("[") || (binder_ahead && !allow_binder) {
            return Ok(RoleRef { base, index: None });
        }
        self.cur.bump();
        let index = if binder_ahead {
            RoleIndex::Bound(self.binder()?)
        } else {
            let lo = self.expr()?;
            if self.cur.eat_punct("..") {
                RoleIndex::Range(lo, self.expr()?)
            } else {
                RoleIndex::Single(lo)
            }
        };
        self.cur.expect_punct("]")?;
        Ok(RoleRef {
            base,
            index: Some(index),
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        expr(self.cur)
    }
}

pub(crate) fn sorts(cur: &mut Cursor) -> Result<Vec<Sort>, ParseError> {
    let mut out = Vec::new();
    if cur.eat_punct(")") {
        return Ok(out);
    }
    loop {
        let sort = match cur.peek() {
            Tok::Ident(s) => Sort::from_keyword(s),
            _ => None,
        };
        match sort {
            Some(s) => {
                cur.bump();
                out.push(s);
            }
            None => return Err(cur.error(&["`str`", "`int`", "`real`", "`bool`", "`unit`"])),
        }
        if cur.eat_punct(")") {
            return Ok(out);
        }
        cur.expect_punct(",")?;
    }
}

fn atom(cur: &mut Cursor) -> Result<Expr, ParseError> {
    match cur.peek().clone() {
        Tok::Int(v) => {
            cur.bump();
            Ok(Expr::Lit(v))
        }
        Tok::Ident(s) if !is_keyword(&s) => {
            cur.bump();
            Ok(Expr::Sym(s))
        }
        _ => Err(cur.error(&["integer", "symbol"])),
    }
}

fn expr(cur: &mut Cursor) -> Result<Expr, ParseError> {
    let mut e = atom(cur)?;
    loop {
        if cur.eat_punct("+") {
            e = Expr::Add(Box::new(e), Box::new(atom(cur)?));
        } else if cur.eat_punct("-") {
            e = Expr::Sub(Box::new(e), Box::new(atom(cur)?));
        } else {
            return Ok(e);
        }
    }
}
