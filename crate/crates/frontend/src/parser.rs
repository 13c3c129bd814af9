//! Recursive-descent parser from tokens to the surface syntax, which still
//! contains `for` loops, indexed names and sugar (`disc`, `argmax`,
//! `LapPos`, comparisons in conditions). [`crate::lower`] removes them.

use dip_symalg::{parse_pseudo_rational, PseudoRational, Q};
use num_traits::{ToPrimitive, Zero};

use crate::ast::{CmpOp, VarSort};
use crate::lexer::{lex, Tok, Token};
use crate::FrontendError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub col: usize,
}

/// Index inside `name[…]`: a literal, a loop variable or constant, plus an
/// offset.
#[derive(Clone, Debug)]
pub(crate) enum Index {
    Lit(i64),
    Name(String, i64),
}

#[derive(Clone, Debug)]
pub(crate) struct Name {
    pub base: String,
    pub index: Option<Index>,
    pub pos: Pos,
}

#[derive(Clone, Debug)]
pub(crate) enum SExpr {
    Num(Q),
    Bool(bool),
    Var(Name),
    Neg(Box<SExpr>),
    Add(Box<SExpr>, Box<SExpr>),
    Sub(Box<SExpr>, Box<SExpr>),
    Mul(Box<SExpr>, Box<SExpr>),
    Div(Box<SExpr>, Box<SExpr>, Pos),
    Cmp(CmpOp, Box<SExpr>, Box<SExpr>),
    Not(Box<SExpr>),
    And(Box<SExpr>, Box<SExpr>),
    Or(Box<SExpr>, Box<SExpr>),
    /// `max(…)`; only meaningful inside `disc`.
    Max(Vec<SExpr>, Pos),
}

#[derive(Clone, Debug)]
pub(crate) enum Rhs {
    Expr(SExpr),
    Lap { scale: SExpr, mean: SExpr },
    DLap { scale: SExpr, mean: SExpr },
    LapPos { scale: SExpr, mean: SExpr },
    ExpMech { name: Name, scale: SExpr, args: Vec<SExpr> },
    Choose { name: Name, scale: SExpr, args: Vec<SExpr> },
    Disc { arg: SExpr, seq: Vec<SExpr> },
    Argmax { args: Vec<SExpr> },
}

#[derive(Clone, Debug)]
pub(crate) enum Bound {
    Lit(i64),
    Const(String, Pos),
}

#[derive(Clone, Debug)]
pub(crate) enum SKind {
    Assign { target: Name, rhs: Rhs },
    If { cond: SExpr, then_branch: Vec<SStmt>, else_branch: Vec<SStmt> },
    While { cond: SExpr, body: Vec<SStmt> },
    For { var: String, lo: Bound, hi: Bound, body: Vec<SStmt> },
    Exit,
}

#[derive(Clone, Debug)]
pub(crate) struct SStmt {
    pub label: Option<String>,
    pub kind: SKind,
    pub pos: Pos,
}

/// `name` or `name[lo..hi]` in declarations.
#[derive(Clone, Debug)]
pub(crate) struct DeclName {
    pub base: String,
    pub range: Option<(Bound, Bound)>,
    pub pos: Pos,
}

#[derive(Clone, Debug)]
pub(crate) struct Row<T> {
    pub args: Vec<Bound>,
    pub entries: Vec<(Bound, T)>,
    pub pos: Pos,
}

#[derive(Clone, Debug)]
pub(crate) enum Item {
    Domain { lo: Bound, hi: Bound, pos: Pos },
    Const { name: String, value: i64, pos: Pos },
    Input(Vec<DeclName>),
    Output(Vec<DeclName>),
    Decl(VarSort, Vec<DeclName>),
    Score { name: String, arity: usize, rows: Vec<Row<Q>>, pos: Pos },
    Choose { name: String, arity: usize, rows: Vec<Row<PseudoRational>>, pos: Pos },
    Stmt(SStmt),
}

pub(crate) fn parse_items(src: &str) -> Result<Vec<Item>, FrontendError> {
    let toks = lex(src)?;
    let mut p = Parser { src, toks, pos: 0 };
    let mut items = Vec::new();
    loop {
        p.skip_separators();
        if p.peek() == &Tok::Eof {
            break;
        }
        items.push(p.item()?);
        p.end_of_statement()?;
    }
    Ok(items)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

const KEYWORDS: &[&str] = &[
    "domain", "const", "input", "output", "bool", "dom", "int", "real", "score", "choose", "if", "else", "while", "for",
    "in", "exit", "not", "and", "or", "true", "false",
];

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> Pos {
        let t = &self.toks[self.pos];
        Pos { line: t.line, col: t.col }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FrontendError> {
        let t = &self.toks[self.pos];
        Err(FrontendError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn expect(&mut self, t: Tok) -> Result<(), FrontendError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            let found = self.peek().describe();
            self.err(format!("expected {}, found {found}", t.describe()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected a name, found {}", other.describe())),
        }
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Tok::Newline | Tok::Semi) {
            self.bump();
        }
    }

    fn end_of_statement(&mut self) -> Result<(), FrontendError> {
        match self.peek() {
            Tok::Newline | Tok::Semi | Tok::Eof | Tok::RBrace => Ok(()),
            other => {
                let d = other.describe();
                self.err(format!("expected end of statement, found {d}"))
            }
        }
    }

    fn int(&mut self) -> Result<i64, FrontendError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                let n = if neg { -n } else { n };
                match n.to_i64() {
                    Some(v) => Ok(v),
                    None => self.err("integer out of range"),
                }
            }
            other => self.err(format!("expected an integer, found {}", other.describe())),
        }
    }

    fn bound(&mut self) -> Result<Bound, FrontendError> {
        if let Tok::Ident(_) = self.peek() {
            let pos = self.here();
            return Ok(Bound::Const(self.ident()?, pos));
        }
        Ok(Bound::Lit(self.int()?))
    }

    fn item(&mut self) -> Result<Item, FrontendError> {
        let pos = self.here();
        if self.eat_kw("domain") {
            let lo = self.bound()?;
            self.expect(Tok::DotDot)?;
            let hi = self.bound()?;
            return Ok(Item::Domain { lo, hi, pos });
        }
        if self.eat_kw("const") {
            let name = self.ident()?;
            self.expect(Tok::Assign)?;
            let value = self.int()?;
            return Ok(Item::Const { name, value, pos });
        }
        if self.eat_kw("input") {
            return Ok(Item::Input(self.decl_names()?));
        }
        if self.eat_kw("output") {
            return Ok(Item::Output(self.decl_names()?));
        }
        for (kw, sort) in [("bool", VarSort::Bool), ("dom", VarSort::Dom), ("int", VarSort::Int), ("real", VarSort::Real)] {
            if self.eat_kw(kw) {
                return Ok(Item::Decl(sort, self.decl_names()?));
            }
        }
        if self.is_kw("score") || (self.is_kw("choose") && *self.peek_at(1) != Tok::LParen) {
            let is_score = self.is_kw("score");
            self.bump();
            let name = self.ident()?;
            self.expect(Tok::LParen)?;
            let arity = self.int()?;
            if arity < 0 {
                return self.err("arity must be non-negative");
            }
            self.expect(Tok::RParen)?;
            return if is_score {
                let rows = self.rows(|p, text| {
                    let f = parse_pseudo_rational(text).map_err(|e| p.non_rational(e.to_string()))?;
                    f.as_constant().ok_or_else(|| p.non_rational(format!("score {text:?} is not a rational constant")))
                })?;
                Ok(Item::Score { name, arity: arity as usize, rows, pos })
            } else {
                let rows = self.rows(|p, text| parse_pseudo_rational(text).map_err(|e| p.non_rational(e.to_string())))?;
                Ok(Item::Choose { name, arity: arity as usize, rows, pos })
            };
        }
        Ok(Item::Stmt(self.stmt()?))
    }

    fn non_rational(&self, msg: String) -> FrontendError {
        let t = &self.toks[self.pos];
        FrontendError::NonRational { line: t.line, col: t.col, msg }
    }

    fn decl_names(&mut self) -> Result<Vec<DeclName>, FrontendError> {
        let mut out = Vec::new();
        loop {
            let pos = self.here();
            let base = self.ident()?;
            let range = if *self.peek() == Tok::LBracket {
                self.bump();
                let lo = self.bound()?;
                self.expect(Tok::DotDot)?;
                let hi = self.bound()?;
                self.expect(Tok::RBracket)?;
                Some((lo, hi))
            } else {
                None
            };
            out.push(DeclName { base, range, pos });
            if *self.peek() != Tok::Comma {
                return Ok(out);
            }
            self.bump();
        }
    }

    /// `{ (args) -> v: value; v: value … }`, one row per line. Values are
    /// taken verbatim from the source up to the next `;`, line end or `}`.
    fn rows<T>(
        &mut self,
        value: impl Fn(&Self, &str) -> Result<T, FrontendError>,
    ) -> Result<Vec<Row<T>>, FrontendError> {
        self.skip_newlines();
        self.expect(Tok::LBrace)?;
        let mut rows = Vec::new();
        loop {
            self.skip_separators();
            if *self.peek() == Tok::RBrace {
                self.bump();
                return Ok(rows);
            }
            let pos = self.here();
            self.expect(Tok::LParen)?;
            let mut args = Vec::new();
            while *self.peek() != Tok::RParen {
                args.push(self.bound()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                }
            }
            self.bump();
            self.expect(Tok::MapsTo)?;
            let mut entries = Vec::new();
            loop {
                let v = self.bound()?;
                self.expect(Tok::Colon)?;
                let start = self.toks[self.pos].start;
                let mut depth = 0i32;
                while !(depth == 0 && matches!(self.peek(), Tok::Semi | Tok::Newline | Tok::RBrace | Tok::Eof)) {
                    match self.peek() {
                        Tok::LParen => depth += 1,
                        Tok::RParen => depth -= 1,
                        Tok::Newline | Tok::Eof => return self.err("unbalanced parentheses in table value"),
                        _ => {}
                    }
                    self.bump();
                }
                let end = self.toks[self.pos].start;
                let text = self.src[start..end].trim();
                if text.is_empty() {
                    return self.err("missing table value");
                }
                entries.push((v, value(self, text)?));
                if *self.peek() == Tok::Semi {
                    self.bump();
                    if matches!(self.peek(), Tok::Newline | Tok::RBrace) {
                        break;
                    }
                    continue;
                }
                break;
            }
            rows.push(Row { args, entries, pos });
        }
    }

    fn block(&mut self) -> Result<Vec<SStmt>, FrontendError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            self.skip_separators();
            if *self.peek() == Tok::RBrace {
                self.bump();
                return Ok(out);
            }
            if *self.peek() == Tok::Eof {
                return self.err("unclosed block");
            }
            out.push(self.stmt()?);
            self.end_of_statement()?;
        }
    }

    fn label(&mut self) -> Option<String> {
        if *self.peek_at(1) != Tok::Colon {
            return None;
        }
        let l = match self.peek() {
            Tok::Int(n) => n.to_string(),
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => s.clone(),
            _ => return None,
        };
        self.bump();
        self.bump();
        Some(l)
    }

    fn stmt(&mut self) -> Result<SStmt, FrontendError> {
        let label = self.label();
        let pos = self.here();
        let kind = if self.eat_kw("exit") {
            SKind::Exit
        } else if self.eat_kw("if") {
            self.if_rest()?
        } else if self.eat_kw("while") {
            let cond = self.expr()?;
            let body = self.block()?;
            SKind::While { cond, body }
        } else if self.eat_kw("for") {
            let var = self.ident()?;
            if !self.eat_kw("in") {
                return self.err("expected `in`");
            }
            let lo = self.bound()?;
            self.expect(Tok::DotDot)?;
            let hi = self.bound()?;
            let body = self.block()?;
            SKind::For { var, lo, hi, body }
        } else {
            let target = self.name()?;
            self.expect(Tok::Arrow)?;
            let rhs = self.rhs()?;
            SKind::Assign { target, rhs }
        };
        Ok(SStmt { label, kind, pos })
    }

    fn if_rest(&mut self) -> Result<SKind, FrontendError> {
        let cond = self.expr()?;
        let then_branch = self.block()?;
        // `else` may sit on the next line
        let save = self.pos;
        self.skip_newlines();
        let else_branch = if self.eat_kw("else") {
            if self.is_kw("if") {
                let pos = self.here();
                self.bump();
                let kind = self.if_rest()?;
                vec![SStmt { label: None, kind, pos }]
            } else {
                self.block()?
            }
        } else {
            self.pos = save;
            Vec::new()
        };
        Ok(SKind::If { cond, then_branch, else_branch })
    }

    fn name(&mut self) -> Result<Name, FrontendError> {
        let pos = self.here();
        let base = self.ident()?;
        let index = if *self.peek() == Tok::LBracket {
            self.bump();
            let ix = match self.peek().clone() {
                Tok::Int(_) | Tok::Minus => Index::Lit(self.int()?),
                _ => {
                    let v = self.ident()?;
                    let off = match self.peek() {
                        Tok::Plus => {
                            self.bump();
                            self.int()?
                        }
                        Tok::Minus => {
                            self.bump();
                            -self.int()?
                        }
                        _ => 0,
                    };
                    Index::Name(v, off)
                }
            };
            self.expect(Tok::RBracket)?;
            Some(ix)
        } else {
            None
        };
        Ok(Name { base, index, pos })
    }

    fn args(&mut self) -> Result<Vec<SExpr>, FrontendError> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if *self.peek() == Tok::RParen {
            self.bump();
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            match self.bump() {
                Tok::Comma => continue,
                Tok::RParen => return Ok(out),
                other => {
                    self.pos -= 1;
                    return self.err(format!("expected `,` or `)`, found {}", other.describe()));
                }
            }
        }
    }

    fn rhs(&mut self) -> Result<Rhs, FrontendError> {
        let head = match self.peek() {
            Tok::Ident(s) if *self.peek_at(1) == Tok::LParen => s.clone(),
            _ => return Ok(Rhs::Expr(self.expr()?)),
        };
        let two = |p: &Self, args: Vec<SExpr>, what: &str| -> Result<(SExpr, SExpr), FrontendError> {
            match <[SExpr; 2]>::try_from(args) {
                Ok([a, b]) => Ok((a, b)),
                Err(_) => p.err(format!("{what} takes a scale and a mean")),
            }
        };
        match head.as_str() {
            "Lap" | "DLap" | "LapPos" => {
                self.bump();
                let args = self.args()?;
                let (scale, mean) = two(self, args, &head)?;
                Ok(match head.as_str() {
                    "Lap" => Rhs::Lap { scale, mean },
                    "DLap" => Rhs::DLap { scale, mean },
                    _ => Rhs::LapPos { scale, mean },
                })
            }
            "expmech" | "choose" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let name = self.name()?;
                self.expect(Tok::Comma)?;
                let scale = self.expr()?;
                let mut args = Vec::new();
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen)?;
                Ok(if head == "expmech" { Rhs::ExpMech { name, scale, args } } else { Rhs::Choose { name, scale, args } })
            }
            "disc" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let arg = self.expr()?;
                self.expect(Tok::Comma)?;
                self.expect(Tok::LBracket)?;
                let mut seq = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    seq.push(self.expr()?);
                }
                self.expect(Tok::RBracket)?;
                self.expect(Tok::RParen)?;
                Ok(Rhs::Disc { arg, seq })
            }
            "argmax" => {
                self.bump();
                let args = self.args()?;
                if args.is_empty() {
                    return self.err("argmax needs at least one argument");
                }
                Ok(Rhs::Argmax { args })
            }
            _ => Ok(Rhs::Expr(self.expr()?)),
        }
    }

    pub fn expr(&mut self) -> Result<SExpr, FrontendError> {
        let mut a = self.and_expr()?;
        while self.eat_kw("or") {
            let b = self.and_expr()?;
            a = SExpr::Or(Box::new(a), Box::new(b));
        }
        Ok(a)
    }

    fn and_expr(&mut self) -> Result<SExpr, FrontendError> {
        let mut a = self.not_expr()?;
        while self.eat_kw("and") {
            let b = self.not_expr()?;
            a = SExpr::And(Box::new(a), Box::new(b));
        }
        Ok(a)
    }

    fn not_expr(&mut self) -> Result<SExpr, FrontendError> {
        if self.eat_kw("not") {
            return Ok(SExpr::Not(Box::new(self.not_expr()?)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<SExpr, FrontendError> {
        let a = self.arith()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::EqEq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            _ => return Ok(a),
        };
        self.bump();
        let b = self.arith()?;
        Ok(SExpr::Cmp(op, Box::new(a), Box::new(b)))
    }

    fn arith(&mut self) -> Result<SExpr, FrontendError> {
        let mut a = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let b = self.term()?;
                    a = SExpr::Add(Box::new(a), Box::new(b));
                }
                Tok::Minus => {
                    self.bump();
                    let b = self.term()?;
                    a = SExpr::Sub(Box::new(a), Box::new(b));
                }
                _ => return Ok(a),
            }
        }
    }

    fn term(&mut self) -> Result<SExpr, FrontendError> {
        let mut a = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let b = self.unary()?;
                    a = SExpr::Mul(Box::new(a), Box::new(b));
                }
                Tok::Slash => {
                    let pos = self.here();
                    self.bump();
                    let b = self.unary()?;
                    a = match (a, b) {
                        (SExpr::Num(x), SExpr::Num(y)) => {
                            if y.is_zero() {
                                return Err(FrontendError::NonRational {
                                    line: pos.line,
                                    col: pos.col,
                                    msg: "division by zero".into(),
                                });
                            }
                            SExpr::Num(x / y)
                        }
                        (a, b) => SExpr::Div(Box::new(a), Box::new(b), pos),
                    };
                }
                _ => return Ok(a),
            }
        }
    }

    fn unary(&mut self) -> Result<SExpr, FrontendError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(match self.unary()? {
                SExpr::Num(x) => SExpr::Num(-x),
                e => SExpr::Neg(Box::new(e)),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<SExpr, FrontendError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(SExpr::Num(Q::from_integer(n)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(SExpr::Bool(s == "true"))
            }
            Tok::Ident(s) if *self.peek_at(1) == Tok::LParen => {
                let pos = self.here();
                if let Some(op) = CmpOp::from_builtin(&s) {
                    self.bump();
                    let args = self.args()?;
                    return match <[SExpr; 2]>::try_from(args) {
                        Ok([a, b]) => Ok(SExpr::Cmp(op, Box::new(a), Box::new(b))),
                        Err(_) => self.err(format!("{s} takes two arguments")),
                    };
                }
                if s == "max" {
                    self.bump();
                    let args = self.args()?;
                    if args.is_empty() {
                        return self.err("max needs at least one argument");
                    }
                    return Ok(SExpr::Max(args, pos));
                }
                Err(FrontendError::UnknownIdent { name: s, line: pos.line, col: pos.col })
            }
            Tok::Ident(_) => Ok(SExpr::Var(self.name()?)),
            other => self.err(format!("expected an expression, found {}", other.describe())),
        }
    }
}
