//! Goto-style intermediate representation.
//!
//! A program is a set of shared/local declarations, optional functions, and
//! one or more thread bodies. The first thread block is the entry thread;
//! every other thread must be spawned by a `start_thread` instruction.
//! Control flow is expressed with labels, gotos and guarded instructions
//! (`[cond] instr;`), mirroring the output of a structured-to-goto lowering:
//! an `if`/`else` becomes a guarded jump plus labels, a loop becomes a
//! backward jump.
//!
//! Expressions are never evaluated by the analyses; they only matter for the
//! variables (and address-taken objects) they mention.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Identifies a thread or function body within a [`Program`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum BodyId {
    Thread(u16),
    Func(u16),
}

/// Location of an instruction: owning body, index in that body, source line.
///
/// `body`/`index` refer to the program the instruction was parsed from, so a
/// position stays meaningful across analysis-only transformations (loop body
/// duplication keeps the original coordinates in [`Instruction::origin`]).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Position {
    pub body: BodyId,
    pub index: u32,
    pub line: u32,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.body {
            BodyId::Thread(t) => write!(f, "thread#{}:{} (line {})", t, self.index, self.line),
            BodyId::Func(n) => write!(f, "func#{}:{} (line {})", n, self.index, self.line),
        }
    }
}

/// The fence vocabulary: full, lightweight, control, dependency.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum FenceType {
    Full,
    Lightweight,
    Control,
    Dependency,
}

impl FenceType {
    pub const ALL: [FenceType; 4] = [
        FenceType::Full,
        FenceType::Lightweight,
        FenceType::Control,
        FenceType::Dependency,
    ];

    /// Short token used in IR syntax, reports and LP variable names.
    pub fn token(self) -> &'static str {
        match self {
            FenceType::Full => "f",
            FenceType::Lightweight => "lwf",
            FenceType::Control => "cf",
            FenceType::Dependency => "dp",
        }
    }

    pub fn from_token(s: &str) -> Option<FenceType> {
        match s {
            "f" => Some(FenceType::Full),
            "lwf" => Some(FenceType::Lightweight),
            "cf" => Some(FenceType::Control),
            "dp" => Some(FenceType::Dependency),
            _ => None,
        }
    }
}

impl fmt::Display for FenceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub fn token(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnOp {
    Not,
    Neg,
}

/// Uninterpreted expression. Only variable mentions matter to the analyses.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expr {
    Var(String),
    Lit(i64),
    /// `base[index]`
    Index(String, Box<Expr>),
    /// `*ptr`
    Deref(String),
    /// `&obj`
    AddrOf(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Nondet,
}

impl Expr {
    /// Every variable name mentioned anywhere in the expression.
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) | Expr::Deref(v) | Expr::AddrOf(v) => out.push(v.clone()),
            Expr::Index(b, e) => {
                out.push(b.clone());
                e.vars(out);
            }
            Expr::Unary(_, e) => e.vars(out),
            Expr::Binary(_, l, r) => {
                l.vars(out);
                r.vars(out);
            }
            Expr::Lit(_) | Expr::Nondet => {}
        }
    }
}

/// Assignment target.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Lvalue {
    Var(String),
    /// `base[index] = ...`
    Index(String, Expr),
    /// `*ptr = ...`
    Deref(String),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum InstrKind {
    Assign(Lvalue, Expr),
    /// `[cond] instr;` — the guarded instruction is reachable or bypassed.
    Guard(Expr, Box<Instruction>),
    Goto(String),
    Label(String),
    Assume(Expr),
    Assert(Expr),
    Skip,
    AtomicBegin,
    AtomicEnd,
    StartThread(String),
    EndThread,
    Call(String),
    /// `fence(t);` — for `dp`, an optional source annotation
    /// `fence(dp, <label>, <base>);` names the read the dependency starts at.
    Fence {
        fence: FenceType,
        dep_source: Option<DepSource>,
    },
    EndFunction,
}

/// Source annotation of a dependency pseudo-fence: the instruction carrying
/// the source read (referenced by label) and the base object it reads.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DepSource {
    pub label: String,
    pub base: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Instruction {
    pub kind: InstrKind,
    pub line: u32,
    /// Coordinates in the program this instruction originally came from.
    /// Survives loop-body duplication so fence placement can always refer
    /// back to the user's program.
    pub origin: Position,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Body {
    pub name: String,
    pub instrs: Vec<Instruction>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SharedDecl {
    pub name: String,
    pub array_size: Option<u64>,
    pub volatile: bool,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Program {
    pub shared: Vec<SharedDecl>,
    pub locals: Vec<String>,
    pub functions: Vec<Body>,
    /// `threads[0]` is the entry thread.
    pub threads: Vec<Body>,
}

impl Program {
    pub fn body(&self, id: BodyId) -> &Body {
        match id {
            BodyId::Thread(i) => &self.threads[i as usize],
            BodyId::Func(i) => &self.functions[i as usize],
        }
    }

    pub fn body_mut(&mut self, id: BodyId) -> &mut Body {
        match id {
            BodyId::Thread(i) => &mut self.threads[i as usize],
            BodyId::Func(i) => &mut self.functions[i as usize],
        }
    }

    pub fn body_ids(&self) -> impl Iterator<Item = BodyId> + '_ {
        (0..self.threads.len() as u16)
            .map(BodyId::Thread)
            .chain((0..self.functions.len() as u16).map(BodyId::Func))
    }

    pub fn function_index(&self, name: &str) -> Option<u16> {
        self.functions.iter().position(|b| b.name == name).map(|i| i as u16)
    }

    pub fn thread_index(&self, name: &str) -> Option<u16> {
        self.threads.iter().position(|b| b.name == name).map(|i| i as u16)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Error, Debug, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("undefined label `{label}` in `{body}` (line {line})")]
    UndefinedLabel { label: String, body: String, line: u32 },
    #[error("undefined function `{name}` (line {line})")]
    UndefinedFunction { name: String, line: u32 },
    #[error("recursive call graph through `{name}`")]
    RecursiveCall { name: String },
    #[error("program has no thread")]
    NoThread,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Tok<'a> {
    Ident(&'a str),
    Int(i64),
    Sym(&'a str),
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, bytes: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn bump(&mut self) -> u8 {
        let b = self.bytes[self.pos];
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        b
    }

    fn skip_trivia(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.bump();
                }
            } else if b.is_ascii_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Result<(Tok<'a>, u32, u32), ParseError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        if self.pos >= self.bytes.len() {
            return Ok((Tok::Eof, line, col));
        }
        let start = self.pos;
        let b = self.bytes[self.pos];
        if b.is_ascii_alphabetic() || b == b'_' {
            while self.pos < self.bytes.len()
                && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
            {
                self.bump();
            }
            return Ok((Tok::Ident(&self.src[start..self.pos]), line, col));
        }
        if b.is_ascii_digit() {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.bump();
            }
            let text = &self.src[start..self.pos];
            let v = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                line,
                col,
                msg: format!("integer literal `{text}` out of range"),
            })?;
            return Ok((Tok::Int(v), line, col));
        }
        // two-character operators first
        let two = if self.pos + 1 < self.bytes.len() { &self.src[self.pos..self.pos + 2] } else { "" };
        for op in ["==", "!=", "<=", ">=", "&&", "||"] {
            if two == op {
                self.bump();
                self.bump();
                return Ok((Tok::Sym(op), line, col));
            }
        }
        let one = &self.src[self.pos..self.pos + 1];
        if "{}[]();:=,*&!<>+-/%".contains(one) {
            self.bump();
            return Ok((Tok::Sym(one), line, col));
        }
        Err(ParseError::Syntax { line, col, msg: format!("unexpected character `{}`", b as char) })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok<'a>,
    line: u32,
    col: u32,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let (tok, line, col) = lexer.next()?;
        Ok(Parser { lexer, tok, line, col })
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, line, col) = self.lexer.next()?;
        self.tok = tok;
        self.line = line;
        self.col = col;
        Ok(())
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, col: self.col, msg: msg.into() }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.tok == Tok::Sym(s) {
            self.advance()
        } else {
            Err(self.err(format!("expected `{s}`, found {}", describe(self.tok))))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        if let Tok::Ident(name) = self.tok {
            let name = name.to_string();
            self.advance()?;
            Ok(name)
        } else {
            Err(self.err(format!("expected identifier, found {}", describe(self.tok))))
        }
    }

    fn at_ident(&self, kw: &str) -> bool {
        self.tok == Tok::Ident(kw)
    }

    fn parse_program(&mut self) -> Result<Program, ParseError> {
        let mut program = Program::default();
        loop {
            match self.tok {
                Tok::Ident("shared") => {
                    self.advance()?;
                    let name = self.expect_ident()?;
                    let mut array_size = None;
                    if self.tok == Tok::Sym("[") {
                        self.advance()?;
                        if let Tok::Int(n) = self.tok {
                            if n < 0 {
                                return Err(self.err("array size must be non-negative"));
                            }
                            array_size = Some(n as u64);
                            self.advance()?;
                        } else {
                            return Err(self.err("expected array size"));
                        }
                        self.expect_sym("]")?;
                    }
                    let volatile = if self.at_ident("volatile") {
                        self.advance()?;
                        true
                    } else {
                        false
                    };
                    program.shared.push(SharedDecl { name, array_size, volatile });
                }
                Tok::Ident("local") => {
                    self.advance()?;
                    let name = self.expect_ident()?;
                    program.locals.push(name);
                }
                Tok::Ident("func") => {
                    self.advance()?;
                    let name = self.expect_ident()?;
                    let idx = program.functions.len() as u16;
                    let instrs = self.parse_body(BodyId::Func(idx), "end_function")?;
                    program.functions.push(Body { name, instrs });
                }
                Tok::Ident("thread") => {
                    self.advance()?;
                    let name = self.expect_ident()?;
                    let idx = program.threads.len() as u16;
                    let instrs = self.parse_body(BodyId::Thread(idx), "end_thread")?;
                    program.threads.push(Body { name, instrs });
                }
                Tok::Eof => break,
                other => return Err(self.err(format!("expected declaration, found {}", describe(other)))),
            }
        }
        if program.threads.is_empty() {
            return Err(ParseError::NoThread);
        }
        resolve(&program)?;
        Ok(program)
    }

    fn parse_body(&mut self, body: BodyId, end_kw: &str) -> Result<Vec<Instruction>, ParseError> {
        self.expect_sym("{")?;
        let mut instrs = Vec::new();
        loop {
            if self.at_ident(end_kw) {
                let line = self.line;
                self.advance()?;
                self.expect_sym(";").or_else(|_| Ok::<(), ParseError>(()))?;
                let kind = if end_kw == "end_thread" { InstrKind::EndThread } else { InstrKind::EndFunction };
                let index = instrs.len() as u32;
                instrs.push(Instruction { kind, line, origin: Position { body, index, line } });
                break;
            }
            if self.tok == Tok::Eof {
                return Err(self.err(format!("unterminated body, expected `{end_kw}`")));
            }
            let index = instrs.len() as u32;
            let instr = self.parse_instr(body, index)?;
            instrs.push(instr);
        }
        self.expect_sym("}")?;
        Ok(instrs)
    }

    fn parse_instr(&mut self, body: BodyId, index: u32) -> Result<Instruction, ParseError> {
        let line = self.line;
        let origin = Position { body, index, line };
        let kind = self.parse_instr_kind(body, index)?;
        Ok(Instruction { kind, line, origin })
    }

    fn parse_instr_kind(&mut self, body: BodyId, index: u32) -> Result<InstrKind, ParseError> {
        match self.tok {
            Tok::Sym("[") => {
                self.advance()?;
                let cond = self.parse_expr()?;
                self.expect_sym("]")?;
                let inner = self.parse_instr(body, index)?;
                Ok(InstrKind::Guard(cond, Box::new(inner)))
            }
            Tok::Sym("*") => {
                self.advance()?;
                let ptr = self.expect_ident()?;
                self.expect_sym("=")?;
                let rhs = self.parse_expr()?;
                self.expect_sym(";")?;
                Ok(InstrKind::Assign(Lvalue::Deref(ptr), rhs))
            }
            Tok::Ident("goto") => {
                self.advance()?;
                let label = self.expect_ident()?;
                self.expect_sym(";")?;
                Ok(InstrKind::Goto(label))
            }
            Tok::Ident("assume") => {
                self.advance()?;
                self.expect_sym("(")?;
                let e = self.parse_expr()?;
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                Ok(InstrKind::Assume(e))
            }
            Tok::Ident("assert") => {
                self.advance()?;
                self.expect_sym("(")?;
                let e = self.parse_expr()?;
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                Ok(InstrKind::Assert(e))
            }
            Tok::Ident("skip") => {
                self.advance()?;
                self.expect_sym(";")?;
                Ok(InstrKind::Skip)
            }
            Tok::Ident("atomic_begin") => {
                self.advance()?;
                self.expect_sym(";")?;
                Ok(InstrKind::AtomicBegin)
            }
            Tok::Ident("atomic_end") => {
                self.advance()?;
                self.expect_sym(";")?;
                Ok(InstrKind::AtomicEnd)
            }
            Tok::Ident("start_thread") => {
                self.advance()?;
                let t = self.expect_ident()?;
                self.expect_sym(";")?;
                Ok(InstrKind::StartThread(t))
            }
            Tok::Ident("call") => {
                self.advance()?;
                let f = self.expect_ident()?;
                self.expect_sym(";")?;
                Ok(InstrKind::Call(f))
            }
            Tok::Ident("fence") => {
                self.advance()?;
                self.expect_sym("(")?;
                let tok = self.expect_ident()?;
                let fence = FenceType::from_token(&tok)
                    .ok_or_else(|| self.err(format!("unknown fence type `{tok}`")))?;
                let mut dep_source = None;
                if self.tok == Tok::Sym(",") {
                    if fence != FenceType::Dependency {
                        return Err(self.err("only fence(dp, ...) takes a source annotation"));
                    }
                    self.advance()?;
                    let label = self.expect_ident()?;
                    self.expect_sym(",")?;
                    let base = self.expect_ident()?;
                    dep_source = Some(DepSource { label, base });
                }
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                Ok(InstrKind::Fence { fence, dep_source })
            }
            Tok::Ident(_) => {
                let name = self.expect_ident()?;
                match self.tok {
                    Tok::Sym(":") => {
                        self.advance()?;
                        Ok(InstrKind::Label(name))
                    }
                    Tok::Sym("=") => {
                        self.advance()?;
                        let rhs = self.parse_expr()?;
                        self.expect_sym(";")?;
                        Ok(InstrKind::Assign(Lvalue::Var(name), rhs))
                    }
                    Tok::Sym("[") => {
                        self.advance()?;
                        let idx = self.parse_expr()?;
                        self.expect_sym("]")?;
                        self.expect_sym("=")?;
                        let rhs = self.parse_expr()?;
                        self.expect_sym(";")?;
                        Ok(InstrKind::Assign(Lvalue::Index(name, idx), rhs))
                    }
                    other => Err(self.err(format!(
                        "expected `:`, `=` or `[` after `{name}`, found {}",
                        describe(other)
                    ))),
                }
            }
            other => Err(self.err(format!("expected instruction, found {}", describe(other)))),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        self.parse_bin(0)
    }

    fn parse_bin(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let (op, prec) = match self.tok {
                Tok::Sym("||") => (BinOp::Or, 1),
                Tok::Sym("&&") => (BinOp::And, 2),
                Tok::Sym("==") => (BinOp::Eq, 3),
                Tok::Sym("!=") => (BinOp::Ne, 3),
                Tok::Sym("<") => (BinOp::Lt, 3),
                Tok::Sym("<=") => (BinOp::Le, 3),
                Tok::Sym(">") => (BinOp::Gt, 3),
                Tok::Sym(">=") => (BinOp::Ge, 3),
                Tok::Sym("+") => (BinOp::Add, 4),
                Tok::Sym("-") => (BinOp::Sub, 4),
                Tok::Sym("*") => (BinOp::Mul, 5),
                Tok::Sym("/") => (BinOp::Div, 5),
                Tok::Sym("%") => (BinOp::Mod, 5),
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.advance()?;
            let rhs = self.parse_bin(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        match self.tok {
            Tok::Sym("!") => {
                self.advance()?;
                Ok(Expr::Unary(UnOp::Not, Box::new(self.parse_unary()?)))
            }
            Tok::Sym("-") => {
                self.advance()?;
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.parse_unary()?)))
            }
            Tok::Sym("*") => {
                self.advance()?;
                Ok(Expr::Deref(self.expect_ident()?))
            }
            Tok::Sym("&") => {
                self.advance()?;
                Ok(Expr::AddrOf(self.expect_ident()?))
            }
            Tok::Sym("(") => {
                self.advance()?;
                let e = self.parse_expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Int(v) => {
                self.advance()?;
                Ok(Expr::Lit(v))
            }
            Tok::Ident("nondet") => {
                self.advance()?;
                self.expect_sym("(")?;
                self.expect_sym(")")?;
                Ok(Expr::Nondet)
            }
            Tok::Ident(_) => {
                let name = self.expect_ident()?;
                if self.tok == Tok::Sym("[") {
                    self.advance()?;
                    let idx = self.parse_expr()?;
                    self.expect_sym("]")?;
                    Ok(Expr::Index(name, Box::new(idx)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            other => Err(self.err(format!("expected expression, found {}", describe(other)))),
        }
    }
}

fn describe(tok: Tok<'_>) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

/// Parse IR text into a [`Program`].
///
/// Labels, function references and the call graph are resolved eagerly: a
/// goto to a missing label, a call to an undefined function, or recursion
/// are parse errors here. [`validate`] reports the same conditions (and
/// more) as diagnostics on an already-constructed program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    Parser::new(text)?.parse_program()
}

fn resolve(p: &Program) -> Result<(), ParseError> {
    for id in p.body_ids() {
        let body = p.body(id);
        let labels: HashSet<&str> = body
            .instrs
            .iter()
            .filter_map(|i| match &i.kind {
                InstrKind::Label(l) => Some(l.as_str()),
                _ => None,
            })
            .collect();
        for instr in &body.instrs {
            visit_gotos(instr, &mut |label, line| {
                if labels.contains(label) {
                    Ok(())
                } else {
                    Err(ParseError::UndefinedLabel {
                        label: label.to_string(),
                        body: body.name.clone(),
                        line,
                    })
                }
            })?;
            visit_calls(instr, &mut |name, line| {
                if p.function_index(name).is_some() {
                    Ok(())
                } else {
                    Err(ParseError::UndefinedFunction { name: name.to_string(), line })
                }
            })?;
        }
    }
    if let Some(name) = find_recursion(p) {
        return Err(ParseError::RecursiveCall { name });
    }
    Ok(())
}

fn visit_gotos<E>(
    instr: &Instruction,
    f: &mut impl FnMut(&str, u32) -> Result<(), E>,
) -> Result<(), E> {
    match &instr.kind {
        InstrKind::Goto(l) => f(l, instr.line),
        InstrKind::Guard(_, inner) => visit_gotos(inner, f),
        _ => Ok(()),
    }
}

fn visit_calls<E>(
    instr: &Instruction,
    f: &mut impl FnMut(&str, u32) -> Result<(), E>,
) -> Result<(), E> {
    match &instr.kind {
        InstrKind::Call(name) => f(name, instr.line),
        InstrKind::Guard(_, inner) => visit_calls(inner, f),
        _ => Ok(()),
    }
}

/// Returns the name of a function on a call-graph cycle, if any.
fn find_recursion(p: &Program) -> Option<String> {
    // Edges between functions only; thread bodies cannot be called.
    let mut edges: HashMap<&str, Vec<&str>> = HashMap::new();
    for func in &p.functions {
        let mut callees = Vec::new();
        for instr in &func.instrs {
            let _ = visit_calls(instr, &mut |name, _| {
                callees.push(name.to_string());
                Ok::<(), ()>(())
            });
        }
        // Leak-free: store references into the program via lookup below.
        let entry = edges.entry(func.name.as_str()).or_default();
        for callee in callees {
            if let Some(f) = p.functions.iter().find(|f| f.name == callee) {
                entry.push(f.name.as_str());
            }
        }
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let mut marks: HashMap<&str, Mark> = edges.keys().map(|k| (*k, Mark::White)).collect();
    fn dfs<'a>(
        n: &'a str,
        edges: &HashMap<&'a str, Vec<&'a str>>,
        marks: &mut HashMap<&'a str, Mark>,
    ) -> Option<String> {
        marks.insert(n, Mark::Grey);
        for succ in edges.get(n).into_iter().flatten() {
            match marks.get(succ).copied().unwrap_or(Mark::White) {
                Mark::Grey => return Some(succ.to_string()),
                Mark::White => {
                    if let Some(hit) = dfs(succ, edges, marks) {
                        return Some(hit);
                    }
                }
                Mark::Black => {}
            }
        }
        marks.insert(n, Mark::Black);
        None
    }
    let names: Vec<&str> = edges.keys().copied().collect();
    for n in names {
        if marks[n] == Mark::White {
            if let Some(hit) = dfs(n, &edges, &mut marks) {
                return Some(hit);
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Diagnostic {
    UndefinedLabel { body: String, label: String },
    DuplicateLabel { body: String, label: String },
    UndefinedFunction { name: String },
    RecursiveCall { name: String },
    UnbalancedAtomic { body: String },
    UndeclaredVariable { name: String },
    StartThreadUndefined { name: String },
    StartThreadOfEntry { name: String },
    ThreadNeverStarted { name: String },
    ThreadStartedTwice { name: String },
    StartThreadInLoop { thread: String },
    MissingEndMarker { body: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UndefinedLabel { body, label } => {
                write!(f, "undefined label `{label}` in `{body}`")
            }
            Diagnostic::DuplicateLabel { body, label } => {
                write!(f, "duplicate label `{label}` in `{body}`")
            }
            Diagnostic::UndefinedFunction { name } => write!(f, "undefined function `{name}`"),
            Diagnostic::RecursiveCall { name } => write!(f, "recursive call through `{name}`"),
            Diagnostic::UnbalancedAtomic { body } => {
                write!(f, "unbalanced atomic section in `{body}`")
            }
            Diagnostic::UndeclaredVariable { name } => write!(f, "undeclared variable `{name}`"),
            Diagnostic::StartThreadUndefined { name } => {
                write!(f, "start_thread of undefined thread `{name}`")
            }
            Diagnostic::StartThreadOfEntry { name } => {
                write!(f, "start_thread of entry thread `{name}`")
            }
            Diagnostic::ThreadNeverStarted { name } => {
                write!(f, "thread `{name}` is never started")
            }
            Diagnostic::ThreadStartedTwice { name } => {
                write!(f, "thread `{name}` started more than once")
            }
            Diagnostic::StartThreadInLoop { thread } => {
                write!(f, "start_thread of `{thread}` inside a loop")
            }
            Diagnostic::MissingEndMarker { body } => {
                write!(f, "body `{body}` does not end with its end marker")
            }
        }
    }
}

/// Check every program invariant; the empty list means the program is valid.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    // Declarations
    let mut declared: HashSet<&str> = HashSet::new();
    for d in &p.shared {
        declared.insert(&d.name);
    }
    for l in &p.locals {
        declared.insert(l);
    }

    for id in p.body_ids() {
        let body = p.body(id);
        // label table
        let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, instr) in body.instrs.iter().enumerate() {
            if let InstrKind::Label(l) = &instr.kind {
                if labels.insert(l.as_str(), i).is_some() {
                    out.push(Diagnostic::DuplicateLabel { body: body.name.clone(), label: l.clone() });
                }
            }
        }
        let mut depth: i32 = 0;
        for instr in &body.instrs {
            check_instr(p, body, instr, &labels, &declared, &mut depth, &mut out);
        }
        if depth != 0 {
            out.push(Diagnostic::UnbalancedAtomic { body: body.name.clone() });
        }
        let end_ok = matches!(
            (id, body.instrs.last().map(|i| &i.kind)),
            (BodyId::Thread(_), Some(InstrKind::EndThread)) | (BodyId::Func(_), Some(InstrKind::EndFunction))
        );
        if !end_ok {
            out.push(Diagnostic::MissingEndMarker { body: body.name.clone() });
        }
    }

    if let Some(name) = find_recursion(p) {
        out.push(Diagnostic::RecursiveCall { name });
    }

    // Thread spawning discipline: entry thread runs by itself, every other
    // thread is started exactly once, and not from inside a loop.
    let mut started: HashMap<String, u32> = HashMap::new();
    for id in p.body_ids() {
        let body = p.body(id);
        let labels: BTreeMap<&str, usize> = body
            .instrs
            .iter()
            .enumerate()
            .filter_map(|(i, ins)| match &ins.kind {
                InstrKind::Label(l) => Some((l.as_str(), i)),
                _ => None,
            })
            .collect();
        // indices covered by some backward jump
        let mut loop_spans: Vec<(usize, usize)> = Vec::new();
        for (i, instr) in body.instrs.iter().enumerate() {
            let mut record = |label: &str| {
                if let Some(&t) = labels.get(label) {
                    if t <= i {
                        loop_spans.push((t, i));
                    }
                }
            };
            let _ = visit_gotos(instr, &mut |l, _| {
                record(l);
                Ok::<(), ()>(())
            });
        }
        for (i, instr) in body.instrs.iter().enumerate() {
            let mut on_start = |name: &str| {
                *started.entry(name.to_string()).or_insert(0) += 1;
                if p.thread_index(name).is_none() {
                    out.push(Diagnostic::StartThreadUndefined { name: name.to_string() });
                } else if Some(name) == p.threads.first().map(|t| t.name.as_str()) {
                    out.push(Diagnostic::StartThreadOfEntry { name: name.to_string() });
                }
                if loop_spans.iter().any(|&(a, b)| a <= i && i <= b) {
                    out.push(Diagnostic::StartThreadInLoop { thread: name.to_string() });
                }
            };
            visit_start_threads(instr, &mut on_start);
        }
    }
    for (i, t) in p.threads.iter().enumerate() {
        let n = started.get(t.name.as_str()).copied().unwrap_or(0);
        if i == 0 {
            continue; // entry; start_thread of it already reported
        }
        if n == 0 {
            out.push(Diagnostic::ThreadNeverStarted { name: t.name.clone() });
        } else if n > 1 {
            out.push(Diagnostic::ThreadStartedTwice { name: t.name.clone() });
        }
    }

    out
}

fn visit_start_threads(instr: &Instruction, f: &mut impl FnMut(&str)) {
    match &instr.kind {
        InstrKind::StartThread(t) => f(t),
        InstrKind::Guard(_, inner) => visit_start_threads(inner, f),
        _ => {}
    }
}

fn check_expr_vars(e: &Expr, declared: &HashSet<&str>, out: &mut Vec<Diagnostic>) {
    let mut vars = Vec::new();
    e.vars(&mut vars);
    for v in vars {
        if !declared.contains(v.as_str()) {
            out.push(Diagnostic::UndeclaredVariable { name: v });
        }
    }
}

fn check_instr(
    p: &Program,
    body: &Body,
    instr: &Instruction,
    labels: &BTreeMap<&str, usize>,
    declared: &HashSet<&str>,
    depth: &mut i32,
    out: &mut Vec<Diagnostic>,
) {
    match &instr.kind {
        InstrKind::Assign(lhs, rhs) => {
            match lhs {
                Lvalue::Var(v) | Lvalue::Deref(v) => {
                    if !declared.contains(v.as_str()) {
                        out.push(Diagnostic::UndeclaredVariable { name: v.clone() });
                    }
                }
                Lvalue::Index(b, idx) => {
                    if !declared.contains(b.as_str()) {
                        out.push(Diagnostic::UndeclaredVariable { name: b.clone() });
                    }
                    check_expr_vars(idx, declared, out);
                }
            }
            check_expr_vars(rhs, declared, out);
        }
        InstrKind::Guard(cond, inner) => {
            check_expr_vars(cond, declared, out);
            check_instr(p, body, inner, labels, declared, depth, out);
        }
        InstrKind::Goto(l) => {
            if !labels.contains_key(l.as_str()) {
                out.push(Diagnostic::UndefinedLabel { body: body.name.clone(), label: l.clone() });
            }
        }
        InstrKind::Assume(e) | InstrKind::Assert(e) => check_expr_vars(e, declared, out),
        InstrKind::AtomicBegin => *depth += 1,
        InstrKind::AtomicEnd => {
            *depth -= 1;
            if *depth < 0 {
                out.push(Diagnostic::UnbalancedAtomic { body: body.name.clone() });
                *depth = 0;
            }
        }
        InstrKind::Call(name) => {
            if p.function_index(name).is_none() {
                out.push(Diagnostic::UndefinedFunction { name: name.clone() });
            }
        }
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Pretty printing
// ---------------------------------------------------------------------------

fn write_expr(out: &mut String, e: &Expr, parent_prec: u8) {
    // precedence mirrors the parser
    let prec = match e {
        Expr::Binary(op, _, _) => match op {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
        },
        _ => 6,
    };
    let paren = prec < parent_prec;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Var(v) => out.push_str(v),
        Expr::Lit(v) => out.push_str(&v.to_string()),
        Expr::Index(b, idx) => {
            out.push_str(b);
            out.push('[');
            write_expr(out, idx, 0);
            out.push(']');
        }
        Expr::Deref(v) => {
            out.push('*');
            out.push_str(v);
        }
        Expr::AddrOf(v) => {
            out.push('&');
            out.push_str(v);
        }
        Expr::Unary(op, inner) => {
            out.push_str(match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            });
            write_expr(out, inner, 6);
        }
        Expr::Binary(op, l, r) => {
            write_expr(out, l, prec);
            out.push(' ');
            out.push_str(op.token());
            out.push(' ');
            write_expr(out, r, prec + 1);
        }
        Expr::Nondet => out.push_str("nondet()"),
    }
    if paren {
        out.push(')');
    }
}

fn write_instr(out: &mut String, instr: &Instruction, indent: usize) {
    match &instr.kind {
        InstrKind::Label(l) => {
            out.push_str(&format!("{}:\n", l));
            return;
        }
        _ => out.push_str(&"  ".repeat(indent)),
    }
    write_instr_kind(out, &instr.kind);
    out.push('\n');
}

fn write_instr_kind(out: &mut String, kind: &InstrKind) {
    match kind {
        InstrKind::Assign(lhs, rhs) => {
            match lhs {
                Lvalue::Var(v) => out.push_str(v),
                Lvalue::Index(b, idx) => {
                    out.push_str(b);
                    out.push('[');
                    write_expr(out, idx, 0);
                    out.push(']');
                }
                Lvalue::Deref(v) => {
                    out.push('*');
                    out.push_str(v);
                }
            }
            out.push_str(" = ");
            write_expr(out, rhs, 0);
            out.push(';');
        }
        InstrKind::Guard(cond, inner) => {
            out.push('[');
            write_expr(out, cond, 0);
            out.push_str("] ");
            write_instr_kind(out, &inner.kind);
        }
        InstrKind::Goto(l) => out.push_str(&format!("goto {l};")),
        InstrKind::Label(l) => out.push_str(&format!("{l}:")),
        InstrKind::Assume(e) => {
            out.push_str("assume(");
            write_expr(out, e, 0);
            out.push_str(");");
        }
        InstrKind::Assert(e) => {
            out.push_str("assert(");
            write_expr(out, e, 0);
            out.push_str(");");
        }
        InstrKind::Skip => out.push_str("skip;"),
        InstrKind::AtomicBegin => out.push_str("atomic_begin;"),
        InstrKind::AtomicEnd => out.push_str("atomic_end;"),
        InstrKind::StartThread(t) => out.push_str(&format!("start_thread {t};")),
        InstrKind::EndThread => out.push_str("end_thread"),
        InstrKind::Call(f) => out.push_str(&format!("call {f};")),
        InstrKind::Fence { fence, dep_source } => match dep_source {
            Some(src) => out.push_str(&format!("fence({}, {}, {});", fence.token(), src.label, src.base)),
            None => out.push_str(&format!("fence({});", fence.token())),
        },
        InstrKind::EndFunction => out.push_str("end_function"),
    }
}

/// Render a program back to IR text. `parse(pretty_print(parse(t)))` equals
/// `parse(t)` up to source line numbers.
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.shared {
        out.push_str("shared ");
        out.push_str(&d.name);
        if let Some(n) = d.array_size {
            out.push_str(&format!("[{n}]"));
        }
        if d.volatile {
            out.push_str(" volatile");
        }
        out.push('\n');
    }
    for l in &p.locals {
        out.push_str(&format!("local {l}\n"));
    }
    for f in &p.functions {
        out.push_str(&format!("func {} {{\n", f.name));
        for instr in &f.instrs {
            write_instr(&mut out, instr, 1);
        }
        out.push_str("}\n");
    }
    for t in &p.threads {
        out.push_str(&format!("thread {} {{\n", t.name));
        for instr in &t.instrs {
            write_instr(&mut out, instr, 1);
        }
        out.push_str("}\n");
    }
    out
}

/// Structural equality that ignores source lines and origins, used to state
/// the parse/print round-trip property.
pub fn same_shape(a: &Program, b: &Program) -> bool {
    fn instr_eq(a: &Instruction, b: &Instruction) -> bool {
        match (&a.kind, &b.kind) {
            (InstrKind::Guard(c1, i1), InstrKind::Guard(c2, i2)) => c1 == c2 && instr_eq(i1, i2),
            (k1, k2) => k1 == k2,
        }
    }
    fn body_eq(a: &Body, b: &Body) -> bool {
        a.name == b.name
            && a.instrs.len() == b.instrs.len()
            && a.instrs.iter().zip(&b.instrs).all(|(x, y)| instr_eq(x, y))
    }
    a.shared == b.shared
        && a.locals == b.locals
        && a.functions.len() == b.functions.len()
        && a.functions.iter().zip(&b.functions).all(|(x, y)| body_eq(x, y))
        && a.threads.len() == b.threads.len()
        && a.threads.iter().zip(&b.threads).all(|(x, y)| body_eq(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_thread_parses() {
        let p = parse_program("thread t0 { end_thread }").unwrap();
        assert_eq!(p.threads.len(), 1);
        assert_eq!(p.threads[0].instrs.len(), 1);
        assert!(matches!(p.threads[0].instrs[0].kind, InstrKind::EndThread));
    }

    #[test]
    fn undefined_label_is_parse_error() {
        let err = parse_program("thread t0 { goto L; end_thread }").unwrap_err();
        assert!(matches!(err, ParseError::UndefinedLabel { .. }));
    }

    #[test]
    fn undefined_function_is_parse_error() {
        let err = parse_program("thread t0 { call f; end_thread }").unwrap_err();
        assert!(matches!(err, ParseError::UndefinedFunction { .. }));
    }

    #[test]
    fn recursion_is_parse_error() {
        let src = "
            func f { call g; end_function }
            func g { call f; end_function }
            thread t0 { call f; end_thread }
        ";
        let err = parse_program(src).unwrap_err();
        assert!(matches!(err, ParseError::RecursiveCall { .. }));
    }

    #[test]
    fn fig5_transcription_parses() {
        let src = "
            shared x
            shared y
            shared z
            local input
            local tmp
            local r1
            local r2
            local r3
            local r4
            thread t1 {
              start_thread t2;
              x = input;
              tmp = nondet();
              [!tmp] goto L1;
              y = 1;
              goto L2;
            L1:
              r1 = z;
            L2:
              x = 1;
              end_thread
            }
            thread t2 {
              r2 = y;
              r3 = z;
              r4 = x;
              end_thread
            }
        ";
        let p = parse_program(src).unwrap();
        assert_eq!(p.threads.len(), 2);
        assert!(validate(&p).is_empty());
        // instructions touching a shared variable
        let shared = ["x", "y", "z"];
        let mut count = 0;
        for t in &p.threads {
            for instr in &t.instrs {
                let mut vars = Vec::new();
                if let InstrKind::Assign(lhs, rhs) = &instr.kind {
                    if let Lvalue::Var(v) = lhs {
                        vars.push(v.clone());
                    }
                    rhs.vars(&mut vars);
                }
                if vars.iter().any(|v| shared.contains(&v.as_str())) {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 7);
    }

    #[test]
    fn unbalanced_atomic_diagnosed() {
        let p = parse_program("thread t0 { atomic_begin; x = 1; end_thread } shared x").unwrap();
        let diags = validate(&p);
        assert!(diags.iter().any(|d| matches!(d, Diagnostic::UnbalancedAtomic { .. })));
    }

    #[test]
    fn recursion_diagnosed_by_validate() {
        let mut p = Program::default();
        p.functions.push(Body {
            name: "f".into(),
            instrs: vec![
                Instruction {
                    kind: InstrKind::Call("g".into()),
                    line: 1,
                    origin: Position { body: BodyId::Func(0), index: 0, line: 1 },
                },
                Instruction {
                    kind: InstrKind::EndFunction,
                    line: 1,
                    origin: Position { body: BodyId::Func(0), index: 1, line: 1 },
                },
            ],
        });
        p.functions.push(Body {
            name: "g".into(),
            instrs: vec![
                Instruction {
                    kind: InstrKind::Call("f".into()),
                    line: 2,
                    origin: Position { body: BodyId::Func(1), index: 0, line: 2 },
                },
                Instruction {
                    kind: InstrKind::EndFunction,
                    line: 2,
                    origin: Position { body: BodyId::Func(1), index: 1, line: 2 },
                },
            ],
        });
        p.threads.push(Body {
            name: "t0".into(),
            instrs: vec![Instruction {
                kind: InstrKind::EndThread,
                line: 3,
                origin: Position { body: BodyId::Thread(0), index: 0, line: 3 },
            }],
        });
        let diags = validate(&p);
        assert!(diags.iter().any(|d| matches!(d, Diagnostic::RecursiveCall { .. })));
    }

    #[test]
    fn start_thread_in_loop_diagnosed() {
        let src = "
            shared x
            thread t0 {
            L:
              x = 1;
              start_thread t1;
              goto L;
              end_thread
            }
            thread t1 { end_thread }
        ";
        let p = parse_program(src).unwrap();
        let diags = validate(&p);
        assert!(diags.iter().any(|d| matches!(d, Diagnostic::StartThreadInLoop { .. })));
    }

    #[test]
    fn print_parse_round_trip() {
        let src = "
            shared x
            shared t[4] volatile
            local p
            local r
            func init { t[0] = 1; end_function }
            thread t0 {
              start_thread t1;
              p = &t + 1;
              *p = x + 3;
              call init;
              [r == 0] goto done;
              atomic_begin;
              x = t[r];
              atomic_end;
            done:
              fence(f);
              end_thread
            }
            thread t1 { r = x; end_thread }
        ";
        let p1 = parse_program(src).unwrap();
        let printed = pretty_print(&p1);
        let p2 = parse_program(&printed).unwrap();
        assert!(same_shape(&p1, &p2), "round trip changed the program:\n{printed}");
        // printing again is stable
        assert_eq!(printed, pretty_print(&p2));
    }
}
