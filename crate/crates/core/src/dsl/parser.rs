use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::ParseError;
use crate::symbolic::{ConstExpr, Name, Rational};

const KEYWORDS: &[&str] = &["while", "if", "else", "end", "and", "or", "not", "true", "false"];

struct Deferred {
    ids: BTreeSet<Name>,
    line: usize,
    col: usize,
    what: &'static str,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Identifier sets that must turn out to be constants once variables are known.
    must_be_const: Vec<Deferred>,
}

/// Parses a program in the loop language.
pub fn parse(src: &str) -> Result<ProgramAst, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, must_be_const: Vec::new() };
    let prog = p.program()?;
    for d in &p.must_be_const {
        if let Some(v) = d.ids.iter().find(|i| prog.is_variable(i)) {
            return Err(ParseError::Semantic {
                line: d.line,
                col: d.col,
                msg: format!("{} must be constant but mentions variable `{v}`", d.what),
            });
        }
    }
    Ok(prog)
}

/// Parses a standalone polynomial expression.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, must_be_const: Vec::new() };
    let e = p.poly()?;
    p.skip_seps();
    p.expect(Tok::Eof, "end of expression")?;
    Ok(e)
}

/// Parses a standalone boolean condition.
pub fn parse_bool(src: &str) -> Result<BoolExpr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, must_be_const: Vec::new() };
    let e = p.bexpr()?;
    p.skip_seps();
    p.expect(Tok::Eof, "end of condition")?;
    Ok(e)
}

/// Parses a constant such as `1/2` or `p*(1-q)` into the constant field.
pub fn parse_const(src: &str) -> Result<ConstExpr, ParseError> {
    let e = parse_expr(src)?;
    e.to_symbolic_const()
        .map_err(|msg| ParseError::Semantic { line: 1, col: 1, msg })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, msg: msg.into() })
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(r) => format!("`{r}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Sep => "end of statement".into(),
            Tok::Eof => "end of input".into(),
            other => format!("{other:?}"),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {}", Self::describe(self.peek())))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", Self::describe(self.peek())))
        }
    }

    fn skip_seps(&mut self) {
        while *self.peek() == Tok::Sep {
            self.bump();
        }
    }

    fn ident(&mut self) -> Result<Name, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(Name::from(s))
            }
            other => self.err(format!("expected identifier, found {}", Self::describe(&other))),
        }
    }

    fn program(&mut self) -> Result<ProgramAst, ParseError> {
        self.skip_seps();
        let mut init = Vec::new();
        while !self.is_kw("while") {
            if *self.peek() == Tok::Eof {
                return self.err("missing `while` loop");
            }
            init.push(self.statement()?);
            self.end_of_statement(&["while"])?;
            self.skip_seps();
        }
        self.expect_kw("while")?;
        let guard = self.bexpr()?;
        self.expect(Tok::Colon, "`:` after loop guard")?;
        let body = self.block(&["end"])?;
        self.expect_kw("end")?;
        self.skip_seps();
        if *self.peek() != Tok::Eof {
            return self.err("unexpected input after the loop");
        }
        Ok(ProgramAst::new(init, guard, body))
    }

    fn end_of_statement(&mut self, terminators: &[&str]) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Sep | Tok::Eof => Ok(()),
            Tok::Ident(s) if terminators.contains(&s.as_str()) => Ok(()),
            other => {
                let d = Self::describe(other);
                self.err(format!("expected end of statement, found {d}"))
            }
        }
    }

    fn block(&mut self, terminators: &[&str]) -> Result<Vec<Statement>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_seps();
            if terminators.iter().any(|t| self.is_kw(t)) {
                break;
            }
            if *self.peek() == Tok::Eof {
                return self.err(format!("expected `{}`", terminators.join("` or `")));
            }
            out.push(self.statement()?);
            self.end_of_statement(terminators)?;
        }
        if out.is_empty() {
            return self.err("empty block");
        }
        Ok(out)
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        if self.is_kw("if") {
            return self.if_stmt();
        }
        let mut targets = vec![self.ident()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            targets.push(self.ident()?);
        }
        self.expect(Tok::Assign, "`=`")?;
        let mut rhs = vec![self.rhs_item()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            rhs.push(self.rhs_item()?);
        }
        if targets.len() != rhs.len() {
            return self.err(format!(
                "{} targets but {} right-hand sides",
                targets.len(),
                rhs.len()
            ));
        }
        let guard = if *self.peek() == Tok::LBracket {
            if targets.len() != 1 {
                return self.err("a guarded assignment has exactly one target");
            }
            self.bump();
            let c = self.bexpr()?;
            self.expect(Tok::RBracket, "`]`")?;
            Some((c, self.ident()?))
        } else {
            None
        };
        Ok(Statement::Assign { targets, rhs, guard })
    }

    fn if_stmt(&mut self) -> Result<Statement, ParseError> {
        self.expect_kw("if")?;
        let c = self.bexpr()?;
        self.expect(Tok::Colon, "`:` after condition")?;
        let b = self.block(&["else", "end"])?;
        let mut branches = vec![(c, b)];
        let mut else_branch = None;
        while self.is_kw("else") {
            self.bump();
            if self.is_kw("if") {
                self.bump();
                let c = self.bexpr()?;
                self.expect(Tok::Colon, "`:` after condition")?;
                let b = self.block(&["else", "end"])?;
                branches.push((c, b));
            } else {
                self.expect(Tok::Colon, "`:` after `else`")?;
                else_branch = Some(self.block(&["end"])?);
                break;
            }
        }
        self.expect_kw("end")?;
        Ok(Statement::If { branches, else_branch })
    }

    fn starts_expr(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()),
            Tok::Num(_) | Tok::Int(_) | Tok::LParen | Tok::Minus => true,
            _ => false,
        }
    }

    fn rhs_item(&mut self) -> Result<AssignRhs, ParseError> {
        let (line, col) = self.here();
        if let (Tok::Ident(name), Tok::LParen) = (self.peek().clone(), self.peek_at(1).clone()) {
            if is_distribution(&name) {
                self.bump();
                self.bump();
                let mut params = Vec::new();
                if *self.peek() != Tok::RParen {
                    params.push(self.poly()?);
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        params.push(self.poly()?);
                    }
                }
                self.expect(Tok::RParen, "`)`")?;
                if params.len() != dist_arity(&name) {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        msg: format!("{name} expects {} parameter(s)", dist_arity(&name)),
                    });
                }
                self.check_divisions(&params, name == "Exponential", line, col);
                return Ok(AssignRhs::Dist { name: Name::from(name), params });
            }
        }
        let mut options = Vec::new();
        loop {
            let v = self.poly()?;
            self.check_divisions(std::slice::from_ref(&v), false, line, col);
            if *self.peek() == Tok::LBrace {
                self.bump();
                let p = self.poly()?;
                self.expect(Tok::RBrace, "`}`")?;
                let mut ids = BTreeSet::new();
                p.identifiers(&mut ids);
                self.must_be_const.push(Deferred { ids, line, col, what: "probability" });
                options.push((v, Some(p)));
                if self.starts_expr() {
                    continue;
                }
            } else {
                options.push((v, None));
            }
            break;
        }
        validate_probabilities(&options).map_err(|msg| ParseError::Probability { line, col, msg })?;
        Ok(AssignRhs::Categorical(options))
    }

    /// Divisors must be constant; the single `Exponential(c/p)` form is exempt at top level.
    fn check_divisions(&mut self, exprs: &[Expr], exempt_top: bool, line: usize, col: usize) {
        fn walk(e: &Expr, top_exempt: bool, out: &mut Vec<BTreeSet<Name>>) {
            match e {
                Expr::Num(_) | Expr::Ident(_) => {}
                Expr::Neg(a) | Expr::Pow(a, _) => walk(a, false, out),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                    walk(a, false, out);
                    walk(b, false, out);
                }
                Expr::Div(a, b) => {
                    if top_exempt {
                        // numerator of the special form must be constant
                        let mut ids = BTreeSet::new();
                        a.identifiers(&mut ids);
                        out.push(ids);
                    } else {
                        let mut ids = BTreeSet::new();
                        b.identifiers(&mut ids);
                        out.push(ids);
                    }
                    walk(a, false, out);
                    walk(b, false, out);
                }
            }
        }
        let mut sets = Vec::new();
        for e in exprs {
            walk(e, exempt_top, &mut sets);
        }
        for ids in sets {
            self.must_be_const.push(Deferred { ids, line, col, what: "divisor" });
        }
    }

    fn poly(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if *self.peek() == Tok::StarStar {
            self.bump();
            return match self.bump() {
                Tok::Int(k) if k <= u32::MAX as u64 => Ok(Expr::Pow(Box::new(base), k as u32)),
                _ => {
                    self.pos -= 1;
                    self.err("exponent must be a non-negative integer literal")
                }
            };
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Num(Rational::from_integer(i.into())))
            }
            Tok::Num(r) => {
                self.bump();
                Ok(Expr::Num(r))
            }
            Tok::Ident(_) => Ok(Expr::Ident(self.ident()?)),
            Tok::LParen => {
                self.bump();
                let e = self.poly()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            other => self.err(format!("expected expression, found {}", Self::describe(&other))),
        }
    }

    fn bexpr(&mut self) -> Result<BoolExpr, ParseError> {
        let mut lhs = self.band()?;
        while self.is_kw("or") {
            self.bump();
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(self.band()?));
        }
        Ok(lhs)
    }

    fn band(&mut self) -> Result<BoolExpr, ParseError> {
        let mut lhs = self.bnot()?;
        while self.is_kw("and") {
            self.bump();
            lhs = BoolExpr::And(Box::new(lhs), Box::new(self.bnot()?));
        }
        Ok(lhs)
    }

    fn bnot(&mut self) -> Result<BoolExpr, ParseError> {
        if self.is_kw("not") {
            self.bump();
            return Ok(BoolExpr::Not(Box::new(self.bnot()?)));
        }
        self.batom()
    }

    fn batom(&mut self) -> Result<BoolExpr, ParseError> {
        if self.is_kw("true") {
            self.bump();
            return Ok(BoolExpr::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(BoolExpr::False);
        }
        if *self.peek() == Tok::LParen {
            let save = self.pos;
            if let Ok(c) = self.comparison() {
                return Ok(c);
            }
            self.pos = save;
            self.bump();
            let b = self.bexpr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(b);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<BoolExpr, ParseError> {
        let a = self.poly()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Gt => CmpOp::Gt,
            Tok::Le => CmpOp::Le,
            Tok::Ge => CmpOp::Ge,
            other => {
                let d = Self::describe(other);
                return self.err(format!("expected comparison operator, found {d}"));
            }
        };
        self.bump();
        let b = self.poly()?;
        Ok(BoolExpr::Cmp(op, a, b))
    }
}

/// Checks numeric categorical probabilities: each in [0, 1], summing to 1
/// (or at most 1 when the last one is omitted).
fn validate_probabilities(options: &[(Expr, Option<Expr>)]) -> Result<(), String> {
    let mut sum = Rational::zero();
    let mut all_numeric = true;
    for (_, p) in options {
        let Some(p) = p else { continue };
        match p.to_symbolic_const().ok().and_then(|c| c.as_rational().cloned()) {
            Some(r) => {
                if r.is_negative() || r > Rational::one() {
                    return Err(format!("probability {r} is outside [0, 1]"));
                }
                sum += r;
            }
            None => all_numeric = false,
        }
    }
    if !all_numeric {
        return Ok(());
    }
    let omitted = options.last().is_some_and(|(_, p)| p.is_none());
    if omitted && options.len() == 1 {
        return Ok(());
    }
    if omitted {
        if sum > Rational::one() {
            return Err(format!("probabilities sum to {sum}, exceeding 1"));
        }
    } else if sum != Rational::one() {
        return Err(format!("probabilities sum to {sum}, not 1"));
    }
    Ok(())
}
